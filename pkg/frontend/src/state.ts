// Editor model: stroke lists per layer with undo/redo, the level slider, and
// the mode toggle. Pure functions so rasters derive deterministically.

import { rasterizeStrokes } from "./raster.js";
import type { Mode, Stroke } from "./types.js";

export interface Layer {
  strokes: Stroke[];
  redo: Stroke[];
}

export interface EditorState {
  resolution: number;
  sketch: Layer;
  mask: Layer;
  level: number;
  mode: Mode;
  photoPng: Uint8Array | null; // original photo bytes, forwarded untouched
}

export const DEFAULT_STROKE_WIDTH = 2;
export const MASK_BRUSH_WIDTH = 12;

export function createState(resolution: number): EditorState {
  return {
    resolution,
    sketch: { strokes: [], redo: [] },
    mask: { strokes: [], redo: [] },
    level: 1.0,
    mode: "edit",
    photoPng: null,
  };
}

export function addStroke(layer: Layer, stroke: Stroke): Layer {
  return { strokes: [...layer.strokes, stroke], redo: [] };
}

export function undo(layer: Layer): Layer {
  if (layer.strokes.length === 0) return layer;
  const strokes = layer.strokes.slice(0, -1);
  return { strokes, redo: [...layer.redo, layer.strokes[layer.strokes.length - 1]] };
}

export function redo(layer: Layer): Layer {
  if (layer.redo.length === 0) return layer;
  const stroke = layer.redo[layer.redo.length - 1];
  return { strokes: [...layer.strokes, stroke], redo: layer.redo.slice(0, -1) };
}

export function clear(): Layer {
  return { strokes: [], redo: [] };
}

export function setLevel(state: EditorState, level: number): EditorState {
  return { ...state, level: Math.min(1, Math.max(0, level)) };
}

export function setMode(state: EditorState, mode: Mode): EditorState {
  return { ...state, mode };
}

export function rasterizeLayer(layer: Layer, resolution: number): Uint8Array {
  return rasterizeStrokes(layer.strokes, resolution);
}
