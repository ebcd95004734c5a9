// Browser entry point: canvas layers, brush tools, the level slider, and the
// submit loop against the refinement service.

import {
  buildEditBody,
  buildRefineBody,
  buildSynthBody,
  fetchModelInfo,
  postEdit,
  postRefine,
  postSynth,
  ServiceRequestError,
} from "./api.js";
import {
  addStroke,
  clear,
  createState,
  DEFAULT_STROKE_WIDTH,
  MASK_BRUSH_WIDTH,
  rasterizeLayer,
  redo,
  setLevel,
  undo,
} from "./state.js";
import type { EditorState } from "./state.js";
import type { Point, Stroke } from "./types.js";

type ActiveLayer = "sketch" | "mask";

let state: EditorState = createState(256);
let baseUrl = "http://127.0.0.1:8765";
let activeLayer: ActiveLayer = "sketch";
let erasing = false;
let currentStroke: Stroke | null = null;
let busy = false;
let pendingSubmit = false;

const root = document.getElementById("app") ?? document.body;
root.innerHTML = `
  <h1>Sketch Studio</h1>
  <div class="toolbar">
    <input id="service-url" value="${baseUrl}" size="28" />
    <button id="connect">Connect</button>
    <span id="model-label" class="muted">not connected</span>
  </div>
  <div class="toolbar">
    <label><input type="radio" name="mode" value="edit" checked /> edit</label>
    <label><input type="radio" name="mode" value="synth" /> synth</label>
    <span class="sep"></span>
    <button id="tool-pen" class="active">pen</button>
    <button id="tool-eraser">eraser</button>
    <button id="tool-mask" class="edit-only">mask brush</button>
    <span class="sep"></span>
    <button id="undo">undo</button>
    <button id="redo">redo</button>
    <button id="clear">clear layer</button>
    <label class="edit-only">photo <input id="photo-file" type="file" accept="image/png" /></label>
  </div>
  <div class="toolbar">
    <label>refinement level
      <input id="level" type="range" min="0" max="1" step="0.01" value="1" list="level-snaps" />
    </label>
    <datalist id="level-snaps">
      <option value="0"></option><option value="0.25"></option><option value="0.5"></option>
      <option value="0.75"></option><option value="1"></option>
    </datalist>
    <span id="level-readout">1.00</span>
    <button id="submit">Refine</button>
    <span id="status" class="muted"></span>
  </div>
  <div id="error" class="error" hidden></div>
  <div class="workspace">
    <div id="canvas-stack" class="stack">
      <canvas id="layer-photo"></canvas>
      <canvas id="layer-mask"></canvas>
      <canvas id="layer-sketch"></canvas>
    </div>
    <div>
      <h2>Results</h2>
      <div id="results" class="results"></div>
    </div>
  </div>
`;

const el = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
const photoCanvas = el<HTMLCanvasElement>("layer-photo");
const maskCanvas = el<HTMLCanvasElement>("layer-mask");
const sketchCanvas = el<HTMLCanvasElement>("layer-sketch");
const errorBox = el<HTMLDivElement>("error");
const statusBox = el<HTMLSpanElement>("status");

function resizeCanvases(): void {
  for (const canvas of [photoCanvas, maskCanvas, sketchCanvas]) {
    canvas.width = state.resolution;
    canvas.height = state.resolution;
    canvas.style.width = `${state.resolution * 2}px`;
    canvas.style.height = `${state.resolution * 2}px`;
  }
}

function drawBinaryLayer(canvas: HTMLCanvasElement, grid: Uint8Array,
                         rgba: [number, number, number, number]): void {
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(state.resolution, state.resolution);
  for (let i = 0; i < grid.length; i++) {
    if (grid[i] === 255) {
      image.data[i * 4] = rgba[0];
      image.data[i * 4 + 1] = rgba[1];
      image.data[i * 4 + 2] = rgba[2];
      image.data[i * 4 + 3] = rgba[3];
    }
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.putImageData(image, 0, 0);
}

function redraw(): void {
  const sketchLayer = currentStroke && activeLayer === "sketch"
    ? addStroke(state.sketch, currentStroke)
    : state.sketch;
  const maskLayer = currentStroke && activeLayer === "mask"
    ? addStroke(state.mask, currentStroke)
    : state.mask;
  drawBinaryLayer(sketchCanvas, rasterizeLayer(sketchLayer, state.resolution), [0, 0, 0, 255]);
  drawBinaryLayer(maskCanvas, rasterizeLayer(maskLayer, state.resolution), [255, 60, 60, 110]);
}

function showError(message: string): void {
  errorBox.textContent = message;
  errorBox.hidden = false;
}

function clearError(): void {
  errorBox.hidden = true;
}

function canvasPoint(event: PointerEvent): Point {
  const rect = sketchCanvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * state.resolution,
    y: ((event.clientY - rect.top) / rect.height) * state.resolution,
  };
}

sketchCanvas.addEventListener("pointerdown", (event) => {
  sketchCanvas.setPointerCapture(event.pointerId);
  currentStroke = {
    points: [canvasPoint(event)],
    width: activeLayer === "mask" ? MASK_BRUSH_WIDTH : DEFAULT_STROKE_WIDTH,
    erase: erasing,
  };
  redraw();
});

sketchCanvas.addEventListener("pointermove", (event) => {
  if (!currentStroke) return;
  currentStroke.points.push(canvasPoint(event));
  redraw();
});

sketchCanvas.addEventListener("pointerup", () => {
  if (!currentStroke) return;
  if (activeLayer === "sketch") {
    state = { ...state, sketch: addStroke(state.sketch, currentStroke) };
  } else {
    state = { ...state, mask: addStroke(state.mask, currentStroke) };
  }
  currentStroke = null;
  redraw();
});

function selectTool(layer: ActiveLayer, erase: boolean, button: HTMLElement): void {
  activeLayer = layer;
  erasing = erase;
  for (const id of ["tool-pen", "tool-eraser", "tool-mask"]) {
    el(id).classList.toggle("active", el(id) === button);
  }
}

el("tool-pen").onclick = () => selectTool("sketch", false, el("tool-pen"));
el("tool-eraser").onclick = () => selectTool("sketch", true, el("tool-eraser"));
el("tool-mask").onclick = () => selectTool("mask", false, el("tool-mask"));

el("undo").onclick = () => {
  state = activeLayer === "sketch"
    ? { ...state, sketch: undo(state.sketch) }
    : { ...state, mask: undo(state.mask) };
  redraw();
};
el("redo").onclick = () => {
  state = activeLayer === "sketch"
    ? { ...state, sketch: redo(state.sketch) }
    : { ...state, mask: redo(state.mask) };
  redraw();
};
el("clear").onclick = () => {
  state = activeLayer === "sketch"
    ? { ...state, sketch: clear() }
    : { ...state, mask: clear() };
  redraw();
};

const levelInput = el<HTMLInputElement>("level");
levelInput.oninput = () => {
  state = setLevel(state, Number(levelInput.value));
  el("level-readout").textContent = state.level.toFixed(2);
};

for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=mode]")) {
  radio.onchange = () => {
    state = { ...state, mode: radio.value as "edit" | "synth" };
    for (const node of document.querySelectorAll<HTMLElement>(".edit-only")) {
      node.style.display = state.mode === "edit" ? "" : "none";
    }
  };
}

el<HTMLInputElement>("photo-file").onchange = async (event) => {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  state = { ...state, photoPng: bytes };
  const blobUrl = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
  const img = new Image();
  img.onload = () => {
    photoCanvas.getContext("2d")!.drawImage(img, 0, 0, state.resolution, state.resolution);
    URL.revokeObjectURL(blobUrl);
  };
  img.src = blobUrl;
};

el("connect").onclick = async () => {
  clearError();
  baseUrl = el<HTMLInputElement>("service-url").value.replace(/\/$/, "");
  try {
    const info = await fetchModelInfo(baseUrl);
    state = { ...createState(info.resolution), level: state.level, mode: info.mode };
    el("model-label").textContent =
      `${info.mode} model, ${info.resolution}px, R=${info.max_dilation_radius}`;
    resizeCanvases();
    redraw();
  } catch (err) {
    showError(`could not reach service: ${String(err)}`);
  }
};

function pngDataUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

function appendResult(level: number, panels: Array<[string, string]>): void {
  const entry = document.createElement("div");
  entry.className = "result-entry";
  entry.innerHTML = `<div class="muted">level ${level.toFixed(2)}</div>`;
  for (const [label, b64] of panels) {
    const fig = document.createElement("figure");
    const img = new Image();
    img.src = pngDataUrl(b64);
    img.width = state.resolution;
    const caption = document.createElement("figcaption");
    caption.textContent = label;
    fig.append(img, caption);
    entry.append(fig);
  }
  el("results").prepend(entry);
}

async function submit(): Promise<void> {
  if (busy) {
    pendingSubmit = true; // supersede: latest state wins once the wire is free
    return;
  }
  busy = true;
  statusBox.textContent = "refining…";
  clearError();
  try {
    const panels: Array<[string, string]> = [];
    if (state.mode === "synth") {
      const response = await postSynth(baseUrl, buildSynthBody(state));
      if (response.refined_sketch) panels.push(["refined sketch", response.refined_sketch]);
      if (response.generated_photo) panels.push(["generated photo", response.generated_photo]);
    } else if (state.photoPng && state.mask.strokes.length > 0) {
      const response = await postEdit(baseUrl, buildEditBody(state));
      if (response.refined_sketch) panels.push(["refined sketch", response.refined_sketch]);
      if (response.final_photo) panels.push(["final photo", response.final_photo]);
      else if (response.generated_photo) panels.push(["generated photo", response.generated_photo]);
    } else {
      const response = await postRefine(baseUrl, buildRefineBody(state));
      panels.push(["refined sketch", response.refined_sketch]);
    }
    appendResult(state.level, panels);
    statusBox.textContent = "";
  } catch (err) {
    statusBox.textContent = "";
    if (err instanceof ServiceRequestError) {
      showError(`${err.code}: ${err.message}`);
    } else {
      showError(String(err));
    }
  } finally {
    busy = false;
    if (pendingSubmit) {
      pendingSubmit = false;
      void submit();
    }
  }
}

el("submit").onclick = () => void submit();

resizeCanvases();
redraw();
