export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  width: number;
  erase: boolean;
}

export type Mode = "edit" | "synth";

export interface ModelInfo {
  resolution: number;
  max_dilation_radius: number;
  mode: Mode;
  step: number;
  has_renderer: boolean;
}

export interface RefineRequestBody {
  sketch: string;
  level: number;
  mask?: string;
  photo?: string;
}

export interface RefineResponse {
  refined_sketch: string;
  radius: number;
}

export interface EditRequestBody {
  photo: string;
  mask: string;
  sketch: string;
  level: number;
  return?: string[];
}

export interface EditResponse {
  refined_sketch?: string;
  generated_photo?: string;
  final_photo?: string;
}

export interface SynthRequestBody {
  sketch: string;
  level: number;
}

export interface SynthResponse {
  refined_sketch?: string;
  generated_photo?: string;
}

export interface ServiceError {
  error: { code: string; message: string };
}
