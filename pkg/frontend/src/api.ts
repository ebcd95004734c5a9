// Service client. Request bodies are built from editor state; images travel
// as base64 PNGs rasterized deterministically on this side.

import { encodeGrayPng, toBase64 } from "./png.js";
import { rasterizeLayer } from "./state.js";
import type { EditorState } from "./state.js";
import type {
  EditRequestBody,
  EditResponse,
  ModelInfo,
  RefineRequestBody,
  RefineResponse,
  ServiceError,
  SynthRequestBody,
  SynthResponse,
} from "./types.js";

export class ServiceRequestError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export function sketchPngBase64(state: EditorState): string {
  const grid = rasterizeLayer(state.sketch, state.resolution);
  return toBase64(encodeGrayPng(grid, state.resolution, state.resolution));
}

export function maskPngBase64(state: EditorState): string {
  const grid = rasterizeLayer(state.mask, state.resolution);
  return toBase64(encodeGrayPng(grid, state.resolution, state.resolution));
}

export function buildRefineBody(state: EditorState): RefineRequestBody {
  const body: RefineRequestBody = {
    sketch: sketchPngBase64(state),
    level: state.level,
  };
  if (state.mode === "edit") {
    if (state.mask.strokes.length > 0) body.mask = maskPngBase64(state);
    if (state.photoPng) body.photo = toBase64(state.photoPng);
  }
  return body;
}

export function buildEditBody(state: EditorState): EditRequestBody {
  if (!state.photoPng) throw new Error("edit mode needs a loaded photo");
  return {
    photo: toBase64(state.photoPng),
    mask: maskPngBase64(state),
    sketch: sketchPngBase64(state),
    level: state.level,
  };
}

export function buildSynthBody(state: EditorState): SynthRequestBody {
  return { sketch: sketchPngBase64(state), level: state.level };
}

async function post<T>(baseUrl: string, path: string, body: unknown,
                       fetchImpl: typeof fetch = fetch): Promise<T> {
  const response = await fetchImpl(`${baseUrl}${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    let code = "http_error";
    let message = `${path} failed with status ${response.status}`;
    try {
      const payload = (await response.json()) as ServiceError;
      if (payload.error) {
        code = payload.error.code;
        message = payload.error.message;
      }
    } catch {
      // non-JSON error body; keep the generic message
    }
    throw new ServiceRequestError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export function fetchModelInfo(baseUrl: string,
                               fetchImpl: typeof fetch = fetch): Promise<ModelInfo> {
  return fetchImpl(`${baseUrl}/model-info`).then((r) => {
    if (!r.ok) throw new ServiceRequestError(r.status, "http_error", "model-info failed");
    return r.json() as Promise<ModelInfo>;
  });
}

export function postRefine(baseUrl: string, body: RefineRequestBody,
                           fetchImpl: typeof fetch = fetch): Promise<RefineResponse> {
  return post<RefineResponse>(baseUrl, "/refine", body, fetchImpl);
}

export function postEdit(baseUrl: string, body: EditRequestBody,
                         fetchImpl: typeof fetch = fetch): Promise<EditResponse> {
  return post<EditResponse>(baseUrl, "/edit", body, fetchImpl);
}

export function postSynth(baseUrl: string, body: SynthRequestBody,
                          fetchImpl: typeof fetch = fetch): Promise<SynthResponse> {
  return post<SynthResponse>(baseUrl, "/synth", body, fetchImpl);
}
