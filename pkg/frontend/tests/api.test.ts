import { describe, expect, it } from "vitest";

import {
  buildEditBody,
  buildRefineBody,
  buildSynthBody,
  sketchPngBase64,
} from "../src/api.js";
import { decodeGrayPng, encodeGrayPng, fromBase64 } from "../src/png.js";
import { addStroke, createState, setLevel } from "../src/state.js";
import type { EditorState } from "../src/state.js";

function stateWithStroke(level = 0.7): EditorState {
  let state = createState(64);
  state = setLevel(state, level);
  return {
    ...state,
    sketch: addStroke(state.sketch, {
      points: [{ x: 5, y: 20 }, { x: 50, y: 20 }],
      width: 2,
      erase: false,
    }),
  };
}

describe("buildRefineBody", () => {
  it("carries the slider value verbatim", () => {
    const body = buildRefineBody(stateWithStroke(0.7));
    expect(body.level).toBe(0.7);
    expect(JSON.stringify(body)).toContain('"level":0.7');
  });

  it("produces identical sketch bytes across two builds", () => {
    const state = stateWithStroke();
    const a = fromBase64(buildRefineBody(state).sketch);
    const b = fromBase64(buildRefineBody(state).sketch);
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("sketch payload decodes to the model resolution", () => {
    const decoded = decodeGrayPng(fromBase64(sketchPngBase64(stateWithStroke())));
    expect(decoded.width).toBe(64);
    expect(decoded.height).toBe(64);
    expect(decoded.pixels[20 * 64 + 10]).toBe(255);
  });

  it("omits photo and mask when absent", () => {
    const body = buildRefineBody(stateWithStroke());
    expect(body.photo).toBeUndefined();
    expect(body.mask).toBeUndefined();
  });

  it("includes the photo bytes untouched when loaded", () => {
    const photo = encodeGrayPng(new Uint8Array(64 * 64), 64, 64);
    const state = { ...stateWithStroke(), photoPng: photo };
    const body = buildRefineBody(state);
    expect(body.photo).toBeDefined();
    expect(Buffer.from(fromBase64(body.photo!)).equals(Buffer.from(photo))).toBe(true);
  });
});

describe("buildEditBody", () => {
  it("requires a loaded photo", () => {
    expect(() => buildEditBody(stateWithStroke())).toThrow();
  });

  it("contains all three image fields and the level", () => {
    const photo = encodeGrayPng(new Uint8Array(64 * 64), 64, 64);
    let state = { ...stateWithStroke(0.25), photoPng: photo };
    state = {
      ...state,
      mask: addStroke(state.mask, {
        points: [{ x: 10, y: 10 }, { x: 40, y: 40 }],
        width: 12,
        erase: false,
      }),
    };
    const body = buildEditBody(state);
    expect(body.level).toBe(0.25);
    for (const field of [body.photo, body.mask, body.sketch]) {
      expect(typeof field).toBe("string");
      expect(field.length).toBeGreaterThan(0);
    }
  });
});

describe("buildSynthBody", () => {
  it("carries only sketch and level", () => {
    const body = buildSynthBody(stateWithStroke(1.0));
    expect(Object.keys(body).sort()).toEqual(["level", "sketch"]);
    expect(body.level).toBe(1);
  });
});
