// Scripted stroke list -> rasterized PNG -> /refine -> displayed result.
// Runs against a stub implementing the documented wire format; set
// SERVICE_URL to also exercise a live service.

import http from "node:http";
import type { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { buildRefineBody, postRefine } from "../src/api.js";
import { decodeGrayPng, encodeGrayPng, fromBase64, toBase64 } from "../src/png.js";
import { addStroke, createState, setLevel } from "../src/state.js";
import type { EditorState } from "../src/state.js";

const receivedBodies: string[] = [];
let server: http.Server;
let stubUrl: string;

function scriptedState(): EditorState {
  let state = createState(64);
  state = setLevel(state, 0.7);
  let sketch = state.sketch;
  sketch = addStroke(sketch, {
    points: [{ x: 8, y: 16 }, { x: 56, y: 16 }], width: 2, erase: false,
  });
  sketch = addStroke(sketch, {
    points: [{ x: 32, y: 8 }, { x: 32, y: 56 }], width: 2, erase: false,
  });
  return { ...state, sketch };
}

beforeAll(async () => {
  server = http.createServer((req, res) => {
    let raw = "";
    req.on("data", (part) => (raw += part));
    req.on("end", () => {
      if (req.method === "POST" && req.url === "/refine") {
        receivedBodies.push(raw);
        const body = JSON.parse(raw) as { sketch: string; level: number };
        const decoded = decodeGrayPng(fromBase64(body.sketch));
        // stand-in refinement: echo the strokes back
        const png = encodeGrayPng(decoded.pixels, decoded.width, decoded.height);
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify({
          refined_sketch: toBase64(png),
          radius: body.level * 4,
        }));
      } else {
        res.statusCode = 404;
        res.end(JSON.stringify({ error: { code: "not_found", message: req.url ?? "" } }));
      }
    });
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  stubUrl = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(() => {
  server.close();
});

describe("refine round trip against the documented protocol", () => {
  it("submits byte-identical PNGs and displays the result", async () => {
    const state = scriptedState();

    const first = await postRefine(stubUrl, buildRefineBody(state));
    const second = await postRefine(stubUrl, buildRefineBody(state));

    expect(receivedBodies.length).toBe(2);
    const sketchA = (JSON.parse(receivedBodies[0]) as { sketch: string }).sketch;
    const sketchB = (JSON.parse(receivedBodies[1]) as { sketch: string }).sketch;
    expect(Buffer.from(fromBase64(sketchA)).equals(Buffer.from(fromBase64(sketchB)))).toBe(true);

    // slider value appears verbatim in the request body
    expect(receivedBodies[0]).toContain('"level":0.7');

    // the response renders: decode to a pixel grid at the canvas resolution
    const displayed = decodeGrayPng(fromBase64(first.refined_sketch));
    expect(displayed.width).toBe(64);
    expect(displayed.height).toBe(64);
    expect(displayed.pixels[16 * 64 + 20]).toBe(255);
    expect(first.radius).toBeCloseTo(0.7 * 4);
    expect(second.refined_sketch).toBe(first.refined_sketch);
  });
});

describe.runIf(!!process.env.SERVICE_URL)("live service round trip", () => {
  const base = (process.env.SERVICE_URL ?? "").replace(/\/$/, "");

  it("refines a scripted sketch end to end", async () => {
    const state = scriptedState();
    const body = buildRefineBody(state);
    const again = buildRefineBody(state);
    expect(Buffer.from(fromBase64(body.sketch))
      .equals(Buffer.from(fromBase64(again.sketch)))).toBe(true);

    const response = await postRefine(base, body);
    const png = fromBase64(response.refined_sketch);
    expect([...png.slice(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(response.radius).toBeCloseTo(state.level * response.radius / state.level);
  });
});
