import { describe, expect, it } from "vitest";

import { decodeGrayPng, encodeGrayPng, fromBase64, toBase64 } from "../src/png.js";

function checkerboard(size: number): Uint8Array {
  const grid = new Uint8Array(size * size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      grid[y * size + x] = (x + y) % 2 === 0 ? 255 : 0;
    }
  }
  return grid;
}

describe("encodeGrayPng", () => {
  it("starts with the PNG signature and IHDR", () => {
    const bytes = encodeGrayPng(new Uint8Array([0]), 1, 1);
    expect([...bytes.slice(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(String.fromCharCode(...bytes.slice(12, 16))).toBe("IHDR");
    // width=1, height=1, bit depth 8, grayscale
    expect([...bytes.slice(16, 25)]).toEqual([0, 0, 0, 1, 0, 0, 0, 1, 8]);
    expect(bytes[25]).toBe(0);
  });

  it("round-trips pixels exactly", () => {
    const grid = checkerboard(48);
    const decoded = decodeGrayPng(encodeGrayPng(grid, 48, 48));
    expect(decoded.width).toBe(48);
    expect(decoded.height).toBe(48);
    expect(Buffer.from(decoded.pixels).equals(Buffer.from(grid))).toBe(true);
  });

  it("is byte-deterministic", () => {
    const grid = checkerboard(32);
    const a = encodeGrayPng(grid, 32, 32);
    const b = encodeGrayPng(grid, 32, 32);
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("handles payloads above one stored-block (64 KiB)", () => {
    const size = 300; // 300*301 raw bytes > 65535
    const grid = checkerboard(size);
    const decoded = decodeGrayPng(encodeGrayPng(grid, size, size));
    expect(Buffer.from(decoded.pixels).equals(Buffer.from(grid))).toBe(true);
  });

  it("rejects mismatched pixel counts", () => {
    expect(() => encodeGrayPng(new Uint8Array(3), 2, 2)).toThrow();
  });

  it("decode rejects corrupted data", () => {
    const bytes = encodeGrayPng(checkerboard(8), 8, 8);
    bytes[bytes.length - 20] ^= 0xff; // flip a byte inside IDAT
    expect(() => decodeGrayPng(bytes)).toThrow();
  });
});

describe("base64", () => {
  it("round-trips arbitrary bytes", () => {
    const data = new Uint8Array(257);
    for (let i = 0; i < data.length; i++) data[i] = (i * 31) % 256;
    expect(Buffer.from(fromBase64(toBase64(data))).equals(Buffer.from(data))).toBe(true);
  });

  it("matches the platform encoder", () => {
    const data = new Uint8Array([0, 1, 2, 250, 251, 252, 253]);
    expect(toBase64(data)).toBe(Buffer.from(data).toString("base64"));
  });

  it("rejects invalid characters", () => {
    expect(() => fromBase64("ab$c")).toThrow();
  });
});
