import { describe, expect, it } from "vitest";

import {
  decodeTensor,
  encodeTensor,
  readSamples,
  tensor,
  writeSamples,
} from "../src/index.js";
import type { PoseSample } from "../src/index.js";

// tiny deterministic PRNG so the fixtures are reproducible across runs
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomData(rng: () => number, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = 20 * (rng() - 0.5);
  }
  return out;
}

describe("binary tensor codec", () => {
  it("round trips several shapes unchanged", () => {
    const rng = mulberry32(1);
    for (const dims of [[7], [3, 5], [14, 3, 8, 8], [2, 2, 2, 2, 2]]) {
      const count = dims.reduce((a, b) => a * b, 1);
      const t = tensor(dims, randomData(rng, count));
      const back = decodeTensor(encodeTensor(t));
      expect(back.dims).toEqual(dims);
      expect(back.data).toEqual(t.data);
    }
  });

  it("writes the documented header fields", () => {
    const buf = encodeTensor(tensor([3, 5], randomData(mulberry32(2), 15)));
    expect(buf.toString("ascii", 0, 4)).toBe("HMLT");
    expect(buf.readUInt32LE(4)).toBe(1);
    expect(buf.readUInt32LE(8)).toBe(2);
    expect(buf.readBigUInt64LE(12)).toBe(3n);
    expect(buf.readBigUInt64LE(20)).toBe(5n);
    expect(buf.length).toBe(28 + 4 * 15);
  });

  it("rejects malformed input", () => {
    const good = encodeTensor(tensor([4], randomData(mulberry32(3), 4)));
    expect(() => decodeTensor(good.subarray(0, 8))).toThrow(/truncated/);
    const badMagic = Buffer.from(good);
    badMagic.write("NOPE", 0, "ascii");
    expect(() => decodeTensor(badMagic)).toThrow(/magic/);
    const badVersion = Buffer.from(good);
    badVersion.writeUInt32LE(99, 4);
    expect(() => decodeTensor(badVersion)).toThrow(/version/);
    expect(() => decodeTensor(good.subarray(0, good.length - 4))).toThrow(
      /payload/,
    );
    expect(() => decodeTensor(Buffer.concat([good, Buffer.alloc(4)]))).toThrow(
      /payload/,
    );
  });

  it("rejects bad tensors before writing", () => {
    expect(() => tensor([], new Float32Array(0))).toThrow(/dimension/);
    expect(() => tensor([3], new Float32Array(4))).toThrow(/entries/);
    const withNan = new Float32Array([1, NaN, 3]);
    expect(() => encodeTensor(tensor([3], withNan))).toThrow(/finite/);
  });
});

describe("pose samples text format", () => {
  it("round trips all three annotation kinds", () => {
    const rng = mulberry32(4);
    const joints2d = Array.from({ length: 18 }, () => ({
      x: rng(),
      y: rng(),
      visible: rng() > 0.2,
    }));
    const samples: PoseSample[] = [
      {
        kind: "full3d",
        action: "walk",
        joints2d,
        joints3d: Array.from({ length: 18 }, () => ({
          x: 500 * (rng() - 0.5),
          y: 500 * (rng() - 0.5),
          z: 900 * (rng() - 0.5),
          valid: true,
        })),
      },
      {
        kind: "ordinal",
        joints2d,
        ordinal: Array.from({ length: 14 }, (_, k) =>
          k % 4 === 3 ? null : (k % 3) - 1,
        ),
      },
      { kind: "2d", action: "sit", joints2d },
    ];
    const back = readSamples(writeSamples(samples));
    expect(back).toEqual(samples);
  });

  it("is byte-stable across repeated writes", () => {
    const rng = mulberry32(5);
    const samples: PoseSample[] = [
      {
        kind: "2d",
        joints2d: Array.from({ length: 18 }, () => ({
          x: rng(),
          y: rng(),
          visible: true,
        })),
      },
    ];
    expect(writeSamples(samples)).toBe(writeSamples(samples));
  });

  it("accepts reference-writer spellings of numbers", () => {
    const rows = Array.from(
      { length: 3 },
      (_, i) => `joint2d ${i} 0.5 0.25 1`,
    );
    const text = [
      "pose samples v1",
      "# a comment",
      "sample 0",
      "kind full3d",
      "",
      ...rows,
      "joint3d 0 5.0 -0.0 1e-07 1",
      "joint3d 1 1e+16 2.5e-05 -120.0 1",
      "joint3d 2 0.1 0.2 0.3 0",
      "end",
    ].join("\n");
    const [sample] = readSamples(text);
    expect(sample!.joints3d![0]).toEqual({ x: 5.0, y: -0.0, z: 1e-7, valid: true });
    expect(sample!.joints3d![1]!.x).toBe(1e16);
    expect(sample!.joints3d![1]!.y).toBe(2.5e-5);
    expect(sample!.joints3d![2]!.valid).toBe(false);
  });

  it("rejects structural damage", () => {
    expect(() => readSamples("something else\n")).toThrow(/pose samples/);
    const base = writeSamples([
      { kind: "2d", joints2d: [{ x: 0.5, y: 0.5, visible: true }] },
    ]);
    expect(() => readSamples(base.replace("joint2d", "mystery"))).toThrow(
      /unrecognized/,
    );
    expect(() => readSamples(base.replace("kind 2d", "kind 4d"))).toThrow(
      /kind/,
    );
    const lines = base.split("\n").filter((l) => l.length > 0);
    expect(() => readSamples(lines.slice(0, -1).join("\n"))).toThrow(
      /never closed/,
    );
    expect(() => readSamples(base + "end\n")).toThrow(/expected a sample/);
  });

  it("rejects out-of-range ordinal labels", () => {
    const text = [
      "pose samples v1",
      "sample 0",
      "kind ordinal",
      "joint2d 0 0.5 0.5 1",
      "ordinal 0 7",
      "end",
    ].join("\n");
    expect(() => readSamples(text)).toThrow(/ordinal/);
  });
});
