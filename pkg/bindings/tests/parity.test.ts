import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  decodeTensor,
  encodeTargets,
  encodeTensor,
  evalPoses,
  runCli,
  softArgmax,
  tensor,
  writeSamples,
  VERSION,
} from "../src/index.js";
import type { PoseSample, SampleKind, Tensor } from "../src/index.js";

const N_JOINTS = 18;
const N_PARTS = 14;
const ACTIONS = ["walk", "sit", "wave", "reach"];

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

function randomSample(rng: () => number, kind: SampleKind): PoseSample {
  // any part with a depth label needs both 2D endpoints, and full3d
  // samples label every part, so only 2d-only samples drop joints here
  const sample: PoseSample = {
    kind,
    action: ACTIONS[Math.floor(rng() * ACTIONS.length)],
    joints2d: Array.from({ length: N_JOINTS }, () => ({
      x: 0.02 + 0.96 * rng(),
      y: 0.02 + 0.96 * rng(),
      visible: kind === "2d" ? rng() > 0.1 : true,
    })),
  };
  if (kind === "full3d") {
    sample.joints3d = Array.from({ length: N_JOINTS }, (_, i) => ({
      x: 1000 * (rng() - 0.5),
      y: 1000 * (rng() - 0.5),
      z: i === 0 ? 0 : 1600 * (rng() - 0.5),
      valid: true,
    }));
  } else if (kind === "ordinal") {
    const labels: (number | null)[] = [-1, 0, 1, null];
    sample.ordinal = Array.from(
      { length: N_PARTS },
      () => labels[Math.floor(rng() * labels.length)]!,
    );
  }
  return sample;
}

/** Run a process directly, bypassing the package's own runner. */
function run(argv: string[]): void {
  const res = spawnSync(argv[0]!, argv.slice(1), { encoding: "utf8" });
  if (res.error) {
    throw res.error;
  }
  if (res.status !== 0) {
    throw new Error(`${argv.join(" ")} failed: ${res.stderr}`);
  }
}

function bytesOf(t: Tensor): Buffer {
  return Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength);
}

// reads a samples file with the reference parser and writes it back out,
// so a file produced here provably means the same thing over there
const REWRITE = [
  "import sys",
  "from hemlets import canonical_skeleton",
  "from hemlets.samples import read_samples, write_samples",
  "write_samples(sys.argv[2], read_samples(sys.argv[1], canonical_skeleton()))",
].join("\n");

describe("parity with the command line", () => {
  it(
    "100 random samples encode bit-exactly through the bindings",
    () => {
      const rng = mulberry32(7);
      const kinds: SampleKind[] = ["full3d", "ordinal", "2d"];
      const samples = Array.from({ length: 100 }, (_, i) =>
        randomSample(rng, kinds[i % kinds.length]!),
      );
      const viaBinding = encodeTargets(samples);
      expect(viaBinding).toHaveLength(samples.length);

      const dir = mkdtempSync(join(tmpdir(), "hemlets-parity-"));
      try {
        const tsFile = join(dir, "ts_samples.txt");
        writeFileSync(tsFile, writeSamples(samples), "ascii");

        const encA = join(dir, "enc_a");
        run([
          "python3", "-m", "hemlets",
          "encode", "--samples", tsFile, "--out-dir", encA,
        ]);

        // round trip through the reference reader/writer, then encode again
        const pyFile = join(dir, "py_samples.txt");
        run(["python3", "-c", REWRITE, tsFile, pyFile]);
        const encB = join(dir, "enc_b");
        run([
          "python3", "-m", "hemlets",
          "encode", "--samples", pyFile, "--out-dir", encB,
        ]);

        expect(readFileSync(join(encA, "manifest.txt"), "ascii")).toBe(
          readFileSync(join(encB, "manifest.txt"), "ascii"),
        );

        const fields = [
          ["hemlets", "hemlets"],
          ["mask", "maskHem"],
          ["heatmaps", "heatmaps2d"],
          ["coords", "coords3d"],
        ] as const;
        for (let i = 0; i < samples.length; i++) {
          const stem = `sample_${String(i).padStart(4, "0")}`;
          for (const [suffix, field] of fields) {
            const a = readFileSync(join(encA, `${stem}.${suffix}.bin`));
            const b = readFileSync(join(encB, `${stem}.${suffix}.bin`));
            expect(a.equals(b)).toBe(true);
            const reference = decodeTensor(a);
            const bound = viaBinding[i]![field];
            expect(bound.dims).toEqual(reference.dims);
            expect(bytesOf(bound).equals(bytesOf(reference))).toBe(true);
          }
        }
        expect(viaBinding[0]!.hemlets.dims).toEqual([N_PARTS, 3, 64, 64]);
        expect(viaBinding[0]!.lambdaZ).toBe(1);
        expect(viaBinding[2]!.lambdaZ).toBe(0);
      } finally {
        rmSync(dir, { recursive: true, force: true });
      }
    },
    300_000,
  );

  it(
    "100 random volumes read out bit-exactly through the bindings",
    () => {
      const rng = mulberry32(11);
      const dir = mkdtempSync(join(tmpdir(), "hemlets-volumes-"));
      try {
        for (let i = 0; i < 100; i++) {
          const h = 4 + Math.floor(rng() * 4);
          const w = 4 + Math.floor(rng() * 4);
          const d = 3 + Math.floor(rng() * 3);
          const data = new Float32Array(h * w * d);
          for (let v = 0; v < data.length; v++) {
            data[v] = 8 * (rng() - 0.5);
          }
          const volume = tensor([h, w, d], data);
          const upstream =
            i < 20
              ? tensor(
                  [3],
                  new Float32Array([rng() - 0.5, rng() - 0.5, rng() - 0.5]),
                )
              : undefined;

          const viaBinding = softArgmax(volume, upstream);

          const volumePath = join(dir, "volume.bin");
          const coordsPath = join(dir, "coords.bin");
          writeFileSync(volumePath, encodeTensor(volume));
          const argv = [
            "python3", "-m", "hemlets",
            "softargmax", "--volume", volumePath, "--out", coordsPath,
          ];
          const gradPath = join(dir, "grad.bin");
          if (upstream) {
            const upstreamPath = join(dir, "upstream.bin");
            writeFileSync(upstreamPath, encodeTensor(upstream));
            argv.push("--upstream", upstreamPath, "--grad-out", gradPath);
          }
          run(argv);

          const reference = decodeTensor(readFileSync(coordsPath));
          expect(viaBinding.coords.dims).toEqual([3]);
          expect(bytesOf(viaBinding.coords).equals(bytesOf(reference))).toBe(
            true,
          );
          for (const c of viaBinding.coords.data) {
            expect(c).toBeGreaterThan(0);
            expect(c).toBeLessThan(1);
          }
          if (upstream) {
            const refGrad = decodeTensor(readFileSync(gradPath));
            expect(viaBinding.gradient!.dims).toEqual([h, w, d]);
            expect(
              bytesOf(viaBinding.gradient!).equals(bytesOf(refGrad)),
            ).toBe(true);
          } else {
            expect(viaBinding.gradient).toBeUndefined();
          }
        }
      } finally {
        rmSync(dir, { recursive: true, force: true });
      }
    },
    600_000,
  );

  it(
    "scoring a pose list against itself is perfect",
    () => {
      const rng = mulberry32(3);
      const samples = Array.from({ length: 30 }, () =>
        randomSample(rng, "full3d"),
      );
      const table = evalPoses(samples, samples);
      expect(table.all.count).toBe(30);
      expect(table.all.mpjpe).toBe(0);
      expect(table.all.pck).toBe(1);
      expect(table.all.auc).toBe(1);
      expect(table.all.paMpjpe).toBeLessThan(1e-9);
      const actions = Object.keys(table.byAction);
      expect(actions.length).toBeGreaterThan(1);
      let total = 0;
      for (const action of actions) {
        const row = table.byAction[action]!;
        expect(row.mpjpe).toBe(0);
        total += row.count;
      }
      expect(total).toBe(30);
    },
    120_000,
  );

  it(
    "a one-hot volume decodes to its voxel center",
    () => {
      const data = new Float32Array(4 * 4 * 4);
      data[(1 * 4 + 2) * 4 + 3] = 1e6;
      const { coords } = softArgmax(tensor([4, 4, 4], data));
      expect(Array.from(coords.data)).toEqual([0.625, 0.375, 0.875]);
    },
    120_000,
  );

  it(
    "VERSION matches the command line",
    () => {
      expect(runCli(["--version"]).trim()).toBe(`hemlets ${VERSION}`);
    },
    120_000,
  );
});
