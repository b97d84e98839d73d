/**
 * Thin wrappers over the hemlets command line so a Node pipeline can
 * generate supervision tensors, run the volumetric readout, and score
 * poses without reimplementing any of the math. Data crosses the process
 * boundary through the documented file formats only, so every number that
 * comes back is bit-identical to what the CLI writes on disk.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { runCli, withScratchDir } from "./runner.js";
import { decodeTensor, encodeTensor, Tensor } from "./tensor.js";
import { PoseSample, writeSamples } from "./samples.js";

export { Tensor, tensor, encodeTensor, decodeTensor } from "./tensor.js";
export {
  PoseSample,
  SampleKind,
  Joint2d,
  Joint3d,
  readSamples,
  writeSamples,
} from "./samples.js";
export { runCli } from "./runner.js";

/** Pinned to the Python package version; checked against `--version`. */
export const VERSION = "0.1.0";

export interface EncodeOptions {
  variant?: "hemlets" | "2s" | "5s";
  /** Heatmap grid as [height, width]; the CLI default is 64 by 64. */
  resolution?: [number, number];
  sigma?: number;
  epsilonScale?: number;
  truncation?: number;
  depthWindow?: number;
  /** Path to a skeleton v1 file; defaults to the built-in skeleton. */
  skeletonPath?: string;
}

export interface EncodedTarget {
  kind: string;
  lambdaZ: number;
  /** Part stacks, (parts, states, h, w). */
  hemlets: Tensor;
  /** Per-layer loss mask, (parts, states). */
  maskHem: Tensor;
  /** Per-joint 2D heatmaps, (joints, h, w). */
  heatmaps2d: Tensor;
  /** Normalized target coordinates, (joints, 3). */
  coords3d: Tensor;
}

interface ManifestRow {
  kind: string;
  lambdaZ: number;
  stem: string;
}

function parseManifest(text: string): ManifestRow[] {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines[0] !== "manifest v1") {
    throw new Error("encode did not produce a manifest v1 file");
  }
  const rows: ManifestRow[] = [];
  for (const line of lines) {
    const f = line.split(/\s+/);
    if (f[0] !== "sample") {
      continue;
    }
    if (f.length !== 8 || f[2] !== "kind" || f[4] !== "lambda_z" || f[6] !== "files") {
      throw new Error(`bad manifest row: ${line}`);
    }
    rows.push({ kind: f[3]!, lambdaZ: Number(f[5]), stem: f[7]! });
  }
  return rows;
}

/**
 * Turn annotated samples into supervision tensors.
 *
 * Writes the samples to a scratch file, runs `hemlets encode`, and reads
 * the per-sample tensors back. Invalid samples surface as thrown errors
 * with the CLI's message.
 */
export function encodeTargets(
  samples: PoseSample[],
  options: EncodeOptions = {},
): EncodedTarget[] {
  return withScratchDir((dir) => {
    const samplesPath = join(dir, "samples.txt");
    writeFileSync(samplesPath, writeSamples(samples), "ascii");
    const outDir = join(dir, "enc");
    const args = ["encode", "--samples", samplesPath, "--out-dir", outDir];
    if (options.variant) {
      args.push("--variant", options.variant);
    }
    if (options.resolution) {
      args.push("--resolution", `${options.resolution[0]}x${options.resolution[1]}`);
    }
    if (options.sigma !== undefined) {
      args.push("--sigma", String(options.sigma));
    }
    if (options.epsilonScale !== undefined) {
      args.push("--epsilon-scale", String(options.epsilonScale));
    }
    if (options.truncation !== undefined) {
      args.push("--truncation", String(options.truncation));
    }
    if (options.depthWindow !== undefined) {
      args.push("--depth-window", String(options.depthWindow));
    }
    if (options.skeletonPath) {
      args.push("--skeleton", options.skeletonPath);
    }
    runCli(args);
    const manifest = parseManifest(
      readFileSync(join(outDir, "manifest.txt"), "ascii"),
    );
    return manifest.map((row) => ({
      kind: row.kind,
      lambdaZ: row.lambdaZ,
      hemlets: decodeTensor(readFileSync(join(outDir, `${row.stem}.hemlets.bin`))),
      maskHem: decodeTensor(readFileSync(join(outDir, `${row.stem}.mask.bin`))),
      heatmaps2d: decodeTensor(readFileSync(join(outDir, `${row.stem}.heatmaps.bin`))),
      coords3d: decodeTensor(readFileSync(join(outDir, `${row.stem}.coords.bin`))),
    }));
  });
}

export interface SoftArgmaxResult {
  /** Expected position as a (3,) tensor of normalized x, y, z. */
  coords: Tensor;
  /** Volume-shaped gradient; present when an upstream tensor was given. */
  gradient?: Tensor;
}

/**
 * Differentiable peak readout of a score volume (h, w, d). Pass an
 * upstream (3,) tensor to also get the gradient with respect to the
 * volume.
 */
export function softArgmax(volume: Tensor, upstream?: Tensor): SoftArgmaxResult {
  return withScratchDir((dir) => {
    const volumePath = join(dir, "volume.bin");
    const coordsPath = join(dir, "coords.bin");
    writeFileSync(volumePath, encodeTensor(volume));
    const args = ["softargmax", "--volume", volumePath, "--out", coordsPath];
    const gradPath = join(dir, "grad.bin");
    if (upstream) {
      const upstreamPath = join(dir, "upstream.bin");
      writeFileSync(upstreamPath, encodeTensor(upstream));
      args.push("--upstream", upstreamPath, "--grad-out", gradPath);
    }
    runCli(args);
    const result: SoftArgmaxResult = {
      coords: decodeTensor(readFileSync(coordsPath)),
    };
    if (upstream) {
      result.gradient = decodeTensor(readFileSync(gradPath));
    }
    return result;
  });
}

export interface MetricsRow {
  action: string;
  count: number;
  /** Root-aligned mean joint error, millimeters. */
  mpjpe: number;
  /** Same after similarity alignment. */
  paMpjpe: number;
  /** Fraction of joints within the threshold. */
  pck: number;
  /** pck averaged over thresholds 0..150 step 5. */
  auc: number;
}

export interface MetricsTable {
  all: MetricsRow;
  byAction: Record<string, MetricsRow>;
}

function parseMetrics(text: string): MetricsTable {
  const rows: MetricsRow[] = [];
  for (const line of text.split("\n")) {
    const f = line.trim().split(/\s+/);
    if (f[0] !== "action" || f.length !== 12) {
      continue;
    }
    rows.push({
      action: f[1]!,
      count: Number(f[3]),
      mpjpe: Number(f[5]),
      paMpjpe: Number(f[7]),
      pck: Number(f[9]),
      auc: Number(f[11]),
    });
  }
  const all = rows.find((r) => r.action === "ALL");
  if (!all) {
    throw new Error("metrics output had no ALL row");
  }
  const byAction: Record<string, MetricsRow> = {};
  for (const r of rows) {
    if (r.action !== "ALL") {
      byAction[r.action] = r;
    }
  }
  return { all, byAction };
}

/**
 * Score predicted poses against references. Both lists must be full3d,
 * index-aligned, and the same length. Groups rows by the reference
 * samples' action tags.
 */
export function evalPoses(
  pred: PoseSample[],
  gt: PoseSample[],
  threshold?: number,
): MetricsTable {
  return withScratchDir((dir) => {
    const predPath = join(dir, "pred.txt");
    const gtPath = join(dir, "gt.txt");
    writeFileSync(predPath, writeSamples(pred), "ascii");
    writeFileSync(gtPath, writeSamples(gt), "ascii");
    const args = ["eval", "--pred", predPath, "--gt", gtPath];
    if (threshold !== undefined) {
      args.push("--threshold", String(threshold));
    }
    return parseMetrics(runCli(args));
  });
}
