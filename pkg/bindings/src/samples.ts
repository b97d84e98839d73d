/**
 * Reader and writer for the "pose samples v1" text format.
 *
 * One block per sample between `sample i` and `end` lines, holding the
 * annotation kind, optional action tag, normalized 2D joints, and either
 * metric 3D joints (full3d) or per-part relative depth labels (ordinal).
 * Blank lines and `#` comments are ignored on read. Values survive a
 * write/read round trip exactly: floats are printed with enough digits to
 * reparse to the same double on either side of the CLI boundary.
 */

export type SampleKind = "full3d" | "ordinal" | "2d";

export interface Joint2d {
  x: number;
  y: number;
  visible: boolean;
}

export interface Joint3d {
  x: number;
  y: number;
  z: number;
  valid: boolean;
}

export interface PoseSample {
  kind: SampleKind;
  action?: string;
  joints2d: Joint2d[];
  /** Only present for full3d samples. */
  joints3d?: Joint3d[];
  /** Only present for ordinal samples; null marks an unknown part label. */
  ordinal?: (number | null)[];
}

const KINDS: SampleKind[] = ["full3d", "ordinal", "2d"];

function fmt(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`sample values must be finite, got ${x}`);
  }
  // String(x) is the shortest decimal that reparses to the same double,
  // which is all the text format requires. Negative zero still needs its
  // sign spelled out.
  if (Object.is(x, -0)) {
    return "-0.0";
  }
  return String(x);
}

/** Render samples as the text format, including the trailing newline. */
export function writeSamples(samples: PoseSample[]): string {
  const lines: string[] = ["pose samples v1"];
  samples.forEach((s, index) => {
    lines.push(`sample ${index}`);
    lines.push(`kind ${s.kind}`);
    if (s.action) {
      lines.push(`action ${s.action}`);
    }
    s.joints2d.forEach((j, i) => {
      lines.push(`joint2d ${i} ${fmt(j.x)} ${fmt(j.y)} ${j.visible ? 1 : 0}`);
    });
    if (s.joints3d) {
      s.joints3d.forEach((j, i) => {
        lines.push(
          `joint3d ${i} ${fmt(j.x)} ${fmt(j.y)} ${fmt(j.z)} ${j.valid ? 1 : 0}`,
        );
      });
    }
    if (s.ordinal) {
      s.ordinal.forEach((r, k) => {
        lines.push(`ordinal ${k} ${r === null ? "?" : r}`);
      });
    }
    lines.push("end");
  });
  return lines.join("\n") + "\n";
}

function parseFloatToken(token: string, line: string): number {
  const v = Number(token);
  if (token.trim() === "" || Number.isNaN(v)) {
    throw new Error(`bad number ${token} in line: ${line}`);
  }
  return v;
}

function parseIndex(token: string, expected: number, line: string): void {
  if (Number(token) !== expected) {
    throw new Error(`expected index ${expected} in line: ${line}`);
  }
}

/** Parse the text format back into sample records. */
export function readSamples(text: string): PoseSample[] {
  const lines = text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  if (lines.length === 0 || lines[0] !== "pose samples v1") {
    throw new Error("not a pose samples v1 file");
  }
  const samples: PoseSample[] = [];
  let pos = 1;
  while (pos < lines.length) {
    const line = lines[pos]!;
    const open = line.split(/\s+/);
    if (open[0] !== "sample") {
      throw new Error(`expected a sample block, got: ${line}`);
    }
    parseIndex(open[1]!, samples.length, line);
    pos += 1;

    const kindParts = (lines[pos] ?? "").split(/\s+/);
    if (kindParts[0] !== "kind" || !KINDS.includes(kindParts[1] as SampleKind)) {
      throw new Error(`expected a kind line, got: ${lines[pos]}`);
    }
    const sample: PoseSample = { kind: kindParts[1] as SampleKind, joints2d: [] };
    pos += 1;

    while (pos < lines.length && lines[pos] !== "end") {
      const row = lines[pos]!;
      const f = row.split(/\s+/);
      if (f[0] === "action" && f.length === 2) {
        sample.action = f[1]!;
      } else if (f[0] === "joint2d" && f.length === 5) {
        parseIndex(f[1]!, sample.joints2d.length, row);
        sample.joints2d.push({
          x: parseFloatToken(f[2]!, row),
          y: parseFloatToken(f[3]!, row),
          visible: f[4] === "1",
        });
      } else if (f[0] === "joint3d" && f.length === 6) {
        sample.joints3d = sample.joints3d ?? [];
        parseIndex(f[1]!, sample.joints3d.length, row);
        sample.joints3d.push({
          x: parseFloatToken(f[2]!, row),
          y: parseFloatToken(f[3]!, row),
          z: parseFloatToken(f[4]!, row),
          valid: f[5] === "1",
        });
      } else if (f[0] === "ordinal" && f.length === 3) {
        sample.ordinal = sample.ordinal ?? [];
        parseIndex(f[1]!, sample.ordinal.length, row);
        if (f[2] === "?") {
          sample.ordinal.push(null);
        } else {
          const r = Number(f[2]);
          if (![-1, 0, 1].includes(r)) {
            throw new Error(`bad ordinal label in line: ${row}`);
          }
          sample.ordinal.push(r);
        }
      } else {
        throw new Error(`unrecognized line in sample block: ${row}`);
      }
      pos += 1;
    }
    if (pos === lines.length) {
      throw new Error("sample block never closed");
    }
    pos += 1;
    samples.push(sample);
  }
  return samples;
}
