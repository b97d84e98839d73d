/**
 * Subprocess plumbing for the hemlets command line. Everything the package
 * does goes through here; there is no numeric code on this side of the
 * boundary.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/**
 * The command is `python3 -m hemlets` unless the HEMLETS_CLI environment
 * variable names something else (split on whitespace, e.g. a console-script
 * path or an interpreter from a specific virtualenv).
 */
function cliCommand(): string[] {
  const override = process.env.HEMLETS_CLI;
  if (override && override.trim().length > 0) {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "hemlets"];
}

/** Run one CLI invocation; nonzero exit becomes an Error carrying stderr. */
export function runCli(args: string[]): string {
  const [cmd, ...head] = cliCommand();
  const res = spawnSync(cmd!, [...head, ...args], {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) {
    throw res.error;
  }
  if (res.status !== 0) {
    const detail = (res.stderr ?? "").trim() || `exit code ${res.status}`;
    throw new Error(`hemlets ${args[0] ?? ""} failed: ${detail}`);
  }
  return res.stdout;
}

/** Make a scratch directory, hand it to fn, and clean up afterwards. */
export function withScratchDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "hemlets-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
