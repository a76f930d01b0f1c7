import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { CliCoreClient, CoreError, binToGenomicLabel } from "../src/core.js";
import {
  canonicalJson, defaultSession, maskFromRuns, parseSession,
} from "../src/session.js";

// End-to-end against the real core over its command-line protocol.
// Skipped when the core is not installed next to the viewer.

const hasCore = spawnSync("skein", ["--help"]).status === 0;

const dir = hasCore ? mkdtempSync(join(tmpdir(), "skein-viewer-")) : "";
const sessionPath = join(dir, "session.json");
const client = new CliCoreClient();

if (hasCore) {
  // 40-bin straight line through two parts, one session referencing it
  const lines: string[] = [];
  for (let i = 0; i < 40; i++) {
    lines.push(`${i < 20 ? "chrA" : "chrB"} ${i} 0 0`);
  }
  writeFileSync(join(dir, "model.xyz"), lines.join("\n") + "\n");
  writeFileSync(sessionPath, canonicalJson(defaultSession("model.xyz", 5000)));
}

afterAll(() => {
  if (dir) rmSync(dir, { recursive: true, force: true });
});

describe.skipIf(!hasCore)("command protocol against the installed core", () => {
  it("info reports the layout the session describes", async () => {
    const info = await client.info(sessionPath);
    expect(info.bins).toBe(40);
    expect(info.resolution).toBe(5000);
    expect(info.parts).toEqual([
      { name: "chrA", first: 0, last: 19 },
      { name: "chrB", first: 20, last: 39 },
    ]);
  }, 30_000);

  it("pick hits the model at the image center and misses at the corner", async () => {
    const center = await client.pick(sessionPath, 256, 256);
    expect(center.bin).not.toBeNull();
    expect(center.label).toMatch(/^chr[AB]:[\d,]+-[\d,]+$/);

    // both sides agree on what to call that bin
    const info = await client.info(sessionPath);
    expect(binToGenomicLabel(info, center.bin!))
      .toBe(`${center.label} (bin ${center.bin})`);

    const corner = await client.pick(sessionPath, 0, 0);
    expect(corner.bin).toBeNull();
  }, 30_000);

  it("tile returns a symmetric zero-diagonal distance block", async () => {
    const tile = await client.tile(sessionPath, 0, [0, 5]);
    expect(tile.values).toHaveLength(6);
    for (let i = 0; i < 6; i++) {
      expect(tile.values[i]).toHaveLength(6);
      expect(tile.values[i]![i]).toBe(0);
      for (let j = 0; j < i; j++) {
        expect(tile.values[i]![j]).toBeCloseTo(tile.values[j]![i]!, 12);
      }
    }
    // straight line: distance grows linearly along a row
    const spacing = tile.values[0]![1]!;
    expect(spacing).toBeGreaterThan(0);
    expect(tile.values[0]![5]!).toBeCloseTo(5 * spacing, 9);
  }, 30_000);

  it("merged tiles follow the level halving the panel assumes", async () => {
    const merged = await client.tile(sessionPath, 2, [0, 4]);
    const base = await client.tile(sessionPath, 0, [0, 1]);
    // level 2 merges 4 line bins, so merged spacing = 4x base spacing
    expect(merged.values[0]![1]!).toBeCloseTo(4 * base.values[0]![1]!, 9);
  }, 30_000);

  it("render writes a deterministic image", async () => {
    const a = await client.render(sessionPath,
      { width: 96, height: 64, out: join(dir, "a.ppm"), seed: 9 });
    const b = await client.render(sessionPath,
      { width: 96, height: 64, out: join(dir, "b.ppm"), seed: 9 });
    const bytesA = readFileSync(a);
    expect(bytesA.subarray(0, 2).toString()).toBe("P6");
    expect(bytesA.equals(readFileSync(b))).toBe(true);
  }, 60_000);

  it("core accepts a session this side wrote and adds the selection", async () => {
    const out = join(dir, "selected.json");
    const doc = await client.select(sessionPath, "sphere",
      { bin: 10, radius: 0.12, name: "probe", out });

    // line spacing after normalization is 1/19.5, so 0.12 reaches 2 bins out
    expect(doc.selections).toHaveLength(1);
    expect(doc.selections![0]!.runs).toEqual([[8, 12]]);
    expect(doc.selections![0]!.name).toBe("probe");

    // --out left the original untouched
    const original = parseSession(readFileSync(sessionPath, "utf8"));
    expect(original.selections).toEqual([]);

    // stacking a second selection in place keeps the first
    const doc2 = await client.select(out, "sequence",
      { bin: 30, bin2: 33, name: "tail" });
    expect(doc2.selections).toHaveLength(2);
    const mask = maskFromRuns(doc2.selections![1]!.runs, 40);
    expect(mask.slice(30, 34)).toEqual([true, true, true, true]);
  }, 30_000);

  it("usage errors surface with the core's exit code", async () => {
    await expect(client.select(sessionPath, "sphere", { bin: 3 }))
      .rejects.toThrow(CoreError);
    await expect(client.select(sessionPath, "sphere", { bin: 3 }))
      .rejects.toMatchObject({ exitCode: 2 });
  }, 30_000);
});
