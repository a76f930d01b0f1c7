import type { CoreClient, TileResult } from "./core.js";

// Distance-map panel. The viewer owns the viewport math (which level,
// which tiles); every distance value comes back from the core's tile
// command. Responses are versioned so a stale one can never paint over
// a newer window.

export const TILE_SIZE = 256;

/** Coarsest level whose merged span of `n` bins still fits one tile.
 * Must agree exactly with the core's own choice so tile boundaries
 * line up: halve until ceil(n / 2^level) <= 256. */
export function chooseLevel(n: number): number {
  if (n < 1) throw new RangeError("need at least one bin");
  let level = 0;
  while (Math.ceil(n / (1 << level)) > TILE_SIZE) level++;
  return level;
}

export interface TileRequest {
  level: number;
  rows: [number, number];
  cols: [number, number];
}

/** Monotonic request counter; anything but the latest issue is stale. */
export class VersionGate {
  private latest = 0;

  issue(): number {
    return ++this.latest;
  }

  accept(version: number): boolean {
    return version === this.latest;
  }
}

export interface MapBlock {
  rows: [number, number];
  cols: [number, number];
  values: number[][];
}

export interface MapView {
  level: number;
  first: number;
  last: number;
  blocks: MapBlock[];
}

function blockRanges(first: number, last: number): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let a = first; a <= last; a += TILE_SIZE) {
    out.push([a, Math.min(a + TILE_SIZE - 1, last)]);
  }
  return out;
}

/** Tile requests covering the window's upper triangle. The map is
 * symmetric, so only blocks with col-start >= row-start are fetched;
 * the mirror half is filled by transposition on the client. */
export function planRequests(level: number, first: number, last: number): TileRequest[] {
  const ranges = blockRanges(first, last);
  const out: TileRequest[] = [];
  for (const rows of ranges) {
    for (const cols of ranges) {
      if (cols[0] >= rows[0]) out.push({ level, rows, cols });
    }
  }
  return out;
}

export class DistanceMapPanel {
  private readonly gate = new VersionGate();
  private view: MapView | null = null;
  requestLog: TileRequest[] = [];

  constructor(
    private readonly core: CoreClient,
    readonly sessionPath: string,
  ) {}

  get current(): MapView | null {
    return this.view;
  }

  /** Fetch the map for an inclusive bin window. Returns the view it
   * produced, or null if a newer window superseded it mid-flight. */
  async setWindow(first: number, last: number): Promise<MapView | null> {
    if (first > last || first < 0) throw new RangeError(`bad window ${first}..${last}`);
    const version = this.gate.issue();
    const level = chooseLevel(last - first + 1);
    // window in merged-bin coordinates at the chosen level
    const lo = first >> level;
    const hi = last >> level;
    const requests = planRequests(level, lo, hi);
    this.requestLog.push(...requests);
    const tiles: TileResult[] = await Promise.all(
      requests.map((r) => this.core.tile(this.sessionPath, r.level, r.rows, r.cols)),
    );
    if (!this.gate.accept(version)) return null;
    const blocks: MapBlock[] = tiles.map((t) => ({
      rows: t.rows, cols: t.cols, values: t.values,
    }));
    this.view = { level, first: lo, last: hi, blocks };
    return this.view;
  }

  /** Restrict the window to the span covering a selection's runs.
   * Tiles are contiguous ranges, so a scattered selection is shown via
   * its covering interval; bins outside the runs are not requested
   * separately, just displayed dimmed by the caller. */
  async setSelectionWindow(runs: Array<[number, number]>): Promise<MapView | null> {
    if (runs.length === 0) throw new RangeError("empty selection");
    let lo = Infinity;
    let hi = -Infinity;
    for (const [a, b] of runs) {
      lo = Math.min(lo, a);
      hi = Math.max(hi, b);
    }
    return this.setWindow(lo, hi);
  }

  /** Distance between merged bins (i, j) in the current view, looked
   * up from whichever fetched block holds that cell. */
  valueAt(i: number, j: number): number {
    if (!this.view) throw new Error("no map loaded");
    // stored triangle has col-block >= row-block; mirror if needed
    for (const b of this.view.blocks) {
      const inRows = i >= b.rows[0] && i <= b.rows[1];
      const inCols = j >= b.cols[0] && j <= b.cols[1];
      if (inRows && inCols) {
        const v = b.values[i - b.rows[0]]?.[j - b.cols[0]];
        if (v === undefined) throw new Error("ragged tile");
        return v;
      }
    }
    const mirrored = this.view.blocks.some(
      (b) => j >= b.rows[0] && j <= b.rows[1] && i >= b.cols[0] && i <= b.cols[1],
    );
    if (mirrored) return this.valueAt(j, i);
    throw new RangeError(`cell (${i}, ${j}) outside the fetched window`);
  }
}
