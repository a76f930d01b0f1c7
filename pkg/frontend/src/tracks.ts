// Track view: rows under the 3D views, all sharing one horizontal
// window over the bin axis, so zooming or panning any one track moves
// every other one with it.

export interface BinWindow {
  first: number;
  last: number; // inclusive
}

export type TrackKind = "distance_map" | "segmentation" | "selection" | "signal";

export interface TrackRow {
  kind: TrackKind;
  name: string;
  selectionId?: number; // rows mirroring a selection point back at it
}

export class TrackViewState {
  readonly rows: TrackRow[] = [];
  window: BinWindow;

  constructor(readonly binCount: number) {
    if (binCount < 1) throw new RangeError("track view needs at least one bin");
    this.window = { first: 0, last: binCount - 1 };
  }

  visibleBins(): number {
    return this.window.last - this.window.first + 1;
  }

  /** Zoom about a focus bin; factor < 1 zooms in. Window never leaves
   * the model and never collapses below one bin. */
  zoom(factor: number, focus?: number): void {
    const { first, last } = this.window;
    const f = focus ?? (first + last) / 2;
    const half = Math.max(0.5, ((last - first + 1) * factor) / 2);
    let a = Math.round(f - half);
    let b = Math.round(f + half) - 1;
    if (a < 0) { b -= a; a = 0; }
    if (b > this.binCount - 1) { a -= b - (this.binCount - 1); b = this.binCount - 1; }
    this.window = { first: Math.max(0, a), last: Math.min(this.binCount - 1, Math.max(a, b)) };
  }

  pan(deltaBins: number): void {
    const width = this.visibleBins();
    let a = this.window.first + deltaBins;
    a = Math.max(0, Math.min(this.binCount - width, a));
    this.window = { first: a, last: a + width - 1 };
  }

  /** Brushing an interval on any row yields a clamped inclusive range. */
  brush(fromBin: number, toBin: number): BinWindow {
    const a = Math.max(0, Math.min(fromBin, toBin));
    const b = Math.min(this.binCount - 1, Math.max(fromBin, toBin));
    return { first: a, last: b };
  }
}
