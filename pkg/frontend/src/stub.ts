import type {
  CoreClient, ModelInfo, PickResult, RenderOptions, SelectOptions,
  SelectTool, TileResult,
} from "./core.js";
import { CoreError } from "./core.js";
import type { Run, SessionDoc } from "./session.js";
import {
  nextSelectionId, nextSelectionOrder, runsFromMask, validateSession,
} from "./session.js";

export interface RenderCall {
  session: SessionDoc;
  opts: RenderOptions;
}

/** In-memory stand-in for the core used by the viewer tests. It plays
 * the other side of the protocol with the same documented semantics
 * (sphere = Euclidean distance <= radius, sequence = inclusive index
 * range, level merge = mean of 2^L consecutive bins per part), so the
 * controllers can be exercised without spawning anything. Sessions are
 * kept in a map keyed by path; nothing touches the file system. */
export class StubCoreClient implements CoreClient {
  readonly sessions = new Map<string, SessionDoc>();
  readonly renderCalls: RenderCall[] = [];
  pickTable = new Map<string, number>(); // "x,y" -> bin
  tileDelayMs = 0;

  constructor(
    readonly positions: [number, number, number][],
    readonly modelInfo: ModelInfo,
  ) {
    if (positions.length !== modelInfo.bins) {
      throw new CoreError("positions do not match the declared bin count", null);
    }
  }

  putSession(path: string, doc: SessionDoc): void {
    this.sessions.set(path, validateSession(doc));
  }

  getSession(path: string): SessionDoc {
    const doc = this.sessions.get(path);
    if (!doc) throw new CoreError(`no session at ${path}`, 1);
    return doc;
  }

  async pick(session: string, x: number, y: number): Promise<PickResult> {
    this.getSession(session);
    const bin = this.pickTable.get(`${x},${y}`);
    if (bin === undefined) return { bin: null };
    const part = this.modelInfo.parts.find((p) => bin >= p.first && bin <= p.last);
    if (!part) return { bin: null };
    const start = (bin - part.first) * this.modelInfo.resolution;
    return {
      bin,
      part: part.name,
      start_bp: start,
      end_bp: start + this.modelInfo.resolution,
      label: `${part.name}:${start}-${start + this.modelInfo.resolution}`,
    };
  }

  private mergedPositions(level: number): [number, number, number][] {
    const step = 1 << level;
    const merged: [number, number, number][] = [];
    for (const part of this.modelInfo.parts) {
      for (let first = part.first; first <= part.last; first += step) {
        const last = Math.min(first + step - 1, part.last);
        let x = 0, y = 0, z = 0;
        for (let i = first; i <= last; i++) {
          const p = this.positions[i]!;
          x += p[0]; y += p[1]; z += p[2];
        }
        const n = last - first + 1;
        merged.push([x / n, y / n, z / n]);
      }
    }
    return merged;
  }

  async tile(session: string, level: number, rows: [number, number],
             cols?: [number, number]): Promise<TileResult> {
    this.getSession(session);
    if (this.tileDelayMs > 0) {
      await new Promise((resolve) => setTimeout(resolve, this.tileDelayMs));
    }
    const c = cols ?? rows;
    const merged = this.mergedPositions(level);
    if (rows[1] >= merged.length || c[1] >= merged.length) {
      throw new CoreError(`range exceeds ${merged.length} merged bins`, 2);
    }
    const values: number[][] = [];
    for (let i = rows[0]; i <= rows[1]; i++) {
      const row: number[] = [];
      const a = merged[i]!;
      for (let j = c[0]; j <= c[1]; j++) {
        const b = merged[j]!;
        row.push(Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]));
      }
      values.push(row);
    }
    return { level, rows, cols: c, values };
  }

  async render(session: string, opts: RenderOptions): Promise<string> {
    // deep-copy so later mutations do not rewrite history
    const doc = JSON.parse(JSON.stringify(this.getSession(session))) as SessionDoc;
    this.renderCalls.push({ session: doc, opts });
    return opts.out;
  }

  async select(session: string, tool: SelectTool,
               opts: SelectOptions): Promise<SessionDoc> {
    const doc = JSON.parse(JSON.stringify(this.getSession(session))) as SessionDoc;
    const n = this.modelInfo.bins;
    const mask = new Array<boolean>(n).fill(false);
    if (tool === "point") {
      if (opts.bin === undefined || opts.bin < 0 || opts.bin >= n) {
        throw new CoreError("point tool needs a valid --bin", 2);
      }
      mask[opts.bin] = true;
    } else if (tool === "sequence") {
      if (opts.bin === undefined || opts.bin2 === undefined) {
        throw new CoreError("sequence tool needs --bin and --bin2", 2);
      }
      const a = Math.min(opts.bin, opts.bin2);
      const b = Math.max(opts.bin, opts.bin2);
      if (a < 0 || b >= n) throw new CoreError("sequence out of range", 2);
      for (let i = a; i <= b; i++) mask[i] = true;
    } else {
      if (opts.radius === undefined || opts.radius <= 0) {
        throw new CoreError("sphere tool needs a positive --radius", 2);
      }
      const center = opts.point ?? this.positions[opts.bin ?? -1];
      if (!center) throw new CoreError("sphere tool needs --bin or --point", 2);
      for (let i = 0; i < n; i++) {
        const p = this.positions[i]!;
        const d = Math.hypot(p[0] - center[0], p[1] - center[1], p[2] - center[2]);
        if (d <= opts.radius) mask[i] = true;
      }
    }
    const runs: Run[] = runsFromMask(mask);
    const selections = doc.selections ?? [];
    selections.push({
      id: nextSelectionId(doc),
      name: opts.name ?? "selection",
      runs,
      color: [255, 200, 0],
      visible: true,
      clip_exempt: false,
      order: nextSelectionOrder(doc),
    });
    doc.selections = selections;
    this.sessions.set(opts.out ?? session, validateSession(doc));
    return this.getSession(opts.out ?? session);
  }

  async info(session: string): Promise<ModelInfo> {
    this.getSession(session);
    return this.modelInfo;
  }
}

/** Straight-line test model: bin i sits at (i, 0, 0). */
export function lineStub(bins = 24, parts = 2, resolution = 5000): StubCoreClient {
  const positions: [number, number, number][] = [];
  for (let i = 0; i < bins; i++) positions.push([i, 0, 0]);
  const per = Math.floor(bins / parts);
  const partInfos = [];
  let first = 0;
  for (let p = 0; p < parts; p++) {
    const last = p === parts - 1 ? bins - 1 : first + per - 1;
    partInfos.push({ name: `chr${p + 1}`, first, last });
    first = last + 1;
  }
  return new StubCoreClient(positions, { bins, resolution, parts: partInfos });
}
