import type { CoreClient, PickResult, SelectTool } from "./core.js";
import type { Run, SessionDoc } from "./session.js";
import { selectionBins } from "./session.js";
import type { TrackRow, TrackViewState } from "./tracks.js";

// Bidirectional selection linking. Every mutation goes through the
// core's select command and lands in the session document; the track
// view and the 3D highlight both read back from there, so neither side
// can drift from the other.

export interface PendingTool {
  tool: SelectTool;
  clicks: PickResult[];
}

export class SelectionLink {
  private pending: PendingTool | null = null;
  private counter = 0;

  constructor(
    private readonly core: CoreClient,
    readonly sessionPath: string,
    private doc: SessionDoc,
    private readonly tracks: TrackViewState,
  ) {
    // existing selections get their track rows up front
    for (const sel of doc.selections ?? []) this.addRow(sel.id, sel.name);
  }

  get session(): SessionDoc {
    return this.doc;
  }

  private addRow(selectionId: number, name: string): void {
    this.tracks.rows.push({ kind: "selection", name, selectionId });
  }

  private nextName(prefix: string): string {
    this.counter += 1;
    return `${prefix}-${this.counter}`;
  }

  beginTool(tool: SelectTool): void {
    this.pending = { tool, clicks: [] };
  }

  /** Escape: drop any half-entered tool state. */
  cancelTool(): void {
    this.pending = null;
  }

  get activeTool(): SelectTool | null {
    return this.pending?.tool ?? null;
  }

  /** Feed one picked pixel to the active tool. Returns the new
   * selection once the tool has enough input, null while collecting. */
  async clickPick(pick: PickResult, sphereRadius?: number): Promise<SessionDoc | null> {
    if (!this.pending) throw new Error("no active selection tool");
    if (pick.bin === null) return null; // clicked background
    this.pending.clicks.push(pick);
    const { tool, clicks } = this.pending;
    if (tool === "point") {
      return this.commit(tool, { bin: pick.bin, name: this.nextName("point") });
    }
    if (tool === "sphere") {
      if (sphereRadius === undefined || sphereRadius <= 0) {
        throw new Error("sphere tool needs a radius");
      }
      return this.commit(tool, {
        bin: pick.bin, radius: sphereRadius, name: this.nextName("sphere"),
      });
    }
    if (clicks.length < 2) return null; // sequence waits for the second click
    return this.commit(tool, {
      bin: clicks[0]!.bin!, bin2: clicks[1]!.bin!, name: this.nextName("sequence"),
    });
  }

  /** Track-side entry: brushing an interval creates the same kind of
   * selection a 3D sequence pick would. */
  async brushInterval(firstBin: number, lastBin: number): Promise<SessionDoc> {
    const doc = await this.commit("sequence", {
      bin: firstBin, bin2: lastBin, name: this.nextName("brush"),
    });
    return doc;
  }

  private async commit(tool: SelectTool, opts: {
    bin?: number; bin2?: number; radius?: number; name: string;
  }): Promise<SessionDoc> {
    this.doc = await this.core.select(this.sessionPath, tool, opts);
    this.pending = null;
    const added = (this.doc.selections ?? []).at(-1);
    if (added) this.addRow(added.id, added.name);
    return this.doc;
  }

  /** Deleting a selection clears the 3D highlight and its track row. */
  removeSelection(selectionId: number): void {
    const selections = (this.doc.selections ?? []).filter((s) => s.id !== selectionId);
    this.doc = { ...this.doc, selections };
    const keep: TrackRow[] = this.tracks.rows.filter(
      (row) => row.selectionId !== selectionId,
    );
    this.tracks.rows.length = 0;
    this.tracks.rows.push(...keep);
  }

  /** Bin set of one selection as the track row shows it. */
  rowBins(selectionId: number): number[] {
    const sel = (this.doc.selections ?? []).find((s) => s.id === selectionId);
    return sel ? selectionBins(sel) : [];
  }

  /** Runs exactly as stored, for round-trip checks. */
  rowRuns(selectionId: number): Run[] {
    const sel = (this.doc.selections ?? []).find((s) => s.id === selectionId);
    return sel ? sel.runs.map((r) => [...r] as Run) : [];
  }
}
