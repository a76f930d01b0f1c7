import type { CoreClient, RenderOptions } from "./core.js";
import type { PlaneEntry, SessionDoc } from "./session.js";
import type { CameraState, Vec3 } from "./viewport.js";

// Cutting-plane gizmo: one plane at a time, axis-aligned or facing the
// camera, slid by offset. Every change rewrites the session's plane
// list and asks the core for a fresh frame.

const AXIS_NORMALS: Record<"x" | "y" | "z", Vec3> = {
  x: [1, 0, 0],
  y: [0, 1, 0],
  z: [0, 0, 1],
};

export class PlaneController {
  constructor(
    private readonly core: CoreClient,
    readonly sessionPath: string,
    private doc: SessionDoc,
    private readonly renderOpts: RenderOptions,
    // persists the document where the core will read it (a file for the
    // command-line core, an in-memory store for the stub)
    private readonly save: (doc: SessionDoc) => void | Promise<void>,
  ) {}

  get session(): SessionDoc {
    return this.doc;
  }

  get plane(): PlaneEntry | null {
    return (this.doc.planes ?? [])[0] ?? null;
  }

  private async apply(planes: PlaneEntry[]): Promise<void> {
    this.doc = { ...this.doc, planes };
    await this.save(this.doc);
    await this.core.render(this.sessionPath, this.renderOpts);
  }

  async setAxisPlane(axis: "x" | "y" | "z", offset: number,
                     keepSide: "positive" | "negative" = "negative"): Promise<void> {
    await this.apply([{
      normal: [...AXIS_NORMALS[axis]] as Vec3,
      offset,
      keep_side: keepSide,
      axis,
      exempt_selections: this.plane?.exempt_selections ?? [],
    }]);
  }

  /** Arbitrary orientation: the plane faces the camera's view
   * direction, keeping what lies in front of the offset. */
  async setCameraFacingPlane(camera: CameraState, offset: number): Promise<void> {
    const d: Vec3 = [
      camera.target[0] - camera.position[0],
      camera.target[1] - camera.position[1],
      camera.target[2] - camera.position[2],
    ];
    const l = Math.hypot(d[0], d[1], d[2]);
    if (l === 0) throw new RangeError("camera has no view direction");
    await this.apply([{
      normal: [d[0] / l, d[1] / l, d[2] / l],
      offset,
      keep_side: "negative",
      axis: null,
      exempt_selections: this.plane?.exempt_selections ?? [],
    }]);
  }

  /** Offset slider. Each position is a session mutation plus a render
   * request; sweeping it animates the cut through the model. */
  async slide(offset: number): Promise<void> {
    const current = this.plane;
    if (!current) throw new Error("no cutting plane to slide");
    await this.apply([{ ...current, offset }]);
  }

  async sweep(offsets: number[]): Promise<void> {
    for (const offset of offsets) await this.slide(offset);
  }

  /** Checkbox: keep this selection visible on both sides of the cut. */
  async setExempt(selectionId: number, exempt: boolean): Promise<void> {
    const current = this.plane;
    if (!current) throw new Error("no cutting plane");
    const ids = new Set(current.exempt_selections ?? []);
    if (exempt) ids.add(selectionId);
    else ids.delete(selectionId);
    await this.apply([{
      ...current,
      exempt_selections: [...ids].sort((a, b) => a - b),
    }]);
  }

  /** Removing the plane restores the whole model. */
  async remove(): Promise<void> {
    await this.apply([]);
  }
}
