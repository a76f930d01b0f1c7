import type { CameraEntry } from "./session.js";

export type Vec3 = [number, number, number];

export interface CameraState {
  position: Vec3;
  target: Vec3;
  up: Vec3;
  verticalFov: number;
}

export type Representation = "spheres" | "straight_tube" | "smooth_tube";
export type SelectionTool = "point" | "sphere" | "sequence" | null;

export interface ViewportState {
  camera: CameraState;
  representation: Representation;
  activeTool: SelectionTool;
  hoverBin: number | null;
  syncGroup: number | null;
}

export function defaultCamera(): CameraState {
  return {
    position: [0, 0, 4],
    target: [0, 0, 0],
    up: [0, 1, 0],
    verticalFov: 45,
  };
}

export function makeViewport(syncGroup: number | null = null): ViewportState {
  return {
    camera: defaultCamera(),
    representation: "smooth_tube",
    activeTool: null,
    hoverBin: null,
    syncGroup,
  };
}

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const len = (a: Vec3) => Math.hypot(a[0], a[1], a[2]);

/** Drag rotation about the target: yaw around the up axis, pitch around
 * the screen-horizontal axis, pitch clamped away from the poles. */
export function orbit(cam: CameraState, yaw: number, pitch: number): CameraState {
  const offset = sub(cam.position, cam.target);
  const r = len(offset);
  let theta = Math.atan2(offset[0], offset[2]);
  let phi = Math.acos(Math.min(1, Math.max(-1, offset[1] / r)));
  theta -= yaw;
  phi = Math.min(Math.PI - 0.01, Math.max(0.01, phi - pitch));
  const position: Vec3 = [
    cam.target[0] + r * Math.sin(phi) * Math.sin(theta),
    cam.target[1] + r * Math.cos(phi),
    cam.target[2] + r * Math.sin(phi) * Math.cos(theta),
  ];
  return { ...cam, position };
}

export const MIN_DOLLY_DISTANCE = 1e-3;

/** Wheel dolly toward/away from the target; never crosses it. */
export function dolly(cam: CameraState, wheel: number): CameraState {
  const offset = sub(cam.position, cam.target);
  const r = len(offset);
  const next = Math.max(MIN_DOLLY_DISTANCE, r * Math.exp(wheel * 0.1));
  return { ...cam, position: add(cam.target, scale(offset, next / r)) };
}

export function cameraToSession(cam: CameraState, viewport: [number, number],
                                syncGroup: number | null): CameraEntry {
  return {
    position: cam.position,
    target: cam.target,
    up: cam.up,
    vertical_fov: cam.verticalFov,
    viewport,
    sync_group: syncGroup,
  };
}

export function cameraFromSession(entry: CameraEntry): CameraState {
  const def = defaultCamera();
  return {
    position: entry.position ?? def.position,
    target: entry.target ?? def.target,
    up: entry.up ?? def.up,
    verticalFov: entry.vertical_fov ?? def.verticalFov,
  };
}

/** Keeps cameras of a sync group identical. Moves are queued and pushed
 * to the peers at the next frame() tick, so a change always lands on
 * every grouped viewport within one frame. */
export class CameraSyncHub {
  private viewports: ViewportState[] = [];
  private pending = new Map<number, CameraState>(); // group -> camera

  register(vp: ViewportState): void {
    this.viewports.push(vp);
  }

  /** A user moved this viewport's camera. */
  moved(vp: ViewportState, camera: CameraState): void {
    vp.camera = camera;
    if (vp.syncGroup !== null) this.pending.set(vp.syncGroup, camera);
  }

  /** One UI frame: propagate queued moves to grouped peers. */
  frame(): void {
    for (const [group, camera] of this.pending) {
      for (const vp of this.viewports) {
        if (vp.syncGroup === group) vp.camera = camera;
      }
    }
    this.pending.clear();
  }
}
