import { z } from "zod";

// Session document: the single file both sides read and write. The
// viewer never invents fields; anything it cannot represent it must
// carry through untouched (the `layout` bag is ours, everything else
// is shared state).

export const SCHEMA_VERSION = 1;

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
const rgb = z.tuple([
  z.number().int().min(0).max(255),
  z.number().int().min(0).max(255),
  z.number().int().min(0).max(255),
]);

const modelEntry = z.object({
  name: z.string(),
  path: z.string(),
  resolution_bp: z.number().int().min(1),
  normalize: z.boolean().optional(),
});

const trackEntry = z.object({
  kind: z.enum(["signal", "segmentation", "markers"]),
  name: z.string(),
  path: z.string(),
  aggregation: z.enum(["min", "max", "average", "median"]).optional(),
  colormap: z.string().optional(),
  visible: z.boolean().optional(),
});

// inclusive [first, last] bin runs, the on-disk form of a selection mask
const runPair = z.tuple([z.number().int().min(0), z.number().int().min(0)]);

const selectionEntry = z.object({
  id: z.number().int().min(0),
  name: z.string(),
  runs: z.array(runPair),
  color: rgb.optional(),
  visible: z.boolean().optional(),
  clip_exempt: z.boolean().optional(),
  order: z.number().int().min(0).optional(),
});

const markerEntry = z.object({
  first: z.number().int().min(0),
  last: z.number().int().min(0),
  color: rgb.optional(),
  radius_scale: z.number().gt(1).optional(),
});

const cameraEntry = z.object({
  position: vec3.optional(),
  target: vec3.optional(),
  up: vec3.optional(),
  vertical_fov: z.number().gt(0).lt(180).optional(),
  viewport: z.tuple([z.number().int().min(1), z.number().int().min(1)]).optional(),
  near: z.number().gt(0).optional(),
  far: z.number().gt(0).optional(),
  sync_group: z.number().int().nullable().optional(),
});

const ssaoSettings = z.object({
  enabled: z.boolean().optional(),
  radius_near: z.number().gt(0).nullable().optional(),
  radius_far: z.number().gt(0).nullable().optional(),
  samples: z.number().int().min(8).optional(),
  seed: z.number().int().nullable().optional(),
  strength: z.number().min(0).optional(),
});

const renderSettings = z.object({
  representation: z.enum(["spheres", "straight_tube", "smooth_tube"]).optional(),
  radius: z.number().gt(0).nullable().optional(),
  background: z.tuple([z.number(), z.number(), z.number()]).optional(),
  width: z.number().int().min(1).optional(),
  height: z.number().int().min(1).optional(),
  ssao: ssaoSettings.optional(),
});

const planeEntry = z.object({
  normal: vec3,
  offset: z.number(),
  keep_side: z.enum(["positive", "negative"]).optional(),
  axis: z.enum(["x", "y", "z"]).nullable().optional(),
  exempt_selections: z.array(z.number().int().min(0)).optional(),
});

const sessionSchema = z.object({
  version: z.number().int().min(1),
  seed: z.number().int().optional(),
  models: z.array(modelEntry),
  tracks: z.array(trackEntry).optional(),
  selections: z.array(selectionEntry).optional(),
  markers: z.array(markerEntry).optional(),
  cameras: z.array(cameraEntry).optional(),
  render: renderSettings.optional(),
  planes: z.array(planeEntry).optional(),
  layout: z.record(z.unknown()).optional(),
});

export type SessionDoc = z.infer<typeof sessionSchema>;
export type SelectionEntry = z.infer<typeof selectionEntry>;
export type PlaneEntry = z.infer<typeof planeEntry>;
export type CameraEntry = z.infer<typeof cameraEntry>;
export type Run = [number, number];

export class SessionFormatError extends Error {}

export function validateSession(doc: unknown): SessionDoc {
  const parsed = sessionSchema.safeParse(doc);
  if (!parsed.success) {
    const first = parsed.error.issues[0];
    const where = first ? first.path.join(".") : "";
    const what = first ? first.message : "invalid";
    throw new SessionFormatError(`invalid session: ${where} ${what}`);
  }
  if (parsed.data.version > SCHEMA_VERSION) {
    throw new SessionFormatError(
      `session version ${parsed.data.version} is newer than supported ${SCHEMA_VERSION}`,
    );
  }
  return parsed.data;
}

export function parseSession(text: string): SessionDoc {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new SessionFormatError(`not valid JSON: ${(e as Error).message}`);
  }
  return validateSession(raw);
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as object).sort()) {
      out[key] = sortKeysDeep((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/** Sorted keys, two-space indent, trailing newline. Saving the same
 * document twice yields the same bytes regardless of insertion order.
 * (Integral floats serialize as `1` here where Python writes `1.0`;
 * both sides parse either form, so interop is by value, not bytes.) */
export function canonicalJson(doc: SessionDoc): string {
  return JSON.stringify(sortKeysDeep(doc), null, 2) + "\n";
}

export function defaultSession(modelPath: string, resolutionBp: number,
                               name = "session", seed = 0): SessionDoc {
  return validateSession({
    version: SCHEMA_VERSION,
    seed,
    models: [{ name, path: modelPath, resolution_bp: resolutionBp, normalize: true }],
    tracks: [],
    selections: [],
    markers: [],
    cameras: [],
    render: {
      representation: "straight_tube",
      radius: null,
      background: [1, 1, 1],
      width: 512,
      height: 512,
      ssao: { enabled: true, radius_near: null, radius_far: null,
              samples: 16, seed: null, strength: 1 },
    },
    planes: [],
    layout: {},
  });
}

// --- selection runs <-> boolean mask -------------------------------------

export function maskFromRuns(runs: Run[], binCount: number): boolean[] {
  const mask = new Array<boolean>(binCount).fill(false);
  for (const [a, b] of runs) {
    if (a > b || b >= binCount) throw new SessionFormatError(`run ${a}..${b} out of range`);
    for (let i = a; i <= b; i++) mask[i] = true;
  }
  return mask;
}

export function runsFromMask(mask: boolean[]): Run[] {
  const runs: Run[] = [];
  let start = -1;
  for (let i = 0; i <= mask.length; i++) {
    const on = i < mask.length && mask[i];
    if (on && start < 0) start = i;
    if (!on && start >= 0) {
      runs.push([start, i - 1]);
      start = -1;
    }
  }
  return runs;
}

export function selectionBins(sel: SelectionEntry): number[] {
  const bins: number[] = [];
  for (const [a, b] of sel.runs) for (let i = a; i <= b; i++) bins.push(i);
  return bins;
}

/** Bins highlighted in 3D: union of visible selections. */
export function highlightedBins(doc: SessionDoc): Set<number> {
  const out = new Set<number>();
  for (const sel of doc.selections ?? []) {
    if (sel.visible === false) continue;
    for (const b of selectionBins(sel)) out.add(b);
  }
  return out;
}

export function nextSelectionId(doc: SessionDoc): number {
  let next = 0;
  for (const sel of doc.selections ?? []) next = Math.max(next, sel.id + 1);
  return next;
}

/** Precedence rank a new selection should get; order falls back to id
 * when a document omits it, matching the reader on the other side. */
export function nextSelectionOrder(doc: SessionDoc): number {
  let next = 0;
  for (const sel of doc.selections ?? []) {
    next = Math.max(next, (sel.order ?? sel.id) + 1);
  }
  return next;
}
