import { execFile } from "node:child_process";
import { promisify } from "node:util";

import type { SessionDoc } from "./session.js";
import { parseSession } from "./session.js";

const run = promisify(execFile);

// Command protocol to the core. The viewer displays nothing it computed
// itself: picks, tiles, images and selection membership all come back
// through this interface, keyed on a session file both sides read.

export interface PickResult {
  bin: number | null;
  part?: string;
  start_bp?: number;
  end_bp?: number;
  label?: string;
}

export interface TileResult {
  level: number;
  rows: [number, number];
  cols: [number, number];
  values: number[][];
}

export interface PartInfo {
  name: string;
  first: number;
  last: number;
}

export interface ModelInfo {
  bins: number;
  resolution: number;
  parts: PartInfo[];
}

export interface RenderOptions {
  width: number;
  height: number;
  out: string;
  seed?: number;
  format?: "ppm" | "png";
}

export type SelectTool = "point" | "sphere" | "sequence";

export interface SelectOptions {
  bin?: number;
  bin2?: number;
  radius?: number;
  point?: [number, number, number];
  name?: string;
  out?: string; // write here instead of mutating the session in place
}

export interface CoreClient {
  pick(session: string, x: number, y: number): Promise<PickResult>;
  tile(session: string, level: number, rows: [number, number],
       cols?: [number, number]): Promise<TileResult>;
  render(session: string, opts: RenderOptions): Promise<string>;
  select(session: string, tool: SelectTool, opts: SelectOptions): Promise<SessionDoc>;
  info(session: string): Promise<ModelInfo>;
}

export class CoreError extends Error {
  constructor(message: string, readonly exitCode: number | null) {
    super(message);
  }
}

/** Talks to the core by spawning its command-line interface. */
export class CliCoreClient implements CoreClient {
  constructor(private readonly binary = "skein") {}

  private async exec(args: string[]): Promise<string> {
    try {
      const { stdout } = await run(this.binary, args, { maxBuffer: 64 * 1024 * 1024 });
      return stdout;
    } catch (e) {
      const err = e as NodeJS.ErrnoException & { code?: number | string; stderr?: string };
      const code = typeof err.code === "number" ? err.code : null;
      const detail = (err.stderr ?? err.message ?? "").trim();
      throw new CoreError(`${this.binary} ${args[0]}: ${detail}`, code);
    }
  }

  async pick(session: string, x: number, y: number): Promise<PickResult> {
    const out = await this.exec([
      "pick", "--session", session, "--x", String(x), "--y", String(y)]);
    return JSON.parse(out) as PickResult;
  }

  async tile(session: string, level: number, rows: [number, number],
             cols?: [number, number]): Promise<TileResult> {
    const args = ["tile", "--session", session, "--level", String(level),
                  "--rows", `${rows[0]}:${rows[1]}`];
    if (cols) args.push("--cols", `${cols[0]}:${cols[1]}`);
    return JSON.parse(await this.exec(args)) as TileResult;
  }

  async render(session: string, opts: RenderOptions): Promise<string> {
    const args = ["render", "--session", session,
                  "--width", String(opts.width), "--height", String(opts.height),
                  "--out", opts.out];
    if (opts.seed !== undefined) args.push("--seed", String(opts.seed));
    if (opts.format) args.push("--format", opts.format);
    await this.exec(args);
    return opts.out;
  }

  async select(session: string, tool: SelectTool,
               opts: SelectOptions): Promise<SessionDoc> {
    const args = ["select", tool, "--session", session];
    if (opts.bin !== undefined) args.push("--bin", String(opts.bin));
    if (opts.bin2 !== undefined) args.push("--bin2", String(opts.bin2));
    if (opts.radius !== undefined) args.push("--radius", String(opts.radius));
    if (opts.point) args.push("--point", opts.point.join(","));
    if (opts.name) args.push("--name", opts.name);
    if (opts.out) args.push("--out", opts.out);
    await this.exec(args);
    const written = opts.out ?? session;
    const { readFile } = await import("node:fs/promises");
    return parseSession(await readFile(written, "utf8"));
  }

  async info(session: string): Promise<ModelInfo> {
    const text = await this.exec(["info", "--session", session]);
    return parseInfoText(text);
  }
}

/** The `info` command prints for humans; this recovers the layout. */
export function parseInfoText(text: string): ModelInfo {
  const binsMatch = text.match(/^bins: (\d+), parts: \d+/m);
  const resMatch = text.match(/^resolution: (\d+) bp\/bin/m);
  if (!binsMatch || !resMatch) throw new CoreError("unrecognized info output", null);
  const parts: PartInfo[] = [];
  const partRe = /^ {2}(\S+): bins (\d+)\.\.(\d+)/gm;
  for (let m = partRe.exec(text); m; m = partRe.exec(text)) {
    parts.push({ name: m[1]!, first: Number(m[2]), last: Number(m[3]) });
  }
  return {
    bins: Number(binsMatch[1]),
    resolution: Number(resMatch[1]),
    parts,
  };
}

/** "chr1:30,000-40,000 (bin 3)" for the hover tooltip; layout comes
 * from the core's info output, this is formatting only. */
export function binToGenomicLabel(info: ModelInfo, bin: number): string | null {
  const part = info.parts.find((p) => bin >= p.first && bin <= p.last);
  if (!part) return null;
  const local = bin - part.first;
  const start = local * info.resolution;
  const end = start + info.resolution;
  const fmt = (n: number) => n.toLocaleString("en-US");
  return `${part.name}:${fmt(start)}-${fmt(end)} (bin ${bin})`;
}
