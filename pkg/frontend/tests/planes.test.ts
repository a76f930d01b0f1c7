import { beforeEach, describe, expect, it } from "vitest";

import type { StubCoreClient } from "../src/stub.js";
import { lineStub } from "../src/stub.js";
import { defaultSession } from "../src/session.js";
import { PlaneController } from "../src/planes.js";
import { defaultCamera } from "../src/viewport.js";

const PATH = "mem://session.json";
const OPTS = { width: 64, height: 64, out: "frame.ppm" };

let core: StubCoreClient;
let ctl: PlaneController;

beforeEach(() => {
  core = lineStub(24, 2);
  const doc = defaultSession("model.xyz", 5000);
  core.putSession(PATH, doc);
  ctl = new PlaneController(core, PATH, doc, OPTS,
                            (d) => core.putSession(PATH, d));
});

describe("plane placement", () => {
  it("axis plane lands in the session and triggers a render", async () => {
    await ctl.setAxisPlane("x", 0.5);
    expect(ctl.plane).toMatchObject({ normal: [1, 0, 0], offset: 0.5, axis: "x" });
    expect(core.renderCalls).toHaveLength(1);
    expect(core.renderCalls[0]!.session.planes?.[0]?.offset).toBe(0.5);
  });

  it("camera-facing plane cuts along the view direction", async () => {
    const cam = defaultCamera(); // at (0, 0, 4) looking at the origin
    await ctl.setCameraFacingPlane(cam, 0.2);
    expect(ctl.plane?.normal).toEqual([0, 0, -1]);
    expect(ctl.plane?.axis).toBeNull();
  });
});

describe("offset slider", () => {
  it("each slider position rewrites the session and re-renders", async () => {
    await ctl.setAxisPlane("z", -1);
    const offsets = Array.from({ length: 10 }, (_, i) => -1 + i * 0.2);
    await ctl.sweep(offsets);

    expect(core.renderCalls.length).toBe(1 + offsets.length);
    const recorded = core.renderCalls.slice(1)
      .map((c) => c.session.planes?.[0]?.offset);
    expect(recorded).toEqual(offsets);
    // orientation survives the sweep untouched
    expect(ctl.plane?.normal).toEqual([0, 0, 1]);
  });

  it("refuses to slide when there is no plane", async () => {
    await expect(ctl.slide(0)).rejects.toThrow(/no cutting plane/);
  });
});

describe("clip exemption", () => {
  it("toggling a selection updates the exemption list in the session", async () => {
    await ctl.setAxisPlane("y", 0);
    await ctl.setExempt(3, true);
    await ctl.setExempt(1, true);
    expect(ctl.plane?.exempt_selections).toEqual([1, 3]);
    expect(core.renderCalls.at(-1)!.session.planes?.[0]?.exempt_selections)
      .toEqual([1, 3]);

    await ctl.setExempt(3, false);
    expect(ctl.plane?.exempt_selections).toEqual([1]);
  });

  it("exemptions persist across slider moves", async () => {
    await ctl.setAxisPlane("x", 0);
    await ctl.setExempt(2, true);
    await ctl.slide(0.7);
    expect(ctl.plane?.exempt_selections).toEqual([2]);
  });
});

describe("removal", () => {
  it("removing the plane restores the whole model", async () => {
    await ctl.setAxisPlane("x", 0.3);
    await ctl.remove();
    expect(ctl.plane).toBeNull();
    expect(ctl.session.planes).toEqual([]);
    expect(core.renderCalls.at(-1)!.session.planes).toEqual([]);
  });
});
