import { describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api.js";
import { MaskBrush } from "../src/maskbrush.js";
import { SessionState } from "../src/session.js";
import { IntensitySlider } from "../src/slider.js";
import type { OrbitViewer } from "../src/viewer.js";

function fakeViewer(shown: string[]): OrbitViewer {
  return {
    orbit: { azimuth: 30, elevation: 20, radius: 4, width: 100, height: 100 },
    cameraParam: () => "cam",
    setScene: (id: string) => shown.push(id),
  } as unknown as OrbitViewer;
}

function session(): SessionState {
  const s = new SessionState();
  s.sceneId = "scene1";
  s.addCard({ variationId: "var1", label: "edit" });
  return s;
}

describe("IntensitySlider", () => {
  it("debounces slider movement into a single scale-apply round trip", async () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const api = {
      composeScale: async (_id: string, w: number) => {
        calls.push(w);
        return { variation_id: `scaled-${w}`, empty_selection: false };
      },
      applyVariation: async (_scene: string, v: string) => ({ scene_id: `applied-${v}` }),
    } as unknown as ApiClient;
    const shown: string[] = [];
    const slider = new IntensitySlider(api, session(), fakeViewer(shown), document.createElement("div"), 50);

    for (const v of ["0.5", "0.25", "0"]) {
      slider.input.value = v;
      slider.input.dispatchEvent(new Event("input"));
    }
    expect(slider.readout.textContent).toBe("w = 0.00");
    await vi.advanceTimersByTimeAsync(60);
    vi.useRealTimers();
    // only the trailing value was sent
    expect(calls).toEqual([0]);
    expect(slider.dispatched).toBe(1);
    expect(shown).toEqual(["applied-scaled-0"]);
  });
});

describe("MaskBrush", () => {
  const centers = {
    scene_id: "scene1",
    width: 100,
    height: 100,
    u: [10, 90],
    v: [50, 50],
    visible: [true, true],
  };

  function build(masked: number[][]) {
    const api = {
      projected: async () => centers,
      composeMask: async (_v: string, _s: string, indices: number[]) => {
        masked.push(indices);
        return { variation_id: "m1", empty_selection: false };
      },
    } as unknown as ApiClient;
    const s = session();
    return { brush: new MaskBrush(api, s, fakeViewer([]), document.createElement("div")), s };
  }

  it("sends nothing for a lasso that selects no primitives", async () => {
    const masked: number[][] = [];
    const { brush } = build(masked);
    const empty = [
      { x: 40, y: 40 },
      { x: 60, y: 40 },
      { x: 60, y: 60 },
      { x: 40, y: 60 },
    ];
    expect(await brush.commit(empty)).toBeNull();
    expect(masked).toEqual([]);
    expect(brush.warning.textContent).toContain("no primitives");
  });

  it("masks the selected variation and records lineage", async () => {
    const masked: number[][] = [];
    const { brush, s } = build(masked);
    const leftHalf = [
      { x: 0, y: 0 },
      { x: 50, y: 0 },
      { x: 50, y: 100 },
      { x: 0, y: 100 },
    ];
    expect(await brush.commit(leftHalf)).toBe("m1");
    expect(masked).toEqual([[0]]);
    expect(s.selected).toBe("m1");
    expect(s.lineage("m1").map((c) => c.variationId)).toEqual(["var1", "m1"]);
  });
});
