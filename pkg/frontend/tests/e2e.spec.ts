// @vitest-environment node
/**
 * End-to-end flow against a live service: upload a toy scene, train a tiny
 * checkpoint through the job queue, then drive the same API calls the studio
 * panels make and assert on the rendered pixels.
 *
 * Run with RUN_E2E=1; skipped otherwise so unit tests stay hermetic.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import * as readline from "node:readline";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { encodeOrbit } from "../src/camera.js";
import { fullCanvasLasso, lassoSelect } from "../src/mask.js";
import { constantRamp } from "../src/ramp.js";
import { decodePng } from "./png.js";

const run = process.env.RUN_E2E === "1" ? describe : describe.skip;

const ORBIT = { azimuth: 30, elevation: 20, radius: 4, width: 48, height: 48 };
const CAM = encodeOrbit(ORBIT);

run("studio end-to-end", () => {
  let proc: ChildProcess;
  let tmp: string;
  let api: ApiClient;
  let sceneId: string;
  let weightsId: string;

  async function pixels(id: string): Promise<Uint8Array> {
    return decodePng(await api.renderPng(id, CAM)).pixels;
  }

  /** Render the scene produced by applying a variation to the toy scene. */
  async function appliedPixels(variationId: string): Promise<Uint8Array> {
    const applied = await api.applyVariation(sceneId, variationId);
    return pixels(applied.scene_id);
  }

  beforeAll(async () => {
    tmp = fs.mkdtempSync(path.join(os.tmpdir(), "studio-e2e-"));
    const ply = path.join(tmp, "toy.ply");
    const gen = spawnSync(
      "python3",
      [
        "-c",
        "import sys; from splatedit.synth import blob_scene; " +
          "from splatedit.ply import save_ply; " +
          "save_ply(blob_scene(60, seed=3), sys.argv[1])",
        ply,
      ],
      { encoding: "utf-8" },
    );
    if (gen.status !== 0) throw new Error(`scene generation failed: ${gen.stderr}`);

    proc = spawn("python3", [
      "-m",
      "splatedit.cli",
      "serve",
      "--bind",
      "127.0.0.1:0",
      "--store",
      path.join(tmp, "store"),
    ]);
    const bound = await new Promise<string>((resolve, reject) => {
      const rl = readline.createInterface({ input: proc.stdout! });
      rl.on("line", (line) => {
        try {
          const msg = JSON.parse(line);
          if (msg.bound) resolve(msg.bound);
        } catch {
          // startup noise; keep waiting for the bound line
        }
      });
      proc.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
      setTimeout(() => reject(new Error("service did not bind in time")), 30_000);
    });
    api = new ApiClient(`http://${bound}`);

    // the port is announced before the server starts accepting connections
    const ready = Date.now() + 30_000;
    for (;;) {
      try {
        await api.listWeights();
        break;
      } catch (err) {
        if (Date.now() > ready) throw err;
        await new Promise((res) => setTimeout(res, 250));
      }
    }

    const upload = await api.uploadScene(fs.readFileSync(ply));
    sceneId = upload.scene_id;
    expect(upload.n).toBe(60);

    const collect = await api.submitJob("collect", {
      scene_ids: [sceneId],
      instructions: ["make it gold", "lift the top"],
      per_pair: 1,
      seed: 0,
      orbit: { width: 32, height: 32 },
    });
    const collected = await api.waitForJob(collect.job_id);
    expect(collected.status).toBe("done");

    const train = await api.submitJob("train_din", {
      dataset_id: collected.result.dataset_id,
      predictor: { n: 8, k: 4, d_model: 32, d_text: 16, d_eps: 8, m_blocks: 2, d_f: 32 },
      train: { batch_size: 2, epochs: 40, lr: 2e-3, lr_half_period: 15, seed: 0 },
      weights_seed: 0,
    });
    const trained = await api.waitForJob(train.job_id, 240_000);
    expect(trained.status).toBe("done");
    weightsId = trained.result.weights_id as string;
    expect(await api.listWeights()).toContain(weightsId);
  }, 300_000);

  afterAll(() => {
    proc?.kill();
    if (tmp) fs.rmSync(tmp, { recursive: true, force: true });
  });

  it("repeated edits are content addressed to the same variation", async () => {
    const a = await api.edit(sceneId, "make it gold", 0, weightsId);
    const b = await api.edit(sceneId, "make it gold", 0, weightsId);
    expect(b.variation_id).toBe(a.variation_id);
    const c = await api.edit(sceneId, "make it gold", 1, weightsId);
    expect(c.variation_id).not.toBe(a.variation_id);
  });

  it("intensity slider at w=0 reproduces the source frame exactly", async () => {
    const edit = await api.edit(sceneId, "make it gold", 0, weightsId);
    const zero = await api.composeScale(edit.variation_id, 0);
    expect(await appliedPixels(zero.variation_id)).toEqual(await pixels(sceneId));
    // and w=1 is the unscaled edit
    const one = await api.composeScale(edit.variation_id, 1);
    expect(await appliedPixels(one.variation_id)).toEqual(
      await appliedPixels(edit.variation_id),
    );
  });

  it("mix ramp endpoints match the component edits", async () => {
    const a = await api.edit(sceneId, "make it gold", 0, weightsId);
    const b = await api.edit(sceneId, "lift the top", 0, weightsId);
    const frameA = await appliedPixels(a.variation_id);
    const frameB = await appliedPixels(b.variation_id);
    expect(frameA).not.toEqual(frameB);

    const allA = await api.composeMix(a.variation_id, b.variation_id, 1);
    const allB = await api.composeMix(a.variation_id, b.variation_id, 0);
    expect(await appliedPixels(allA.variation_id)).toEqual(frameA);
    expect(await appliedPixels(allB.variation_id)).toEqual(frameB);

    // a constant per-primitive weight field behaves like the scalar endpoint
    const meta = await api.sceneMeta(sceneId);
    const field = await api.composeMix(a.variation_id, b.variation_id, constantRamp(meta.n, 1));
    expect(await appliedPixels(field.variation_id)).toEqual(frameA);
  });

  it("mask lasso restricts deltas to the selected primitives", async () => {
    const centers = await api.projected(sceneId, CAM);
    const leftHalf = [
      { x: 0, y: 0 },
      { x: ORBIT.width / 2, y: 0 },
      { x: ORBIT.width / 2, y: ORBIT.height },
      { x: 0, y: ORBIT.height },
    ];
    const selected = lassoSelect(centers, leftHalf);
    expect(selected.length).toBeGreaterThan(0);
    expect(selected.length).toBeLessThan(centers.u.length);

    // amplify the freshly trained edit so position deltas are visible on screen
    const edit = await api.edit(sceneId, "lift the top", 0, weightsId);
    const big = await api.composeScale(edit.variation_id, 5);
    const masked = await api.composeMask(big.variation_id, sceneId, selected);
    expect(masked.empty_selection).toBe(false);

    const applied = await api.applyVariation(sceneId, masked.variation_id);
    const after = await api.projected(applied.scene_id, CAM);
    const inside = new Set(selected);
    let moved = 0;
    for (let i = 0; i < centers.u.length; i++) {
      const same = centers.u[i] === after.u[i] && centers.v[i] === after.v[i];
      if (inside.has(i)) {
        if (!same) moved += 1;
      } else {
        expect(same).toBe(true);
      }
    }
    expect(moved).toBeGreaterThan(0);

    // the masked edit is weaker than the unmasked one on screen
    expect(await appliedPixels(masked.variation_id)).not.toEqual(
      await appliedPixels(big.variation_id),
    );
  });

  it("full-canvas lasso behaves like no mask for visible primitives", async () => {
    const centers = await api.projected(sceneId, CAM);
    const all = lassoSelect(centers, fullCanvasLasso(ORBIT.width, ORBIT.height));
    const visible = centers.visible.filter(Boolean).length;
    expect(all.length).toBeLessThanOrEqual(visible);
    expect(all.length).toBeGreaterThan(0);
  });

  it("rejects an empty instruction with a client error", async () => {
    // arbitrary wording is fine (unknown words hash into reserved buckets);
    // an instruction with no words is the unprocessable case
    await expect(api.edit(sceneId, "  ", 0, weightsId)).rejects.toMatchObject({ status: 422 });
  });
});
