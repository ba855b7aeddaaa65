/** Typed client for the splatedit HTTP API. All editing happens server-side;
 * this module only moves ids and bytes around. */

export interface SceneMeta {
  scene_id: string;
  n: number;
  content_digest: string;
  bounds: { lo: number[]; hi: number[] } | null;
}

export interface ProjectedCenters {
  scene_id: string;
  width: number;
  height: number;
  u: number[];
  v: number[];
  visible: boolean[];
}

export interface EditResult {
  variation_id: string;
  max_abs: number;
}

export interface ComposeResult {
  variation_id: string;
  empty_selection: boolean;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  loss_tail: number[];
  error: string | null;
  result: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function readJson(resp: Response): Promise<any> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json();
}

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string, cam?: string, extra?: Record<string, string>): string {
    const u = new URL(this.base + path);
    if (cam) u.searchParams.set("cam", cam);
    for (const [k, v] of Object.entries(extra ?? {})) u.searchParams.set(k, v);
    return u.toString();
  }

  async uploadScene(ply: Uint8Array | ArrayBuffer): Promise<{ scene_id: string; n: number }> {
    const resp = await this.fetchFn(this.url("/scenes"), {
      method: "POST",
      body: ply instanceof Uint8Array ? new Uint8Array(ply) : ply,
    });
    return readJson(resp);
  }

  async sceneMeta(sceneId: string): Promise<SceneMeta> {
    return readJson(await this.fetchFn(this.url(`/scenes/${sceneId}/meta`)));
  }

  renderUrl(sceneId: string, cam: string): string {
    return this.url(`/scenes/${sceneId}/render`, cam);
  }

  async renderPng(sceneId: string, cam: string, signal?: AbortSignal): Promise<Uint8Array> {
    const resp = await this.fetchFn(this.renderUrl(sceneId, cam), { signal });
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async projected(sceneId: string, cam: string): Promise<ProjectedCenters> {
    return readJson(await this.fetchFn(this.url(`/scenes/${sceneId}/projected`, cam)));
  }

  async edit(
    sceneId: string,
    instruction: string,
    seed: number,
    weightsId: string,
    mode: "iterative" | "direct" = "iterative",
  ): Promise<EditResult> {
    const resp = await this.fetchFn(this.url("/edits"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        scene_id: sceneId,
        instruction,
        seed,
        weights_id: weightsId,
        mode,
      }),
    });
    return readJson(resp);
  }

  private async compose(op: string, operands: string[], params: object): Promise<ComposeResult> {
    const resp = await this.fetchFn(this.url("/variations/compose"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ op, operands, params }),
    });
    return readJson(resp);
  }

  composeScale(variationId: string, w: number): Promise<ComposeResult> {
    return this.compose("scale", [variationId], { w });
  }

  composeMix(aId: string, bId: string, weight: number | number[]): Promise<ComposeResult> {
    return this.compose("mix", [aId, bId], { weight });
  }

  composeMask(variationId: string, sceneId: string, indices: number[]): Promise<ComposeResult> {
    return this.compose("mask", [variationId], {
      scene_id: sceneId,
      selector: { kind: "indices", indices },
    });
  }

  async applyVariation(sceneId: string, variationId: string): Promise<{ scene_id: string }> {
    const resp = await this.fetchFn(this.url(`/scenes/${sceneId}/apply`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ variation_id: variationId }),
    });
    return readJson(resp);
  }

  vizUrl(variationId: string, sceneId: string, layer: string, cam?: string): string {
    return this.url(`/variations/${variationId}/viz`, cam, {
      scene_id: sceneId,
      layer,
    });
  }

  async listWeights(): Promise<string[]> {
    const body = await readJson(await this.fetchFn(this.url("/weights")));
    return body.weights;
  }

  async uploadWeights(ckpt: Uint8Array): Promise<{ weights_id: string }> {
    const resp = await this.fetchFn(this.url("/weights"), {
      method: "POST",
      body: new Uint8Array(ckpt),
    });
    return readJson(resp);
  }

  async submitJob(kind: string, config: object): Promise<{ job_id: string }> {
    const resp = await this.fetchFn(this.url("/jobs"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, config }),
    });
    return readJson(resp);
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    return readJson(await this.fetchFn(this.url(`/jobs/${jobId}`)));
  }

  /** Poll a job until it leaves the queue, with a hard deadline. */
  async waitForJob(jobId: string, timeoutMs = 120_000, pollMs = 500): Promise<JobStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.jobStatus(jobId);
      if (status.status === "done" || status.status === "failed") return status;
      if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
      await new Promise((res) => setTimeout(res, pollMs));
    }
  }
}
