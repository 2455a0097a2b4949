// Typed client for the photonbench HTTP API.  The console never computes
// scientific numbers itself: everything displayed is echoed from these
// response payloads.

export interface SessionDescriptor {
  schema: string;
  id: string;
  profile: string;
  sample_seed: number;
  activity: string;
  progress: number;
  created_at: string;
  n_emitters: number;
  field_size_um: [number, number];
}

export interface FitReport {
  g2_zero: number;
  g2_zero_sigma: number;
  g2_zero_raw_bin: number;
  tau_anti_ns: number;
  amplitude: number;
  baseline: number;
  tau0_ns: number;
  converged: boolean;
  verdict: string;
}

export interface ScanResult {
  complete: boolean;
  counts: number[][];
  resolution: [number, number];
  extent_um: [number, number];
  pixel_pitch_um: [number, number];
  profile: string;
  sim_duration_s: number;
}

export interface HbtResult {
  complete: boolean;
  n_a: number;
  n_b: number;
  duration_ps: number;
  counts: number[];
  g2: number[] | null;
  bin_width_ps: number;
  bin_count: number;
  fit: FitReport | null;
}

export interface JobSummary {
  id: string;
  kind: "scanning" | "hbt";
  session: string;
  status: "running" | "done" | "cancelled" | "error";
  progress: number;
  error: string | null;
  result: (ScanResult & HbtResult) | null;
  partial: Record<string, unknown>;
}

export type ServerEvent =
  | { event: "row"; row: number; counts: number[]; rows_done: number; total_rows: number }
  | { event: "histogram"; done_s: number; duration_s: number; counts: number[]; n_a: number; n_b: number }
  | { event: "done" | "cancelled" | "error"; job: JobSummary }
  | { event: "keepalive" };

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field: string | null = null,
  ) {
    super(message);
  }
}

export interface ScanRequest {
  extent_um?: [number, number];
  resolution?: [number, number];
  integration_time_ms?: number;
  laser_power_mw?: number | null;
  rng_seed?: number;
}

export interface HbtRequest {
  x_um: number;
  y_um: number;
  duration_s: number;
  bin_width_ps?: number;
  bin_count?: number;
  seed?: number;
}

export class Client {
  constructor(public base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!resp.ok) {
      let code = `http_${resp.status}`;
      let message = resp.statusText;
      let field: string | null = null;
      try {
        const doc = await resp.json();
        code = doc.code ?? code;
        message = doc.message ?? message;
        field = doc.field ?? null;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, code, message, field);
    }
    return (await resp.json()) as T;
  }

  createSession(body: {
    profile: string;
    seed: number;
    demo_fast?: boolean;
    sample?: Record<string, unknown>;
  }): Promise<SessionDescriptor> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getSession(id: string): Promise<SessionDescriptor> {
    return this.request(`/sessions/${id}`);
  }

  startScan(sessionId: string, config: ScanRequest): Promise<{ job_id: string }> {
    return this.request(`/sessions/${sessionId}/scan`, {
      method: "POST",
      body: JSON.stringify(config),
    });
  }

  startHbt(sessionId: string, req: HbtRequest): Promise<{ job_id: string }> {
    return this.request(`/sessions/${sessionId}/hbt`, {
      method: "POST",
      body: JSON.stringify(req),
    });
  }

  getJob(id: string): Promise<JobSummary> {
    return this.request(`/jobs/${id}`);
  }

  cancelJob(id: string): Promise<{ id: string; status: string }> {
    return this.request(`/jobs/${id}/cancel`, { method: "POST" });
  }

  exportUrl(sessionId: string, artifact: string): string {
    return `${this.base}/sessions/${sessionId}/export/${artifact}`;
  }

  /** Consume the job's JSON-lines event stream; yields parsed events. */
  async *events(jobId: string): AsyncGenerator<ServerEvent> {
    const resp = await fetch(`${this.base}/jobs/${jobId}/events`);
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, "stream_unavailable", "event stream unavailable");
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let idx;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx).trim();
        buffer = buffer.slice(idx + 1);
        if (line) yield JSON.parse(line) as ServerEvent;
      }
    }
  }

  /**
   * Follow a job to completion: stream events into the handler, reconnect
   * if the stream drops mid-run (snapshots are idempotent, so replays are
   * harmless), and always re-fetch the final job for the authoritative
   * result instead of trusting the last streamed snapshot.
   */
  async watchJob(jobId: string, onEvent: (e: ServerEvent) => void): Promise<JobSummary> {
    for (;;) {
      try {
        for await (const event of this.events(jobId)) {
          onEvent(event);
          if (event.event === "done" || event.event === "cancelled" || event.event === "error") {
            return await this.getJob(jobId);
          }
        }
      } catch {
        /* stream dropped; fall through to the status check */
      }
      const job = await this.getJob(jobId);
      if (job.status !== "running") return job;
      await new Promise((r) => setTimeout(r, 200));
    }
  }
}

/** Split raw ndjson text into parsed events (exposed for tests). */
export function parseEventLines(text: string): ServerEvent[] {
  return text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0)
    .map((l) => JSON.parse(l) as ServerEvent);
}
