/** Typed client for the editing service HTTP API. */

export interface DirectionInfo {
  name: string;
  space: 'W' | 'Wplus' | 'S';
  dim: number;
  metadata: {
    recommended_step_range?: [number, number];
    [key: string]: unknown;
  };
}

export interface TransformParams {
  r: number;
  tx: number;
  ty: number;
}

export interface PreviewRequest {
  frame_index: number;
  direction_name?: string;
  step?: number;
  params?: TransformParams;
  resolution?: number;
}

export interface SessionStatus {
  id: string;
  kind: 'image' | 'video';
  frames: number;
  stages: Record<string, boolean>;
  edit_spec: EditSpecEntry[];
  jobs: JobSummary[];
  locked: boolean;
}

export interface JobSummary {
  id: string;
  session: string;
  stage: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  error?: string;
}

export interface EditSpecEntry {
  name: string;
  step: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(resp.status, detail);
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) throw await parseError(resp);
    return resp;
  }

  async directions(): Promise<DirectionInfo[]> {
    const resp = await this.request('/directions');
    const body = await resp.json();
    return body.directions as DirectionInfo[];
  }

  async status(sessionId: string): Promise<SessionStatus> {
    const resp = await this.request(`/sessions/${sessionId}/status`);
    return (await resp.json()) as SessionStatus;
  }

  /** Synchronous preview render; resolves to a PNG blob. */
  async preview(sessionId: string, req: PreviewRequest): Promise<Blob> {
    const resp = await this.request(`/sessions/${sessionId}/edit/preview`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(req),
    });
    return await resp.blob();
  }

  async commitEdit(sessionId: string, entries: EditSpecEntry[]): Promise<EditSpecEntry[]> {
    const resp = await this.request(`/sessions/${sessionId}/edit/commit`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ directions: entries }),
    });
    const body = await resp.json();
    return body.edit_spec as EditSpecEntry[];
  }

  async startStage(
    sessionId: string,
    stage: 'invert' | 'smooth' | 'pti' | 'render' | 'expand',
    body: Record<string, unknown> = {},
  ): Promise<JobSummary> {
    const resp = await this.request(`/sessions/${sessionId}/${stage}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    return (await resp.json()).job as JobSummary;
  }

  async job(jobId: string): Promise<JobSummary> {
    const resp = await this.request(`/jobs/${jobId}`);
    return (await resp.json()) as JobSummary;
  }
}
