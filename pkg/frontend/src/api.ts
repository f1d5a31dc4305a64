import type { EventDoc, Interpreter, MissionState } from './types';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Service error envelope surfaced as a typed exception. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = `HTTP ${response.status}`;
  let message = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.code === 'string') {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  throw new ApiError(code, message, response.status);
}

/** Thin client over the mission service; fetch is injectable for tests. */
export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, '');
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(`${this.base}/healthz`);
      return response.ok;
    } catch {
      return false;
    }
  }

  async createMission(mapJson: string): Promise<string> {
    const response = await this.fetchImpl(`${this.base}/missions`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: mapJson,
    });
    const doc = await unwrap<{ mission_id: string }>(response);
    return doc.mission_id;
  }

  async getState(missionId: string): Promise<MissionState> {
    const response = await this.fetchImpl(`${this.base}/missions/${missionId}`);
    return unwrap<MissionState>(response);
  }

  async step(missionId: string): Promise<MissionState> {
    const response = await this.fetchImpl(
      `${this.base}/missions/${missionId}/step`,
      { method: 'POST' },
    );
    return unwrap<MissionState>(response);
  }

  async applyContext(
    missionId: string,
    utterance: string,
    interpreter: Interpreter,
  ): Promise<MissionState> {
    const response = await this.fetchImpl(
      `${this.base}/missions/${missionId}/context`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ utterance, interpreter }),
      },
    );
    return unwrap<MissionState>(response);
  }

  async events(
    missionId: string,
    since: number,
    waitSeconds = 0,
  ): Promise<EventDoc[]> {
    const params = new URLSearchParams({ since: String(since) });
    if (waitSeconds > 0) {
      params.set('wait', String(waitSeconds));
    }
    const response = await this.fetchImpl(
      `${this.base}/missions/${missionId}/events?${params.toString()}`,
    );
    const doc = await unwrap<{ events: EventDoc[] }>(response);
    return doc.events;
  }
}
