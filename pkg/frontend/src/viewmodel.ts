import { ApiClient, ApiError } from './api';
import type { EventDoc, Interpreter, MissionState } from './types';

// All mission mutations flow through the HTTP API; this class only tracks
// render state (banner, busy flag, interpreter choice, poll cursor).

export interface ConsoleSnapshot {
  mission: MissionState | null;
  banner: string | null;
  busy: boolean;
  interpreter: Interpreter;
  lastEventSeq: number;
  pollFailures: number;
  events: EventDoc[];
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_MAX_MS = 10_000;

export class ConsoleViewModel {
  private mission: MissionState | null = null;
  private banner: string | null = null;
  private busy = false;
  private interpreter: Interpreter = 'deterministic';
  private lastEventSeq = -1;
  private pollFailures = 0;
  private events: EventDoc[] = [];

  onChange: (() => void) | null = null;

  constructor(private readonly api: ApiClient) {}

  snapshot(): ConsoleSnapshot {
    return {
      mission: this.mission,
      banner: this.banner,
      busy: this.busy,
      interpreter: this.interpreter,
      lastEventSeq: this.lastEventSeq,
      pollFailures: this.pollFailures,
      events: [...this.events],
    };
  }

  setInterpreter(interpreter: Interpreter): void {
    this.interpreter = interpreter;
    this.notify();
  }

  /** Create a mission from map JSON and adopt it. */
  async loadMap(mapJson: string): Promise<void> {
    await this.mutate(async () => {
      const missionId = await this.api.createMission(mapJson);
      this.mission = await this.api.getState(missionId);
      this.lastEventSeq = -1;
      this.events = [];
    });
  }

  /** Re-attach to an existing mission (stateless resume). */
  async attach(missionId: string): Promise<void> {
    await this.mutate(async () => {
      this.mission = await this.api.getState(missionId);
      this.lastEventSeq = -1;
      this.events = [];
    });
  }

  async step(): Promise<void> {
    if (!this.mission) return;
    const id = this.mission.mission_id;
    await this.mutate(async () => {
      this.mission = await this.api.step(id);
    });
  }

  async submitUtterance(text: string): Promise<boolean> {
    if (!this.mission || !text.trim()) return false;
    const id = this.mission.mission_id;
    return this.mutate(async () => {
      this.mission = await this.api.applyContext(id, text, this.interpreter);
    });
  }

  /**
   * One poll cycle: fetch events past the cursor, refresh mission state
   * when anything new arrived. Returns the fresh events.
   */
  async pollOnce(waitSeconds = 0): Promise<EventDoc[]> {
    if (!this.mission) return [];
    const id = this.mission.mission_id;
    try {
      const fresh = await this.api.events(id, this.lastEventSeq, waitSeconds);
      this.pollFailures = 0;
      if (this.banner !== null && this.banner.startsWith('connection')) {
        this.banner = null;
      }
      if (fresh.length > 0) {
        this.lastEventSeq = fresh[fresh.length - 1].seq;
        this.events.push(...fresh);
        this.mission = await this.api.getState(id);
      }
      this.notify();
      return fresh;
    } catch (error) {
      this.pollFailures += 1;
      this.banner = `connection lost (${this.describe(error)}); retrying`;
      this.notify();
      return [];
    }
  }

  /** Exponential backoff for the poll loop after failures. */
  backoffDelayMs(): number {
    if (this.pollFailures === 0) return 0;
    const exp = BACKOFF_BASE_MS * 2 ** (this.pollFailures - 1);
    return Math.min(BACKOFF_MAX_MS, exp);
  }

  /** Serialize mutations: a second click while one is in flight is dropped. */
  private async mutate(body: () => Promise<void>): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    this.notify();
    try {
      await body();
      this.banner = null;
      return true;
    } catch (error) {
      this.banner = this.describe(error);
      return false;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  private describe(error: unknown): string {
    if (error instanceof ApiError) {
      return `${error.code}: ${error.message}`;
    }
    return error instanceof Error ? error.message : String(error);
  }

  private notify(): void {
    this.onChange?.();
  }
}
