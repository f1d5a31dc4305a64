// Wire types mirroring the mission service envelopes.

export interface ObstacleDoc {
  label: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  kind?: 'static' | 'contextual';
  penalty?: number;
}

export interface MapDoc {
  width: number;
  height: number;
  start_x: number;
  start_y: number;
  end_x: number;
  end_y: number;
  obstacle_list: ObstacleDoc[];
}

export interface ZoneDoc {
  source_label: string;
  mode: 'hard' | 'soft';
  label: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  kind: string;
  penalty?: number;
}

export interface Coord {
  x: number;
  y: number;
}

export interface MissionState {
  mission_id: string;
  phase: 'planned' | 'airborne' | 'landed' | 'aborted';
  map: MapDoc;
  zones: ZoneDoc[];
  current_cell: Coord;
  remaining_path: { waypoints: [number, number][]; total_cost: number };
  visited: [number, number][];
  command_log: string[];
  event_count: number;
}

export interface EventDoc {
  seq: number;
  timestamp: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
}

export type Interpreter = 'deterministic' | 'llm';
