import type { MapDoc, MissionState, ZoneDoc } from './types';

// Pure render model: everything the grid view needs, no DOM involved.

export interface CellView {
  x: number;
  y: number;
  glyph: string; // 'S' | 'E' | 'D' | ''
  classes: string[];
  cost: number; // Infinity for impassable cells
  shade: number; // 0..9 bucket for soft-cost heatmap
}

const SOFT_SHADE_FULL = 20; // added penalty that saturates the heatmap

function blocking(penalty: number | undefined, kind: string | undefined): boolean {
  // omitted penalty means infinite; static regions are always infinite
  return penalty === undefined || penalty === null || kind === 'static';
}

/** Client-side mirror of the service cost model, for shading only. */
export function costGrid(map: MapDoc, zones: ZoneDoc[]): number[][] {
  const cost: number[][] = [];
  for (let y = 0; y < map.height; y += 1) {
    cost.push(new Array<number>(map.width).fill(1));
  }
  const applyRect = (
    x1: number, y1: number, x2: number, y2: number, add: number | null,
  ) => {
    for (let y = Math.max(0, y1); y <= Math.min(map.height - 1, y2); y += 1) {
      for (let x = Math.max(0, x1); x <= Math.min(map.width - 1, x2); x += 1) {
        cost[y][x] = add === null ? Infinity : cost[y][x] + add;
      }
    }
  };
  for (const ob of map.obstacle_list) {
    const hard = blocking(ob.penalty, ob.kind ?? 'static');
    applyRect(ob.x1, ob.y1, ob.x2, ob.y2, hard ? null : ob.penalty!);
  }
  for (const zone of zones) {
    applyRect(zone.x1, zone.y1, zone.x2, zone.y2,
      zone.mode === 'hard' ? null : zone.penalty ?? 0);
  }
  return cost;
}

export function buildGrid(state: MissionState): CellView[][] {
  const { map } = state;
  const cost = costGrid(map, state.zones);

  const pathCells = new Set(
    state.remaining_path.waypoints.map(([x, y]) => `${x},${y}`),
  );
  const visitedCells = new Set(state.visited.map(([x, y]) => `${x},${y}`));
  const zoneCells = new Set<string>();
  for (const zone of state.zones) {
    for (let y = zone.y1; y <= zone.y2; y += 1) {
      for (let x = zone.x1; x <= zone.x2; x += 1) {
        zoneCells.add(`${x},${y}`);
      }
    }
  }

  const rows: CellView[][] = [];
  for (let y = 0; y < map.height; y += 1) {
    const row: CellView[] = [];
    for (let x = 0; x < map.width; x += 1) {
      const key = `${x},${y}`;
      const classes: string[] = [];
      let glyph = '';

      const cellCost = cost[y][x];
      if (!Number.isFinite(cellCost)) {
        classes.push('blocked');
      }
      if (zoneCells.has(key)) {
        classes.push('zone');
      }
      if (visitedCells.has(key)) {
        classes.push('visited');
      }
      if (pathCells.has(key)) {
        classes.push('path');
      }
      if (x === map.start_x && y === map.start_y) {
        classes.push('start');
        glyph = 'S';
      }
      if (x === map.end_x && y === map.end_y) {
        classes.push('end');
        glyph = 'E';
      }
      if (x === state.current_cell.x && y === state.current_cell.y) {
        classes.push('drone');
        glyph = 'D';
      }

      const added = Number.isFinite(cellCost) ? cellCost - 1 : 0;
      const shade = Math.min(9, Math.round((added / SOFT_SHADE_FULL) * 9));
      if (shade > 0 && Number.isFinite(cellCost)) {
        classes.push(`shade-${shade}`);
      }
      row.push({ x, y, glyph, classes, cost: cellCost, shade });
    }
    rows.push(row);
  }
  return rows;
}

/** Cells the remaining path shares with any zone; must be empty after a re-plan. */
export function pathZoneOverlap(state: MissionState): [number, number][] {
  const overlap: [number, number][] = [];
  for (const [x, y] of state.remaining_path.waypoints) {
    for (const zone of state.zones) {
      if (x >= zone.x1 && x <= zone.x2 && y >= zone.y1 && y <= zone.y2) {
        overlap.push([x, y]);
        break;
      }
    }
  }
  return overlap;
}
