import { describe, expect, it } from 'vitest';

import { buildGrid, costGrid, pathZoneOverlap } from '../src/gridmodel';
import type { MissionState } from '../src/types';
import rawContract from './fixtures/contract.json';

interface Entry { method: string; path: string; body: unknown }

function recordedState(method: string, path: string): MissionState {
  const entries = (rawContract as { entries: Entry[] }).entries;
  const entry = entries.find((e) => e.method === method && e.path === path);
  if (!entry) throw new Error(`no recorded entry for ${method} ${path}`);
  return entry.body as MissionState;
}

describe('grid render model', () => {
  const state = recordedState('POST', '/missions/{id}/context'); // zone applied

  it('marks start, end and drone cells', () => {
    const rows = buildGrid(state);
    const flat = rows.flat();
    expect(flat.find((c) => c.glyph === 'S')).toBeTruthy();
    expect(flat.find((c) => c.glyph === 'E')).toBeTruthy();
    const drone = flat.find((c) => c.glyph === 'D')!;
    expect({ x: drone.x, y: drone.y }).toEqual(state.current_cell);
  });

  it('overlays the full zone rectangle', () => {
    const rows = buildGrid(state);
    const zoneCells = rows.flat().filter((c) => c.classes.includes('zone'));
    expect(zoneCells).toHaveLength(7 * 7); // margin-2 dilation of a 3x3 block
  });

  it('flags static obstacles as blocked', () => {
    const rows = buildGrid(state);
    const blocked = rows.flat().filter((c) => c.classes.includes('blocked'));
    // 24 static cells plus the hard zone (school cells overlap the zone)
    expect(blocked.length).toBe(24 + 49 - 9);
  });

  it('paints every remaining waypoint', () => {
    const rows = buildGrid(state);
    const painted = rows.flat().filter((c) => c.classes.includes('path'));
    expect(painted).toHaveLength(state.remaining_path.waypoints.length);
  });

  it('re-planned path avoids the zone', () => {
    expect(pathZoneOverlap(state)).toEqual([]);
  });
});

describe('cost model mirror', () => {
  it('static obstacles are impassable', () => {
    const state = recordedState('GET', '/missions/{id}');
    const cost = costGrid(state.map, []);
    expect(cost[9][6]).toBe(Infinity); // inside the school block
    expect(cost[0][1]).toBe(1);
  });

  it('soft zones add their penalty', () => {
    const state = recordedState('GET', '/missions/{id}');
    const cost = costGrid(state.map, [{
      source_label: 'fog', mode: 'soft', label: 'fog',
      x1: 1, y1: 1, x2: 2, y2: 2, kind: 'contextual', penalty: 4,
    }]);
    expect(cost[1][1]).toBe(5);
    expect(cost[3][3]).toBe(1);
  });

  it('hard zones are impassable and shaded cells are bucketed', () => {
    const state = recordedState('GET', '/missions/{id}');
    const zoned: MissionState = {
      ...state,
      zones: [{
        source_label: 'mud', mode: 'soft', label: 'mud',
        x1: 2, y1: 0, x2: 2, y2: 2, kind: 'contextual', penalty: 10,
      }],
    };
    const rows = buildGrid(zoned);
    const shaded = rows.flat().filter((c) =>
      c.classes.some((cls) => cls.startsWith('shade-')));
    expect(shaded.length).toBe(3);
    expect(shaded[0].shade).toBeGreaterThan(0);
  });
});
