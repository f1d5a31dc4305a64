"""Cost fields ("potential fields") and minimum-cost grid path planning.

Movement model: 4-connected with unit base cost. A free cell costs 1 to
enter; static obstacles and hard context zones cost infinity; soft zones
add their penalty on top of the base cost (sum capped at SOFT_PENALTY_CAP).
The cost of the start cell is never charged, so on a uniform field the path
cost equals the move count.

The A* planner is fully deterministic: neighbors expand in the order
+x, -x, +y, -y; ties on f prefer larger g, then FIFO insertion order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .mapping import CONTEXTUAL, GridCoord, GridMap, Obstacle

SOFT_PENALTY_CAP = 1e6

HARD = "hard"
SOFT = "soft"

# Neighbor expansion order is part of the planner contract.
NEIGHBOR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class NoPath(Exception):
    """No finite-cost route exists between the requested endpoints."""


@dataclass(frozen=True)
class ContextZone:
    """Map region injected at runtime from a situational description."""

    source_label: str
    region: Obstacle
    mode: str = HARD
    penalty: float = 0.0

    def __post_init__(self):
        if self.mode not in (HARD, SOFT):
            raise ValueError(f"unknown zone mode {self.mode!r}")
        if self.mode == SOFT and self.penalty <= 0:
            raise ValueError("soft zones need a positive penalty")

    def as_obstacle(self) -> Obstacle:
        penalty = math.inf if self.mode == HARD else self.penalty
        return Obstacle(self.region.label, self.region.x1, self.region.y1,
                        self.region.x2, self.region.y2,
                        kind=CONTEXTUAL, penalty=penalty)


@dataclass(frozen=True)
class CostField:
    width: int
    height: int
    cost: np.ndarray  # float64, indexed [y, x], values in [1, inf]

    def at(self, c: GridCoord) -> float:
        return float(self.cost[c.y, c.x])

    def finite(self, c: GridCoord) -> bool:
        return math.isfinite(self.cost[c.y, c.x])


@dataclass(frozen=True)
class FlightPath:
    waypoints: tuple[GridCoord, ...]
    total_cost: float

    @property
    def start(self) -> GridCoord:
        return self.waypoints[0]

    @property
    def end(self) -> GridCoord:
        return self.waypoints[-1]

    def __len__(self) -> int:
        return len(self.waypoints)


def build_cost_field(grid: GridMap, zones=(), soft_cap: float = SOFT_PENALTY_CAP) -> CostField:
    """Combine static obstacles, map-borne penalties and context zones."""
    added = np.zeros((grid.height, grid.width), dtype=np.float64)
    blocked = np.zeros((grid.height, grid.width), dtype=bool)

    def apply(x1, y1, x2, y2, penalty):
        if math.isinf(penalty):
            blocked[y1:y2 + 1, x1:x2 + 1] = True
        else:
            added[y1:y2 + 1, x1:x2 + 1] += penalty

    for ob in grid.obstacles:
        apply(ob.x1, ob.y1, ob.x2, ob.y2, ob.penalty)
    for zone in zones:
        r = zone.region
        apply(r.x1, r.y1, r.x2, r.y2,
              math.inf if zone.mode == HARD else zone.penalty)

    cost = 1.0 + np.minimum(added, soft_cap)
    cost[blocked] = math.inf
    return CostField(grid.width, grid.height, cost)


def dilate_region(ob: Obstacle, margin: int, grid: GridMap) -> Obstacle:
    """Expand the rectangle by ``margin`` cells on every side, clipped to the grid."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return Obstacle(
        ob.label,
        max(0, ob.x1 - margin), max(0, ob.y1 - margin),
        min(grid.width - 1, ob.x2 + margin), min(grid.height - 1, ob.y2 + margin),
        kind=CONTEXTUAL, penalty=math.inf)


def zone_from_anchor(anchor: GridCoord, approx_cells: int, grid: GridMap,
                     label: str = "reported area") -> ContextZone:
    """Canonical reading of "an area of about N grids at (x, y)".

    Picks the smallest odd-sided square centered at the anchor whose area
    covers approx_cells, clipped to the grid: anything up to 1 cell -> 1x1,
    2..9 -> 3x3, 10..25 -> 5x5, and so on.
    """
    side = 1
    while side * side < approx_cells:
        side += 2
    half = side // 2
    region = Obstacle(
        label,
        max(0, anchor.x - half), max(0, anchor.y - half),
        min(grid.width - 1, anchor.x + half), min(grid.height - 1, anchor.y + half),
        kind=CONTEXTUAL, penalty=math.inf)
    return ContextZone(source_label=label, region=region, mode=HARD)


def _check_endpoints(field: CostField, start: GridCoord, end: GridCoord) -> None:
    for name, c in (("start", start), ("end", end)):
        if not (0 <= c.x < field.width and 0 <= c.y < field.height):
            raise NoPath(f"{name} {c} outside the field")
        if not field.finite(c):
            raise NoPath(f"{name} {c} sits on an impassable cell")


def plan_astar(field: CostField, start: GridCoord, end: GridCoord) -> FlightPath:
    """Deterministic A* over the cost field (Manhattan-distance heuristic).

    Returns a minimum-total-cost 4-connected path; the start cell's own
    cost is not charged. Raises NoPath when the end is unreachable.
    """
    _check_endpoints(field, start, end)
    cost = field.cost
    width, height = field.width, field.height

    sx, sy = start.x, start.y
    ex, ey = end.x, end.y
    g = {(sx, sy): 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    h0 = abs(sx - ex) + abs(sy - ey)
    frontier: list[tuple[float, float, int, int, int]] = [(h0, 0.0, counter, sx, sy)]

    while frontier:
        f, neg_g, _, x, y = heapq.heappop(frontier)
        gx = -neg_g
        if gx > g.get((x, y), math.inf):
            continue  # stale entry
        if (x, y) == (ex, ey):
            waypoints = [GridCoord(x, y)]
            while (x, y) != (sx, sy):
                x, y = came[(x, y)]
                waypoints.append(GridCoord(x, y))
            waypoints.reverse()
            return FlightPath(tuple(waypoints), gx)
        for dx, dy in NEIGHBOR_STEPS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            step = cost[ny, nx]
            if math.isinf(step):
                continue
            ng = gx + step
            if ng < g.get((nx, ny), math.inf):
                g[(nx, ny)] = ng
                came[(nx, ny)] = (x, y)
                counter += 1
                h = abs(nx - ex) + abs(ny - ey)
                heapq.heappush(frontier, (ng + h, -ng, counter, nx, ny))

    raise NoPath(f"end {end} unreachable from {start}")


def oracle_cheapest_cost(field: CostField, start: GridCoord, end: GridCoord) -> float:
    """Independent check value: exhaustive uniform-cost search, no heuristic."""
    _check_endpoints(field, start, end)
    cost = field.cost
    width, height = field.width, field.height
    target = (end.x, end.y)

    best = {(start.x, start.y): 0.0}
    queue: list[tuple[float, int, int]] = [(0.0, start.x, start.y)]
    while queue:
        d, x, y = heapq.heappop(queue)
        if d > best.get((x, y), math.inf):
            continue
        if (x, y) == target:
            return d
        for nx, ny in ((x, y - 1), (x - 1, y), (x, y + 1), (x + 1, y)):
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            step = cost[ny, nx]
            if math.isinf(step):
                continue
            nd = d + step
            if nd < best.get((nx, ny), math.inf):
                best[(nx, ny)] = nd
                heapq.heappush(queue, (nd, nx, ny))

    raise NoPath(f"end {end} unreachable from {start}")
