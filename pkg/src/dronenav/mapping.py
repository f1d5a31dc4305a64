"""Grid map model: JSON parsing, validation, rasterization and ASCII rendering.

The JSON wire format used everywhere (LLM protocol, HTTP API, disk fixtures):

    {
      "width": 20, "height": 20,
      "start_x": 0, "start_y": 0, "end_x": 19, "end_y": 19,
      "obstacle_list": [
        {"label": "school", "x1": 6, "y1": 9, "x2": 8, "y2": 11,
         "kind": "static"}
      ]
    }

``kind`` and ``penalty`` are optional on input and default to static /
infinite. A finite ``penalty`` is only legal on contextual obstacles.
Coordinates are (x=column, y=row) with origin (0, 0); rectangle bounds are
inclusive on both corners.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

STATIC = "static"
CONTEXTUAL = "contextual"


class MapError(Exception):
    """Base class for map format and validation failures."""


class MalformedDocument(MapError):
    """Input is not JSON or violates the schema (missing/ill-typed fields)."""


class InvalidBounds(MapError):
    """Geometry violates map invariants (escaping rect, bad start/end)."""


@dataclass(frozen=True, order=True)
class GridCoord:
    x: int
    y: int

    def __str__(self) -> str:
        return f"({self.x}, {self.y})"


@dataclass(frozen=True)
class Obstacle:
    """Labeled inclusive rectangle; reversed bounds are swapped on construction."""

    label: str
    x1: int
    y1: int
    x2: int
    y2: int
    kind: str = STATIC
    penalty: float = math.inf

    def __post_init__(self):
        if self.x1 > self.x2:
            x1, x2 = self.x2, self.x1
            object.__setattr__(self, "x1", x1)
            object.__setattr__(self, "x2", x2)
        if self.y1 > self.y2:
            y1, y2 = self.y2, self.y1
            object.__setattr__(self, "y1", y1)
            object.__setattr__(self, "y2", y2)

    def contains(self, c: GridCoord) -> bool:
        return self.x1 <= c.x <= self.x2 and self.y1 <= c.y <= self.y2

    def cells(self):
        for y in range(self.y1, self.y2 + 1):
            for x in range(self.x1, self.x2 + 1):
                yield GridCoord(x, y)

    @property
    def area(self) -> int:
        return (self.x2 - self.x1 + 1) * (self.y2 - self.y1 + 1)

    @property
    def blocking(self) -> bool:
        return math.isinf(self.penalty)


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    start: GridCoord
    end: GridCoord
    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)

    def in_bounds(self, c: GridCoord) -> bool:
        return 0 <= c.x < self.width and 0 <= c.y < self.height

    def obstacle_by_label(self, label: str) -> Obstacle | None:
        wanted = label.strip().lower()
        for ob in self.obstacles:
            if ob.label.strip().lower() == wanted:
                return ob
        return None

    def with_obstacles(self, extra) -> "GridMap":
        return GridMap(self.width, self.height, self.start, self.end,
                       self.obstacles + tuple(extra))


@dataclass(frozen=True)
class OccupancyGrid:
    width: int
    height: int
    cells: np.ndarray  # bool, indexed [y, x], True = blocked

    @property
    def blocked_count(self) -> int:
        return int(self.cells.sum())


def _require(doc: dict, key: str, types) -> object:
    if key not in doc:
        raise MalformedDocument(f"missing required field {key!r}")
    value = doc[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise MalformedDocument(f"field {key!r} has wrong type")
    return value


def _obstacle_from_doc(entry: dict, index: int) -> Obstacle:
    if not isinstance(entry, dict):
        raise MalformedDocument(f"obstacle_list[{index}] is not an object")
    label = entry.get("label", f"obstacle {index}")
    if not isinstance(label, str):
        raise MalformedDocument(f"obstacle_list[{index}].label is not a string")
    coords = [_require(entry, k, int) for k in ("x1", "y1", "x2", "y2")]
    kind = entry.get("kind", STATIC)
    if kind not in (STATIC, CONTEXTUAL):
        raise MalformedDocument(f"obstacle_list[{index}].kind {kind!r} unknown")
    penalty = entry.get("penalty")
    if penalty is None:
        penalty = math.inf
    elif isinstance(penalty, (int, float)) and not isinstance(penalty, bool):
        penalty = float(penalty)
    else:
        raise MalformedDocument(f"obstacle_list[{index}].penalty is not a number")
    if penalty < 0:
        raise MalformedDocument(f"obstacle_list[{index}].penalty is negative")
    if kind == STATIC and not math.isinf(penalty):
        raise MalformedDocument(
            f"obstacle_list[{index}]: static obstacles carry infinite penalty")
    return Obstacle(label, coords[0], coords[1], coords[2], coords[3],
                    kind=kind, penalty=penalty)


def parse_map(text: str) -> GridMap:
    """Parse and validate a map document in the canonical JSON schema.

    Unknown fields are ignored; reversed rectangle bounds are normalized.
    Raises MalformedDocument for syntax/schema problems and InvalidBounds
    for geometry violations.
    """
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level JSON value is not an object")

    width = _require(doc, "width", int)
    height = _require(doc, "height", int)
    if width < 2 or height < 2:
        raise InvalidBounds(f"grid {width}x{height} is too small (min 2x2)")
    start = GridCoord(_require(doc, "start_x", int), _require(doc, "start_y", int))
    end = GridCoord(_require(doc, "end_x", int), _require(doc, "end_y", int))

    raw_obstacles = doc.get("obstacle_list", [])
    if not isinstance(raw_obstacles, list):
        raise MalformedDocument("obstacle_list is not a list")
    obstacles = tuple(_obstacle_from_doc(entry, i)
                      for i, entry in enumerate(raw_obstacles))

    grid = GridMap(width, height, start, end, obstacles)
    _validate(grid)
    return grid


def _validate(grid: GridMap) -> None:
    for name, c in (("start", grid.start), ("end", grid.end)):
        if not grid.in_bounds(c):
            raise InvalidBounds(f"{name} {c} outside {grid.width}x{grid.height} grid")
    if grid.start == grid.end:
        raise InvalidBounds("start and end coincide")
    for ob in grid.obstacles:
        if ob.x1 < 0 or ob.y1 < 0 or ob.x2 >= grid.width or ob.y2 >= grid.height:
            raise InvalidBounds(
                f"obstacle {ob.label!r} ({ob.x1}, {ob.y1}, {ob.x2}, {ob.y2}) "
                f"escapes the {grid.width}x{grid.height} grid")
        # Only static obstacles invalidate endpoints: contextual regions may
        # legally cover them (the planner and judges handle that case).
        if ob.kind == STATIC:
            for name, c in (("start", grid.start), ("end", grid.end)):
                if ob.contains(c):
                    raise InvalidBounds(f"{name} {c} lies inside static obstacle {ob.label!r}")


def map_to_dict(grid: GridMap) -> dict:
    obstacles = []
    for ob in grid.obstacles:
        entry = {"label": ob.label, "x1": ob.x1, "y1": ob.y1,
                 "x2": ob.x2, "y2": ob.y2, "kind": ob.kind}
        if not math.isinf(ob.penalty):
            entry["penalty"] = ob.penalty
        obstacles.append(entry)
    return {
        "width": grid.width, "height": grid.height,
        "start_x": grid.start.x, "start_y": grid.start.y,
        "end_x": grid.end.x, "end_y": grid.end.y,
        "obstacle_list": obstacles,
    }


def serialize_map(grid: GridMap, indent: int | None = 2) -> str:
    """Canonical JSON form; parse(serialize(m)) == m for valid maps."""
    return json.dumps(map_to_dict(grid), indent=indent)


def rasterize(grid: GridMap) -> OccupancyGrid:
    """Mark every cell covered by an infinite-penalty obstacle as blocked."""
    cells = np.zeros((grid.height, grid.width), dtype=bool)
    for ob in grid.obstacles:
        if ob.blocking:
            cells[ob.y1:ob.y2 + 1, ob.x1:ob.x2 + 1] = True
    return OccupancyGrid(grid.width, grid.height, cells)


def render_ascii(grid: GridMap, path=None) -> str:
    """Render the map as text, one line per row, row y=0 first (top).

    Glyphs: S start, E end, # blocked, * path, . free. Path glyphs never
    overwrite S or E.
    """
    occupancy = rasterize(grid)
    rows = []
    on_path = set()
    if path is not None:
        on_path = {(c.x, c.y) for c in path.waypoints}
    for y in range(grid.height):
        line = []
        for x in range(grid.width):
            if (x, y) == (grid.start.x, grid.start.y):
                line.append("S")
            elif (x, y) == (grid.end.x, grid.end.y):
                line.append("E")
            elif (x, y) in on_path:
                line.append("*")
            elif occupancy.cells[y, x]:
                line.append("#")
            else:
                line.append(".")
        rows.append("".join(line))
    return "\n".join(rows)
