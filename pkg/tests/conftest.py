import json
import random
from importlib import resources

import pytest

from dronenav.evaluation import Scenario, load_reference_scenario
from dronenav.fields import FlightPath
from dronenav.mapping import GridCoord, GridMap, Obstacle, parse_map


@pytest.fixture(scope="session")
def reference_map_text() -> str:
    return (resources.files("dronenav") / "data" / "reference_map.json").read_text()


@pytest.fixture(scope="session")
def reference_map(reference_map_text) -> GridMap:
    return parse_map(reference_map_text)


@pytest.fixture(scope="session")
def reference_scenario() -> Scenario:
    return load_reference_scenario()


@pytest.fixture(scope="session")
def reference_path(reference_scenario) -> FlightPath:
    return reference_scenario.reference_path


def random_valid_map(rng: random.Random, max_dim: int = 40,
                     max_obstacles: int = 10) -> GridMap:
    """Uniformly messy but valid map for fuzz loops."""
    width = rng.randint(2, max_dim)
    height = rng.randint(2, max_dim)
    start = GridCoord(0, 0)
    end = GridCoord(width - 1, height - 1)
    obstacles = []
    for i in range(rng.randint(0, max_obstacles)):
        for _ in range(30):
            x1 = rng.randrange(width)
            y1 = rng.randrange(height)
            x2 = min(width - 1, x1 + rng.randint(0, 4))
            y2 = min(height - 1, y1 + rng.randint(0, 4))
            ob = Obstacle(f"block {i}", x1, y1, x2, y2)
            if ob.contains(start) or ob.contains(end):
                continue
            obstacles.append(ob)
            break
    return GridMap(width, height, start, end, tuple(obstacles))


def random_walk_path(rng: random.Random, max_dim: int = 12,
                     max_steps: int = 40) -> tuple[GridMap, FlightPath]:
    """A wandering 4-connected path on an empty map; reversals included."""
    width = rng.randint(2, max_dim)
    height = rng.randint(2, max_dim)
    grid = GridMap(width, height, GridCoord(0, 0),
                   GridCoord(width - 1, height - 1))
    x = rng.randrange(width)
    y = rng.randrange(height)
    waypoints = [GridCoord(x, y)]
    for _ in range(rng.randint(1, max_steps)):
        dx, dy = rng.choice(((1, 0), (-1, 0), (0, 1), (0, -1)))
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            x, y = nx, ny
            waypoints.append(GridCoord(x, y))
    if len(waypoints) < 2:
        # at least one legal move always exists on a >=2-wide grid
        step = GridCoord(waypoints[0].x + (1 if waypoints[0].x == 0 else -1),
                         waypoints[0].y)
        waypoints.append(step)
    return grid, FlightPath(tuple(waypoints), float(len(waypoints) - 1))


def map_doc(width=20, height=20, start=(0, 0), end=(19, 19), obstacles=()):
    return json.dumps({
        "width": width, "height": height,
        "start_x": start[0], "start_y": start[1],
        "end_x": end[0], "end_y": end[1],
        "obstacle_list": list(obstacles),
    })
