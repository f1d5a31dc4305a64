"""Flight-path to drone-command compilation, simulation, and narration.

Axis convention for turns: x points right, y points up, so rotating from +x
to +y is a left turn. Headings are unit steps on the grid.

A compiled CommandSequence records the heading of its first move; the
textual command grammar cannot carry that, so a flight driven from text
starts at DEFAULT_START_HEADING (+y) once airborne, and the text serializer
inserts a leading rotation when needed. A rotation before takeoff is
malformed: there is nothing to rotate on the ground.

Textual grammar (one command per line, case-insensitive, list numbering
tolerated): preflight, takeoff, hover, forward <n>, left, right, around,
land, postflight.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .mapping import GridCoord, GridMap, rasterize
from .fields import FlightPath


class CommandError(Exception):
    pass


class DegeneratePath(CommandError):
    """Path too short to compile (fewer than 2 waypoints)."""


class MalformedSequence(CommandError):
    """Framing broken or a rotation issued before takeoff."""


class CollisionOrEscape(CommandError):
    """Simulated flight entered a blocked or out-of-bounds cell."""


class CommandParseError(CommandError):
    """No parseable command block in the given text."""


@dataclass(frozen=True)
class Heading:
    dx: int
    dy: int

    def __post_init__(self):
        if abs(self.dx) + abs(self.dy) != 1:
            raise ValueError("heading must be a unit axis step")


DEFAULT_START_HEADING = Heading(0, 1)

PRE_FLIGHT_CHECK = "preflight"
TAKEOFF = "takeoff"
HOVER = "hover"
FLY_FORWARD = "forward"
TURN_LEFT = "left"
TURN_RIGHT = "right"
TURN_AROUND = "around"
LAND = "land"
POST_FLIGHT_CHECK = "postflight"

TURNS = (TURN_LEFT, TURN_RIGHT, TURN_AROUND)
VERBS = (PRE_FLIGHT_CHECK, TAKEOFF, HOVER, FLY_FORWARD,
         TURN_LEFT, TURN_RIGHT, TURN_AROUND, LAND, POST_FLIGHT_CHECK)


@dataclass(frozen=True)
class Command:
    action: str
    distance: int | None = None

    def __post_init__(self):
        if self.action not in VERBS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == FLY_FORWARD:
            if self.distance is None or self.distance < 1:
                raise ValueError("forward needs a distance of at least 1")
        elif self.distance is not None:
            raise ValueError(f"{self.action} takes no distance")

    def __str__(self) -> str:
        if self.action == FLY_FORWARD:
            return f"{FLY_FORWARD} {self.distance}"
        return self.action


OPENING = (Command(PRE_FLIGHT_CHECK), Command(TAKEOFF), Command(HOVER))
CLOSING = (Command(HOVER), Command(LAND), Command(POST_FLIGHT_CHECK))


@dataclass(frozen=True)
class CommandSequence:
    commands: tuple[Command, ...]
    initial_heading: Heading | None = None

    def __len__(self) -> int:
        return len(self.commands)


def turn_between(cur: Heading, new: Heading) -> Command:
    cross = cur.dx * new.dy - cur.dy * new.dx
    if cross > 0:
        return Command(TURN_LEFT)
    if cross < 0:
        return Command(TURN_RIGHT)
    return Command(TURN_AROUND)  # opposite headings


def _rotation_from(cur: Heading, new: Heading) -> list[Command]:
    if cur == new:
        return []
    return [turn_between(cur, new)]


def _headings(path: FlightPath) -> list[Heading]:
    out = []
    for a, b in zip(path.waypoints, path.waypoints[1:]):
        out.append(Heading(b.x - a.x, b.y - a.y))
    return out


def compile_commands(path: FlightPath, hover_before_turns: bool = True) -> CommandSequence:
    """Compile a path into framed commands with run-length merged moves.

    The initial heading is the direction of the first move; no turn is
    emitted before the first forward.
    """
    if len(path.waypoints) < 2:
        raise DegeneratePath("need at least 2 waypoints to compile")
    headings = _headings(path)

    runs: list[tuple[Heading, int]] = []
    for h in headings:
        if runs and runs[-1][0] == h:
            runs[-1] = (h, runs[-1][1] + 1)
        else:
            runs.append((h, 1))

    body: list[Command] = []
    for i, (h, n) in enumerate(runs):
        if i > 0:
            if hover_before_turns:
                body.append(Command(HOVER))
            body.append(turn_between(runs[i - 1][0], h))
        body.append(Command(FLY_FORWARD, n))

    commands = OPENING + tuple(body) + CLOSING
    return CommandSequence(commands, initial_heading=runs[0][0])


def simulate_commands(seq: CommandSequence, start: GridCoord, grid: GridMap,
                      allow_partial: bool = False,
                      initial_heading: Heading | None = None) -> FlightPath:
    """Execute a command sequence on the grid and return the visited cells.

    Framing must open with [preflight, takeoff, hover]; unless
    allow_partial is set it must also close with [hover, land, postflight].
    The heading after takeoff is ``initial_heading``, the sequence's own
    recorded heading, or DEFAULT_START_HEADING, in that priority order.
    """
    cmds = seq.commands
    if len(cmds) < 3 or cmds[:3] != OPENING:
        raise MalformedSequence("sequence must open with preflight, takeoff, hover")
    closed = len(cmds) >= 6 and cmds[-3:] == CLOSING
    if not allow_partial and not closed:
        raise MalformedSequence("sequence must close with hover, land, postflight")
    body = cmds[3:-3] if closed else cmds[3:]
    for c in body:
        if c.action in (PRE_FLIGHT_CHECK, TAKEOFF, LAND, POST_FLIGHT_CHECK):
            raise MalformedSequence(f"{c.action} not allowed mid-flight")

    heading = initial_heading or seq.initial_heading or DEFAULT_START_HEADING
    blocked = rasterize(grid).cells
    if not grid.in_bounds(start):
        raise CollisionOrEscape(f"start {start} outside the grid")
    pos = start
    visited = [start]

    for c in body:
        if c.action == HOVER:
            continue
        if c.action in TURNS:
            heading = _apply_turn(heading, c.action)
            continue
        for _ in range(c.distance):
            pos = GridCoord(pos.x + heading.dx, pos.y + heading.dy)
            if not grid.in_bounds(pos):
                raise CollisionOrEscape(f"flew out of bounds at {pos}")
            if blocked[pos.y, pos.x]:
                raise CollisionOrEscape(f"collided with obstacle at {pos}")
            visited.append(pos)

    return FlightPath(tuple(visited), float(len(visited) - 1))


def _apply_turn(h: Heading, action: str) -> Heading:
    if action == TURN_LEFT:  # 90 degrees ccw with y up
        return Heading(-h.dy, h.dx)
    if action == TURN_RIGHT:
        return Heading(h.dy, -h.dx)
    return Heading(-h.dx, -h.dy)


def command_text(seq: CommandSequence, normalize_heading: bool = True) -> str:
    """Serialize to the textual grammar, one command per line.

    The grammar cannot express the recorded initial heading, so with
    normalize_heading a rotation from DEFAULT_START_HEADING is inserted
    right after the opening hover when the two differ.
    """
    commands = list(seq.commands)
    if (normalize_heading and seq.initial_heading is not None
            and seq.initial_heading != DEFAULT_START_HEADING
            and commands[:3] == list(OPENING)):
        rotation = _rotation_from(DEFAULT_START_HEADING, seq.initial_heading)
        commands = commands[:3] + rotation + commands[3:]
    return "\n".join(str(c) for c in commands)


_LINE_RE = re.compile(
    r"^\s*(?:(?:step\s*)?\d+[.):]\s*|[-*]\s+)?"
    r"(preflight|takeoff|hover|forward\s+(\d+)|left|right|around|land|postflight)"
    r"\s*[.,;!]?\s*$",
    re.IGNORECASE)


def _match_command(line: str) -> Command | None:
    m = _LINE_RE.match(line)
    if not m:
        return None
    verb = m.group(1).lower()
    if verb.startswith(FLY_FORWARD):
        return Command(FLY_FORWARD, int(m.group(2)))
    return Command(verb)


def parse_command_text(text: str) -> CommandSequence:
    """Extract the longest contiguous run of command lines from free text."""
    parsed = [_match_command(line) for line in text.splitlines()]

    best: list[Command] = []
    current: list[Command] = []
    for cmd in parsed:
        if cmd is None:
            if len(current) > len(best):
                best = current
            current = []
        else:
            current.append(cmd)
    if len(current) > len(best):
        best = current

    if not best:
        raise CommandParseError("no command lines found")
    return CommandSequence(tuple(best))


_NARRATION_STEPS = (
    ("Pre-Flight Check", "verify the airframe, battery, sensors and comms are"
     " operational before takeoff."),
    ("Takeoff", "lift off from {start} and climb to a safe working altitude."),
    ("Hover", "hold position above the starting point {start} until the"
     " platform is stable and cleared to proceed."),
    ("Navigate to First Waypoint", "begin the route by flying forward to the"
     " first waypoint, keeping a steady altitude ({legs} forward legs in"
     " total)."),
    ("Sequential Waypoints", "follow the planned route {route}: fly forward"
     " to each next coordinate, perform the turn on approach, and adjust"
     " altitude if needed."),
    ("Avoid Obstacles", "keep scanning for obstacles and be ready to adjust"
     " the route while staying on course."),
    ("Hover Before Turns", "before a significant change of direction, hover"
     " briefly to assess the surroundings."),
    ("Final Approach", "slow down on approach to the final waypoint {end}"
     " and prepare to land."),
    ("Land", "descend gently and touch down at the endpoint {end}."),
    ("Post-Flight", "run the post-flight check and confirm the aircraft is"
     " intact after covering {count} waypoints."),
)


def narrate(seq: CommandSequence, path: FlightPath) -> str:
    """Deterministic ten-step mission briefing for a compiled flight."""
    route = "[" + ", ".join(str(c) for c in path.waypoints) + "]"
    values = {
        "start": str(path.start),
        "end": str(path.end),
        "route": route,
        "count": len(path.waypoints),
        "legs": sum(1 for c in seq.commands if c.action == FLY_FORWARD),
    }
    lines = []
    for i, (title, body) in enumerate(_NARRATION_STEPS, start=1):
        lines.append(f"{i}. {title}: {body.format(**values)}")
    return "\n".join(lines)
