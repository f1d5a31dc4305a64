"""Session-oriented mission runtime and its HTTP surface.

Missions are independent; within one mission, mutating operations
serialize behind a per-mission lock (single writer) while reads take the
same lock briefly to copy a consistent snapshot. Context application is
transactional: on interpretation failure the mission is untouched.

An optional append-only journal records enough to rebuild every mission
after a crash; LLM interpretations are journaled by their resulting zones,
so recovery never needs a provider.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import anyio.to_thread
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import commands as cmd
from .fields import (ContextZone, CostField, FlightPath, NoPath,
                     build_cost_field, dilate_region, plan_astar,
                     zone_from_anchor)
from .llm import ChatSession, extract_map
from .mapping import (CONTEXTUAL, GridCoord, GridMap, MapError, Obstacle,
                      map_to_dict, parse_map, serialize_map)

PLANNED = "planned"
AIRBORNE = "airborne"
LANDED = "landed"
ABORTED = "aborted"

DETERMINISTIC = "deterministic"
LLM = "llm"


class ServiceError(Exception):
    code = "InternalError"
    http_status = 500


class MissionNotFound(ServiceError):
    code = "MissionNotFound"
    http_status = 404


class AlreadyLanded(ServiceError):
    code = "AlreadyLanded"
    http_status = 409


class InterpretationFailed(ServiceError):
    code = "InterpretationFailed"
    http_status = 422


class InvalidMissionState(ServiceError):
    code = "InvalidMissionState"
    http_status = 409


@dataclass
class Event:
    seq: int
    timestamp: float
    kind: str
    payload: dict


@dataclass
class Mission:
    mission_id: str
    grid: GridMap
    zones: list[ContextZone]
    field: CostField
    current_cell: GridCoord
    remaining: FlightPath
    visited: list[GridCoord]
    command_log: list[cmd.Command]
    log_heading: cmd.Heading | None
    phase: str
    events: list[Event]


def _suffix_path(field: CostField, waypoints) -> FlightPath:
    cost = sum(field.at(c) for c in waypoints[1:])
    return FlightPath(tuple(waypoints), float(cost))


# ---------------------------------------------------------------------------
# Deterministic utterance grammar

_AVOID_RE = re.compile(
    r"avoid\s+within\s+(\d+)\s+squares?\s+of\s+(?:the\s+)?([\w][\w ]*?)\s*$",
    re.IGNORECASE)
_ANCHOR_RE = re.compile(
    r"(.*?)\bat\s*\(\s*(\d+)\s*,\s*(\d+)\s*\).*?(?:about|roughly|approximately)"
    r"\s+(\d+)\s+(?:grids?|cells?|squares?)",
    re.IGNORECASE | re.DOTALL)


def interpret_deterministic(utterance: str, grid: GridMap) -> list[ContextZone]:
    """Tiny pattern grammar covering the two supported utterance shapes.

    "avoid within N squares of <label>" dilates the named obstacle;
    "<thing> at (x, y) covering about K grids" drops an anchored zone.
    """
    m = _AVOID_RE.search(utterance)
    if m:
        margin = int(m.group(1))
        label = m.group(2).strip()
        ob = grid.obstacle_by_label(label)
        if ob is None:
            raise InterpretationFailed(f"no obstacle labeled {label!r}")
        dil = dilate_region(ob, margin, grid)
        region = Obstacle(f"{label} avoidance", dil.x1, dil.y1, dil.x2, dil.y2,
                          kind=dil.kind, penalty=dil.penalty)
        return [ContextZone(source_label=label, region=region, mode="hard")]

    m = _ANCHOR_RE.search(utterance)
    if m:
        thing = m.group(1).strip().rstrip(",.;:") or "reported area"
        anchor = GridCoord(int(m.group(2)), int(m.group(3)))
        if not grid.in_bounds(anchor):
            raise InterpretationFailed(f"anchor {anchor} outside the grid")
        cells = int(m.group(4))
        return [zone_from_anchor(anchor, cells, grid, label=thing)]

    raise InterpretationFailed("utterance matches no supported pattern")


def effective_map(grid: GridMap, zones) -> GridMap:
    """The base map with every active zone appended as a contextual obstacle."""
    return grid.with_obstacles(z.as_obstacle() for z in zones)


def interpret_llm(utterance: str, grid: GridMap, zones,
                  session: ChatSession) -> list[ContextZone]:
    """Ask the model for a full updated map and diff out the new regions."""
    current = effective_map(grid, zones)
    prompt = (f"Here is the current map in JSON format:\n{serialize_map(current)}\n"
              f"New situational description: {utterance}\n"
              "Update the map accordingly and reply with the complete updated"
              " map in the same JSON format.")
    reply = session.send(prompt)
    extraction = extract_map(reply)
    if not extraction.ok:
        raise InterpretationFailed(f"model reply unusable: {extraction.detail}")
    known = {(ob.label.strip().lower(), ob.x1, ob.y1, ob.x2, ob.y2)
             for ob in current.obstacles}
    new_zones = []
    for ob in extraction.grid.obstacles:
        if (ob.label.strip().lower(), ob.x1, ob.y1, ob.x2, ob.y2) in known:
            continue
        hard = math.isinf(ob.penalty)
        if not hard and ob.penalty <= 0:
            continue  # a zero-penalty region changes nothing
        region = Obstacle(ob.label, ob.x1, ob.y1, ob.x2, ob.y2,
                          kind=CONTEXTUAL, penalty=ob.penalty)
        new_zones.append(ContextZone(
            source_label=ob.label, region=region,
            mode="hard" if hard else "soft",
            penalty=0.0 if hard else ob.penalty))
    if not new_zones:
        raise InterpretationFailed("model returned the map unmodified")
    return new_zones


# ---------------------------------------------------------------------------
# Mission store

class MissionStore:
    """In-memory mission registry with optional append-only journal."""

    def __init__(self, journal_path: str | Path | None = None,
                 hover_before_turns: bool = True):
        self._missions: dict[str, Mission] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._conditions: dict[str, threading.Condition] = {}
        self._registry_lock = threading.Lock()
        self.hover_before_turns = hover_before_turns
        self.journal_path = Path(journal_path) if journal_path else None
        if self.journal_path and self.journal_path.exists():
            self._recover()

    # -- internals ---------------------------------------------------------

    def _mission(self, mission_id: str) -> Mission:
        mission = self._missions.get(mission_id)
        if mission is None:
            raise MissionNotFound(f"no mission {mission_id!r}")
        return mission

    def _lock(self, mission_id: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._locks.get(mission_id)
        if lock is None:
            raise MissionNotFound(f"no mission {mission_id!r}")
        return lock

    def _emit(self, mission: Mission, kind: str, payload: dict) -> None:
        mission.events.append(Event(
            seq=len(mission.events), timestamp=time.time(),
            kind=kind, payload=payload))
        condition = self._conditions[mission.mission_id]
        with condition:
            condition.notify_all()

    def _journal(self, record: dict) -> None:
        if self.journal_path is None:
            return
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.journal_path, "a") as f:
            f.write(json.dumps(record) + "\n")

    def _recover(self) -> None:
        journal = self.journal_path
        self.journal_path = None  # do not re-journal while replaying
        try:
            with open(journal) as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    op = record["op"]
                    if op == "create":
                        self.create_mission(parse_map(json.dumps(record["map"])),
                                            mission_id=record["mission_id"])
                    elif op == "step":
                        self.step(record["mission_id"])
                    elif op == "context":
                        zones = [_zone_from_dict(z) for z in record["zones"]]
                        try:
                            self._apply_zones(record["mission_id"], zones,
                                              record.get("utterance", ""),
                                              record.get("interpreter", DETERMINISTIC))
                        except NoPath:
                            pass  # abort already recorded on the mission
        finally:
            self.journal_path = journal

    # -- operations ---------------------------------------------------------

    def create_mission(self, grid: GridMap, mission_id: str | None = None) -> str:
        field_ = build_cost_field(grid)
        plan = plan_astar(field_, grid.start, grid.end)  # NoPath propagates
        mission_id = mission_id or uuid.uuid4().hex
        mission = Mission(
            mission_id=mission_id, grid=grid, zones=[], field=field_,
            current_cell=grid.start, remaining=plan, visited=[grid.start],
            command_log=[], log_heading=None, phase=PLANNED, events=[])
        with self._registry_lock:
            self._missions[mission_id] = mission
            self._locks[mission_id] = threading.Lock()
            self._conditions[mission_id] = threading.Condition()
        self._emit(mission, "created", {
            "plan_cost": plan.total_cost, "waypoints": len(plan)})
        self._journal({"op": "create", "mission_id": mission_id,
                       "map": map_to_dict(grid)})
        return mission_id

    def step(self, mission_id: str) -> dict:
        with self._lock(mission_id):
            mission = self._mission(mission_id)
            if mission.phase in (LANDED, ABORTED):
                raise AlreadyLanded(f"mission {mission_id} is {mission.phase}")

            if mission.phase == PLANNED:
                # the first call only takes off; movement starts next call
                mission.command_log.extend(cmd.OPENING)
                mission.phase = AIRBORNE
                self._emit(mission, "took_off", {
                    "cell": {"x": mission.current_cell.x,
                             "y": mission.current_cell.y}})
                self._journal({"op": "step", "mission_id": mission_id})
                return self._snapshot(mission)

            if len(mission.remaining.waypoints) < 2:
                raise InvalidMissionState("no moves left to fly")
            here, nxt = mission.remaining.waypoints[0], mission.remaining.waypoints[1]
            heading = cmd.Heading(nxt.x - here.x, nxt.y - here.y)
            if mission.log_heading is None:
                mission.log_heading = heading
            elif heading != mission.log_heading:
                if self.hover_before_turns:
                    mission.command_log.append(cmd.Command(cmd.HOVER))
                mission.command_log.append(
                    cmd.turn_between(mission.log_heading, heading))
                mission.log_heading = heading
            mission.command_log.append(cmd.Command(cmd.FLY_FORWARD, 1))

            mission.current_cell = nxt
            mission.visited.append(nxt)
            mission.remaining = _suffix_path(
                mission.field, mission.remaining.waypoints[1:])

            if len(mission.remaining.waypoints) == 1:
                mission.command_log.extend(cmd.CLOSING)
                mission.phase = LANDED
            self._emit(mission, "stepped", {
                "cell": {"x": nxt.x, "y": nxt.y}, "phase": mission.phase})
            self._journal({"op": "step", "mission_id": mission_id})
            return self._snapshot(mission)

    def apply_context(self, mission_id: str, utterance: str,
                      interpreter: str = DETERMINISTIC,
                      session: ChatSession | None = None) -> dict:
        with self._lock(mission_id):
            mission = self._mission(mission_id)
            if mission.phase in (LANDED, ABORTED):
                raise AlreadyLanded(f"mission {mission_id} is {mission.phase}")
            # Interpretation happens before any mutation, so a grammar miss
            # or an unusable model reply leaves the mission untouched.
            if interpreter == DETERMINISTIC:
                zones = interpret_deterministic(utterance, effective_map(
                    mission.grid, mission.zones))
            elif interpreter == LLM:
                if session is None:
                    raise InterpretationFailed("no chat session configured")
                zones = interpret_llm(utterance, mission.grid, mission.zones, session)
            else:
                raise InterpretationFailed(f"unknown interpreter {interpreter!r}")
            try:
                snapshot = self._apply_zones_locked(
                    mission, zones, utterance, interpreter)
            finally:
                # Zones enter history even when the re-plan aborts the flight.
                self._journal({"op": "context", "mission_id": mission_id,
                               "utterance": utterance, "interpreter": interpreter,
                               "zones": [_zone_to_dict(z) for z in zones]})
        return snapshot

    def _apply_zones(self, mission_id: str, zones, utterance: str,
                     interpreter: str) -> dict:
        with self._lock(mission_id):
            return self._apply_zones_locked(
                self._mission(mission_id), zones, utterance, interpreter)

    def _apply_zones_locked(self, mission: Mission, zones, utterance: str,
                            interpreter: str) -> dict:
        new_zones = mission.zones + list(zones)
        field_ = build_cost_field(mission.grid, new_zones)
        # A zone declared over the drone's own cell must not deadlock it:
        # that single cell reverts to base cost so the cheapest escape wins.
        if not field_.finite(mission.current_cell):
            patched = field_.cost.copy()
            patched[mission.current_cell.y, mission.current_cell.x] = 1.0
            field_ = CostField(field_.width, field_.height, patched)
        try:
            plan = plan_astar(field_, mission.current_cell, mission.grid.end)
        except NoPath:
            mission.zones = new_zones
            mission.field = field_
            mission.remaining = FlightPath((mission.current_cell,), 0.0)
            if mission.phase == AIRBORNE:
                mission.command_log.extend(cmd.CLOSING)
            mission.phase = ABORTED
            self._emit(mission, "aborted", {
                "utterance": utterance,
                "reason": "re-plan found no route to the end"})
            raise
        mission.zones = new_zones
        mission.field = field_
        mission.remaining = plan
        self._emit(mission, "context_applied", {
            "utterance": utterance,
            "interpreter": interpreter,
            "zones": [_zone_to_dict(z) for z in zones],
            "replanned_cost": plan.total_cost})
        return self._snapshot(mission)

    def get_state(self, mission_id: str) -> dict:
        with self._lock(mission_id):
            return self._snapshot(self._mission(mission_id))

    def list_events(self, mission_id: str, since: int = -1,
                    wait: float = 0.0) -> list[dict]:
        deadline = time.monotonic() + wait
        condition = None
        with self._registry_lock:
            if mission_id not in self._missions:
                raise MissionNotFound(f"no mission {mission_id!r}")
            condition = self._conditions[mission_id]
        while True:
            with self._lock(mission_id):
                mission = self._mission(mission_id)
                fresh = [e for e in mission.events if e.seq > since]
            if fresh or wait <= 0:
                return [_event_to_dict(e) for e in fresh]
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return []
            with condition:
                condition.wait(timeout=min(remaining, 0.5))

    def mission_ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._missions)

    def command_log(self, mission_id: str) -> cmd.CommandSequence:
        with self._lock(mission_id):
            mission = self._mission(mission_id)
            first = None
            for c in mission.command_log:
                if c.action == cmd.FLY_FORWARD:
                    first = mission.visited[1] if len(mission.visited) > 1 else None
                    break
            heading = None
            if first is not None:
                heading = cmd.Heading(first.x - mission.visited[0].x,
                                      first.y - mission.visited[0].y)
            return cmd.CommandSequence(tuple(mission.command_log), heading)

    # -- serialization -------------------------------------------------------

    def _snapshot(self, mission: Mission) -> dict:
        return {
            "mission_id": mission.mission_id,
            "phase": mission.phase,
            "map": map_to_dict(mission.grid),
            "zones": [_zone_to_dict(z) for z in mission.zones],
            "current_cell": {"x": mission.current_cell.x, "y": mission.current_cell.y},
            "remaining_path": {
                "waypoints": [[c.x, c.y] for c in mission.remaining.waypoints],
                "total_cost": mission.remaining.total_cost,
            },
            "visited": [[c.x, c.y] for c in mission.visited],
            "command_log": [str(c) for c in mission.command_log],
            "event_count": len(mission.events),
        }


def _zone_to_dict(zone: ContextZone) -> dict:
    r = zone.region
    doc = {"source_label": zone.source_label, "mode": zone.mode,
           "label": r.label, "x1": r.x1, "y1": r.y1, "x2": r.x2, "y2": r.y2,
           "kind": CONTEXTUAL}
    if zone.mode == "soft":
        doc["penalty"] = zone.penalty
    return doc


def _zone_from_dict(doc: dict) -> ContextZone:
    from .mapping import Obstacle
    penalty = doc.get("penalty", 0.0)
    region = Obstacle(doc["label"], doc["x1"], doc["y1"], doc["x2"], doc["y2"],
                      kind=CONTEXTUAL,
                      penalty=math.inf if doc["mode"] == "hard" else penalty)
    return ContextZone(source_label=doc.get("source_label", doc["label"]),
                       region=region, mode=doc["mode"], penalty=penalty)


def _event_to_dict(event: Event) -> dict:
    return {"seq": event.seq, "timestamp": event.timestamp,
            "kind": event.kind, "payload": event.payload}


# ---------------------------------------------------------------------------
# HTTP layer

def create_app(store: MissionStore | None = None,
               llm_session_factory=None, static_dir: str | Path | None = None):
    """Build the FastAPI app; the store may be shared with embedding code."""
    store = store or MissionStore()
    app = FastAPI(title="dronenav mission service")
    app.state.store = store
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def envelope(code: str, message: str, status: int) -> JSONResponse:
        return JSONResponse({"code": code, "message": message}, status_code=status)

    @app.exception_handler(ServiceError)
    async def service_error(_request: Request, exc: ServiceError):
        return envelope(exc.code, str(exc), exc.http_status)

    @app.exception_handler(NoPath)
    async def no_path(_request: Request, exc: NoPath):
        return envelope("NoPath", str(exc), 409)

    @app.exception_handler(MapError)
    async def invalid_map(_request: Request, exc: MapError):
        return envelope("InvalidMap", str(exc), 400)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/missions", status_code=201)
    async def create(request: Request):
        body = await request.body()
        grid = parse_map(body.decode("utf-8"))
        mission_id = store.create_mission(grid)
        return {"mission_id": mission_id}

    @app.get("/missions")
    async def index():
        return {"missions": store.mission_ids()}

    @app.get("/missions/{mission_id}")
    async def get_state(mission_id: str):
        return store.get_state(mission_id)

    @app.post("/missions/{mission_id}/step")
    async def step(mission_id: str):
        return store.step(mission_id)

    @app.post("/missions/{mission_id}/context")
    async def context(mission_id: str, request: Request):
        doc = await request.json()
        utterance = doc.get("utterance", "")
        interpreter = doc.get("interpreter", DETERMINISTIC)
        session = None
        if interpreter == LLM:
            if llm_session_factory is None:
                raise InterpretationFailed("service started without a provider")
            session = llm_session_factory()
        return store.apply_context(mission_id, utterance, interpreter, session)

    @app.get("/missions/{mission_id}/events")
    async def events(mission_id: str, since: int = -1, wait: float = 0.0):
        capped = min(wait, 25.0)
        items = await anyio.to_thread.run_sync(
            store.list_events, mission_id, since, capped)
        return {"events": items}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="console")

    return app
