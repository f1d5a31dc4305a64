"""Benchmark scenarios, the five-criterion judge, and report emission.

The judge codifies tolerant automated verdicts over protocol transcripts:
containment checks for the analysis step, coverage thresholds for map
edits, and a flight simulation for the command step. Verdicts are values,
never exceptions, so one bad step never hides the others.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from . import commands as cmd
from .fields import (FlightPath, NoPath, build_cost_field, dilate_region,
                     oracle_cheapest_cost, plan_astar, zone_from_anchor)
from .llm import (ChatParams, ChatSession, HttpChatProvider, ProviderProfile,
                  ProtocolTranscript, ReplayProvider, ScriptedProvider,
                  TranscriptRecorder, run_protocol)
from .mapping import (GridCoord, GridMap, Obstacle, parse_map, rasterize,
                      serialize_map)

PASS = "pass"
FORMAT_ERROR = "format_error"
SEMANTIC_ERROR = "semantic_error"
PROVIDER_ERROR = "provider_error"

VERDICT_CELLS = {PASS: "✓", FORMAT_ERROR: "Format",
                 SEMANTIC_ERROR: "Semantic", PROVIDER_ERROR: "Provider"}

RING_COVERAGE_THRESHOLD = 0.8
FLOCK_AREA_WINDOW = (3, 25)

_LABEL_POOL = ("school", "office building", "park", "warehouse", "hospital",
               "market", "library", "depot", "stadium", "water tower")


class PlacementExhausted(Exception):
    """Scenario generation could not satisfy its constraints."""


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int | None
    map: GridMap
    lunch_break_target: str
    flock_anchor: GridCoord
    reference_path: FlightPath
    lunch_break_margin: int = 2
    flock_cells: int = 3

    def target_obstacle(self) -> Obstacle:
        ob = self.map.obstacle_by_label(self.lunch_break_target)
        if ob is None:
            raise ValueError(f"target {self.lunch_break_target!r} not in map")
        return ob


@dataclass(frozen=True)
class CriterionResult:
    id: int  # 1..5
    verdict: str
    detail: str = ""


@dataclass(frozen=True)
class ReportRow:
    model_id: str
    results: tuple[CriterionResult, ...]

    def __post_init__(self):
        if len(self.results) != 5:
            raise ValueError("a report row carries exactly 5 results")


@dataclass(frozen=True)
class EvalReport:
    scenario_meta: dict
    rows: tuple[ReportRow, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# Scenario generation and fixtures

def _overlaps(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _covers(rect, c: GridCoord) -> bool:
    return rect[0] <= c.x <= rect[2] and rect[1] <= c.y <= rect[3]


def _label(i: int) -> str:
    if i < len(_LABEL_POOL):
        return _LABEL_POOL[i]
    return f"{_LABEL_POOL[i % len(_LABEL_POOL)]} {i // len(_LABEL_POOL) + 1}"


def generate_scenario(seed: int, width: int, height: int, n_obstacles: int,
                      max_attempts: int = 60) -> Scenario:
    """Deterministic random scenario: disjoint rectangles, start/end free,
    a route guaranteed to exist, context targets judged reachable."""
    if n_obstacles < 1:
        raise ValueError("need at least one obstacle")
    rng = random.Random(seed)
    start = GridCoord(0, 0)
    end = GridCoord(width - 1, height - 1)

    for _ in range(max_attempts):
        rects: list[tuple[int, int, int, int]] = []
        for _ in range(n_obstacles):
            placed = False
            for _ in range(400):
                w = rng.randint(1, 5)
                h = rng.randint(1, 5)
                if w > width or h > height:
                    continue
                x1 = rng.randint(0, width - w)
                y1 = rng.randint(0, height - h)
                rect = (x1, y1, x1 + w - 1, y1 + h - 1)
                if _covers(rect, start) or _covers(rect, end):
                    continue
                if any(_overlaps(rect, other) for other in rects):
                    continue
                rects.append(rect)
                placed = True
                break
            if not placed:
                break
        if len(rects) != n_obstacles:
            continue

        grid = GridMap(width, height, start, end, tuple(
            Obstacle(_label(i), *rect) for i, rect in enumerate(rects)))
        field_ = build_cost_field(grid)
        try:
            oracle_cheapest_cost(field_, start, end)
        except NoPath:
            continue
        reference = plan_astar(field_, start, end)

        # Lunch-break target: its margin-2 dilation must spare the endpoints
        # so the deterministic oracle transcript is judgeable as a pass.
        target = None
        for ob in grid.obstacles:
            dil = dilate_region(ob, 2, grid)
            if not (dil.contains(start) or dil.contains(end)):
                target = ob
                break
        if target is None:
            continue

        anchor = _pick_anchor(rng, grid)
        if anchor is None:
            continue

        return Scenario(
            name=f"seed{seed}-{width}x{height}-{n_obstacles}",
            seed=seed, map=grid, lunch_break_target=target.label,
            flock_anchor=anchor, reference_path=reference)

    raise PlacementExhausted(
        f"no valid scenario for seed={seed} {width}x{height} n={n_obstacles}")


def _pick_anchor(rng: random.Random, grid: GridMap) -> GridCoord | None:
    blocked = rasterize(grid).cells
    for _ in range(400):
        c = GridCoord(rng.randrange(grid.width), rng.randrange(grid.height))
        if c in (grid.start, grid.end) or blocked[c.y, c.x]:
            continue
        zone = zone_from_anchor(c, 3, grid).region
        if zone.contains(grid.start) or zone.contains(grid.end):
            continue
        return c
    return None


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "seed": s.seed,
        "map": json.loads(serialize_map(s.map)),
        "lunch_break_target": s.lunch_break_target,
        "lunch_break_margin": s.lunch_break_margin,
        "flock_anchor": {"x": s.flock_anchor.x, "y": s.flock_anchor.y},
        "flock_cells": s.flock_cells,
        "reference_path": [[c.x, c.y] for c in s.reference_path.waypoints],
        "reference_cost": s.reference_path.total_cost,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    grid = parse_map(json.dumps(doc["map"]))
    waypoints = tuple(GridCoord(x, y) for x, y in doc["reference_path"])
    cost = doc.get("reference_cost")
    if cost is None:
        field_ = build_cost_field(grid)
        cost = sum(field_.at(c) for c in waypoints[1:])
    return Scenario(
        name=doc.get("name", "scenario"),
        seed=doc.get("seed"),
        map=grid,
        lunch_break_target=doc["lunch_break_target"],
        flock_anchor=GridCoord(doc["flock_anchor"]["x"], doc["flock_anchor"]["y"]),
        reference_path=FlightPath(waypoints, float(cost)),
        lunch_break_margin=doc.get("lunch_break_margin", 2),
        flock_cells=doc.get("flock_cells", 3))


def save_scenario(s: Scenario, map_path: Path, sidecar_path: Path) -> None:
    """Fixture pair: the map in the wire schema plus a sidecar with the rest."""
    map_path = Path(map_path)
    map_path.write_text(serialize_map(s.map) + "\n")
    doc = scenario_to_dict(s)
    doc["map_file"] = map_path.name
    del doc["map"]
    Path(sidecar_path).write_text(json.dumps(doc, indent=2) + "\n")


def load_scenario(sidecar_path) -> Scenario:
    sidecar_path = Path(sidecar_path)
    doc = json.loads(sidecar_path.read_text())
    if "map" not in doc:
        map_doc = json.loads((sidecar_path.parent / doc["map_file"]).read_text())
        doc["map"] = map_doc
    return scenario_from_dict(doc)


def load_reference_scenario() -> Scenario:
    """The built-in 20x20 three-obstacle scenario shipped with the package."""
    data = resources.files("dronenav") / "data"
    doc = json.loads((data / "reference_scenario.json").read_text())
    doc["map"] = json.loads((data / "reference_map.json").read_text())
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# Deterministic oracle transcripts (the harness judging itself)

def lunch_zone_obstacle(scenario: Scenario) -> Obstacle:
    dil = dilate_region(scenario.target_obstacle(), scenario.lunch_break_margin,
                        scenario.map)
    return Obstacle(f"{scenario.lunch_break_target} closure",
                    dil.x1, dil.y1, dil.x2, dil.y2,
                    kind=dil.kind, penalty=dil.penalty)


def flock_zone_obstacle(scenario: Scenario) -> Obstacle:
    zone = zone_from_anchor(scenario.flock_anchor, scenario.flock_cells,
                            scenario.map, label="bird flock")
    return zone.as_obstacle()


def perfect_replies(scenario: Scenario) -> list[str]:
    """Scripted answers built purely from the deterministic core."""
    grid = scenario.map
    listing = ", ".join(
        f"{ob.label} at ({ob.x1}, {ob.y1}, {ob.x2}, {ob.y2})"
        for ob in grid.obstacles)
    r1 = (f"This map is a {grid.width} by {grid.height} grid. The mission"
          f" runs from {grid.start} to {grid.end}. It contains"
          f" {len(grid.obstacles)} obstacles: {listing}.")
    r2 = ("Understood. Send the descriptions and I will reply with full maps"
          " in the same JSON format.")
    m3 = grid.with_obstacles([lunch_zone_obstacle(scenario)])
    r3 = "Here is the updated map:\n```json\n" + serialize_map(m3) + "\n```"
    m4 = grid.with_obstacles([flock_zone_obstacle(scenario)])
    r4 = "Here is the updated map:\n```json\n" + serialize_map(m4) + "\n```"
    seq = cmd.compile_commands(scenario.reference_path)
    r5 = cmd.narrate(seq, scenario.reference_path)
    r6 = "Command sequence:\n" + cmd.command_text(seq)
    return [r1, r2, r3, r4, r5, r6]


def corrupt_step3(replies: list[str]) -> list[str]:
    """Drop the final closing brace of the step-3 map, nothing else."""
    out = list(replies)
    idx = out[2].rindex("}")
    out[2] = out[2][:idx] + out[2][idx + 1:]
    return out


def oracle_transcript(scenario: Scenario, model_id: str = "oracle",
                      corrupt: bool = False) -> ProtocolTranscript:
    replies = perfect_replies(scenario)
    if corrupt:
        replies = corrupt_step3(replies)
    profile = ProviderProfile(id=model_id, endpoint="mock:", model_id=model_id,
                              context_tokens=1_000_000)
    session = ChatSession(profile, ScriptedProvider(replies))
    return run_protocol(session, scenario)


# ---------------------------------------------------------------------------
# Judging

def _obstacle_key(ob: Obstacle) -> tuple:
    return (ob.label.strip().lower(), ob.x1, ob.y1, ob.x2, ob.y2)


def _new_regions(original: GridMap, modified: GridMap) -> list[Obstacle]:
    known = {_obstacle_key(ob) for ob in original.obstacles}
    return [ob for ob in modified.obstacles if _obstacle_key(ob) not in known]


def _missing_originals(original: GridMap, modified: GridMap) -> list[str]:
    have = {_obstacle_key(ob) for ob in modified.obstacles}
    return [ob.label for ob in original.obstacles
            if _obstacle_key(ob) not in have]


def _gate(step, criterion_id: int):
    """Common provider/extraction gate for the two map-edit criteria."""
    if step.error is not None:
        return CriterionResult(criterion_id, PROVIDER_ERROR, step.error)
    if step.extraction is None or not step.extraction.ok:
        detail = step.extraction.detail if step.extraction else "no extraction"
        return CriterionResult(criterion_id, FORMAT_ERROR, detail)
    return None


def _judge_map_understood(step, scenario: Scenario) -> CriterionResult:
    if step.error is not None:
        return CriterionResult(1, PROVIDER_ERROR, step.error)
    text = step.reply.lower()
    missing = [ob.label for ob in scenario.map.obstacles
               if ob.label.lower() not in text]
    if missing:
        return CriterionResult(1, SEMANTIC_ERROR,
                               f"labels not mentioned: {', '.join(missing)}")
    for dim in (scenario.map.width, scenario.map.height):
        if str(dim) not in text:
            return CriterionResult(1, SEMANTIC_ERROR,
                                   f"grid dimension {dim} not mentioned")
    return CriterionResult(1, PASS)


def _judge_lunch_zone(step, scenario: Scenario) -> CriterionResult:
    gated = _gate(step, 2)
    if gated:
        return gated
    modified = step.extraction.grid
    missing = _missing_originals(scenario.map, modified)
    if missing:
        return CriterionResult(2, SEMANTIC_ERROR,
                               f"original obstacles dropped: {', '.join(missing)}")
    regions = _new_regions(scenario.map, modified)
    if not regions:
        return CriterionResult(2, SEMANTIC_ERROR, "map returned unmodified")
    for r in regions:
        if r.contains(scenario.map.start) or r.contains(scenario.map.end):
            return CriterionResult(2, SEMANTIC_ERROR,
                                   f"new region {r.label!r} covers an endpoint")
    target = scenario.target_obstacle()
    dil = dilate_region(target, scenario.lunch_break_margin, scenario.map)
    ring = [c for c in dil.cells() if not target.contains(c)]
    covered = sum(1 for c in ring if any(r.contains(c) for r in regions))
    coverage = covered / len(ring) if ring else 1.0
    if coverage < RING_COVERAGE_THRESHOLD:
        return CriterionResult(
            2, SEMANTIC_ERROR,
            f"avoidance ring around {target.label!r} only {coverage:.0%} covered")
    return CriterionResult(2, PASS)


def _judge_flock_zone(step, scenario: Scenario) -> CriterionResult:
    gated = _gate(step, 3)
    if gated:
        return gated
    modified = step.extraction.grid
    regions = _new_regions(scenario.map, modified)
    if not regions:
        return CriterionResult(3, SEMANTIC_ERROR, "map returned unmodified")
    lo, hi = FLOCK_AREA_WINDOW
    anchor = scenario.flock_anchor
    reasons = []
    for r in regions:
        if not r.contains(anchor):
            reasons.append(f"{r.label!r} misses the anchor {anchor}")
            continue
        if not lo <= r.area <= hi:
            reasons.append(f"{r.label!r} area {r.area} outside [{lo}, {hi}]")
            continue
        if r.contains(scenario.map.start) or r.contains(scenario.map.end):
            reasons.append(f"{r.label!r} covers an endpoint")
            continue
        return CriterionResult(3, PASS)
    return CriterionResult(3, SEMANTIC_ERROR, "; ".join(reasons))


def _judge_briefing(step, scenario: Scenario) -> CriterionResult:
    if step.error is not None:
        return CriterionResult(4, PROVIDER_ERROR, step.error)
    text = step.reply.lower()
    for token in ("takeoff", "land"):
        if token not in text:
            return CriterionResult(4, SEMANTIC_ERROR, f"no {token} vocabulary")
    for c in (scenario.map.start, scenario.map.end):
        if str(c) not in step.reply:
            return CriterionResult(4, SEMANTIC_ERROR, f"endpoint {c} not mentioned")
    return CriterionResult(4, PASS)


def _judge_commands(step, scenario: Scenario) -> CriterionResult:
    if step.error is not None:
        return CriterionResult(5, PROVIDER_ERROR, step.error)
    try:
        seq = cmd.parse_command_text(step.reply)
    except cmd.CommandParseError as exc:
        return CriterionResult(5, FORMAT_ERROR, str(exc))
    try:
        flown = cmd.simulate_commands(seq, scenario.map.start, scenario.map)
    except (cmd.MalformedSequence, cmd.CollisionOrEscape) as exc:
        return CriterionResult(5, SEMANTIC_ERROR, str(exc))
    if flown.end != scenario.map.end:
        return CriterionResult(
            5, SEMANTIC_ERROR,
            f"flight ends at {flown.end}, not {scenario.map.end}")
    return CriterionResult(5, PASS)


def judge(transcript: ProtocolTranscript, scenario: Scenario) -> list[CriterionResult]:
    """Score one protocol transcript against the five criteria."""
    return [
        _judge_map_understood(transcript.step(1), scenario),
        _judge_lunch_zone(transcript.step(3), scenario),
        _judge_flock_zone(transcript.step(4), scenario),
        _judge_briefing(transcript.step(5), scenario),
        _judge_commands(transcript.step(6), scenario),
    ]


# ---------------------------------------------------------------------------
# Human overrides (auditing disagreements with the automated judge)

def load_overrides(path) -> dict:
    """{"overrides": [{"model", "scenario", "criterion", "verdict", "note"}]}"""
    with open(path) as f:
        doc = json.load(f)
    table = {}
    for entry in doc.get("overrides", []):
        key = (entry["model"], entry["scenario"], int(entry["criterion"]))
        table[key] = (entry["verdict"], entry.get("note", "human override"))
    return table


def apply_overrides(report: EvalReport, overrides: dict) -> EvalReport:
    scenario_name = report.scenario_meta.get("name", "")
    rows = []
    for row in report.rows:
        results = []
        for res in row.results:
            key = (row.model_id, scenario_name, res.id)
            if key in overrides:
                verdict, note = overrides[key]
                results.append(CriterionResult(res.id, verdict, note))
            else:
                results.append(res)
        rows.append(ReportRow(row.model_id, tuple(results)))
    return EvalReport(report.scenario_meta, tuple(rows))


# ---------------------------------------------------------------------------
# Report emission

def emit_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "json":
        return json.dumps({
            "scenario": report.scenario_meta,
            "rows": [{
                "model_id": row.model_id,
                "results": [{"id": r.id, "verdict": r.verdict, "detail": r.detail}
                            for r in row.results],
            } for row in report.rows],
        }, indent=2)
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    meta = report.scenario_meta
    lines = [
        f"# Evaluation report: {meta.get('name', 'scenario')}",
        "",
        f"Scenario: {meta.get('width')}x{meta.get('height')} grid,"
        f" {meta.get('n_obstacles')} obstacles"
        + (f", seed {meta['seed']}" if meta.get("seed") is not None else ""),
        "",
        "| Model | 1 | 2 | 3 | 4 | 5 |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for row in report.rows:
        cells = " | ".join(VERDICT_CELLS[r.verdict] for r in row.results)
        lines.append(f"| {row.model_id} | {cells} |")
    lines.append("")
    return "\n".join(lines)


def report_from_json(text: str) -> EvalReport:
    doc = json.loads(text)
    rows = tuple(
        ReportRow(row["model_id"], tuple(
            CriterionResult(r["id"], r["verdict"], r.get("detail", ""))
            for r in row["results"]))
        for row in doc["rows"])
    return EvalReport(doc["scenario"], rows)


def scenario_meta(scenario: Scenario) -> dict:
    return {
        "name": scenario.name,
        "seed": scenario.seed,
        "width": scenario.map.width,
        "height": scenario.map.height,
        "n_obstacles": len(scenario.map.obstacles),
    }


# ---------------------------------------------------------------------------
# Benchmark driver

MOCK_PREFIX = "mock:"


def _resolve_provider(profile: ProviderProfile, scenario: Scenario,
                      replay_dir=None):
    if replay_dir is not None:
        return ReplayProvider(Path(replay_dir) / f"{profile.id}.jsonl")
    if profile.endpoint.startswith(MOCK_PREFIX):
        kind = profile.endpoint[len(MOCK_PREFIX):]
        replies = perfect_replies(scenario)
        if kind in ("perfect", ""):
            return ScriptedProvider(replies)
        if kind == "corrupt-step3":
            return ScriptedProvider(corrupt_step3(replies))
        raise ValueError(f"unknown mock provider {profile.endpoint!r}")
    return HttpChatProvider(profile)


def run_benchmark(profiles, scenario: Scenario,
                  replay_dir=None, record_dir=None,
                  params: ChatParams | None = None,
                  overrides: dict | None = None,
                  max_workers: int = 4) -> EvalReport:
    """Run the protocol for every provider and judge, merging by model id."""
    params = params or ChatParams()

    def one(profile: ProviderProfile) -> ReportRow:
        provider = _resolve_provider(profile, scenario, replay_dir)
        recorder = None
        if record_dir is not None:
            path = Path(record_dir) / f"{profile.id}.jsonl"
            path.unlink(missing_ok=True)
            recorder = TranscriptRecorder(path)
        session = ChatSession(profile, provider, params=params, recorder=recorder)
        transcript = run_protocol(session, scenario)
        return ReportRow(profile.model_id, tuple(judge(transcript, scenario)))

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(one, profiles))
    rows.sort(key=lambda r: r.model_id)
    report = EvalReport(scenario_meta(scenario), tuple(rows))
    if overrides:
        report = apply_overrides(report, overrides)
    return report
