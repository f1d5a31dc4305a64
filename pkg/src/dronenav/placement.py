"""Edge/cloud placement model: memory feasibility and end-to-end latency.

Latency to serve one request from a model hosted at a tier:

    sum of link RTTs from the user to that tier
    + prompt_tokens * params_bn / prefill_rate
    + output_tokens * params_bn / decode_rate

Rates are tokens/s normalized per billion parameters, so latency is
strictly monotone in parameter count at a fixed node and task. All numbers
live in an editable config file; the shipped defaults are illustrative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import yaml

RU = "RU"
DU = "DU"
CU = "CU"
TIERS = (RU, DU, CU)

DEFAULT_BYTES_PER_PARAM = 2.0

PLACED = "placed"
UNPLACEABLE = "unplaceable"
UNASSESSABLE = "unassessable"


class UnknownSize(Exception):
    """The model's parameter count is not published."""


@dataclass(frozen=True)
class ModelProfile:
    name: str
    params_bn: float | None  # billions of parameters; None when unknown
    context_tokens: int
    nation: str = ""

    def __post_init__(self):
        if self.params_bn is not None and self.params_bn <= 0:
            raise ValueError("params_bn must be positive when known")


@dataclass(frozen=True)
class TierNode:
    tier: str
    memory_gb: float
    prefill_rate: float  # tokens/s per billion params
    decode_rate: float

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if min(self.memory_gb, self.prefill_rate, self.decode_rate) <= 0:
            raise ValueError("memory and rates must be positive")


@dataclass(frozen=True)
class TaskClass:
    name: str
    prompt_tokens: int
    output_tokens: int
    latency_budget: float  # seconds

    def __post_init__(self):
        if self.latency_budget <= 0:
            raise ValueError("latency budget must be positive")


@dataclass(frozen=True)
class Topology:
    nodes: dict  # tier name -> TierNode
    link_latency: dict  # "ue_ru" | "ru_du" | "du_cu" -> RTT seconds
    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM

    def rtt_to(self, tier: str) -> float:
        hops = {RU: ("ue_ru",), DU: ("ue_ru", "ru_du"),
                CU: ("ue_ru", "ru_du", "du_cu")}[tier]
        return sum(self.link_latency[h] for h in hops)


def memory_feasible(model: ModelProfile, node: TierNode,
                    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM) -> bool:
    """params_bn * bytes/param gives the working-set size in GB directly."""
    if model.params_bn is None:
        raise UnknownSize(f"{model.name}: parameter count unknown")
    return model.params_bn * bytes_per_param <= node.memory_gb


def estimate_latency(model: ModelProfile, node: TierNode, task: TaskClass,
                     topo: Topology) -> float:
    if model.params_bn is None:
        raise UnknownSize(f"{model.name}: parameter count unknown")
    compute = (task.prompt_tokens * model.params_bn / node.prefill_rate
               + task.output_tokens * model.params_bn / node.decode_rate)
    return topo.rtt_to(node.tier) + compute


@dataclass(frozen=True)
class Placement:
    model: str
    task: str
    status: str  # placed | unplaceable | unassessable
    tier: str | None = None
    latency: float | None = None
    budget_margin: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class PlacementReport:
    placements: tuple[Placement, ...] = field(default_factory=tuple)


def assign(models, tasks, topo: Topology) -> PlacementReport:
    """Lowest-latency feasible tier inside the budget for every pair.

    Memory-infeasible tiers are never selected. Over-budget pairs are
    flagged unplaceable but still report their best feasible tier so the
    overshoot is visible.
    """
    placements = []
    for model in models:
        for task in tasks:
            if model.params_bn is None:
                placements.append(Placement(
                    model.name, task.name, UNASSESSABLE,
                    detail="parameter count unknown"))
                continue
            best: tuple[float, str] | None = None
            for tier in TIERS:
                node = topo.nodes[tier]
                if not memory_feasible(model, node, topo.bytes_per_param):
                    continue
                latency = estimate_latency(model, node, task, topo)
                if best is None or latency < best[0]:
                    best = (latency, tier)
            if best is None:
                placements.append(Placement(
                    model.name, task.name, UNPLACEABLE,
                    detail="no tier has enough memory"))
                continue
            latency, tier = best
            margin = task.latency_budget - latency
            status = PLACED if margin >= 0 else UNPLACEABLE
            detail = "" if margin >= 0 else (
                f"best tier {tier} exceeds the {task.latency_budget:.3f}s budget")
            placements.append(Placement(
                model.name, task.name, status, tier, latency, margin, detail))
    return PlacementReport(tuple(placements))


# ---------------------------------------------------------------------------
# Config file and report emission

def load_config(path) -> tuple[list[ModelProfile], list[TaskClass], Topology]:
    with open(path) as f:
        doc = yaml.safe_load(f)
    models = [ModelProfile(
        name=m["name"],
        params_bn=m.get("params_bn"),
        context_tokens=int(m.get("context_tokens", 8192)),
        nation=m.get("nation", ""),
    ) for m in doc["models"]]
    tasks = [TaskClass(
        name=t["name"],
        prompt_tokens=int(t["prompt_tokens"]),
        output_tokens=int(t["output_tokens"]),
        latency_budget=float(t["latency_budget"]),
    ) for t in doc["tasks"]]
    nodes = {n["tier"]: TierNode(
        tier=n["tier"],
        memory_gb=float(n["memory_gb"]),
        prefill_rate=float(n["prefill_rate"]),
        decode_rate=float(n["decode_rate"]),
    ) for n in doc["nodes"]}
    topo = Topology(
        nodes=nodes,
        link_latency={k: float(v) for k, v in doc["link_latency"].items()},
        bytes_per_param=float(doc.get("bytes_per_param", DEFAULT_BYTES_PER_PARAM)))
    return models, tasks, topo


def _fmt(value, pattern="{:.4f}") -> str:
    return "-" if value is None else pattern.format(value)


def emit_placement_report(report: PlacementReport, fmt: str = "markdown") -> str:
    if fmt == "json":
        return json.dumps({"placements": [{
            "model": p.model, "task": p.task, "status": p.status,
            "tier": p.tier, "latency": p.latency,
            "budget_margin": p.budget_margin, "detail": p.detail,
        } for p in report.placements]}, indent=2)
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "# Placement report",
        "",
        "| Model | Task | Status | Tier | Latency (s) | Margin (s) |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for p in report.placements:
        lines.append(
            f"| {p.model} | {p.task} | {p.status} | {p.tier or '-'}"
            f" | {_fmt(p.latency)} | {_fmt(p.budget_margin)} |")
    lines.append("")
    return "\n".join(lines)
