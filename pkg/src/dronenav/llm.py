"""Provider-agnostic chat sessions, map extraction, and the six-turn protocol.

Providers speak the OpenAI-compatible chat-completion HTTP shape; mocks and
recorded-transcript replays implement the same one-method interface so the
whole stack runs offline. API keys are read from the environment at call
time and never stored on sessions or written to transcripts.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .mapping import GridMap, MapError, parse_map, serialize_map


class ProviderError(Exception):
    pass


class ProviderTimeout(ProviderError):
    """Transport failure or timeout that survived one retry."""


class ProviderRejected(ProviderError):
    """The provider refused the request (auth, quota, bad request)."""


class ContextOverflow(ProviderError):
    """Estimated transcript tokens exceed the profile budget."""


@dataclass(frozen=True)
class ProviderProfile:
    id: str
    endpoint: str
    model_id: str
    auth_env_var: str = ""
    context_tokens: int = 8192

    def __post_init__(self):
        if self.context_tokens <= 0:
            raise ValueError("context_tokens must be positive")


@dataclass(frozen=True)
class ChatParams:
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout: float = 60.0


def estimate_tokens(*texts: str) -> int:
    """Cheap character-based budget estimate used by the overflow guard."""
    chars = sum(len(t) for t in texts)
    return math.ceil(chars / 4)


class HttpChatProvider:
    """OpenAI-compatible /chat/completions client with a single retry."""

    def __init__(self, profile: ProviderProfile):
        self.profile = profile

    def complete(self, messages, params: ChatParams) -> str:
        url = self.profile.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.profile.auth_env_var, "") if self.profile.auth_env_var else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.profile.model_id,
            "messages": list(messages),
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        last_exc: Exception | None = None
        for _ in range(2):  # one retry on transient transport failure
            try:
                resp = requests.post(url, json=payload, headers=headers,
                                     timeout=params.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_exc = exc
                continue
            if resp.status_code in (401, 403, 429):
                raise ProviderRejected(f"{self.profile.id}: HTTP {resp.status_code}")
            if resp.status_code != 200:
                raise ProviderRejected(
                    f"{self.profile.id}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise ProviderRejected(f"{self.profile.id}: malformed response: {exc}")
        raise ProviderTimeout(f"{self.profile.id}: {last_exc}")


class ScriptedProvider:
    """Returns canned replies in order; the workhorse of offline tests."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, messages, params: ChatParams) -> str:
        if self.calls >= len(self.replies):
            raise ProviderRejected("scripted provider ran out of replies")
        reply = self.replies[self.calls]
        self.calls += 1
        if isinstance(reply, Exception):
            raise reply
        return reply


class ReplayProvider:
    """Replays a recorded transcript file as if it were a live provider."""

    def __init__(self, path: Path):
        self.turns = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    self.turns.append(json.loads(line))
        self._assistant = [t for t in self.turns
                           if t.get("role") in ("assistant", "provider_error")]
        self.calls = 0

    def complete(self, messages, params: ChatParams) -> str:
        if self.calls >= len(self._assistant):
            raise ProviderRejected("replay transcript exhausted")
        turn = self._assistant[self.calls]
        self.calls += 1
        if turn["role"] == "provider_error":
            raise ProviderTimeout(turn.get("content", "recorded provider error"))
        return turn["content"]


class TranscriptRecorder:
    """Append-only JSONL sink, one JSON document per turn."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, role: str, content: str) -> None:
        with open(self.path, "a") as f:
            f.write(json.dumps({"role": role, "content": content}) + "\n")


class ChatSession:
    """One conversation with one provider; transcript grows append-only."""

    def __init__(self, profile: ProviderProfile, provider,
                 params: ChatParams | None = None,
                 system: str | None = None,
                 recorder: TranscriptRecorder | None = None):
        self.profile = profile
        self.provider = provider
        self.params = params or ChatParams()
        self.transcript: list[dict] = []
        self.recorder = recorder
        if system:
            self.transcript.append({"role": "system", "content": system})
            if recorder:
                recorder.write("system", system)

    def send(self, message: str) -> str:
        if not message:
            raise ValueError("message must be non-empty")
        budget = estimate_tokens(message, *(t["content"] for t in self.transcript))
        if budget > self.profile.context_tokens:
            raise ContextOverflow(
                f"~{budget} tokens exceed the {self.profile.context_tokens} budget")
        messages = self.transcript + [{"role": "user", "content": message}]
        reply = self.provider.complete(messages, self.params)
        self.transcript.append({"role": "user", "content": message})
        self.transcript.append({"role": "assistant", "content": reply})
        if self.recorder:
            self.recorder.write("user", message)
            self.recorder.write("assistant", reply)
        return reply

    def record_error(self, detail: str) -> None:
        if self.recorder:
            self.recorder.write("provider_error", detail)


# ---------------------------------------------------------------------------
# Map extraction from free-form replies

@dataclass(frozen=True)
class ExtractionResult:
    status: str  # "ok" | "format_error" | "provider_error"
    grid: GridMap | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


_MAX_BRACE_CANDIDATES = 200


def _balanced_blocks(text: str) -> list[str]:
    """Brace-balanced substrings from every opening brace, quote-aware.

    Scanning from each "{" keeps stray braces in surrounding prose from
    hiding a later well-formed document.
    """
    blocks = []
    opens = [i for i, ch in enumerate(text) if ch == "{"]
    for start in opens[:_MAX_BRACE_CANDIDATES]:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    blocks.append(text[start:i + 1])
                    break
    return blocks


_FENCE_START = "```"


def _fenced_blocks(text: str) -> list[str]:
    blocks = []
    pos = 0
    while True:
        open_idx = text.find(_FENCE_START, pos)
        if open_idx < 0:
            break
        body_start = text.find("\n", open_idx)
        if body_start < 0:
            break
        close_idx = text.find(_FENCE_START, body_start)
        if close_idx < 0:
            break
        blocks.append(text[body_start + 1:close_idx].strip())
        pos = close_idx + len(_FENCE_START)
    return blocks


def extract_map(reply: str) -> ExtractionResult:
    """Find and parse the last schema-valid map document in a reply.

    Candidates (fenced code blocks and brace-balanced runs) are tried from
    last to first; the first successful parse wins. Failures come back as
    values, never exceptions.
    """
    candidates: list[str] = []
    for c in _fenced_blocks(reply) + _balanced_blocks(reply):
        if c and c not in candidates:
            candidates.append(c)
    first_diag = ""
    for candidate in sorted(candidates, key=reply.rindex, reverse=True):
        try:
            return ExtractionResult("ok", parse_map(candidate))
        except MapError as exc:
            if not first_diag:
                first_diag = str(exc)
    return ExtractionResult(
        "format_error", detail=first_diag or "no JSON map document found")


# ---------------------------------------------------------------------------
# The six-turn map-adjustment protocol

@dataclass(frozen=True)
class ProtocolStep:
    index: int  # 1-based
    prompt: str
    reply: str | None = None
    error: str | None = None
    extraction: ExtractionResult | None = None


@dataclass(frozen=True)
class ProtocolTranscript:
    model_id: str
    steps: tuple[ProtocolStep, ...] = field(default_factory=tuple)

    def step(self, index: int) -> ProtocolStep:
        return self.steps[index - 1]


def path_text(path) -> str:
    return "[" + ", ".join(str(c) for c in path.waypoints) + "]"


def protocol_prompts(scenario) -> list[str]:
    """The six user turns, instantiated with the scenario's map and context."""
    grid = scenario.map
    map_json = serialize_map(grid)
    return [
        (f"Here is a grid map in JSON format:\n{map_json}\n"
         "Please analyze this map: describe the grid dimensions, the start"
         " and end cells, and every obstacle by name."),
        ("Next you will receive new situational descriptions. For each one,"
         " update the map accordingly and reply with a complete map in the"
         " same JSON format."),
        (f"It is break time at the {scenario.lunch_break_target}, so the area"
         f" within {scenario.lunch_break_margin} squares around it must be"
         " avoided. Produce the updated map in the original JSON format."),
        (f"We have been notified of a large flock of birds at"
         f" {scenario.flock_anchor}, covering an area of about"
         f" {scenario.flock_cells} grids. This area must be avoided. Produce"
         " the updated map in the original JSON format."),
        (f"The path planning algorithm produced this path:"
         f" {path_text(scenario.reference_path)}. Acting as a professional"
         " drone pilot, translate this output into a navigation briefing in"
         " plain language, covering takeoff through landing."),
        ("Now produce the exact control command sequence to fly that path."
         " Reply with one command per line using only these words:"
         " preflight, takeoff, hover, forward <n>, left, right, around,"
         " land, postflight. The drone starts facing the positive y"
         " direction; include takeoff at the start and landing at the end."),
    ]


EXTRACTION_STEPS = (3, 4)


def run_protocol(session: ChatSession, scenario) -> ProtocolTranscript:
    """Issue all six turns in order; later steps run even if earlier fail."""
    steps = []
    for index, prompt in enumerate(protocol_prompts(scenario), start=1):
        reply = None
        error = None
        try:
            reply = session.send(prompt)
        except ProviderError as exc:
            error = f"{type(exc).__name__}: {exc}"
            session.record_error(error)
        extraction = None
        if index in EXTRACTION_STEPS:
            if reply is None:
                extraction = ExtractionResult("provider_error", detail=error or "")
            else:
                extraction = extract_map(reply)
        steps.append(ProtocolStep(index, prompt, reply, error, extraction))
    return ProtocolTranscript(session.profile.model_id, tuple(steps))


# ---------------------------------------------------------------------------
# Provider configuration files

def load_provider_profiles(path) -> list[ProviderProfile]:
    """Read a provider config file: {"providers": [{...profile...}]}."""
    with open(path) as f:
        doc = json.load(f)
    profiles = []
    for entry in doc.get("providers", []):
        profiles.append(ProviderProfile(
            id=entry["id"],
            endpoint=entry["endpoint"],
            model_id=entry.get("model_id", entry["id"]),
            auth_env_var=entry.get("auth_env_var", ""),
            context_tokens=int(entry.get("context_tokens", 8192)),
        ))
    return profiles
