"""Judge backends: LLM-backed, scripted replay, plus the shared protocol."""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol, Union

from ..critique import EMPTY, CritiqueSet, Missing, Remove, normalize_critiques, parse_judge_output
from ..errors import MalformedOutput, ScriptIndexError
from ..plan_model import Plan
from .chat import ChatClient
from .prompts import FORMAT_REMINDER, judge_messages

log = logging.getLogger(__name__)


class JudgeBackend(Protocol):
    name: str
    label: str

    def evaluate(self, goal: str, plan: Plan) -> CritiqueSet: ...


class LLMJudge:
    """Renders the judge prompt, calls the model and parses its reply.

    A malformed reply triggers one re-prompt with a format reminder; if that
    also fails the round fails open to an empty critique set marked
    ``fail_open``.
    """

    name = "llm"

    def __init__(self, client: ChatClient, reprompt: bool = True):
        self.client = client
        self.reprompt = reprompt

    @property
    def label(self) -> str:
        return f"llm/{self.client.label}"

    def evaluate(self, goal: str, plan: Plan) -> CritiqueSet:
        return llm_judge_evaluate(self, goal, plan)


def llm_judge_evaluate(backend: LLMJudge, goal: str, plan: Plan) -> CritiqueSet:
    messages = judge_messages(goal, plan)
    reply = backend.client.complete(messages).content
    try:
        return normalize_critiques(parse_judge_output(reply, plan))
    except MalformedOutput as first:
        if not backend.reprompt:
            return _fail_open(reply, str(first))
        retry_msgs = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": FORMAT_REMINDER},
        ]
        second = backend.client.complete(retry_msgs).content
        combined = f"{reply}\n\n--- re-prompt reply ---\n{second}"
        try:
            cs = parse_judge_output(second, plan)
        except MalformedOutput as e:
            return _fail_open(combined, str(e))
        return normalize_critiques(CritiqueSet(cs.critiques, combined, ("re-prompted after malformed reply", *cs.warnings)))


def _fail_open(raw: str, why: str) -> CritiqueSet:
    log.warning("judge reply unparseable, failing open: %s", why)
    return CritiqueSet((), raw, (f"fail-open: {why}",), fail_open=True)


def rebind(cs: CritiqueSet, plan: Plan) -> CritiqueSet:
    """Re-resolve stable-id based critiques against the current plan.

    Removes whose action is gone are dropped with a warning.
    """
    out = []
    warnings = list(cs.warnings)
    for c in cs.critiques:
        if isinstance(c, Remove):
            pos = plan.position_of(c.stable_id)
            if pos is None:
                warnings.append(f"scripted REMOVE of id {c.stable_id} not in current plan; dropped")
                continue
            out.append(Remove(pos, c.stable_id, c.reason))
        else:
            if c.anchor_id is not None and plan.position_of(c.anchor_id) is not None:
                after = plan.position_of(c.anchor_id)
            elif c.insert_after == 0:
                after = 0
            else:
                after = len(plan)
            anchor = plan.actions[after - 1].stable_id if after else None
            out.append(Missing(c.description, after, anchor))
    return CritiqueSet(tuple(out), cs.raw_text, tuple(warnings), cs.fail_open)


ScriptEntry = Union[CritiqueSet, str]


class ScriptJudge:
    """Replays a fixed sequence of judge outputs, one per call.

    Entries are either :class:`CritiqueSet` values keyed by stable id or raw
    reply strings parsed against the plan at call time. After the script runs
    out the judge returns empty sets, repeats the last entry
    (``repeat_last``), or raises (``strict``).
    """

    name = "script"

    def __init__(self, script: Sequence[ScriptEntry], strict: bool = False, repeat_last: bool = False, label: str = "script"):
        if not script:
            raise ValueError("script must not be empty")
        self.script = list(script)
        self.strict = strict
        self.repeat_last = repeat_last
        self.label = label
        self.calls = 0

    def evaluate(self, goal: str, plan: Plan) -> CritiqueSet:
        return script_judge_evaluate(self, goal, plan)

    def assert_exhausted(self) -> None:
        if self.calls != len(self.script):
            raise ScriptIndexError(f"script has {len(self.script)} entries but judge was called {self.calls} times")


def script_judge_evaluate(judge: ScriptJudge, goal: str, plan: Plan) -> CritiqueSet:
    i = judge.calls
    judge.calls += 1
    if i >= len(judge.script):
        if judge.strict:
            raise ScriptIndexError(f"script exhausted after {len(judge.script)} entries")
        if not judge.repeat_last:
            return EMPTY
        i = len(judge.script) - 1
    entry = judge.script[i]
    if isinstance(entry, str):
        return normalize_critiques(parse_judge_output(entry, plan, strict=False))
    return normalize_critiques(rebind(entry, plan))


# --- script files -----------------------------------------------------------

def round_from_dict(d: dict) -> ScriptEntry:
    if "reply" in d:
        return str(d["reply"])
    crits: list = []
    for r in d.get("remove", []):
        crits.append(Remove(0, int(r["id"]), str(r.get("reason", "scripted removal"))))
    for m in d.get("missing", []):
        after = m.get("after_id")
        crits.append(Missing(str(m["description"]), 0 if m.get("at_start") else None, after))
    return CritiqueSet(tuple(crits))


def round_to_dict(entry: ScriptEntry) -> dict:
    if isinstance(entry, str):
        return {"reply": entry}
    d: dict = {}
    if entry.removes:
        d["remove"] = [{"id": c.stable_id, "reason": c.reason} for c in entry.removes]
    if entry.missings:
        d["missing"] = [{"description": c.description, "after_id": c.anchor_id} for c in entry.missings]
    return d


@dataclass
class ScriptBook:
    """Per-episode scripts loaded from a ``script/1`` JSON file.

    Stable ids in the file are the 1-based positions of actions in the
    episode file, which is how :func:`planverify.corpus.load_episodes`
    assigns them.
    """

    episodes: dict[str, list[ScriptEntry]] = field(default_factory=dict)
    default: list[ScriptEntry] = field(default_factory=list)
    repeat_last: bool = False
    strict: bool = False
    source: str = "script"

    def judge_for(self, episode) -> ScriptJudge:
        rounds = self.episodes.get(episode.episode_id, self.default)
        if not rounds:
            rounds = [EMPTY]
        return ScriptJudge(rounds, strict=self.strict, repeat_last=self.repeat_last, label=f"script/{self.source}")

    def to_dict(self) -> dict:
        out: dict = {"schema": "script/1", "repeat_last": self.repeat_last}
        if self.default:
            out["default"] = [round_to_dict(r) for r in self.default]
        out["episodes"] = {k: [round_to_dict(r) for r in v] for k, v in self.episodes.items()}
        return out

    def save(self, path: str | os.PathLike[str]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, ensure_ascii=False)
            fh.write("\n")


def load_script_file(path: str | os.PathLike[str]) -> ScriptBook:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, list):
        data = {"default": data}
    if data.get("schema", "script/1") != "script/1":
        raise ValueError(f"{path}: unsupported script schema {data.get('schema')!r}")
    return ScriptBook(
        episodes={k: [round_from_dict(r) for r in v] for k, v in data.get("episodes", {}).items()},
        default=[round_from_dict(r) for r in data.get("default", [])],
        repeat_last=bool(data.get("repeat_last", False)),
        strict=bool(data.get("strict", False)),
        source=os.path.basename(str(path)),
    )
