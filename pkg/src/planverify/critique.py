"""Judge findings and the parser for the ACTION/ANNOTATION reply format.

A judge reply looks like::

    ACTION: Driver.PickUp('RemoteControl')
    ANNOTATION: Picks up the remote. #REMOVE: not needed for cooking task
    ACTION: Driver.ToggleOn('Microwave')
    ANNOTATION: Starts heating, needed.
    #MISSING: Driver.Place('Plate') to serve the food

Each ``#REMOVE:`` inside an ANNOTATION flags that block's action; every
``#MISSING:`` line becomes an omission flag. Tags are case-insensitive.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import MalformedOutput, ParseError
from .matching import norm_description
from .plan_model import Plan, parse_action

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Remove:
    index: int
    stable_id: int
    reason: str

    def to_dict(self) -> dict:
        return {"type": "REMOVE", "index": self.index, "stable_id": self.stable_id, "reason": self.reason}


@dataclass(frozen=True)
class Missing:
    """An omission flag.

    ``insert_after`` is a position in the judged plan (0 means before the
    first action); ``anchor_id`` is the stable id found at that position so
    the flag survives later edits.
    """

    description: str
    insert_after: int | None = None
    anchor_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "type": "MISSING",
            "description": self.description,
            "insert_after": self.insert_after,
            "anchor_id": self.anchor_id,
        }


Critique = Union[Remove, Missing]


@dataclass(frozen=True)
class CritiqueSet:
    critiques: tuple[Critique, ...] = ()
    raw_text: str = ""
    warnings: tuple[str, ...] = ()
    fail_open: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "critiques", tuple(self.critiques))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def __len__(self) -> int:
        return len(self.critiques)

    def __bool__(self) -> bool:
        return bool(self.critiques)

    @property
    def removes(self) -> list[Remove]:
        return [c for c in self.critiques if isinstance(c, Remove)]

    @property
    def missings(self) -> list[Missing]:
        return [c for c in self.critiques if isinstance(c, Missing)]

    def to_dict(self) -> dict:
        return {
            "critiques": [c.to_dict() for c in self.critiques],
            "raw_text": self.raw_text,
            "warnings": list(self.warnings),
            "fail_open": self.fail_open,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CritiqueSet:
        items: list[Critique] = []
        for c in d.get("critiques", []):
            if c["type"] == "REMOVE":
                items.append(Remove(c["index"], c["stable_id"], c["reason"]))
            else:
                items.append(Missing(c["description"], c.get("insert_after"), c.get("anchor_id")))
        return cls(tuple(items), d.get("raw_text", ""), tuple(d.get("warnings", [])), d.get("fail_open", False))


EMPTY = CritiqueSet()

# Line starts may carry markdown decoration or numbering: "**ACTION:**", "2. ACTION:".
_DECOR = r"[ \t>*_\-]*(?:\d+[.)][ \t]*)?[*_]*"
_ACTION_RE = re.compile(rf"^{_DECOR}ACTION[*_]*[ \t]*:[*_]*[ \t]*(.*)$", re.IGNORECASE)
_ANNOT_RE = re.compile(rf"^{_DECOR}ANNOTATION[*_]*[ \t]*:[*_]*[ \t]*(.*)$", re.IGNORECASE)
_REMOVE_TAG = re.compile(r"#REMOVE\s*:", re.IGNORECASE)
_MISSING_TAG = re.compile(r"#MISSING\s*:", re.IGNORECASE)
_INDEX_PREFIX = re.compile(r"^\s*(\d+)\s*[.):\-]\s*")
_DSL_CALL = re.compile(r"(?:Driver|Commander)\.[A-Z][A-Za-z0-9]*\([^()]*\)")
_BEFORE = re.compile(r"\bbefore\b\s*[\"'`]?", re.IGNORECASE)


def _clean(text: str) -> str:
    text = " ".join(text.split())
    return text.strip(" \t\"[]`*")


def _action_key(text: str) -> tuple[int | None, str | None]:
    """Return (explicit index prefix, canonical action text) for an ACTION line."""
    s = text.strip().strip("[]`*\"").strip()
    idx = None
    m = _INDEX_PREFIX.match(s)
    if m:
        idx = int(m.group(1))
        s = s[m.end():]
    call = _DSL_CALL.search(s)
    candidate = call.group() if call else s
    try:
        return idx, parse_action(candidate).canonical
    except ParseError:
        return idx, None


def _bind(plan: Plan, canonical: str | None, idx: int | None) -> int | None:
    """Position of the unique plan action matching ``canonical``, if any."""
    if canonical is None:
        return None
    hits = [i for i, line in enumerate(plan.canonical_lines, start=1) if line == canonical]
    if len(hits) == 1:
        return hits[0]
    if len(hits) > 1 and idx in hits:
        return idx
    return None


@dataclass
class _Block:
    action_text: str
    body: list[str] = field(default_factory=list)


def _split_missing(line: str) -> tuple[str, list[str]]:
    """Split a line into (text before the first #MISSING tag, missing descriptions)."""
    parts = _MISSING_TAG.split(line)
    return parts[0], [p for p in parts[1:]]


def _resolve_missing(plan: Plan, description: str) -> Missing:
    n = len(plan)
    m = _BEFORE.search(description)
    if m:
        call = _DSL_CALL.match(description, m.end()) or _DSL_CALL.search(description, m.end())
        if call:
            _, canon = _action_key(call.group())
            pos = _bind(plan, canon, None)
            if pos is not None:
                anchor = plan.actions[pos - 2].stable_id if pos > 1 else None
                return Missing(description, pos - 1, anchor)
    anchor = plan.actions[-1].stable_id if n else None
    return Missing(description, n, anchor)


def parse_judge_output(text: str, plan: Plan, strict: bool = True) -> CritiqueSet:
    """Parse a judge reply against the exact plan the judge was shown.

    Raises :class:`MalformedOutput` when a reply has neither ACTION blocks nor
    tags and ``strict`` is set. Recoverable problems land in ``warnings``.
    """
    blocks: list[_Block] = []
    missing_descs: list[str] = []
    preamble_removes = 0
    current: _Block | None = None

    for raw in text.splitlines():
        line, missing = _split_missing(raw)
        for d in missing:
            d = _clean(d)
            if d:
                missing_descs.append(d)
        m = _ACTION_RE.match(line)
        if m:
            current = _Block(m.group(1))
            blocks.append(current)
            continue
        a = _ANNOT_RE.match(line)
        body = a.group(1) if a else line
        if current is not None:
            current.body.append(body)
        elif _REMOVE_TAG.search(body):
            preamble_removes += 1

    warnings: list[str] = []
    if not blocks and not missing_descs and not preamble_removes:
        if strict:
            raise MalformedOutput("reply has no ACTION blocks and no #REMOVE/#MISSING tags")
        return CritiqueSet((), text, ("no ACTION blocks or tags found",))

    n = len(plan)
    if blocks and len(blocks) != n:
        warnings.append(f"block count mismatch: {len(blocks)} ACTION blocks for {n} actions")
    if preamble_removes:
        warnings.append(f"{preamble_removes} #REMOVE tag(s) outside any ACTION block dropped")

    critiques: list[Critique] = []
    for k, block in enumerate(blocks, start=1):
        joined = "\n".join(block.body)
        tags = list(_REMOVE_TAG.finditer(joined))
        if not tags:
            continue
        reasons = []
        for t, nxt in zip(tags, tags[1:] + [None]):
            chunk = joined[t.end(): nxt.start() if nxt else len(joined)]
            reason = _clean(chunk)
            if reason:
                reasons.append(reason)
        reason = "; ".join(reasons) or "(no reason given)"
        idx, canon = _action_key(block.action_text)
        pos = _bind(plan, canon, idx)
        if pos is None:
            if k <= n:
                pos = k
            else:
                msg = f"unbound #REMOVE in ACTION block {k} ({block.action_text.strip()!r}) dropped"
                log.warning(msg)
                warnings.append(msg)
                continue
        critiques.append(Remove(pos, plan.actions[pos - 1].stable_id, reason))  # type: ignore[arg-type]

    for d in missing_descs:
        critiques.append(_resolve_missing(plan, d))

    for w in warnings:
        log.debug("parse warning: %s", w)
    return CritiqueSet(tuple(critiques), text, tuple(warnings))


def normalize_critiques(cs: CritiqueSet) -> CritiqueSet:
    """Merge duplicate findings; Removes come first, ascending by index."""
    removes: dict[int, Remove] = {}
    missing: list[Missing] = []
    seen: set[str] = set()
    for c in cs.critiques:
        if isinstance(c, Remove):
            prev = removes.get(c.index)
            if prev is None:
                removes[c.index] = c
            elif c.reason not in prev.reason.split("; "):
                removes[c.index] = Remove(prev.index, prev.stable_id, f"{prev.reason}; {c.reason}")
        else:
            key = norm_description(c.description)
            if key not in seen:
                seen.add(key)
                missing.append(c)
    ordered: list[Critique] = [removes[i] for i in sorted(removes)]
    ordered.extend(missing)
    return CritiqueSet(tuple(ordered), cs.raw_text, cs.warnings, cs.fail_open)
