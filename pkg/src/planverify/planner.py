"""Plan-update operator: apply a critique set to a plan."""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Protocol

from .critique import CritiqueSet, Missing
from .errors import InserterParseError, ParseError, StaleCritique
from .judges.chat import ChatClient
from .judges.prompts import INSERTER_TEMPLATE, actions_text
from .plan_model import Action, Plan, is_comment_or_blank, parse_action, reindex

log = logging.getLogger(__name__)

_NUMBERING = re.compile(r"^\s*(?:[-*]\s+|\d+[.)]\s*)")


class Inserter(Protocol):
    label: str

    def propose(self, goal: str, plan: Plan, missing: Missing) -> list[str]: ...


class LLMInserter:
    """Asks the planner model for the action lines that fill an omission."""

    def __init__(self, client: ChatClient):
        self.client = client

    @property
    def label(self) -> str:
        return f"llm/{self.client.label}"

    def propose(self, goal: str, plan: Plan, missing: Missing) -> list[str]:
        system, user = INSERTER_TEMPLATE.render_parts(
            goal=goal, actions_text=actions_text(plan), description=missing.description
        )
        reply = self.client.complete([{"role": "system", "content": system}, {"role": "user", "content": user}])
        return reply.content.splitlines()


class ScriptInserter:
    """Returns canned proposals in order; an exhausted script proposes nothing."""

    label = "script"

    def __init__(self, proposals: Sequence[Sequence[str]]):
        self.proposals = [list(p) for p in proposals]
        self.calls = 0

    def propose(self, goal: str, plan: Plan, missing: Missing) -> list[str]:
        i = self.calls
        self.calls += 1
        return list(self.proposals[i]) if i < len(self.proposals) else []


@dataclass(frozen=True)
class Revision:
    removed: tuple[int, ...]
    inserted: tuple[tuple[int, Action], ...]
    resulting_plan: Plan
    unresolved: tuple[Missing, ...] = ()
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "removed": list(self.removed),
            "inserted": [{"position": p, "id": a.stable_id, "action": a.canonical} for p, a in self.inserted],
            "unresolved": [m.to_dict() for m in self.unresolved],
            "warnings": list(self.warnings),
        }


def _proposal_lines(lines: Sequence[str]) -> list[str]:
    out = []
    for line in lines:
        s = line.strip()
        if s.startswith("```") or is_comment_or_blank(s):
            continue
        out.append(_NUMBERING.sub("", s))
    return out


def resolve_missing(
    inserter: Inserter, plan: Plan, missing: Missing, first_id: int | None = None
) -> list[tuple[int, Action]]:
    """Ask ``inserter`` for concrete actions and place them after ``insert_after``.

    Returned positions are in the coordinates of ``plan``; new actions get
    fresh ids starting at ``first_id`` (default ``plan.next_id``).
    """
    lines = _proposal_lines(inserter.propose(plan.goal, plan, missing))
    errors = []
    parsed: list[Action] = []
    for n, line in enumerate(lines, start=1):
        try:
            parsed.append(parse_action(line))
        except ParseError as e:
            e.line = n
            errors.append(e)
    if errors:
        raise InserterParseError(f"inserter proposed {len(errors)} malformed line(s) for {missing.description!r}", errors)
    after = len(plan) if missing.insert_after is None else missing.insert_after
    next_id = plan.next_id if first_id is None else first_id
    out = []
    for k, a in enumerate(parsed):
        pos = after + 1 + k
        out.append((pos, replace(a, stable_id=next_id + k, index=pos)))
    return out


def apply_critiques(plan: Plan, cs: CritiqueSet, inserter: Inserter | None = None) -> Revision:
    """Delete every Remove target by stable id, then handle omissions.

    Without an inserter each Missing is kept as an unresolved omission and
    leaves the plan unchanged.
    """
    present = set(plan.ids)
    removed: list[int] = []
    for c in cs.removes:
        if c.stable_id not in present:
            raise StaleCritique(f"REMOVE targets id {c.stable_id}, which is not in the plan")
        if c.stable_id not in removed:
            removed.append(c.stable_id)
    gone = set(removed)
    working: list[Action] = [a for a in plan.actions if a.stable_id not in gone]

    unresolved: list[Missing] = []
    warnings: list[str] = []
    new_ids: list[int] = []
    next_id = plan.next_id
    # last inserted id per anchor, so several proposals at one spot stay in order
    tails: dict[int | None, int] = {}
    for m in cs.missings:
        if inserter is None:
            unresolved.append(m)
            continue
        try:
            proposals = resolve_missing(inserter, plan, m, next_id)
        except InserterParseError as e:
            log.warning("%s", e)
            warnings.append(str(e))
            unresolved.append(m)
            continue
        if not proposals:
            unresolved.append(m)
            continue
        anchor = _surviving_anchor(plan, m, gone)
        after_id = tails.get(anchor, anchor)
        at = 0 if after_id is None else next(i for i, a in enumerate(working) if a.stable_id == after_id) + 1
        for k, (_, a) in enumerate(proposals):
            working.insert(at + k, a)
            new_ids.append(a.stable_id)  # type: ignore[arg-type]
        tails[anchor] = proposals[-1][1].stable_id  # type: ignore[assignment]
        next_id += len(proposals)

    result = reindex(Plan(plan.goal, tuple(working), next_id))
    inserted = tuple((result.position_of(i), result.by_id(i)) for i in new_ids)
    return Revision(tuple(removed), inserted, result, tuple(unresolved), tuple(warnings))  # type: ignore[arg-type]


def _surviving_anchor(plan: Plan, m: Missing, gone: set[int]) -> int | None:
    """Stable id to insert after, walking back past removed actions; None = start."""
    after = len(plan) if m.insert_after is None else m.insert_after
    if m.anchor_id is not None and plan.position_of(m.anchor_id) is not None:
        after = plan.position_of(m.anchor_id)  # type: ignore[assignment]
    for pos in range(after, 0, -1):
        sid = plan.actions[pos - 1].stable_id
        if sid not in gone:
            return sid
    return None
