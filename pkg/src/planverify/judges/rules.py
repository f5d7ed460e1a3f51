"""Deterministic rule baseline.

Removal-only. Rules run in order and each hit becomes a Remove critique:

R1  adjacent exact duplicate: flag the second action
R2  adjacent ToggleOn/ToggleOff pair (either order) on the same object: flag both
R3  ToggleOff(x) with no earlier ToggleOn(x): flag the ToggleOff
R4  PickUp(x) where x never appears in a later action: flag the PickUp
"""

from __future__ import annotations

from collections import Counter
from typing import NamedTuple

from ..critique import CritiqueSet, Remove, normalize_critiques
from ..plan_model import Plan

RULES = ("R1", "R2", "R3", "R4")
_INVERSE = {("ToggleOn", "ToggleOff"), ("ToggleOff", "ToggleOn")}


class RuleHit(NamedTuple):
    rule: str
    position: int
    reason: str


def rule_hits(plan: Plan) -> list[RuleHit]:
    acts = plan.actions
    hits: list[RuleHit] = []

    for j in range(1, len(acts)):
        if acts[j].same_call(acts[j - 1]):
            hits.append(RuleHit("R1", j + 1, f"R1 adjacent duplicate: repeats {acts[j].canonical}"))

    for j in range(len(acts) - 1):
        a, b = acts[j], acts[j + 1]
        if a.actor == b.actor and (a.verb, b.verb) in _INVERSE and a.args == b.args:
            why = f"R2 inverse toggle pair: {a.canonical} then {b.canonical} cancel out"
            hits.append(RuleHit("R2", j + 1, why))
            hits.append(RuleHit("R2", j + 2, why))

    turned_on: set[tuple] = set()
    for j, a in enumerate(acts):
        if a.verb == "ToggleOn":
            turned_on.add(a.args)
        elif a.verb == "ToggleOff" and a.args not in turned_on:
            hits.append(RuleHit("R3", j + 1, f"R3 premature toggle-off: {a.canonical} before any ToggleOn"))

    # objects mentioned strictly after each position
    later: list[set[str]] = [set() for _ in acts]
    seen: set[str] = set()
    for j in range(len(acts) - 1, -1, -1):
        later[j] = set(seen)
        seen.update(acts[j].objects)
    for j, a in enumerate(acts):
        if a.verb == "PickUp":
            unused = [x for x in a.objects if x not in later[j]]
            if unused:
                hits.append(RuleHit("R4", j + 1, f"R4 orphan pickup: {unused[0]} is never used afterwards"))
    return hits


def rule_counts(plan: Plan) -> Counter:
    return Counter(h.rule for h in rule_hits(plan))


def rule_judge_evaluate(plan: Plan) -> CritiqueSet:
    crits = [Remove(h.position, plan.actions[h.position - 1].stable_id, h.reason) for h in rule_hits(plan)]  # type: ignore[arg-type]
    return normalize_critiques(CritiqueSet(tuple(crits)))


class RuleJudge:
    name = "rules"
    label = "rules/R1-R4"

    def evaluate(self, goal: str, plan: Plan) -> CritiqueSet:
        return rule_judge_evaluate(plan)
