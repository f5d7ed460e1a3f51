from __future__ import annotations

import sys
from decimal import Decimal
from pathlib import Path

import pytest
from hypothesis import strategies as st

from planverify.critique import CritiqueSet, Missing, Remove
from planverify.plan_model import Action, Actor, Plan, parse_plan

FIXTURES = Path(__file__).parent / "fixtures"

BATHROOM = [
    "Driver.PickUp('Soap')      // Picked up early",
    "Driver.Move(5.0)           // Multiple intervening actions",
    "Driver.Turn(90)",
    "Driver.PickUp('Sponge')",
    "Driver.Place('Sink')       // Soap finally used here",
]


def plan_of(*lines: str, goal: str = "test goal") -> Plan:
    return parse_plan(goal, list(lines))


@pytest.fixture
def bathroom() -> Plan:
    return parse_plan("Clean the bathroom", BATHROOM)


# --- hypothesis strategies -------------------------------------------------

verbs = st.from_regex(r"[A-Z][A-Za-z0-9]{0,10}", fullmatch=True)
string_args = st.text(
    alphabet=st.characters(blacklist_characters="'\n\r", blacklist_categories=("Cs",)), max_size=12
)
number_args = st.decimals(min_value=-10_000, max_value=10_000, places=3, allow_nan=False, allow_infinity=False).map(
    lambda d: Decimal(d)
)
actions = st.builds(
    Action,
    actor=st.sampled_from(list(Actor)),
    verb=verbs,
    args=st.lists(st.one_of(string_args, number_args), max_size=4).map(tuple),
)

simple_lines = st.builds(
    lambda verb, obj: f"Driver.{verb}('{obj}')",
    st.sampled_from(["PickUp", "Place", "ToggleOn", "ToggleOff", "Open", "Slice"]),
    st.sampled_from(["Mug", "Sink", "Microwave", "Bread", "Knife", "Plate"]),
)


# --- test-only reply synthesizer --------------------------------------------

def synthesize_reply(cs: CritiqueSet, plan: Plan) -> str:
    """Render a well-formed judge reply that encodes ``cs`` against ``plan``."""
    by_index = {c.index: c for c in cs.removes}
    out = []
    for i, a in enumerate(plan.actions, start=1):
        out.append(f"ACTION: {a.canonical}")
        if i in by_index:
            out.append(f"ANNOTATION: This step should go. #REMOVE: {by_index[i].reason}")
        else:
            out.append("ANNOTATION: Needed for the goal.")
    for m in cs.missings:
        out.append(f"#MISSING: {m.description}")
    return "\n".join(out)


def removes(plan: Plan, *positions: int, reason: str = "bad") -> CritiqueSet:
    return CritiqueSet(tuple(Remove(p, plan.actions[p - 1].stable_id, reason) for p in positions))


def missing(plan: Plan, description: str) -> Missing:
    return Missing(description, len(plan), plan.actions[-1].stable_id)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
