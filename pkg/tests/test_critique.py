from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planverify.critique import (
    EMPTY,
    CritiqueSet,
    Missing,
    Remove,
    normalize_critiques,
    parse_judge_output,
)
from planverify.errors import MalformedOutput

from .conftest import plan_of, simple_lines, synthesize_reply

MICROWAVE = plan_of(
    "Driver.PickUp('Mug')",
    "Driver.Open('Microwave')",
    "Driver.ToggleOff('Microwave')",
    "Driver.Place('Microwave', 'Mug')",
)


def _reply(plan, annotations: dict[int, str], tail: str = "") -> str:
    out = []
    for i, a in enumerate(plan.actions, start=1):
        out.append(f"ACTION: {a.canonical}")
        out.append(f"ANNOTATION: {annotations.get(i, 'looks good')}")
    return "\n".join(out) + ("\n" + tail if tail else "")


def test_remove_on_block_three():
    text = _reply(MICROWAVE, {3: "#REMOVE: Driver toggles off microwave before turning it on"})
    cs = parse_judge_output(text, MICROWAVE)
    assert cs.critiques == (Remove(3, 3, "Driver toggles off microwave before turning it on"),)
    assert cs.raw_text == text
    assert cs.warnings == ()


def test_no_tags_is_empty():
    cs = parse_judge_output(_reply(MICROWAVE, {}), MICROWAVE)
    assert not cs and len(cs) == 0


def test_trailing_missing():
    desc = "Task incomplete – bread sliced but sandwich not assembled"
    cs = parse_judge_output(_reply(MICROWAVE, {}, f"#MISSING: {desc}"), MICROWAVE)
    assert cs.critiques == (Missing(desc, 4, 4),)


def test_missing_before_a_call_is_anchored_there():
    cs = parse_judge_output(
        _reply(MICROWAVE, {}, "#MISSING: ToggleOn the microwave before Driver.ToggleOff('Microwave')"), MICROWAVE
    )
    (m,) = cs.missings
    assert (m.insert_after, m.anchor_id) == (2, 2)


def test_markdown_and_numbering_tolerated():
    text = (
        "Here is my review.\n"
        "1. **ACTION:** Driver.PickUp('Mug')\n"
        "**ANNOTATION:** fine\n"
        "2. **ACTION:** Driver.Open('Microwave')\n"
        "**ANNOTATION:** fine\n"
        "3. **ACTION:** Driver.ToggleOff('Microwave')\n"
        "**ANNOTATION:** #REMOVE: premature\n"
        "4. **ACTION:** Driver.Place('Microwave','Mug')\n"
        "**ANNOTATION:** fine\n"
    )
    assert parse_judge_output(text, MICROWAVE).critiques == (Remove(3, 3, "premature"),)


def test_binding_uses_canonical_text_not_block_order():
    # the judge skipped block 1, so ordinal binding would be wrong
    text = "ACTION: Driver.ToggleOff('Microwave')\nANNOTATION: #REMOVE: premature"
    cs = parse_judge_output(text, MICROWAVE)
    assert cs.critiques == (Remove(3, 3, "premature"),)
    assert any("block count" in w for w in cs.warnings)


def test_ambiguous_duplicates_bind_by_index_prefix():
    p = plan_of("Driver.PickUp('Mug')", "Driver.PickUp('Mug')", "Driver.Place('Sink')")
    text = "ACTION: 2. Driver.PickUp('Mug')\nANNOTATION: #REMOVE: duplicate"
    assert parse_judge_output(text, p).critiques == (Remove(2, 2, "duplicate"),)


def test_multiple_remove_tags_in_one_block_merge():
    text = _reply(MICROWAVE, {2: "#REMOVE: one #REMOVE: two"})
    assert parse_judge_output(text, MICROWAVE).critiques == (Remove(2, 2, "one; two"),)


def test_reason_spans_continuation_lines():
    text = _reply(MICROWAVE, {1: "#REMOVE: not needed"}).replace(
        "ANNOTATION: #REMOVE: not needed", "ANNOTATION: #REMOVE: not needed\nfor this goal"
    )
    (r,) = parse_judge_output(text, MICROWAVE).removes
    assert r.reason == "not needed for this goal"


@pytest.mark.parametrize("text", ["", "   \n  ", "I cannot help with that."])
def test_malformed(text):
    with pytest.raises(MalformedOutput):
        parse_judge_output(text, MICROWAVE)
    cs = parse_judge_output(text, MICROWAVE, strict=False)
    assert not cs and cs.warnings


def test_stray_remove_outside_blocks_is_dropped_with_warning():
    cs = parse_judge_output("#REMOVE: something", MICROWAVE)
    assert not cs and cs.warnings


def test_unbindable_remove_is_dropped():
    text = _reply(MICROWAVE, {}) + "\nACTION: Driver.Dance()\nANNOTATION: #REMOVE: nope"
    cs = parse_judge_output(text, MICROWAVE)
    assert not cs.removes
    assert any("dropped" in w for w in cs.warnings)


@settings(max_examples=200)
@given(st.text(max_size=300))
def test_parsing_is_total(text):
    try:
        cs = parse_judge_output(text, MICROWAVE)
    except MalformedOutput:
        return
    assert all(1 <= r.index <= len(MICROWAVE) for r in cs.removes)


@settings(max_examples=200)
@given(st.lists(simple_lines, min_size=1, max_size=12), st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_synthesize_round_trip(lines, seed, n_missing):
    plan = plan_of(*lines)
    rng = random.Random(seed)
    picks = sorted({p for p in range(1, len(plan) + 1) if rng.random() < 0.4})
    items = [Remove(p, plan.actions[p - 1].stable_id, f"reason {p}") for p in picks]
    items += [Missing(f"add step {k}", len(plan), plan.actions[-1].stable_id) for k in range(n_missing)]
    cs = CritiqueSet(tuple(items))
    parsed = parse_judge_output(synthesize_reply(cs, plan), plan)
    assert parsed.critiques == cs.critiques


def test_normalize_merges_reasons():
    cs = CritiqueSet((Remove(4, 4, "a"), Remove(4, 4, "b"), Remove(4, 4, "a")))
    assert normalize_critiques(cs).critiques == (Remove(4, 4, "a; b"),)


def test_normalize_empty():
    assert normalize_critiques(EMPTY) == EMPTY


def test_normalize_orders_removes_first():
    d1 = Missing("d1", 5, 5)
    cs = CritiqueSet((d1, Remove(5, 5, "x"), Remove(2, 2, "y")))
    assert normalize_critiques(cs).critiques == (Remove(2, 2, "y"), Remove(5, 5, "x"), d1)


def test_normalize_dedups_missing_descriptions():
    cs = CritiqueSet((Missing("Slice the bread.", 1), Missing("  slice THE bread ", 2), Missing("other", 1)))
    assert [m.description for m in normalize_critiques(cs).missings] == ["Slice the bread.", "other"]


critique_items = st.one_of(
    st.builds(Remove, st.integers(1, 6), st.integers(1, 6), st.sampled_from(["a", "b", "c"])),
    st.builds(Missing, st.sampled_from(["x", "X ", "y", "z."])),
)


@given(st.lists(critique_items, max_size=10))
def test_normalize_idempotent_and_non_increasing(items):
    cs = CritiqueSet(tuple(items))
    once = normalize_critiques(cs)
    assert normalize_critiques(once) == once
    assert len(once) <= len(cs)


def test_dict_round_trip():
    cs = CritiqueSet((Remove(1, 7, "r"), Missing("m", 2, 3)), "raw", ("w",), True)
    assert CritiqueSet.from_dict(cs.to_dict()) == cs
