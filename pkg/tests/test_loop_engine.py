from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planverify.critique import EMPTY, CritiqueSet, Missing, Remove
from planverify.errors import ConfigError
from planverify.judges import RuleJudge, ScriptJudge
from planverify.loop_engine import (
    LoopConfig,
    PlannerConfig,
    error_count,
    load_traces,
    trace_from_dict,
    trace_to_dict,
    verify_corpus,
    verify_episode,
    write_traces,
)
from planverify.plan_model import Episode, ErrorAnnotation, MissingDescriptor
from planverify.planner import ScriptInserter

from .conftest import plan_of, simple_lines

SIX = plan_of("Driver.A()", "Driver.B()", "Driver.C()", "Driver.D()", "Driver.E()", "Driver.F()")


def rm(*ids: int) -> CritiqueSet:
    return CritiqueSet(tuple(Remove(0, i, f"drop {i}") for i in ids))


def ep(plan=SIX, ann=None, eid="e1") -> Episode:
    return Episode(eid, plan, annotations=ann)


def test_three_rounds_then_empty():
    judge = ScriptJudge([rm(2), rm(5), rm(1), EMPTY])
    t = verify_episode(ep(), judge)
    assert judge.calls == 4 == t.judge_calls
    assert t.converged_at == 4 and t.status == "converged"
    # hand-computed: A B C D E F -> drop B -> drop E -> drop A
    assert t.final_plan.canonical_lines == ("Driver.C()", "Driver.D()", "Driver.F()")
    assert t.final_plan.ids == (3, 4, 6)
    assert [it.plan_after.canonical_lines for it in t.iterations[:3]] == [
        ("Driver.A()", "Driver.C()", "Driver.D()", "Driver.E()", "Driver.F()"),
        ("Driver.A()", "Driver.C()", "Driver.D()", "Driver.F()"),
        ("Driver.C()", "Driver.D()", "Driver.F()"),
    ]
    assert t.iterations[-1].revision is None


def test_empty_first_round():
    t = verify_episode(ep(), ScriptJudge([EMPTY]))
    assert (t.judge_calls, t.converged_at) == (1, 1)
    assert t.final_plan == t.initial_plan


def test_always_critiquing_stops_at_five():
    big = plan_of(*[f"Driver.Step({i})" for i in range(10)])
    judge = ScriptJudge([CritiqueSet((Missing("still missing something"),))], repeat_last=True)
    t = verify_episode(ep(big), judge)
    assert judge.calls == 5 and t.judge_calls == 5
    assert t.converged_at is None and t.status == "max_rounds"
    assert t.final_plan == t.iterations[-1].plan_after


def test_removals_persist_across_rounds_until_cap():
    big = plan_of(*[f"Driver.Step({i})" for i in range(10)])
    judge = ScriptJudge([rm(i) for i in range(1, 8)])
    t = verify_episode(ep(big), judge)
    assert t.judge_calls == 5
    assert t.final_plan.ids == (6, 7, 8, 9, 10)


def test_max_rounds_config():
    judge = ScriptJudge([CritiqueSet((Missing("x"),))], repeat_last=True)
    t = verify_episode(ep(), judge, cfg=LoopConfig(max_rounds=2))
    assert judge.calls == 2 and t.max_rounds == 2
    with pytest.raises(ConfigError):
        LoopConfig(max_rounds=0)


def test_oscillation_guard():
    p = plan_of("Driver.A()", "Driver.B()")
    ins = ScriptInserter([["Driver.B()"]])
    # round 1 removes B, round 2 puts it back: same text as round 1's input
    judge = ScriptJudge([rm(2), CritiqueSet((Missing("need B", None, 1),)), EMPTY])
    t = verify_episode(ep(p), judge, PlannerConfig(ins), LoopConfig(removal_only=False))
    assert t.status == "oscillating" and judge.calls == 2


def test_removal_only_ignores_inserter():
    judge = ScriptJudge([CritiqueSet((Missing("add X", None, 6),)), EMPTY])
    t = verify_episode(ep(), judge, PlannerConfig(ScriptInserter([["Driver.X()"]])))
    assert t.final_plan == t.initial_plan
    assert t.iterations[0].revision.unresolved


def test_inserter_applied_when_enabled():
    judge = ScriptJudge([CritiqueSet((Missing("add X", None, 6),)), EMPTY])
    t = verify_episode(ep(), judge, PlannerConfig(ScriptInserter([["Driver.X()"]])), LoopConfig(removal_only=False))
    assert t.final_plan.canonical_lines[-1] == "Driver.X()"
    assert t.final_plan.ids[-1] == 7


def test_error_counts():
    ann = ErrorAnnotation(frozenset({2, 5}), (MissingDescriptor("Slice", "Bread"),))
    assert error_count(SIX, ann, []) == 3
    assert error_count(SIX, ann, ["Slice the bread first"]) == 2
    judge = ScriptJudge([rm(2), CritiqueSet((Remove(0, 5, "x"), Missing("slice the bread"))), EMPTY])
    t = verify_episode(ep(ann=ann), judge)
    assert t.error_counts == [3, 2, 0]
    assert t.removed_ids == [2, 5]
    assert t.missing_flags == ["slice the bread"]


def test_error_counts_absent_without_annotations():
    t = verify_episode(ep(), ScriptJudge([rm(1), EMPTY]))
    assert t.error_counts == []


def test_judge_call_count_invariant():
    for k in range(8):
        judge = ScriptJudge([rm(i) for i in range(1, k + 1)] + [EMPTY]) if k < 6 else ScriptJudge([rm(1)], repeat_last=True)
        t = verify_episode(ep(), judge)
        assert t.judge_calls <= 5
        if t.converged_at is not None:
            assert t.judge_calls == t.converged_at


def test_fail_open_round_converges():
    judge = ScriptJudge([CritiqueSet((), "garbage", ("fail-open",), fail_open=True)])
    t = verify_episode(ep(), judge)
    assert t.converged_at == 1 and t.fail_open_count == 1


# --- corpus level ------------------------------------------------------------

def _episodes(n: int) -> list[Episode]:
    return [ep(eid=f"e{i}") for i in range(n)]


def test_corpus_order_and_parallelism():
    eps = _episodes(3)
    scripts = {"e0": [rm(1), EMPTY], "e1": [EMPTY], "e2": [rm(2), rm(3), EMPTY]}
    factory = lambda e: ScriptJudge(scripts[e.episode_id])  # noqa: E731
    serial = verify_corpus(eps, factory, parallelism=1)
    parallel = verify_corpus(eps, factory, parallelism=8)
    assert [t.episode_id for t in parallel] == ["e0", "e1", "e2"]
    assert [trace_to_dict(t) for t in serial] == [trace_to_dict(t) for t in parallel]
    assert [t.converged_at for t in serial] == [2, 1, 3]


def test_failed_episode_is_isolated():
    class Boom:
        label = "boom"

        def evaluate(self, goal, plan):
            raise RuntimeError("judge exploded")

    factory = lambda e: Boom() if e.episode_id == "e1" else ScriptJudge([EMPTY])  # noqa: E731
    traces = verify_corpus(_episodes(3), factory, parallelism=2)
    assert [t.status for t in traces] == ["converged", "failed", "converged"]
    assert "judge exploded" in traces[1].error
    assert traces[1].failed


def test_shared_backend_accepted():
    traces = verify_corpus(_episodes(2), RuleJudge())
    assert all(t.judge == "rules/R1-R4" for t in traces)
    with pytest.raises(ConfigError):
        verify_corpus(_episodes(1), RuleJudge(), parallelism=0)


# --- serialization -----------------------------------------------------------

def test_trace_round_trip(tmp_path):
    ann = ErrorAnnotation(frozenset({2}), (MissingDescriptor("Slice", "Bread"),))
    judge = ScriptJudge([CritiqueSet((Remove(0, 2, "x"), Missing("slice bread", None, 6))), EMPTY])
    t = verify_episode(ep(ann=ann), judge, PlannerConfig(ScriptInserter([["Driver.Slice('Bread')"]])), LoopConfig(removal_only=False))
    d = trace_to_dict(t)
    assert d["schema"] == "trace/1"
    assert trace_to_dict(trace_from_dict(json.loads(json.dumps(d)))) == d
    write_traces([t], tmp_path)
    (loaded,) = load_traces(tmp_path)
    assert trace_to_dict(loaded) == d
    assert loaded.error_counts == t.error_counts


@settings(max_examples=50, deadline=None)
@given(st.lists(simple_lines, min_size=1, max_size=12), st.data())
def test_truthful_judge_never_increases_error(lines, data):
    p = plan_of(*lines)
    bad = data.draw(st.sets(st.sampled_from(p.ids)))
    ann = ErrorAnnotation(frozenset(bad), ())
    order = sorted(bad)
    chunks = []
    while order:
        k = data.draw(st.integers(1, len(order)))
        chunks.append(rm(*order[:k]))
        order = order[k:]
    t = verify_episode(ep(p, ann), ScriptJudge(chunks + [EMPTY]))
    e = t.error_counts
    assert all(x >= y for x, y in zip(e, e[1:]))
