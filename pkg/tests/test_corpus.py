from __future__ import annotations

import json

import pytest

from planverify.corpus import (
    ErrorProfile,
    episode_to_dict,
    generate_corpus,
    inject,
    inject_errors,
    load_episodes,
    oracle_round,
    oracle_script,
    reconstruct,
    write_corpus,
)
from planverify.errors import EmptyCorpus, ProfileError, SchemaError
from planverify.loop_engine import verify_episode
from planverify.plan_model import parse_plan
from planverify.tasks import DISTRACTORS, TASKS

from .conftest import FIXTURES

ZERO = ErrorProfile(0, 0, 0, 0)
CLEAN5 = parse_plan("g", ["Driver.PickUp('Mug')", "Driver.Place('Sink', 'Mug')", "Driver.ToggleOn('Faucet')",
                          "Driver.ToggleOff('Faucet')", "Driver.PickUp('Mug')"])


def _write(d, name, rec):
    (d / f"{name}.episode.json").write_text(json.dumps(rec))


def test_task_library():
    assert len(TASKS) == 15
    assert "RemoteControl" in DISTRACTORS
    for goal, lines in TASKS.values():
        parse_plan(goal, lines)


def test_load_fixture_corpus():
    eps = load_episodes(FIXTURES / "rules_corpus")
    assert len(eps) == 7
    assert len({e.episode_id for e in eps}) == 7
    for e in eps:
        assert e.initial_plan.ids == tuple(range(1, len(e.initial_plan) + 1))


def test_load_hundred(tmp_path):
    write_corpus(generate_corpus(100, ErrorProfile(seed=3)), tmp_path)
    eps = load_episodes(tmp_path)
    assert len(eps) == 100 and len({e.episode_id for e in eps}) == 100


def test_empty_dir(tmp_path):
    with pytest.raises(EmptyCorpus):
        load_episodes(tmp_path)
    with pytest.raises(EmptyCorpus):
        load_episodes(tmp_path / "nope")


def test_zero_based_index_rejected(tmp_path):
    _write(tmp_path, "a", {"episode_id": "a", "goal": "g", "actions": ["Driver.Stop()"],
                           "annotations": {"remove_indices": [0]}})
    with pytest.raises(SchemaError) as ei:
        load_episodes(tmp_path)
    assert ei.value.problems[0][:2] == ("a.episode.json", "annotations.remove_indices")
    assert "1-based" in ei.value.problems[0][2]


def test_schema_errors_aggregate(tmp_path):
    _write(tmp_path, "a", {"episode_id": "a", "goal": "g", "actions": ["Robot.Go()"]})
    _write(tmp_path, "b", {"goal": "g", "actions": []})
    (tmp_path / "c.episode.json").write_text("{broken")
    _write(tmp_path, "e", {"episode_id": "e", "goal": "g", "actions": ["Driver.Go()"]})
    _write(tmp_path, "f", {"episode_id": "e", "goal": "g", "actions": ["Driver.Go()"]})
    with pytest.raises(SchemaError) as ei:
        load_episodes(tmp_path)
    files = {p[0] for p in ei.value.problems}
    assert files == {"a.episode.json", "b.episode.json", "c.episode.json", "f.episode.json"}


def test_annotations_become_stable_ids(tmp_path):
    _write(tmp_path, "a", {"episode_id": "a", "goal": "g", "actions": ["Driver.A()", "Driver.B()", "Driver.C()"],
                           "annotations": {"remove_indices": [2, 3], "missing_steps": [{"verb": "Slice", "object": "Bread"}]}})
    (ep,) = load_episodes(tmp_path / "a.episode.json")
    assert ep.annotations.remove_ids == frozenset({2, 3})
    assert ep.annotations.missing_steps[0].verb == "Slice"
    assert episode_to_dict(ep)["annotations"]["remove_indices"] == [2, 3]


def test_zero_profile_is_identity():
    noisy, truth = inject_errors(CLEAN5, ZERO)
    assert noisy.canonical_lines == CLEAN5.canonical_lines and truth.total == 0
    with pytest.raises(ProfileError):
        inject_errors(CLEAN5, ZERO, require_errors=True)


def test_seeded_determinism():
    p = ErrorProfile(0.3, 0.3, 0.3, 0.2, seed=11)
    assert inject_errors(CLEAN5, p) == inject_errors(CLEAN5, p)
    assert inject_errors(CLEAN5, p) != inject_errors(CLEAN5, ErrorProfile(0.3, 0.3, 0.3, 0.2, seed=12))


def test_full_duplicate_rate():
    noisy, truth = inject_errors(CLEAN5, ErrorProfile(1.0, 0, 0, 0))
    assert len(noisy) == 10
    assert truth.remove_ids == frozenset({6, 7, 8, 9, 10})
    for k in range(0, 10, 2):
        assert noisy.actions[k].same_call(noisy.actions[k + 1])


def test_rates_validated():
    with pytest.raises(ProfileError):
        ErrorProfile(dup_rate=1.5)


def test_inverse_pairs_and_pickups():
    inj = inject(CLEAN5, ErrorProfile(0, 1.0, 1.0, 0, seed=2))
    kinds = list(inj.kinds.values())
    assert kinds.count("inverse_pair") == 10 and kinds.count("irrelevant_pickup") == 5
    picked = [a.args[0] for a in inj.noisy.actions if inj.kinds.get(a.stable_id) == "irrelevant_pickup"]
    assert len(set(picked)) == 5 and set(picked) <= set(DISTRACTORS)
    for a in inj.noisy.actions:
        if inj.kinds.get(a.stable_id) == "inverse_pair":
            assert a.args == ("Faucet",)


def test_deletions_keep_one_action():
    inj = inject(CLEAN5, ErrorProfile(0, 0, 0, 1.0))
    assert len(inj.noisy) == 1 and len(inj.deletions) == 4
    assert len(inj.truth.missing_steps) == 4
    assert inj.truth.missing_steps[0].verb == "PickUp" and inj.truth.missing_steps[0].object == "Mug"


def test_reconstruction_sweep():
    corpus = generate_corpus(100, ErrorProfile(seed=0))
    for ep in corpus.episodes:
        survivors = [a for a in ep.initial_plan.actions if a.stable_id not in ep.annotations.remove_ids]
        refined = parse_plan(ep.goal, [a.canonical for a in survivors])
        assert reconstruct(refined, ep.deletions) == ep.clean_plan.canonical_lines


def test_corpus_counts_and_ids():
    c = generate_corpus(30, ErrorProfile(seed=5), require_errors=True)
    assert [e.episode_id for e in c.episodes][:2] == ["syn-0001", "syn-0002"]
    assert all(e.annotations.total > 0 for e in c.episodes)
    total_removals = sum(len(e.annotations.remove_ids) for e in c.episodes)
    counts = c.counts
    assert counts["duplicate"] + 2 * counts["inverse_pair"] + counts["irrelevant_pickup"] == total_removals
    assert counts["deletion"] == sum(len(e.annotations.missing_steps) for e in c.episodes)


def test_written_corpus_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_corpus(generate_corpus(20, ErrorProfile(seed=7)), a)
    write_corpus(generate_corpus(20, ErrorProfile(seed=7)), b)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


def test_written_corpus_round_trips(tmp_path):
    c = generate_corpus(15, ErrorProfile(seed=9), require_errors=True)
    write_corpus(c, tmp_path)
    loaded = load_episodes(tmp_path)
    for orig, back in zip(c.episodes, loaded):
        assert back.initial_plan.canonical_lines == orig.initial_plan.canonical_lines
        pos = {i: orig.initial_plan.position_of(i) for i in orig.annotations.remove_ids}
        assert back.annotations.remove_ids == frozenset(pos.values())
        assert back.clean_plan.canonical_lines == orig.clean_plan.canonical_lines
        assert [(p, a.canonical) for p, a in back.deletions] == [(p, a.canonical) for p, a in orig.deletions]


def test_oracle_round_is_perfect():
    c = generate_corpus(10, ErrorProfile(seed=1), require_errors=True)
    book = oracle_script(c.episodes)
    for ep in c.episodes:
        cs = oracle_round(ep)
        assert {r.stable_id for r in cs.removes} == ep.annotations.remove_ids
        t = verify_episode(ep, book.judge_for(ep))
        assert t.error_counts[-1] == 0
