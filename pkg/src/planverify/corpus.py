"""Episode files on disk and the synthetic noisy-corpus generator.

Episode file (``<id>.episode.json``)::

    {
      "episode_id": "syn-0001",
      "context": "...",
      "goal": "Make coffee",
      "actions": ["Driver.PickUp('Mug')", ...],
      "annotations": {"remove_indices": [3], "missing_steps": [{"verb": "Place", "object": "Mug", "note": "..."}]},
      "truth": {"clean_actions": [...], "deleted": [{"clean_index": 2, "action": "..."}],
                "injected": [{"index": 3, "kind": "duplicate"}]}
    }

``annotations`` and ``truth`` are optional. Indices are 1-based. Loading
assigns stable ids equal to the 1-based action positions in the file.

Randomness: all draws come from :class:`random.Random` seeded with an
integer and consumed only through ``random()``, whose output sequence for a
given integer seed is stable across Python versions and platforms.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

from .critique import CritiqueSet, Missing, Remove
from .errors import EmptyCorpus, ParseError, ProfileError, SchemaError
from .judges.backends import ScriptBook
from .plan_model import Action, Actor, Episode, ErrorAnnotation, MissingDescriptor, Plan, parse_action, parse_plan, reindex
from .tasks import DISTRACTORS, TASKS

EPISODE_SUFFIX = ".episode.json"
KINDS = ("duplicate", "inverse_pair", "irrelevant_pickup", "deletion")


# --- loading ----------------------------------------------------------------

def _check_actions(fname: str, fld: str, value, problems: list) -> list[Action] | None:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        problems.append((fname, fld, "must be a list of strings"))
        return None
    acts = []
    ok = True
    for i, line in enumerate(value):
        try:
            acts.append(parse_action(line))
        except ParseError as e:
            problems.append((fname, f"{fld}[{i}]", f"{e.message} (col {e.column + 1})"))
            ok = False
    return acts if ok else None


def _episode_from_record(fname: str, rec, problems: list) -> Episode | None:
    start = len(problems)
    if not isinstance(rec, dict):
        problems.append((fname, "<root>", "must be a JSON object"))
        return None
    eid = rec.get("episode_id")
    if not isinstance(eid, str) or not eid:
        problems.append((fname, "episode_id", "required non-empty string"))
    goal = rec.get("goal")
    if not isinstance(goal, str):
        problems.append((fname, "goal", "required string"))
    context = rec.get("context", "")
    if not isinstance(context, str):
        problems.append((fname, "context", "must be a string"))
    acts = _check_actions(fname, "actions", rec.get("actions"), problems)
    if acts is not None and not acts:
        problems.append((fname, "actions", "must not be empty"))
    n = len(acts) if acts else 0

    ann = None
    if rec.get("annotations") is not None:
        a = rec["annotations"]
        idx = a.get("remove_indices", []) if isinstance(a, dict) else None
        if not isinstance(idx, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in idx):
            problems.append((fname, "annotations.remove_indices", "must be a list of integers"))
            idx = []
        for i in idx:
            if not 1 <= i <= n:
                problems.append((fname, "annotations.remove_indices", f"index {i} out of range 1..{n} (indices are 1-based)"))
        steps = []
        raw_steps = a.get("missing_steps", []) if isinstance(a, dict) else []
        if not isinstance(raw_steps, list):
            problems.append((fname, "annotations.missing_steps", "must be a list"))
            raw_steps = []
        for j, s in enumerate(raw_steps):
            if not isinstance(s, dict) or not isinstance(s.get("verb"), str) or not s["verb"]:
                problems.append((fname, f"annotations.missing_steps[{j}]", "needs a non-empty 'verb'"))
                continue
            steps.append(MissingDescriptor(s["verb"], str(s.get("object", "")), str(s.get("note", ""))))
        ann = ErrorAnnotation(frozenset(idx), tuple(steps))

    clean_plan = None
    deletions: tuple[tuple[int, Action], ...] = ()
    truth = rec.get("truth")
    if truth is not None and isinstance(goal, str):
        clean = _check_actions(fname, "truth.clean_actions", truth.get("clean_actions"), problems)
        dels = []
        for j, d in enumerate(truth.get("deleted", [])):
            try:
                dels.append((int(d["clean_index"]), parse_action(d["action"])))
            except (KeyError, TypeError, ValueError, ParseError) as e:
                problems.append((fname, f"truth.deleted[{j}]", str(e)))
        if clean:
            clean_plan = parse_plan(goal, [a.canonical for a in clean])
            deletions = tuple(dels)

    if len(problems) > start:
        return None
    plan = parse_plan(goal, [a.canonical for a in acts])  # type: ignore[union-attr]
    return Episode(eid, plan, context, ann, clean_plan, deletions)  # type: ignore[arg-type]


def load_episodes(path: str | os.PathLike[str]) -> list[Episode]:
    """Load one episode file or every ``*.episode.json`` in a directory.

    Schema problems across all files are collected and raised together.
    """
    p = Path(path)
    files = [p] if p.is_file() else sorted(p.glob(f"*{EPISODE_SUFFIX}"))
    if not p.exists():
        raise EmptyCorpus(f"{p} does not exist")
    if not files:
        raise EmptyCorpus(f"no {EPISODE_SUFFIX} files in {p}")
    problems: list[tuple[str, str, str]] = []
    episodes: list[Episode] = []
    seen: dict[str, str] = {}
    for f in files:
        try:
            rec = json.loads(f.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            problems.append((f.name, "<file>", f"unreadable JSON: {e}"))
            continue
        ep = _episode_from_record(f.name, rec, problems)
        if ep is None:
            continue
        if ep.episode_id in seen:
            problems.append((f.name, "episode_id", f"duplicate of {seen[ep.episode_id]}"))
            continue
        seen[ep.episode_id] = f.name
        episodes.append(ep)
    if problems:
        raise SchemaError(problems)
    return episodes


def annotation_map(episodes: Sequence[Episode]) -> dict[str, ErrorAnnotation | None]:
    return {e.episode_id: e.annotations for e in episodes}


# --- writing ----------------------------------------------------------------

def episode_to_dict(ep: Episode, kinds: dict[int, str] | None = None) -> dict:
    plan = reindex(ep.initial_plan)
    rec: dict = {
        "episode_id": ep.episode_id,
        "context": ep.context,
        "goal": plan.goal,
        "actions": list(plan.canonical_lines),
    }
    if ep.annotations is not None:
        rec["annotations"] = {
            "remove_indices": sorted(plan.position_of(i) for i in ep.annotations.remove_ids),  # type: ignore[type-var]
            "missing_steps": [
                {"verb": d.verb, "object": d.object, "note": d.note} for d in ep.annotations.missing_steps
            ],
        }
    if ep.clean_plan is not None:
        truth: dict = {
            "clean_actions": list(ep.clean_plan.canonical_lines),
            "deleted": [{"clean_index": pos, "action": a.canonical} for pos, a in ep.deletions],
        }
        if kinds:
            truth["injected"] = [
                {"index": plan.position_of(i), "kind": k} for i, k in sorted(kinds.items(), key=lambda kv: plan.position_of(kv[0]))
            ]
        rec["truth"] = truth
    return rec


def write_episode(ep: Episode, out_dir: str | os.PathLike[str], kinds: dict[int, str] | None = None) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    p = d / f"{ep.episode_id}{EPISODE_SUFFIX}"
    p.write_text(json.dumps(episode_to_dict(ep, kinds), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return p


# --- error injection ----------------------------------------------------------

@dataclass(frozen=True)
class ErrorProfile:
    """Per-slot injection probabilities and the seed that fixes every draw."""

    dup_rate: float = 0.1
    inv_rate: float = 0.05
    irr_rate: float = 0.1
    del_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("dup_rate", "inv_rate", "irr_rate", "del_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ProfileError(f"{name} must be in [0, 1], got {v}")

    @property
    def all_zero(self) -> bool:
        return not (self.dup_rate or self.inv_rate or self.irr_rate or self.del_rate)


def _below(rng: random.Random, n: int) -> int:
    return min(int(rng.random() * n), n - 1)


def _ordered_objects(plan: Plan) -> list[str]:
    seen: dict[str, None] = {}
    for a in plan.actions:
        for o in a.objects:
            seen.setdefault(o)
    return list(seen)


@dataclass
class Injection:
    noisy: Plan
    truth: ErrorAnnotation
    deletions: list[tuple[int, Action]] = field(default_factory=list)
    kinds: dict[int, str] = field(default_factory=dict)


def _inject_once(clean: Plan, profile: ErrorProfile, rng: random.Random) -> Injection:
    objects = _ordered_objects(clean)
    toggled = [o for o in objects if any(a.verb in ("ToggleOn", "ToggleOff") and o in a.objects for a in clean.actions)]
    pair_pool = toggled or objects
    distractors = [d for d in DISTRACTORS if d not in objects]
    next_id = clean.next_id
    out: list[Action] = []
    kinds: dict[int, str] = {}
    missing: list[MissingDescriptor] = []
    deletions: list[tuple[int, Action]] = []
    n = len(clean)

    def fresh(a: Action, kind: str) -> None:
        nonlocal next_id
        out.append(replace(a, stable_id=next_id, index=None))
        kinds[next_id] = kind
        next_id += 1

    for pos, a in enumerate(clean.actions, start=1):
        u_del, u_dup, u_inv, u_irr = rng.random(), rng.random(), rng.random(), rng.random()
        if u_del < profile.del_rate and len(deletions) < n - 1:
            deletions.append((pos, a))
            obj = a.objects[0] if a.objects else ""
            missing.append(MissingDescriptor(a.verb, obj, f"deleted step {pos}: {a.canonical}", a))
        else:
            out.append(a)
            if u_dup < profile.dup_rate:
                fresh(a, "duplicate")
        if u_inv < profile.inv_rate and pair_pool:
            obj = pair_pool[_below(rng, len(pair_pool))]
            verbs = ("ToggleOn", "ToggleOff") if rng.random() < 0.5 else ("ToggleOff", "ToggleOn")
            for v in verbs:
                fresh(Action(Actor.DRIVER, v, (obj,)), "inverse_pair")
        if u_irr < profile.irr_rate and distractors:
            obj = distractors.pop(_below(rng, len(distractors)))
            fresh(Action(Actor.DRIVER, "PickUp", (obj,)), "irrelevant_pickup")

    noisy = reindex(Plan(clean.goal, tuple(out), next_id))
    truth = ErrorAnnotation(frozenset(kinds), tuple(missing))
    return Injection(noisy, truth, deletions, kinds)


def inject(clean: Plan, profile: ErrorProfile, require_errors: bool = False, rng: random.Random | None = None) -> Injection:
    if require_errors and profile.all_zero:
        raise ProfileError("all injection rates are 0 but at least one injection was required")
    rng = rng or random.Random(profile.seed)
    for _ in range(10_000):
        inj = _inject_once(reindex(clean), profile, rng)
        if not require_errors or inj.truth.total:
            return inj
    raise ProfileError("could not produce an injection with the given rates")


def inject_errors(clean: Plan, profile: ErrorProfile, require_errors: bool = False) -> tuple[Plan, ErrorAnnotation]:
    """Seeded noise injection with exact ground truth.

    Duplicates sit right after their source, inverse toggle pairs and
    irrelevant pickups are inserted after a slot, and deleted steps become
    missing-step descriptors.
    """
    inj = inject(clean, profile, require_errors)
    return inj.noisy, inj.truth


def reconstruct(refined: Plan, deletions: Sequence[tuple[int, Action]]) -> tuple[str, ...]:
    """Put deleted steps back at their clean positions; returns canonical lines."""
    lines = list(refined.canonical_lines)
    for pos, a in sorted(deletions, key=lambda d: d[0]):
        lines.insert(pos - 1, a.canonical)
    return tuple(lines)


@dataclass
class GeneratedCorpus:
    episodes: list[Episode]
    kinds: dict[str, dict[int, str]]

    @property
    def counts(self) -> Counter:
        c: Counter = Counter({k: 0 for k in KINDS})
        for ep in self.episodes:
            for kind in self.kinds[ep.episode_id].values():
                c[kind] += 1
            c["deletion"] += len(ep.deletions)
        # inverse pairs are counted once per pair
        c["inverse_pair"] //= 2
        return c


def _episode_seed(seed: int, i: int) -> int:
    return int.from_bytes(hashlib.sha256(f"{seed}:{i}".encode()).digest()[:8], "big")


def generate_corpus(n: int, profile: ErrorProfile, require_errors: bool = False) -> GeneratedCorpus:
    if n < 1:
        raise ValueError("n must be >= 1")
    if require_errors and profile.all_zero:
        raise ProfileError("all injection rates are 0 but --require-errors was given")
    names = sorted(TASKS)
    episodes = []
    kinds = {}
    for i in range(n):
        rng = random.Random(_episode_seed(profile.seed, i))
        name = names[_below(rng, len(names))]
        goal, lines = TASKS[name]
        clean = parse_plan(goal, lines)
        inj = inject(clean, profile, require_errors, rng)
        eid = f"syn-{i + 1:04d}"
        episodes.append(Episode(eid, inj.noisy, f"task:{name}", inj.truth, clean, tuple(inj.deletions)))
        kinds[eid] = inj.kinds
    return GeneratedCorpus(episodes, kinds)


def write_corpus(corpus: GeneratedCorpus, out_dir: str | os.PathLike[str]) -> list[Path]:
    return [write_episode(ep, out_dir, corpus.kinds.get(ep.episode_id)) for ep in corpus.episodes]


def oracle_round(ep: Episode) -> CritiqueSet:
    """Critiques flagging exactly the annotated errors of ``ep``."""
    ann = ep.annotations or ErrorAnnotation()
    crits: list = [Remove(0, i, "annotated error") for i in sorted(ann.remove_ids)]
    for d in ann.missing_steps:
        desc = d.note or (f"{d.verb} {d.object}".strip() + " is missing")
        if d.action is not None and d.action.canonical not in desc:
            desc = f"{desc} ({d.action.canonical})"
        crits.append(Missing(desc))
    return CritiqueSet(tuple(crits))


def oracle_script(episodes: Sequence[Episode]) -> ScriptBook:
    """A script book whose judge flags the annotated errors once, then nothing."""
    return ScriptBook(episodes={ep.episode_id: [oracle_round(ep)] for ep in episodes}, source="oracle")
