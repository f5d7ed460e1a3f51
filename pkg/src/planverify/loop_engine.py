"""Iterative judge -> planner refinement loop and its trace records."""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

from .critique import CritiqueSet, Missing
from .errors import ConfigError
from .judges.backends import JudgeBackend
from .matching import dedup_descriptions, greedy_missing_match
from .plan_model import Action, Episode, ErrorAnnotation, Plan, parse_action, reindex
from .planner import Inserter, Revision, apply_critiques

log = logging.getLogger(__name__)

TRACE_SCHEMA = "trace/1"


@dataclass(frozen=True)
class LoopConfig:
    max_rounds: int = 5
    removal_only: bool = True
    reprompt_on_malformed: bool = True

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")


@dataclass(frozen=True)
class PlannerConfig:
    inserter: Inserter | None = None

    @property
    def label(self) -> str:
        return "removal-only" if self.inserter is None else f"inserter/{self.inserter.label}"


@dataclass(frozen=True)
class IterationRecord:
    round: int
    plan_before: Plan
    critiques: CritiqueSet
    revision: Revision | None = None
    error_before: int | None = None
    error_after: int | None = None

    @property
    def plan_after(self) -> Plan | None:
        return None if self.revision is None else self.revision.resulting_plan

    @property
    def raw_reply(self) -> str:
        return self.critiques.raw_text

    @property
    def fail_open(self) -> bool:
        return self.critiques.fail_open


@dataclass(frozen=True)
class VerificationTrace:
    episode_id: str
    initial_plan: Plan
    final_plan: Plan
    iterations: tuple[IterationRecord, ...] = ()
    converged_at: int | None = None
    status: str = "converged"  # converged | max_rounds | oscillating | failed
    max_rounds: int = 5
    judge: str = ""
    planner: str = ""
    error: str | None = None

    @property
    def judge_calls(self) -> int:
        return len(self.iterations)

    @property
    def failed(self) -> bool:
        return self.status == "failed"

    @property
    def removed_ids(self) -> list[int]:
        out: list[int] = []
        for it in self.iterations:
            if it.revision is not None:
                out.extend(i for i in it.revision.removed if i not in out)
        return out

    @property
    def missing_flags(self) -> list[str]:
        descs = [m.description for it in self.iterations for m in it.critiques.missings]
        return dedup_descriptions(descs)

    @property
    def error_counts(self) -> list[int]:
        """E^(0), E^(1), ...: the count before round 1, then after each revision."""
        if not self.iterations or self.iterations[0].error_before is None:
            return []
        seq = [self.iterations[0].error_before]
        seq.extend(it.error_after for it in self.iterations if it.error_after is not None)  # type: ignore[misc]
        return seq

    @property
    def fail_open_count(self) -> int:
        return sum(1 for it in self.iterations if it.fail_open)


def error_count(plan: Plan, ann: ErrorAnnotation, missing_flags: Sequence[str]) -> int:
    """Annotated errors still outstanding.

    An erroneous action counts while it is in the plan; an omission counts
    until some round has flagged it.
    """
    present = len(ann.remove_ids & set(plan.ids))
    addressed = len(greedy_missing_match(dedup_descriptions(missing_flags), ann.missing_steps))
    return present + len(ann.missing_steps) - addressed


def verify_episode(
    ep: Episode,
    judge: JudgeBackend,
    planner: PlannerConfig | None = None,
    cfg: LoopConfig | None = None,
) -> VerificationTrace:
    planner = planner or PlannerConfig()
    cfg = cfg or LoopConfig()
    ann = ep.annotations
    inserter = None if cfg.removal_only else planner.inserter
    plan = reindex(ep.initial_plan)
    flags: list[str] = []
    records: list[IterationRecord] = []
    converged_at = None
    status = "max_rounds"

    for k in range(1, cfg.max_rounds + 1):
        e_before = error_count(plan, ann, flags) if ann is not None else None
        cs = judge.evaluate(ep.goal, plan)
        if cs.fail_open:
            log.info("%s round %d: judge failed open", ep.episode_id, k)
        if not cs:
            records.append(IterationRecord(k, plan, cs, None, e_before, None))
            converged_at = k
            status = "converged"
            break
        rev = apply_critiques(plan, cs, inserter)
        flags.extend(m.description for m in cs.missings)
        e_after = error_count(rev.resulting_plan, ann, flags) if ann is not None else None
        records.append(IterationRecord(k, plan, cs, rev, e_before, e_after))
        after = rev.resulting_plan
        if (
            k >= 2
            and after.canonical_lines != plan.canonical_lines
            and after.canonical_lines == records[-2].plan_before.canonical_lines
        ):
            log.warning("%s: plan reverted to its round %d state; stopping", ep.episode_id, k - 1)
            plan = after
            status = "oscillating"
            break
        plan = after

    return VerificationTrace(
        episode_id=ep.episode_id,
        initial_plan=reindex(ep.initial_plan),
        final_plan=plan,
        iterations=tuple(records),
        converged_at=converged_at,
        status=status,
        max_rounds=cfg.max_rounds,
        judge=getattr(judge, "label", type(judge).__name__),
        planner=planner.label,
    )


JudgeSource = Union[JudgeBackend, Callable[[Episode], JudgeBackend]]


def verify_corpus(
    episodes: Sequence[Episode],
    judge: JudgeSource,
    planner: PlannerConfig | None = None,
    cfg: LoopConfig | None = None,
    parallelism: int = 1,
) -> list[VerificationTrace]:
    """Run every episode; results come back in input order.

    ``judge`` is either a shared backend or a factory called once per
    episode (scripted judges are per-episode). A failing episode yields a
    trace with ``status == "failed"`` instead of aborting the run.
    """
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    cfg = cfg or LoopConfig()
    planner = planner or PlannerConfig()

    def run(ep: Episode) -> VerificationTrace:
        try:
            backend = judge if hasattr(judge, "evaluate") else judge(ep)  # type: ignore[operator]
            return verify_episode(ep, backend, planner, cfg)  # type: ignore[arg-type]
        except Exception as e:  # per-episode isolation
            log.error("episode %s failed: %s", ep.episode_id, e)
            plan = reindex(ep.initial_plan)
            return VerificationTrace(
                ep.episode_id, plan, plan, status="failed", max_rounds=cfg.max_rounds,
                judge=getattr(judge, "label", ""), planner=planner.label, error=f"{type(e).__name__}: {e}",
            )

    if parallelism == 1:
        return [run(ep) for ep in episodes]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, episodes))


# --- serialization ----------------------------------------------------------

def plan_to_dict(p: Plan) -> dict:
    return {
        "goal": p.goal,
        "next_id": p.next_id,
        "actions": [{"id": a.stable_id, "action": a.canonical} for a in p.actions],
    }


def plan_from_dict(d: dict) -> Plan:
    acts: list[Action] = []
    for i, rec in enumerate(d["actions"], start=1):
        acts.append(replace(parse_action(rec["action"]), stable_id=rec["id"], index=i))
    return Plan(d["goal"], tuple(acts), d.get("next_id", 0))


def trace_to_dict(t: VerificationTrace) -> dict:
    return {
        "schema": TRACE_SCHEMA,
        "episode_id": t.episode_id,
        "status": t.status,
        "converged_at": t.converged_at,
        "max_rounds": t.max_rounds,
        "judge": t.judge,
        "planner": t.planner,
        "error": t.error,
        "initial_plan": plan_to_dict(t.initial_plan),
        "iterations": [
            {
                "round": it.round,
                "plan_before": plan_to_dict(it.plan_before),
                "critiques": it.critiques.to_dict(),
                "revision": None if it.revision is None else it.revision.to_dict(),
                "plan_after": None if it.plan_after is None else plan_to_dict(it.plan_after),
                "error_count_before": it.error_before,
                "error_count_after": it.error_after,
                "fail_open": it.fail_open,
            }
            for it in t.iterations
        ],
        "final_plan": plan_to_dict(t.final_plan),
    }


def trace_from_dict(d: dict) -> VerificationTrace:
    if d.get("schema") != TRACE_SCHEMA:
        raise ValueError(f"unsupported trace schema {d.get('schema')!r}")
    iters = []
    for it in d["iterations"]:
        rev = None
        if it["revision"] is not None:
            after = plan_from_dict(it["plan_after"])
            r = it["revision"]
            rev = Revision(
                tuple(r["removed"]),
                tuple((x["position"], after.by_id(x["id"])) for x in r["inserted"]),
                after,
                tuple(Missing(m["description"], m.get("insert_after"), m.get("anchor_id")) for m in r["unresolved"]),
                tuple(r.get("warnings", [])),
            )
        iters.append(
            IterationRecord(
                it["round"], plan_from_dict(it["plan_before"]), CritiqueSet.from_dict(it["critiques"]),
                rev, it["error_count_before"], it["error_count_after"],
            )
        )
    return VerificationTrace(
        episode_id=d["episode_id"],
        initial_plan=plan_from_dict(d["initial_plan"]),
        final_plan=plan_from_dict(d["final_plan"]),
        iterations=tuple(iters),
        converged_at=d["converged_at"],
        status=d["status"],
        max_rounds=d["max_rounds"],
        judge=d.get("judge", ""),
        planner=d.get("planner", ""),
        error=d.get("error"),
    )


def dump_trace(t: VerificationTrace) -> str:
    return json.dumps(trace_to_dict(t), indent=2, ensure_ascii=False) + "\n"


def write_traces(traces: Sequence[VerificationTrace], out_dir: str | os.PathLike[str]) -> list[Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in traces:
        p = d / f"{t.episode_id}.json"
        p.write_text(dump_trace(t), encoding="utf-8")
        paths.append(p)
    return paths


def load_traces(trace_dir: str | os.PathLike[str]) -> list[VerificationTrace]:
    out = []
    for p in sorted(Path(trace_dir).glob("*.json")):
        out.append(trace_from_dict(json.loads(p.read_text(encoding="utf-8"))))
    return out
