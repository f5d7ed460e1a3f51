"""Flagging quality against annotations and convergence statistics.

Counts are pooled across episodes (micro-averaging) before metrics are
computed. All ratios are exact :class:`fractions.Fraction` values; rounding
happens only when rendering percentages.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import EmptyRun, EpisodeMismatch
from .loop_engine import VerificationTrace
from .matching import greedy_missing_match
from .plan_model import ErrorAnnotation

REPORT_SCHEMA = "report/1"
CSV_COLUMNS = ["episode_id", "tp", "fp", "fn", "recall", "precision", "f1", "converged_at", "len_before", "len_after"]


@dataclass(frozen=True)
class MatchResult:
    remove_tp: int = 0
    remove_fp: int = 0
    remove_fn: int = 0
    missing_tp: int = 0
    missing_fp: int = 0
    missing_fn: int = 0
    pairs: tuple[tuple[str, str], ...] = ()

    @property
    def tp(self) -> int:
        return self.remove_tp + self.missing_tp

    @property
    def fp(self) -> int:
        return self.remove_fp + self.missing_fp

    @property
    def fn(self) -> int:
        return self.remove_fn + self.missing_fn

    def __add__(self, other: MatchResult) -> MatchResult:
        return MatchResult(
            self.remove_tp + other.remove_tp,
            self.remove_fp + other.remove_fp,
            self.remove_fn + other.remove_fn,
            self.missing_tp + other.missing_tp,
            self.missing_fp + other.missing_fp,
            self.missing_fn + other.missing_fn,
            self.pairs + other.pairs,
        )


@dataclass(frozen=True)
class Metrics:
    recall: Fraction
    precision: Fraction
    f1: Fraction

    def as_percent(self) -> dict[str, str]:
        return {"recall": pct(self.recall), "precision": pct(self.precision), "f1": pct(self.f1)}


def pct(x: Fraction | float) -> str:
    """Percentage to one decimal, rounding halves away from zero."""
    q = Fraction(x) * 1000
    tenths = math.floor(q + Fraction(1, 2))
    return f"{tenths / 10:.1f}"


def f1_score(precision: Fraction | float | str, recall: Fraction | float | str) -> Fraction:
    p = Fraction(str(precision)) if isinstance(precision, float) else Fraction(precision)
    r = Fraction(str(recall)) if isinstance(recall, float) else Fraction(recall)
    if p + r == 0:
        return Fraction(0)
    return 2 * p * r / (p + r)


def match_flags(trace: VerificationTrace, ann: ErrorAnnotation, episode_id: str | None = None) -> MatchResult:
    """Compare everything a run flagged with the annotation of its episode.

    Removal flags are the stable ids removed in any round; omission flags are
    the distinct Missing descriptions, matched greedily one-to-one.
    """
    if episode_id is not None and episode_id != trace.episode_id:
        raise EpisodeMismatch(f"trace {trace.episode_id!r} scored against annotation for {episode_id!r}")
    if not ann.remove_ids <= set(trace.initial_plan.ids):
        raise EpisodeMismatch(f"annotation ids do not belong to episode {trace.episode_id!r}")
    flagged = set(trace.removed_ids)
    truth = ann.remove_ids
    flags = trace.missing_flags
    matched = greedy_missing_match(flags, ann.missing_steps)
    pairs = [(f"id:{i}", f"id:{i}") for i in sorted(flagged & truth)]
    for fi, dj in matched:
        d = ann.missing_steps[dj]
        pairs.append((flags[fi], f"{d.verb} {d.object}".strip()))
    return MatchResult(
        remove_tp=len(flagged & truth),
        remove_fp=len(flagged - truth),
        remove_fn=len(truth - flagged),
        missing_tp=len(matched),
        missing_fp=len(flags) - len(matched),
        missing_fn=len(ann.missing_steps) - len(matched),
        pairs=tuple(pairs),
    )


def compute_metrics(m: MatchResult) -> Metrics:
    """Recall, precision and F1 with the zero-denominator conventions.

    No flags means precision 1; nothing to find means recall 1; F1 is 0
    when both are 0.
    """
    recall = Fraction(m.tp, m.tp + m.fn) if m.tp + m.fn else Fraction(1)
    precision = Fraction(m.tp, m.tp + m.fp) if m.tp + m.fp else Fraction(1)
    return Metrics(recall, precision, f1_score(precision, recall))


@dataclass(frozen=True)
class ConvergenceStats:
    rounds: int
    per_round: tuple[int, ...]
    cumulative: tuple[Fraction, ...]
    not_converged: int
    total: int
    mean_errors: tuple[float, ...] = ()
    decay_rate: float | None = None
    mean_length_reduction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "total": self.total,
            "per_round": list(self.per_round),
            "cumulative": [float(c) for c in self.cumulative],
            "cumulative_pct": [pct(c) for c in self.cumulative],
            "not_converged": self.not_converged,
            "mean_errors": list(self.mean_errors),
            "decay_rate": self.decay_rate,
            "mean_length_reduction": self.mean_length_reduction,
        }


def _decay_rate(means: Sequence[float]) -> float | None:
    pts = [(k, math.log(v)) for k, v in enumerate(means) if v > 0]
    if len(pts) < 2:
        return None
    slope, _ = statistics.linear_regression([p[0] for p in pts], [p[1] for p in pts])
    return 1.0 - math.exp(slope)


def aggregate_convergence(traces: Sequence[VerificationTrace], rounds: int | None = None) -> ConvergenceStats:
    if not traces:
        raise EmptyRun("no traces to aggregate")
    R = rounds or max(max(t.max_rounds for t in traces), max(len(t.iterations) for t in traces))
    per_round = [0] * R
    for t in traces:
        if t.converged_at is not None and t.converged_at <= R:
            per_round[t.converged_at - 1] += 1
    n = len(traces)
    cumulative = []
    running = 0
    for c in per_round:
        running += c
        cumulative.append(Fraction(running, n))

    seqs = [t.error_counts for t in traces if t.error_counts]
    means: list[float] = []
    if seqs:
        for k in range(R + 1):
            means.append(sum(s[min(k, len(s) - 1)] for s in seqs) / len(seqs))
    reduction = sum(len(t.initial_plan) - len(t.final_plan) for t in traces) / n
    return ConvergenceStats(
        rounds=R,
        per_round=tuple(per_round),
        cumulative=tuple(cumulative),
        not_converged=n - running,
        total=n,
        mean_errors=tuple(means),
        decay_rate=_decay_rate(means),
        mean_length_reduction=reduction,
    )


@dataclass
class EpisodeRow:
    episode_id: str
    match: MatchResult | None
    metrics: Metrics | None
    converged_at: int | None
    len_before: int
    len_after: int
    status: str


@dataclass
class RunReport:
    mode: str
    judge: str
    planner: str
    episodes: int
    rows: list[EpisodeRow] = field(default_factory=list)
    pooled: MatchResult | None = None
    metrics: Metrics | None = None
    convergence: ConvergenceStats | None = None
    fail_open: int = 0
    oscillating: int = 0
    failed: int = 0

    def to_dict(self) -> dict:
        d: dict = {
            "schema": REPORT_SCHEMA,
            "mode": self.mode,
            "judge": self.judge,
            "planner": self.planner,
            "episodes": self.episodes,
            "failed": self.failed,
            "fail_open_events": self.fail_open,
            "oscillating": self.oscillating,
        }
        if self.metrics is not None and self.pooled is not None:
            m, p = self.metrics, self.pooled
            d["metrics"] = {
                "tp": p.tp, "fp": p.fp, "fn": p.fn,
                "remove": {"tp": p.remove_tp, "fp": p.remove_fp, "fn": p.remove_fn},
                "missing": {"tp": p.missing_tp, "fp": p.missing_fp, "fn": p.missing_fn},
                "recall": float(m.recall), "precision": float(m.precision), "f1": float(m.f1),
                "percent": m.as_percent(),
            }
        if self.convergence is not None:
            d["convergence"] = self.convergence.to_dict()
        d["per_episode"] = [_row_dict(r) for r in self.rows]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            d = _row_dict(r)
            w.writerow(["" if d.get(c) is None else d.get(c) for c in CSV_COLUMNS])
        return buf.getvalue()

    def write(self, out_dir: str | os.PathLike[str], formats: Sequence[str] = ("json", "csv", "plot")) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "json" in formats:
            (out / "report.json").write_text(self.to_json(), encoding="utf-8")
            written.append(out / "report.json")
        if "csv" in formats:
            (out / "report.csv").write_text(self.to_csv(), encoding="utf-8")
            written.append(out / "report.csv")
        if "plot" in formats and self.convergence is not None:
            written.append(plot_convergence(self.convergence, out / "convergence.png"))
        return written


def _row_dict(r: EpisodeRow) -> dict:
    d: dict = {"episode_id": r.episode_id, "status": r.status}
    if r.match is not None and r.metrics is not None:
        d.update(tp=r.match.tp, fp=r.match.fp, fn=r.match.fn,
                 recall=float(r.metrics.recall), precision=float(r.metrics.precision), f1=float(r.metrics.f1))
    d.update(converged_at=r.converged_at, len_before=r.len_before, len_after=r.len_after)
    return d


def summarize_run(
    traces: Sequence[VerificationTrace],
    annotations: Mapping[str, ErrorAnnotation | None] | None = None,
    judge: str | None = None,
    planner: str | None = None,
) -> RunReport:
    """Pool per-episode counts into a report shaped like a results table.

    Failed traces are counted but excluded from metrics and convergence.
    """
    ok = [t for t in traces if not t.failed]
    mode = "single-pass" if ok and all(t.max_rounds == 1 for t in ok) else "iterative"
    report = RunReport(
        mode=mode,
        judge=judge or (ok[0].judge if ok else ""),
        planner=planner or (ok[0].planner if ok else ""),
        episodes=len(traces),
        failed=len(traces) - len(ok),
        fail_open=sum(t.fail_open_count for t in ok),
        oscillating=sum(1 for t in ok if t.status == "oscillating"),
    )
    annotations = annotations or {}
    pooled: MatchResult | None = None
    for t in traces:
        ann = annotations.get(t.episode_id)
        match = metrics = None
        if ann is not None and not t.failed:
            match = match_flags(t, ann)
            metrics = compute_metrics(match)
            pooled = match if pooled is None else pooled + match
        report.rows.append(EpisodeRow(
            t.episode_id, match, metrics, t.converged_at, len(t.initial_plan), len(t.final_plan), t.status,
        ))
    if pooled is not None:
        report.pooled = pooled
        report.metrics = compute_metrics(pooled)
    if ok:
        report.convergence = aggregate_convergence(ok)
    return report


def plot_convergence(stats: ConvergenceStats, path: str | os.PathLike[str]) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = list(range(1, stats.rounds + 1))
    ys = [float(c) * 100 for c in stats.cumulative]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o")
    for x, c in zip(xs, stats.cumulative):
        ax.annotate(f"{pct(c)}%", (x, float(c) * 100), textcoords="offset points", xytext=(0, 6), ha="center", fontsize=8)
    ax.set_xlabel("Iteration")
    ax.set_ylabel("Cumulative converged (%)")
    ax.set_xticks(xs)
    ax.set_ylim(0, 105)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = Path(path)
    fig.savefig(p, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return p
