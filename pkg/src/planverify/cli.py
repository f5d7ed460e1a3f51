"""Command-line entry point.

Exit codes: 0 success, 1 fatal error, 2 partial failure, 64 usage error.
Settings resolve as flags > environment > ``--config`` JSON file > defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import ErrorProfile, annotation_map, generate_corpus, load_episodes, oracle_script, write_corpus
from .errors import EmptyRun, PlanVerifyError, ProfileError
from .evaluation import summarize_run
from .judges.backends import LLMJudge, load_script_file
from .judges.chat import CACHE_FILENAME, ENV_API_KEY, ENV_CACHE_DIR, ENV_ENDPOINT, ENV_MODEL, ChatClient, ResponseCache
from .judges.prompts import extract_goal, planner_goal_messages
from .judges.rules import RuleJudge
from .loop_engine import LoopConfig, PlannerConfig, load_traces, verify_corpus, write_traces
from .plan_model import Plan
from .planner import LLMInserter, ScriptInserter

log = logging.getLogger("planverify")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2, 64

DEFAULTS = {
    "judge": "rules",
    "inserter": "none",
    "max_rounds": 5,
    "parallelism": os.cpu_count() or 1,
    "formats": "json,csv,plot",
    "endpoint": "https://api.openai.com/v1/chat/completions",
    "model": "gpt-4o-mini",
    "cache": None,
    "reprompt": True,
}
ENV = {"endpoint": ENV_ENDPOINT, "model": ENV_MODEL, "api_key": ENV_API_KEY, "cache_dir": ENV_CACHE_DIR}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    corpus: str | None = None
    judge: str = "rules"
    inserter: str = "none"
    max_rounds: int = 5
    reprompt: bool = True
    cache: str | None = None
    out: str | None = None
    parallelism: int = 1
    formats: list[str] = field(default_factory=lambda: ["json", "csv", "plot"])
    endpoint: str = DEFAULTS["endpoint"]
    model: str = DEFAULTS["model"]
    api_key: str | None = None
    infer_goal: bool = False


def _resolve(args: argparse.Namespace, file_cfg: dict, name: str):
    v = getattr(args, name, None)
    if v is not None:
        return v
    env = ENV.get(name)
    if env and os.environ.get(env):
        return os.environ[env]
    if name in file_cfg:
        return file_cfg[name]
    return DEFAULTS.get(name)


def build_config(args: argparse.Namespace) -> RunConfig:
    file_cfg: dict = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read config file {args.config}: {e}") from None
    cache = _resolve(args, file_cfg, "cache")
    if cache is None and os.environ.get(ENV_CACHE_DIR):
        cache = str(Path(os.environ[ENV_CACHE_DIR]) / CACHE_FILENAME)
    cfg = RunConfig(
        corpus=_resolve(args, file_cfg, "corpus"),
        judge=str(_resolve(args, file_cfg, "judge")),
        inserter=str(_resolve(args, file_cfg, "inserter")),
        max_rounds=int(_resolve(args, file_cfg, "max_rounds")),
        reprompt=bool(_resolve(args, file_cfg, "reprompt")),
        cache=cache,
        out=_resolve(args, file_cfg, "out"),
        parallelism=int(_resolve(args, file_cfg, "parallelism")),
        endpoint=str(_resolve(args, file_cfg, "endpoint")),
        model=str(_resolve(args, file_cfg, "model")),
        api_key=os.environ.get(ENV_API_KEY) or file_cfg.get("api_key"),
        infer_goal=bool(getattr(args, "infer_goal", False) or file_cfg.get("infer_goal", False)),
    )
    fmt = _resolve(args, file_cfg, "formats")
    cfg.formats = [f.strip() for f in (fmt.split(",") if isinstance(fmt, str) else fmt) if f.strip()]
    for sel, allowed in ((cfg.judge, ("llm", "rules")), (cfg.inserter, ("llm", "none"))):
        if sel not in allowed and not sel.startswith("script:"):
            raise UsageError(f"invalid selector {sel!r}; expected one of {', '.join(allowed)} or script:<file>")
    if cfg.max_rounds < 1:
        raise UsageError("--max-rounds must be >= 1")
    if cfg.parallelism < 1:
        raise UsageError("--parallelism must be >= 1")
    bad = set(cfg.formats) - {"json", "csv", "plot"}
    if bad:
        raise UsageError(f"unknown report format(s): {', '.join(sorted(bad))}")
    return cfg


def _chat_client(cfg: RunConfig) -> ChatClient:
    cache = ResponseCache(cfg.cache) if cfg.cache else None
    return ChatClient(cfg.endpoint, cfg.model, cfg.api_key, cache=cache)


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if not cfg.corpus or not cfg.out:
        raise UsageError("verify needs --corpus and --out")
    needs_llm = cfg.judge == "llm" or cfg.inserter == "llm" or cfg.infer_goal
    if needs_llm and not cfg.api_key:
        print(f"error: {ENV_API_KEY} is not set. Export your API key, or run with --judge rules "
              f"or --judge script:<file>.", file=sys.stderr)
        return EXIT_FATAL

    episodes = load_episodes(cfg.corpus)
    client = _chat_client(cfg) if needs_llm else None
    if cfg.infer_goal:
        inferred = []
        for ep in episodes:
            goal = extract_goal(client.complete(planner_goal_messages(ep.context, ep.initial_plan)).content)  # type: ignore[union-attr]
            plan = Plan(goal, ep.initial_plan.actions, ep.initial_plan.next_id)
            inferred.append(replace(ep, initial_plan=plan))
        episodes = inferred

    if cfg.judge == "rules":
        judge = RuleJudge()
    elif cfg.judge == "llm":
        judge = LLMJudge(client, reprompt=cfg.reprompt)  # type: ignore[arg-type]
    else:
        judge = load_script_file(cfg.judge.split(":", 1)[1]).judge_for  # type: ignore[assignment]

    inserter = None
    if cfg.inserter == "llm":
        inserter = LLMInserter(client)  # type: ignore[arg-type]
    elif cfg.inserter.startswith("script:"):
        proposals = json.loads(Path(cfg.inserter.split(":", 1)[1]).read_text(encoding="utf-8"))
        inserter = ScriptInserter(proposals)
    loop_cfg = LoopConfig(cfg.max_rounds, removal_only=inserter is None, reprompt_on_malformed=cfg.reprompt)
    traces = verify_corpus(episodes, judge, PlannerConfig(inserter), loop_cfg, min(cfg.parallelism, len(episodes)))

    out = Path(cfg.out)
    write_traces(traces, out / "traces")
    refined = out / "refined"
    refined.mkdir(parents=True, exist_ok=True)
    for t in traces:
        (refined / f"{t.episode_id}.plan").write_text(t.final_plan.to_text(), encoding="utf-8")
    failed = [t for t in traces if t.failed]
    converged = sum(1 for t in traces if t.converged_at is not None)
    print(f"verified {len(traces)} episode(s): {converged} converged, {len(failed)} failed -> {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    traces = load_traces(args.traces)
    if not traces:
        raise EmptyRun(f"no traces in {args.traces}")
    annotations: dict = {}
    if args.corpus:
        annotations = {k: v for k, v in annotation_map(load_episodes(args.corpus)).items() if v is not None}
    if not annotations:
        print("warning: MissingAnnotations: no annotated episodes; metrics omitted", file=sys.stderr)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    report = summarize_run(traces, annotations)
    report.write(args.out, formats)
    line = f"{report.mode} report for {report.episodes} episode(s)"
    if report.metrics is not None:
        p = report.metrics.as_percent()
        line += f": recall {p['recall']}%, precision {p['precision']}%, F1 {p['f1']}"
    print(f"{line} -> {args.out}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    profile = ErrorProfile(args.dup_rate, args.inv_rate, args.irr_rate, args.del_rate, args.seed)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    corpus = generate_corpus(args.n, profile, require_errors=args.require_errors)
    write_corpus(corpus, args.out)
    if args.oracle_script:
        # ids in script files are file positions, so build from what was written
        oracle_script(load_episodes(args.out)).save(args.oracle_script)
    counts = corpus.counts
    summary = ", ".join(f"{k}={counts[k]}" for k in ("duplicate", "inverse_pair", "irrelevant_pickup", "deletion"))
    print(f"wrote {args.n} episode(s) to {args.out}: {summary}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="planverify", description="Iterative judge/planner verification of action plans.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run the refinement loop over a corpus")
    v.add_argument("--corpus")
    v.add_argument("--judge", help="llm | rules | script:<file>")
    v.add_argument("--inserter", help="none | llm | script:<file>")
    v.add_argument("--max-rounds", dest="max_rounds", type=int)
    v.add_argument("--no-reprompt", dest="reprompt", action="store_false", default=None)
    v.add_argument("--infer-goal", dest="infer_goal", action="store_true",
                   help="ask the planner model for each goal from the episode context")
    v.add_argument("--cache", help="response cache file (default $PV_CACHE_DIR/chat_cache.jsonl)")
    v.add_argument("--out")
    v.add_argument("--parallelism", type=int)
    v.add_argument("--config", help="JSON file with default settings")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("evaluate", help="score traces against annotations")
    e.add_argument("--traces", required=True)
    e.add_argument("--corpus")
    e.add_argument("--out", required=True)
    e.add_argument("--formats", default="json,csv,plot")
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("gen", help="generate a synthetic noisy corpus")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dup-rate", type=float, default=ErrorProfile.dup_rate)
    g.add_argument("--inv-rate", type=float, default=ErrorProfile.inv_rate)
    g.add_argument("--irr-rate", type=float, default=ErrorProfile.irr_rate)
    g.add_argument("--del-rate", type=float, default=ErrorProfile.del_rate)
    g.add_argument("--require-errors", action="store_true")
    g.add_argument("--oracle-script", help="also write a script file for a perfect oracle judge")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ProfileError as e:
        print(f"error: ProfileError: {e}", file=sys.stderr)
        return EXIT_USAGE if getattr(args, "command", "") == "gen" else EXIT_FATAL
    except (PlanVerifyError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
