"""Iterative judge/planner verification of embodied-task action plans."""

from .critique import CritiqueSet, Missing, Remove, normalize_critiques, parse_judge_output
from .corpus import ErrorProfile, generate_corpus, inject_errors, load_episodes
from .evaluation import aggregate_convergence, compute_metrics, match_flags, summarize_run
from .loop_engine import LoopConfig, PlannerConfig, VerificationTrace, verify_corpus, verify_episode
from .plan_model import Action, Actor, Episode, ErrorAnnotation, MissingDescriptor, Plan, format_action, parse_action, parse_plan, reindex
from .planner import Revision, apply_critiques, resolve_missing

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Actor",
    "CritiqueSet",
    "Episode",
    "ErrorAnnotation",
    "ErrorProfile",
    "LoopConfig",
    "Missing",
    "MissingDescriptor",
    "Plan",
    "PlannerConfig",
    "Remove",
    "Revision",
    "VerificationTrace",
    "aggregate_convergence",
    "apply_critiques",
    "compute_metrics",
    "format_action",
    "generate_corpus",
    "inject_errors",
    "load_episodes",
    "match_flags",
    "normalize_critiques",
    "parse_action",
    "parse_judge_output",
    "parse_plan",
    "reindex",
    "resolve_missing",
    "summarize_run",
    "verify_corpus",
    "verify_episode",
]
