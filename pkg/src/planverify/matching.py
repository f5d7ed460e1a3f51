"""Matching omission flags (free text) against annotated missing steps."""

from __future__ import annotations

import re
from collections.abc import Sequence

from .plan_model import MissingDescriptor

_CALL_VERB = re.compile(r"(?:Driver|Commander)\.([A-Z][A-Za-z0-9]*)\(")
_WORD = re.compile(r"[A-Za-z]+")


def flag_verbs(description: str) -> tuple[set[str], bool]:
    """Verbs named by a flag, and whether they came from DSL calls.

    When the description quotes actions (``Driver.Place('Plate')``) only
    those verbs count; otherwise every word is a candidate.
    """
    calls = {v.lower() for v in _CALL_VERB.findall(description)}
    if calls:
        return calls, True
    return {w.lower() for w in _WORD.findall(description)}, False


def missing_matches(desc: MissingDescriptor, description: str) -> bool:
    verb = desc.verb.lower()
    verbs, exact = flag_verbs(description)
    if exact:
        verb_ok = verb in verbs
    else:
        # prose: allow inflections ("place" ~ "placed")
        verb_ok = any(w == verb or w.startswith(verb) for w in verbs)
    return verb_ok and desc.object.lower() in description.lower()


def greedy_missing_match(
    flags: Sequence[str], descriptors: Sequence[MissingDescriptor]
) -> list[tuple[int, int]]:
    """One-to-one greedy matching in order; returns (flag_idx, descriptor_idx) pairs."""
    taken: set[int] = set()
    pairs = []
    for i, f in enumerate(flags):
        for j, d in enumerate(descriptors):
            if j not in taken and missing_matches(d, f):
                taken.add(j)
                pairs.append((i, j))
                break
    return pairs


def norm_description(d: str) -> str:
    return " ".join(d.casefold().split()).rstrip(" .;!")


def dedup_descriptions(descs: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for d in descs:
        k = norm_description(d)
        if k not in seen:
            seen.add(k)
            out.append(d)
    return out
