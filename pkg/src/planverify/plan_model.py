"""Action-sequence data model and the line-oriented action DSL.

One action per line::

    Driver.PickUp('Soap')      // trailing comments are stripped
    Driver.Move(5.0)
    Driver.Turn(90)

Grammar: ``actor "." verb "(" [arg ("," arg)*] ")"`` where an arg is either a
single-quoted string or a decimal number.
"""

from __future__ import annotations

import re
from collections.abc import Collection, Iterable, Sequence
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Union

from .errors import EmptyPlan, ParseError, PlanParseError

Arg = Union[str, Decimal]

_VERB_RE = re.compile(r"[A-Z][A-Za-z0-9]*\Z")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:\.\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class Actor(str, Enum):
    DRIVER = "Driver"
    COMMANDER = "Commander"

    def __str__(self) -> str:
        return self.value


def _canonical_number(value: Decimal) -> Decimal:
    if value == value.to_integral_value():
        return Decimal(int(value))
    return value.normalize()


def format_number(value: Decimal) -> str:
    value = _canonical_number(value)
    if value == value.to_integral_value():
        return str(int(value))
    return format(value, "f")


@dataclass(frozen=True)
class Action:
    """One atomic step.

    ``stable_id`` is assigned once at ingestion and survives every edit;
    ``index`` is the current 1-based position and is rewritten by
    :func:`reindex`.
    """

    actor: Actor
    verb: str
    args: tuple[Arg, ...] = ()
    stable_id: int | None = None
    index: int | None = None

    def __post_init__(self) -> None:
        if not _VERB_RE.match(self.verb):
            raise ValueError(f"verb must be UpperCamelCase, got {self.verb!r}")
        args = []
        for a in self.args:
            if isinstance(a, str):
                if "'" in a:
                    raise ValueError(f"string argument may not contain a quote: {a!r}")
                args.append(a)
            elif isinstance(a, (int, Decimal)) and not isinstance(a, bool):
                args.append(_canonical_number(Decimal(a)))
            else:
                raise TypeError(f"unsupported argument {a!r}")
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "actor", Actor(self.actor))

    @property
    def canonical(self) -> str:
        return format_action(self)

    @property
    def objects(self) -> tuple[str, ...]:
        """String arguments, i.e. the objects this action touches."""
        return tuple(a for a in self.args if isinstance(a, str))

    def same_call(self, other: Action) -> bool:
        return (self.actor, self.verb, self.args) == (other.actor, other.verb, other.args)

    def bare(self) -> Action:
        return replace(self, stable_id=None, index=None)


def format_action(a: Action) -> str:
    parts = []
    for arg in a.args:
        parts.append(f"'{arg}'" if isinstance(arg, str) else format_number(arg))
    return f"{a.actor.value}.{a.verb}({','.join(parts)})"


def strip_comment(text: str) -> str:
    """Drop a trailing ``//`` comment that is not inside a quoted string."""
    in_str = False
    for i, ch in enumerate(text):
        if ch == "'":
            in_str = not in_str
        elif not in_str and text.startswith("//", i):
            return text[:i]
    return text


class _Scanner:
    def __init__(self, text: str, offset: int):
        self.text = text
        self.pos = 0
        self.offset = offset

    def error(self, message: str, pos: int | None = None) -> ParseError:
        at = self.pos if pos is None else pos
        return ParseError(message, column=self.offset + at, text=self.text)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str, what: str) -> None:
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of line"
            raise self.error(f"expected {what}, found {found}")
        self.pos += 1

    def ident(self, what: str) -> str:
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group()

    def arg(self) -> Arg:
        ch = self.peek()
        if ch == "'":
            start = self.pos
            end = self.text.find("'", self.pos + 1)
            if end < 0:
                raise self.error("unterminated string", start)
            self.pos = end + 1
            return self.text[start + 1 : end]
        m = _NUMBER_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            try:
                return Decimal(m.group())
            except InvalidOperation:  # pragma: no cover - regex guarantees a decimal
                raise self.error("bad number", m.start())
        raise self.error("expected quoted string or number")


def parse_action(text: str, verbs: Collection[str] | None = None) -> Action:
    """Parse one DSL line into an :class:`Action` without id or index.

    ``verbs`` enables strict mode: any verb outside the collection is
    rejected.
    """
    body = strip_comment(text)
    lead = len(body) - len(body.lstrip())
    body = body.strip()
    sc = _Scanner(body, lead)
    if not body:
        raise sc.error("empty line")

    actor_name = sc.ident("actor")
    try:
        actor = Actor(actor_name)
    except ValueError:
        raise sc.error(f"unknown actor {actor_name!r}", 0) from None
    sc.expect(".", "'.' after actor")
    verb_start = sc.pos
    if not _IDENT_RE.match(body, sc.pos):
        raise sc.error("empty verb")
    verb = sc.ident("verb")
    if not _VERB_RE.match(verb):
        raise sc.error(f"verb {verb!r} is not UpperCamelCase", verb_start)
    if verbs is not None and verb not in verbs:
        raise sc.error(f"verb {verb!r} not in whitelist", verb_start)
    sc.skip_ws()
    sc.expect("(", "'('")
    args: list[Arg] = []
    sc.skip_ws()
    if sc.peek() != ")":
        while True:
            sc.skip_ws()
            args.append(sc.arg())
            sc.skip_ws()
            if sc.peek() == ",":
                sc.pos += 1
                continue
            break
    sc.expect(")", "',' or ')'")
    sc.skip_ws()
    if sc.pos != len(body):
        raise sc.error(f"unexpected trailing text {body[sc.pos:]!r}")
    return Action(actor, verb, tuple(args))


def is_comment_or_blank(line: str) -> bool:
    s = line.strip()
    return not s or s.startswith("#") or s.startswith("//")


@dataclass(frozen=True)
class Plan:
    """A goal plus an ordered tuple of actions.

    ``next_id`` is the id the next inserted action will receive; it only ever
    grows so ids are never reused within an episode.
    """

    goal: str
    actions: tuple[Action, ...]
    next_id: int = field(default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        ids = [a.stable_id for a in self.actions]
        if any(i is None for i in ids):
            raise ValueError("every action in a plan needs a stable_id")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate stable_id in plan")
        floor = max(ids, default=0) + 1
        if self.next_id < floor:
            object.__setattr__(self, "next_id", floor)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(a.stable_id for a in self.actions)  # type: ignore[misc]

    @property
    def canonical_lines(self) -> tuple[str, ...]:
        return tuple(a.canonical for a in self.actions)

    def position_of(self, stable_id: int) -> int | None:
        for pos, a in enumerate(self.actions, start=1):
            if a.stable_id == stable_id:
                return pos
        return None

    def by_id(self, stable_id: int) -> Action | None:
        pos = self.position_of(stable_id)
        return None if pos is None else self.actions[pos - 1]

    def is_indexed(self) -> bool:
        return all(a.index == i for i, a in enumerate(self.actions, start=1))

    def to_text(self) -> str:
        return "\n".join([f"GOAL: {self.goal}", *self.canonical_lines]) + "\n"


def reindex(p: Plan) -> Plan:
    if p.is_indexed():
        return p
    actions = tuple(replace(a, index=i) for i, a in enumerate(p.actions, start=1))
    return Plan(p.goal, actions, p.next_id)


def build_plan(goal: str, actions: Iterable[Action], first_id: int = 1) -> Plan:
    """Assign fresh monotone ids starting at ``first_id`` and index 1..n."""
    out = []
    for i, a in enumerate(actions):
        out.append(replace(a, stable_id=first_id + i, index=i + 1))
    return Plan(goal, tuple(out), first_id + len(out))


def parse_plan(
    goal: str,
    lines: Sequence[str],
    verbs: Collection[str] | None = None,
    first_id: int = 1,
) -> Plan:
    """Parse a listing, skipping blank and comment lines.

    Every bad line is reported at once through :class:`PlanParseError`.
    """
    actions: list[Action] = []
    errors: list[ParseError] = []
    for lineno, line in enumerate(lines, start=1):
        if is_comment_or_blank(line):
            continue
        try:
            actions.append(parse_action(line, verbs))
        except ParseError as e:
            e.line = lineno
            e.args = (f"line {lineno}, col {e.column + 1}: {e.message}",)
            errors.append(e)
    if errors:
        raise PlanParseError(errors)
    if not actions:
        raise EmptyPlan(f"plan for goal {goal!r} has no actions")
    return build_plan(goal, actions, first_id)


def parse_plan_text(text: str, verbs: Collection[str] | None = None) -> Plan:
    """Parse the plan file format: a ``GOAL: ...`` line, then actions."""
    lines = text.splitlines()
    goal = None
    rest: list[str] = []
    for i, line in enumerate(lines):
        s = line.strip()
        if s.startswith("//") and s[2:].strip().startswith("GOAL:") and goal is None:
            goal = s[2:].strip()[5:].strip()
            rest = lines[i + 1 :]
            break
        if s.startswith("GOAL:"):
            goal = s[5:].strip()
            rest = lines[i + 1 :]
            break
        if not is_comment_or_blank(line):
            break
    if goal is None:
        raise ParseError("plan text must start with a 'GOAL: <text>' line", line=1)
    # keep original line numbers in errors
    offset = len(lines) - len(rest)
    try:
        return parse_plan(goal, rest, verbs)
    except PlanParseError as e:
        for err in e.errors:
            err.line = (err.line or 0) + offset
        raise PlanParseError(e.errors) from None


@dataclass(frozen=True)
class MissingDescriptor:
    """An annotated omission.

    ``action`` is only set for synthetic corpora, where the deleted step is
    known exactly; it carries its original stable id.
    """

    verb: str
    object: str = ""
    note: str = ""
    action: Action | None = None


@dataclass(frozen=True)
class ErrorAnnotation:
    remove_ids: frozenset[int] = frozenset()
    missing_steps: tuple[MissingDescriptor, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "remove_ids", frozenset(self.remove_ids))
        object.__setattr__(self, "missing_steps", tuple(self.missing_steps))

    @property
    def total(self) -> int:
        return len(self.remove_ids) + len(self.missing_steps)

    def check_against(self, plan: Plan) -> None:
        unknown = self.remove_ids - set(plan.ids)
        if unknown:
            raise ValueError(f"annotation refers to unknown stable ids {sorted(unknown)}")


@dataclass(frozen=True)
class Episode:
    episode_id: str
    initial_plan: Plan
    context: str = ""
    annotations: ErrorAnnotation | None = None
    # synthetic corpora only: the clean plan and the deleted steps by clean position
    clean_plan: Plan | None = None
    deletions: tuple[tuple[int, Action], ...] = ()

    def __post_init__(self) -> None:
        if not self.initial_plan.actions:
            raise EmptyPlan(f"episode {self.episode_id!r} has an empty plan")
        if self.annotations is not None:
            self.annotations.check_against(self.initial_plan)

    @property
    def goal(self) -> str:
        return self.initial_plan.goal
