"""Stationary policies on a countable state space and the prefix metric.

A policy is a mapping from states to actions.  The only finitely
describable policies this package manipulates are a finite action prefix
plus a named tail rule that fixes the action at every later state; that
subclass is closed under all the operations below and suffices for every
computation the toolkit performs.

Positions vs states: a model declares its first state (`start_state`,
0 for queues, 1 for the line chains), and the policy vector is indexed by
*position* p = state - start_state.  The metric weights position p by
r**p, so agreement on a long leading stretch of states makes two policies
close regardless of how the model labels its states.

The metric between policies u1, u2 is

    d(u1, u2) = sum_p [u1(p) != u2(p)] * r**p,      0 < r < 0.5,

which satisfies d(u1, u2) < r**k  iff  u1 and u2 agree at all positions
<= k.  That equivalence is what makes the metric useful: it turns
"close" into "identical on a long prefix".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterator

from .common import (
    ConfigError,
    PolicyBindingError,
    SearchSpaceTooLargeError,
    UndecidableTailError,
)

#: Actions are plain hashable values: ints for indexed action sets, tuples of
#: per-group on-counts for queue models.
Action = object

DEFAULT_ENUMERATION_CAP = 1_000_000


@dataclass(frozen=True)
class MetricParams:
    """Weight base for the policy metric; r/(1-r) < 1 requires r < 0.5."""

    r: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.r < 0.5:
            raise ValueError(f"metric weight r must lie in (0, 0.5), got {self.r}")


class TailRule:
    """Assigns an action to every position at or beyond the prefix length."""

    def action_at(self, position: int, model) -> Action:
        raise NotImplementedError

    def constant_value(self, model) -> Action | None:
        """The single action used at every tail position, or None when the
        tail is position dependent.  Position-dependent tails are rejected
        by `distance` and `prefix_agreement` unless both policies share the
        identical rule (then the tails agree pointwise by construction)."""
        return None

    def literal(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantTail(TailRule):
    action: Action

    def action_at(self, position: int, model) -> Action:
        return self.action

    def constant_value(self, model) -> Action:
        return self.action

    def literal(self) -> str:
        return f"constant({format_action(self.action)})"


@dataclass(frozen=True)
class AllOnTail(TailRule):
    """Every server on; only meaningful for models exposing `all_on_action`."""

    def action_at(self, position: int, model) -> Action:
        return self._resolve(model)

    def constant_value(self, model) -> Action:
        return self._resolve(model)

    def _resolve(self, model) -> Action:
        action = getattr(model, "all_on_action", None)
        if action is None:
            raise PolicyBindingError(
                "tail rule 'all-on' needs a model with an all-on action")
        return action

    def literal(self) -> str:
        return "all-on"


@dataclass(frozen=True)
class Policy:
    """Finite action prefix plus a tail rule; immutable once constructed.

    Equality compares the description (prefix and tail rule), not the
    binding or the display label.  Extensional equality of the induced
    state-to-action maps is `extensionally_equal`.
    """

    prefix: tuple[Action, ...]
    tail: TailRule
    label: str | None = field(default=None, compare=False)
    model: object = field(default=None, compare=False, repr=False)

    @property
    def is_bound(self) -> bool:
        return self.model is not None

    def bind(self, model) -> "Policy":
        """Validate every prefix action and the tail against the model's
        per-state action sets; returns the bound copy."""
        start = model.start_state
        for pos, action in enumerate(self.prefix):
            allowed = model.action_set(start + pos)
            if action not in allowed:
                raise PolicyBindingError(
                    f"prefix action {format_action(action)} not in the action "
                    f"set of state {start + pos}")
        # Probe the tail where the action sets can still vary and once they
        # have settled (models declare `action_space_constant_from`).
        settle = getattr(model, "action_space_constant_from", start)
        settle_pos = max(0, settle - start)
        length = len(self.prefix)
        for pos in sorted({length, max(length, settle_pos), max(length, settle_pos) + 1}):
            action = self.tail.action_at(pos, model)
            if action not in model.action_set(start + pos):
                raise PolicyBindingError(
                    f"tail action {format_action(action)} not in the action "
                    f"set of state {start + pos}")
        bound = replace(self, model=model)
        check = getattr(model, "check_bound_policy", None)
        if check is not None:
            check(bound)
        return bound

    def action(self, position: int) -> Action:
        if position < 0:
            raise IndexError(f"policy position must be >= 0, got {position}")
        if position < len(self.prefix):
            return self.prefix[position]
        return self.tail.action_at(position, self.model)

    def action_at_state(self, state: int) -> Action:
        if self.model is None:
            raise PolicyBindingError("state lookup requires a bound policy")
        return self.action(state - self.model.start_state)

    def literal(self) -> str:
        return format_policy(self)

    def __str__(self) -> str:
        return self.label or self.literal()


def bound_to(model, policy: Policy) -> Policy:
    """Return `policy` bound to `model`, validating if not already bound."""
    return policy if policy.model is model else policy.bind(model)


def _require_bound_pair(u1: Policy, u2: Policy) -> None:
    if u1.model is None or u2.model is None:
        raise PolicyBindingError("both policies must be bound to a model")
    if u1.model is not u2.model and u1.model != u2.model:
        raise PolicyBindingError("policies are bound to different models")


def _tail_values(u1: Policy, u2: Policy):
    """Constant tail actions of both policies, or None when the tails are
    the identical rule (pointwise equal regardless of constancy)."""
    if u1.tail == u2.tail:
        return None
    t1 = u1.tail.constant_value(u1.model)
    t2 = u2.tail.constant_value(u2.model)
    if t1 is None or t2 is None:
        raise UndecidableTailError(
            "tail disagreement beyond the prefixes is not eventually constant")
    return t1, t2


def distance(u1: Policy, u2: Policy, params: MetricParams = MetricParams()) -> float:
    """Metric distance sum_p [u1(p) != u2(p)] * r**p.

    The sum is exact: a finite part over positions below the longer prefix
    plus a closed-form geometric tail when the tail actions differ.  The
    result lies in [0, 1/(1-r)].
    """
    _require_bound_pair(u1, u2)
    split = max(len(u1.prefix), len(u2.prefix))
    terms = [params.r ** pos for pos in range(split)
             if u1.action(pos) != u2.action(pos)]
    total = math.fsum(terms)
    tails = _tail_values(u1, u2)
    if tails is not None and tails[0] != tails[1]:
        total += params.r ** split / (1.0 - params.r)
    return total


def in_ball(u: Policy, center: Policy, eps: float,
            params: MetricParams = MetricParams()) -> bool:
    """True iff u lies in the open ball of radius eps around center."""
    if eps <= 0.0:
        raise ValueError(f"ball radius must be positive, got {eps}")
    return distance(u, center, params) < eps


def prefix_agreement(u1: Policy, u2: Policy) -> int | float:
    """Largest k with u1(p) = u2(p) for all p <= k.

    Returns -1 when the policies differ at position 0 and math.inf when
    they are extensionally equal.
    """
    _require_bound_pair(u1, u2)
    split = max(len(u1.prefix), len(u2.prefix))
    for pos in range(split):
        if u1.action(pos) != u2.action(pos):
            return pos - 1
    tails = _tail_values(u1, u2)
    if tails is None or tails[0] == tails[1]:
        return math.inf
    return split - 1


def extensionally_equal(u1: Policy, u2: Policy) -> bool:
    return prefix_agreement(u1, u2) == math.inf


def enumeration_count(model, length: int) -> int:
    start = model.start_state
    return math.prod(len(model.action_set(start + pos)) for pos in range(length))


def enumerate_prefixes(model, length: int, tail: TailRule,
                       cap: int | None = DEFAULT_ENUMERATION_CAP) -> Iterator[Policy]:
    """All policies with the given tail and a free prefix of `length`
    positions, in lexicographic order of the models' action lists.

    Raises SearchSpaceTooLargeError up front when the product of the
    per-state action-set sizes exceeds `cap`.
    """
    if length < 0:
        raise ValueError(f"prefix length must be >= 0, got {length}")
    start = model.start_state
    sets = [model.action_set(start + pos) for pos in range(length)]
    for pos, actions in enumerate(sets):
        if not actions:
            raise ValueError(f"empty action set at state {start + pos}")
    count = math.prod(len(s) for s in sets)
    if cap is not None and count > cap:
        raise SearchSpaceTooLargeError(
            f"search space too large: {count} candidate policies exceed cap {cap}")

    def generate():
        for combo in product(*sets):
            yield Policy(prefix=tuple(combo), tail=tail).bind(model)

    return generate()


# ---------------------------------------------------------------------------
# Policy literal syntax:  prefix=[a0,a1,...];tail=constant(a) | all-on
# where each action is an integer index or a comma-free tuple like (1|0).

def format_action(action: Action) -> str:
    if isinstance(action, tuple):
        return "(" + "|".join(str(int(a)) for a in action) + ")"
    return str(action)


def parse_action(text: str) -> Action:
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        inner = text[1:-1].strip()
        if not inner:
            raise ConfigError(f"empty action tuple in {text!r}")
        try:
            return tuple(int(part) for part in inner.split("|"))
        except ValueError as exc:
            raise ConfigError(f"bad action tuple {text!r}") from exc
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"bad action literal {text!r}") from exc


def format_policy(policy: Policy) -> str:
    prefix = ",".join(format_action(a) for a in policy.prefix)
    return f"prefix=[{prefix}];tail={policy.tail.literal()}"


def _split_actions(text: str) -> list[str]:
    """Split a comma-separated action list, keeping (..|..) groups intact."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur)
    return parts


def parse_policy(text: str, label: str | None = None) -> Policy:
    """Parse the CLI/config policy literal into an unbound Policy."""
    body = text.strip()
    if ";" not in body:
        raise ConfigError(f"policy literal needs 'prefix=...;tail=...', got {text!r}")
    prefix_part, tail_part = body.split(";", 1)
    prefix_part = prefix_part.strip()
    tail_part = tail_part.strip()
    if not prefix_part.startswith("prefix=[") or not prefix_part.endswith("]"):
        raise ConfigError(f"bad prefix clause in policy literal {text!r}")
    if not tail_part.startswith("tail="):
        raise ConfigError(f"bad tail clause in policy literal {text!r}")
    inner = prefix_part[len("prefix=["):-1].strip()
    prefix = tuple(parse_action(p) for p in _split_actions(inner)) if inner else ()
    tail_spec = tail_part[len("tail="):].strip()
    if tail_spec == "all-on":
        tail: TailRule = AllOnTail()
    elif tail_spec.startswith("constant(") and tail_spec.endswith(")"):
        tail = ConstantTail(parse_action(tail_spec[len("constant("):-1]))
    else:
        raise ConfigError(f"unknown tail rule {tail_spec!r}")
    return Policy(prefix=prefix, tail=tail, label=label)
