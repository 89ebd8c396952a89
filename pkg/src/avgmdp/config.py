"""Sectioned key-value model configs.

One model per file.  Two dialects share the same surface syntax of
top-level pairs and repeatable `name { key = value, ... }` sections:

Queue models::

    lambda = 1.0
    group { m = 1, mu = 2.0, c = 1.0 }
    group { m = 1, mu = 1.0, c = 1.0 }
    holding { kind = polynomial, coeffs = [0, 1] }
    metric { r = 0.1 }

Generic CTMDPs, either delegating to a queue (`form = birth-death`, with
the queue keys alongside) or as an explicit rate table up to a horizon
whose last state's stencil repeats for every deeper state::

    ctmdp { form = table, lambda_bound = 2.0, band = 1, horizon = 4 }
    actions { state = 0, ids = [0] }          # default ids = [0]
    rate { from = 0, action = 0, to = 1, value = 0.5 }
    rate { from = 1, action = 0, to = 0, value = 1.0 }
    ...
    cost { state = 2, action = 0, value = 2.0 }
    cost_tail { coeffs = [0, 1] }             # optional, else horizon row repeats
    majorant { c = 1.0, gamma = 0.5 }         # optional

Diagonal rates are derived (rows must be conservative), so tables list
off-diagonal rates only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .common import ConfigError
from .ctmdp import GenericCtmdpModel, ctmdp_from_queue
from .policies import MetricParams
from .queueing import (
    GroupServerModel,
    HoldingCost,
    PolynomialHolding,
    ServerGroup,
    SignedLinearHolding,
)

_TOKEN = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<punct>[{}\[\],=])
  | (?P<atom>[A-Za-z0-9_.+\-]+)
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    line = 1
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ConfigError(f"line {line}: unexpected character {text[pos]!r}")
        pos = match.end()
        kind = match.lastgroup
        if kind == "ws" or kind == "comment":
            continue
        if kind == "newline":
            tokens.append(("\n", "\n", line))
            line += 1
            continue
        tokens.append((kind, match.group(), line))
    return tokens


def _atom_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx] if self.idx < len(self.tokens) else None

    def take(self):
        token = self.peek()
        if token is None:
            raise ConfigError("unexpected end of config")
        self.idx += 1
        return token

    def skip_separators(self):
        while (token := self.peek()) is not None and token[1] in ("\n", ","):
            self.idx += 1

    def parse_value(self):
        kind, text, line = self.take()
        if kind == "atom":
            return _atom_value(text)
        if text == "[":
            items = []
            self.skip_separators()
            while True:
                token = self.peek()
                if token is None:
                    raise ConfigError(f"line {line}: unterminated list")
                if token[1] == "]":
                    self.take()
                    return items
                items.append(self.parse_value())
                self.skip_separators()
        raise ConfigError(f"line {line}: expected a value, got {text!r}")

    def parse_pairs(self, stop: str | None) -> dict:
        pairs: dict = {}
        while True:
            self.skip_separators()
            token = self.peek()
            if token is None:
                if stop is None:
                    return pairs
                raise ConfigError(f"missing closing '{stop}'")
            if stop is not None and token[1] == stop:
                self.take()
                return pairs
            kind, key, line = self.take()
            if kind != "atom":
                raise ConfigError(f"line {line}: expected a key, got {key!r}")
            kind2, text2, line2 = self.take()
            if text2 != "=":
                raise ConfigError(f"line {line2}: expected '=' after {key!r}")
            pairs[key] = self.parse_value()

    def parse(self) -> list[tuple[str | None, object]]:
        """Top level: ('key', value) pairs and ('section', dict) entries in
        file order; section entries carry (name, pairs-dict)."""
        entries: list[tuple[str | None, object]] = []
        while True:
            self.skip_separators()
            token = self.peek()
            if token is None:
                return entries
            kind, name, line = self.take()
            if kind != "atom":
                raise ConfigError(f"line {line}: expected a name, got {name!r}")
            nxt = self.peek()
            if nxt is None:
                raise ConfigError(f"line {line}: dangling {name!r}")
            if nxt[1] == "=":
                self.take()
                entries.append((None, (name, self.parse_value())))
            elif nxt[1] == "{":
                self.take()
                entries.append((name, self.parse_pairs("}")))
            else:
                raise ConfigError(
                    f"line {line}: expected '=' or '{{' after {name!r}")


def parse_config_text(text: str):
    return _Parser(_tokenize(text)).parse()


def _require(pairs: dict, key: str, where: str):
    if key not in pairs:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return pairs[key]


def _holding_from(pairs: dict) -> HoldingCost:
    kind = _require(pairs, "kind", "holding")
    if kind == "polynomial":
        coeffs = _require(pairs, "coeffs", "holding")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("holding: coeffs must be a nonempty list")
        return PolynomialHolding(coeffs=tuple(float(c) for c in coeffs))
    if kind == "signed_linear":
        return SignedLinearHolding()
    raise ConfigError(f"holding: unknown kind {kind!r}")


@dataclass(frozen=True)
class LoadedConfig:
    model: object
    metric: MetricParams
    kind: str                      # "queue" or "ctmdp"


def _build_queue(top: dict, sections: list[tuple[str, dict]]) -> GroupServerModel:
    if "lambda" not in top:
        raise ConfigError("queue config: missing top-level 'lambda'")
    groups = []
    holding: HoldingCost | None = None
    for name, pairs in sections:
        if name == "group":
            groups.append(ServerGroup(
                servers=int(_require(pairs, "m", "group")),
                rate=float(_require(pairs, "mu", "group")),
                cost=float(_require(pairs, "c", "group"))))
        elif name == "holding":
            holding = _holding_from(pairs)
        elif name in ("metric", "ctmdp"):
            continue
        else:
            raise ConfigError(f"unknown section {name!r} in queue config")
    if not groups:
        raise ConfigError("queue config: at least one 'group' section is required")
    if holding is None:
        raise ConfigError("queue config: a 'holding' section is required")
    return GroupServerModel(arrival_rate=float(top["lambda"]),
                            groups=tuple(groups), holding=holding)


def _build_table_ctmdp(head: dict, sections: list[tuple[str, dict]]) -> GenericCtmdpModel:
    horizon = int(_require(head, "horizon", "ctmdp"))
    band = int(_require(head, "band", "ctmdp"))
    rate_bound = float(_require(head, "lambda_bound", "ctmdp"))
    if horizon < band:
        raise ConfigError(f"ctmdp: horizon {horizon} must be >= band {band}")

    actions_map: dict[int, tuple] = {}
    rates: dict[tuple, float] = {}
    costs: dict[tuple, float] = {}
    cost_tail: tuple[float, ...] | None = None
    majorant: tuple[float, float] | None = None
    max_forward = 1
    for name, pairs in sections:
        if name == "actions":
            state = int(_require(pairs, "state", "actions"))
            ids = _require(pairs, "ids", "actions")
            actions_map[state] = tuple(int(a) for a in ids)
        elif name == "rate":
            i = int(_require(pairs, "from", "rate"))
            a = int(_require(pairs, "action", "rate"))
            j = int(_require(pairs, "to", "rate"))
            q = float(_require(pairs, "value", "rate"))
            if i == j:
                raise ConfigError("rate: diagonals are derived; list only i != j")
            if q < 0.0:
                raise ConfigError(f"rate: negative rate {q} from {i} to {j}")
            if i > j + band:
                raise ConfigError(
                    f"rate: q({i}->{j}) reaches back {i - j} > band {band}")
            if i > horizon:
                raise ConfigError(f"rate: state {i} beyond horizon {horizon}")
            rates[(i, a, j)] = q
            max_forward = max(max_forward, j - i)
        elif name == "cost":
            costs[(int(_require(pairs, "state", "cost")),
                   int(_require(pairs, "action", "cost")))] = \
                float(_require(pairs, "value", "cost"))
        elif name == "cost_tail":
            coeffs = _require(pairs, "coeffs", "cost_tail")
            cost_tail = tuple(float(c) for c in coeffs)
        elif name == "majorant":
            majorant = (float(_require(pairs, "c", "majorant")),
                        float(_require(pairs, "gamma", "majorant")))
        elif name in ("metric", "ctmdp"):
            continue
        else:
            raise ConfigError(f"unknown section {name!r} in ctmdp config")

    diag: dict[tuple, float] = {}
    for (i, a, _j), q in rates.items():
        diag[(i, a)] = diag.get((i, a), 0.0) - q

    def actions(i: int):
        return actions_map.get(min(i, horizon), (0,))

    def rate(i: int, a, j: int) -> float:
        if i <= horizon:
            if j == i:
                return diag.get((i, a), 0.0)
            return rates.get((i, a, j), 0.0)
        if j == i:
            return diag.get((horizon, a), 0.0)
        return rates.get((horizon, a, horizon + (j - i)), 0.0)

    def cost(i: int, a) -> float:
        if i <= horizon:
            return costs.get((i, a), 0.0)
        if cost_tail is not None:
            acc = 0.0
            for c in reversed(cost_tail):
                acc = acc * i + c
            return acc
        return costs.get((horizon, a), 0.0)

    table_peak = max((abs(v) for v in costs.values()), default=0.0)
    if cost_tail is not None:
        coeffs = [abs(c) for c in cost_tail]
        coeffs[0] += table_peak
        cost_majorant = tuple(coeffs)
    else:
        cost_majorant = (table_peak,)

    return GenericCtmdpModel(
        action_sets=actions, rate=rate, cost=cost,
        rate_bound=rate_bound, band=band, forward_band=max_forward,
        majorant=majorant, cost_majorant_coeffs=cost_majorant,
        action_space_constant_from=horizon)


def build_config(entries) -> LoadedConfig:
    top: dict = {}
    sections: list[tuple[str, dict]] = []
    for name, payload in entries:
        if name is None:
            key, value = payload
            top[key] = value
        else:
            sections.append((name, payload))

    metric = MetricParams()
    for name, pairs in sections:
        if name == "metric":
            try:
                metric = MetricParams(r=float(_require(pairs, "r", "metric")))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    ctmdp_head = next((pairs for name, pairs in sections if name == "ctmdp"), None)
    if ctmdp_head is not None:
        form = _require(ctmdp_head, "form", "ctmdp")
        if form == "birth-death":
            queue = _build_queue(top, sections)
            return LoadedConfig(model=ctmdp_from_queue(queue), metric=metric,
                                kind="ctmdp")
        if form == "table":
            return LoadedConfig(model=_build_table_ctmdp(ctmdp_head, sections),
                                metric=metric, kind="ctmdp")
        raise ConfigError(f"ctmdp: unknown form {form!r}")

    return LoadedConfig(model=_build_queue(top, sections), metric=metric,
                        kind="queue")


def load_config(path: str | Path) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text))
