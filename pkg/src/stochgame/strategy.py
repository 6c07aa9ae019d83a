"""Strategies and their synthesis.

Memoryless strategies expose ``distribution(vertex)``; history-dependent
ones expose ``choose(history)``.  The HD rules built here only look at the
last vertex and the step index, so they also provide ``choose_at(vertex,
step)`` which the simulator uses to batch episodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import bellman
from .bellman import SolveReport
from .model import Game, GameError, Owner, normalize_rewards, require_valid
from .numerics import DomainError, INF, from_json_value, oplus, ominus, to_json_value


class SynthesisError(DomainError):
    pass


def _values_array(game: Game, values) -> np.ndarray:
    if isinstance(values, SolveReport):
        if values.ids != game.ids:
            raise GameError("solve report belongs to a different game")
        values = values.values
    if isinstance(values, Mapping):
        values = game.vector(values)
    x = np.asarray(values, dtype=float)
    if x.shape != (len(game),):
        raise GameError(f"value vector has shape {x.shape}, expected ({len(game)},)")
    return x


def _player(owner) -> Owner:
    owner = Owner(owner)
    if owner == Owner.CHANCE:
        raise GameError("strategies belong to max or min")
    return owner


@dataclass(frozen=True)
class MDStrategy:
    player: Owner
    choices: Mapping[str, str]

    def distribution(self, vid: str) -> List[Tuple[str, float]]:
        return [(self.choices[vid], 1.0)]

    def choose(self, history: Sequence[str]) -> str:
        return self.choices[history[-1]]

    def choose_at(self, vid: str, step: int) -> str:
        return self.choices[vid]

    def check(self, game: Game) -> List[str]:
        problems = []
        for vid in game.owned(self.player):
            if vid not in self.choices:
                problems.append(f"{vid}: no choice")
            elif self.choices[vid] not in game[vid].succ:
                problems.append(f"{vid}: {self.choices[vid]!r} is not a successor")
        return problems

    @classmethod
    def first(cls, game: Game, player, **overrides) -> "MDStrategy":
        """First successor everywhere, except where ``overrides`` says otherwise."""
        player = _player(player)
        choices = {vid: game[vid].succ[0] for vid in game.owned(player)}
        choices.update(overrides)
        return cls(player, choices)


@dataclass(frozen=True)
class MRStrategy:
    player: Owner
    dists: Mapping[str, Tuple[Tuple[str, float], ...]]

    def distribution(self, vid: str) -> List[Tuple[str, float]]:
        return list(self.dists[vid])


class HDStrategy:
    """Deterministic history-dependent strategy."""

    kind = "hd"
    player: Owner

    def choose(self, history: Sequence[str]) -> str:
        return self.choose_at(history[-1], len(history) - 1)

    def choose_at(self, vid: str, step: int) -> str:
        raise NotImplementedError


class MemorylessHD(HDStrategy):
    rule = "md"

    def __init__(self, md: MDStrategy):
        self.md = md
        self.player = md.player

    def choose_at(self, vid, step):
        return self.md.choices[vid]

    def to_dict(self):
        return {"rule": self.rule, "choices": dict(self.md.choices)}


class SlackScheduleHD(HDStrategy):
    """Min rule: at step ``m`` take the first successor within ``eps / 2^(m+1)`` of the value.

    ``fp_tol`` absorbs the residual of an approximate fixed point: when the
    slack has shrunk below it, the exact argmin is accepted as long as it
    is within ``fp_tol``.
    """

    rule = "slack"

    def __init__(self, game: Game, values, eps: float, fp_tol: float = 1e-9):
        self.game = game
        self.values = _values_array(game, values)
        self.eps = float(eps)
        self.fp_tol = fp_tol
        self.player = Owner.MIN

    def choose_at(self, vid, step):
        i = self.game.check_vertex(vid)
        if self.game.vertices[i].owner != Owner.MIN:
            raise GameError(f"{vid} is not a min vertex")
        r = self.game.rewards[i]
        succ = self.game.succ_idx[i]
        bound = oplus(self.values[i], self.eps / 2 ** (step + 1))
        for j in succ:
            if r + self.values[j] <= bound:
                return self.game.ids[j]
        best = min(succ, key=lambda j: self.values[j])
        if r + self.values[best] <= self.values[i] + self.fp_tol * (1 + self.values[i]):
            return self.game.ids[best]
        raise SynthesisError(
            f"{vid} at step {step}: no successor within the slack; values are not a fixed point"
        )

    def to_dict(self):
        return {
            "rule": self.rule,
            "eps": self.eps,
            "values": {vid: to_json_value(x) for vid, x in zip(self.game.ids, self.values)},
        }


class CountdownHD(HDStrategy):
    """Max rule: follow n-step value tables for ``n + 1`` steps, then a memoryless tail.

    At step ``m <= n`` in ``u`` the first successor ``u'`` with
    ``r(u) + T[n-m-1][u'] >= T[n-m][u] (-) eps / 2^(m+1)`` is taken, where
    ``T[k]`` is the optimal ``k``-step value and ``T[-1] = 0``.
    """

    rule = "countdown"

    def __init__(self, game: Game, tables: Sequence[np.ndarray], eps: float, tail: MDStrategy):
        self.game = game
        self.tables = [np.asarray(t, dtype=float) for t in tables]
        self.n = len(self.tables) - 1
        self.eps = float(eps)
        self.tail = tail
        self.player = Owner.MAX

    def table(self, k: int) -> np.ndarray:
        return np.zeros(len(self.game)) if k < 0 else self.tables[k]

    def choose_at(self, vid, step):
        i = self.game.check_vertex(vid)
        if self.game.vertices[i].owner != Owner.MAX:
            raise GameError(f"{vid} is not a max vertex")
        if step > self.n:
            return self.tail.choices[vid]
        k = self.n - step
        here, nxt = self.table(k)[i], self.table(k - 1)
        slack = self.eps / 2 ** (step + 1)
        need = ominus(here, slack) if math.isinf(here) or here >= slack else 0.0
        r = self.game.rewards[i]
        for j in self.game.succ_idx[i]:
            if r + nxt[j] >= need:
                return self.game.ids[j]
        raise SynthesisError(f"{vid} at step {step}: tables are inconsistent")

    def to_dict(self):
        return {
            "rule": self.rule,
            "eps": self.eps,
            "tables": [[to_json_value(x) for x in t] for t in self.tables],
            "order": list(self.game.ids),
            "tail": dict(self.tail.choices),
        }


# -- synthesis --------------------------------------------------------------


def min_md_optimal(game: Game, values) -> MDStrategy:
    """At every Min vertex pick the first successor of least value."""
    x = _values_array(game, values)
    choices = {}
    for vid in game.owned(Owner.MIN):
        succ = game.succ_idx[game.index[vid]]
        best = min(succ, key=lambda j: x[j])  # min() keeps the first minimizer
        choices[vid] = game.ids[best]
    return MDStrategy(Owner.MIN, choices)


def min_eps_hd(game: Game, values, eps: float) -> SlackScheduleHD:
    if not eps > 0:
        raise DomainError("eps must be positive")
    return SlackScheduleHD(game, values, eps)


def _discounted_values(game: Game, lam: float, tol: float) -> Tuple[np.ndarray, float]:
    sweeps = math.log(tol * (1 - lam) / lam) / math.log(lam) if tol > 0 else INF
    if sweeps <= 1e5:
        return bellman.discounted_iterate(game, lam, tol)
    return bellman.discounted_solve(game, lam)


def max_md_eps(
    game: Game,
    eps: float,
    start: Optional[str] = None,
    report: Optional[SolveReport] = None,
    schedule=None,
) -> Tuple[MDStrategy, float, int]:
    """Memoryless Max strategy that is eps-optimal at ``start`` (or everywhere).

    Rewards are split to at most 1, a discount factor is chosen, and every
    Max vertex takes the first successor whose discounted value is within
    ``eps / (4 l)`` of the best, ``l`` being the horizon after which the
    discounted tail is below ``eps / 8``.  Returns the strategy, the
    discount factor and ``l``.
    """
    require_valid(game)
    if not eps > 0:
        raise DomainError("eps must be positive")
    split, entry = normalize_rewards(game)
    starts = [start] if start is not None else list(game.ids)
    for s in starts:
        game.check_vertex(s)
    if report is None or split.ids != game.ids:
        report = bellman.value_iterate(split)

    lam = 0.0
    for s in starts:
        sched = list(schedule) if schedule is not None else None
        lam_s, _ = bellman.choose_lambda(split, entry[s], eps, schedule=sched, report=report)
        lam = max(lam, lam_s)

    r_max = float(split.rewards.max()) if len(split) else 0.0
    ell = bellman.horizon_for_eps(lam, r_max, eps)
    slack = eps / (4 * ell) if ell > 0 else INF
    dv, err = _discounted_values(split, lam, tol=slack / 16 if ell > 0 else 1e-9)

    choices = {}
    for vid in game.owned(Owner.MAX):
        succ = game[vid].succ
        vals = [dv[split.index[entry[s]]] for s in succ]
        best = max(vals)
        margin = max(slack - 2 * err, 1e-12 * (1 + abs(best)))
        choices[vid] = next(s for s, x in zip(succ, vals) if x >= best - margin)
    return MDStrategy(Owner.MAX, choices), lam, ell


def max_eps_hd(game: Game, eps: float, start: Optional[str] = None,
               report: Optional[SolveReport] = None) -> CountdownHD:
    """History-dependent eps-optimal Max strategy built from n-step value tables.

    The eps budget is spent as eps/4 on the horizon gap, at most eps/2 on
    the per-step slack ``eps / 2^(m+1)`` and eps/8 on the memoryless tail.
    """
    require_valid(game)
    if not eps > 0:
        raise DomainError("eps must be positive")
    if report is None:
        report = bellman.value_iterate(game)
    starts = [start] if start is not None else list(game.ids)
    idxs = [game.check_vertex(s) for s in starts]
    targets = []
    for i in idxs:
        val = float(report.values[i])
        targets.append(ominus(val, eps / 4) if math.isinf(val) or val >= eps / 4 else 0.0)

    tables = []
    limit = max(bellman.DEFAULT_MAX_ITER, report.iterations)
    for x in bellman.kleene(game):
        tables.append(x)
        if all(x[i] >= t for i, t in zip(idxs, targets)):
            break
        if len(tables) > limit:
            raise bellman.ScheduleExhausted("n-step values never reach the target")
    # rewards are non-negative, so the tail can only add to the first n+1 steps
    try:
        tail, _, _ = max_md_eps(game, eps / 8, report=report)
    except bellman.ScheduleExhausted:
        x = report.values
        tail = MDStrategy(Owner.MAX, {
            vid: game.ids[max(game.succ_idx[game.index[vid]], key=lambda j: x[j])]
            for vid in game.owned(Owner.MAX)
        })
    return CountdownHD(game, tables, eps / 2, tail)


def mr_from_weights(game: Game, v: str, weights: Sequence[float]) -> MRStrategy:
    """Randomize at ``v`` proportionally to ``weights``; Dirac on the first successor elsewhere."""
    vert = game[v] if v in game else None
    if vert is None:
        raise GameError(f"unknown vertex {v!r}")
    player = _player(vert.owner)
    if len(weights) != len(vert.succ):
        raise GameError(f"{v}: {len(weights)} weights for {len(vert.succ)} successors")
    if any(not w > 0 for w in weights):
        raise DomainError("weights must be positive")
    total = math.fsum(weights)
    dists = {vid: ((game[vid].succ[0], 1.0),) for vid in game.owned(player)}
    dists[v] = tuple((s, w / total) for s, w in zip(vert.succ, weights))
    return MRStrategy(player, dists)


# -- serialization ----------------------------------------------------------


def strategy_to_dict(strategy) -> dict:
    if isinstance(strategy, MDStrategy):
        return {"player": strategy.player.value, "choices": dict(strategy.choices)}
    if isinstance(strategy, MRStrategy):
        return {
            "player": strategy.player.value,
            "kind": "mr",
            "choices": {v: [s for s, _ in d] for v, d in strategy.dists.items()},
            "probs": {v: [p for _, p in d] for v, d in strategy.dists.items()},
        }
    if isinstance(strategy, HDStrategy):
        return {"player": strategy.player.value, "kind": "hd", **strategy.to_dict()}
    raise TypeError(f"cannot serialize {type(strategy).__name__}")


def strategy_from_dict(doc: dict, game: Optional[Game] = None):
    try:
        player = _player(doc["player"])
        kind = doc.get("kind", "md")
        if kind == "md":
            return MDStrategy(player, dict(doc["choices"]))
        if kind == "mr":
            return MRStrategy(player, {
                v: tuple(zip(doc["choices"][v], map(float, doc["probs"][v])))
                for v in doc["choices"]
            })
        if kind != "hd":
            raise GameError(f"unknown strategy kind {kind!r}")
        rule = doc["rule"]
        if rule == "md":
            return MemorylessHD(MDStrategy(player, dict(doc["choices"])))
        if game is None:
            raise GameError(f"loading a {rule!r} rule needs the game")
        if rule == "slack":
            values = {v: from_json_value(x) for v, x in doc["values"].items()}
            return SlackScheduleHD(game, values, doc["eps"])
        if rule == "countdown":
            order = doc["order"]
            if list(order) != list(game.ids):
                raise GameError("countdown tables were built for a different game")
            tables = [[from_json_value(x) for x in t] for t in doc["tables"]]
            return CountdownHD(game, tables, doc["eps"], MDStrategy(Owner.MAX, dict(doc["tail"])))
        raise GameError(f"unknown HD rule {rule!r}")
    except (KeyError, TypeError) as exc:
        raise GameError(f"malformed strategy document: {exc}") from None
