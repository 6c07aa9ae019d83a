"""Bellman operator, Kleene value iteration and discounted solving.

Undiscounted iteration starts from the zero vector, so every iterate is a
sound lower bound on the game value.  Stopping on a small residual does not
certify the gap to the least fixed point; only the discounted solvers carry
error bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Iterator, Optional, Tuple

import numpy as np

from .model import Game, GameError, Owner, require_valid
from .numerics import DomainError, INF, ominus

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
DEFAULT_BOUND = 1e12


@dataclass
class SolveReport:
    ids: Tuple[str, ...]
    values: np.ndarray
    iterations: int
    residual: float
    divergent: FrozenSet[str] = field(default_factory=frozenset)
    converged: bool = False

    def __getitem__(self, vid: str) -> float:
        return float(self.values[self.ids.index(vid)])

    def as_dict(self):
        return {vid: float(x) for vid, x in zip(self.ids, self.values)}


def _backup(game: Game, x: np.ndarray) -> np.ndarray:
    """Max / min / expectation of ``x`` over successors, per vertex."""
    succ, mask, weight = game.padded
    vals = x[succ]
    hi = np.where(mask, vals, -INF).max(axis=1)
    lo = np.where(mask, vals, INF).min(axis=1)
    with np.errstate(invalid="ignore"):
        avg = np.where(weight > 0, weight * vals, 0.0).sum(axis=1)
    codes = game.owner_codes
    return np.where(codes == 0, hi, np.where(codes == 1, lo, avg))


def apply_L(game: Game, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(game),):
        raise GameError(f"value vector has shape {x.shape}, expected ({len(game)},)")
    return game.rewards + _backup(game, x)


def kleene(game: Game) -> Iterator[np.ndarray]:
    """Yield L(0), L^2(0), ... forever."""
    x = np.zeros(len(game))
    while True:
        x = apply_L(game, x)
        yield x


def value_iterate(
    game: Game,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_bound: float = DEFAULT_BOUND,
) -> SolveReport:
    """Iterate ``x <- L(x)`` from zero.

    Vertices whose value exceeds ``divergence_bound`` are flagged divergent
    and reported as ``inf``; that flag means "exceeded the bound", not a
    proof that the value is infinite.  ``converged`` is set when the largest
    per-vertex increase drops below ``tol`` and nothing was flagged.
    """
    require_valid(game)
    if not tol > 0:
        raise DomainError("tol must be positive")
    x = np.zeros(len(game))
    flagged = np.zeros(len(game), dtype=bool)
    residual = INF
    n = 0
    while n < max_iter:
        y = apply_L(game, x)
        n += 1
        y[flagged] = INF
        over = np.isfinite(y) & (y > divergence_bound)
        flagged |= over
        y[over] = INF
        live = np.isfinite(y)
        residual = float((y[live] - x[live]).max()) if live.any() else 0.0
        x = y
        if residual < tol:
            break
    divergent = frozenset(game.ids[i] for i in np.flatnonzero(flagged))
    return SolveReport(
        ids=game.ids,
        values=x,
        iterations=n,
        residual=residual,
        divergent=divergent,
        converged=residual < tol and not divergent,
    )


def nstep_values(game: Game, n: int) -> np.ndarray:
    """Optimal expected reward of the first ``n + 1`` visited vertices, i.e. L^(n+1)(0)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    x = np.zeros(len(game))
    for _ in range(n + 1):
        x = apply_L(game, x)
    return x


# -- discounting ------------------------------------------------------------


def _check_discount(game: Game, lam: float) -> None:
    if not 0 < lam < 1:
        raise DomainError(f"discount factor must lie in (0, 1), got {lam!r}")
    if len(game) and game.rewards.max() > 1:
        raise DomainError("discounted solving expects rewards <= 1; normalize first")


def discounted_iterate(
    game: Game, lam: float, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None
) -> Tuple[np.ndarray, float]:
    """Value iteration for ``sum_i lam^i r(w_i)``.

    Stops once the residual is below ``tol * (1 - lam) / lam``; the returned
    bound ``lam / (1 - lam) * residual`` on the sup-norm distance to the
    discounted fixed point is then at most ``tol``.
    """
    require_valid(game)
    _check_discount(game, lam)
    stop = tol * (1 - lam) / lam
    x = np.zeros(len(game))
    for n in itertools.count(1):
        y = game.rewards + lam * _backup(game, x)
        residual = float(np.abs(y - x).max()) if len(game) else 0.0
        x = y
        if residual < stop:
            return x, lam / (1 - lam) * residual
        if max_iter is not None and n >= max_iter:
            raise DomainError(f"discounted iteration did not reach tolerance in {max_iter} steps")


def _md_matrix(game: Game, choice: np.ndarray) -> np.ndarray:
    """Transition matrix where player vertex ``i`` moves to ``choice[i]``."""
    n = len(game)
    P = np.zeros((n, n))
    for i, v in enumerate(game.vertices):
        if v.owner == Owner.CHANCE:
            P[i, list(game.succ_idx[i])] = v.dist
        else:
            P[i, choice[i]] = 1.0
    return P


def discounted_solve(game: Game, lam: float, max_rounds: int = 10_000) -> Tuple[np.ndarray, float]:
    """Discounted values by strategy improvement with exact linear solves.

    Used where value iteration would need on the order of ``1/(1-lam)``
    sweeps.  Returns the values and the Bellman residual of the result.
    """
    require_valid(game)
    _check_discount(game, lam)
    n = len(game)
    codes = game.owner_codes
    choice = np.array([s[0] for s in game.succ_idx], dtype=np.intp)
    eye = np.eye(n)

    def evaluate(ch):
        return np.linalg.solve(eye - lam * _md_matrix(game, ch), game.rewards)

    def improve(x, owner_code, better):
        changed = False
        thr = 1e-12 * (1.0 + float(np.abs(x).max()))
        for i in np.flatnonzero(codes == owner_code):
            succ = game.succ_idx[i]
            vals = x[list(succ)]
            j = int(np.argmax(vals)) if better > 0 else int(np.argmin(vals))
            if better * (vals[j] - x[choice[i]]) > thr:
                choice[i] = succ[j]
                changed = True
        return changed

    for _ in range(max_rounds):
        for _ in range(max_rounds):
            x = evaluate(choice)
            if not improve(x, 1, -1):
                break
        if not improve(x, 0, +1):
            y = game.rewards + lam * _backup(game, x)
            return x, float(np.abs(y - x).max()) if n else 0.0
    raise DomainError("strategy improvement did not stabilize")


def horizon_for_eps(lam: float, max_reward: float, eps: float) -> int:
    """Least ``l`` with ``lam^l / (1 - lam) * max_reward < eps / 8``."""
    if not 0 < lam < 1:
        raise DomainError(f"discount factor must lie in (0, 1), got {lam!r}")
    if max_reward <= 0:
        return 0

    def ok(l):
        return lam**l / (1 - lam) * max_reward < eps / 8

    guess = math.log(eps * (1 - lam) / (8 * max_reward)) / math.log(lam)
    l = max(0, math.ceil(guess))
    while l > 0 and ok(l - 1):
        l -= 1
    while not ok(l):
        l += 1
    return l


def default_schedule() -> Iterator[float]:
    """lam_i = 1 - 2^-i for i = 1, 2, ... while representable below 1."""
    for i in itertools.count(1):
        lam = 1.0 - 2.0**-i
        if lam >= 1.0:
            return
        yield lam


class ScheduleExhausted(DomainError):
    pass


def choose_lambda(
    game: Game,
    v: str,
    eps: float,
    schedule: Optional[Iterable[float]] = None,
    report: Optional[SolveReport] = None,
    max_n: Optional[int] = None,
) -> Tuple[float, int]:
    """Pick a horizon ``n`` and discount factor for an eps-approximation at ``v``.

    ``n`` is the least horizon whose optimal ``n``-step value at ``v`` reaches
    the (lower-bound) game value minus ``eps/4``; a value flagged divergent
    is approximated by ``1/(eps/4)``.  The discount factor is the first
    schedule entry with ``lam^n >= 1 - eps / (4 (n+1) max(r, 1))``, which keeps
    the discounted sum within ``eps/4`` of the ``n``-step sum on every run.
    """
    require_valid(game)
    if not eps > 0:
        raise DomainError("eps must be positive")
    idx = game.check_vertex(v)
    if len(game) and game.rewards.max() > 1:
        raise DomainError("choose_lambda expects rewards <= 1; normalize first")
    if report is None:
        report = value_iterate(game)
    if max_n is None:
        max_n = max(DEFAULT_MAX_ITER, report.iterations)
    value = float(report.values[idx])
    # explicit clamp: a finite value below eps/4 is approximated by 0
    target = ominus(value, eps / 4) if math.isinf(value) or value >= eps / 4 else 0.0

    n = 0
    for x in kleene(game):
        if x[idx] >= target:
            break
        n += 1
        if n > max_n:
            raise ScheduleExhausted(f"{v}: {max_n}-step values never reach {target}")

    r_max = max(float(game.rewards.max()) if len(game) else 0.0, 1.0)
    need = 1 - eps / (4 * (n + 1) * r_max)
    for lam in schedule if schedule is not None else default_schedule():
        if lam**n >= need:
            return lam, n
    raise ScheduleExhausted(f"{v}: no discount factor in the schedule satisfies lam^{n} >= {need}")
