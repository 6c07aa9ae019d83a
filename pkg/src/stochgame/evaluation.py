"""Exact evaluation of memoryless strategy pairs, best responses, enumeration.

Fixing memoryless strategies for both players leaves a finite Markov chain.
Expected total reward is infinite exactly when a reachable closed class
contains a positive reward; otherwise it solves ``x = r + P x`` on the
transient part.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import bellman
from .bellman import SolveReport
from .model import Game, GameError, Owner, fix_vertices, induced_chain, strategy_rules
from .numerics import DomainError, INF
from .strategy import MDStrategy

DIRECT_LIMIT = 2000
ENUM_CAP = 10**6


class EvaluationError(DomainError):
    pass


@dataclass(frozen=True)
class EvalResult:
    value: float
    finite_certified: bool
    method: str  # "linear-solve" | "iterative" | "infinite-certificate"


def chain_matrix(chain: Game) -> sp.csr_matrix:
    rows, cols, data = [], [], []
    for i, v in enumerate(chain.vertices):
        if v.owner != Owner.CHANCE:
            raise GameError(f"{v.id}: not a chance vertex, fix strategies first")
        for j, p in zip(chain.succ_idx[i], v.dist):
            rows.append(i)
            cols.append(j)
            data.append(p)
    n = len(chain)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def closed_classes(P: sp.csr_matrix) -> List[np.ndarray]:
    """Recurrent classes: strongly connected components with no exit."""
    n_comp, labels = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    has_exit = np.zeros(n_comp, dtype=bool)
    has_exit[labels[coo.row[labels[coo.row] != labels[coo.col]]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not has_exit[c]]


def _can_reach(P: sp.csr_matrix, goal: np.ndarray) -> np.ndarray:
    """Boolean mask of states with a positive-probability path into ``goal``."""
    n = P.shape[0]
    hit = np.zeros(n, dtype=bool)
    if not goal.any():
        return hit
    back = P.T.tocsr()
    for g in np.flatnonzero(goal):
        if not hit[g]:
            hit[breadth_first_order(back, g, directed=True, return_predecessors=False)] = True
    return hit


def _solve_transient(A: sp.csr_matrix, b: np.ndarray, method: str) -> np.ndarray:
    """Solve ``(I - A) x = b`` for a transient block."""
    m = A.shape[0]
    if m == 0:
        return np.zeros(0)
    if method == "linear-solve":
        M = np.eye(m) - A.toarray()
        try:
            lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise EvaluationError(f"singular transient system: {exc}") from None
        if np.min(np.abs(np.diag(lu))) < 1e-14:
            raise EvaluationError("numerically singular transient system")
        return scipy.linalg.lu_solve((lu, piv), b)
    # iterative: x <- b + A x from below, stop on a certified residual
    x = np.zeros(m)
    for _ in range(10**7):
        y = b + A @ x
        if np.abs(y - x).max() <= 1e-13 * (1 + np.abs(y).max()):
            return y
        x = y
    raise EvaluationError("iterative evaluation did not converge")


def chain_values(chain: Game, method: Optional[str] = None) -> Tuple[np.ndarray, str]:
    """Expected total reward from every state of a Markov chain."""
    return matrix_values(chain_matrix(chain), chain.rewards, method)


def matrix_values(P: sp.csr_matrix, r: np.ndarray, method: Optional[str] = None):
    n = P.shape[0]
    recurrent = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)
    for cls in closed_classes(P):
        recurrent[cls] = True
        if (r[cls] > 0).any():
            bad[cls] = True
    infinite = _can_reach(P, bad)
    x = np.zeros(n)
    x[infinite] = INF
    T = np.flatnonzero(~recurrent & ~infinite)
    if method is None:
        method = "linear-solve" if len(T) <= DIRECT_LIMIT else "iterative"
    # transient states outside `infinite` only lead to transient or zero-reward closed states
    x[T] = _solve_transient(P[T][:, T], r[T], method)
    return x, method


def chain_reach(chain: Game, targets: Iterable[str], method: Optional[str] = None) -> np.ndarray:
    """Probability of ever visiting ``targets`` from every state of a chain."""
    goal = np.zeros(len(chain), dtype=bool)
    for t in targets:
        goal[chain.check_vertex(t)] = True
    return matrix_reach(chain_matrix(chain), goal, method)


def matrix_reach(P: sp.csr_matrix, goal: np.ndarray, method: Optional[str] = None) -> np.ndarray:
    n = P.shape[0]
    able = _can_reach(P, goal)
    x = np.zeros(n)
    x[goal] = 1.0
    T = np.flatnonzero(able & ~goal)
    if method is None:
        method = "linear-solve" if len(T) <= DIRECT_LIMIT else "iterative"
    b = np.asarray(P[T][:, np.flatnonzero(goal)].sum(axis=1)).ravel()
    x[T] = _solve_transient(P[T][:, T], b, method)
    return np.clip(x, 0.0, 1.0)


def _restrict(chain: Game, v: str) -> Game:
    """Sub-chain of states reachable from ``v``."""
    P = chain_matrix(chain)
    keep = np.sort(breadth_first_order(P, chain.check_vertex(v), directed=True,
                                       return_predecessors=False))
    return Game(chain.vertices[i] for i in keep)


def evaluate_md_pair(game: Game, sigma, pi, v: str, method: Optional[str] = None) -> EvalResult:
    """Expected total reward from ``v`` under a memoryless strategy pair.

    Randomized memoryless strategies are accepted too; they simply produce a
    chain with merged probabilities.
    """
    game.check_vertex(v)
    chain = _restrict(induced_chain(game, sigma, pi), v)
    x, used = chain_values(chain, method)
    value = float(x[chain.index[v]])
    if math.isinf(value):
        return EvalResult(INF, False, "infinite-certificate")
    return EvalResult(value, True, used)


def evaluate_reach(game: Game, sigma, pi, v: str, targets: Iterable[str],
                   method: Optional[str] = None) -> float:
    game.check_vertex(v)
    targets = set(targets)
    for t in targets:
        game.check_vertex(t)
    chain = _restrict(induced_chain(game, sigma, pi), v)
    x = chain_reach(chain, [t for t in targets if t in chain.index], method)
    return float(x[chain.index[v]])


# -- best responses -----------------------------------------------------------


def best_response_min(game: Game, sigma, **solve_kw) -> SolveReport:
    """Values of the Min MDP left after fixing ``sigma`` (lower bounds from value iteration)."""
    return bellman.value_iterate(fix_vertices(game, strategy_rules(game, sigma, Owner.MAX)),
                                 **solve_kw)


def best_response_max(game: Game, pi, **solve_kw) -> SolveReport:
    return bellman.value_iterate(fix_vertices(game, strategy_rules(game, pi, Owner.MIN)),
                                 **solve_kw)


# -- enumeration ------------------------------------------------------------


def md_strategies(game: Game, player: Owner) -> Iterable[MDStrategy]:
    """All memoryless deterministic strategies, lexicographic in successor order."""
    owned = game.owned(player)
    for combo in itertools.product(*(game[vid].succ for vid in owned)):
        yield MDStrategy(player, dict(zip(owned, combo)))


def count_md(game: Game, player: Owner) -> int:
    return math.prod(len(game[vid].succ) for vid in game.owned(player))


def pair_matrix(game: Game, sigmas: Sequence[MDStrategy], pis: Sequence[MDStrategy],
                targets: Optional[Iterable[str]] = None) -> np.ndarray:
    """``M[a, b, :]`` = exact values at every vertex under ``(sigmas[a], pis[b])``."""
    n = len(game)
    goal = None
    if targets is not None:
        goal = np.zeros(n, dtype=bool)
        for t in targets:
            goal[game.check_vertex(t)] = True
    base = np.zeros((n, n))
    for i, v in enumerate(game.vertices):
        if v.owner == Owner.CHANCE:
            base[i, list(game.succ_idx[i])] = v.dist
    out = np.empty((len(sigmas), len(pis), n))
    for a, sigma in enumerate(sigmas):
        with_sigma = base.copy()
        _set_rows(game, with_sigma, sigma, Owner.MAX)
        for b, pi in enumerate(pis):
            P = with_sigma.copy()
            _set_rows(game, P, pi, Owner.MIN)
            P = sp.csr_matrix(P)
            if goal is None:
                out[a, b] = matrix_values(P, game.rewards)[0]
            else:
                out[a, b] = matrix_reach(P, goal)
    return out


def _set_rows(game: Game, P: np.ndarray, strategy: MDStrategy, owner: Owner) -> None:
    for vid in game.owned(owner):
        i = game.index[vid]
        try:
            j = game.index[strategy.choices[vid]]
        except KeyError:
            raise GameError(f"strategy has no valid entry for {vid!r}") from None
        if j not in game.succ_idx[i]:
            raise GameError(f"{vid}: {strategy.choices[vid]!r} is not a successor")
        P[i] = 0.0
        P[i, j] = 1.0


@dataclass(frozen=True)
class ExhaustiveResult:
    sup_inf: float
    inf_sup: float
    witnesses: Tuple[MDStrategy, MDStrategy]


def exhaustive_md_values(
    game: Game,
    v: str,
    targets: Optional[Iterable[str]] = None,
    cap: int = ENUM_CAP,
    sigmas: Optional[Sequence[MDStrategy]] = None,
    pis: Optional[Sequence[MDStrategy]] = None,
) -> ExhaustiveResult:
    """sup-inf and inf-sup over memoryless deterministic strategies at ``v``.

    ``sigmas`` / ``pis`` restrict the candidate sets; by default every MD
    strategy is enumerated.  The witnesses are the first strategies (in
    enumeration order) attaining the outer optimum.
    """
    idx = game.check_vertex(v)
    n_sig = len(sigmas) if sigmas is not None else count_md(game, Owner.MAX)
    n_pi = len(pis) if pis is not None else count_md(game, Owner.MIN)
    if n_sig * n_pi > cap:
        raise EvaluationError(f"{n_sig} x {n_pi} strategy pairs exceed the cap of {cap}")
    sigmas = list(sigmas) if sigmas is not None else list(md_strategies(game, Owner.MAX))
    pis = list(pis) if pis is not None else list(md_strategies(game, Owner.MIN))
    M = pair_matrix(game, sigmas, pis, targets)[:, :, idx]
    inner_min = M.min(axis=1)
    inner_max = M.max(axis=0)
    a = int(np.argmax(inner_min))
    b = int(np.argmin(inner_max))
    return ExhaustiveResult(float(inner_min[a]), float(inner_max[b]), (sigmas[a], pis[b]))


def exhaustive_all(game: Game, cap: int = ENUM_CAP, targets=None) -> Tuple[np.ndarray, np.ndarray]:
    """sup-inf and inf-sup vectors over all vertices from one enumeration."""
    n_sig, n_pi = count_md(game, Owner.MAX), count_md(game, Owner.MIN)
    if n_sig * n_pi > cap:
        raise EvaluationError(f"{n_sig} x {n_pi} strategy pairs exceed the cap of {cap}")
    M = pair_matrix(game, list(md_strategies(game, Owner.MAX)),
                    list(md_strategies(game, Owner.MIN)), targets)
    return M.min(axis=1).max(axis=0), M.max(axis=0).min(axis=0)
