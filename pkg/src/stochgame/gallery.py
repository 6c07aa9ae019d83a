"""Finite truncations of the determinacy counterexamples, with closed forms.

Fig. 1 grid, columns ``0..N`` (column 0 holds the named vertices)::

    row 4   p  <- d1 <- d2 <- ... <- dN          p -> v
    row 3   t  <- c1 <- c2 <- ... <- cN          c_x -> {d_x, c_(x-1)} uniformly
            u -> {t, c1, ..., cN}                (Min picks a column)
    row 2   u  <- b1 <- b2 <- ... <- bN
    row 1   s  <- a1 <- a2 <- ... <- aN          a_x -> {b_x, a_(x-1)} uniformly
    row 0   v  -> m1 -> m2 -> ... -> mN          m_x -> a_x (Max leaves the row)

``s`` and ``t`` are absorbing; the objective is reaching ``t``.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

from .model import Game, GameError, Owner, Vertex, require_valid
from .strategy import MDStrategy, MRStrategy, mr_from_weights

FIG1_NAMES = ("v", "s", "u", "t", "p")


def _check_n(N: int) -> None:
    if int(N) != N or N < 1:
        raise GameError(f"truncation must be an integer >= 1, got {N!r}")


def _chance(vid, succ, dist=None, reward=0.0) -> Vertex:
    succ = tuple(succ)
    dist = tuple(dist) if dist is not None else (1.0 / len(succ),) * len(succ)
    return Vertex(vid, Owner.CHANCE, reward, succ, dist)


def _left(row: str, base: str, x: int) -> str:
    return base if x == 1 else f"{row}{x - 1}"


def _lower_half(N: int, u_vertex: Vertex) -> List[Vertex]:
    out = [
        Vertex("v", Owner.MAX, 0.0, ("m1",)),
        _chance("s", ["s"]),
        u_vertex,
    ]
    for x in range(1, N + 1):
        succ = ("a%d" % x, "m%d" % (x + 1)) if x < N else ("a%d" % x,)
        out.append(Vertex(f"m{x}", Owner.MAX, 0.0, succ))
        out.append(_chance(f"a{x}", [f"b{x}", _left("a", "s", x)]))
        out.append(_chance(f"b{x}", [_left("b", "u", x)]))
    return out


def _upper_half(N: int, p_target: str) -> List[Vertex]:
    out = [_chance("t", ["t"]), _chance("p", [p_target])]
    for x in range(1, N + 1):
        out.append(_chance(f"c{x}", [f"d{x}", _left("c", "t", x)]))
        out.append(_chance(f"d{x}", [_left("d", "p", x)]))
    return out


def _min_u(N: int) -> Vertex:
    return Vertex("u", Owner.MIN, 0.0, ("t",) + tuple(f"c{x}" for x in range(1, N + 1)))


def build_fig1(N: int) -> Tuple[Game, Dict[str, str]]:
    """Fig. 1 truncated to columns ``0..N``; reach target is ``t``."""
    _check_n(N)
    game = Game(_lower_half(N, _min_u(N)) + _upper_half(N, "v"))
    require_valid(game)
    return game, {name: name for name in FIG1_NAMES}


def build_fig1_no_max_optimal(N: int) -> Tuple[Game, List[str]]:
    """``u`` replaced by an absorbing target ``u'``; the upper rows are dropped."""
    _check_n(N)
    verts = _lower_half(N, _chance("u'", ["u'"]))
    verts = [Vertex(v.id, v.owner, v.reward, tuple("u'" if s == "u" else s for s in v.succ), v.dist)
             for v in verts]
    game = Game(verts)
    require_valid(game)
    return game, ["u'"]


def build_fig1_no_min_optimal(N: int) -> Tuple[Game, List[str]]:
    """``p`` redirected to ``u``; only ``u`` and the two upper rows stay reachable.

    Start at ``u``.  Every column choice of Min is repeated on every pass, so
    each memoryless Min strategy reaches ``t`` with probability 1 in every
    truncation; the infimum 0 of the infinite game needs escalating columns.
    """
    _check_n(N)
    game = Game([_min_u(N)] + _upper_half(N, "u"))
    require_valid(game)
    return game, ["t"]


def build_fig2(N: int) -> Tuple[Game, Dict[str, str]]:
    """Max vertex ``v`` choosing among ``q_1..q_N`` with rewards ``2^n``, all leading to ``t``."""
    _check_n(N)
    if N >= 1024:
        raise GameError(f"2^{N} exceeds the finite reward range")
    verts = [Vertex("v", Owner.MAX, 0.0, tuple(f"q{n}" for n in range(1, N + 1)))]
    verts += [Vertex(f"q{n}", Owner.MAX, float(2**n), ("t",)) for n in range(1, N + 1)]
    verts.append(Vertex("t", Owner.MAX, 0.0, ("t",)))
    game = Game(verts)
    require_valid(game)
    return game, {"v": "v", "t": "t"}


# -- column strategies --------------------------------------------------------


def fig1_max_column(game: Game, j: int) -> MDStrategy:
    """Max walks right to column ``j`` and leaves the bottom row there."""
    n = len(game.owned(Owner.MAX)) - 1  # m1..mN plus v
    if not 1 <= j <= n:
        raise GameError(f"Max column must lie in 1..{n}, got {j}")
    choices = {"v": "m1"}
    for x in range(1, n + 1):
        choices[f"m{x}"] = f"m{x + 1}" if x < j else f"a{x}"
    return MDStrategy(Owner.MAX, choices)


def fig1_min_column(game: Game, k: int) -> MDStrategy:
    """Min sends ``u`` into column ``k`` of row 3 (column 0 is ``t`` itself)."""
    succ = game["u"].succ
    if not 0 <= k < len(succ):
        raise GameError(f"Min column must lie in 0..{len(succ) - 1}, got {k}")
    return MDStrategy(Owner.MIN, {"u": succ[k]})


def fig1_md_value(j: int, k: int) -> float:
    """Probability of reaching ``t`` from ``v`` when Max plays column ``j`` and Min column ``k``.

    Max falls into ``s`` with ``p_s = 2^-j`` per pass and Min's column ends
    in ``t`` with ``p_t = 2^-k``; otherwise the run loops back to ``v``.
    """
    if j < 0 or k < 0:
        raise GameError("columns are non-negative")
    ps = 2.0**-j
    pt = 2.0**-k
    return (1 - ps) * pt / (ps + pt - ps * pt)


def fig1_outer_columns(N: int) -> int:
    """Largest column the outer player may use in the restricted enumeration."""
    return max(1, N // 4)


def fig1_restricted_values(N: int) -> Tuple[float, float]:
    """sup-inf and inf-sup at ``v`` over column strategies of ``build_fig1(N)``.

    The outer player of each quantity is limited to columns up to
    ``fig1_outer_columns(N)`` while the inner player may use every column,
    mimicking the infinite game where the inner player can always go
    further right.
    """
    from .evaluation import exhaustive_md_values

    game, _ = build_fig1(N)
    J = fig1_outer_columns(N)
    all_max = [fig1_max_column(game, j) for j in range(1, N + 1)]
    all_min = [fig1_min_column(game, k) for k in range(0, N + 1)]
    few_max = all_max[:J]
    few_min = all_min[: J + 1]
    sup_inf = exhaustive_md_values(game, "v", ["t"], sigmas=few_max, pis=all_min).sup_inf
    inf_sup = exhaustive_md_values(game, "v", ["t"], sigmas=all_max, pis=few_min).inf_sup
    return sup_inf, inf_sup


def fig1_nomin_escalation_value(k0: int, rel_tol: float = 1e-16) -> float:
    """Reach probability in the infinite no-min-optimal game when Min plays
    column ``k0 + i`` on its ``i``-th visit to ``u``: ``1 - prod_i (1 - 2^-(k0+i))``."""
    if k0 < 0:
        raise GameError("k0 must be >= 0")
    if k0 == 0:
        return 1.0
    log_keep = 0.0
    i = 0
    while True:
        term = math.log1p(-(2.0 ** -(k0 + i)))
        log_keep += term
        if abs(term) < rel_tol:
            break
        i += 1
    return -math.expm1(log_keep)


def fig2_sigma_star(game: Game) -> MRStrategy:
    """Max picks ``q_n`` with probability proportional to ``2^-n``."""
    succ = game["v"].succ
    return mr_from_weights(game, "v", [2.0 ** -(n + 1) for n in range(len(succ))])


def fig2_mr_value(N: int) -> float:
    return N / (1 - 2.0**-N)


def gallery(name: str, N: int):
    """Dispatch by CLI name; returns ``(game, manifest)``."""
    if name == "fig1":
        game, names = build_fig1(N)
        return game, {"named": names, "targets": ["t"], "start": "v"}
    if name == "fig1-nomax":
        game, targets = build_fig1_no_max_optimal(N)
        return game, {"targets": targets, "start": "v"}
    if name == "fig1-nomin":
        game, targets = build_fig1_no_min_optimal(N)
        return game, {"targets": targets, "start": "u"}
    if name == "fig2":
        game, names = build_fig2(N)
        return game, {"named": names, "start": "v"}
    raise GameError(f"unknown gallery game {name!r}")
