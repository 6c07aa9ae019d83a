"""Seeded Monte Carlo rollouts of strategy pairs.

Randomness comes from a counter-based generator: the uniform used by episode
``e`` at step ``t`` is a SplitMix64 hash of ``(seed, e, t)``.  Results are
therefore independent of batching and of the number of worker threads.
Episodes are advanced in lock-step with numpy; step-indexed HD rules are
queried once per (vertex, step), and general history-dependent strategies
fall back to a per-episode loop.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.sparse.csgraph import breadth_first_order
import scipy.sparse as sp

from .model import Game, Owner
from .numerics import DomainError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SimulationError(DomainError):
    pass


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def episode_keys(seed: int, episodes: np.ndarray) -> np.ndarray:
    seed_key = _mix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    return _mix(seed_key ^ _mix(episodes.astype(np.uint64) * _GOLDEN + np.uint64(1)))


def uniforms(keys: np.ndarray, step: int) -> np.ndarray:
    """Uniforms in [0, 1) for the given episode keys at one step."""
    z = _mix(keys + np.uint64(((step + 1) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class SimStats:
    episodes: int
    horizon: int
    mean_acc: float
    stderr: float
    truncated_fraction: float
    reach_fraction: Optional[float]
    seed: int
    bias_bound: float

    def to_dict(self):
        return asdict(self)


def _step_indexed(strategy) -> bool:
    return hasattr(strategy, "choose") and getattr(strategy, "step_indexed", True) \
        and hasattr(strategy, "choose_at") and not hasattr(strategy, "distribution")


class _Tables:
    """Padded successor / cumulative-probability rows for the stationary part."""

    def __init__(self, game: Game, strategies):
        succ, mask, weight = game.padded
        n, width = succ.shape
        self.succ = succ
        self.cum = np.full((n, width), 2.0)
        self.hd = {}  # vertex index -> HD strategy
        self.generic = [s for s in strategies if not hasattr(s, "distribution")
                        and not _step_indexed(s)]
        self.undefined = np.zeros(n, dtype=bool)
        self.probs = {}  # vertex index -> successor probabilities (memoryless part)
        owner_of = {Owner.MAX: strategies[0], Owner.MIN: strategies[1]}
        for i, v in enumerate(game.vertices):
            deg = len(v.succ)
            if v.owner == Owner.CHANCE:
                probs = np.asarray(v.dist)
            else:
                strat = owner_of[v.owner]
                if hasattr(strat, "distribution"):
                    try:
                        dist = dict(strat.distribution(v.id))
                    except KeyError:
                        self.undefined[i] = True
                        continue
                    bad = set(dist) - set(v.succ)
                    if bad:
                        raise SimulationError(f"{v.id}: strategy picks non-successors {sorted(bad)}")
                    probs = np.array([dist.get(s, 0.0) for s in v.succ])
                else:
                    self.hd[i] = strat
                    continue
            self.probs[i] = probs
            c = np.cumsum(probs)
            c[deg - 1] = 2.0
            self.cum[i, :deg] = c


def _stop_masks(game: Game, targets_mask: Optional[np.ndarray], tables: "_Tables"):
    """``(no_reward_ahead, nothing_ahead)``: states from which no positive reward
    (respectively, neither reward nor target) is reachable.  Edges that a
    memoryless strategy never takes are ignored."""
    n = len(game)
    rows, cols = [], []
    for i, s in enumerate(game.succ_idx):
        if i in tables.probs:
            live = [j for j, p in zip(s, tables.probs[i]) if p > 0]
        else:
            live = s
        rows += [i] * len(live)
        cols += list(live)
    back = sp.csr_matrix((np.ones(len(rows)), (cols, rows)), shape=(n, n))

    def reaching(mask):
        hit = np.zeros(n, dtype=bool)
        for g in np.flatnonzero(mask):
            if not hit[g]:
                hit[breadth_first_order(back, g, directed=True, return_predecessors=False)] = True
        return hit

    quiet = ~reaching(game.rewards > 0)
    if targets_mask is None:
        return quiet, quiet
    return quiet, quiet & ~reaching(targets_mask)


def _finished(quiet, dead, reached):
    return quiet & (reached | dead)


def _run_batch(game, tables, start, horizon, keys, targets_mask, masks):
    quiet, dead = masks
    m = len(keys)
    cur = np.full(m, start, dtype=np.intp)
    acc = np.zeros(m)
    reached = np.zeros(m, dtype=bool)
    active = np.ones(m, dtype=bool)
    r = game.rewards
    hd_rows = tables.hd
    for t in range(horizon):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        c = cur[idx]
        if tables.undefined[c].any():
            bad = game.ids[int(c[tables.undefined[c]][0])]
            raise SimulationError(f"strategy undefined at {bad!r}")
        acc[idx] += r[c]
        if targets_mask is not None:
            reached[idx] |= targets_mask[c]
        fin = _finished(quiet[c], dead[c], reached[idx])
        if t == horizon - 1:
            active[idx[fin]] = False
            break
        u = uniforms(keys[idx], t)
        slot = (u[:, None] >= tables.cum[c]).sum(axis=1)
        if hd_rows:
            override = {}
            for vi in np.unique(c):
                if int(vi) in hd_rows:
                    choice = hd_rows[int(vi)].choose_at(game.ids[vi], t)
                    try:
                        override[int(vi)] = game[game.ids[vi]].succ.index(choice)
                    except ValueError:
                        raise SimulationError(f"{game.ids[vi]}: {choice!r} is not a successor")
            for vi, s in override.items():
                slot[c == vi] = s
        cur[idx] = tables.succ[c, slot]
        active[idx[fin]] = False
    return acc, reached, active


def _run_generic(game, strategies, start, horizon, keys, targets_mask, masks):
    """Per-episode loop for strategies that need the full history."""
    quiet, dead = masks
    owner_of = {Owner.MAX: strategies[0], Owner.MIN: strategies[1]}
    m = len(keys)
    acc = np.zeros(m)
    reached = np.zeros(m, dtype=bool)
    active = np.zeros(m, dtype=bool)
    for e in range(m):
        key = keys[e : e + 1]
        history = [game.ids[start]]
        i = start
        for t in range(horizon):
            acc[e] += game.rewards[i]
            if targets_mask is not None:
                reached[e] |= targets_mask[i]
            if _finished(quiet[i], dead[i], reached[e]):
                break
            if t == horizon - 1:
                active[e] = True
                break
            v = game.vertices[i]
            u = float(uniforms(key, t)[0])
            if v.owner == Owner.CHANCE:
                nxt = v.succ[int(np.searchsorted(np.cumsum(v.dist)[:-1], u, side="right"))]
            else:
                strat = owner_of[v.owner]
                try:
                    if hasattr(strat, "distribution"):
                        dist = dict(strat.distribution(v.id))
                        cum = np.cumsum([dist.get(s, 0.0) for s in v.succ])[:-1]
                        nxt = v.succ[int(np.searchsorted(cum, u, side="right"))]
                    else:
                        nxt = strat.choose(history)
                except KeyError:
                    raise SimulationError(f"strategy undefined at {v.id!r}") from None
                if nxt not in v.succ:
                    raise SimulationError(f"{v.id}: {nxt!r} is not a successor")
            history.append(nxt)
            i = game.index[nxt]
    return acc, reached, active


def simulate(
    game: Game,
    sigma,
    pi,
    v: str,
    horizon: int = 10_000,
    episodes: int = 10_000,
    seed: int = 0,
    targets: Optional[Iterable[str]] = None,
    threads: int = 1,
) -> SimStats:
    """Estimate the expected accumulated reward from ``v`` by rollout.

    Each episode accumulates rewards of the first ``horizon`` vertices.  An
    episode stops early once no positive reward (and no unvisited target)
    is reachable any more; episodes still running at the horizon count as
    truncated and contribute their partial sums.
    """
    if horizon < 1 or episodes < 1:
        raise DomainError("horizon and episodes must be >= 1")
    start = game.check_vertex(v)
    targets_mask = None
    if targets is not None:
        targets_mask = np.zeros(len(game), dtype=bool)
        for t in targets:
            targets_mask[game.check_vertex(t)] = True
    strategies = (sigma, pi)
    tables = _Tables(game, strategies)
    masks = _stop_masks(game, targets_mask, tables)
    runner = _run_generic if tables.generic else _run_batch
    args = (strategies,) if tables.generic else (tables,)

    keys = episode_keys(seed, np.arange(episodes))
    n_chunks = max(1, min(threads, episodes))
    bounds = np.linspace(0, episodes, n_chunks + 1).astype(int)
    chunks = [keys[a:b] for a, b in zip(bounds, bounds[1:])]

    def work(chunk):
        return runner(game, *args, start, horizon, chunk, targets_mask, masks)

    if n_chunks == 1:
        parts = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(n_chunks) as pool:
            parts = list(pool.map(work, chunks))
    acc = np.concatenate([p[0] for p in parts])
    reached = np.concatenate([p[1] for p in parts])
    truncated = np.concatenate([p[2] for p in parts])

    mean = float(acc.mean())
    stderr = float(acc.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    trunc = float(truncated.mean())
    r_max = float(game.rewards.max()) if len(game) else 0.0
    return SimStats(
        episodes=episodes,
        horizon=horizon,
        mean_acc=mean,
        stderr=stderr,
        truncated_fraction=trunc,
        reach_fraction=float(reached.mean()) if targets_mask is not None else None,
        seed=seed,
        bias_bound=trunc * r_max * horizon,
    )
