"""The eleven acceptance criteria, at their stated tolerances."""

import json
import math

import numpy as np
import pytest

from acceptance_log import criterion
from gamegen import forced_infinite_game, games, random_game, random_md
from stochgame import (INF, MDStrategy, Owner, apply_L, best_response_max, best_response_min,
                       choose_lambda, evaluate_md_pair, evaluate_reach, exhaustive_md_values,
                       max_md_eps, min_md_optimal, nstep_values, ominus, reach_to_acc, simulate,
                       value_iterate)
from stochgame.bellman import kleene
from stochgame.evaluation import exhaustive_all, md_strategies
from stochgame.gallery import (build_fig1, build_fig2, fig1_max_column, fig1_md_value,
                               fig1_min_column, fig1_restricted_values, fig2_mr_value,
                               fig2_sigma_star)

NONE_MIN = MDStrategy(Owner.MIN, {})
TIME_LIMIT = 60.0

# 50 random games with at most 8 player vertices, shared by criteria 3-6
SHARED = games(2024, 50, max_players=8)


def lower(value, eps):
    """value (-) eps, clamped at 0 for finite values below eps."""
    return ominus(value, eps) if math.isinf(value) or value >= eps else 0.0


@criterion(1, "extended arithmetic: inf (-) eps = 1/eps, inf (-) 0 = inf")
def test_c01_extended_arithmetic():
    for eps in (1, 0.5, 0.01):
        assert ominus(INF, eps) == 1 / eps
    assert ominus(INF, 0) == INF


@criterion(2, "fixed-point soundness on 200 random games")
def test_c02_fixed_point():
    worst = 0.0
    for g in games(7, 200, n_max=12):
        assert max(len(v.succ) for v in g.vertices) <= 3 and len(g) <= 12
        rep = value_iterate(g)
        assert rep.converged and not rep.divergent
        res = np.abs(apply_L(g, rep.values) - rep.values).max()
        assert res < 1e-8
        worst = max(worst, res)
        prev = np.zeros(len(g))
        for x, _ in zip(kleene(g), range(rep.iterations)):
            assert (x >= prev).all()
            prev = x
    return f"max residual {worst:.2e}"


@criterion(3, "four-way determinacy: sup-inf = inf-sup = value on 50 games")
def test_c03_determinacy():
    worst = 0.0
    for g in SHARED:
        assert len(g.owned(Owner.MAX)) + len(g.owned(Owner.MIN)) <= 8
        lo, hi = exhaustive_all(g)
        val = value_iterate(g).values
        gap = max(np.abs(lo - val).max(), np.abs(hi - val).max())
        assert gap < 1e-7
        worst = max(worst, gap)
    return f"max gap {worst:.2e}"


@criterion(4, "min MD optimality: best response to min_md_optimal equals the value")
def test_c04_min_md():
    worst = 0.0
    for g in SHARED:
        rep = value_iterate(g)
        resp = best_response_max(g, min_md_optimal(g, rep))
        gap = np.abs(resp.values - rep.values).max()
        assert gap < 1e-7
        worst = max(worst, gap)
    return f"max gap {worst:.2e}"


@criterion(5, "max MD eps-optimality for eps in {0.1, 0.01}, exact check")
def test_c05_max_md_eps():
    worst = INF
    for eps in (0.1, 0.01):
        for g in SHARED:
            v = g.ids[0]
            rep = value_iterate(g)
            sigma, lam, ell = max_md_eps(g, eps, start=v, report=rep)
            need = lower(rep[v], eps)
            exact = min(evaluate_md_pair(g, sigma, pi, v).value for pi in md_strategies(g, Owner.MIN))
            assert exact >= need
            assert best_response_min(g, sigma)[v] >= need - 1e-9
            worst = min(worst, exact - need)
    return f"min margin {worst:.2e}"


@criterion(6, "n-step sufficiency: nstep_values(n) >= value (-) eps/4")
def test_c06_nstep():
    for eps in (0.1, 0.01):
        for g in SHARED:
            v = g.ids[0]
            rep = value_iterate(g)
            _, n = choose_lambda(g, v, eps, report=rep)
            assert nstep_values(g, n)[g.index[v]] >= lower(rep[v], eps / 4)


@criterion(7, "reachability reduction on 100 random triples")
def test_c07_reach_reduction():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        g = random_game(rng)
        targets = list(rng.choice(g.ids, size=int(rng.integers(1, 4)), replace=False))
        s, p = random_md(rng, g, Owner.MAX), random_md(rng, g, Owner.MIN)
        v = g.ids[int(rng.integers(len(g)))]
        a = evaluate_reach(g, s, p, v, targets)
        b = evaluate_md_pair(reach_to_acc(g, targets), s, p, v).value
        assert abs(a - b) < 1e-9
        worst = max(worst, abs(a - b))
    return f"max diff {worst:.2e}"


@criterion(8, "Fig. 1 indeterminacy trend at N = 8, 16 and closed form (1,1) = 1/3")
def test_c08_fig1():
    lo8, hi8 = fig1_restricted_values(8)
    lo16, hi16 = fig1_restricted_values(16)
    assert lo8 < 0.05 and hi8 > 0.95
    assert lo16 < 0.002 and hi16 > 0.998
    game, _ = build_fig1(8)
    exact = evaluate_reach(game, fig1_max_column(game, 1), fig1_min_column(game, 1), "v", ["t"])
    assert abs(fig1_md_value(1, 1) - 1 / 3) < 1e-12
    assert abs(exact - fig1_md_value(1, 1)) < 1e-9
    return f"N=8: ({lo8:.4g}, {hi8:.4g}); N=16: ({lo16:.4g}, {hi16:.4g})"


@criterion(9, "Fig. 2 randomization gap")
def test_c09_fig2():
    game, names = build_fig2(12)
    v = names["v"]
    mr = evaluate_md_pair(game, fig2_sigma_star(game), NONE_MIN, v).value
    assert abs(mr - 12 / (1 - 2.0**-12)) < 1e-9 and mr > 10
    assert abs(mr - fig2_mr_value(12)) < 1e-12
    for n in range(1, 13):
        md = MDStrategy(Owner.MAX, {**{u: "t" for u in game.owned(Owner.MAX)}, v: f"q{n}"})
        assert evaluate_md_pair(game, md, NONE_MIN, v).value == 2.0**n
    seq = []
    for N in (4, 8, 12, 16):
        g, _ = build_fig2(N)
        seq.append(evaluate_md_pair(g, fig2_sigma_star(g), NONE_MIN, "v").value)
    assert all(a < b for a, b in zip(seq, seq[1:]))
    return f"sigma* values {[round(x, 4) for x in seq]}"


@criterion(10, "simulation consistency on 20 MD pairs, 1e5 episodes")
def test_c10_simulation():
    rng = np.random.default_rng(10)
    worst = 0.0
    done = 0
    while done < 20:
        g = random_game(rng)
        s, p = random_md(rng, g, Owner.MAX), random_md(rng, g, Owner.MIN)
        v = g.ids[0]
        exact = evaluate_md_pair(g, s, p, v)
        if not exact.finite_certified:
            continue
        st = simulate(g, s, p, v, episodes=100_000, seed=done)
        band = 4 * st.stderr + st.bias_bound + 1e-9  # 1e-9 absorbs rounding for deterministic runs
        assert abs(st.mean_acc - exact.value) <= band
        worst = max(worst, abs(st.mean_acc - exact.value) / band)
        again = simulate(g, s, p, v, episodes=100_000, seed=done)
        assert json.dumps(st.to_dict()) == json.dumps(again.to_dict())
        done += 1
    return f"worst |error| / band = {worst:.3f}"


@criterion(11, "infinity certificate coherence on 10 forced-recurrence games")
def test_c11_infinite():
    rng = np.random.default_rng(11)
    for _ in range(10):
        g = forced_infinite_game(rng)
        s, p = random_md(rng, g, Owner.MAX), random_md(rng, g, Owner.MIN)
        v = g.ids[0]
        r = evaluate_md_pair(g, s, p, v)
        assert r.value == INF and r.method == "infinite-certificate"
        means = [simulate(g, s, p, v, horizon=h, episodes=500, seed=3).mean_acc
                 for h in (100, 1000, 10_000)]
        assert means[0] < means[1] < means[2]


if __name__ == "__main__":
    import acceptance_log

    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except Exception:
                pass
    raise SystemExit(0 if all(l.startswith("PASS") for l in acceptance_log.LINES) else 1)
