import json

import numpy as np
import pytest

from gamegen import random_game, random_md
from stochgame import (Game, MDStrategy, Owner, Vertex, evaluate_md_pair, max_eps_hd, simulate,
                       value_iterate)
from stochgame.gallery import build_fig2, fig2_mr_value, fig2_sigma_star
from stochgame.numerics import DomainError
from stochgame.sim import SimulationError, episode_keys, uniforms

NONE_MAX = MDStrategy(Owner.MAX, {})
NONE_MIN = MDStrategy(Owner.MIN, {})


def coin():
    return Game([Vertex("c", Owner.CHANCE, 1.0, ("c", "z"), (0.5, 0.5)),
                 Vertex("z", Owner.CHANCE, 0.0, ("z",), (1.0,))])


def test_uniforms_range_and_independence_of_batching():
    keys = episode_keys(7, np.arange(1000))
    u = uniforms(keys, 3)
    assert ((u >= 0) & (u < 1)).all()
    assert abs(u.mean() - 0.5) < 0.05
    np.testing.assert_array_equal(uniforms(episode_keys(7, np.arange(10, 20)), 3), u[10:20])


def test_coin_mean():
    st = simulate(coin(), NONE_MAX, NONE_MIN, "c", episodes=20000, seed=3)
    assert abs(st.mean_acc - 2.0) < 4 * st.stderr
    assert st.truncated_fraction == 0.0 and st.bias_bound == 0.0


def test_same_seed_identical_and_threads_do_not_matter():
    g = random_game(np.random.default_rng(4))
    rng = np.random.default_rng(5)
    s, p = random_md(rng, g, Owner.MAX), random_md(rng, g, Owner.MIN)
    a = simulate(g, s, p, g.ids[0], episodes=3000, seed=11)
    b = simulate(g, s, p, g.ids[0], episodes=3000, seed=11)
    c = simulate(g, s, p, g.ids[0], episodes=3000, seed=11, threads=4)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict()) == json.dumps(c.to_dict())
    d = simulate(g, s, p, g.ids[0], episodes=3000, seed=12)
    assert d.seed == 12


def test_truncation_is_reported():
    g = Game([Vertex("v", Owner.CHANCE, 1.0, ("v",), (1.0,))])
    st = simulate(g, NONE_MAX, NONE_MIN, "v", horizon=50, episodes=10)
    assert st.mean_acc == 50.0
    assert st.truncated_fraction == 1.0
    assert st.bias_bound == 50.0


def test_targets_reach_fraction():
    g = Game([Vertex("a", Owner.CHANCE, 0.0, ("t", "s"), (0.3, 0.7)),
              Vertex("t", Owner.CHANCE, 0.0, ("t",), (1.0,)),
              Vertex("s", Owner.CHANCE, 0.0, ("s",), (1.0,))])
    st = simulate(g, NONE_MAX, NONE_MIN, "a", episodes=20000, targets=["t"])
    assert abs(st.reach_fraction - 0.3) < 0.02
    assert st.truncated_fraction == 0.0


def test_mr_strategy_fig2():
    g, _ = build_fig2(6)
    st = simulate(g, fig2_sigma_star(g), NONE_MIN, "v", episodes=40000, seed=1)
    assert abs(st.mean_acc - fig2_mr_value(6)) < 4 * st.stderr


def test_hd_strategy_runs_batched():
    g = random_game(np.random.default_rng(21))
    v = g.ids[0]
    sigma = max_eps_hd(g, 0.1, start=v)
    pi = MDStrategy(Owner.MIN, {vid: g[vid].succ[0] for vid in g.owned(Owner.MIN)})
    a = simulate(g, sigma, pi, v, episodes=2000, seed=2)
    b = simulate(g, sigma, pi, v, episodes=2000, seed=2, threads=3)
    assert a == b


class FirstVisitOnly:
    """Takes the first successor on the first move only; needs the history length."""

    player = Owner.MAX

    def __init__(self, game):
        self.game = game

    def choose(self, history):
        succ = self.game[history[-1]].succ
        return succ[0] if len(history) == 1 else succ[-1]


def test_generic_history_strategy():
    g = Game([Vertex("v", Owner.MAX, 0.0, ("a", "b")), Vertex("a", Owner.CHANCE, 1.0, ("v",), (1.0,)),
              Vertex("b", Owner.CHANCE, 0.0, ("b",), (1.0,))])
    # v -> a (reward 1) -> v -> b forever
    st = simulate(g, FirstVisitOnly(g), NONE_MIN, "v", horizon=20, episodes=3)
    assert st.mean_acc == 1.0
    assert st.truncated_fraction == 0.0


def test_errors():
    with pytest.raises(DomainError):
        simulate(coin(), NONE_MAX, NONE_MIN, "c", horizon=0)
    g = Game([Vertex("a", Owner.MAX, 0.0, ("a",))])
    with pytest.raises(SimulationError):
        simulate(g, NONE_MAX, NONE_MIN, "a", episodes=2)
