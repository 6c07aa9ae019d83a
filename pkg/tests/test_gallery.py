import math

import pytest

from stochgame import GameError, MDStrategy, Owner, evaluate_md_pair, evaluate_reach, validate, value_iterate
from stochgame.evaluation import exhaustive_md_values
from stochgame.gallery import (build_fig1, build_fig1_no_max_optimal, build_fig1_no_min_optimal,
                               build_fig2, fig1_max_column, fig1_md_value, fig1_min_column,
                               fig1_nomin_escalation_value, fig1_restricted_values, fig2_mr_value,
                               fig2_sigma_star, gallery)

NONE_MIN = MDStrategy(Owner.MIN, {})


@pytest.mark.parametrize("N", range(1, 21))
def test_all_gallery_games_valid(N):
    for name in ("fig1", "fig1-nomax", "fig1-nomin", "fig2"):
        game, _ = gallery(name, N)
        assert validate(game) == []


def test_fig1_size():
    assert len(build_fig1(1)[0]) == 10
    assert len(build_fig1(5)[0]) == 30


def test_closed_form_examples():
    assert fig1_md_value(1, 1) == pytest.approx(1 / 3)
    for j in range(6):
        assert fig1_md_value(j, 0) == pytest.approx(1 - 2.0**-j)
    for k in range(6):
        assert fig1_md_value(0, k) == 0.0


@pytest.mark.parametrize("N", [3, 6])
def test_fig1_columns_match_closed_form(N):
    game, _ = build_fig1(N)
    for j in range(1, N + 1):
        for k in range(0, N + 1):
            got = evaluate_reach(game, fig1_max_column(game, j), fig1_min_column(game, k), "v", ["t"])
            assert got == pytest.approx(fig1_md_value(j, k), abs=1e-9)
            # the loose bound (1 - p_s) p_t / p_s dominates the exact value
            assert got <= (1 - 2.0**-j) * 2.0**-k / 2.0**-j + 1e-12


def test_fig1_bad_columns():
    game, _ = build_fig1(3)
    with pytest.raises(GameError):
        fig1_max_column(game, 0)
    with pytest.raises(GameError):
        fig1_min_column(game, 4)


def test_fig1_trend():
    values = {N: fig1_restricted_values(N) for N in (2, 4, 8, 16)}
    sup_infs = [values[N][0] for N in (4, 8, 16)]
    inf_sups = [values[N][1] for N in (4, 8, 16)]
    assert sup_infs == sorted(sup_infs, reverse=True)
    assert inf_sups == sorted(inf_sups)
    assert values[8][0] < 0.05 and values[8][1] > 0.95


@pytest.mark.parametrize("N", [1, 4, 10])
def test_fig1_no_max_optimal(N):
    game, targets = build_fig1_no_max_optimal(N)
    res = exhaustive_md_values(game, "v", targets)
    assert res.sup_inf == pytest.approx(1 - 2.0**-N, abs=1e-12)
    assert res.sup_inf < 1
    assert value_iterate(game).values.max() <= 1


def test_fig1_no_min_optimal_structure():
    game, targets = build_fig1_no_min_optimal(5)
    assert targets == ["t"]
    assert len(game["u"].succ) == 6
    assert game.owned(Owner.MAX) == []
    # every fixed column eventually wins for the reacher in a finite truncation
    for k in range(6):
        assert evaluate_reach(game, MDStrategy(Owner.MAX, {}), fig1_min_column(game, k), "u", targets) \
            == pytest.approx(1.0)


def test_fig1_no_min_escalation_trend():
    vals = [fig1_nomin_escalation_value(k) for k in (1, 2, 4, 8, 16)]
    assert vals == sorted(vals, reverse=True)
    for k, v in zip((1, 2, 4, 8, 16), vals):
        assert 0 < v <= 2.0 ** (1 - k)
    assert fig1_nomin_escalation_value(0) == 1.0


def test_fig2():
    game, names = build_fig2(12)
    assert value_iterate(game)[names["v"]] == 2.0**12
    sigma = fig2_sigma_star(game)
    got = evaluate_md_pair(game, sigma, NONE_MIN, "v").value
    assert got == pytest.approx(fig2_mr_value(12), rel=1e-12)
    for n in range(1, 13):
        md = MDStrategy(Owner.MAX, {**{f"q{i}": "t" for i in range(1, 13)}, "v": f"q{n}", "t": "t"})
        assert evaluate_md_pair(game, md, NONE_MIN, "v").value == 2.0**n


def test_fig2_randomization_overtakes_each_fixed_choice():
    # sigma*(N) ~ N, so it beats the fixed choice q_n as soon as N > 2^n
    prev = 0.0
    for N in (4, 8, 12, 16, 20):
        game, _ = build_fig2(N)
        mr = evaluate_md_pair(game, fig2_sigma_star(game), NONE_MIN, "v").value
        assert mr > prev
        prev = mr
        for n in range(1, N + 1):
            if N > 2**n:
                assert mr > 2.0**n


def test_fig2_too_big():
    with pytest.raises(GameError):
        build_fig2(2000)


def test_unknown_name():
    with pytest.raises(GameError):
        gallery("fig3", 2)
