import math

import pytest
from hypothesis import given, strategies as st

from stochgame.numerics import (INF, DomainError, ext_le, ext_sum, from_json_value, ominus, oplus,
                                to_json_value)

finite = st.floats(min_value=0, max_value=1e9, allow_nan=False)
eps_st = st.floats(min_value=1e-6, max_value=10, allow_nan=False)


@pytest.mark.parametrize("eps", [1, 0.5, 0.01])
def test_infinity_minus_eps(eps):
    assert ominus(INF, eps) == 1 / eps
    assert oplus(INF, eps) == INF


def test_infinity_minus_zero():
    assert ominus(INF, 0) == INF


def test_finite_ops():
    assert ominus(3.0, 1.0) == 2.0
    assert oplus(3.0, 1.0) == 4.0
    assert ominus(0.5, 0.5) == 0.0


@pytest.mark.parametrize("c, eps", [(0.2, 0.5), (-1, 0.1), (math.nan, 0.1), (1.0, -0.1), (1.0, INF)])
def test_domain_errors(c, eps):
    with pytest.raises(DomainError):
        ominus(c, eps)


def test_ext_sum():
    assert ext_sum([(1.0, 0.5), (3.0, 0.5)]) == 2.0
    assert ext_sum([(1.0, 0.5), (INF, 0.5)]) == INF
    with pytest.raises(DomainError):
        ext_sum([(1.0, 0.0)])


def test_json_roundtrip():
    assert to_json_value(INF) == "inf"
    assert from_json_value("inf") == INF
    assert from_json_value(to_json_value(2.5)) == 2.5


@given(finite, eps_st)
def test_ominus_oplus_bracket(c, eps):
    assert oplus(c, eps) >= c
    if eps <= c:
        assert ominus(c, eps) <= c
        assert ominus(c, eps) >= 0


@given(eps_st)
def test_inf_approx_exceeds_every_finite_below_1_over_eps(eps):
    assert ominus(INF, eps) == pytest.approx(1 / eps)
    assert ext_le(ominus(INF, eps), INF)
    assert not ext_le(INF, 1e300)
