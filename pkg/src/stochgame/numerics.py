"""Extended non-negative reals.

Values live in ``[0, inf]`` and are plain Python floats; ``math.inf`` is the
infinite element.  The two approximation operators follow the usual
conventions for total-reward games: ``inf`` minus an epsilon is ``1/eps``,
so "epsilon-close to infinity" means "at least 1/eps".
"""

from __future__ import annotations

import math
from typing import Iterable, Tuple

INF = math.inf


class DomainError(ValueError):
    """Raised when an operation leaves the extended non-negative reals."""


def check_ext(c: float) -> float:
    c = float(c)
    if math.isnan(c) or c < 0:
        raise DomainError(f"not an extended non-negative real: {c!r}")
    return c


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if math.isnan(eps) or eps < 0 or math.isinf(eps):
        raise DomainError(f"epsilon must be finite and >= 0, got {eps!r}")
    return eps


def oplus(c: float, eps: float) -> float:
    """Upper approximation ``c + eps`` (``inf`` stays ``inf``)."""
    return check_ext(c) + _check_eps(eps)


def ominus(c: float, eps: float) -> float:
    """Lower approximation of ``c``.

    Finite ``c`` gives ``c - eps`` and requires ``eps <= c``.  For ``c = inf``
    the result is ``1/eps``, or ``inf`` when ``eps == 0``.
    """
    c = check_ext(c)
    eps = _check_eps(eps)
    if math.isinf(c):
        return INF if eps == 0 else 1.0 / eps
    if eps > c:
        raise DomainError(f"{c!r} (-) {eps!r} would be negative")
    return c - eps


def ext_sum(terms: Iterable[Tuple[float, float]]) -> float:
    """Weighted sum of ``(value, weight)`` pairs with positive weights."""
    total = 0.0
    for value, weight in terms:
        if not weight > 0:
            raise DomainError(f"weights must be positive, got {weight!r}")
        value = check_ext(value)
        if math.isinf(value):
            return INF
        total += weight * value
    return total


def ext_le(a: float, b: float, tol: float = 0.0) -> bool:
    """``a <= b`` up to an absolute tolerance; infinities compare exactly."""
    if math.isinf(b):
        return True
    if math.isinf(a):
        return False
    return a <= b + tol


def to_json_value(c: float):
    return "inf" if math.isinf(c) else float(c)


def from_json_value(obj) -> float:
    if obj == "inf":
        return INF
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise DomainError(f"expected a number or 'inf', got {obj!r}")
    return check_ext(obj)
