"""The two localisation constants ``v1, v2`` in ``[0, 1]``.

Each is defined by an inequality ``h(v) <= rhs`` with ``h(0) = 0``.  The value
returned is the right end of the feasible interval that starts at 0, located
by bisection to 1e-10; it satisfies the inequality and ``v + 1e-9`` does not.
When all of ``[0, 1]`` is feasible the value is 0 and ``all_feasible`` is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BISECT_TOL = 1e-10


@dataclass(frozen=True)
class VSolution:
    value: float | None
    rhs: float
    residual: float
    all_feasible: bool

    def to_json(self) -> dict:
        return {"value": self.value, "rhs": self.rhs, "residual": self.residual,
                "all_feasible": self.all_feasible}


def _first_crossing(h, rhs, n_scan=4001) -> VSolution:
    if rhs < 0 or not math.isfinite(rhs):
        return VSolution(None, rhs, float("nan"), False)
    if rhs == 0:
        return VSolution(0.0, rhs, h(0.0), False)
    grid = np.linspace(0.0, 1.0, n_scan)
    bad = [k for k, v in enumerate(grid) if h(v) > rhs]
    if not bad:
        return VSolution(0.0, rhs, h(0.0) - rhs, True)
    k = bad[0]
    lo, hi = grid[k - 1], grid[k]
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if h(mid) <= rhs:
            lo = mid
        else:
            hi = mid
    return VSolution(float(lo), rhs, h(lo) - rhs, False)


def h_v1(v, C):
    return v * math.exp(-2 * C * v)


def h_v2(v, C, coef):
    return v * math.exp(-2 * C * v) - coef * math.sqrt(v)


def solve_v_constants(lam, zeta, d_bar, C, rho_prime=1.0) -> tuple:
    """``(v1, v2)`` as :class:`VSolution` objects.

    ``v1``: ``v e^{-2Cv} <= 16 lam^2 rho' d_bar / zeta^2``.
    ``v2``: ``v e^{-2Cv} - 4 lam d_bar / (zeta^2 rho'^2) sqrt(v) <= 16 lam^2 d_bar^{3/2} / (zeta^3 rho'^{3/2})``.
    """
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    rhs1 = 16.0 * lam ** 2 * rho_prime * d_bar / zeta ** 2
    coef = 4.0 * lam * d_bar / (zeta ** 2 * rho_prime ** 2)
    rhs2 = 16.0 * lam ** 2 * d_bar ** 1.5 / (zeta ** 3 * rho_prime ** 1.5)
    return (_first_crossing(lambda v: h_v1(v, C), rhs1),
            _first_crossing(lambda v: h_v2(v, C, coef), rhs2))


def solve_v1_rhs(rhs, C) -> VSolution:
    """``v1`` for a given right-hand side directly."""
    return _first_crossing(lambda v: h_v1(v, C), rhs)
