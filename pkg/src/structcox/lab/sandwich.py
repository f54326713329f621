"""Two-sided comparison of the curvature norm with the empirical Euclidean norm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..likelihood import _matrix, empirical_norm, observation_weights

DEFAULT_C_GRID = tuple(np.round(np.arange(1, 10) / 10, 1))


def spread(f) -> float:
    """``max_{i,q} |f_i - f_q|``."""
    f = np.asarray(f, dtype=float)
    return float(f.max() - f.min()) if f.size else 0.0


@dataclass
class SandwichReport:
    """Raw values of the sandwich at every ``c``.

    ``lower[k] <= middle[k] <= upper[k]`` is the bound as stated, with
    ``omega_lower = min_i omega_i(beta*)`` and ``sq_norm = mean f^2``.
    ``centered_upper_ok`` tests ``middle <= mean (f - mean f)^2``.
    ``anchored_*`` compare against ``e^{-+2 a} ||f||^2_{n, beta*}``, the
    comparison the change-of-anchor argument supports without the weight step.
    """

    a_v: float
    a_alt: float
    omega_lower: float
    sq_norm: float
    sq_norm_centered: float
    anchor_norm: float
    c_grid: np.ndarray
    lower: np.ndarray
    middle: np.ndarray
    upper: np.ndarray
    slack: float = 1e-10
    lower_ok: np.ndarray = field(init=False)
    upper_ok: np.ndarray = field(init=False)
    centered_upper_ok: np.ndarray = field(init=False)
    anchored_ok: np.ndarray = field(init=False)

    def __post_init__(self):
        s = self.slack
        self.lower_ok = self.lower <= self.middle + s
        self.upper_ok = self.middle <= self.upper + s
        self.centered_upper_ok = self.middle <= self.sq_norm_centered + s
        lo = np.exp(-2 * self.a_v) * self.anchor_norm
        hi = np.exp(2 * self.a_v) * self.anchor_norm
        self.anchored_ok = (lo <= self.middle + s) & (self.middle <= hi + s)

    @property
    def passed(self) -> np.ndarray:
        return self.lower_ok & self.upper_ok

    @property
    def violations(self) -> int:
        return int((~self.passed).sum())

    @property
    def centered_violations(self) -> int:
        return int((~self.centered_upper_ok).sum())

    @property
    def anchored_violations(self) -> int:
        return int((~self.anchored_ok).sum())

    def to_json(self) -> dict:
        return {
            "a_v": self.a_v, "a_alt": self.a_alt, "omega_lower": self.omega_lower,
            "sq_norm": self.sq_norm, "sq_norm_centered": self.sq_norm_centered,
            "anchor_norm": self.anchor_norm, "c_grid": self.c_grid.tolist(),
            "lower": self.lower.tolist(), "middle": self.middle.tolist(),
            "upper": self.upper.tolist(), "pass": self.passed.tolist(),
            "centered_upper_pass": self.centered_upper_ok.tolist(),
            "anchored_pass": self.anchored_ok.tolist(),
            "violations": self.violations,
        }


def check_sandwich(design, ds, b, beta_star, c_grid=DEFAULT_C_GRID, slack=1e-10) -> SandwichReport:
    X = _matrix(design)
    b = np.asarray(b, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    f = X @ (b - beta_star)
    a_v = spread(f)
    a_alt = 2.0 * float(np.abs(f).max()) if f.size else 0.0
    omega = observation_weights(design, ds, beta_star).lower
    sq = float(np.mean(f ** 2))
    sq_c = float(np.var(f))
    c_grid = np.asarray(c_grid, dtype=float)
    middle = np.array([
        empirical_norm(design, ds, f, c * b + (1 - c) * beta_star).value for c in c_grid
    ])
    anchor = empirical_norm(design, ds, f, beta_star).value
    lower = np.full(c_grid.shape, omega * np.exp(-2 * a_v) * sq)
    upper = np.full(c_grid.shape, np.exp(2 * a_v) * sq)
    return SandwichReport(a_v, a_alt, omega, sq, sq_c, anchor, c_grid, lower, middle, upper, slack)


def random_instance(rng, max_n=30, max_pd=8, scale=None, ties=False):
    """Random ``(design, dataset, b, beta*)`` with at least one event.

    Design entries are uniform on ``[-1, 1]``; times are exponential with
    independent exponential censoring.  ``ties`` rounds times to one decimal.
    """
    from ..survival import SurvivalDataset

    while True:
        n = int(rng.integers(2, max_n + 1))
        k = int(rng.integers(1, max_pd + 1))
        X = rng.uniform(-1, 1, size=(n, k))
        T = rng.exponential(size=n)
        D = rng.exponential(2.0, size=n)
        Z = np.minimum(T, D)
        if ties:
            Z = np.round(Z, 1) + 0.1
        status = (T <= D).astype(int)
        if status.sum() == 0:
            continue
        sc = float(rng.choice([0.1, 0.5, 1.0])) if scale is None else scale
        ds = SurvivalDataset.from_arrays(Z, status, rng.uniform(size=(n, 1)))
        return X, ds, rng.normal(scale=sc, size=k), rng.normal(scale=sc, size=k)
