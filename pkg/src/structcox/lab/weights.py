"""Minimum per-subject weights: ball minimisation and cone sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..likelihood import _Sweep, _matrix, observation_weights
from ..penalty import PenaltySpec
from .restricted import _Cone, support_of
from .sandwich import DEFAULT_C_GRID


def _omega_and_grad(X, ds, i, b):
    """``omega_i(b)`` and its gradient ``sum_q pi_qi (Psi_i - E_q)``."""
    sw = _Sweep(ds, X @ b)
    pos = int(np.flatnonzero(ds.order == i)[0])
    # failure times whose risk set starts at or before subject i's sorted position
    qs = np.flatnonzero(sw.start <= pos)
    pi = np.exp(sw.es[pos] - sw.lse[qs])
    E = sw.weighted_sums(X)[qs]
    return float(pi.sum()), pi @ (X[i] - E)


def _project_ball(b, r):
    nrm = np.linalg.norm(b)
    return b if nrm <= r else b * (r / nrm)


def _polish(X, ds, i, b, r, iters=300):
    val, g = _omega_and_grad(X, ds, i, b)
    t = 1.0
    for _ in range(iters):
        while True:
            nb = _project_ball(b - t * g, r)
            nval, ng = _omega_and_grad(X, ds, i, nb)
            if nval <= val - 1e-4 * (g @ (b - nb)) or t < 1e-14:
                break
            t *= 0.5
        if np.linalg.norm(nb - b) <= 1e-13 * (1 + np.linalg.norm(b)):
            b, val = nb, min(val, nval)
            break
        b, val, g = nb, nval, ng
        t = min(t * 2.0, 1e6)
    return b, val


def _boundary_points(k, r, count=128):
    if k == 1:
        return np.array([[-r], [r]])
    if k == 2:
        a = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return r * np.column_stack([np.cos(a), np.sin(a)])
    # Fibonacci sphere
    m = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * m / count)
    th = np.pi * (1 + 5 ** 0.5) * m
    return r * np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])


@dataclass
class MinWeight:
    value: float
    argmin: np.ndarray
    psi_lambda_min: float
    lower_factor: float
    starts: int

    def to_json(self) -> dict:
        return {"value": self.value, "argmin": self.argmin.tolist(),
                "psi_lambda_min": self.psi_lambda_min, "lower_factor": self.lower_factor,
                "starts": self.starts}


def eigen_lower_factor(design, ds) -> float:
    """``n^{-1} sum_q min{0, min_{i in R_q} lmin(Psi_i Psi_i^T)} / lmin(sum_{l in R_q} Psi_l Psi_l^T)``.

    Rank-one matrices are positive semidefinite, so every numerator is 0; the
    factor is 0 unless some risk-set Gram matrix is singular, which gives ``nan``.
    """
    X = _matrix(design)
    total = 0.0
    for s in ds.risk_start:
        Xr = X[ds.order[s:]]
        num = min(0.0, min(float(np.linalg.eigvalsh(np.outer(x, x))[0]) for x in Xr))
        den = float(np.linalg.eigvalsh(Xr.T @ Xr)[0])
        if den <= 1e-14:
            return float("nan")
        total += num / den
    return total / ds.n


def min_weight_prop1(design, ds, i: int, b_n: float, n_starts=20, seed=0) -> MinWeight:
    """Minimise ``omega_i(b)`` over ``||b||^2 <= b_n``.

    Candidates: the origin, random interior points, a boundary grid when
    ``pd <= 3`` and a 401-point scan when ``pd == 1``; the best few are
    polished by projected gradient with backtracking.
    """
    X = _matrix(design)
    if not ds.at_risk_any[i]:
        raise ValueError(f"subject {i} is never at risk")
    k = X.shape[1]
    r = float(np.sqrt(b_n))
    rng = np.random.default_rng(seed)
    starts = [np.zeros(k)]
    for _ in range(n_starts):
        z = rng.standard_normal(k)
        starts.append(z / np.linalg.norm(z) * r * rng.random() ** (1.0 / k))
    if k <= 3:
        starts.extend(_boundary_points(k, r))
    if k == 1:
        starts.extend(np.linspace(-r, r, 401)[:, None])
    vals = np.array([_omega_and_grad(X, ds, i, s)[0] for s in starts])
    best_b, best_v = starts[int(vals.argmin())], float(vals.min())
    for idx in np.argsort(vals)[:5]:
        b, v = _polish(X, ds, i, np.array(starts[idx], float), r)
        if v < best_v:
            best_b, best_v = b, v
    psi = X[i]
    lam_min = float(np.linalg.eigvalsh(np.outer(psi, psi))[0])
    return MinWeight(best_v, np.asarray(best_b, float), lam_min, eigen_lower_factor(design, ds), len(starts))


@dataclass
class OmegaSample:
    """Sampled ``min omega_i(beta* + c (b - beta*))`` over cone vectors ``b``."""

    value: float
    argmin: np.ndarray
    subject: int
    ball_sq_radius: float
    n_points: int
    label: str = "sampled"

    def to_json(self) -> dict:
        return {"value": self.value, "subject": self.subject, "ball_sq_radius": self.ball_sq_radius,
                "n_points": self.n_points, "label": self.label}


def sample_omega_lower(design, ds, beta_star, spec: PenaltySpec, support=None, mu=7.0, n_cone=1000,
                       c_grid=DEFAULT_C_GRID, radius=1.0, seed=0) -> OmegaSample:
    """Cone vectors are drawn with Euclidean norm ``radius``; ``ball_sq_radius``
    is the largest squared norm of an evaluated point, so the ball of that
    radius encloses every point."""
    beta_star = np.asarray(beta_star, dtype=float)
    if support is None:
        support = support_of(spec, beta_star)
    cone = _Cone(spec, support, mu, None)
    rng = np.random.default_rng(seed)
    k = beta_star.size
    best = (np.inf, None, -1)
    ball = 0.0
    count = 0
    on = cone.on
    for _ in range(n_cone):
        x = rng.standard_normal(k)
        if on.any():
            x = cone.project(x)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            continue
        b = x * (radius / nrm)
        for c in c_grid:
            pt = beta_star + c * (b - beta_star)
            w = observation_weights(design, ds, pt)
            masked = np.where(w.at_risk, w.omega, np.inf)
            i = int(masked.argmin())
            count += 1
            ball = max(ball, float(pt @ pt))
            if masked[i] < best[0]:
                best = (float(masked[i]), pt, i)
    return OmegaSample(best[0], best[1], best[2], ball, count)


__all__ = ["MinWeight", "OmegaSample", "eigen_lower_factor", "min_weight_prop1",
           "sample_omega_lower"]
