"""Sampling estimate of the restricted-eigenvalue constant over a penalty cone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..basis import DictionarySpec, evaluate_basis
from ..likelihood import hessian as neg_hessian
from ..penalty import PenaltySpec, lp_norm

DEGENERATE_RATIO = 1e-8


def group_penalties(spec: PenaltySpec, x) -> np.ndarray:
    """Per-group ``|G_j|^{1/gamma_j*} rho(||x_j||)`` without lambda."""
    x = np.asarray(x, dtype=float)
    return np.array([s * spec.rho(lp_norm(x[g], gm))
                     for g, gm, s in zip(spec.structure.groups, spec.gammas, spec.scalings)])


def support_of(spec: PenaltySpec, beta, tol=0.0) -> tuple:
    beta = np.asarray(beta, dtype=float)
    return tuple(j for j, g in enumerate(spec.structure.groups) if np.abs(beta[g]).max() > tol)


def in_cone(spec: PenaltySpec, x, support, mu=7.0, rtol=1e-12) -> bool:
    """``P(x_{M^c}) <= mu P(x_M)``."""
    pen = group_penalties(spec, x)
    on = np.zeros(pen.size, bool)
    on[list(support)] = True
    return bool(pen[~on].sum() <= mu * pen[on].sum() * (1 + rtol) + 1e-300)


def constant_directions(dspec: DictionarySpec, p: int) -> np.ndarray:
    """Per-group coefficient vector ``c`` with ``Psi(x)^T c`` constant, or zeros.

    Such directions change every risk score by the same amount, so the partial
    likelihood has zero curvature along them whatever the sample.
    """
    grid = np.linspace(*dspec.domain, 513)
    B = evaluate_basis(dspec, grid)
    c, *_ = np.linalg.lstsq(B, np.ones(grid.size), rcond=None)
    if np.abs(B @ c - 1).max() > 1e-8:
        c = np.zeros(dspec.d)
    return np.tile(c, p)


@dataclass
class REEstimate:
    zeta_hat: float
    zeta_sq: float
    mu: float
    samples: int
    skipped: int
    min_direction: np.ndarray
    trace: np.ndarray
    support: tuple
    degenerate: bool
    label: str = "sampled"

    def to_json(self) -> dict:
        return {"zeta_hat": self.zeta_hat, "zeta_sq": self.zeta_sq, "mu": self.mu,
                "samples": self.samples, "skipped": self.skipped,
                "min_direction": self.min_direction.tolist(), "support": list(self.support),
                "degenerate": self.degenerate, "label": self.label}


class _Cone:
    def __init__(self, spec, support, mu, remove):
        self.spec = spec
        self.mu = mu
        self.support = tuple(support)
        on = np.zeros(spec.structure.n_coords, bool)
        for j in self.support:
            on[spec.structure.groups[j]] = True
        self.on = on
        self.remove = remove

    def project(self, x):
        """Drop the removable directions blockwise, then shrink the off-support
        part until the cone condition holds."""
        x = np.array(x, dtype=float)
        if self.remove is not None:
            for g in self.spec.structure.groups:
                c = self.remove[g]
                cc = c @ c
                if cc > 0:
                    x[g] -= (c @ x[g]) / cc * c
        on_pen = group_penalties(self.spec, np.where(self.on, x, 0.0)).sum()
        for _ in range(60):
            off_pen = group_penalties(self.spec, np.where(self.on, 0.0, x)).sum()
            if off_pen <= self.mu * on_pen:
                return x
            x = np.where(self.on, x, 0.5 * x)
        return np.where(self.on, x, 0.0)


def _candidates(cone: _Cone, H, n_samples, rng):
    k = H.shape[0]
    on_idx = np.flatnonzero(cone.on)
    for i in on_idx:
        e = np.zeros(k)
        e[i] = 1.0
        yield e
    vals, vecs = np.linalg.eigh(H)
    for i in range(min(k, 8)):
        yield vecs[:, i]
    if on_idx.size:
        sub_vals, sub_vecs = np.linalg.eigh(H[np.ix_(on_idx, on_idx)])
        for i in range(min(on_idx.size, 8)):
            x = np.zeros(k)
            x[on_idx] = sub_vecs[:, i]
            yield x
    spec = cone.spec
    for _ in range(n_samples):
        x = np.zeros(k)
        x[on_idx] = rng.standard_normal(on_idx.size)
        off = rng.standard_normal(k) * ~cone.on
        on_pen = group_penalties(spec, x).sum()
        off_pen = group_penalties(spec, off).sum()
        if off_pen > 0 and rng.random() < 0.8:
            x += off * (rng.random() * cone.mu * on_pen / off_pen)
        yield x


def estimate_re_constant(design, ds, beta_star, spec: PenaltySpec, mu=7.0, n_samples=2000, seed=0,
                         support=None, hessian=None, remove=None) -> REEstimate:
    """Smallest sampled ratio ``x^T H x / sum_{j in M} rho(||x_j||)^2`` over the cone.

    ``H`` is ``-grad^2 L_n(beta*)`` unless supplied.  ``remove`` is a coefficient
    vector whose per-group blocks are projected out of every candidate (see
    :func:`constant_directions`).  The result is an upper bound on the cone
    minimum; ``degenerate`` flags a ratio below ``1e-8 * mean diag(H)``.
    """
    if support is None:
        support = support_of(spec, beta_star)
    if len(support) == 0:
        raise ValueError("restricted eigenvalue needs a nonempty support")
    H = neg_hessian(design, ds, beta_star) if hessian is None else np.asarray(hessian, float)
    cone = _Cone(spec, support, mu, None if remove is None else np.asarray(remove, float))
    rng = np.random.default_rng(seed)
    best, best_x, trace, used, skipped = np.inf, None, [], 0, 0
    groups = spec.structure.groups
    for cand in _candidates(cone, H, n_samples, rng):
        x = cone.project(cand)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            skipped += 1
            continue
        x /= nrm
        den = sum(spec.rho(lp_norm(x[groups[j]], spec.gammas[j])) ** 2 for j in support)
        if den <= 0:
            skipped += 1
            continue
        used += 1
        r = max(float(x @ H @ x), 0.0) / den
        if r < best:
            best, best_x = r, x
        trace.append(best)
    if best_x is None:
        raise ValueError("no usable cone direction")
    scale = float(np.mean(np.diag(H))) if H.size else 0.0
    degenerate = bool(best <= DEGENERATE_RATIO * max(scale, 1e-300))
    return REEstimate(float(np.sqrt(best)), float(best), float(mu), used, skipped, best_x,
                      np.array(trace), tuple(support), degenerate)
