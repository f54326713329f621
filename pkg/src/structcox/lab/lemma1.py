"""Check that the origin minimises ``lambda P(x) - (x - beta*)^T v`` under the threshold events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..penalty import INF, PenaltySpec, dual_block_norm, holder_conjugate, threshold_holds, weighted_penalty


def dual_attaining_direction(v, gamma) -> np.ndarray:
    """``u`` with ``||u||_gamma = 1`` and ``u^T v = ||v||_{gamma*}``."""
    v = np.asarray(v, dtype=float)
    u = np.zeros_like(v)
    if not np.any(v):
        u[0] = 1.0
        return u
    if gamma == 1:
        k = int(np.abs(v).argmax())
        u[k] = np.sign(v[k])
        return u
    if gamma == INF:
        return np.where(v != 0, np.sign(v), 1.0)
    gs = holder_conjugate(gamma)
    u = np.sign(v) * np.abs(v) ** (gs - 1)
    return u / (np.abs(u) ** gamma).sum() ** (1.0 / gamma)


@dataclass
class Lemma1Report:
    events: list
    all_hold: bool
    n_samples: int
    violations: int
    min_gap: float
    witness: np.ndarray | None
    witness_group: int | None

    @property
    def identity_holds(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"events": self.events, "all_hold": self.all_hold, "n_samples": self.n_samples,
                "violations": self.violations, "min_gap": self.min_gap,
                "witness": None if self.witness is None else self.witness.tolist(),
                "witness_group": self.witness_group}


def lemma1_objective(spec: PenaltySpec, beta_star, v, x) -> float:
    """``lambda P(x) - (x - beta*)^T v``; its value at ``x = 0`` is ``beta*^T v``."""
    return weighted_penalty(spec, x) - (np.asarray(x) - beta_star) @ v


def check_lemma1(spec: PenaltySpec, beta_star, v, n_samples=10_000, seed=0, tol=1e-12) -> Lemma1Report:
    """Evaluate the threshold events, then sample ``x`` and record any ``f(x) < f(0)``.

    Samples mix dense and group-sparse vectors with log-uniform scales in
    ``[1e-3, 1e3]``.  When some event fails, a line search along that group's
    dual-attaining direction looks for a witness.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    v = np.asarray(v, dtype=float)
    groups = spec.structure.groups
    events = [bool(threshold_holds(spec, v, j)) for j in range(len(groups))]
    f0 = float(beta_star @ v)
    rng = np.random.default_rng(seed)
    k = spec.structure.n_coords
    violations, min_gap, witness, wgroup = 0, np.inf, None, None
    for _ in range(n_samples):
        x = rng.standard_normal(k)
        if rng.random() < 0.5:
            keep = rng.random(len(groups)) < 1.0 / max(len(groups), 1) + 0.2
            mask = np.zeros(k, bool)
            for j in np.flatnonzero(keep):
                mask[groups[j]] = True
            x = np.where(mask, x, 0.0)
        x *= 10.0 ** rng.uniform(-3, 3)
        gap = lemma1_objective(spec, beta_star, v, x) - f0
        min_gap = min(min_gap, gap)
        if gap < -tol * max(1.0, abs(f0), float(np.abs(x) @ np.abs(v))):
            violations += 1
            if witness is None:
                witness = x
    if not all(events):
        for j in (j for j, ok in enumerate(events) if not ok):
            g = groups[j]
            u = np.zeros(k)
            u[g] = dual_attaining_direction(v[g], spec.gammas[j])
            for t in np.geomspace(1e-6, 1e3, 200):
                gap = lemma1_objective(spec, beta_star, v, t * u) - f0
                if gap < 0:
                    min_gap = min(min_gap, gap)
                    violations += 1
                    witness, wgroup = t * u, j
                    break
            if wgroup is not None:
                break
    return Lemma1Report(events, all(events), n_samples, violations, float(min_gap), witness, wgroup)


def scale_to_thresholds(spec: PenaltySpec, v, factor=0.9, group=None, group_factor=1.5) -> np.ndarray:
    """Rescale each block of ``v`` so its dual norm is ``factor`` times its
    threshold; ``group`` (if given) is set to ``group_factor`` instead."""
    v = np.array(v, dtype=float)
    lam = spec.group_lambdas
    for j, g in enumerate(spec.structure.groups):
        cur = dual_block_norm(spec, v, j)
        if cur == 0:
            continue
        target = (group_factor if j == group else factor) * lam[j] * spec.scalings[j] * spec.rho.slope_at_zero
        v[g] *= target / cur
    return v
