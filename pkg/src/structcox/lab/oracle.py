"""Oracle approximant, bound arithmetic and the localisation check."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..likelihood import _matrix, hessian, observation_weights, value_and_score
from ..penalty import INF, PenaltySpec, holder_conjugate, lp_norm
from .constants import solve_v_constants
from .restricted import _Cone, support_of


def _d_power(d, gamma, k):
    """``d^{k / gamma*}`` (``gamma* = inf`` gives 1)."""
    gs = holder_conjugate(gamma)
    return 1.0 if gs == INF else float(d) ** (k / gs)


@dataclass(frozen=True, eq=False)
class OracleSpec:
    beta_star: np.ndarray
    support: tuple
    s: int
    m_star: float
    u: float
    d_bar: float

    @classmethod
    def from_beta(cls, spec: PenaltySpec, beta_star) -> "OracleSpec":
        beta_star = np.asarray(beta_star, dtype=float)
        sup = support_of(spec, beta_star)
        groups = spec.structure.groups
        m_star = min((lp_norm(beta_star[groups[j]], spec.gammas[j]) for j in sup), default=0.0)
        d_bar = sum(_d_power(groups[j].size, spec.gammas[j], 2) for j in sup)
        return cls(beta_star, sup, len(sup), float(m_star), float(np.exp(np.abs(beta_star).sum())), float(d_bar))

    def to_json(self) -> dict:
        return {"beta_star": self.beta_star.tolist(), "support": list(self.support), "s": self.s,
                "m_star": self.m_star, "u": self.u, "d_bar": self.d_bar}


def compute_beta_star(design, ds, spec: PenaltySpec, support, g_values=None, method="restricted-fit",
                      max_iters=200, tol=1e-10) -> np.ndarray:
    """Oracle approximant on the given support groups.

    ``restricted-fit`` maximises the partial likelihood over the support
    columns by damped Newton with minimum-norm steps; ``projection`` regresses
    ``g_values`` (plus an intercept, which the partial likelihood ignores) on
    the same columns.
    """
    X = _matrix(design)
    k = X.shape[1]
    cols = np.concatenate([spec.structure.groups[j] for j in support]) if len(support) else np.zeros(0, int)
    beta = np.zeros(k)
    if cols.size == 0:
        return beta
    if method == "projection":
        if g_values is None:
            raise ValueError("projection needs g values")
        Z = np.column_stack([np.ones(X.shape[0]), X[:, cols]])
        coef, *_ = np.linalg.lstsq(Z, np.asarray(g_values, float), rcond=None)
        beta[cols] = coef[1:]
        return beta
    if method != "restricted-fit":
        raise ValueError(f"unknown method {method!r}")
    Xs = X[:, cols]
    b = np.zeros(cols.size)
    val, grad = value_and_score(Xs, ds, b)
    for _ in range(max_iters):
        H = hessian(Xs, ds, b)
        step = np.linalg.lstsq(H, grad, rcond=1e-12)[0]
        t = 1.0
        while t > 1e-12:
            nv, ng = value_and_score(Xs, ds, b + t * step)
            if nv >= val + 1e-4 * t * (grad @ step):
                break
            t *= 0.5
        b = b + t * step
        done = abs(nv - val) <= tol * (1 + abs(val))
        val, grad = nv, ng
        if done:
            break
    beta[cols] = b
    return beta


def kappa_diagnostics(design, ds, spec: PenaltySpec, support, mu=7.0, n_dirs=200, seed=0) -> dict:
    """Sampled ``kappa_i = min_v (v^T Psi_i)^2`` and ``kappa^q = min_v sum_{l in R_q} (v^T Psi_l)^2``
    over unit cone directions; raw per-subject and per-time values only."""
    X = _matrix(design)
    rng = np.random.default_rng(seed)
    cone = _Cone(spec, support, mu, None)
    V = []
    for _ in range(n_dirs):
        x = cone.project(rng.standard_normal(X.shape[1]))
        if np.any(x):
            V.append(x / np.linalg.norm(x))
    P = (X @ np.array(V).T) ** 2
    kappa_i = P.min(axis=1)
    csum = np.cumsum(P[ds.order][::-1], axis=0)[::-1]
    kappa_q = csum[ds.risk_start].min(axis=1)
    return {"kappa_i": kappa_i.tolist(), "kappa_q": kappa_q.tolist(), "directions": len(V)}


@dataclass
class OracleBoundReport:
    v1: float | None
    v2: float | None
    r_n: float
    epsilon: float
    omega_lower: float
    omega_lower_thm2: float
    lhs: float
    lhs_raw: float
    approximation: float
    approximation_raw: float
    thm1_rhs: float
    thm2_rhs: float
    localization_lhs: float
    localization_rhs: float
    zeta: float
    lam: float
    holds: dict
    label: str = "sampled"

    @property
    def rhs(self) -> float:
        return self.thm2_rhs

    def to_json(self) -> dict:
        return dict(self.__dict__)


def bound_terms(lam, zeta, d_bar, C, v1, v2, omega_lower, omega_lower_thm2, approximation):
    """Right-hand sides of both oracle bounds and the leading factor ``epsilon``."""
    rate = lam ** 2 * d_bar / zeta ** 2
    e1, e2 = math.exp(2 * C * v1), math.exp(2 * C * v2)
    thm1 = (1 + 1 / omega_lower) * approximation + (64 * rate * e1 + 32 * rate * e2) / omega_lower
    r_n = lam * d_bar / zeta ** 2
    eps = math.exp(C * math.exp(C) * 26 * r_n) / omega_lower_thm2
    thm2 = (1 + eps) * approximation + 64 * rate * e1 + 32 * rate * e2
    return thm1, thm2, eps, r_n


def localization(spec: PenaltySpec, beta_hat, beta_star) -> float:
    """``sum_j |G_j|^{1/gamma_j*} ||beta_hat_j - beta*_j||_{gamma_j}``."""
    diff = np.asarray(beta_hat, float) - np.asarray(beta_star, float)
    return float(sum(s * lp_norm(diff[g], gm)
                     for g, gm, s in zip(spec.structure.groups, spec.gammas, spec.scalings)))


def oracle_bound_report(design, ds, oracle: OracleSpec, beta_hat, spec: PenaltySpec, lam, zeta, g_values,
                        omega_lower, C=None, rho_prime=1.0) -> OracleBoundReport:
    """Both oracle bounds and the localisation check for one fitted model.

    ``omega_lower`` is the sampled cone minimum (see
    :func:`structcox.lab.weights.sample_omega_lower`).  Errors are reported
    raw and centred; the ``holds`` flags use the centred versions, since
    fitted functions are only identified up to a constant.  A constant with no
    solution in ``[0, 1]`` is replaced by 1 (its largest admissible value).
    """
    if zeta is None or not zeta > 0:
        raise ValueError("a positive restricted-eigenvalue estimate is required")
    if g_values is None:
        raise ValueError("the true risk function values are required")
    X = _matrix(design)
    g = np.asarray(g_values, float)
    C = float(getattr(design, "bound", np.abs(X).max())) if C is None else float(C)
    r_hat = X @ np.asarray(beta_hat, float) - g
    r_star = X @ oracle.beta_star - g
    v1s, v2s = solve_v_constants(lam, zeta, oracle.d_bar, C, rho_prime)
    v1 = 1.0 if v1s.value is None else v1s.value
    v2 = 1.0 if v2s.value is None else v2s.value
    om2 = observation_weights(design, ds, oracle.beta_star).lower
    approx = float(np.var(r_star))
    thm1, thm2, eps, r_n = bound_terms(lam, zeta, oracle.d_bar, C, v1, v2, omega_lower, om2, approx)
    lhs = float(np.var(r_hat))
    loc = localization(spec, beta_hat, oracle.beta_star)
    loc_rhs = 16 * math.sqrt(2) * C * math.exp(C + v1) * r_n
    holds = {"theorem1": bool(lhs <= thm1), "theorem2": bool(lhs <= thm2), "localization": bool(loc <= loc_rhs)}
    return OracleBoundReport(v1s.value, v2s.value, r_n, eps, float(omega_lower), om2, lhs,
                             float(np.mean(r_hat ** 2)), approx, float(np.mean(r_star ** 2)),
                             thm1, thm2, loc, loc_rhs, float(zeta), float(lam), holds)
