"""Cox log partial likelihood, its risk-set moments, score and curvature.

All sums over risk sets use shifted exponentials.  The vectorised path sorts
subjects by observed time and takes reverse cumulative sums with one global
shift; when a late risk set would underflow under that shift, a per-failure-time
path with its own shift is used instead.  Integrals against ``dN`` reduce to
sums over distinct failure times weighted by the number of events there
(Breslow convention for ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_UNDERFLOW = 1e-280


class EmptyRiskSetError(ValueError):
    pass


def _matrix(design) -> np.ndarray:
    return np.asarray(getattr(design, "matrix", design), dtype=float)


def _eta(design, b) -> np.ndarray:
    X = _matrix(design)
    b = np.asarray(b, dtype=float)
    if b.shape != (X.shape[1],):
        raise ValueError(f"coefficient length {b.shape} does not match design width {X.shape[1]}")
    return X @ b


def _rev_cumsum(a):
    return np.cumsum(a[::-1], axis=0)[::-1]


def _suffix_lse(eta_sorted):
    return np.logaddexp.accumulate(eta_sorted[::-1])[::-1]


@dataclass(frozen=True)
class RiskMoments:
    """``S^(0..2)`` at one time, with ``E_n = S1/S0`` and ``V_n = S2/S0 - E_n E_n^T``."""

    S0: float
    S1: np.ndarray
    S2: np.ndarray
    En: np.ndarray
    Vn: np.ndarray
    log_S0: float


def risk_moments(design, ds, b, t) -> RiskMoments:
    """Moments over ``{i : Z_i >= t}``; ``S`` terms carry the ``1/n`` factor."""
    X = _matrix(design)
    eta = _eta(design, b)
    at_risk = ds.time >= t
    if not at_risk.any():
        raise EmptyRiskSetError(f"nobody at risk at t = {t}")
    n = X.shape[0]
    e = eta[at_risk]
    m = e.max()
    w = np.exp(e - m)
    Xr = X[at_risk]
    sw = w.sum()
    pi = w / sw
    En = pi @ Xr
    centered = Xr - En
    Vn = (centered * pi[:, None]).T @ centered
    Vn = 0.5 * (Vn + Vn.T)
    scale = np.exp(m) / n
    S0 = sw * scale
    return RiskMoments(S0, (w @ Xr) * scale, (Xr * w[:, None]).T @ Xr * scale, En, Vn,
                       float(np.log(sw) + m - np.log(n)))


class _Sweep:
    """Per-failure-time softmax quantities for one linear predictor."""

    def __init__(self, ds, eta):
        self.ds = ds
        self.eta = eta
        self.es = eta[ds.order]
        self.start = ds.risk_start
        self.lse = _suffix_lse(self.es)[self.start] if len(self.start) else np.zeros(0)
        self.M = self.es.max()
        self.w = np.exp(self.es - self.M)
        self.cw = _rev_cumsum(self.w)[self.start] if len(self.start) else np.zeros(0)
        self.stable = bool(np.all(self.cw > _UNDERFLOW))

    def probs(self, q) -> tuple:
        """``(subject indices, softmax weights)`` of risk set ``q``."""
        s = self.start[q]
        idx = self.ds.order[s:]
        return idx, np.exp(self.es[s:] - self.lse[q])

    def weighted_sums(self, A) -> np.ndarray:
        """``sum_{i in R_q} pi_qi A_i`` for every ``q`` (rows of ``A`` in subject order)."""
        As = A[self.ds.order]
        if self.stable:
            c = _rev_cumsum(self.w.reshape(-1, *([1] * (As.ndim - 1))) * As)[self.start]
            return c / self.cw.reshape(-1, *([1] * (As.ndim - 1)))
        out = np.empty((len(self.start),) + As.shape[1:])
        for q, s in enumerate(self.start):
            pi = np.exp(self.es[s:] - self.lse[q])
            out[q] = np.tensordot(pi, As[s:], axes=1)
        return out


def log_partial_likelihood(design, ds, b) -> float:
    """``L_n(b) = n^{-1} sum_events [f_b(X_i) - log S^(0)(b, t_i)]``."""
    eta = _eta(design, b)
    if ds.N == 0:
        return 0.0
    n = ds.n
    ev = (ds.status == 1) & (ds.time <= ds.tau)
    lse = _suffix_lse(eta[ds.order])[ds.risk_start]
    log_S0 = lse - np.log(n)
    return float((eta[ev].sum() - ds.event_counts @ log_S0) / n)


def score(design, ds, b) -> np.ndarray:
    """Gradient of ``L_n``: ``n^{-1} sum_events (Psi(X_i) - E_n(b, t_i))``."""
    X = _matrix(design)
    eta = _eta(design, b)
    if ds.N == 0:
        return np.zeros(X.shape[1])
    ev = (ds.status == 1) & (ds.time <= ds.tau)
    E = _Sweep(ds, eta).weighted_sums(X)
    return (X[ev].sum(axis=0) - ds.event_counts @ E) / ds.n


def value_and_score(design, ds, b) -> tuple:
    X = _matrix(design)
    eta = _eta(design, b)
    if ds.N == 0:
        return 0.0, np.zeros(X.shape[1])
    n = ds.n
    ev = (ds.status == 1) & (ds.time <= ds.tau)
    sw = _Sweep(ds, eta)
    val = (eta[ev].sum() - ds.event_counts @ (sw.lse - np.log(n))) / n
    grad = (X[ev].sum(axis=0) - ds.event_counts @ sw.weighted_sums(X)) / n
    return float(val), grad


def hessian(design, ds, b) -> np.ndarray:
    """Negative Hessian ``-grad^2 L_n = n^{-1} sum_q d_q V_n(b, t_q)`` (PSD)."""
    X = _matrix(design)
    eta = _eta(design, b)
    k = X.shape[1]
    H = np.zeros((k, k))
    if ds.N == 0:
        return H
    sw = _Sweep(ds, eta)
    d_q = ds.event_counts.astype(float)
    if sw.stable:
        # sum_q d_q S2_q / S0_q == X^T diag(w_i c_i) X with c_i accumulating d_q / S0_q
        acc = np.zeros(ds.n)
        np.add.at(acc, sw.start, d_q / sw.cw)
        c = sw.w * np.cumsum(acc)
        Xs = X[ds.order]
        E = sw.weighted_sums(X)
        H = (Xs * c[:, None]).T @ Xs - (E * d_q[:, None]).T @ E
    else:
        for q in range(ds.N):
            idx, pi = sw.probs(q)
            Xr = X[idx]
            cen = Xr - pi @ Xr
            H += d_q[q] * ((cen * pi[:, None]).T @ cen)
    H /= ds.n
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class WeightVector:
    """Per-subject weights ``omega_i(b) = sum_q pi_q,i``."""

    omega: np.ndarray
    lower: float
    upper: float
    at_risk: np.ndarray

    @property
    def total(self) -> float:
        return float(self.omega.sum())


def observation_weights(design, ds, b) -> WeightVector:
    """Sum over distinct failure times of the conditional event probabilities.

    ``lower``/``upper`` are taken over subjects in at least one risk set.
    """
    if ds.N == 0:
        raise ValueError("observation weights need at least one failure time")
    eta = _eta(design, b)
    sw = _Sweep(ds, eta)
    n = ds.n
    omega_sorted = np.zeros(n)
    if sw.stable:
        inv = np.zeros(n)
        np.add.at(inv, sw.start, 1.0 / sw.cw)
        omega_sorted = sw.w * np.cumsum(inv)
    else:
        for q in range(ds.N):
            s = sw.start[q]
            omega_sorted[s:] += np.exp(sw.es[s:] - sw.lse[q])
    omega = np.empty(n)
    omega[ds.order] = omega_sorted
    mask = ds.at_risk_any
    return WeightVector(omega, float(omega[mask].min()), float(omega[mask].max()), mask)


def weight_process(design, ds, b_anchor, t) -> np.ndarray:
    """``omega_i(b*, t) = exp{f_b*(X_i)} / S^(0)(b*, t)`` for at-risk ``i``, else 0.

    Satisfies ``n^{-1} sum_i Y_i(t) omega_i(b*, t) = 1``.
    """
    eta = _eta(design, b_anchor)
    Y = ds.time >= t
    if not Y.any():
        raise EmptyRiskSetError(f"nobody at risk at t = {t}")
    e = eta[Y]
    lse = np.logaddexp.reduce(e)
    out = np.zeros(ds.n)
    out[Y] = ds.n * np.exp(e - lse)
    return out


@dataclass(frozen=True)
class EmpiricalNorm:
    value: float
    weighted_means: np.ndarray
    per_time: np.ndarray


def empirical_norm(design, ds, f_values, b_anchor) -> EmpiricalNorm:
    """Squared curvature norm ``||f||^2_{n,b*}``.

    Centred (variance) form: for each failure time, the softmax-weighted
    variance of ``f`` over the risk set, weighted by ``d_q / n`` and summed.
    Returns the weighted mean of ``f`` at every failure time as well.
    """
    f = np.asarray(f_values, dtype=float)
    eta = _eta(design, b_anchor)
    if f.shape != (ds.n,):
        raise ValueError("f_values must have one entry per subject")
    if ds.N == 0:
        return EmpiricalNorm(0.0, np.zeros(0), np.zeros(0))
    sw = _Sweep(ds, eta)
    means = np.empty(ds.N)
    var = np.empty(ds.N)
    for q in range(ds.N):
        idx, pi = sw.probs(q)
        fq = f[idx]
        means[q] = pi @ fq
        var[q] = pi @ (fq - means[q]) ** 2
    per_time = ds.event_counts * var / ds.n
    return EmpiricalNorm(float(per_time.sum()), means, per_time)


def empirical_norm_raw(design, ds, f_values, b_anchor) -> float:
    """Same norm through the uncentred weight-process moments.

    ``sum_q (d_q/n) [ n^{-1} sum_i Y_i omega_i f_i^2 - (n^{-1} sum_i Y_i omega_i f_i)^2 ]``,
    kept as an independent cross-check of :func:`empirical_norm`.
    """
    f = np.asarray(f_values, dtype=float)
    total = 0.0
    for q, t in enumerate(ds.failure_times):
        w = weight_process(design, ds, b_anchor, t)
        m1 = (w @ f) / ds.n
        m2 = (w @ f ** 2) / ds.n
        total += ds.event_counts[q] * (m2 - m1 ** 2) / ds.n
    return float(total)


def log_S0_path(design, ds, b) -> np.ndarray:
    """``log S^(0)(b, t_q)`` at every failure time."""
    eta = _eta(design, b)
    return _suffix_lse(eta[ds.order])[ds.risk_start] - np.log(ds.n)


def En_path(design, ds, b) -> np.ndarray:
    """``E_n(b, t_q)`` at every failure time, shape ``(N, pd)``."""
    eta = _eta(design, b)
    return _Sweep(ds, eta).weighted_sums(_matrix(design))
