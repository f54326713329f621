"""Penalized partial-likelihood fitting and tuning-parameter rules.

The fit minimises ``-L_n(b) + sum_j w_j rho(||b_j||_{gamma_j})`` by proximal
gradient with backtracking, optionally with monotone momentum.  Penalties with a
non-identity ``rho`` have no closed-form prox here and fall back to
diminishing-step subgradient descent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import likelihood as lk
from .basis import reparametrize_design, to_original_coefficients, to_tilde_coefficients
from .penalty import (
    INF,
    PenaltySpec,
    SmoothPenaltySpec,
    UnsupportedPenalty,
    holder_conjugate,
    latent_spec,
    lp_norm,
    norm_plus_l2_subgradient_distance,
    norm_subgradient_distance,
    prox_norm,
    project_l1_ball,
    prox_norm_plus_l2,
    smooth_penalty_value,
    weighted_penalty,
)

MODES = ("standard", "smooth-reparametrized", "overlap-latent")


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 5000
    tol: float = 1e-9
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 0.5
    accelerate: bool = True
    start: tuple | None = None
    mode: str = "standard"
    kkt_tol: float | None = None
    min_step: float = 1e-18
    subgradient_step: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.sufficient_decrease <= 1:
            raise ValueError("sufficient_decrease must lie in (0, 1]")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def kkt_threshold(self) -> float:
        return 10.0 * self.tol if self.kkt_tol is None else self.kkt_tol

    @classmethod
    def from_json(cls, obj: dict) -> "FitConfig":
        obj = dict(obj)
        if obj.get("start") is not None:
            obj["start"] = tuple(obj["start"])
        return cls(**obj)


@dataclass(frozen=True, eq=False)
class FitResult:
    beta_hat: np.ndarray
    objective_trace: np.ndarray
    kkt_residual: float
    active_groups: tuple
    iterations: int
    converged: bool
    lam: float
    mode: str = "standard"
    message: str = ""
    step: float = float("nan")
    latent_beta: np.ndarray | None = None
    rule_audit: dict | None = None

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def to_json(self, rule_audit=None) -> dict:
        audit = rule_audit if rule_audit is not None else self.rule_audit
        return {
            "beta_hat": [float(x) for x in self.beta_hat],
            "active_groups": [int(j) for j in self.active_groups],
            "objective": self.objective,
            "kkt_residual": float(self.kkt_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "lambda": self.lam,
            "rule_audit": audit,
        }

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_json(**kw), indent=2)


@dataclass(frozen=True)
class _Block:
    idx: np.ndarray
    gamma: float
    weight: float
    plus_l2: bool


def _blocks_for(spec: PenaltySpec) -> list:
    return [_Block(g, gm, float(w), False)
            for g, gm, w in zip(spec.structure.groups, spec.gammas, spec.weights)]


def _smooth_blocks(sspec: SmoothPenaltySpec) -> list:
    d = sspec.d
    w = sspec.lam * math.sqrt(d)
    return [_Block(np.arange(j * d, (j + 1) * d), g, w, True) for j, g in enumerate(sspec.gammas)]


def _block_norm(blk, x):
    return lp_norm(x, blk.gamma) + (lp_norm(x, 2) if blk.plus_l2 else 0.0)


def _penalty(blocks, rho, b) -> float:
    return float(sum(blk.weight * rho(_block_norm(blk, b[blk.idx])) for blk in blocks))


def _prox(blocks, z, t) -> np.ndarray:
    out = z.copy()
    for blk in blocks:
        f = prox_norm_plus_l2 if blk.plus_l2 else prox_norm
        out[blk.idx] = f(z[blk.idx], blk.gamma, t * blk.weight)
    return out


def _kkt(blocks, rho, b, grad_L) -> float:
    """Largest per-group violation of ``score_j in w_j rho'(.) subdiff||b_j||``.

    Zero groups report the dual-norm excess, active groups the distance from
    the score block to the scaled subdifferential.
    """
    worst = 0.0
    for blk in blocks:
        x = b[blk.idx]
        v = grad_L[blk.idx]
        c = blk.weight * rho.derivative(_block_norm(blk, x))
        if not np.any(x) and not blk.plus_l2:
            r = max(lp_norm(v, holder_conjugate(blk.gamma)) - c, 0.0)
        elif blk.plus_l2:
            r = norm_plus_l2_subgradient_distance(v, x, blk.gamma, c)
        else:
            r = norm_subgradient_distance(v, x, blk.gamma, c)
        worst = max(worst, r)
    return float(worst)


def _active(blocks, b) -> tuple:
    return tuple(j for j, blk in enumerate(blocks) if np.any(b[blk.idx]))


def objective(design, ds, spec: PenaltySpec, b) -> float:
    """``-L_n(b) + lambda P(b)`` (per-group lambdas when set)."""
    return -lk.log_partial_likelihood(design, ds, b) + weighted_penalty(spec, b)


def smooth_objective(design, ds, sspec: SmoothPenaltySpec, b) -> float:
    """Original-coordinate objective of the smooth-selection fit."""
    return -lk.log_partial_likelihood(design, ds, b) + sspec.lam * smooth_penalty_value(sspec, b)


def _prox_gradient(X, ds, prox, penalty, kkt_fn, b0, cfg: FitConfig):
    def smooth(b):
        v, g = lk.value_and_score(X, ds, b)
        return -v, -g

    x = b0.copy()
    hx, gx = smooth(x)
    Fx = hx + penalty(x)
    if not np.isfinite(Fx):
        raise NonFiniteObjective(f"objective is not finite at the starting point (value {Fx})")
    trace = [Fx]
    t = cfg.initial_step
    y, hy, gy = x, hx, gx
    theta = 1.0
    converged = False
    message = "max_iters reached"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        # backtracking on the quadratic upper model around y
        while True:
            z = prox(y - t * gy, t)
            dz = z - y
            hz, gz = smooth(z)
            if np.isfinite(hz) and hz <= hy + gy @ dz + (cfg.sufficient_decrease / t) * (dz @ dz) + 1e-15 * abs(hy):
                break
            t *= cfg.shrink
            if t < cfg.min_step:
                break
        if t < cfg.min_step:
            message = f"step size underflow at iteration {it} (step {t:.3g})"
            break
        Fz = hz + penalty(z)
        x_prev = x
        accepted = Fz <= Fx
        if accepted:
            x, hx, gx, Fnew = z, hz, gz, Fz
        else:
            Fnew = Fx
        rel = abs(Fx - Fnew) / max(1.0, abs(Fx))
        Fx = Fnew
        trace.append(Fx)
        if rel < cfg.tol:
            kkt = kkt_fn(x, -gx)
            if kkt <= cfg.kkt_threshold:
                converged = True
                message = "converged"
                break
        if cfg.accelerate and accepted:
            theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = x + (theta / theta_next) * (z - x) + ((theta - 1.0) / theta_next) * (x - x_prev)
            theta = theta_next
            if y is x or np.array_equal(y, x):
                hy, gy = hx, gx
            else:
                hy, gy = smooth(y)
                if not np.isfinite(hy):
                    y, hy, gy, theta = x, hx, gx, 1.0
        else:
            # momentum restart after a rejected step
            y, hy, gy, theta = x, hx, gx, 1.0
    kkt = kkt_fn(x, -gx)
    if not converged and message == "max_iters reached":
        message = f"max_iters reached (kkt {kkt:.3g})"
    return x, np.array(trace), kkt, it, converged, message, t


def _subgradient(X, ds, blocks, rho, b0, cfg: FitConfig):
    """Diminishing-step subgradient descent; the trace keeps the best value seen."""
    def full(b):
        v, g = lk.value_and_score(X, ds, b)
        return -v + _penalty(blocks, rho, b), -g

    x = b0.copy()
    Fx, gx = full(x)
    best, best_x, best_g = Fx, x.copy(), gx
    trace = [Fx]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        sub = gx.copy()
        for blk in blocks:
            xb = x[blk.idx]
            if np.any(xb):
                c = blk.weight * rho.derivative(_block_norm(blk, xb))
                sub[blk.idx] += c * _norm_grad(xb, blk)
            else:
                # minimal-norm element of the subdifferential at a zero block
                sub[blk.idx] = -_dual_residual(-gx[blk.idx], blk, blk.weight * rho.slope_at_zero)
        nrm = np.sqrt(sub @ sub)
        if nrm == 0:
            converged = True
            break
        x = x - cfg.subgradient_step / math.sqrt(it) * sub / max(nrm, 1.0)
        Fx, gx = full(x)
        if np.isfinite(Fx) and Fx < best:
            prev = best
            best, best_x, best_g = Fx, x.copy(), gx
            trace.append(best)
            if abs(prev - best) / max(1.0, abs(prev)) < cfg.tol:
                if _kkt(blocks, rho, best_x, -best_g) <= cfg.kkt_threshold:
                    converged = True
                    break
        else:
            trace.append(best)
    kkt = _kkt(blocks, rho, best_x, -best_g)
    msg = "converged" if converged else f"subgradient fallback stopped (kkt {kkt:.3g})"
    return best_x, np.array(trace), kkt, it, converged, msg, float("nan")


def _norm_grad(x, blk):
    g = blk.gamma
    if g == 2:
        out = x / np.sqrt(x @ x)
    elif g == 1:
        out = np.sign(x)
    elif g == INF:
        a = np.abs(x)
        top = a >= a.max() * (1 - 1e-12)
        out = np.where(top, np.sign(x), 0.0) / top.sum()
    else:
        nx = lp_norm(x, g)
        out = np.sign(x) * (np.abs(x) / nx) ** (g - 1)
    if blk.plus_l2:
        out = out + x / np.sqrt(x @ x)
    return out


def _dual_residual(v, blk, c):
    """``v`` minus its projection onto ``c`` times the subdifferential of the block norm at 0."""
    if blk.gamma == 2:
        cc = 2 * c if blk.plus_l2 else c
        nv = np.sqrt(v @ v)
        return v * max(1 - cc / nv, 0.0) if nv > 0 else v
    if blk.gamma == 1 and not blk.plus_l2:
        return np.sign(v) * np.maximum(np.abs(v) - c, 0.0)
    if blk.gamma == INF:
        r = v - project_l1_ball(v, c)
        if blk.plus_l2:
            nr = np.sqrt(r @ r)
            r = r * max(1 - c / nr, 0.0) if nr > 0 else r
        return r
    raise UnsupportedPenalty(f"no subgradient rule for gamma = {blk.gamma}")


def _run(X, ds, blocks, rho, b0, cfg):
    if rho.kind == "identity":
        return _prox_gradient(
            X, ds,
            lambda z, t: _prox(blocks, z, t),
            lambda b: _penalty(blocks, rho, b),
            lambda b, s: _kkt(blocks, rho, b, s),
            b0, cfg)
    return _subgradient(X, ds, blocks, rho, b0, cfg)


def _start(cfg, k):
    if cfg.start is None:
        return np.zeros(k)
    b0 = np.asarray(cfg.start, dtype=float)
    if b0.shape != (k,):
        raise ValueError(f"start has length {b0.size}, expected {k}")
    return b0.copy()


def fit(design, ds, spec: PenaltySpec, config: FitConfig = FitConfig()) -> FitResult:
    """Minimise the penalised negative log partial likelihood."""
    X = np.asarray(getattr(design, "matrix", design), dtype=float)
    if X.shape[0] != ds.n:
        raise ValueError(f"design has {X.shape[0]} rows, dataset has {ds.n}")
    if X.shape[1] != spec.structure.n_coords:
        raise ValueError(f"design width {X.shape[1]} does not match penalty coordinates {spec.structure.n_coords}")
    if config.mode == "smooth-reparametrized":
        raise ValueError("use fit_smooth for the smooth-reparametrized mode")
    if config.mode == "overlap-latent":
        return _fit_latent(X, ds, spec, config)
    if spec.structure.overlapping:
        raise UnsupportedPenalty("overlapping groups need mode='overlap-latent'")
    blocks = _blocks_for(spec)
    b, trace, kkt, it, conv, msg, t = _run(X, ds, blocks, spec.rho, _start(config, X.shape[1]), config)
    return FitResult(b, trace, kkt, _active(blocks, b), it, conv, float(spec.lam), "standard", msg, t)


def _fit_latent(X, ds, spec, config):
    lat, rec = latent_spec(spec)
    XL = X[:, rec.source]
    b0 = np.zeros(rec.source.size)
    if config.start is not None:
        # split the warm start evenly over the copies of each coordinate
        counts = np.bincount(rec.source, minlength=rec.n_coords)
        b0 = np.asarray(config.start, dtype=float)[rec.source] / counts[rec.source]
    blocks = _blocks_for(lat)
    v, trace, kkt, it, conv, msg, t = _run(XL, ds, blocks, lat.rho, b0, config)
    return FitResult(rec.recover(v), trace, kkt, _active(blocks, v), it, conv, float(spec.lam),
                     "overlap-latent", msg, t, latent_beta=v)


def _ball_dual_prox(z, R, evals, evecs, t, w):
    """``argmin_b 0.5||b - z||^2 + t w ||R b||_2`` through its dual.

    The dual variable solves ``(t R R^T + mu I) u = R z`` with ``||u|| = w``;
    ``mu`` comes from Newton steps on ``1/||u(mu)|| - 1/w`` with a bisection
    safeguard.
    """
    beta = evecs.T @ (R @ z)
    lam = t * evals
    u0 = beta / lam
    if np.sqrt(u0 @ u0) <= w:
        return np.zeros_like(z)
    lo, hi = 0.0, np.sqrt(beta @ beta) / w
    mu = 0.5 * hi
    for _ in range(200):
        den = lam + mu
        nu = np.sqrt(((beta / den) ** 2).sum())
        phi = 1.0 / nu - 1.0 / w
        if abs(phi) <= 1e-15 / w:
            break
        if phi > 0:
            hi = mu
        else:
            lo = mu
        dnu = -((beta ** 2) / den ** 3).sum() / nu
        step = phi / (-dnu / nu ** 2)
        cand = mu - step
        mu = cand if lo < cand < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(hi, 1e-300):
            break
    u = evecs @ (beta / (lam + mu))
    return z - t * (R.T @ u)


def _smooth_original_engine(design, ds, sspec, b0, config):
    """Proximal gradient in the original coordinates (``gamma = 2`` groups only)."""
    d = sspec.d
    w = 2.0 * sspec.lam * math.sqrt(d)
    Rs = sspec.factors.R
    eig = [np.linalg.eigh(R @ R.T) for R in Rs]

    def prox(z, t):
        out = z.copy()
        for j, (R, (ev, Q)) in enumerate(zip(Rs, eig)):
            sl = slice(j * d, (j + 1) * d)
            out[sl] = _ball_dual_prox(z[sl], R, ev, Q, t, w)
        return out

    def penalty(b):
        return float(sum(w * np.sqrt(((R @ b[j * d:(j + 1) * d]) ** 2).sum()) for j, R in enumerate(Rs)))

    def kkt(b, score):
        # distance from score_j to w R_j^T subdiff||.||_2(R_j b_j), in original coordinates
        worst = 0.0
        for j, (R, (ev, Q)) in enumerate(zip(Rs, eig)):
            sl = slice(j * d, (j + 1) * d)
            v = score[sl]
            a = R @ b[sl]
            na = np.sqrt(a @ a)
            if na > 0:
                r = v - w * (R.T @ a) / na
            else:
                r = _ball_dual_prox(v, R, ev, Q, 1.0, w)
            worst = max(worst, float(np.sqrt(r @ r)))
        return worst

    X = np.asarray(design.matrix, dtype=float)
    return _prox_gradient(X, ds, prox, penalty, kkt, b0, config)


# reparametrised columns scale like 1/sigma_min(R); beyond this the tilde problem is too stiff
_STIFF_COND = 1e2


def fit_smooth(design, ds, sspec: SmoothPenaltySpec, config: FitConfig = FitConfig()) -> FitResult:
    """Fit the smooth-selection penalty; coefficients are returned in original coordinates.

    The default route fits in ``b~_j = R_j b_j`` coordinates and maps back.  When
    every group has ``gamma = 2`` and some ``R_j`` is badly conditioned (a
    rank-deficient roughness matrix regularised by a tiny ``eps_R``), the same
    objective is minimised in the original coordinates with an exact prox of
    ``||R_j b_j||_2`` instead, since the reparametrised design is then too stiff
    for first-order steps.
    """
    Xt = reparametrize_design(design, sspec.factors)
    blocks = _smooth_blocks(sspec)
    k = Xt.matrix.shape[1]
    stiff = max(np.linalg.cond(R) for R in sspec.factors.R) > _STIFF_COND
    if stiff and sspec.rho.kind == "identity" and all(g == 2 for g in sspec.gammas):
        b0 = np.zeros(k) if config.start is None else np.asarray(config.start, dtype=float)
        b, trace, kkt, it, conv, msg, t = _smooth_original_engine(design, ds, sspec, b0, config)
        bt = to_tilde_coefficients(b, sspec.factors)
    else:
        b0 = np.zeros(k) if config.start is None else to_tilde_coefficients(config.start, sspec.factors)
        bt, trace, kkt, it, conv, msg, t = _run(Xt.matrix, ds, blocks, sspec.rho, b0, config)
        b = to_original_coefficients(bt, sspec.factors)
    return FitResult(b, trace, kkt, _active(blocks, bt), it, conv, float(sspec.lam),
                     "smooth-reparametrized", msg, t, latent_beta=bt)


def zero_threshold(design, ds, spec: PenaltySpec) -> float:
    """Smallest global lambda for which ``b = 0`` satisfies the optimality conditions.

    ``max_j ||score_j(0)||_{gamma_j*} / (|G_j|^{1/gamma_j*} rho'(0+))``.
    """
    X = np.asarray(getattr(design, "matrix", design), dtype=float)
    g = lk.score(X, ds, np.zeros(X.shape[1]))
    vals = [lp_norm(g[idx], holder_conjugate(gm)) / (s * spec.rho.slope_at_zero)
            for idx, gm, s in zip(spec.structure.groups, spec.gammas, spec.scalings)]
    return float(max(vals)) if vals else 0.0


def fit_path(design, ds, spec: PenaltySpec, grid, config: FitConfig = FitConfig(), warm: bool = True) -> list:
    """Fits along a descending lambda grid, each warm-started at the previous solution."""
    grid = [float(l) for l in grid]
    if any(a < b for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be sorted in descending order")
    out = []
    start = config.start
    for lam in grid:
        cfg = FitConfig(**{**config.__dict__, "start": start})
        res = fit(design, ds, spec.with_lambda(lam), cfg)
        out.append(res)
        if warm:
            start = tuple(res.beta_hat)
    return out


def path_report(results) -> dict:
    sizes = [len(r.active_groups) for r in results]
    return {"lambda": [r.lam for r in results], "active_sizes": sizes,
            "monotone_active": all(a <= b for a, b in zip(sizes, sizes[1:]))}


# -- tuning rules ---------------------------------------------------------

RULES = ("theorem1", "theorem2", "corollary1", "corollary2", "grid")


@dataclass(frozen=True)
class LambdaRule:
    """Inputs of a tuning rule.

    ``u`` is ``exp(||beta*||_1)``; ``u_source`` records whether it came from the
    true coefficients or a preliminary fit.  ``active_gammas`` lists the
    exponents of the groups in the true support; ``group_sizes`` and ``gammas``
    describe every group for the per-group rule.
    """

    rule: str
    n: int = 1
    p: int = 1
    d: int = 1
    A: float = 1.0
    u: float = 1.0
    lambda0: float = 1.0
    rho_prime: float = 1.0
    zeta: float | None = None
    active_gammas: tuple | None = None
    gammas: tuple | None = None
    group_sizes: tuple | None = None
    c: float = 1.0
    pd: float | None = None
    lam_max: float | None = None
    n_grid: int = 20
    ratio: float = 1e-2
    u_source: str = "oracle"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.A < 0:
            raise ValueError("A must be nonnegative")

    @property
    def dim(self) -> float:
        return float(self.pd) if self.pd is not None else float(self.p * self.d)


@dataclass(frozen=True, eq=False)
class LambdaResult:
    value: float
    per_group: np.ndarray | None
    audit: dict


def plugin_u(beta_init) -> float:
    return float(np.exp(np.abs(np.asarray(beta_init, dtype=float)).sum()))


def _need(rule, *names):
    missing = [nm for nm in names if getattr(rule, nm) is None]
    if missing:
        raise ValueError(f"rule {rule.rule!r} needs {', '.join(missing)}")


def lambda_from_theory(rule: LambdaRule) -> LambdaResult:
    n, dim = rule.n, rule.dim
    rate = math.sqrt(math.log(dim) / n) if dim > 1 else 0.0
    audit = {"rule": rule.rule, "n": n, "pd": dim, "sqrt_log_pd_over_n": rate, "u": rule.u,
             "u_source": rule.u_source, "A": rule.A}
    if rule.rule in ("theorem1", "theorem2"):
        base = 8.0 * rule.A * rule.u * n ** 0.25 / (rule.d * rule.rho_prime) * rate
        if rule.rule == "theorem1":
            lam = base * rule.lambda0
            audit.update(lambda0=rule.lambda0, n_quarter=n ** 0.25, value=lam)
            return LambdaResult(lam, None, audit)
        _need(rule, "zeta", "active_gammas")
        denom = sum(rule.d ** (1.0 + 2.0 / holder_conjugate(g)) for g in rule.active_gammas)
        second = rule.c * rule.zeta ** 4 / denom if denom > 0 else 0.0
        lam = max(base, second)
        audit.update(first_bound=base, second_bound=second, sum_d_powers=denom, c=rule.c,
                     c_unspecified=True, second_condition_holds=bool(lam * denom >= rule.c * rule.zeta ** 4),
                     value=lam)
        return LambdaResult(lam, None, audit)
    if rule.rule == "corollary1":
        _need(rule, "zeta", "gammas", "group_sizes")
        per = np.array([
            rule.A * min(rule.zeta ** 2, rate * float(sz) ** (-2.0 / holder_conjugate(g) if holder_conjugate(g) != INF else 0.0))
            / math.sqrt(rule.d)
            for g, sz in zip(rule.gammas, rule.group_sizes)
        ])
        audit.update(zeta=rule.zeta, per_group=per.tolist())
        return LambdaResult(float(per.max()) if per.size else 0.0, per, audit)
    if rule.rule == "corollary2":
        _need(rule, "zeta")
        lam = rule.A * min(rule.zeta ** 2, rate) / rule.d ** 2
        audit.update(zeta=rule.zeta, value=lam)
        return LambdaResult(lam, None, audit)
    _need(rule, "lam_max")
    grid = rule.lam_max * np.geomspace(1.0, rule.ratio, rule.n_grid)
    audit.update(lam_max=rule.lam_max, ratio=rule.ratio, n_grid=rule.n_grid)
    return LambdaResult(float(grid[0]), grid, audit)
