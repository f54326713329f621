"""Monte-Carlo harnesses: error-rate regression, null model, concentration probe."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..basis import DictionarySpec, SmoothingFactors, expand_design
from ..likelihood import En_path
from ..penalty import PenaltySpec, SmoothPenaltySpec
from ..solver import FitConfig, LambdaRule, fit, fit_smooth, lambda_from_theory
from ..survival import (SimulationConfig, TrueModel, constant_hazard, exponential_censoring,
                        replicate_seed, simulate_cox_sample, uniform_covariates)

VARIANTS = ("group", "block_inf", "multitask", "elastic")


def centered_pattern(d: int) -> np.ndarray:
    """Evenly spaced, mean-zero, unit-max coefficients ``(-1, ..., 1)``."""
    return np.linspace(-1.0, 1.0, d)


@dataclass
class AdditiveModel:
    """``g(x) = sum_{j < s} amplitude * Psi(x_j)^T pattern`` with a step dictionary.

    ``beta_star`` is exact (``g = f_{beta*}``), so the approximation error is 0.
    """

    p: int = 50
    d: int = 4
    s: int = 2
    amplitude: float = 0.5
    family: str = "step"
    hazard_rate: float = 1.0
    censor_rate: float = 0.3
    covariate_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not 0 <= self.s <= self.p:
            raise ValueError("need 0 <= s <= p")
        self.dictionary = DictionarySpec(self.family, self.d)

    @property
    def beta_star(self) -> np.ndarray:
        b = np.zeros(self.p * self.d)
        for j in range(self.s):
            b[j * self.d:(j + 1) * self.d] = self.amplitude * centered_pattern(self.d)
        return b

    @property
    def u(self) -> float:
        return float(np.exp(np.abs(self.beta_star).sum()))

    def risk(self, X):
        return expand_design(X, self.dictionary).matrix @ self.beta_star

    def simulation(self, n: int, seed: int) -> SimulationConfig:
        cens = exponential_censoring(self.censor_rate) if self.censor_rate > 0 else None
        tm = TrueModel(constant_hazard(self.hazard_rate), self.risk if self.s else None, cens)
        return SimulationConfig(n, self.p, seed, tm, uniform_covariates(*self.covariate_range))

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


@dataclass
class RateConfig:
    n_grid: tuple = (200, 400, 800, 1600)
    replicates: int = 50
    variant: str = "group"
    A: float = 0.01
    zeta: float = 1.0
    seed: int = 0
    model: AdditiveModel = field(default_factory=AdditiveModel)
    tol: float = 1e-7
    max_iters: int = 5000

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if len(self.n_grid) < 2:
            raise ValueError("n grid needs at least two points")


def _elastic_factors(p, d) -> SmoothingFactors:
    # M = 0 and eps_R = 1 give R = I: the smooth penalty becomes 2 ||b_j||_2 per group
    return SmoothingFactors([np.zeros((d, d))] * p, [np.eye(d)] * p, 1.0)


def variant_lambda(variant, n, model: AdditiveModel, A, zeta) -> tuple:
    """``(penalty object, LambdaResult)`` for one variant at sample size ``n``."""
    p, d = model.p, model.d
    u = model.u
    if variant == "group":
        res = lambda_from_theory(LambdaRule("theorem1", n=n, p=p, d=d, A=A, u=u, lambda0=model.hazard_rate))
        return PenaltySpec.grouped(p, d, 2, res.value), res
    if variant in ("block_inf", "multitask"):
        gamma = "inf" if variant == "block_inf" else 2
        spec = PenaltySpec.grouped(p, d, gamma)
        res = lambda_from_theory(LambdaRule("corollary1", n=n, p=p, d=d, A=A, zeta=zeta,
                                            gammas=spec.gammas, group_sizes=tuple(spec.structure.sizes)))
        return PenaltySpec.grouped(p, d, gamma, res.value, per_group_lambda=tuple(res.per_group)), res
    res = lambda_from_theory(LambdaRule("corollary2", n=n, p=p, d=d, A=A, zeta=zeta))
    return SmoothPenaltySpec(_elastic_factors(p, d), 2, res.value), res


def prediction_error(design, beta_hat, g_values) -> tuple:
    """``(mean (f - g)^2, variance of f - g)``.

    The partial likelihood cannot see additive constants, so the centred
    version is the one that can shrink with ``n``.
    """
    r = design.matrix @ beta_hat - g_values
    return float(np.mean(r ** 2)), float(np.var(r))


@dataclass
class RateRow:
    variant: str
    n: int
    replicates_used: int
    dropped: int
    mean_error: float
    se_error: float
    mean_error_raw: float
    mean_lambda: float
    mean_active: float
    slope: float = float("nan")


@dataclass
class RateTable:
    rows: list
    slope: float
    intercept: float
    config: dict

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.mean_error for r in self.rows])

    @property
    def strictly_decreasing(self) -> bool:
        e = self.errors
        return bool(np.all(np.diff(e) < 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(RateRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([getattr(r, k) for k in names])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "slope": self.slope,
                "intercept": self.intercept, "config": self.config}


def log_log_slope(n_values, errors) -> tuple:
    slope, intercept = np.polyfit(np.log(np.asarray(n_values, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope), float(intercept)


def run_replicate(model: AdditiveModel, variant, n, seed, A, zeta, tol=1e-7, max_iters=5000) -> dict:
    ds = simulate_cox_sample(model.simulation(n, seed))
    design = expand_design(ds, model.dictionary)
    g = design.matrix @ model.beta_star
    pen, lam = variant_lambda(variant, n, model, A, zeta)
    cfg = FitConfig(max_iters=max_iters, tol=tol)
    res = fit_smooth(design, ds, pen, cfg) if variant == "elastic" else fit(design, ds, pen, cfg)
    raw, cen = prediction_error(design, res.beta_hat, g)
    return {"error": cen, "error_raw": raw, "lambda": lam.value, "converged": res.converged,
            "active": len(res.active_groups)}


def rate_experiment(cfg: RateConfig) -> RateTable:
    """Mean centred prediction error per ``n`` and the log-log slope.

    Replicate ``r`` at grid position ``k`` uses seed
    ``replicate_seed(seed, k * 100000 + r)``; non-converged fits are dropped and counted.
    """
    rows = []
    for k, n in enumerate(cfg.n_grid):
        errs, raws, lams, act, dropped = [], [], [], [], 0
        for r in range(cfg.replicates):
            out = run_replicate(cfg.model, cfg.variant, int(n), replicate_seed(cfg.seed, k * 100000 + r),
                                cfg.A, cfg.zeta, cfg.tol, cfg.max_iters)
            if not out["converged"]:
                dropped += 1
                continue
            errs.append(out["error"])
            raws.append(out["error_raw"])
            lams.append(out["lambda"])
            act.append(out["active"])
        m = len(errs)
        mean = float(np.mean(errs)) if m else float("nan")
        se = float(np.std(errs, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
        rows.append(RateRow(cfg.variant, int(n), m, dropped, mean, se,
                            float(np.mean(raws)) if m else float("nan"),
                            float(np.mean(lams)) if m else float("nan"),
                            float(np.mean(act)) if m else float("nan")))
    ok = [r for r in rows if r.replicates_used > 0 and r.mean_error > 0]
    slope, intercept = log_log_slope([r.n for r in ok], [r.mean_error for r in ok]) if len(ok) >= 2 \
        else (float("nan"), float("nan"))
    for r in rows:
        r.slope = slope
    conf = {"n_grid": list(cfg.n_grid), "replicates": cfg.replicates, "variant": cfg.variant,
            "A": cfg.A, "zeta": cfg.zeta, "seed": cfg.seed, "model": cfg.model.to_json()}
    return RateTable(rows, slope, intercept, conf)


@dataclass
class NullResult:
    replicates: int
    zero_fits: int
    thresholds: np.ndarray
    lam: float
    nonconverged: int

    @property
    def zero_fraction(self) -> float:
        return self.zero_fits / self.replicates if self.replicates else float("nan")

    def to_json(self) -> dict:
        return {"replicates": self.replicates, "zero_fits": self.zero_fits,
                "zero_fraction": self.zero_fraction, "lambda": self.lam,
                "nonconverged": self.nonconverged,
                "threshold_quantiles": np.quantile(self.thresholds, [0.5, 0.9, 0.95, 0.99]).tolist()}


def null_experiment(n=400, p=50, d=4, replicates=100, A=0.06, seed=0, censor_rate=0.3) -> NullResult:
    """Pure-noise model ``g = 0`` fitted with the group-Lasso theory lambda (``u = 1``)."""
    from ..solver import zero_threshold

    model = AdditiveModel(p=p, d=d, s=0, censor_rate=censor_rate)
    zeros, nonconv, th = 0, 0, []
    lam = None
    for r in range(replicates):
        ds = simulate_cox_sample(model.simulation(n, replicate_seed(seed, r)))
        design = expand_design(ds, model.dictionary)
        spec, res = variant_lambda("group", n, model, A, 1.0)
        lam = res.value
        out = fit(design, ds, spec, FitConfig(tol=1e-8))
        th.append(zero_threshold(design, ds, spec))
        nonconv += not out.converged
        zeros += len(out.active_groups) == 0
    return NullResult(replicates, zeros, np.array(th), float(lam), nonconv)


# -- concentration of the risk-set mean -------------------------------------


class PopulationRatio:
    """``s1(beta*, t) / s0(beta*, t)`` estimated from one large reference sample."""

    def __init__(self, model: AdditiveModel, beta_star, size=1_000_000, seed=12345):
        ds = simulate_cox_sample(model.simulation(size, seed))
        X = expand_design(ds, model.dictionary).matrix
        eta = X @ beta_star
        order = np.argsort(ds.time, kind="stable")
        w = np.exp(eta[order] - eta.max())
        self.times = ds.time[order]
        self.cw = np.cumsum(w[::-1])[::-1]
        self.cwx = np.cumsum((w[:, None] * X[order])[::-1], axis=0)[::-1]

    def __call__(self, t) -> np.ndarray:
        pos = np.searchsorted(self.times, np.asarray(t, float), side="left")
        if np.any(pos >= self.times.size):
            raise ValueError("query time beyond the reference sample")
        return self.cwx[pos] / self.cw[pos][:, None]


def sup_deviation(model: AdditiveModel, beta_star, n, seed, reference: PopulationRatio, t_max) -> float:
    """``sup_{t_q <= t_max} ||E_n(beta*, t_q) - e(beta*, t_q)||_inf`` over failure times."""
    ds = simulate_cox_sample(model.simulation(n, seed))
    design = expand_design(ds, model.dictionary)
    keep = ds.failure_times <= t_max
    if not keep.any():
        return 0.0
    En = En_path(design, ds, beta_star)[keep]
    return float(np.abs(En - reference(ds.failure_times[keep])).max())


@dataclass
class ConcentrationSummary:
    n_grid: tuple
    medians: list
    quantiles: list
    replicates: int
    t_max: float

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.medians) < 0))

    def to_json(self) -> dict:
        return {"n_grid": list(self.n_grid), "medians": self.medians, "quantiles": self.quantiles,
                "replicates": self.replicates, "t_max": self.t_max,
                "strictly_decreasing": self.strictly_decreasing}


def concentration_probe(model: AdditiveModel, beta_star=None, n_grid=(100, 1000, 10000), replicates=100,
                        seed=0, reference_size=1_000_000, t_max=None) -> ConcentrationSummary:
    """Median sup-deviation of the risk-set mean from its population value.

    Times are restricted to ``t <= t_max`` (default: the reference sample's
    70% quantile of observed times) so that risk sets stay non-negligible.
    """
    beta_star = model.beta_star if beta_star is None else np.asarray(beta_star, float)
    ref = PopulationRatio(model, beta_star, reference_size, seed=replicate_seed(seed, 10 ** 9))
    if t_max is None:
        t_max = float(np.quantile(ref.times, 0.7))
    med, qs = [], []
    for k, n in enumerate(n_grid):
        dev = [sup_deviation(model, beta_star, int(n), replicate_seed(seed, k * 100000 + r), ref, t_max)
               for r in range(replicates)]
        med.append(float(np.median(dev)))
        qs.append(np.quantile(dev, [0.1, 0.5, 0.9]).tolist())
    return ConcentrationSummary(tuple(int(n) for n in n_grid), med, qs, replicates, t_max)
