"""Verification suites: each returns ``(payload, failures, tables)``.

``failures`` lists violated hard invariants; ``tables`` maps file names to
CSV text.  Every suite takes a dict of options (defaults below) and a seed.
"""

from __future__ import annotations

import numpy as np

from ..basis import expand_design
from ..likelihood import empirical_norm, empirical_norm_raw, observation_weights
from ..penalty import PenaltySpec
from ..solver import FitConfig, fit
from ..survival import SurvivalDataset, replicate_seed, simulate_cox_sample
from .experiments import AdditiveModel, RateConfig, concentration_probe, rate_experiment, variant_lambda
from .lemma1 import check_lemma1, scale_to_thresholds
from .oracle import OracleSpec, oracle_bound_report
from .restricted import constant_directions, estimate_re_constant, in_cone
from .sandwich import check_sandwich, random_instance
from .weights import min_weight_prop1, sample_omega_lower

MODEL_KEYS = {"p", "d", "s", "amplitude", "family", "hazard_rate", "censor_rate", "covariate_range"}

DEFAULTS = {
    "sandwich": {"instances": 500, "max_n": 30, "max_pd": 8},
    "re": {"n": 300, "p": 5, "d": 4, "s": 2, "mu": 7.0, "n_samples": 2000, "identifiable": True},
    "lemma1": {"groups": 5, "d": 3, "gamma": 2, "lam": 0.7, "n_samples": 10000},
    "prop1": {"instances": 20, "max_n": 8, "b_n": 4.0, "grid_step": 1e-3, "cone_instances": 5},
    "oracle": {"n": 400, "p": 50, "d": 4, "s": 2, "amplitude": 0.5, "A": 0.0015, "replicates": 20,
               "n_cone": 100, "radius": 1.0, "re_samples": 1000},
    "rate": {"n_grid": [200, 400, 800, 1600], "replicates": 50, "variant": "group", "A": 0.0015,
             "zeta": 1.0, "p": 50, "d": 4, "s": 2, "amplitude": 0.5},
    "concentration": {"n_grid": [100, 1000, 10000], "replicates": 100, "p": 2, "d": 4, "s": 1,
                      "amplitude": 0.5, "reference_size": 1000000},
}
SUITES = tuple(DEFAULTS) + ("all",)


def options(suite: str, given: dict | None) -> dict:
    """Merge user options with defaults; unknown keys raise ``KeyError``."""
    given = dict(given or {})
    unknown = set(given) - set(DEFAULTS[suite])
    if unknown:
        raise KeyError(f"{suite}: unknown option(s) {sorted(unknown)}")
    return {**DEFAULTS[suite], **given}


def _model(o) -> AdditiveModel:
    return AdditiveModel(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in o.items() if k in MODEL_KEYS})


def run_sandwich(o, seed):
    rng = np.random.default_rng(seed)
    lit = cen = anc = checked = 0
    worst_form = 0.0
    examples = []
    for _ in range(o["instances"]):
        X, ds, b, bs = random_instance(rng, o["max_n"], o["max_pd"])
        rep = check_sandwich(X, ds, b, bs)
        checked += rep.c_grid.size
        lit += rep.violations
        cen += rep.centered_violations
        anc += rep.anchored_violations
        if rep.violations and len(examples) < 3:
            examples.append(rep.to_json())
        f = X @ (b - bs)
        worst_form = max(worst_form, abs(empirical_norm(X, ds, f, bs).value - empirical_norm_raw(X, ds, f, bs)))
    failures = []
    if lit:
        failures.append(f"sandwich bound violated at {lit} of {checked} (instance, c) pairs")
    if cen:
        failures.append(f"centred upper bound violated at {cen} of {checked} pairs")
    if anc:
        failures.append(f"anchored sandwich violated at {anc} of {checked} pairs")
    if worst_form > 1e-10:
        failures.append(f"norm forms disagree by {worst_form:.3g}")
    payload = {"pairs": checked, "violations": lit, "centered_violations": cen,
               "anchored_violations": anc, "norm_form_gap": worst_form, "violation_examples": examples}
    return payload, failures, {}


def run_re(o, seed):
    model = AdditiveModel(p=o["p"], d=o["d"], s=o["s"])
    ds = simulate_cox_sample(model.simulation(o["n"], seed))
    design = expand_design(ds, model.dictionary)
    spec = PenaltySpec.grouped(model.p, model.d, 2)
    remove = constant_directions(model.dictionary, model.p) if o["identifiable"] else None
    est = estimate_re_constant(design, ds, model.beta_star, spec, o["mu"], o["n_samples"], seed, remove=remove)
    failures = []
    if not in_cone(spec, est.min_direction, est.support, est.mu):
        failures.append("minimising direction is outside the cone")
    if np.any(np.diff(est.trace) > 0):
        failures.append("running minimum increased")
    return {"estimate": est.to_json()}, failures, {}


def run_lemma1(o, seed):
    rng = np.random.default_rng(seed)
    spec = PenaltySpec.grouped(o["groups"], o["d"], o["gamma"], o["lam"])
    k = o["groups"] * o["d"]
    v = rng.standard_normal(k)
    bs = rng.standard_normal(k)
    inside = check_lemma1(spec, bs, scale_to_thresholds(spec, v, 0.9), o["n_samples"], seed)
    outside = check_lemma1(spec, bs, scale_to_thresholds(spec, v, 0.9, group=0), o["n_samples"], seed)
    zero = check_lemma1(spec, bs, np.zeros(k), 1000, seed)
    failures = []
    if inside.violations:
        failures.append(f"{inside.violations} violations with every event holding")
    if zero.violations:
        failures.append("violation with v = 0")
    if outside.witness is None:
        failures.append("no violating x found with one event failing")
    return {"inside": inside.to_json(), "outside": outside.to_json()}, failures, {}


def run_prop1(o, seed):
    rng = np.random.default_rng(seed)
    failures = []
    gaps = []
    for _ in range(o["instances"]):
        n = int(rng.integers(2, o["max_n"] + 1))
        x = rng.uniform(size=(n, 1))
        status = rng.integers(0, 2, n)
        status[0] = 1
        ds = SurvivalDataset.from_arrays(rng.exponential(size=n), status, x)
        i = int(rng.choice(np.flatnonzero(ds.at_risk_any)))
        got = min_weight_prop1(x, ds, i, o["b_n"], seed=seed).value
        r = np.sqrt(o["b_n"])
        grid = np.arange(-r, r + 1e-12, o["grid_step"])
        ref = min(observation_weights(x, ds, np.array([b])).omega[i] for b in grid)
        gaps.append(abs(got - ref))
    if max(gaps) > 1e-4:
        failures.append(f"numeric minimum differs from grid by {max(gaps):.3g}")
    one = SurvivalDataset.from_arrays([1.0], [1], [[0.4]])
    single = min_weight_prop1(np.array([[0.4]]), one, 0, o["b_n"]).value
    if single != 1.0:
        failures.append(f"single-subject minimum is {single!r}, not 1")
    cone_checks = []
    for k in range(o["cone_instances"]):
        model = AdditiveModel(p=2, d=2, s=1, family="polynomial")
        ds = simulate_cox_sample(model.simulation(30, replicate_seed(seed, k)))
        design = expand_design(ds, model.dictionary)
        spec = PenaltySpec.grouped(2, 2, 2)
        samp = sample_omega_lower(design, ds, model.beta_star, spec, n_cone=50, seed=seed)
        ball = min(min_weight_prop1(design, ds, i, samp.ball_sq_radius, seed=seed).value
                   for i in np.flatnonzero(ds.at_risk_any))
        cone_checks.append({"sampled": samp.value, "ball_min": ball})
        if samp.value < ball - 1e-9:
            failures.append(f"sampled cone minimum {samp.value:.6g} below ball minimum {ball:.6g}")
    return {"max_grid_gap": max(gaps), "single_subject": single, "cone_vs_ball": cone_checks}, failures, {}


def run_oracle(o, seed):
    model = AdditiveModel(p=o["p"], d=o["d"], s=o["s"], amplitude=o["amplitude"])
    spec0 = PenaltySpec.grouped(model.p, model.d, 2)
    oracle = OracleSpec.from_beta(spec0, model.beta_star)
    reports, failures = [], []
    zeta = None
    for r in range(o["replicates"]):
        ds = simulate_cox_sample(model.simulation(o["n"], replicate_seed(seed, r)))
        design = expand_design(ds, model.dictionary)
        g = design.matrix @ model.beta_star
        spec, lam = variant_lambda("group", o["n"], model, o["A"], 1.0)
        if zeta is None:
            est = estimate_re_constant(design, ds, model.beta_star, spec, n_samples=o["re_samples"], seed=seed,
                                       remove=constant_directions(model.dictionary, model.p))
            zeta = est.zeta_hat
        res = fit(design, ds, spec, FitConfig(tol=1e-8))
        om = sample_omega_lower(design, ds, model.beta_star, spec, n_cone=o["n_cone"], radius=o["radius"],
                                seed=replicate_seed(seed, r))
        rep = oracle_bound_report(design, ds, oracle, res.beta_hat, spec, lam.value, zeta, g, om.value)
        if not np.isfinite(rep.thm2_rhs):
            failures.append(f"replicate {r}: non-finite bound")
        reports.append(rep.to_json())
    freq = {k: float(np.mean([not rp["holds"][k] for rp in reports])) for k in ("theorem1", "theorem2", "localization")}
    return {"zeta_hat": zeta, "oracle": oracle.to_json(), "violation_frequency": freq,
            "reports": reports, "label": "sampled"}, failures, {}


def run_rate(o, seed):
    model = _model(o)
    cfg = RateConfig(tuple(o["n_grid"]), o["replicates"], o["variant"], o["A"], o["zeta"], seed, model)
    table = rate_experiment(cfg)
    failures = []
    if not np.isfinite(table.slope):
        failures.append("slope undefined (too few usable grid points)")
    payload = {**table.to_json(), "strictly_decreasing": table.strictly_decreasing}
    return payload, failures, {"rate.csv": table.to_csv()}


def run_concentration(o, seed):
    model = _model(o)
    summ = concentration_probe(model, None, tuple(o["n_grid"]), o["replicates"], seed, o["reference_size"])
    failures = [] if summ.strictly_decreasing else ["median sup-deviation is not strictly decreasing"]
    return summ.to_json(), failures, {}


RUNNERS = {
    "sandwich": run_sandwich, "re": run_re, "lemma1": run_lemma1, "prop1": run_prop1,
    "oracle": run_oracle, "rate": run_rate, "concentration": run_concentration,
}

