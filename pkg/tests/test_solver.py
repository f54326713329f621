import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from oracles import grid_minimum
from structcox.basis import DictionarySpec, SmoothingFactors, expand_design, smoothing_factors
from structcox.likelihood import log_partial_likelihood, score
from structcox.penalty import INF, GroupStructure, PenaltySpec, SmoothPenaltySpec, dual_block_norm
from structcox.solver import (FitConfig, LambdaRule, fit, fit_path, fit_smooth, lambda_from_theory, objective,
                              path_report, plugin_u, smooth_objective, zero_threshold)
from structcox.survival import SurvivalDataset


def _hand():
    return np.array([[0.3], [0.9]]), SurvivalDataset.from_arrays([1.0, 2.0], [1, 1], [[0.1], [0.2]])


def test_objective_pieces():
    X, ds = _hand()
    spec = PenaltySpec.grouped(1, 1, 1, 1.0)
    assert objective(X, ds, spec, np.zeros(1)) == pytest.approx(-0.5 * math.log(2))
    b = np.array([0.5])
    assert objective(X, ds, spec, b) == pytest.approx(-log_partial_likelihood(X, ds, b) + 0.5)
    assert objective(X, ds, spec.with_lambda(0.0), b) == pytest.approx(-log_partial_likelihood(X, ds, b))


def test_hand_objective_value():
    # L(b) = 0.5 [0.3b - log((e^{0.3b} + e^{0.9b})/2) + 0.9b - log(e^{0.9b}/2)]
    X, ds = _hand()
    L = 0.5 * (0.15 - math.log((math.exp(0.15) + math.exp(0.45)) / 2) + math.log(2))
    assert objective(X, ds, PenaltySpec.grouped(1, 1, 1, 1.0), np.array([0.5])) == pytest.approx(-L + 0.5)


@pytest.mark.parametrize("gamma", [1, 2, INF])
def test_above_zero_threshold_gives_zero(gamma):
    rng = np.random.default_rng(1)
    X, ds = random_dataset(rng, 40, 6)
    spec = PenaltySpec.grouped(3, 2, gamma)
    lam = zero_threshold(X, ds, spec)
    res = fit(X, ds, spec.with_lambda(lam * 1.01))
    assert np.all(res.beta_hat == 0) and res.kkt_residual == 0 and res.converged
    res = fit(X, ds, spec.with_lambda(lam * 0.99))
    assert np.any(res.beta_hat != 0)


def test_zero_threshold_matches_dual_norm():
    rng = np.random.default_rng(2)
    X, ds = random_dataset(rng, 30, 4)
    spec = PenaltySpec.grouped(2, 2, 2)
    g = score(X, ds, np.zeros(4))
    expect = max(dual_block_norm(spec, g, j) / spec.scalings[j] for j in range(2))
    assert zero_threshold(X, ds, spec) == pytest.approx(expect)


def test_tiny_instance_matches_grid():
    rng = np.random.default_rng(3)
    X, ds = random_dataset(rng, 6, 2)
    spec = PenaltySpec.grouped(2, 1, 2, 0.1)
    res = fit(X, ds, spec, FitConfig(tol=1e-9))
    ref, _ = grid_minimum(X, ds, spec)
    assert abs(res.objective - ref) <= 1e-4 and res.objective <= ref + 1e-12


def test_separable_unpenalised_does_not_converge():
    X = np.array([[1.0], [0.0], [-1.0]])
    ds = SurvivalDataset.from_arrays([1.0, 2.0, 3.0], [1, 1, 1], [[0.1], [0.2], [0.3]])
    res = fit(X, ds, PenaltySpec.grouped(1, 1, 1, 0.0), FitConfig(max_iters=200))
    assert not res.converged and res.iterations == 200 and res.beta_hat[0] > 5


def test_fit_is_deterministic_and_serialises():
    rng = np.random.default_rng(4)
    X, ds = random_dataset(rng, 30, 4)
    spec = PenaltySpec.grouped(2, 2, 2, 0.02)
    a, b = fit(X, ds, spec), fit(X, ds, spec)
    assert np.array_equal(a.beta_hat, b.beta_hat) and np.array_equal(a.objective_trace, b.objective_trace)
    js = a.to_json({"rule": "grid"})
    assert set(js) == {"beta_hat", "active_groups", "objective", "kkt_residual", "iterations", "converged",
                       "lambda", "rule_audit"}


def test_dimension_mismatch():
    rng = np.random.default_rng(5)
    X, ds = random_dataset(rng, 10, 3)
    with pytest.raises(ValueError):
        fit(X, ds, PenaltySpec.grouped(2, 2, 2, 0.1))


def test_quadratic_rho_uses_subgradient_fallback():
    rng = np.random.default_rng(6)
    X, ds = random_dataset(rng, 30, 2)
    spec = PenaltySpec.grouped(2, 1, 2, 0.02, rho={"quadratic": 0.5})
    res = fit(X, ds, spec, FitConfig(max_iters=3000))
    assert np.isfinite(res.objective)
    assert res.objective <= objective(X, ds, spec, np.zeros(2)) + 1e-12


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, INF]), st.floats(0.005, 0.1))
def test_descent_and_kkt(seed, gamma, lam):
    rng = np.random.default_rng(seed)
    X, ds = random_dataset(rng, 40, 6)
    spec = PenaltySpec.grouped(3, 2, gamma, lam)
    res = fit(X, ds, spec, FitConfig(tol=1e-9))
    assert np.all(np.diff(res.objective_trace) <= 1e-12)
    if res.converged:
        assert res.kkt_residual <= 10 * 1e-9
        g = -score(X, ds, res.beta_hat)
        for j, idx in enumerate(spec.structure.groups):
            if not np.any(res.beta_hat[idx]):
                assert dual_block_norm(spec, g, j) <= lam * spec.scalings[j] + 1e-8


# -- overlap --------------------------------------------------------------------

def test_latent_mode_on_disjoint_groups_matches_standard():
    rng = np.random.default_rng(7)
    X, ds = random_dataset(rng, 40, 4)
    spec = PenaltySpec.grouped(2, 2, 2, 0.02)
    a = fit(X, ds, spec, FitConfig(tol=1e-9))
    b = fit(X, ds, spec, FitConfig(tol=1e-9, mode="overlap-latent"))
    assert abs(a.objective - b.objective) <= 1e-8
    assert np.allclose(a.beta_hat, b.beta_hat, atol=1e-5)


def test_overlapping_groups_need_latent_mode():
    rng = np.random.default_rng(8)
    X, ds = random_dataset(rng, 40, 3)
    spec = PenaltySpec(GroupStructure(([0, 1], [1, 2]), 3), 2, 0.02)
    with pytest.raises(ValueError):
        fit(X, ds, spec)
    res = fit(X, ds, spec, FitConfig(mode="overlap-latent"))
    assert res.beta_hat.shape == (3,) and res.latent_beta.shape == (4,)
    assert np.allclose(res.beta_hat, [res.latent_beta[0], res.latent_beta[1] + res.latent_beta[2],
                                      res.latent_beta[3]])


# -- smooth-selection -----------------------------------------------------------

def _smooth_instance(seed, eps=1e-8, family="bspline", d=5, p=2, n=60):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(size=(n, p))
    T = rng.exponential(size=n) * np.exp(-(Z[:, 0] - 0.5))
    ds = SurvivalDataset.from_arrays(T, np.ones(n, int), Z)
    spec = DictionarySpec(family, d)
    return expand_design(ds, spec), ds, smoothing_factors(spec, eps, p)


def test_identity_factors_reduce_to_doubled_norm():
    design, ds, _ = _smooth_instance(0)
    f = SmoothingFactors([np.zeros((5, 5))] * 2, [np.eye(5)] * 2, 0.0)
    sspec = SmoothPenaltySpec(f, 2, 0.01)
    res = fit_smooth(design, ds, sspec, FitConfig(tol=1e-9))
    doubled = fit(design, ds, PenaltySpec.grouped(2, 5, 2, 0.02), FitConfig(tol=1e-9))
    # ||b||_2 + ||b||_2 with I: same as group lasso at twice lambda (sqrt(d) scaling on both)
    assert np.allclose(res.beta_hat, doubled.beta_hat, atol=1e-5)


@pytest.mark.parametrize("eps", [1e-2, 1e-8])
def test_smooth_objective_forms_agree_at_fit(eps):
    design, ds, f = _smooth_instance(1, eps)
    sspec = SmoothPenaltySpec(f, 2, 0.005)
    res = fit_smooth(design, ds, sspec, FitConfig(tol=1e-10))
    assert abs(smooth_objective(design, ds, sspec, res.beta_hat) - res.objective) <= 1e-8


def test_flat_roughness_close_to_group_fit():
    # polynomial d = 2 has M = 0, so the penalty is eps-close to twice the group norm
    design, ds, f = _smooth_instance(2, 1e-8, "polynomial", 2)
    sspec = SmoothPenaltySpec(f, 2, 0.01)
    res = fit_smooth(design, ds, sspec, FitConfig(tol=1e-9))
    scale = np.sqrt(1e-8)
    plain = fit(design, ds, PenaltySpec.grouped(2, 2, 2, 0.01 * scale), FitConfig(tol=1e-9))
    assert np.abs(res.beta_hat - plain.beta_hat).max() <= 1e-3


# -- path ---------------------------------------------------------------------------

def test_path_behaviour():
    rng = np.random.default_rng(9)
    X, ds = random_dataset(rng, 50, 6)
    spec = PenaltySpec.grouped(3, 2, 2)
    top = zero_threshold(X, ds, spec)
    grid = list(top * np.geomspace(1.1, 0.05, 6))
    cfg = FitConfig(tol=1e-9)
    warm = fit_path(X, ds, spec, grid, cfg)
    cold = fit_path(X, ds, spec, grid, cfg, warm=False)
    assert np.all(warm[0].beta_hat == 0)
    assert all(abs(a.objective - b.objective) <= 1e-6 for a, b in zip(warm, cold))
    single = fit_path(X, ds, spec, grid[2:3], cfg)[0]
    assert np.array_equal(single.beta_hat, fit(X, ds, spec.with_lambda(grid[2]), cfg).beta_hat)
    assert "monotone_active" in path_report(warm)
    with pytest.raises(ValueError):
        fit_path(X, ds, spec, grid[::-1], cfg)


# -- tuning rules ---------------------------------------------------------------------

def test_theorem1_rule_hand_value():
    res = lambda_from_theory(LambdaRule("theorem1", n=16, A=1, u=1, lambda0=1, d=1, pd=math.e))
    assert res.value == pytest.approx(4.0)
    assert lambda_from_theory(LambdaRule("theorem1", n=16, A=0, pd=math.e)).value == 0


def test_theorem1_dimension_ratio():
    a = lambda_from_theory(LambdaRule("theorem1", n=100, p=10, d=4)).value
    b = lambda_from_theory(LambdaRule("theorem1", n=100, p=20, d=4)).value
    assert b / a == pytest.approx(math.sqrt(math.log(80) / math.log(40)))


def test_theorem2_second_condition_reported():
    res = lambda_from_theory(LambdaRule("theorem2", n=100, p=10, d=4, zeta=0.5, active_gammas=(2, 2)))
    a = res.audit
    assert a["c_unspecified"] and a["second_condition_holds"]
    assert res.value * a["sum_d_powers"] >= 0.5 ** 4 - 1e-15
    with pytest.raises(ValueError):
        lambda_from_theory(LambdaRule("theorem2", n=100, p=10, d=4))


def test_corollary_rules():
    r1 = lambda_from_theory(LambdaRule("corollary1", n=200, p=5, d=4, zeta=1.0, gammas=(2,) * 5,
                                       group_sizes=(4,) * 5))
    assert r1.per_group.shape == (5,) and np.all(r1.per_group >= 0)
    r2 = lambda_from_theory(LambdaRule("corollary2", n=200, p=5, d=4, zeta=1.0))
    assert r2.value == pytest.approx(min(1.0, math.sqrt(math.log(20) / 200)) / 16)


def test_plugin_u():
    assert plugin_u([0.5, -0.5]) == pytest.approx(math.e)
