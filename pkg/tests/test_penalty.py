import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import subgradient_prox
from structcox.basis import SmoothingFactors
from structcox.penalty import (INF, GroupStructure, PenaltySpec, SmoothPenaltySpec, UnsupportedPenalty,
                               dual_block_norm, expand_overlap, holder_conjugate, latent_spec,
                               norm_subgradient_distance, penalty_value, prox_group, prox_norm,
                               smooth_penalty_value, smooth_penalty_value_tilde, threshold_holds)

GAMMAS = [1, 2, INF]


def test_holder_conjugates():
    assert holder_conjugate(2) == 2
    assert holder_conjugate(1) == INF and holder_conjugate(INF) == 1
    assert holder_conjugate(3) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        holder_conjugate(0.5)


@pytest.mark.parametrize("gamma, factor", [(1, 1.0), (2, 2.0), (INF, 4.0)])
def test_group_scaling_table(gamma, factor):
    spec = PenaltySpec.grouped(1, 4, gamma)
    assert spec.scalings[0] == pytest.approx(factor)
    assert spec.scalings[0] == pytest.approx(4 ** (1 / holder_conjugate(gamma)) if holder_conjugate(gamma) != INF
                                             else 1.0)


def test_penalty_hand_values():
    assert penalty_value(PenaltySpec.grouped(2, 4, 2), np.zeros(8)) == 0
    assert penalty_value(PenaltySpec.grouped(1, 1, 1), np.array([-3.0])) == 3
    assert penalty_value(PenaltySpec.grouped(2, 4, 2), np.r_[np.ones(4), np.zeros(4)]) == pytest.approx(4.0)


def test_per_group_lambda_weights():
    spec = PenaltySpec.grouped(2, 2, 2, per_group_lambda=(0.5, 2.0))
    b = np.array([3.0, 4.0, 0.0, 1.0])
    assert penalty_value(spec, b) == pytest.approx(0.5 * np.sqrt(2) * 5 + 2.0 * np.sqrt(2) * 1)


def test_size_mismatch():
    with pytest.raises(ValueError):
        penalty_value(PenaltySpec.grouped(2, 2, 2), np.zeros(3))


def test_dual_norms():
    spec = PenaltySpec.grouped(1, 2, 2, lam=3.0)
    assert dual_block_norm(spec, np.array([3.0, -4.0]), 0) == pytest.approx(5.0)
    assert dual_block_norm(PenaltySpec.grouped(1, 3, 1), np.array([1.0, -7.0, 2.0]), 0) == 7.0
    assert dual_block_norm(PenaltySpec.grouped(1, 3, INF), np.array([1.0, -7.0, 2.0]), 0) == 10.0
    # 5 > 3 * sqrt(2), but 5 <= 4 * sqrt(2)
    assert not threshold_holds(spec, np.array([3.0, -4.0]), 0)
    assert threshold_holds(spec.with_lambda(4.0), np.array([3.0, -4.0]), 0)


def test_prox_shrinks_small_blocks_to_zero():
    for g in GAMMAS:
        z = np.array([0.3, -0.2])
        assert np.all(prox_norm(z, g, 5.0) == 0)


def test_prox_block_soft_threshold():
    z = np.array([1.8, 2.4])  # norm 3
    assert np.allclose(prox_norm(z, 2, 1.0), z * 2 / 3)


def test_prox_inf_small_example_against_oracle():
    ref = subgradient_prox([[2.0, 0.5]], [1.0], INF)[0]
    assert np.abs(prox_norm(np.array([2.0, 0.5]), INF, 1.0) - ref).max() <= 1e-4


def test_prox_rejects_nonidentity_rho():
    spec = PenaltySpec.grouped(1, 2, 2, 1.0, rho={"quadratic": 0.1})
    with pytest.raises(UnsupportedPenalty):
        prox_group(spec, np.ones(2), 1.0)


def test_prox_rejects_unsupported_exponent():
    with pytest.raises(UnsupportedPenalty):
        prox_norm(np.ones(3), 3, 1.0)


@given(st.integers(0, 10_000), st.sampled_from(GAMMAS), st.integers(1, 6), st.floats(0.01, 3))
def test_prox_optimality_certificate(seed, gamma, d, t):
    z = np.random.default_rng(seed).normal(scale=2, size=d)
    x = prox_norm(z, gamma, t)
    assert norm_subgradient_distance(z - x, x, gamma, t) <= 1e-6


@given(st.integers(0, 10_000), st.sampled_from(GAMMAS), st.floats(0, 5))
def test_penalty_is_homogeneous_and_subadditive(seed, gamma, c):
    rng = np.random.default_rng(seed)
    spec = PenaltySpec.grouped(3, 3, gamma)
    b1, b2 = rng.normal(size=(2, 9))
    assert penalty_value(spec, c * b1) == pytest.approx(c * penalty_value(spec, b1), rel=1e-12, abs=1e-12)
    assert penalty_value(spec, b1 + b2) <= penalty_value(spec, b1) + penalty_value(spec, b2) + 1e-12


@given(st.integers(0, 10_000), st.floats(1, 6))
def test_rational_exponent_dual_pair(seed, gamma):
    # Hoelder: |<v, x>| <= ||v||_{gamma*} ||x||_gamma
    rng = np.random.default_rng(seed)
    spec = PenaltySpec.grouped(1, 5, gamma)
    v, x = rng.normal(size=(2, 5))
    assert abs(v @ x) <= dual_block_norm(spec, v, 0) * penalty_value(spec, x) / spec.scalings[0] + 1e-10


# -- smooth-selection penalty ------------------------------------------------------

def _factors(rng, p, d, eps=1e-8):
    A = rng.normal(size=(d, d))
    M = A @ A.T
    R = np.linalg.cholesky(M + eps * np.eye(d)).T
    return SmoothingFactors([M] * p, [R] * p, eps)


def test_smooth_identity_factors():
    f = SmoothingFactors([np.eye(3)], [np.eye(3)], 0.0)
    spec = SmoothPenaltySpec(f, 2)
    b = np.array([1.0, 2.0, 2.0])
    assert smooth_penalty_value(spec, b) == pytest.approx(np.sqrt(3) * 6)
    assert smooth_penalty_value(spec, np.zeros(3)) == 0


def test_smooth_requires_gamma_at_least_two():
    with pytest.raises(ValueError):
        SmoothPenaltySpec(SmoothingFactors([np.eye(2)], [np.eye(2)], 0.0), 1)


@given(st.integers(0, 10_000), st.sampled_from([2, INF]))
def test_smooth_forms_agree(seed, gamma):
    rng = np.random.default_rng(seed)
    f = _factors(rng, 2, 3)
    spec = SmoothPenaltySpec(f, gamma)
    b = rng.normal(size=6)
    bt = np.concatenate([R @ b[j * 3:(j + 1) * 3] for j, R in enumerate(f.R)])
    assert smooth_penalty_value(spec, b) == pytest.approx(smooth_penalty_value_tilde(spec, bt), rel=1e-10)


# -- overlapping groups ------------------------------------------------------------

def test_disjoint_groups_expand_to_identity():
    X = np.arange(12.0).reshape(3, 4)
    XL, rec = expand_overlap(GroupStructure.contiguous(2, 2), X)
    assert np.array_equal(XL, X) and np.array_equal(rec.recover(np.arange(4.0)), np.arange(4.0))


def test_shared_coordinate_is_duplicated():
    s = GroupStructure(([0, 1], [1, 2]), 3)
    XL, rec = expand_overlap(s, np.eye(3))
    assert s.latent_dim == 4 and XL.shape == (3, 4)
    assert rec.recover([1.0, 2.0, 3.0, 4.0]).tolist() == [1.0, 5.0, 4.0]
    assert s.overlap_map[1] == [0, 1]


def test_latent_spec_is_disjoint():
    lat, rec = latent_spec(PenaltySpec(GroupStructure(([0, 1], [1, 2]), 3), 2, 1.0))
    assert not lat.structure.overlapping and lat.structure.n_coords == 4


def test_empty_group_rejected():
    with pytest.raises(ValueError):
        GroupStructure(([0], []), 2)
