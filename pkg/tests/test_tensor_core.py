import math

import numpy as np
import pytest

from rigidity_cert.errors import DetNonPositive, DimensionMismatch, Singular
from rigidity_cert.tensor_core import (
    dist_to_rotations,
    frob,
    polar_decompose,
    random_rotation,
    strain,
    strain_dist_sandwich,
    wedge,
)

from conftest import random_gradient
from oracles import (
    dist_via_svd,
    rotation_grid_min_2d,
    rotation_grid_min_2d_enum,
    rotation_min_3d_sampled,
)


def test_polar_diagonal_stretch():
    pair = polar_decompose(np.diag([2.0, 0.5]))
    assert np.allclose(pair.rotation, np.eye(2), atol=1e-14)
    assert np.allclose(pair.stretch, np.diag([2.0, 0.5]), atol=1e-14)


def test_polar_recovers_constructed_factors():
    rng = np.random.default_rng(7)
    for n in (2, 3):
        for _ in range(200):
            R = random_rotation(rng, n)
            ev = rng.uniform(0.1, 10.0, size=n)
            B = random_rotation(rng, n)
            U = B @ np.diag(ev) @ B.T
            pair = polar_decompose(R @ U)
            assert frob(pair.rotation - R) <= 1e-9
            assert frob(pair.stretch - U) <= 1e-9 * (1.0 + frob(U))


def test_polar_invariants_random_sweep():
    rng = np.random.default_rng(11)
    for n in (2, 3):
        for _ in range(500):
            F = random_gradient(rng, n)
            pair = polar_decompose(F)
            R, U = pair.rotation, pair.stretch
            assert frob(R.T @ R - np.eye(n)) <= 1e-12
            assert np.linalg.det(R) > 0
            assert np.all(np.linalg.eigvalsh(0.5 * (U + U.T)) > 0)
            assert frob(R @ U - F) <= 1e-10 * (1.0 + frob(F))


def test_polar_rejects_nonpositive_det():
    with pytest.raises(DetNonPositive):
        polar_decompose(np.diag([1.0, -1.0]))
    with pytest.raises(DetNonPositive):
        polar_decompose(np.zeros((2, 2)))
    with pytest.raises(DetNonPositive):
        dist_to_rotations(np.diag([-2.0, 1.0, 1.0]))


def test_polar_rejects_near_singular():
    with pytest.raises(Singular):
        polar_decompose(np.diag([1.0, 1e-16]))


def test_shape_validation():
    with pytest.raises(DimensionMismatch):
        polar_decompose(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        dist_to_rotations(np.eye(4))
    with pytest.raises(DimensionMismatch):
        strain(np.array([1.0, 2.0]))


def test_dist_frozen_value():
    # diag(2, 1/2): stretches 2 and 1/2, so dist^2 = 1 + 1/4
    assert dist_to_rotations(np.diag([2.0, 0.5])) == pytest.approx(
        math.sqrt(1.25), abs=1e-14
    )


def test_dist_zero_on_rotations():
    rng = np.random.default_rng(3)
    for n in (2, 3):
        for _ in range(50):
            assert dist_to_rotations(random_rotation(rng, n)) <= 1e-7


def test_dist_matches_svd_route():
    rng = np.random.default_rng(5)
    for n in (2, 3):
        for _ in range(300):
            F = random_gradient(rng, n)
            assert dist_to_rotations(F) == pytest.approx(dist_via_svd(F), rel=1e-10)


def test_dist_matches_angle_grid_oracle_2d():
    rng = np.random.default_rng(13)
    for _ in range(50):
        F = random_gradient(rng, 2)
        grid = rotation_grid_min_2d_enum(F, 200_000)
        fast = rotation_grid_min_2d(F, 200_000)
        assert fast == pytest.approx(grid, abs=1e-12)
        d = dist_to_rotations(F)
        assert d <= grid + 1e-9
        assert d == pytest.approx(grid, abs=1e-6)


def test_dist_one_sided_against_3d_samples():
    rng = np.random.default_rng(17)
    for _ in range(20):
        F = random_gradient(rng, 3)
        sampled = rotation_min_3d_sampled(F, rng, 20_000)
        assert dist_to_rotations(F) <= sampled + 1e-12


def test_strain_simple_shear():
    g = 0.3
    F = np.array([[1.0, g], [0.0, 1.0]])
    expected = np.array([[0.0, g / 2], [g / 2, g * g / 2]])
    assert np.allclose(strain(F), expected, atol=1e-15)


def test_strain_vanishes_exactly_on_rotations():
    rng = np.random.default_rng(23)
    for n in (2, 3):
        for _ in range(50):
            assert frob(strain(random_rotation(rng, n))) <= 1e-14


def test_wedge_standard_frames():
    assert np.allclose(wedge([np.array([1.0, 0.0])]), [0.0, 1.0])
    assert np.allclose(
        wedge([np.array([1.0, 0, 0]), np.array([0.0, 1, 0])]), [0, 0, 1.0]
    )


def test_wedge_orthogonal_and_oriented():
    rng = np.random.default_rng(29)
    for _ in range(100):
        a, b = rng.normal(size=(2, 3))
        w = wedge([a, b])
        assert abs(np.dot(w, a)) <= 1e-12 * (1 + frob(a) * frob(b))
        assert abs(np.dot(w, b)) <= 1e-12 * (1 + frob(a) * frob(b))
        # positively oriented triple when independent
        if frob(w) > 1e-8:
            assert np.linalg.det(np.column_stack([a, b, w])) > 0
    for _ in range(100):
        a = rng.normal(size=2)
        w = wedge([a])
        assert abs(np.dot(w, a)) <= 1e-13 * (1 + frob(a))
        assert np.linalg.det(np.column_stack([a, w])) >= 0


def test_wedge_rotation_equivariance():
    rng = np.random.default_rng(31)
    for _ in range(50):
        Q = random_rotation(rng, 3)
        a, b = rng.normal(size=(2, 3))
        assert np.allclose(wedge([Q @ a, Q @ b]), Q @ wedge([a, b]), atol=1e-12)
        Q2 = random_rotation(rng, 2)
        c = rng.normal(size=2)
        assert np.allclose(wedge([Q2 @ c]), Q2 @ wedge([c]), atol=1e-12)


def test_wedge_norm_bound_unit_factor():
    # |a ^ b| <= |a| |b| in 3D, |^a| = |a| in 2D
    rng = np.random.default_rng(37)
    for _ in range(200):
        a, b = rng.normal(size=(2, 3))
        assert frob(wedge([a, b])) <= frob(a) * frob(b) * (1 + 1e-12)
        c = rng.normal(size=2)
        assert frob(wedge([c])) == pytest.approx(frob(c), rel=1e-14)


def test_wedge_alternating_and_bilinear():
    rng = np.random.default_rng(41)
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 3))
        s, t = rng.normal(size=2)
        assert np.allclose(wedge([a, b]), -wedge([b, a]), atol=1e-13)
        assert frob(wedge([a, a])) <= 1e-13
        assert np.allclose(
            wedge([s * a + t * c, b]),
            s * wedge([a, b]) + t * wedge([c, b]),
            atol=1e-11,
        )


def test_wedge_shape_errors():
    with pytest.raises(DimensionMismatch):
        wedge([np.array([1.0, 0, 0])])
    with pytest.raises(DimensionMismatch):
        wedge([np.array([1.0, 0]), np.array([0.0, 1])])


def test_sandwich_frozen_diagonal_case():
    # diag(2, 1/2): d^2 = 5/4, E = diag(3/2, -3/8), |E|^2 = 2.390625
    rep = strain_dist_sandwich(np.diag([2.0, 0.5]))
    assert rep.dist == pytest.approx(math.sqrt(1.25), abs=1e-14)
    assert rep.strain_norm == pytest.approx(math.sqrt(2.390625), abs=1e-14)
    assert 1.25 <= 2.0 * math.sqrt(2.0) * rep.strain_norm
    assert rep.all_ok


def test_sandwich_exact_at_identity_and_rotations():
    rep = strain_dist_sandwich(np.eye(3))
    assert rep.dist == 0.0 and rep.strain_norm == 0.0 and rep.all_ok
    rng = np.random.default_rng(43)
    for n in (2, 3):
        for _ in range(50):
            assert strain_dist_sandwich(random_rotation(rng, n)).all_ok


def test_sandwich_random_sweep_no_violations():
    rng = np.random.default_rng(47)
    for n in (2, 3):
        for _ in range(1000):
            rep = strain_dist_sandwich(random_gradient(rng, n))
            assert rep.all_ok
