import math

import numpy as np
import pytest

from rigidity_cert.errors import CheckFailed, OutsideDomain, SetEscapesDomain
from rigidity_cert.material import (
    CustomMaterial,
    check_constitutive,
    elasticity_apply,
    elasticity_tensor,
    energy_density,
    neo_hookean,
    quadratic_toy,
    radial_modulation,
    stress,
    stvk,
    taylor_constants,
)
from rigidity_cert.tensor_core import frob, random_rotation

from conftest import random_gradient
from oracles import fd_matrix_derivative

MODELS = [stvk(1.0, 1.0), neo_hookean(1.0, 1.0)]


def test_stvk_frozen_energy_value():
    # F = 2I in 2D: E = 1.5 I, tr E = 3, E:E = 4.5, W = 0.5*9 + 4.5 = 9
    assert energy_density(stvk(1.0, 1.0), None, 2.0 * np.eye(2)) == pytest.approx(9.0, abs=1e-13)


def test_energy_zero_at_rotations():
    rng = np.random.default_rng(1)
    for m in MODELS:
        for n in (2, 3):
            assert energy_density(m, None, np.eye(n)) == 0.0
            for _ in range(20):
                R = random_rotation(rng, n)
                assert abs(energy_density(m, None, R)) <= 1e-13


def test_energy_nonnegative_sweep():
    rng = np.random.default_rng(2)
    for m in MODELS:
        for n in (2, 3):
            for _ in range(200):
                F = random_gradient(rng, n, 0.3, 3.0)
                assert energy_density(m, None, F) >= -1e-14


def test_stress_matches_fd_of_energy():
    rng = np.random.default_rng(3)
    for m in MODELS:
        for n in (2, 3):
            for _ in range(15):
                F = random_gradient(rng, n, 0.5, 2.0)
                h = 1e-6 * (1.0 + frob(F))
                fd = fd_matrix_derivative(lambda G: energy_density(m, None, G), F, h)
                S = stress(m, None, F)
                assert frob(S - fd) <= 1e-6 * (1.0 + frob(S))


def test_elasticity_matches_fd_of_stress():
    rng = np.random.default_rng(5)
    for m in MODELS:
        for n in (2, 3):
            for _ in range(10):
                F = random_gradient(rng, n, 0.5, 2.0)
                A = elasticity_tensor(m, None, F)
                h = 1e-6 * (1.0 + frob(F))
                for _ in range(4):
                    H = rng.normal(size=(n, n))
                    Fp, Fm = F + h * H, F - h * H
                    fd = (stress(m, None, Fp) - stress(m, None, Fm)) / (2 * h)
                    AH = np.einsum("iajb,jb->ia", A, H)
                    assert frob(AH - fd) <= 1e-5 * (1.0 + frob(AH))


def test_elasticity_bilinear_symmetric():
    rng = np.random.default_rng(7)
    for m in MODELS:
        for _ in range(30):
            F = random_gradient(rng, 2, 0.5, 2.0)
            A = elasticity_tensor(m, None, F)
            H1, H2 = rng.normal(size=(2, 2, 2))
            lhs = float(np.sum(H1 * np.einsum("iajb,jb->ia", A, H2)))
            rhs = float(np.sum(H2 * np.einsum("iajb,jb->ia", A, H1)))
            assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_elasticity_identity_frozen_value():
    # lam = mu = 1, H = e1 x e1: lam (tr H)^2 + 2 mu |sym H|^2 = 1 + 2 = 3
    for m in MODELS:
        H = np.zeros((2, 2))
        H[0, 0] = 1.0
        AH = elasticity_apply(m, None, np.eye(2), H)
        assert float(np.sum(H * AH)) == pytest.approx(3.0, abs=1e-12)


def test_frame_indifference_sweep():
    rng = np.random.default_rng(11)
    for m in MODELS:
        for n in (2, 3):
            for _ in range(100):
                F = random_gradient(rng, n, 0.4, 2.5)
                Q = random_rotation(rng, n)
                a = energy_density(m, None, F)
                b = energy_density(m, None, Q @ F)
                assert abs(a - b) <= 1e-12 * (1.0 + abs(a))


def test_sigma_representation_of_stress():
    rng = np.random.default_rng(13)
    for m in MODELS:
        for _ in range(50):
            F = random_gradient(rng, 2, 0.5, 2.0)
            C = F.T @ F
            Ds = m.dsigma_many(None, C[None])[0]
            S = stress(m, None, F)
            assert frob(S - 2.0 * F @ Ds) <= 1e-10 * (1.0 + frob(S))


def test_sigma_split_of_elasticity():
    rng = np.random.default_rng(17)
    for m in MODELS:
        for n in (2, 3):
            for _ in range(30):
                F = random_gradient(rng, n, 0.5, 2.0)
                H = rng.normal(size=(n, n))
                C = F.T @ F
                B = H.T @ F + F.T @ H
                lhs = float(np.sum(H * elasticity_apply(m, None, F, H)))
                Ds = m.dsigma_many(None, C[None])[0]
                D2B = m.d2sigma_apply_many(None, C[None], B[None])[0]
                rhs = float(np.sum(B * D2B)) + 2.0 * float(np.sum(Ds * (H.T @ H)))
                assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))


def test_stress_free_reference():
    for m in MODELS:
        for n in (2, 3):
            assert frob(stress(m, None, np.eye(n))) <= 1e-14


def test_check_constitutive_stvk():
    rep = check_constitutive(stvk(1.0, 1.0), n=2, seed=0)
    rep.require()
    assert rep.frame_indifference_err <= 1e-12
    assert rep.stress_free_err <= 1e-14
    assert rep.sigma_stress_err <= 1e-12
    assert rep.sigma_split_err <= 1e-12
    # best constant in A(I)[H]:H >= c |H + H^T|^2 is mu/2
    assert rep.shear_floor == pytest.approx(0.5, abs=1e-9)
    assert rep.sigma_floor == pytest.approx(0.5, abs=1e-9)
    assert rep.skew_annihilation_err <= 1e-13


def test_check_constitutive_neo_hookean():
    rep = check_constitutive(neo_hookean(1.0, 1.0), n=2, seed=1)
    rep.require()
    assert rep.shear_floor == pytest.approx(0.5, abs=1e-9)
    assert rep.sigma_floor == pytest.approx(0.5, abs=1e-9)


def test_check_constitutive_3d():
    rep = check_constitutive(stvk(2.0, 0.75), n=3, seed=2)
    rep.require()
    assert rep.shear_floor == pytest.approx(0.375, abs=1e-9)


def test_modulated_material():
    mod = radial_modulation(0.5, center=(0.0, 0.0), width=1.0)
    m = stvk(1.0, 1.0, modulation=mod)
    base = stvk(1.0, 1.0)
    rng = np.random.default_rng(19)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=2)
        F = random_gradient(rng, 2, 0.5, 2.0)
        scale = 1.0 + 0.5 * math.exp(-float(np.sum(x * x)))
        assert energy_density(m, x, F) == pytest.approx(
            scale * energy_density(base, None, F), rel=1e-12
        )
    assert energy_density(m, np.array([0.3, -0.2]), np.eye(2)) == 0.0
    rep = check_constitutive(m, n=2, seed=3)
    rep.require()
    # moduli at the origin are scaled by 1.5
    assert rep.shear_floor == pytest.approx(0.75, abs=1e-9)
    assert rep.x_variation > 0.0 and math.isfinite(rep.x_variation)


def test_radial_modulation_validation():
    with pytest.raises(CheckFailed):
        radial_modulation(-1.0, (0, 0), 1.0)
    with pytest.raises(CheckFailed):
        radial_modulation(0.5, (0, 0), 0.0)


def test_outside_domain_rejected():
    for m in MODELS:
        with pytest.raises(OutsideDomain):
            energy_density(m, None, np.diag([1.0, -1.0]))
        with pytest.raises(OutsideDomain):
            stress(m, None, np.diag([0.0, 1.0]))
    with pytest.raises(OutsideDomain):
        neo_hookean().energy_many(None, np.stack([np.eye(2), np.diag([-1.0, 1.0])]))


def test_custom_material_fd_fallbacks():
    lam, mu = 1.3, 0.7
    ref = stvk(lam, mu)

    def w(x, F):
        E = 0.5 * (F.T @ F - np.eye(F.shape[0]))
        return 0.5 * lam * np.trace(E) ** 2 + mu * float(np.sum(E * E))

    m = CustomMaterial("stvk-by-hand", w, frame_indifferent=True)
    rng = np.random.default_rng(23)
    for _ in range(5):
        F = random_gradient(rng, 2, 0.5, 2.0)
        assert frob(stress(m, None, F) - stress(ref, None, F)) <= 1e-6 * (
            1 + frob(stress(ref, None, F))
        )
        H = rng.normal(size=(2, 2))
        a = elasticity_apply(m, None, F, H)
        b = elasticity_apply(ref, None, F, H)
        assert frob(a - b) <= 1e-4 * (1 + frob(b))


def test_quadratic_toy_shape():
    toy = quadratic_toy()
    assert not toy.frame_indifferent
    F = np.array([[1.2, 0.1], [0.0, 0.9]])
    d = F - np.eye(2)
    assert energy_density(toy, None, F) == pytest.approx(0.5 * float(np.sum(d * d)))
    assert np.allclose(stress(toy, None, F), d)


def test_taylor_constants_quadratic_toy_vanish():
    # the quadratic toy has no cubic defect; the sampled quotient only sees
    # cancellation noise of order eps / |H|^3
    tc = taylor_constants(quadratic_toy(), n=2, delta=0.3, epsilon=0.1, nsamples=300, seed=0)
    assert tc.c <= 1e-12
    assert tc.c_hat <= 1e-12


def test_taylor_set_escape_guard():
    with pytest.raises(SetEscapesDomain):
        taylor_constants(stvk(), n=2, delta=0.7, epsilon=0.3)


def test_taylor_constants_stvk_sane():
    tc = taylor_constants(stvk(1.0, 1.0), n=2, delta=0.2, epsilon=0.05, nsamples=800, seed=1)
    assert 0.0 < tc.c < 100.0
    assert 0.0 < tc.c_hat < 100.0
    # larger sets cannot shrink the sampled constants (same seed nesting not
    # guaranteed, so compare against a clearly smaller set)
    small = taylor_constants(stvk(1.0, 1.0), n=2, delta=0.05, epsilon=0.01, nsamples=800, seed=1)
    assert small.c <= tc.c * 1.5 + 1e-9


def test_taylor_chat_one_sided_against_third_derivative():
    # For the quartic stvk energy the second-derivative quadratic form is
    # quadratic along any segment, so every Lipschitz quotient is dominated
    # by the largest directional third derivative over the sampled set.
    m = stvk(1.0, 1.0)
    tc = taylor_constants(m, n=2, delta=0.2, epsilon=0.05, nsamples=600, seed=2)
    rng = np.random.default_rng(3)
    bound = 0.0
    h = 1e-5
    for _ in range(2000):
        F = random_gradient(rng, 2, 0.7, 1.4)
        K = rng.normal(size=(2, 2))
        K /= frob(K)
        L = rng.normal(size=(2, 2))
        L /= frob(L)
        qp = float(np.sum(K * elasticity_apply(m, None, F + h * L, K)))
        qm = float(np.sum(K * elasticity_apply(m, None, F - h * L, K)))
        bound = max(bound, abs(qp - qm) / (2 * h))
    assert tc.c_hat <= 2.0 * bound
