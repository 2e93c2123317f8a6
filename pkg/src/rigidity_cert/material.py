"""Stored-energy models and their derivative checks.

A material evaluates, at a spatial point x and deformation gradient F with
det F > 0:

    energy     W(x, F)                     scalar, W(x, I) = 0
    stress     S(x, F) = dW/dF             n x n
    elasticity A(x, F) = d2W/dF2           applied to directions H

Heterogeneity enters only through a scalar parameter modulation m(x)
multiplying both moduli.  Batched entry points take stacked coordinates
(k, n) and gradients (k, n, n); an optional ctx argument is threaded
through untouched so that wrapped materials (see pushforward) can resolve
quadrature identity, and plain materials ignore it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CheckFailed, DimensionMismatch, OutsideDomain, SetEscapesDomain
from .tensor_core import frob, random_rotation

__all__ = [
    "Material",
    "StVenantKirchhoff",
    "NeoHookean",
    "CustomMaterial",
    "stvk",
    "neo_hookean",
    "quadratic_toy",
    "radial_modulation",
    "energy_density",
    "stress",
    "elasticity_apply",
    "elasticity_tensor",
    "check_constitutive",
    "ConstitutiveReport",
    "TaylorConstants",
    "taylor_constants",
    "sym_basis",
]


def _check_batch(coords, F):
    F = np.asarray(F, dtype=float)
    if F.ndim != 3 or F.shape[1] != F.shape[2] or F.shape[1] not in (2, 3):
        raise DimensionMismatch(f"expected stacked square gradients, got {F.shape}")
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (F.shape[0], F.shape[1]):
            raise DimensionMismatch(
                f"coords shape {coords.shape} does not match gradients {F.shape}"
            )
    return coords, F


class Material:
    """Base interface; concrete models fill in the batched evaluators."""

    name = "material"
    frame_indifferent = True
    has_sigma_form = False

    def __init__(self, lam, mu, modulation=None):
        self.lam = float(lam)
        self.mu = float(mu)
        self.modulation = modulation

    def _moduli(self, coords, k):
        if self.modulation is None or coords is None:
            return np.full(k, self.lam), np.full(k, self.mu)
        m = np.asarray(self.modulation(coords), dtype=float)
        return self.lam * m, self.mu * m

    # stacked evaluators, implemented by subclasses
    def energy_many(self, coords, F, ctx=None):
        raise NotImplementedError

    def stress_many(self, coords, F, ctx=None):
        raise NotImplementedError

    def elasticity_many(self, coords, F, ctx=None):
        """Stacked fourth-order tensors A[i, a, j, b] = dS_ia / dF_jb."""
        raise NotImplementedError

    # optional representation through sigma(C) with S = 2 F Dsigma(C)
    def dsigma_many(self, coords, C, ctx=None):
        raise NotImplementedError

    def d2sigma_apply_many(self, coords, C, B, ctx=None):
        raise NotImplementedError

    def descriptor(self) -> dict:
        d = {"model": self.name, "lambda": self.lam, "mu": self.mu}
        if self.modulation is not None:
            d["modulation"] = getattr(self.modulation, "descriptor", "custom")
        return d


class StVenantKirchhoff(Material):
    """W = lam/2 (tr E)^2 + mu E:E with E = (F^T F - I)/2."""

    name = "stvk"
    has_sigma_form = True

    def energy_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        n = F.shape[1]
        E = 0.5 * (np.einsum("kji,kjl->kil", F, F) - np.eye(n))
        trE = np.trace(E, axis1=1, axis2=2)
        return 0.5 * lam * trE**2 + mu * np.einsum("kij,kij->k", E, E)

    def stress_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        n = F.shape[1]
        E = 0.5 * (np.einsum("kji,kjl->kil", F, F) - np.eye(n))
        trE = np.trace(E, axis1=1, axis2=2)
        inner = lam[:, None, None] * trE[:, None, None] * np.eye(n) + 2.0 * mu[:, None, None] * E
        return np.einsum("kip,kpa->kia", F, inner)

    def elasticity_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        n = F.shape[1]
        eye = np.eye(n)
        E = 0.5 * (np.einsum("kji,kjl->kil", F, F) - eye)
        trE = np.trace(E, axis1=1, axis2=2)
        inner = lam[:, None, None] * trE[:, None, None] * eye + 2.0 * mu[:, None, None] * E
        B = np.einsum("kip,kjp->kij", F, F)  # F F^T
        A = np.einsum("ij,kba->kiajb", eye, inner)
        A = A + lam[:, None, None, None, None] * np.einsum("kia,kjb->kiajb", F, F)
        A = A + mu[:, None, None, None, None] * (
            np.einsum("kib,kja->kiajb", F, F) + np.einsum("ab,kij->kiajb", eye, B)
        )
        return A

    def dsigma_many(self, coords, C, ctx=None):
        coords, C = _check_batch(coords, C)
        lam, mu = self._moduli(coords, C.shape[0])
        n = C.shape[1]
        trC = np.trace(C, axis1=1, axis2=2)
        return (
            0.25 * lam[:, None, None] * (trC - n)[:, None, None] * np.eye(n)
            + 0.5 * mu[:, None, None] * (C - np.eye(n))
        )

    def d2sigma_apply_many(self, coords, C, B, ctx=None):
        coords, C = _check_batch(coords, C)
        lam, mu = self._moduli(coords, C.shape[0])
        trB = np.trace(B, axis1=1, axis2=2)
        return 0.25 * lam[:, None, None] * trB[:, None, None] * np.eye(C.shape[1]) + 0.5 * mu[
            :, None, None
        ] * B


class NeoHookean(Material):
    """W = mu/2 (tr C - n) - mu log J + lam/2 (log J)^2, J = det F."""

    name = "neo-hookean"
    has_sigma_form = True

    @staticmethod
    def _logdet(F):
        J = np.linalg.det(F)
        if np.any(J <= 0.0):
            raise OutsideDomain("neo-hookean: det F <= 0 at an evaluation point")
        return J, np.log(J)

    def energy_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        n = F.shape[1]
        _, logJ = self._logdet(F)
        trC = np.einsum("kij,kij->k", F, F)
        return 0.5 * mu * (trC - n) - mu * logJ + 0.5 * lam * logJ**2

    def stress_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        _, logJ = self._logdet(F)
        Fit = np.transpose(np.linalg.inv(F), (0, 2, 1))
        return mu[:, None, None] * (F - Fit) + (lam * logJ)[:, None, None] * Fit

    def elasticity_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        lam, mu = self._moduli(coords, F.shape[0])
        n = F.shape[1]
        _, logJ = self._logdet(F)
        Fit = np.transpose(np.linalg.inv(F), (0, 2, 1))
        eye = np.eye(n)
        A = np.einsum("ij,ab,k->kiajb", eye, eye, mu)
        A = A + (mu - lam * logJ)[:, None, None, None, None] * np.einsum(
            "kib,kja->kiajb", Fit, Fit
        )
        A = A + lam[:, None, None, None, None] * np.einsum("kia,kjb->kiajb", Fit, Fit)
        return A

    def dsigma_many(self, coords, C, ctx=None):
        coords, C = _check_batch(coords, C)
        lam, mu = self._moduli(coords, C.shape[0])
        detC = np.linalg.det(C)
        if np.any(detC <= 0.0):
            raise OutsideDomain("neo-hookean: det C <= 0")
        Cinv = np.linalg.inv(C)
        n = C.shape[1]
        return 0.5 * mu[:, None, None] * (np.eye(n) - Cinv) + 0.25 * (
            lam * np.log(detC)
        )[:, None, None] * Cinv

    def d2sigma_apply_many(self, coords, C, B, ctx=None):
        coords, C = _check_batch(coords, C)
        lam, mu = self._moduli(coords, C.shape[0])
        detC = np.linalg.det(C)
        Cinv = np.linalg.inv(C)
        CBC = np.einsum("kip,kpq,kqj->kij", Cinv, B, Cinv)
        trCB = np.einsum("kpq,kqp->k", Cinv, B)
        return (
            0.5 * mu[:, None, None] * CBC
            + 0.25 * lam[:, None, None] * (trCB[:, None, None] * Cinv - np.log(detC)[:, None, None] * CBC)
        )


class CustomMaterial(Material):
    """User-supplied energy with optional closed-form derivatives.

    Missing derivatives fall back to central differences with step
    h = 1e-6 (1 + |F|).
    """

    has_sigma_form = False

    def __init__(self, name, energy_fn, stress_fn=None, elasticity_fn=None,
                 frame_indifferent=False, lam=0.0, mu=0.0, modulation=None):
        super().__init__(lam, mu, modulation)
        self.name = name
        self._energy_fn = energy_fn
        self._stress_fn = stress_fn
        self._elasticity_fn = elasticity_fn
        self.frame_indifferent = frame_indifferent

    def energy_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        xs = coords if coords is not None else [None] * F.shape[0]
        return np.array([self._energy_fn(x, f) for x, f in zip(xs, F)])

    def _fd_stress(self, x, F):
        h = 1e-6 * (1.0 + frob(F))
        out = np.zeros_like(F)
        for i in range(F.shape[0]):
            for j in range(F.shape[1]):
                Fp, Fm = F.copy(), F.copy()
                Fp[i, j] += h
                Fm[i, j] -= h
                out[i, j] = (self._energy_fn(x, Fp) - self._energy_fn(x, Fm)) / (2 * h)
        return out

    def stress_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        xs = coords if coords is not None else [None] * F.shape[0]
        fn = self._stress_fn or self._fd_stress
        return np.array([fn(x, f) for x, f in zip(xs, F)])

    def _fd_elasticity(self, x, F):
        n = F.shape[0]
        h = 1e-6 * (1.0 + frob(F))
        stress_fn = self._stress_fn or self._fd_stress
        A = np.zeros((n, n, n, n))
        for j in range(n):
            for b in range(n):
                Fp, Fm = F.copy(), F.copy()
                Fp[j, b] += h
                Fm[j, b] -= h
                A[:, :, j, b] = (stress_fn(x, Fp) - stress_fn(x, Fm)) / (2 * h)
        return A

    def elasticity_many(self, coords, F, ctx=None):
        coords, F = _check_batch(coords, F)
        xs = coords if coords is not None else [None] * F.shape[0]
        fn = self._elasticity_fn or self._fd_elasticity
        return np.array([fn(x, f) for x, f in zip(xs, F)])


def stvk(lam=1.0, mu=1.0, modulation=None) -> StVenantKirchhoff:
    return StVenantKirchhoff(lam, mu, modulation)


def neo_hookean(lam=1.0, mu=1.0, modulation=None) -> NeoHookean:
    return NeoHookean(lam, mu, modulation)


def quadratic_toy() -> CustomMaterial:
    """W = |F - I|^2 / 2.  Not frame indifferent; useful because its cubic
    Taylor remainder vanishes identically."""

    def energy(x, F):
        d = F - np.eye(F.shape[0])
        return 0.5 * float(np.sum(d * d))

    def stress_fn(x, F):
        return F - np.eye(F.shape[0])

    def elasticity_fn(x, F):
        n = F.shape[0]
        return np.einsum("ij,ab->iajb", np.eye(n), np.eye(n))

    return CustomMaterial("quadratic-toy", energy, stress_fn, elasticity_fn)


def radial_modulation(amplitude, center, width):
    """Smooth bump m(x) = 1 + amplitude exp(-|x - center|^2 / width^2)."""
    if amplitude <= -1.0:
        raise CheckFailed("radial_modulation: amplitude must exceed -1 to keep moduli positive")
    if width <= 0.0:
        raise CheckFailed("radial_modulation: width must be positive")
    center = np.asarray(center, dtype=float)

    def m(coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        d2 = np.sum((coords - center) ** 2, axis=1)
        return 1.0 + amplitude * np.exp(-d2 / width**2)

    m.descriptor = {"kind": "radial", "amplitude": amplitude,
                    "center": [float(c) for c in center], "width": float(width)}
    return m


# ------------------------------------------------------------ scalar wrappers

def _prep_point(m, x, F):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] not in (2, 3):
        raise DimensionMismatch(f"expected a 2x2 or 3x3 gradient, got shape {F.shape}")
    if np.linalg.det(F) <= 0.0:
        raise OutsideDomain(f"det F = {np.linalg.det(F):g} <= 0")
    x = np.zeros(F.shape[0]) if x is None else np.asarray(x, dtype=float)
    return x[None, :], F[None, :, :]


def energy_density(m: Material, x, F) -> float:
    coords, Fb = _prep_point(m, x, F)
    return float(m.energy_many(coords, Fb)[0])


def stress(m: Material, x, F) -> np.ndarray:
    coords, Fb = _prep_point(m, x, F)
    return m.stress_many(coords, Fb)[0]


def elasticity_tensor(m: Material, x, F) -> np.ndarray:
    coords, Fb = _prep_point(m, x, F)
    return m.elasticity_many(coords, Fb)[0]


def elasticity_apply(m: Material, x, F, H) -> np.ndarray:
    A = elasticity_tensor(m, x, F)
    return np.einsum("iajb,jb->ia", A, np.asarray(H, dtype=float))


# ------------------------------------------------------------- self checks

def sym_basis(n):
    """Frobenius-orthonormal basis of symmetric n x n matrices."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            basis.append(e)
    return basis


def _skew_basis(n):
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = 1.0 / math.sqrt(2.0)
            e[j, i] = -e[i, j]
            basis.append(e)
    return basis


@dataclass(frozen=True)
class ConstitutiveReport:
    frame_indifference_err: float
    sigma_stress_err: float
    sigma_split_err: float
    stress_free_err: float
    shear_floor: float           # best c with A(I)[H]:H >= c |H + H^T|^2
    sigma_floor: float           # best c with B:D2sigma(I)[B] >= c |B|^2
    skew_annihilation_err: float
    x_variation: float

    def require(self, tol_fi=1e-12, tol_free=1e-10):
        if self.frame_indifference_err > tol_fi:
            raise CheckFailed(
                f"frame indifference violated: {self.frame_indifference_err:.3e}"
            )
        if self.stress_free_err > tol_free:
            raise CheckFailed(f"reference not stress free: {self.stress_free_err:.3e}")
        if self.shear_floor <= 0.0:
            raise CheckFailed(f"elasticity at I not uniformly positive: c = {self.shear_floor:.3e}")
        return self


def _positivity_floors(m, n, coords_one, rng):
    """Exact symmetric-space eigenvalue plus a random cross-check."""
    I = np.eye(n)[None]
    A = m.elasticity_many(coords_one, I)[0]
    basis = sym_basis(n)
    Q = np.array([[np.sum(bi * np.einsum("iajb,jb->ia", A, bj)) for bj in basis] for bi in basis])
    c_sym = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min()) / 4.0
    floor = c_sym
    for _ in range(200):
        H = rng.normal(size=(n, n))
        HS = H + H.T
        den = float(np.sum(HS * HS))
        if den < 1e-12:
            continue
        num = float(np.sum(H * np.einsum("iajb,jb->ia", A, H)))
        floor = min(floor, num / den)
    skew_err = max(
        frob(np.einsum("iajb,jb->ia", A, K)) for K in _skew_basis(n)
    )
    return floor, c_sym, skew_err


def check_constitutive(m: Material, n=2, nsamples=50, seed=0) -> ConstitutiveReport:
    """Spot check the structural constitutive properties on random states.

    Covers frame indifference of W, the stress and elasticity split through
    sigma(C) (closed form when the model has one, finite differences
    otherwise), the stress-free reference, and the positivity floors of the
    elasticity at the identity.
    """
    rng = np.random.default_rng(seed)
    coords_one = np.zeros((1, n))
    fi_err = 0.0
    sig_s_err = 0.0
    sig_a_err = 0.0

    for _ in range(nsamples):
        s = rng.uniform(0.4, 2.2, size=n)
        F = random_rotation(rng, n) @ np.diag(s) @ random_rotation(rng, n)
        W = float(m.energy_many(coords_one, F[None])[0])
        if m.frame_indifferent:
            Q = random_rotation(rng, n)
            WQ = float(m.energy_many(coords_one, (Q @ F)[None])[0])
            fi_err = max(fi_err, abs(WQ - W) / (1.0 + abs(W)))
        S = m.stress_many(coords_one, F[None])[0]
        H = rng.normal(size=(n, n))
        A_H = np.einsum("iajb,jb->ia", m.elasticity_many(coords_one, F[None])[0], H)
        C = F.T @ F
        B = H.T @ F + F.T @ H
        if m.has_sigma_form:
            Ds = m.dsigma_many(coords_one, C[None])[0]
            D2B = m.d2sigma_apply_many(coords_one, C[None], B[None])[0]
        else:
            h = 1e-6 * (1.0 + frob(C))

            def sigma(Cm):
                ww, VV = np.linalg.eigh(0.5 * (Cm + Cm.T))
                U = (VV * np.sqrt(np.clip(ww, 1e-12, None))) @ VV.T
                return float(m.energy_many(coords_one, U[None])[0])

            Ds = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    Cp, Cm_ = C.copy(), C.copy()
                    Cp[i, j] += h
                    Cm_[i, j] -= h
                    Ds[i, j] = (sigma(Cp) - sigma(Cm_)) / (2 * h)
            Ds = 0.5 * (Ds + Ds.T)
            D2B = None
        scale = 1.0 + frob(S)
        sig_s_err = max(sig_s_err, frob(S - 2.0 * F @ Ds) / scale)
        if D2B is not None:
            lhs = float(np.sum(H * A_H))
            rhs = float(np.sum(B * D2B)) + 2.0 * float(np.sum(Ds * (H.T @ H)))
            sig_a_err = max(sig_a_err, abs(lhs - rhs) / (1.0 + abs(lhs)))

    I = np.eye(n)
    free_err = frob(m.stress_many(coords_one, I[None])[0])
    floor, c_sym, skew_err = _positivity_floors(m, n, coords_one, rng)

    # sigma-level floor: with a stress-free reference the elasticity at I
    # restricted to symmetric directions is 4 D2sigma(I), so the two floors
    # coincide; use the closed form when present as a cross-check
    if m.has_sigma_form:
        basis = sym_basis(n)
        Qs = np.array(
            [
                [
                    float(np.sum(bi * m.d2sigma_apply_many(coords_one, I[None], bj[None])[0]))
                    for bj in basis
                ]
                for bi in basis
            ]
        )
        sigma_floor = float(np.linalg.eigvalsh(0.5 * (Qs + Qs.T)).min())
    else:
        sigma_floor = c_sym

    # spatial continuity spot check for modulated parameters
    x_var = 0.0
    if m.modulation is not None:
        F = np.eye(n) * 1.1
        pts = rng.uniform(-1.0, 2.0, size=(20, n))
        for x0 in pts:
            x1 = x0 + 1e-4 * rng.normal(size=n)
            w0 = float(m.energy_many(x0[None], F[None])[0])
            w1 = float(m.energy_many(x1[None], F[None])[0])
            x_var = max(x_var, abs(w1 - w0) / (np.linalg.norm(x1 - x0) + 1e-300))

    return ConstitutiveReport(
        frame_indifference_err=fi_err,
        sigma_stress_err=sig_s_err,
        sigma_split_err=sig_a_err,
        stress_free_err=free_err,
        shear_floor=floor,
        sigma_floor=sigma_floor,
        skew_annihilation_err=skew_err,
        x_variation=x_var,
    )


# --------------------------------------------------------- Taylor constants

@dataclass(frozen=True)
class TaylorConstants:
    """Sampled cubic-remainder and Lipschitz constants on a rotation
    neighborhood of radius delta, fattened in norm by epsilon."""

    c: float
    c_hat: float
    delta: float
    epsilon: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.c < 0 or self.c_hat < 0:
            raise CheckFailed("Taylor constants must be nonnegative")


def _sample_near_rotations(rng, n, delta):
    """Point of {dist(F, SO(n)) <= delta}: rotation times (I + small sym)."""
    S = rng.normal(size=(n, n))
    S = 0.5 * (S + S.T)
    norm = frob(S)
    if norm > 0:
        S *= rng.uniform(0.0, delta) / norm
    return random_rotation(rng, n) @ (np.eye(n) + S)


def taylor_constants(m: Material, n=2, delta=0.2, epsilon=0.05,
                     nsamples=400, seed=0, coords=None) -> TaylorConstants:
    """Sample the two Appendix-style constants over the fattened set.

    c bounds the cubic Taylor defect of W around points of the rotation
    neighborhood; c_hat is a Lipschitz constant for the second derivative.
    delta + epsilon < 1 keeps the whole fattened set inside det F > 0.
    Both are empirical suprema over a seeded sample and are reported with
    the sample size.
    """
    if not delta + epsilon < 1.0:
        raise SetEscapesDomain(
            f"delta + epsilon = {delta + epsilon:g} >= 1 allows det F <= 0"
        )
    rng = np.random.default_rng(seed)
    if coords is None:
        coords = [np.zeros(n)]
    coords = [np.asarray(x, dtype=float) for x in coords]

    c_best = 0.0
    chat_best = 0.0
    floor = 1e-3  # below this |H| the cubic quotient drowns in roundoff
    for _ in range(nsamples):
        x = coords[rng.integers(len(coords))][None, :]
        F = _sample_near_rotations(rng, n, delta)
        G = _sample_near_rotations(rng, n, delta)
        E = rng.normal(size=(n, n))
        if frob(E) > 0:
            E *= rng.uniform(0.0, epsilon) / frob(E)
        G = G + E
        H = G - F
        hn = frob(H)
        if hn >= floor:
            WF = float(m.energy_many(x, F[None])[0])
            WG = float(m.energy_many(x, G[None])[0])
            S = m.stress_many(x, F[None])[0]
            A_H = np.einsum("iajb,jb->ia", m.elasticity_many(x, F[None])[0], H)
            defect = WF - WG + float(np.sum(S * H)) + 0.5 * float(np.sum(H * A_H))
            c_best = max(c_best, defect / hn**3)
        # Lipschitz quotient of the second derivative, both orders
        K = rng.normal(size=(n, n))
        K /= frob(K)
        if hn > 1e-10:
            qF = float(np.sum(K * np.einsum("iajb,jb->ia", m.elasticity_many(x, F[None])[0], K)))
            qG = float(np.sum(K * np.einsum("iajb,jb->ia", m.elasticity_many(x, G[None])[0], K)))
            chat_best = max(chat_best, abs(qF - qG) / hn)
    return TaylorConstants(c=c_best, c_hat=chat_best, delta=delta,
                           epsilon=epsilon, samples=nsamples, seed=seed)
