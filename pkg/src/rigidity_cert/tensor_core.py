"""Small dense tensor kinematics in two and three dimensions.

Everything here works on plain numpy arrays of shape (n, n) with
n in {2, 3}.  Frobenius norms throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DetNonPositive, DimensionMismatch, Singular

__all__ = [
    "PolarPair",
    "SandwichReport",
    "polar_decompose",
    "dist_to_rotations",
    "strain",
    "wedge",
    "strain_dist_sandwich",
    "frob",
    "random_rotation",
]

_SUPPORTED_DIMS = (2, 3)


def frob(A) -> float:
    """Frobenius norm of a matrix (or 2-norm of a vector)."""
    return float(np.linalg.norm(np.asarray(A, dtype=float)))


def _as_square(F, who: str) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise DimensionMismatch(f"{who}: expected a square matrix, got shape {F.shape}")
    if F.shape[0] not in _SUPPORTED_DIMS:
        raise DimensionMismatch(f"{who}: only n in {_SUPPORTED_DIMS} supported, got n={F.shape[0]}")
    if not np.all(np.isfinite(F)):
        raise DimensionMismatch(f"{who}: matrix has non-finite entries")
    return F


@dataclass(frozen=True)
class PolarPair:
    """Right polar factors F = R U with R a rotation and U symmetric positive."""

    rotation: np.ndarray
    stretch: np.ndarray


@dataclass(frozen=True)
class SandwichReport:
    """Evaluation of the two-sided bound between |E(F)| and dist(F, SO(n)).

    lower_ok:  dist^2 <= 2 sqrt(n) |E|
    upper_ok:  2 sqrt(n) |E| <= sqrt(n) dist (dist + 2 sqrt(n))
    linear_ok: dist <= 2 |E|
    """

    dist: float
    strain_norm: float
    lower_ok: bool
    upper_ok: bool
    linear_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.lower_ok and self.upper_ok and self.linear_ok


def _stretch_spectrum(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of C = F^T F; eigenvalues ascending, clipped at 0."""
    C = F.T @ F
    w, V = np.linalg.eigh(C)
    return np.clip(w, 0.0, None), V


def polar_decompose(F) -> PolarPair:
    """Right polar decomposition F = R U via the spectral square root of F^T F.

    Raises DetNonPositive when det F <= 0 and Singular when the stretch is
    too ill-conditioned to invert reliably (condition number above 1e14).
    """
    F = _as_square(F, "polar_decompose")
    det = np.linalg.det(F)
    if det <= 0.0:
        raise DetNonPositive(f"polar_decompose: det F = {det:g} <= 0")
    w, V = _stretch_spectrum(F)
    s = np.sqrt(w)
    if s[0] <= 0.0 or s[-1] / s[0] > 1e14:
        raise Singular("polar_decompose: stretch condition number exceeds 1e14")
    U = (V * s) @ V.T
    R = F @ ((V / s) @ V.T)
    # one orthogonality polish pass; the spectral route can lose a few
    # digits of R^T R = I when F is poorly conditioned
    R = R @ (1.5 * np.eye(F.shape[0]) - 0.5 * (R.T @ R))
    U = R.T @ F
    U = 0.5 * (U + U.T)
    return PolarPair(rotation=R, stretch=U)


def dist_to_rotations(F) -> float:
    """Frobenius distance from F to SO(n) for det F > 0.

    Equals |U - I| with U the right stretch, i.e. the root-sum-square of
    (singular value - 1) over the spectrum of F.
    """
    F = _as_square(F, "dist_to_rotations")
    det = np.linalg.det(F)
    if det <= 0.0:
        raise DetNonPositive(f"dist_to_rotations: det F = {det:g} <= 0")
    w, _ = _stretch_spectrum(F)
    return math.sqrt(float(np.sum((np.sqrt(w) - 1.0) ** 2)))


def strain(F) -> np.ndarray:
    """Nonlinear strain E = (F^T F - I)/2."""
    F = _as_square(F, "strain")
    return 0.5 * (F.T @ F - np.eye(F.shape[0]))


def wedge(vectors) -> np.ndarray:
    """Wedge of n-1 vectors in R^n, n in {2, 3}.

    For n = 2 a single vector is rotated a quarter turn so that
    wedge([e1]) = e2; for n = 3 this is the cross product.  The result is
    orthogonal to every argument and completes a positively oriented frame
    when the arguments are orthonormal.
    """
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if len(vs) == 1 and vs[0].shape == (2,):
        a = vs[0]
        return np.array([-a[1], a[0]])
    if len(vs) == 2 and vs[0].shape == (3,) and vs[1].shape == (3,):
        return np.cross(vs[0], vs[1])
    raise DimensionMismatch(
        "wedge: expected one 2-vector or two 3-vectors, got "
        f"{len(vs)} argument(s) with shapes {[v.shape for v in vs]}"
    )


def strain_dist_sandwich(F, rel_tol: float = 1e-10) -> SandwichReport:
    """Check the strain / rotation-distance sandwich for one gradient.

    The three inequalities are exact real-arithmetic facts; rel_tol only
    absorbs floating point noise in the equality cases.
    """
    F = _as_square(F, "strain_dist_sandwich")
    d = dist_to_rotations(F)
    e = frob(strain(F))
    n = F.shape[0]
    rn = math.sqrt(n)
    slack = rel_tol * (1.0 + d * d + e)
    lower_ok = d * d <= 2.0 * rn * e + slack
    upper_ok = 2.0 * rn * e <= rn * d * (d + 2.0 * rn) + slack
    linear_ok = d <= 2.0 * e + slack
    return SandwichReport(dist=d, strain_norm=e, lower_ok=lower_ok,
                          upper_ok=upper_ok, linear_ok=linear_ok)


def random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish random rotation; uniform angle in 2D, unit quaternion in 3D."""
    if n == 2:
        t = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(t), math.sin(t)
        return np.array([[c, -s], [s, c]])
    if n == 3:
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        a, b, c, d = q
        return np.array([
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
        ])
    raise DimensionMismatch(f"random_rotation: n must be 2 or 3, got {n}")
