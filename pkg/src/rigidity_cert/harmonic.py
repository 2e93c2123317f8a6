"""Discrete maximal functions and BMO measurements on lattice cell fields.

A field lives on an axis-aligned lattice domain: a boolean mask selects
which cells belong to the body, and each cell carries one sample (scalar
or square matrix).  Integrals are cell sums, so every average below is an
honest finite average and the cube suprema are exact maxima.

All cube aggregations go through math.fsum, which returns the correctly
rounded sum regardless of iteration order.  That makes every statistic
reproducible bit for bit and lets independent re-implementations agree
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import fsum
from pathlib import Path

import numpy as np

from .errors import BadExponents, DegenerateFamily, DimensionMismatch, EmptyDomain

__all__ = [
    "GridField",
    "CubeFamily",
    "cube_family",
    "hl_maximal",
    "fs_sharp",
    "bmo_seminorm",
    "bmo_l1_norm",
    "domain_mean",
    "lp_mean_norm",
    "verify_pointwise_bounds",
    "PointwiseBoundsReport",
    "fit_local_fs_constant",
    "fit_interpolation_constant",
    "fit_hl_constant",
    "verify_interpolation",
    "rh_exponents",
    "interpolation_exponent",
    "write_grid_field",
    "read_grid_field",
]

_REL_SLACK = 1e-12


@dataclass(frozen=True)
class GridField:
    """One sample per lattice cell over a masked axis-aligned domain.

    values has shape mask.shape for scalar fields or mask.shape + (k, k)
    with k in {2, 3} for matrix fields.  Entries outside the mask are
    normalized to zero.  spacing and origin carry physical placement and
    never enter averages, which keeps every measurement scale invariant.
    """

    mask: np.ndarray
    values: np.ndarray
    spacing: float = 1.0
    origin: tuple = ()

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim not in (2, 3):
            raise DimensionMismatch(f"GridField: mask must be 2D or 3D, got {mask.ndim}D")
        if not mask.any():
            raise EmptyDomain("GridField: mask selects no cells")
        values = np.asarray(self.values, dtype=float)
        if values.shape == mask.shape:
            pass
        elif (
            values.ndim == mask.ndim + 2
            and values.shape[: mask.ndim] == mask.shape
            and values.shape[-1] == values.shape[-2]
            and values.shape[-1] in (2, 3)
        ):
            pass
        else:
            raise DimensionMismatch(
                f"GridField: values shape {values.shape} does not fit mask {mask.shape}"
            )
        if not np.all(np.isfinite(values[mask])):
            raise DimensionMismatch("GridField: non-finite sample inside the domain")
        values = values.copy()
        values[~mask] = 0.0
        origin = tuple(self.origin) if self.origin else (0.0,) * mask.ndim
        if len(origin) != mask.ndim:
            raise DimensionMismatch("GridField: origin length does not match mask rank")
        if not self.spacing > 0:
            raise DimensionMismatch("GridField: spacing must be positive")
        mask.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", origin)

    @property
    def ndim(self) -> int:
        return self.mask.ndim

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == self.mask.ndim + 2

    @property
    def ncells(self) -> int:
        return int(self.mask.sum())

    def with_values(self, values) -> "GridField":
        return GridField(self.mask, values, self.spacing, self.origin)

    def cell_norms(self) -> np.ndarray:
        """Per-cell |sample|: abs for scalars, Frobenius for matrices.

        Matrix norms use sqrt of an fsum of squares so they are exactly
        rounded and reproducible.
        """
        if not self.is_matrix:
            return np.abs(self.values)
        out = np.zeros(self.mask.shape)
        flat = self.values.reshape(self.mask.shape + (-1,))
        for idx in np.argwhere(self.mask):
            comps = flat[tuple(idx)]
            out[tuple(idx)] = math.sqrt(fsum(float(c) * float(c) for c in comps))
        return out


@dataclass(frozen=True)
class CubeFamily:
    """Every axis-aligned lattice cube contained in a domain.

    cubes is a tuple of (corner, side) pairs, sides ascending and corners
    in row-major order within each side, so iteration order is canonical.
    """

    shape: tuple
    cubes: tuple = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.cubes)

    @property
    def max_side(self) -> int:
        return max((s for _, s in self.cubes), default=0)

    def manifest(self) -> dict:
        return {
            "shape": list(self.shape),
            "count": self.count,
            "max_side": self.max_side,
        }


def _window(corner, side):
    return tuple(slice(c, c + side) for c in corner)


def cube_family(fld: GridField) -> CubeFamily:
    """Enumerate all lattice cubes fully inside the domain mask."""
    mask = fld.mask
    cubes = []
    for side in range(1, min(mask.shape) + 1):
        windows = np.lib.stride_tricks.sliding_window_view(mask, (side,) * mask.ndim)
        inside = windows.all(axis=tuple(range(-mask.ndim, 0)))
        for corner in np.argwhere(inside):
            cubes.append((tuple(int(c) for c in corner), side))
    if not cubes:
        raise EmptyDomain("cube_family: no cube fits in the domain")
    return CubeFamily(shape=mask.shape, cubes=tuple(cubes))


def _component_views(fld: GridField):
    """List of scalar component arrays (one for scalar fields)."""
    if not fld.is_matrix:
        return [fld.values]
    flat = fld.values.reshape(fld.mask.shape + (-1,))
    return [flat[..., i] for i in range(flat.shape[-1])]


def _cube_mean(components, corner, side):
    """Componentwise cube average, exactly rounded per component."""
    w = _window(corner, side)
    return [fsum(comp[w].ravel()) / comp[w].size for comp in components]


def _cube_oscillation(components, corner, side, mean):
    """Average Frobenius deviation from the cube mean, exactly rounded."""
    w = _window(corner, side)
    blocks = [comp[w].ravel() for comp in components]
    count = blocks[0].size
    if len(blocks) == 1:
        return fsum(abs(v - mean[0]) for v in blocks[0]) / count
    devs = []
    for k in range(count):
        devs.append(math.sqrt(fsum((b[k] - m) * (b[k] - m) for b, m in zip(blocks, mean))))
    return fsum(devs) / count


def hl_maximal(fld: GridField, family: CubeFamily | None = None) -> GridField:
    """Hardy-Littlewood maximal field: sup over containing cubes of the
    cube average of |sample|."""
    family = family or cube_family(fld)
    norms = fld.cell_norms()
    out = np.zeros(fld.mask.shape)
    for corner, side in family.cubes:
        w = _window(corner, side)
        avg = fsum(norms[w].ravel()) / norms[w].size
        np.maximum(out[w], avg, out=out[w])
    return GridField(fld.mask, out, fld.spacing, fld.origin)


def fs_sharp(fld: GridField, family: CubeFamily | None = None) -> GridField:
    """Sharp maximal field: sup over containing cubes of the mean
    oscillation about the cube average."""
    family = family or cube_family(fld)
    components = _component_views(fld)
    out = np.zeros(fld.mask.shape)
    for corner, side in family.cubes:
        mean = _cube_mean(components, corner, side)
        osc = _cube_oscillation(components, corner, side, mean)
        w = _window(corner, side)
        np.maximum(out[w], osc, out=out[w])
    return GridField(fld.mask, out, fld.spacing, fld.origin)


def bmo_seminorm(fld: GridField, family: CubeFamily | None = None) -> float:
    """Largest mean oscillation over the cube family.

    Identical by construction to the max cell of fs_sharp: both reduce the
    same per-cube oscillations with exact max operations.
    """
    family = family or cube_family(fld)
    components = _component_views(fld)
    best = 0.0
    for corner, side in family.cubes:
        mean = _cube_mean(components, corner, side)
        best = max(best, _cube_oscillation(components, corner, side, mean))
    return best


def domain_mean(fld: GridField):
    """Componentwise average over the domain cells."""
    cells = np.argwhere(fld.mask)
    components = _component_views(fld)
    means = [fsum(comp[tuple(idx)] for idx in cells) / len(cells) for comp in components]
    if not fld.is_matrix:
        return means[0]
    n = fld.values.shape[-1]
    return np.array(means).reshape(n, n)


def bmo_l1_norm(fld: GridField, family: CubeFamily | None = None) -> float:
    """BMO seminorm plus the norm of the domain average."""
    m = domain_mean(fld)
    size = abs(m) if np.isscalar(m) else math.sqrt(fsum((m * m).ravel()))
    return bmo_seminorm(fld, family) + size


def lp_mean_norm(fld: GridField, p: float) -> float:
    """(average of |sample|^p over the domain)^(1/p)."""
    if not p >= 1:
        raise BadExponents(f"lp_mean_norm: p must be >= 1, got {p}")
    norms = fld.cell_norms()
    cells = np.argwhere(fld.mask)
    total = fsum(norms[tuple(idx)] ** p for idx in cells)
    return (total / len(cells)) ** (1.0 / p)


@dataclass(frozen=True)
class PointwiseBoundsReport:
    max_value_minus_star: float
    max_sharp_minus_twice_star: float

    @property
    def ok(self) -> bool:
        return self.max_value_minus_star <= 0.0 and self.max_sharp_minus_twice_star <= 0.0


def verify_pointwise_bounds(fld: GridField, family: CubeFamily | None = None) -> PointwiseBoundsReport:
    """Check |psi| <= psi* and psi# <= 2 psi* cell by cell.

    Both are exact discrete facts (each cell is itself a cube of the
    family), so the reported worst gaps should never be positive.
    """
    family = family or cube_family(fld)
    star = hl_maximal(fld, family).values
    sharp = fs_sharp(fld, family).values
    norms = fld.cell_norms()
    m = fld.mask
    return PointwiseBoundsReport(
        max_value_minus_star=float((norms[m] - star[m]).max()),
        max_sharp_minus_twice_star=float((sharp[m] - 2.0 * star[m]).max()),
    )


def fit_local_fs_constant(fields, q: float) -> float:
    """Empirical constant for the local sharp-function inequality.

    Returns the largest ratio of avg|psi|^q against
    avg(psi#)^q + |avg psi|^q over the family.  Fields that vanish
    identically carry no information; if every field does, the family is
    degenerate.
    """
    if not q > 1:
        raise BadExponents(f"fit_local_fs_constant: q must be > 1, got {q}")
    best = None
    for fld in fields:
        lhs = lp_mean_norm(fld, q) ** q
        sharp = fs_sharp(fld)
        m = domain_mean(fld)
        size = abs(m) if np.isscalar(m) else math.sqrt(fsum((m * m).ravel()))
        rhs = lp_mean_norm(sharp, q) ** q + size ** q
        if rhs == 0.0:
            if lhs == 0.0:
                continue
            return math.inf
        best = max(best if best is not None else 0.0, lhs / rhs)
    if best is None:
        raise DegenerateFamily("fit_local_fs_constant: every field vanishes")
    return best


def rh_exponents(p: float, q: float) -> tuple[Fraction, Fraction]:
    """Exact exponent pair (1 - p/q, p/q) for the reverse-Hoelder form."""
    if not (1 <= p < q):
        raise BadExponents(f"rh_exponents: need 1 <= p < q, got p={p}, q={q}")
    r = Fraction(p) / Fraction(q)
    return (1 - r, r)


def interpolation_exponent(p: float, q: float) -> Fraction:
    """theta with 1/p = theta + (1 - theta)/q, exact."""
    if not (1 <= p < q):
        raise BadExponents(f"interpolation_exponent: need 1 <= p < q, got p={p}, q={q}")
    pf, qf = Fraction(p), Fraction(q)
    return (1 / pf - 1 / qf) / (1 - 1 / qf)


def _rh_sides(fld: GridField, p: float, q: float, J2: float):
    ex_bmo, ex_p = rh_exponents(p, q)
    lhs = lp_mean_norm(fld, q)
    rhs = J2 * bmo_l1_norm(fld) ** float(ex_bmo) * lp_mean_norm(fld, p) ** float(ex_p)
    return lhs, rhs


def fit_interpolation_constant(fields, p: float, q: float) -> float:
    """Empirical constant J2 for ||psi||_q <= J2 ||psi||_{BMO+L1}^(1-p/q) ||psi||_p^(p/q).

    Norms are domain averages, which makes the fit scale invariant and
    lets the same J2 serve any cell size.
    """
    best = None
    for fld in fields:
        lhs, rhs_unit = _rh_sides(fld, p, q, 1.0)
        if rhs_unit == 0.0:
            if lhs == 0.0:
                continue
            return math.inf
        best = max(best if best is not None else 0.0, lhs / rhs_unit)
    if best is None:
        raise DegenerateFamily("fit_interpolation_constant: every field vanishes")
    return best


def fit_hl_constant(fields, p: float) -> float:
    """Empirical bound for ||psi*||_p / ||psi||_p over a family."""
    if not p > 1:
        raise BadExponents(f"fit_hl_constant: p must be > 1, got {p}")
    best = None
    for fld in fields:
        den = lp_mean_norm(fld, p)
        num = lp_mean_norm(hl_maximal(fld), p)
        if den == 0.0:
            if num == 0.0:
                continue
            return math.inf
        best = max(best if best is not None else 0.0, num / den)
    if best is None:
        raise DegenerateFamily("fit_hl_constant: every field vanishes")
    return best


def verify_interpolation(fld: GridField, p: float, q: float, J2: float) -> bool:
    """Check the reverse-Hoelder bound with the supplied J2 and the
    parameter-free interpolation bound ||psi||_p <= ||psi||_1^theta ||psi||_q^(1-theta).

    A hair of relative slack absorbs roundoff in the equality cases
    (constant fields give equality in both bounds).
    """
    if not (1 <= p < q):
        raise BadExponents(f"verify_interpolation: need 1 <= p < q, got p={p}, q={q}")
    lhs, rhs = _rh_sides(fld, p, q, J2)
    if lhs > rhs * (1.0 + _REL_SLACK):
        return False
    theta = float(interpolation_exponent(p, q))
    lhs2 = lp_mean_norm(fld, p)
    rhs2 = lp_mean_norm(fld, 1.0) ** theta * lp_mean_norm(fld, q) ** (1.0 - theta)
    return lhs2 <= rhs2 * (1.0 + _REL_SLACK)


# ------------------------------------------------------------------ file io

_FORMAT_TAG = "gridfield 1"


def write_grid_field(fld: GridField, path) -> None:
    """Plain-text dump with exact decimal round trip (shortest repr)."""
    lines = [_FORMAT_TAG]
    lines.append("dims " + " ".join(str(s) for s in fld.mask.shape))
    lines.append("spacing " + repr(float(fld.spacing)))
    lines.append("origin " + " ".join(repr(float(c)) for c in fld.origin))
    if fld.is_matrix:
        lines.append(f"kind matrix {fld.values.shape[-1]}")
    else:
        lines.append("kind scalar")
    cells = np.argwhere(fld.mask)
    lines.append(f"cells {len(cells)}")
    flat = fld.values.reshape(fld.mask.shape + (-1,)) if fld.is_matrix else fld.values[..., None]
    for idx in cells:
        comps = flat[tuple(idx)]
        lines.append(
            " ".join(str(int(i)) for i in idx) + " " + " ".join(repr(float(v)) for v in comps)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_field(path) -> GridField:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != _FORMAT_TAG:
        raise DimensionMismatch(f"read_grid_field: {path} is not a grid field file")
    header = {}
    row = 1
    while row < len(text):
        key, _, rest = text[row].partition(" ")
        header[key] = rest.strip()
        row += 1
        if key == "cells":
            break
    dims = tuple(int(t) for t in header["dims"].split())
    spacing = float(header["spacing"])
    origin = tuple(float(t) for t in header["origin"].split())
    kind = header["kind"].split()
    ncomp = 1 if kind[0] == "scalar" else int(kind[1]) ** 2
    count = int(header["cells"])
    mask = np.zeros(dims, dtype=bool)
    shape = dims if ncomp == 1 else dims + (int(kind[1]), int(kind[1]))
    values = np.zeros(shape)
    flat = values.reshape(dims + (-1,))
    for line in text[row : row + count]:
        toks = line.split()
        idx = tuple(int(t) for t in toks[: len(dims)])
        mask[idx] = True
        flat[idx] = [float(t) for t in toks[len(dims) :]]
    return GridField(mask, values, spacing, origin)
