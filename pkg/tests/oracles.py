"""Independent oracles used to pin expected values in the test suite.

Everything here is deliberately written from scratch against the
definitions, not by calling the package, so the two sides of every
comparison share no code.
"""
import math
from math import fsum

import numpy as np


# ---------------------------------------------------------------- rotations

def rotation_grid_min_2d_enum(F, m):
    """Brute-force min of |F - R(theta)| over a uniform m-point angle grid."""
    F = np.asarray(F, dtype=float)
    a = F[0, 0] + F[1, 1]
    b = F[1, 0] - F[0, 1]
    theta = 2.0 * np.pi * np.arange(m) / m
    proj = a * np.cos(theta) + b * np.sin(theta)
    val = float(np.sum(F * F)) + 2.0 - 2.0 * float(np.max(proj))
    return math.sqrt(max(val, 0.0))


def rotation_grid_min_2d(F, m):
    """Same grid minimum as rotation_grid_min_2d_enum without the full scan.

    |F - R(theta)|^2 = |F|^2 + 2 - 2(a cos theta + b sin theta), and the
    projection is maximized over the grid at one of the two grid angles
    bracketing atan2(b, a), so only those two need evaluating.  Agreement
    with the full enumeration is asserted on a subsample wherever this is
    used.
    """
    F = np.asarray(F, dtype=float)
    a = F[0, 0] + F[1, 1]
    b = F[1, 0] - F[0, 1]
    step = 2.0 * np.pi / m
    phi = math.atan2(b, a) % (2.0 * math.pi)
    k = int(phi // step)
    best = max(
        a * math.cos(step * kk) + b * math.sin(step * kk)
        for kk in (k % m, (k + 1) % m)
    )
    val = float(np.sum(F * F)) + 2.0 - 2.0 * best
    return math.sqrt(max(val, 0.0))


def rotation_min_3d_sampled(F, rng, count):
    """One-sided 3D oracle: min |F - Q| over `count` random unit quaternions."""
    F = np.asarray(F, dtype=float)
    q = rng.normal(size=(count, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a, b, c, d = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((count, 3, 3))
    R[:, 0, 0] = a * a + b * b - c * c - d * d
    R[:, 0, 1] = 2 * (b * c - a * d)
    R[:, 0, 2] = 2 * (b * d + a * c)
    R[:, 1, 0] = 2 * (b * c + a * d)
    R[:, 1, 1] = a * a - b * b + c * c - d * d
    R[:, 1, 2] = 2 * (c * d - a * b)
    R[:, 2, 0] = 2 * (b * d - a * c)
    R[:, 2, 1] = 2 * (c * d + a * b)
    R[:, 2, 2] = a * a - b * b - c * c + d * d
    diff = R - F[None, :, :]
    return float(np.sqrt(np.einsum("kij,kij->k", diff, diff)).min())


def dist_via_svd(F):
    """Rotation distance through singular values, an independent route."""
    s = np.linalg.svd(np.asarray(F, dtype=float), compute_uv=False)
    return math.sqrt(float(np.sum((s - 1.0) ** 2)))


# ---------------------------------------------- grid maximal functions

def enumerate_cubes(mask):
    """All axis-aligned lattice cubes fully inside the mask, by direct scan.

    Yields (corner, side) with corner a tuple of lattice indices.
    """
    shape = mask.shape
    max_side = min(shape)
    for side in range(1, max_side + 1):
        ranges = [range(extent - side + 1) for extent in shape]
        corners = [()]
        for r in ranges:
            corners = [c + (i,) for c in corners for i in r]
        for corner in corners:
            window = tuple(slice(c, c + side) for c in corner)
            if mask[window].all():
                yield corner, side


def _cube_values(values, corner, side):
    window = tuple(slice(c, c + side) for c in corner)
    return values[window].reshape(-1)


def hl_maximal_bruteforce(mask, values):
    """Hardy-Littlewood maximal field by double loop over cells and cubes."""
    out = np.full(mask.shape, np.nan)
    for corner, side in enumerate_cubes(mask):
        cells = _cube_values(values, corner, side)
        avg = fsum(abs(float(v)) for v in cells) / cells.size
        window = tuple(slice(c, c + side) for c in corner)
        block = out[window]
        np.copyto(block, avg, where=np.isnan(block) | (block < avg))
    return out


def fs_sharp_bruteforce(mask, values):
    """Sharp maximal field (mean oscillation sup) by double loop."""
    out = np.full(mask.shape, np.nan)
    for corner, side in enumerate_cubes(mask):
        cells = _cube_values(values, corner, side)
        avg = fsum(float(v) for v in cells) / cells.size
        osc = fsum(abs(float(v) - avg) for v in cells) / cells.size
        window = tuple(slice(c, c + side) for c in corner)
        block = out[window]
        np.copyto(block, osc, where=np.isnan(block) | (block < osc))
    return out


def bmo_bruteforce(mask, values):
    """BMO seminorm as the max mean oscillation over all cubes."""
    best = 0.0
    for corner, side in enumerate_cubes(mask):
        cells = _cube_values(values, corner, side)
        avg = fsum(float(v) for v in cells) / cells.size
        osc = fsum(abs(float(v) - avg) for v in cells) / cells.size
        best = max(best, osc)
    return best


def _cube_matrices(values, corner, side):
    window = tuple(slice(c, c + side) for c in corner)
    block = values[window]
    return block.reshape(-1, block.shape[-2] * block.shape[-1])


def hl_maximal_bruteforce_matrix(mask, values):
    out = np.full(mask.shape, np.nan)
    for corner, side in enumerate_cubes(mask):
        rows = _cube_matrices(values, corner, side)
        norms = [math.sqrt(fsum(float(c) * float(c) for c in row)) for row in rows]
        avg = fsum(norms) / len(norms)
        window = tuple(slice(c, c + side) for c in corner)
        block = out[window]
        np.copyto(block, avg, where=np.isnan(block) | (block < avg))
    return out


def fs_sharp_bruteforce_matrix(mask, values):
    out = np.full(mask.shape, np.nan)
    for corner, side in enumerate_cubes(mask):
        rows = _cube_matrices(values, corner, side)
        mean = [fsum(float(row[j]) for row in rows) / len(rows) for j in range(rows.shape[1])]
        devs = [
            math.sqrt(fsum((float(row[j]) - mean[j]) ** 2 for j in range(rows.shape[1])))
            for row in rows
        ]
        osc = fsum(devs) / len(devs)
        window = tuple(slice(c, c + side) for c in corner)
        block = out[window]
        np.copyto(block, osc, where=np.isnan(block) | (block < osc))
    return out


# ---------------------------------------------------- finite differences

def fd_gradient(f, x, h):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def fd_matrix_derivative(f, F, h):
    """Central-difference derivative of scalar f wrt a matrix argument."""
    F = np.asarray(F, dtype=float)
    out = np.zeros_like(F)
    for i in range(F.shape[0]):
        for j in range(F.shape[1]):
            Fp = F.copy()
            Fm = F.copy()
            Fp[i, j] += h
            Fm[i, j] -= h
            out[i, j] = (f(Fp) - f(Fm)) / (2.0 * h)
    return out
