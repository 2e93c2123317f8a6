"""Isoparametric Q1 finite elements for dead-load hyperelasticity.

Meshes are conforming quadrilateral (2D) or hexahedral (3D) meshes with a
two-point Gauss rule per axis.  Fields store deformation maps (not
displacements): the reference state is the identity field.

The discrete energy is

    E(u) = sum_qp w detJ [ W(x, grad u) - b . u ] - sum_facet_qp w jac s . u

and residual / tangent are its exact derivatives, assembled batched over
elements.  Dirichlet data prescribes full node vectors on the facets of
the Dirichlet part of the boundary; the free unknowns are every component
of every other node.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    BoundaryMismatch,
    DeterminantViolation,
    DimensionMismatch,
    EigenFailure,
    LineSearchStall,
    MaxIterations,
    NotEquilibrium,
    SingularTangent,
)
from .harmonic import GridField

__all__ = [
    "Mesh",
    "FeField",
    "LoadSet",
    "CellLattice",
    "SolveLog",
    "rectangle_mesh",
    "box_mesh",
    "l_shape_mesh",
    "square_ring_mesh",
    "read_mesh",
    "write_mesh",
    "deformation_gradients",
    "total_energy",
    "residual",
    "residual_field",
    "solve_equilibrium",
    "second_variation_matrix",
    "gradient_gram_matrix",
    "coercivity_constant",
    "energy_identity_check",
    "mean_gradient",
    "gradient_field",
    "l2_gradient_norm_sq",
    "facet_deformation_gradients",
]

_GP = 1.0 / math.sqrt(3.0)

_REF_CORNERS = {
    2: np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    3: np.array(
        [
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ]
    ),
}

_LOCAL_FACETS = {
    2: [(0, 1), (1, 2), (2, 3), (3, 0)],
    3: [
        (0, 3, 2, 1),
        (4, 5, 6, 7),
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ],
}


def shape_values(ref_points, dim):
    """Q1 shape functions at reference points, shape (nq, nnodes)."""
    corners = _REF_CORNERS[dim]
    pts = np.atleast_2d(ref_points)
    vals = np.ones((pts.shape[0], corners.shape[0]))
    for d in range(dim):
        vals *= 0.5 * (1.0 + corners[None, :, d] * pts[:, None, d])
    return vals


def shape_gradients(ref_points, dim):
    """Reference gradients of the Q1 shape functions, (nq, nnodes, dim)."""
    corners = _REF_CORNERS[dim]
    pts = np.atleast_2d(ref_points)
    nq, nn = pts.shape[0], corners.shape[0]
    grads = np.empty((nq, nn, dim))
    for j in range(dim):
        g = np.full((nq, nn), 0.5 * 1.0)
        g *= corners[None, :, j]
        for d in range(dim):
            if d == j:
                continue
            g *= 0.5 * (1.0 + corners[None, :, d] * pts[:, None, d])
        grads[:, :, j] = g
    return grads


def _gauss_points(dim):
    axes = [(-_GP, _GP)] * dim
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(dim, -1).T
    return pts, np.ones(len(pts))


@dataclass(frozen=True)
class CellLattice:
    """Structured bookkeeping for generated meshes: lattice cell -> element."""

    mask: np.ndarray
    elem_of_cell: np.ndarray
    spacing: float
    origin: tuple


class Mesh:
    """Conforming Q1 mesh with a Dirichlet / traction boundary partition."""

    def __init__(self, nodes, elements, dirichlet_facets, traction_facets=(), lattice=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.elements = np.asarray(elements, dtype=int)
        if self.nodes.ndim != 2 or self.nodes.shape[1] not in (2, 3):
            raise DimensionMismatch(f"nodes must be (N, 2) or (N, 3), got {self.nodes.shape}")
        self.dim = self.nodes.shape[1]
        expect = 4 if self.dim == 2 else 8
        if self.elements.ndim != 2 or self.elements.shape[1] != expect:
            raise DimensionMismatch(
                f"elements must be (M, {expect}) for dim {self.dim}, got {self.elements.shape}"
            )
        self.dirichlet_facets = tuple(tuple(int(v) for v in f) for f in dirichlet_facets)
        self.traction_facets = tuple(tuple(int(v) for v in f) for f in traction_facets)
        self.lattice = lattice
        self._qp_cache = None
        self._facet_cache = {}
        self._validate()

    # ------------------------------------------------------------- topology

    def _boundary_map(self):
        """facet key -> (element, local facet index); boundary facets only."""
        seen = {}
        for e, conn in enumerate(self.elements):
            for lf, loc in enumerate(_LOCAL_FACETS[self.dim]):
                key = frozenset(int(conn[i]) for i in loc)
                if key in seen:
                    seen[key] = None
                else:
                    seen[key] = (e, lf)
        return {k: v for k, v in seen.items() if v is not None}

    def _validate(self):
        if len(self.dirichlet_facets) == 0:
            raise ValueError("mesh needs a nonempty Dirichlet boundary part")
        boundary = self._boundary_map()
        dkeys = {frozenset(f) for f in self.dirichlet_facets}
        tkeys = {frozenset(f) for f in self.traction_facets}
        if dkeys & tkeys:
            raise ValueError("Dirichlet and traction facets overlap")
        if not dkeys <= set(boundary) or not tkeys <= set(boundary):
            raise ValueError("a listed facet is not a boundary facet")
        if dkeys | tkeys != set(boundary):
            raise ValueError("Dirichlet + traction facets must cover the boundary")
        self._facet_parent = boundary
        dn = sorted({v for f in self.dirichlet_facets for v in f})
        self.dirichlet_nodes = np.array(dn, dtype=int)
        if np.any(self.quadrature()[3] <= 0.0):
            raise ValueError("mesh has non-positive jacobians")

    # ----------------------------------------------------------- quadrature

    def quadrature(self):
        """(qp physical coords, physical shape gradients, weights, detJ, shape values).

        coords: (M, q, n), grads: (M, q, k, n), wdet: (M, q), detJ: (M, q),
        nvals: (q, k).  Cached; treat as read-only.
        """
        if self._qp_cache is None:
            pts, w = _gauss_points(self.dim)
            nvals = shape_values(pts, self.dim)
            dN = shape_gradients(pts, self.dim)
            X = self.nodes[self.elements]  # (M, k, n)
            J = np.einsum("eai,qaj->eqij", X, dN)
            detJ = np.linalg.det(J)
            invJ = np.linalg.inv(J)
            grads = np.einsum("qaj,eqji->eqai", dN, invJ)
            coords = np.einsum("qa,eai->eqi", nvals, X)
            wdet = w[None, :] * detJ
            self._qp_cache = (coords, grads, wdet, detJ, nvals)
        return self._qp_cache

    def facet_quadrature(self, facets):
        """Boundary quadrature for a facet list.

        Returns (coords, nvals, jac, normals, parents):
        coords (T, qf, n), nvals (T, qf, nnodes_facet), jac (T, qf) the area
        element, normals (T, qf, n) outward units, parents (T,) element ids.
        """
        key = tuple(facets)
        if key in self._facet_cache:
            return self._facet_cache[key]
        fdim = self.dim - 1
        if fdim == 1:
            t = np.array([[-_GP], [_GP]])
            fvals = np.column_stack([0.5 * (1 - t[:, 0]), 0.5 * (1 + t[:, 0])])
            fgrads = np.array([[-0.5, 0.5]] * 2)[:, :, None]  # (qf, 2, 1)
        else:
            t, _ = _gauss_points(2)
            fvals = shape_values(t, 2)
            fgrads = shape_gradients(t, 2)
        coords_l, jac_l, norm_l, parents = [], [], [], []
        for f in facets:
            fk = frozenset(f)
            if fk not in self._facet_parent:
                raise ValueError(f"facet {f} is not a boundary facet")
            e, _ = self._facet_parent[fk]
            parents.append(e)
            xf = self.nodes[list(f)]  # (fn, n)
            pts = fvals @ xf
            tau = np.einsum("qaj,ai->qji", fgrads, xf)  # (qf, fdim, n)
            if fdim == 1:
                tangent = tau[:, 0, :]
                nrm = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
            else:
                nrm = np.cross(tau[:, 0, :], tau[:, 1, :])
            jac = np.linalg.norm(nrm, axis=1)
            if np.any(jac <= 0):
                raise ValueError(f"degenerate facet {f}")
            nhat = nrm / jac[:, None]
            centroid = self.nodes[self.elements[e]].mean(axis=0)
            if np.dot(nhat[0], pts[0] - centroid) < 0.0:
                nhat = -nhat
            coords_l.append(pts)
            jac_l.append(jac)
            norm_l.append(nhat)
        out = (
            np.array(coords_l),
            np.broadcast_to(fvals, (len(facets),) + fvals.shape).copy(),
            np.array(jac_l),
            np.array(norm_l),
            np.array(parents, dtype=int),
        )
        self._facet_cache[key] = out
        return out

    def facet_reference_points(self, facets):
        """Reference coordinates (in the parent element) of facet quad points."""
        fdim = self.dim - 1
        if fdim == 1:
            t = np.array([[-_GP], [_GP]])
            fvals = np.column_stack([0.5 * (1 - t[:, 0]), 0.5 * (1 + t[:, 0])])
        else:
            t, _ = _gauss_points(2)
            fvals = shape_values(t, 2)
        refs, parents = [], []
        for f in facets:
            e, lf = self._facet_parent[frozenset(f)]
            conn = list(self.elements[e])
            local = [conn.index(v) for v in f]
            corners = _REF_CORNERS[self.dim][local]
            refs.append(fvals @ corners)
            parents.append(e)
        return np.array(refs), np.array(parents, dtype=int)

    # ------------------------------------------------------------- identity

    def mesh_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.elements.astype(np.int64).tobytes())
        h.update(repr(sorted(self.dirichlet_facets)).encode())
        h.update(repr(sorted(self.traction_facets)).encode())
        return h.hexdigest()

    @property
    def nnodes(self) -> int:
        return self.nodes.shape[0]

    def free_mask(self) -> np.ndarray:
        """(N, n) bool mask of unknown components."""
        m = np.ones((self.nnodes, self.dim), dtype=bool)
        m[self.dirichlet_nodes] = False
        return m

    def volume(self) -> float:
        return float(self.quadrature()[2].sum())


@dataclass
class FeField:
    """Nodal vector field on a mesh; values[i] is the image of node i."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.nnodes, self.mesh.dim):
            raise DimensionMismatch(
                f"field values {self.values.shape} do not match mesh "
                f"({self.mesh.nnodes}, {self.mesh.dim})"
            )

    @classmethod
    def from_function(cls, mesh, fn):
        return cls(mesh, np.array([np.asarray(fn(x), dtype=float) for x in mesh.nodes]))

    @classmethod
    def identity(cls, mesh):
        return cls(mesh, mesh.nodes.copy())

    def copy(self):
        return FeField(self.mesh, self.values.copy())


@dataclass
class LoadSet:
    """Dead loads: per-quadrature body force, per-facet-quadrature traction,
    and full Dirichlet node vectors."""

    body: np.ndarray | None = None          # (M, q, n)
    traction: np.ndarray | None = None      # (T, qf, n), aligned with traction_facets
    dirichlet: dict = field(default_factory=dict)   # node id -> (n,) vector

    @classmethod
    def build(cls, mesh, body=None, traction=None, dirichlet=None):
        """Assemble load arrays from callables or constant vectors.

        dirichlet is mandatory (a callable x -> vector, defaulting to the
        identity map would hide errors).  body / traction may be None,
        constants, or callables of position.
        """
        coords = mesh.quadrature()[0]
        b = None
        if body is not None:
            b = _eval_vector(body, coords)
        t = None
        if mesh.traction_facets:
            fcoords = mesh.facet_quadrature(mesh.traction_facets)[0]
            t = _eval_vector(traction, fcoords) if traction is not None else np.zeros(fcoords.shape)
        if dirichlet is None:
            raise ValueError("LoadSet.build: dirichlet data is required")
        dvals = {
            int(i): np.asarray(dirichlet(mesh.nodes[i]), dtype=float)
            for i in mesh.dirichlet_nodes
        }
        return cls(body=b, traction=t, dirichlet=dvals)

    def dirichlet_ok(self, u: FeField, tol=1e-12) -> bool:
        for i, v in self.dirichlet.items():
            if np.max(np.abs(u.values[i] - v)) > tol * (1.0 + np.max(np.abs(v))):
                return False
        return True


def _eval_vector(spec, coords):
    if callable(spec):
        flat = coords.reshape(-1, coords.shape[-1])
        vals = np.array([np.asarray(spec(x), dtype=float) for x in flat])
        return vals.reshape(coords.shape)
    vec = np.asarray(spec, dtype=float)
    return np.broadcast_to(vec, coords.shape).copy()


# ----------------------------------------------------------------- assembly

def deformation_gradients(mesh: Mesh, u) -> np.ndarray:
    """grad u at every quadrature point, shape (M, q, n, n)."""
    vals = u.values if isinstance(u, FeField) else np.asarray(u)
    _, grads, _, _, _ = mesh.quadrature()
    return np.einsum("eai,eqaj->eqij", vals[mesh.elements], grads)


def _check_dets(F, floor=0.0):
    det = np.linalg.det(F)
    bad = det <= floor
    if np.any(bad):
        worst = float(det.min())
        raise DeterminantViolation(f"det grad u = {worst:g} <= {floor:g} at a quadrature point")
    return det


def _material_ctx(mesh):
    """Flattened (element, qp) index pair for material evaluation."""
    M, q = mesh.quadrature()[2].shape
    e = np.repeat(np.arange(M), q)
    k = np.tile(np.arange(q), M)
    return e, k


def total_energy(m, mesh: Mesh, loads: LoadSet, u) -> float:
    """Stored energy minus load work of a deformation field."""
    coords, grads, wdet, _, nvals = mesh.quadrature()
    F = deformation_gradients(mesh, u)
    _check_dets(F)
    M, q = wdet.shape
    n = mesh.dim
    W = m.energy_many(coords.reshape(-1, n), F.reshape(-1, n, n), ctx=_material_ctx(mesh))
    out = float(np.sum(W.reshape(M, q) * wdet))
    vals = u.values if isinstance(u, FeField) else np.asarray(u)
    if loads.body is not None:
        uq = np.einsum("qa,eai->eqi", nvals, vals[mesh.elements])
        out -= float(np.sum(wdet * np.einsum("eqi,eqi->eq", loads.body, uq)))
    if loads.traction is not None and mesh.traction_facets:
        _, fvals, jac, _, _ = mesh.facet_quadrature(mesh.traction_facets)
        fidx = np.array([list(f) for f in mesh.traction_facets], dtype=int)
        ufq = np.einsum("tqa,tai->tqi", fvals, vals[fidx])
        out -= float(np.sum(jac * np.einsum("tqi,tqi->tq", loads.traction, ufq)))
    return out


def residual_field(m, mesh: Mesh, loads: LoadSet, u) -> np.ndarray:
    """dE/du as a full (N, n) nodal array (Dirichlet rows included)."""
    coords, grads, wdet, _, nvals = mesh.quadrature()
    F = deformation_gradients(mesh, u)
    _check_dets(F)
    M, q = wdet.shape
    n = mesh.dim
    S = m.stress_many(coords.reshape(-1, n), F.reshape(-1, n, n), ctx=_material_ctx(mesh))
    S = S.reshape(M, q, n, n)
    r_el = np.einsum("eq,eqik,eqak->eai", wdet, S, grads)
    if loads.body is not None:
        r_el -= np.einsum("eq,qa,eqi->eai", wdet, nvals, loads.body)
    R = np.zeros((mesh.nnodes, n))
    np.add.at(R, mesh.elements, r_el)
    if loads.traction is not None and mesh.traction_facets:
        _, fvals, jac, _, _ = mesh.facet_quadrature(mesh.traction_facets)
        fidx = np.array([list(f) for f in mesh.traction_facets], dtype=int)
        r_f = -np.einsum("tq,tqa,tqi->tai", jac, fvals, loads.traction)
        np.add.at(R, fidx, r_f)
    return R


def residual(m, mesh: Mesh, loads: LoadSet, u) -> np.ndarray:
    """Residual restricted to the free components, flattened."""
    return residual_field(m, mesh, loads, u)[mesh.free_mask()]


def second_variation_matrix(m, mesh: Mesh, u, free_only=True):
    """Tangent stiffness d2E/du2 at state u as a sparse CSR matrix."""
    coords, grads, wdet, _, _ = mesh.quadrature()
    F = deformation_gradients(mesh, u)
    _check_dets(F)
    M, q = wdet.shape
    n = mesh.dim
    A = m.elasticity_many(coords.reshape(-1, n), F.reshape(-1, n, n), ctx=_material_ctx(mesh))
    A = A.reshape(M, q, n, n, n, n)
    Ke = np.einsum("eq,eqak,eqikjl,eqbl->eaibj", wdet, grads, A, grads)
    return _scatter_matrix(mesh, Ke, free_only)


def gradient_gram_matrix(mesh: Mesh, free_only=True):
    """Gram matrix of grad z : grad z over the same dof set."""
    _, grads, wdet, _, _ = mesh.quadrature()
    n = mesh.dim
    Kg = np.einsum("eq,eqak,eqbk->eab", wdet, grads, grads)
    Ke = np.einsum("eab,ij->eaibj", Kg, np.eye(n))
    return _scatter_matrix(mesh, Ke, free_only)


def _scatter_matrix(mesh, Ke, free_only):
    M, k = mesh.elements.shape
    n = mesh.dim
    dof = (mesh.elements[:, :, None] * n + np.arange(n)[None, None, :]).reshape(M, k * n)
    rows = np.repeat(dof, k * n, axis=1).ravel()
    cols = np.tile(dof, (1, k * n)).ravel()
    vals = Ke.reshape(M, k * n, k * n).ravel()
    K = scipy.sparse.coo_matrix(
        (vals, (rows, cols)), shape=(mesh.nnodes * n, mesh.nnodes * n)
    ).tocsr()
    if not free_only:
        return K
    free = mesh.free_mask().ravel()
    idx = np.flatnonzero(free)
    return K[np.ix_(idx, idx)].tocsr()


def coercivity_constant(M_mat, G_mat) -> float:
    """Smallest generalized eigenvalue of (M, G), G positive definite.

    Dense solve below a size threshold (deterministic LAPACK), shift-invert
    Lanczos above it.
    """
    nd = M_mat.shape[0]
    Ms = 0.5 * (M_mat + M_mat.T)
    Gs = 0.5 * (G_mat + G_mat.T)
    try:
        if nd <= 3500:
            a = Ms.toarray() if scipy.sparse.issparse(Ms) else np.asarray(Ms)
            b = Gs.toarray() if scipy.sparse.issparse(Gs) else np.asarray(Gs)
            vals = scipy.linalg.eigh(a, b, eigvals_only=True, subset_by_index=[0, 0])
            return float(vals[0])
        vals = scipy.sparse.linalg.eigsh(
            Ms, k=1, M=Gs, sigma=0.0, which="LM", return_eigenvectors=False
        )
        return float(vals[0])
    except (scipy.linalg.LinAlgError, RuntimeError, ArithmeticError) as exc:
        raise EigenFailure(f"generalized eigensolve failed: {exc}") from exc


@dataclass
class SolveLog:
    converged: bool = False
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": list(self.residual_history),
            "energy_history": list(self.energy_history),
        }


def solve_equilibrium(m, mesh: Mesh, loads: LoadSet, u0: FeField,
                      tol=1e-10, max_iter=50) -> tuple[FeField, SolveLog]:
    """Newton iteration with a backtracking, determinant-guarded line search.

    u0 must satisfy the Dirichlet data; the Dirichlet components never
    move.  Steps are halved until det grad u > 0 everywhere and the energy
    satisfies an Armijo decrease; a step below 1e-12 stalls out.
    """
    if not loads.dirichlet_ok(u0, tol=1e-10):
        raise BoundaryMismatch("solve_equilibrium: u0 violates the Dirichlet data")
    u = u0.copy()
    free = mesh.free_mask()
    log = SolveLog()
    r = residual(m, mesh, loads, u)
    log.residual_history.append(float(np.max(np.abs(r))))
    log.energy_history.append(total_energy(m, mesh, loads, u))
    for it in range(max_iter):
        if log.residual_history[-1] <= tol:
            log.converged = True
            log.iterations = it
            return u, log
        K = second_variation_matrix(m, mesh, u)
        try:
            delta = scipy.sparse.linalg.spsolve(K, -r)
        except RuntimeError as exc:
            raise SingularTangent(f"tangent solve failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise SingularTangent("tangent solve returned non-finite step")
        phi0 = log.energy_history[-1]
        # the assembled energy cannot be compared below roundoff, so the
        # decrease tests carry an absolute allowance; without it the last
        # Newton steps get rejected and the iteration creeps
        noise = 1e-14 * (1.0 + abs(phi0))

        def backtrack(direction, slope):
            t = 1.0
            while t >= 1e-12:
                cand = u.copy()
                cand.values[free] += t * direction
                try:
                    val = total_energy(m, mesh, loads, cand)
                except DeterminantViolation:
                    t *= 0.5
                    continue
                ok = (
                    val <= phi0 + 1e-4 * t * slope + noise
                    if slope < 0
                    else val < phi0 + noise
                )
                if ok:
                    return cand, val
                t *= 0.5
            return None

        # the Newton direction first; outside the convex basin it may not
        # descend, then plain steepest descent restores global progress
        step = backtrack(delta, float(np.dot(r, delta)))
        if step is None:
            step = backtrack(-r, -float(np.dot(r, r)))
        if step is None:
            raise LineSearchStall(
                f"line search stalled at iteration {it}, residual "
                f"{log.residual_history[-1]:.3e}"
            )
        u, phi = step
        r = residual(m, mesh, loads, u)
        log.residual_history.append(float(np.max(np.abs(r))))
        log.energy_history.append(phi)
    if log.residual_history[-1] <= tol:
        log.converged = True
        log.iterations = max_iter
        return u, log
    raise MaxIterations(
        f"Newton did not reach tol {tol:g} in {max_iter} iterations "
        f"(residual {log.residual_history[-1]:.3e})"
    )


def energy_identity_check(m, mesh: Mesh, loads: LoadSet, u_e: FeField, v: FeField,
                          residual_tol=1e-9) -> float:
    """|[E(v) - E(u_e)] - int(W(grad v) - W(grad u_e) - S(grad u_e):grad w)|.

    The identity holds because the load terms are linear and u_e has zero
    residual against the free directions; u_e is verified to be an
    equilibrium first.
    """
    r = residual(m, mesh, loads, u_e)
    if np.max(np.abs(r)) > residual_tol:
        raise NotEquilibrium(
            f"u_e residual {np.max(np.abs(r)):.3e} exceeds {residual_tol:g}"
        )
    coords, grads, wdet, _, _ = mesh.quadrature()
    n = mesh.dim
    Fe = deformation_gradients(mesh, u_e)
    Fv = deformation_gradients(mesh, v)
    _check_dets(Fe)
    _check_dets(Fv)
    ctx = _material_ctx(mesh)
    flat = coords.reshape(-1, n)
    We = m.energy_many(flat, Fe.reshape(-1, n, n), ctx=ctx).reshape(wdet.shape)
    Wv = m.energy_many(flat, Fv.reshape(-1, n, n), ctx=ctx).reshape(wdet.shape)
    Se = m.stress_many(flat, Fe.reshape(-1, n, n), ctx=ctx).reshape(Fe.shape)
    inner = Wv - We - np.einsum("eqik,eqik->eq", Se, Fv - Fe)
    rhs = float(np.sum(wdet * inner))
    lhs = total_energy(m, mesh, loads, v) - total_energy(m, mesh, loads, u_e)
    return abs(lhs - rhs)


def mean_gradient(mesh: Mesh, w) -> np.ndarray:
    """Average of grad w over the body (volume-weighted quadrature mean)."""
    vals = w.values if isinstance(w, FeField) else np.asarray(w)
    _, grads, wdet, _, _ = mesh.quadrature()
    G = np.einsum("eai,eqaj->eqij", vals[mesh.elements], grads)
    return np.einsum("eq,eqij->ij", wdet, G) / float(wdet.sum())


def l2_gradient_norm_sq(mesh: Mesh, w) -> float:
    """int |grad w|^2 dx by element quadrature."""
    vals = w.values if isinstance(w, FeField) else np.asarray(w)
    _, grads, wdet, _, _ = mesh.quadrature()
    G = np.einsum("eai,eqaj->eqij", vals[mesh.elements], grads)
    return float(np.sum(wdet * np.einsum("eqij,eqij->eq", G, G)))


def gradient_field(mesh: Mesh, u) -> GridField:
    """Element-center deformation gradients as a lattice cell field.

    Requires the mesh to carry structured lattice bookkeeping (generated
    meshes do).
    """
    if mesh.lattice is None:
        raise DimensionMismatch("gradient_field needs a structured mesh lattice")
    vals = u.values if isinstance(u, FeField) else np.asarray(u)
    center = np.zeros((1, mesh.dim))
    dN = shape_gradients(center, mesh.dim)
    X = mesh.nodes[mesh.elements]
    J = np.einsum("eai,qaj->eqij", X, dN)
    invJ = np.linalg.inv(J)
    grads = np.einsum("qaj,eqji->eqai", dN, invJ)
    G = np.einsum("eai,eqaj->eqij", vals[mesh.elements], grads)[:, 0]
    lat = mesh.lattice
    out = np.zeros(lat.mask.shape + (mesh.dim, mesh.dim))
    out[lat.mask] = G[lat.elem_of_cell[lat.mask]]
    return GridField(lat.mask, out, lat.spacing, lat.origin)


def facet_deformation_gradients(mesh: Mesh, u, facets) -> np.ndarray:
    """grad u at the quadrature points of the given boundary facets."""
    vals = u.values if isinstance(u, FeField) else np.asarray(u)
    refs, parents = mesh.facet_reference_points(facets)
    out = []
    for ref, e in zip(refs, parents):
        dN = shape_gradients(ref, mesh.dim)
        X = mesh.nodes[mesh.elements[e]]
        J = np.einsum("ai,qaj->qij", X, dN)
        invJ = np.linalg.inv(J)
        grads = np.einsum("qaj,qji->qai", dN, invJ)
        out.append(np.einsum("ai,qaj->qij", vals[mesh.elements[e]], grads))
    return np.array(out)


# --------------------------------------------------------------- generators

def _structured_nodes(counts, lengths, origin):
    axes = [origin[d] + np.linspace(0.0, lengths[d], counts[d] + 1) for d in range(len(counts))]
    if len(counts) == 2:
        nx, ny = counts
        xs, ys = axes
        nodes = np.array([[xs[i], ys[j]] for j in range(ny + 1) for i in range(nx + 1)])
        return nodes
    nx, ny, nz = counts
    xs, ys, zs = axes
    return np.array(
        [
            [xs[i], ys[j], zs[k]]
            for k in range(nz + 1)
            for j in range(ny + 1)
            for i in range(nx + 1)
        ]
    )


_SIDE_NAMES_2D = ("left", "right", "bottom", "top")


def _side_facets_2d(nx, ny, keep_cell):
    """Boundary edges of a masked structured grid, grouped by outward side."""
    def nid(i, j):
        return j * (nx + 1) + i

    sides = {name: [] for name in ("left", "right", "bottom", "top", "inner")}
    for ix in range(nx):
        for iy in range(ny):
            if not keep_cell(ix, iy):
                continue
            if ix == 0 or not keep_cell(ix - 1, iy):
                sides["left" if ix == 0 else "inner"].append((nid(ix, iy), nid(ix, iy + 1)))
            if ix == nx - 1 or not keep_cell(ix + 1, iy):
                sides["right" if ix == nx - 1 else "inner"].append(
                    (nid(ix + 1, iy), nid(ix + 1, iy + 1))
                )
            if iy == 0 or not keep_cell(ix, iy - 1):
                sides["bottom" if iy == 0 else "inner"].append((nid(ix, iy), nid(ix + 1, iy)))
            if iy == ny - 1 or not keep_cell(ix, iy + 1):
                sides["top" if iy == ny - 1 else "inner"].append(
                    (nid(ix, iy + 1), nid(ix + 1, iy + 1))
                )
    return sides


def _masked_rectangle(nx, ny, width, height, keep_cell, dirichlet, traction, origin=(0.0, 0.0)):
    if abs(width / nx - height / ny) > 1e-12 * (1 + abs(width / nx)):
        lattice_spacing = None
    else:
        lattice_spacing = width / nx
    nodes = _structured_nodes((nx, ny), (width, height), origin)
    elements = []
    mask = np.zeros((nx, ny), dtype=bool)
    elem_of_cell = np.full((nx, ny), -1, dtype=int)

    def nid(i, j):
        return j * (nx + 1) + i

    for iy in range(ny):
        for ix in range(nx):
            if not keep_cell(ix, iy):
                continue
            elem_of_cell[ix, iy] = len(elements)
            mask[ix, iy] = True
            elements.append((nid(ix, iy), nid(ix + 1, iy), nid(ix + 1, iy + 1), nid(ix, iy + 1)))
    used = sorted({v for e in elements for v in e})
    remap = {old: new for new, old in enumerate(used)}
    nodes = nodes[used]
    elements = [[remap[v] for v in e] for e in elements]

    sides = _side_facets_2d(nx, ny, keep_cell)
    if dirichlet == "all":
        dnames = [s for s in sides if sides[s]]
    else:
        dnames = list(dirichlet)
    tnames = [s for s in sides if sides[s] and s not in dnames] if traction == "rest" else list(traction)
    dfacets = [tuple(remap[v] for v in f) for s in dnames for f in sides[s]]
    tfacets = [tuple(remap[v] for v in f) for s in tnames for f in sides[s]]
    lattice = None
    if lattice_spacing is not None:
        lattice = CellLattice(mask, elem_of_cell, lattice_spacing, tuple(origin))
    return Mesh(nodes, elements, dfacets, tfacets, lattice=lattice)


def rectangle_mesh(nx, ny, width=1.0, height=1.0, dirichlet="all", traction="rest"):
    """Structured quad mesh of [0,width] x [0,height].

    dirichlet: 'all' or an iterable of side names from
    {'left','right','bottom','top'}; remaining boundary sides become the
    traction part when traction='rest', else pass side names explicitly.
    """
    return _masked_rectangle(nx, ny, width, height, lambda i, j: True, dirichlet, traction)


def l_shape_mesh(n, size=1.0, dirichlet="all", traction="rest"):
    """L-shaped domain: unit square minus its upper-right quadrant."""
    if n % 2:
        raise ValueError("l_shape_mesh needs an even cell count")
    half = n // 2

    def keep(ix, iy):
        return not (ix >= half and iy >= half)

    return _masked_rectangle(n, n, size, size, keep, dirichlet, traction)


def square_ring_mesh(n, size=1.0, hole=0.5, dirichlet="all", traction="rest"):
    """Square annulus: a square with a centered square hole (polygonal ring)."""
    if n % 4:
        raise ValueError("square_ring_mesh needs n divisible by 4")
    lo = int(round(n * (1 - hole) / 2))
    hi = n - lo

    def keep(ix, iy):
        return not (lo <= ix < hi and lo <= iy < hi)

    return _masked_rectangle(n, n, size, size, keep, dirichlet, traction)


def box_mesh(nx, ny, nz, lengths=(1.0, 1.0, 1.0), dirichlet="all"):
    """Structured hex mesh of a box; dirichlet='all' or named faces among
    {'x0','x1','y0','y1','z0','z1'} (the rest become traction facets)."""
    nodes = _structured_nodes((nx, ny, nz), lengths, (0.0, 0.0, 0.0))

    def nid(i, j, k):
        return k * (ny + 1) * (nx + 1) + j * (nx + 1) + i

    elements = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                elements.append(
                    (
                        nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k),
                        nid(i, j, k + 1), nid(i + 1, j, k + 1), nid(i + 1, j + 1, k + 1),
                        nid(i, j + 1, k + 1),
                    )
                )
    faces = {name: [] for name in ("x0", "x1", "y0", "y1", "z0", "z1")}
    for j in range(ny):
        for k in range(nz):
            faces["x0"].append((nid(0, j, k), nid(0, j + 1, k), nid(0, j + 1, k + 1), nid(0, j, k + 1)))
            faces["x1"].append(
                (nid(nx, j, k), nid(nx, j + 1, k), nid(nx, j + 1, k + 1), nid(nx, j, k + 1))
            )
    for i in range(nx):
        for k in range(nz):
            faces["y0"].append((nid(i, 0, k), nid(i + 1, 0, k), nid(i + 1, 0, k + 1), nid(i, 0, k + 1)))
            faces["y1"].append(
                (nid(i, ny, k), nid(i + 1, ny, k), nid(i + 1, ny, k + 1), nid(i, ny, k + 1))
            )
    for i in range(nx):
        for j in range(ny):
            faces["z0"].append((nid(i, j, 0), nid(i + 1, j, 0), nid(i + 1, j + 1, 0), nid(i, j + 1, 0)))
            faces["z1"].append(
                (nid(i, j, nz), nid(i + 1, j, nz), nid(i + 1, j + 1, nz), nid(i, j + 1, nz))
            )
    if dirichlet == "all":
        dnames = list(faces)
    else:
        dnames = list(dirichlet)
    dfacets = [f for s in dnames for f in faces[s]]
    tfacets = [f for s in faces if s not in dnames for f in faces[s]]
    return Mesh(nodes, elements, dfacets, tfacets)


# ------------------------------------------------------------------ file io

def write_mesh(mesh: Mesh, path):
    lines = ["mesh 1", f"dim {mesh.dim}", f"nodes {mesh.nnodes}"]
    for x in mesh.nodes:
        lines.append(" ".join(repr(float(c)) for c in x))
    lines.append(f"elements {mesh.elements.shape[0]} {mesh.elements.shape[1]}")
    for e in mesh.elements:
        lines.append(" ".join(str(int(v)) for v in e))
    lines.append(f"dirichlet {len(mesh.dirichlet_facets)}")
    for f in mesh.dirichlet_facets:
        lines.append(" ".join(str(v) for v in f))
    lines.append(f"traction {len(mesh.traction_facets)}")
    for f in mesh.traction_facets:
        lines.append(" ".join(str(v) for v in f))
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    from pathlib import Path

    lines = Path(path).read_text().strip().splitlines()
    if lines[0].strip() != "mesh 1":
        raise DimensionMismatch(f"{path} is not a mesh file")
    row = 1
    assert lines[row].startswith("dim")
    row += 1
    count = int(lines[row].split()[1])
    row += 1
    nodes = [[float(t) for t in lines[row + i].split()] for i in range(count)]
    row += count
    mcount, width = (int(t) for t in lines[row].split()[1:3])
    row += 1
    elements = [[int(t) for t in lines[row + i].split()] for i in range(mcount)]
    row += mcount
    dcount = int(lines[row].split()[1])
    row += 1
    dfacets = [tuple(int(t) for t in lines[row + i].split()) for i in range(dcount)]
    row += dcount
    tcount = int(lines[row].split()[1])
    row += 1
    tfacets = [tuple(int(t) for t in lines[row + i].split()) for i in range(tcount)]
    return Mesh(nodes, elements, dfacets, tfacets)
