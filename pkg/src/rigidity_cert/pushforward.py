"""Change of reference configuration.

An equilibrium u_e maps the body onto u_e(Omega); this module rebuilds
the problem there: deformed mesh, pushed-forward stored energy, stress,
elasticity tensor, and loads, with the composed fields represented by
node transport (the image of node x_i carries the reference nodal
value).  Integral identities between the two configurations are checked
numerically, and the strain-difference uniqueness gate runs the usual
BMO chain on the deformed configuration.

u_e may be a nodal field or an analytically specified map with an exact
Jacobian.  For a nodal field the transport is exact (the deformed
elements are the exact isoparametric images), so identity residuals sit
at roundoff; an analytic map is interpolated by the deformed mesh and
the residuals shrink at the quadrature order under refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.spatial

from . import certify, fem, harmonic, material
from .errors import (
    DegenerateNormal,
    DeterminantViolation,
    DimensionMismatch,
    NotInjective,
    PrerequisiteFailed,
)

__all__ = [
    "AnalyticDeformation",
    "DeformedConfig",
    "PushforwardMaterial",
    "deform_configuration",
    "pushforward_material",
    "push_point",
    "pushforward_loads",
    "verify_cov_identities",
    "CovReport",
    "strain_diff_to_dist",
    "StrainDistReport",
    "certify_strain_neighborhood",
]


@dataclass(frozen=True)
class AnalyticDeformation:
    """A deformation map given in closed form with its Jacobian."""

    fn: callable
    jac: callable

    def __call__(self, x):
        return np.asarray(self.fn(x), dtype=float)

    def jacobian(self, x):
        return np.asarray(self.jac(x), dtype=float)


@dataclass
class DeformedConfig:
    """The deformed body as a new reference configuration."""

    reference_mesh: fem.Mesh
    mesh_def: fem.Mesh
    forward: np.ndarray              # (N, n) node images
    F: np.ndarray                    # (M, q, n, n) forward gradients at qps
    inverse_jacobians: np.ndarray    # (M, q, n, n)
    det_F: np.ndarray                # (M, q)
    source: object = field(repr=False, default=None)
    inverse_residual: float = 0.0

    def facet_data(self, facets):
        """(F, det F) at the quadrature points of the given facets."""
        mesh = self.reference_mesh
        if isinstance(self.source, fem.FeField):
            Ff = fem.facet_deformation_gradients(mesh, self.source, facets)
        else:
            coords = mesh.facet_quadrature(facets)[0]
            flat = coords.reshape(-1, mesh.dim)
            Ff = np.array([self.source.jacobian(x) for x in flat]).reshape(
                coords.shape[:2] + (mesh.dim, mesh.dim)
            )
        return Ff, np.linalg.det(Ff)


def _forward_gradients(mesh, u_e):
    if isinstance(u_e, fem.FeField):
        return fem.deformation_gradients(mesh, u_e)
    coords = mesh.quadrature()[0]
    flat = coords.reshape(-1, mesh.dim)
    F = np.array([u_e.jacobian(x) for x in flat])
    return F.reshape(coords.shape[:2] + (mesh.dim, mesh.dim))


def deform_configuration(mesh: fem.Mesh, u_e) -> DeformedConfig:
    """Build the deformed mesh and store the forward gradient data.

    Checks injectivity at desk scale: node images must be pairwise
    distinct and every element must keep a positive Jacobian in the
    image.
    """
    if isinstance(u_e, fem.FeField):
        images = u_e.values.copy()
    else:
        images = np.array([u_e(x) for x in mesh.nodes])
    F = _forward_gradients(mesh, u_e)
    det = np.linalg.det(F)
    if det.min() <= 0.0:
        raise DeterminantViolation(
            f"forward map determinant {det.min():g} <= 0 at a quadrature point"
        )
    tree = scipy.spatial.cKDTree(images)
    if tree.query_pairs(1e-12):
        raise NotInjective("two nodes map to the same image point")
    try:
        mesh_def = fem.Mesh(
            images,
            mesh.elements,
            mesh.dirichlet_facets,
            mesh.traction_facets,
            lattice=mesh.lattice,
        )
    except ValueError as exc:
        raise NotInjective(f"element inverted in the image: {exc}") from exc
    inv = np.linalg.inv(F)
    residual = float(np.max(np.abs(np.einsum("eqik,eqkj->eqij", inv, F) - np.eye(mesh.dim))))
    return DeformedConfig(
        reference_mesh=mesh,
        mesh_def=mesh_def,
        forward=images,
        F=F,
        inverse_jacobians=inv,
        det_F=det,
        source=u_e,
        inverse_residual=residual,
    )


class PushforwardMaterial(material.Material):
    """Stored energy rewritten over the deformed configuration.

    At the material point carried by element/quadrature context (e, k):
    W_u(y, G) = W(x, G F) / det F, with stress and elasticity following
    by the chain rule.  Evaluation therefore requires the assembly
    context; use point_material for free-standing algebra at one point.
    """

    def __init__(self, base: material.Material, cfg: DeformedConfig):
        super().__init__(base.lam, base.mu, None)
        self.base = base
        self.cfg = cfg
        mesh = cfg.reference_mesh
        self._x = mesh.quadrature()[0].reshape(-1, mesh.dim)
        n = mesh.dim
        self._F = cfg.F.reshape(-1, n, n)
        self._det = cfg.det_F.reshape(-1)
        self._nq = cfg.det_F.shape[1]

    def _idx(self, ctx, count):
        if ctx is None:
            raise DimensionMismatch(
                "a pushforward material is tied to material points; evaluate "
                "with assembly context or through point_material"
            )
        e, k = ctx
        idx = np.asarray(e) * self._nq + np.asarray(k)
        if idx.shape != (count,):
            raise DimensionMismatch("context does not match the batch size")
        return idx

    def energy_many(self, coords, F, ctx=None):
        F = np.asarray(F, dtype=float)
        idx = self._idx(ctx, F.shape[0])
        GF = np.einsum("pij,pjk->pik", F, self._F[idx])
        return self.base.energy_many(self._x[idx], GF) / self._det[idx]

    def stress_many(self, coords, F, ctx=None):
        F = np.asarray(F, dtype=float)
        idx = self._idx(ctx, F.shape[0])
        Fe = self._F[idx]
        GF = np.einsum("pij,pjk->pik", F, Fe)
        S = self.base.stress_many(self._x[idx], GF)
        return np.einsum("pik,pak->pia", S, Fe) / self._det[idx][:, None, None]

    def elasticity_many(self, coords, F, ctx=None):
        F = np.asarray(F, dtype=float)
        idx = self._idx(ctx, F.shape[0])
        Fe = self._F[idx]
        GF = np.einsum("pij,pjk->pik", F, Fe)
        A = self.base.elasticity_many(self._x[idx], GF)
        out = np.einsum("pikjl,pak,pbl->piajb", A, Fe, Fe)
        return out / self._det[idx][:, None, None, None, None]

    def point_material(self, e: int, k: int) -> material.Material:
        """Freeze the material point (e, k): a stand-alone material in G."""
        idx = e * self._nq + k
        return push_point(self.base, self._x[idx], self._F[idx])

    def descriptor(self) -> dict:
        return {"model": "pushforward", "base": self.base.descriptor()}


def pushforward_material(m: material.Material, cfg: DeformedConfig) -> PushforwardMaterial:
    return PushforwardMaterial(m, cfg)


def push_point(base: material.Material, x, F) -> material.Material:
    """Pushforward of the stored energy at one material point.

    Returns a material in the new gradient variable G with closed-form
    stress and elasticity via the chain rule.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    det = float(np.linalg.det(F))
    if det <= 0.0:
        raise DeterminantViolation(f"det F = {det:g} <= 0 at the pushforward point")

    def energy_fn(_, G):
        return float(base.energy_many(x[None], (G @ F)[None])[0]) / det

    def stress_fn(_, G):
        S = base.stress_many(x[None], (G @ F)[None])[0]
        return S @ F.T / det

    def elasticity_fn(_, G):
        A = base.elasticity_many(x[None], (G @ F)[None])[0]
        return np.einsum("ikjl,ak,bl->iajb", A, F, F) / det

    return material.CustomMaterial(
        "pushforward-point",
        energy_fn,
        stress_fn=stress_fn,
        elasticity_fn=elasticity_fn,
        frame_indifferent=getattr(base, "frame_indifferent", False),
        lam=base.lam,
        mu=base.mu,
    )


def pushforward_loads(loads: fem.LoadSet, cfg: DeformedConfig) -> fem.LoadSet:
    """Dead loads over the deformed configuration.

    Body force scales by 1/det F; tractions by 1/(|F^-T n| det F) through
    the surface transformation; Dirichlet data becomes the identity on
    the node images.
    """
    mesh = cfg.reference_mesh
    body = None
    if loads.body is not None:
        body = loads.body / cfg.det_F[..., None]
    traction = None
    if loads.traction is not None and mesh.traction_facets:
        facets = mesh.traction_facets
        Ff, detf = cfg.facet_data(facets)
        if detf.min() <= 0.0:
            raise DeterminantViolation(
                f"forward map determinant {detf.min():g} <= 0 on a traction facet"
            )
        normals = mesh.facet_quadrature(facets)[3]
        cof_n = np.linalg.solve(np.swapaxes(Ff, -1, -2), normals[..., None])[..., 0]
        stretch = np.linalg.norm(cof_n, axis=-1)
        if stretch.min() < 1e-12:
            raise DegenerateNormal(
                f"|F^-T n| = {stretch.min():g} below 1e-12 on a traction facet"
            )
        traction = loads.traction / (stretch * detf)[..., None]
    dirichlet = {int(i): cfg.forward[i].copy() for i in mesh.dirichlet_nodes}
    return fem.LoadSet(body=body, traction=traction, dirichlet=dirichlet)


# ------------------------------------------------------- integral identities

_EMPTY = fem.LoadSet(body=None, traction=None, dirichlet={})


def _stress_power(m, mesh, v, w, ctx_mesh=None):
    coords, grads, wdet, _, _ = mesh.quadrature()
    n = mesh.dim
    Fv = fem.deformation_gradients(mesh, v)
    Gw = fem.deformation_gradients(mesh, w)
    S = m.stress_many(
        coords.reshape(-1, n), Fv.reshape(-1, n, n), ctx=fem._material_ctx(mesh)
    ).reshape(Fv.shape)
    return float(np.sum(wdet * np.einsum("eqik,eqik->eq", S, Gw)))


def _elasticity_form(m, mesh, v, w):
    coords, grads, wdet, _, _ = mesh.quadrature()
    n = mesh.dim
    Fv = fem.deformation_gradients(mesh, v)
    Gw = fem.deformation_gradients(mesh, w)
    A = m.elasticity_many(
        coords.reshape(-1, n), Fv.reshape(-1, n, n), ctx=fem._material_ctx(mesh)
    ).reshape(Fv.shape[:2] + (n, n, n, n))
    return float(np.sum(wdet * np.einsum("eqia,eqiajb,eqjb->eq", Gw, A, Gw)))


def _body_work(loads, mesh, w):
    if loads.body is None:
        return 0.0
    _, _, wdet, _, nvals = mesh.quadrature()
    vals = w.values if isinstance(w, fem.FeField) else np.asarray(w)
    wq = np.einsum("qa,eai->eqi", nvals, vals[mesh.elements])
    return float(np.sum(wdet * np.einsum("eqi,eqi->eq", loads.body, wq)))


def _traction_work(loads, mesh, w):
    if loads.traction is None or not mesh.traction_facets:
        return 0.0
    _, fvals, jac, _, _ = mesh.facet_quadrature(mesh.traction_facets)
    fidx = np.array([list(f) for f in mesh.traction_facets], dtype=int)
    vals = w.values if isinstance(w, fem.FeField) else np.asarray(w)
    wq = np.einsum("tqa,tai->tqi", fvals, vals[fidx])
    return float(np.sum(jac * np.einsum("tqi,tqi->tq", loads.traction, wq)))


@dataclass
class CovReport:
    """Both sides of the five change-of-configuration identities."""

    lines: dict
    max_rel: float
    inverse_residual: float

    def to_dict(self) -> dict:
        return {
            "lines": self.lines,
            "max_rel": self.max_rel,
            "inverse_residual": self.inverse_residual,
        }


def _rel(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def verify_cov_identities(m, mesh, loads, u_e, v, w) -> CovReport:
    """Evaluate energy, stress power, elasticity form, body work, and
    traction work on both configurations and report the discrepancies.

    v and w are reference fields; their images are represented on the
    deformed mesh by node transport.
    """
    cfg = deform_configuration(mesh, u_e)
    m_u = PushforwardMaterial(m, cfg)
    loads_u = pushforward_loads(loads, cfg)
    mesh_def = cfg.mesh_def
    v_hat = fem.FeField(mesh_def, v.values)
    w_hat = fem.FeField(mesh_def, w.values)
    lines = {}
    lhs = fem.total_energy(m, mesh, _EMPTY, v)
    rhs = fem.total_energy(m_u, mesh_def, _EMPTY, v_hat)
    lines["energy"] = {"lhs": lhs, "rhs": rhs, "rel": _rel(lhs, rhs)}
    lhs = _stress_power(m, mesh, v, w)
    rhs = _stress_power(m_u, mesh_def, v_hat, w_hat)
    lines["stress_power"] = {"lhs": lhs, "rhs": rhs, "rel": _rel(lhs, rhs)}
    lhs = _elasticity_form(m, mesh, v, w)
    rhs = _elasticity_form(m_u, mesh_def, v_hat, w_hat)
    lines["elasticity_form"] = {"lhs": lhs, "rhs": rhs, "rel": _rel(lhs, rhs)}
    lhs = _body_work(loads, mesh, w)
    rhs = _body_work(loads_u, mesh_def, w_hat)
    lines["body_work"] = {"lhs": lhs, "rhs": rhs, "rel": _rel(lhs, rhs)}
    lhs = _traction_work(loads, mesh, w)
    rhs = _traction_work(loads_u, mesh_def, w_hat)
    lines["traction_work"] = {"lhs": lhs, "rhs": rhs, "rel": _rel(lhs, rhs)}
    max_rel = max(entry["rel"] for entry in lines.values())
    return CovReport(lines=lines, max_rel=max_rel, inverse_residual=cfg.inverse_residual)


# ---------------------------------------------------- strain-difference gate

@dataclass
class StrainDistReport:
    """Pointwise rotation distances of the relative gradient G F_e^-1,
    sandwiched by the strain difference through the sup/inf gradient
    norms of the reference equilibrium."""

    d: np.ndarray
    strain_diff: np.ndarray
    bounds_ok: np.ndarray
    Upsilon_e: float
    upsilon_e: float

    @property
    def all_ok(self) -> bool:
        return bool(self.bounds_ok.all())


def strain_diff_to_dist(u_e: fem.FeField, v: fem.FeField) -> StrainDistReport:
    """Convert the strain difference of v against u_e into rotation
    distances of the relative gradient, verifying the two-sided bounds at
    every quadrature point."""
    mesh = u_e.mesh
    if v.mesh is not u_e.mesh:
        raise DimensionMismatch("fields live on different meshes")
    n = mesh.dim
    Fe = fem.deformation_gradients(mesh, u_e)
    G = fem.deformation_gradients(mesh, v)
    for name, X in (("u_e", Fe), ("v", G)):
        dmin = float(np.linalg.det(X).min())
        if dmin <= 0.0:
            raise DeterminantViolation(f"det grad {name} = {dmin:g} <= 0")
    A = np.einsum("eqij,eqjk->eqik", G, np.linalg.inv(Fe))
    d = certify._dist_stack(A)
    Cdiff = np.einsum("eqki,eqkj->eqij", G, G) - np.einsum("eqki,eqkj->eqij", Fe, Fe)
    diff = np.sqrt(np.einsum("eqij,eqij->eq", Cdiff, Cdiff))
    fn = np.sqrt(np.einsum("eqij,eqij->eq", Fe, Fe))
    inv = np.linalg.inv(Fe)
    fninv = np.sqrt(np.einsum("eqij,eqij->eq", inv, inv))
    Upsilon = float(fn.max())
    upsilon = 1.0 / float(fninv.max())
    rn = math.sqrt(n)
    tol = 1e-12 * (1.0 + diff.max() + d.max())
    lower = upsilon**2 * d**2 <= rn * diff + tol
    upper = rn * diff <= Upsilon**2 * d * rn * (d + 2.0 * rn) + tol
    linear = upsilon**2 * d <= diff + tol
    return StrainDistReport(
        d=d,
        strain_diff=diff,
        bounds_ok=lower & upper & linear,
        Upsilon_e=Upsilon,
        upsilon_e=upsilon,
    )


def _deformed_inputs(problem_def: certify.Problem, cfg: DeformedConfig,
                     u_hat, rho, epsilon, taylor_samples, j2_count,
                     seed, cap=1e6) -> certify.CertInputs:
    """Gate constants measured on the deformed configuration.

    Taylor constants of the pushed material are the max over a seeded
    sample of material points of the frozen-point constants.
    """
    m_u, mesh_def = problem_def.material, problem_def.mesh
    n = mesh_def.dim
    M = fem.second_variation_matrix(m_u, mesh_def, u_hat)
    G = fem.gradient_gram_matrix(mesh_def)
    lambda_min = fem.coercivity_constant(M, G)
    k_hat = lambda_min / 8.0
    rng = np.random.default_rng(seed)
    nelem, nq = cfg.det_F.shape
    npts = min(12, nelem * nq)
    flat = rng.choice(nelem * nq, size=npts, replace=False)
    c = c_hat = 0.0
    per_point = max(200, taylor_samples // npts)
    for p in np.sort(flat):
        pm = m_u.point_material(int(p // nq), int(p % nq))
        tc = material.taylor_constants(
            pm, n=n, delta=rho, epsilon=epsilon, nsamples=per_point, seed=seed
        )
        c = max(c, tc.c)
        c_hat = max(c_hat, tc.c_hat)
    fields, j2_manifest = certify._j2_family(mesh_def, j2_count, seed)
    J2 = harmonic.fit_interpolation_constant(fields, p=2.0, q=3.0)
    components = n * n
    delta_star = (
        certify.neighborhood_radius(k_hat, c, J2, components, cap=cap)
        if k_hat > 0.0
        else 0.0
    )
    provenance = {
        "mesh_hash": mesh_def.mesh_hash(),
        "material": m_u.descriptor(),
        "taylor": {
            "delta": float(rho),
            "epsilon": float(epsilon),
            "samples": int(per_point),
            "points": int(npts),
            "seed": int(seed),
        },
        "j2_family": j2_manifest,
        "seed": int(seed),
    }
    return certify.CertInputs(
        lambda_min=float(lambda_min),
        k_hat=float(k_hat),
        c_taylor=float(c),
        c_hat_taylor=float(c_hat),
        J2=float(J2),
        rho=float(rho),
        epsilon=float(epsilon),
        components=components,
        delta_star=float(delta_star),
        provenance=provenance,
    )


def certify_strain_neighborhood(problem: certify.Problem, u_e: fem.FeField,
                                candidates, strain_eps=0.05,
                                rho=0.25, epsilon=0.25,
                                taylor_samples=2000, j2_count=6,
                                seed=0, residual_tol=1e-8) -> certify.Certificate:
    """Run the local-minimality gate on the deformed configuration.

    Candidates are filtered by the strain-difference bound against u_e;
    surviving candidates are transported to the deformed configuration,
    gated there with the pushed-forward problem, and their energy
    excesses are cross-checked against the reference-side gate.
    """
    m, mesh, loads = problem.material, problem.mesh, problem.loads
    r = float(np.max(np.abs(fem.residual(m, mesh, loads, u_e))))
    if r > residual_tol:
        raise PrerequisiteFailed(f"u_e is not an equilibrium: residual {r:.3e}")
    cfg = deform_configuration(mesh, u_e)
    m_u = PushforwardMaterial(m, cfg)
    loads_u = pushforward_loads(loads, cfg)
    mesh_def = cfg.mesh_def
    problem_def = certify.Problem(problem.problem_id + "-deformed", m_u, mesh_def, loads_u)
    u_hat = fem.FeField(mesh_def, u_e.values.copy())
    Ident = fem.deformation_gradients(mesh_def, u_hat)
    ident_dev = float(np.max(np.abs(Ident - np.eye(mesh.dim))))
    inputs_ref = certify.certification_inputs(
        problem, u_e, rho=rho, epsilon=epsilon,
        taylor_samples=taylor_samples, j2_count=j2_count, seed=seed,
    )
    if inputs_ref.lambda_min <= 0.0:
        raise PrerequisiteFailed(
            f"second variation at u_e is not coercive ({inputs_ref.lambda_min:g})"
        )
    inputs_def = _deformed_inputs(
        problem_def, cfg, u_hat, rho, epsilon, taylor_samples, j2_count, seed
    )
    measurements = {
        "identity_gradient_dev": {
            "lhs": ident_dev,
            "rhs": 1e-10,
            "pass": ident_dev <= 1e-10,
        },
        "second_variation_positive_ref": {
            "lhs": inputs_ref.lambda_min, "rhs": 0.0,
            "pass": inputs_ref.lambda_min > 0.0,
        },
        "second_variation_positive_def": {
            "lhs": inputs_def.lambda_min, "rhs": 0.0,
            "pass": inputs_def.lambda_min > 0.0,
        },
    }
    entries = []
    for idx, v in enumerate(candidates):
        cid = f"candidate-{idx:03d}"
        sd = strain_diff_to_dist(u_e, v)
        strain_sup = float(sd.strain_diff.max())
        entry = {
            "id": cid,
            "strain_diff_sup": strain_sup,
            "strain_bound": float(strain_eps),
            "dist_sup": float(sd.d.max()),
            "dist_bound": float(strain_eps / sd.upsilon_e**2),
            "sandwich_ok": sd.all_ok,
            "Upsilon_e": sd.Upsilon_e,
            "upsilon_e": sd.upsilon_e,
        }
        if strain_sup >= strain_eps:
            entry["outcome"] = "inapplicable"
            entry["reason"] = "strain-difference bound"
            entries.append(entry)
            continue
        v_hat = fem.FeField(mesh_def, v.values)
        gate_def = certify.local_min_gate(
            u_hat, v_hat, inputs_def, problem_def, residual_tol=max(residual_tol, 10 * r + 1e-12)
        )
        gate_ref = certify.local_min_gate(
            u_e, v, inputs_ref, problem, residual_tol=residual_tol
        )
        entry["gate_deformed"] = gate_def.to_dict()
        entry["gate_reference"] = gate_ref.to_dict()
        if gate_def.outcome == "pass" and gate_ref.outcome == "pass":
            agree = abs(gate_def.energy_gap - gate_ref.energy_gap)
            slack = 1e-9 * (1.0 + abs(gate_ref.energy_gap))
            entry["excess_agreement"] = {
                "lhs": agree,
                "rhs": slack,
                "pass": agree <= slack,
            }
            entry["energy_excess"] = gate_ref.energy_gap
            entry["outcome"] = "pass" if agree <= slack else "fail"
        else:
            entry["outcome"] = "inapplicable"
            entry["reason"] = "gate thresholds"
        entries.append(entry)
    outcome = certify._fold_outcomes([e["outcome"] for e in entries] or ["pass"])
    provenance = dict(inputs_ref.provenance)
    provenance["strain_eps"] = float(strain_eps)
    provenance["deformed"] = inputs_def.provenance
    return certify.Certificate(
        problem_id=problem.problem_id,
        lambda_min=inputs_def.lambda_min,
        k_hat=inputs_def.k_hat,
        c_taylor=inputs_def.c_taylor,
        c_hat_taylor=inputs_def.c_hat_taylor,
        J2=inputs_def.J2,
        delta_star=inputs_def.delta_star,
        measurements=measurements,
        candidates=entries,
        provenance=provenance,
        outcome=outcome,
        configuration="deformed",
        extra={"inverse_residual": cfg.inverse_residual},
    )
