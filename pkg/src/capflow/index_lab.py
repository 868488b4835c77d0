"""Index forms of minimal surfaces in S^3 and the tools around them.

Q^S (p = 2, q = cot R), Q^A (p = |A|^2 + 2) and its modification Q^A_*
(p = |A|^2), eigenfunction checks for coordinates and the Gauss map,
Gauss-map duals of annuli, conformal balancing and index reports.

Sign convention: A_ij = -<x_ij, nu>, so d nu = A g^-1 dx.  With it the
boundary weight q_A = csc(g) cot R - cot(g) A(eta, eta) makes nu_1..nu_3
Robin-kernel elements of Q^A_*.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import conformal as cf
from . import spectral as sf
from . import surfaces as sg
from .config import DEFAULT, Tolerances
from .errors import DomainError, NumericError
from .mesh import TriMesh, mesh_parametric

MODULE = "index_lab"

FLAVORS = ("spectral", "morse", "modified")
RICCI = 2.0  # Ric(nu, nu) on the unit S^3
POLE_OFFSET = 1e-3


def _boundary_data(surface: sg.ParametricSurface):
    if surface.ambient_cap is None:
        raise DomainError(f"{surface.name} has no ambient cap", MODULE)
    gamma = surface.contact_angle if surface.contact_angle is not None else 0.5 * np.pi
    return surface.radius, gamma


def q_morse(R: float, gamma: float, A_eta_eta):
    """csc(g) cot R - cot(g) A(eta, eta); at R = pi/2 this is -cot(g) A(eta, eta)."""
    return math.cos(R) / (math.sin(R) * math.sin(gamma)) - math.cos(gamma) / math.sin(gamma) * np.asarray(A_eta_eta)


# --------------------------------------------------------------------------
# sampling curvature on meshes


def _vertex_uv(surface: sg.ParametricSurface, mesh: TriMesh) -> np.ndarray:
    """Vertex parameters, nudged off collapsed sides where the chart degenerates."""
    uv = mesh.uv.copy()
    (u0, u1), _ = surface.chart.domain
    span = u1 - u0
    for k in mesh.collapsed:
        uv[k, 0] += POLE_OFFSET * span if abs(uv[k, 0] - u0) < abs(uv[k, 0] - u1) else -POLE_OFFSET * span
    return uv


def vertex_curvature(surface: sg.ParametricSurface, mesh: TriMesh) -> sg.CurvaturePack:
    uv = _vertex_uv(surface, mesh)
    return sg.fundamental_forms(surface, (uv[:, 0], uv[:, 1]), intrinsic_K=False)


def boundary_vertex_sides(surface: sg.ParametricSurface, mesh: TriMesh):
    """(side, vertex indices, free parameter) for every boundary side of the chart."""
    (u0, u1), (v0, v1) = surface.chart.domain
    bverts = mesh.boundary_vertices
    uv = mesh.uv[bverts]
    out = []
    for _, side in surface.boundary_sides():
        axis = 0 if side[0] == "u" else 1
        value = {"u0": u0, "u1": u1, "v0": v0, "v1": v1}[side]
        on = np.abs(uv[:, axis] - value) < 1e-12
        out.append((side, bverts[on], uv[on, 1 - axis]))
    return out


def boundary_A_eta_eta(surface: sg.ParametricSurface, mesh: TriMesh) -> np.ndarray:
    """A(eta, eta) at boundary vertices (zeros elsewhere)."""
    vals = np.zeros(mesh.n_vertices)
    for side, idx, t in boundary_vertex_sides(surface, mesh):
        if len(idx):
            vals[idx] = sg.boundary_curvatures(surface, side, t)["A_eta_eta"]
    return vals


# --------------------------------------------------------------------------
# index problems


@dataclass
class IndexProblem:
    surface: sg.ParametricSurface
    flavor: str
    mesh: TriMesh
    form: sf.FormSpec

    def index(self, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> sf.IndexReport:
        return sf.index_count(self.form, zero_tol, tol)

    @property
    def p(self) -> np.ndarray:
        return self.form.p

    @property
    def q(self) -> np.ndarray:
        return self.form.q


def form_coefficients(surface: sg.ParametricSurface, mesh: TriMesh, flavor: str):
    """Per-vertex (p, q) of the requested flavor."""
    if flavor not in FLAVORS:
        raise DomainError(f"flavor must be one of {FLAVORS}", MODULE)
    n = mesh.n_vertices
    q = np.zeros(n)
    if flavor == "spectral":
        p = np.full(n, RICCI)
        if not surface.closed:
            R, _ = _boundary_data(surface)
            q[mesh.boundary_vertices] = math.cos(R) / math.sin(R)
        return p, q
    A2 = vertex_curvature(surface, mesh).A_norm2
    p = A2 + RICCI if flavor == "morse" else A2
    if not surface.closed:
        R, gamma = _boundary_data(surface)
        b = mesh.boundary_vertices
        q[b] = q_morse(R, gamma, boundary_A_eta_eta(surface, mesh)[b])
    return p, q


def build_index_problem(surface: sg.ParametricSurface, flavor: str, h: float = 0.05, mesh: Optional[TriMesh] = None) -> IndexProblem:
    """Mesh the surface and sample p, q of Q^S / Q^A / Q^A_* at its vertices."""
    if surface.ambient != "sphere":
        raise DomainError("index forms are defined for surfaces in S^3", MODULE)
    mesh = mesh if mesh is not None else mesh_parametric(surface, h)
    p, q = form_coefficients(surface, mesh, flavor)
    return IndexProblem(surface, flavor, mesh, sf.FormSpec(mesh, p, q))


# --------------------------------------------------------------------------
# eigenfunction checks


def _dual_norm(r: np.ndarray, af: sf.AssembledForm, rows: np.ndarray) -> float:
    """sqrt(r^T (K + M)^-1 r) over the given rows: the discrete H^-1 norm."""
    import scipy.sparse.linalg as spla

    H = (af.K + af.M).tocsc()[rows][:, rows]
    return float(math.sqrt(max(r[rows] @ spla.spsolve(H.tocsc(), r[rows]), 0.0)))


def _require_minimal(surface: sg.ParametricSurface, tol: Tolerances = DEFAULT):
    from .functionals import sup_mean_curvature

    sup = sup_mean_curvature(surface, tol=tol)
    if sup > 1e-6:
        raise DomainError(f"{surface.name} is not minimal (sup|H| = {sup:.3g})", MODULE)


def _fem_residuals(surface, mesh, p, values, robin_q, dirichlet):
    """H^-1 residual of (Delta + p) u = 0 with Robin weight robin_q or u|_dS = 0."""
    q = np.zeros(mesh.n_vertices) if robin_q is None else robin_q
    af = sf.assemble(sf.FormSpec(mesh, p, q))
    r = af.Q_matrix @ values
    rows = af.interior if dirichlet else np.arange(mesh.n_vertices)
    norm = math.sqrt(values @ (af.M @ values))
    # a component vanishing on the surface has nothing to normalise by
    scale = norm if norm > 1e-12 else 1.0
    return _dual_norm(r, af, rows) / scale, r, af


def _orders(h, res):
    out = []
    for a, b, ra, rb in zip(h[:-1], h[1:], res[:-1], res[1:]):
        exact = ra < 1e-13 and rb < 1e-13
        out.append(float("inf") if exact else float(math.log(ra / rb) / math.log(a / b)))
    return out


def verify_coordinate_eigenfunctions(surface: sg.ParametricSurface, h_values=(0.1, 0.05), tol: Tolerances = DEFAULT) -> dict:
    """Check (Delta + 2) x_i = 0 with the boundary relations of a free boundary surface.

    i > 0: Robin weight cot R.  i = 0: Robin weight -tan R, or x_0 = 0 on the
    boundary when R = pi/2.  The interior equation is measured by the H^-1
    norm of the weak residual at two mesh sizes; the pointwise boundary
    relations are evaluated on the smooth surface.
    """
    _require_minimal(surface, tol)
    closed = surface.closed
    R = None
    if not closed:
        R, gamma = _boundary_data(surface)
        if abs(gamma - 0.5 * np.pi) > 1e-12:
            raise DomainError("coordinate eigenfunctions need a free boundary surface", MODULE)
    hemisphere = R is not None and abs(R - 0.5 * np.pi) < 1e-12
    report = {"surface": surface.name, "h": list(h_values), "components": {}}
    for i in range(4):
        report["components"][i] = {"residual": [], "boundary_flux": []}
    for h in h_values:
        mesh = mesh_parametric(surface, h)
        x = mesh.positions
        p = np.full(mesh.n_vertices, RICCI)
        for i in range(4):
            dirichlet = i == 0 and hemisphere
            if closed or dirichlet:
                robin = None
            else:
                robin = np.zeros(mesh.n_vertices)
                robin[mesh.boundary_vertices] = math.cos(R) / math.sin(R) if i > 0 else -math.tan(R)
            res, r, af = _fem_residuals(surface, mesh, p, x[:, i], robin, dirichlet)
            entry = report["components"][i]
            entry["residual"].append(res)
            if not closed and not dirichlet:
                b = af.boundary
                lumped = np.asarray(af.B.sum(axis=1)).ravel()[b]
                entry["boundary_flux"].append(float(np.max(np.abs(r[b] / lumped))))
            if dirichlet:
                entry["boundary_values"] = float(np.max(np.abs(x[mesh.boundary_vertices, 0])))
    for i in range(4):
        entry = report["components"][i]
        entry["order"] = _orders(list(h_values), entry["residual"])
    if not closed:
        report["boundary_relations"] = _coordinate_boundary_relations(surface, R, hemisphere)
    return report


def _coordinate_boundary_relations(surface, R, hemisphere, samples: int = 64) -> dict:
    worst = {"robin_i_gt_0": 0.0, "x0": 0.0}
    for _, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        t = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
        fr = sg.boundary_frame(surface, side, t, check=False)
        for i in range(1, 4):
            rel = fr.eta[..., i] - math.cos(R) / math.sin(R) * fr.x[..., i]
            worst["robin_i_gt_0"] = max(worst["robin_i_gt_0"], float(np.max(np.abs(rel))))
        rel0 = fr.x[..., 0] if hemisphere else fr.eta[..., 0] + math.tan(R) * fr.x[..., 0]
        worst["x0"] = max(worst["x0"], float(np.max(np.abs(rel0))))
    return worst


def gauss_map_components(surface: sg.ParametricSurface, mesh: TriMesh) -> np.ndarray:
    return vertex_curvature(surface, mesh).normal


def verify_gauss_eigenfunctions(surface: sg.ParametricSurface, h_values=(0.1, 0.05), tol: Tolerances = DEFAULT) -> dict:
    """Check (Delta + |A|^2) nu_i = 0 with the contact relations of the Gauss map.

    Boundary relations in the sign convention of this module:
    nu_0 = -sin R cos g; cos g nu_i + sin g <eta, e_i> = 0 (i > 0);
    (d_eta - q_A) nu_i = 0 (i > 0); (d_eta - tan g A(eta,eta)) nu_0 = 0 (g < pi/2).
    """
    _require_minimal(surface, tol)
    closed = surface.closed
    report = {"surface": surface.name, "h": list(h_values), "components": {}}
    for i in range(4):
        report["components"][i] = {"residual": [], "rayleigh": []}
    if not closed:
        R, gamma = _boundary_data(surface)
        right = abs(gamma - 0.5 * np.pi) < 1e-12
    for h in h_values:
        mesh = mesh_parametric(surface, h)
        pack = vertex_curvature(surface, mesh)
        nu = pack.normal
        p = pack.A_norm2
        robin_base = None
        if not closed:
            Aee = boundary_A_eta_eta(surface, mesh)
            b = mesh.boundary_vertices
            robin_base = np.zeros(mesh.n_vertices)
            robin_base[b] = q_morse(R, gamma, Aee[b])
        for i in range(4):
            dirichlet = (not closed) and i == 0 and right
            if closed or dirichlet:
                robin = None
            elif i > 0:
                robin = robin_base
            else:
                robin = np.zeros(mesh.n_vertices)
                robin[b] = math.tan(gamma) * Aee[b]
            res, r, af = _fem_residuals(surface, mesh, p, nu[:, i], robin, dirichlet)
            entry = report["components"][i]
            entry["residual"].append(res)
            if not closed and i > 0:
                trace = nu[af.boundary, i]
                bn = float(trace @ (af.B[af.boundary][:, af.boundary] @ trace))
                entry["rayleigh"].append(abs(af.Q(nu[:, i])) / bn if bn > 1e-14 else 0.0)
            if dirichlet:
                entry["boundary_values"] = float(np.max(np.abs(nu[mesh.boundary_vertices, 0])))
    for i in range(4):
        report["components"][i]["order"] = _orders(list(h_values), report["components"][i]["residual"])
    if not closed:
        report["boundary_relations"] = _gauss_boundary_relations(surface, R, gamma)
    report["gauss_span_rank"] = gauss_span_rank(surface)
    return report


def _gauss_boundary_relations(surface, R, gamma, samples: int = 64) -> dict:
    worst = {"nu0_value": 0.0, "contact": 0.0, "normal_derivative": 0.0}
    for _, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        t = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
        bc = sg.boundary_curvatures(surface, side, t)
        fr = bc["frame"]
        nu, eta = fr.nu, fr.eta
        worst["nu0_value"] = max(worst["nu0_value"], float(np.max(np.abs(nu[..., 0] + math.sin(R) * math.cos(gamma)))))
        for i in range(1, 4):
            rel = math.cos(gamma) * nu[..., i] + math.sin(gamma) * eta[..., i]
            worst["contact"] = max(worst["contact"], float(np.max(np.abs(rel))))
            # d_eta nu_i = A(eta, eta) <eta, e_i> since eta is principal on the boundary
            d_eta = bc["A_eta_eta"] * eta[..., i]
            rel = d_eta - q_morse(R, gamma, bc["A_eta_eta"]) * nu[..., i]
            worst["normal_derivative"] = max(worst["normal_derivative"], float(np.max(np.abs(rel))))
    return worst


def _gram_rank(surface, fn, threshold: float = 1e-8) -> int:
    def entries(s):
        vals = fn(s)
        return vals

    cells = sg.default_cells(surface)
    (u0, u1), (v0, v1) = surface.chart.domain
    nu_, wu = sg.gauss_legendre_nodes(u0, u1, cells[0], DEFAULT.quad_order)
    nv_, wv = sg.gauss_legendre_nodes(v0, v1, cells[1], DEFAULT.quad_order)
    U, V = np.meshgrid(nu_, nv_, indexing="ij")
    sample = sg.SurfaceSample(surface, U, V, np.outer(wu, wv))
    F = entries(sample).reshape(-1, 4)
    w = (sample.area_element * sample.weights).ravel()
    if len(w) < 20:
        raise DomainError("need at least 20 quadrature nodes", MODULE)
    G = F.T @ (w[:, None] * F)
    ev = np.linalg.eigvalsh(G)
    return int(np.sum(ev > threshold * max(ev.max(), 1e-300)))


def coordinate_span_rank(surface: sg.ParametricSurface, threshold: float = 1e-8) -> int:
    """Numerical rank of the L^2 Gram matrix of x_0..x_3 restricted to the surface."""
    return _gram_rank(surface, lambda s: s.x, threshold)


def gauss_span_rank(surface: sg.ParametricSurface, threshold: float = 1e-8) -> int:
    """Numerical rank of the L^2 Gram matrix of nu_0..nu_3."""
    return _gram_rank(surface, lambda s: s.normal, threshold)


# --------------------------------------------------------------------------
# duals


def dual_parameters(R: float, gamma: float, epsilon: int):
    """(R~, g~) with cos R~ = -eps sin R cos g and sin R~ sin g~ = sin R sin g, g~ in (0, pi/2]."""
    if epsilon not in (1, -1):
        raise DomainError("epsilon must be +1 or -1", MODULE)
    R_t = math.acos(-epsilon * math.sin(R) * math.cos(gamma))
    s = min(1.0, math.sin(R) * math.sin(gamma) / math.sin(R_t))
    return R_t, math.asin(s)


@dataclass
class DualSurface:
    base: sg.ParametricSurface
    epsilon: int
    dual: sg.ParametricSurface
    R_tilde: float
    gamma_tilde: float
    checks: dict = field(default_factory=dict)


def _gauss_chart(surface: sg.ParametricSurface, epsilon: int) -> sg.Chart:
    """Chart of eps * nu with first derivatives from the Weingarten equation."""
    chart = surface.chart

    def position(u, v):
        x, (xu, xv) = chart.derivatives(u, v, order=1)
        return epsilon * sg.unit_normal(surface, x, xu, xv)

    def first(u, v):
        pack = sg.fundamental_forms(surface, (u, v), intrinsic_K=False)
        _, (xu, xv) = chart.derivatives(u, v, order=1)
        W = np.linalg.solve(pack.metric, pack.A)  # g^-1 A
        # d_i nu = sum_j (A g^-1)_ij x_j = sum_j W_ji x_j
        du = W[..., 0, 0, None] * xu + W[..., 1, 0, None] * xv
        dv = W[..., 0, 1, None] * xu + W[..., 1, 1, None] * xv
        return epsilon * du, epsilon * dv

    h = chart.fd_step_second

    def second(u, v):
        up, vp = first(u + h, v)
        um, vm = first(u - h, v)
        _, vpv = first(u, v + h)
        _, vmv = first(u, v - h)
        return (up - um) / (2 * h), (vp - vm) / (2 * h), (vpv - vmv) / (2 * h)

    return replace(chart, position=position, first=first, second=second)


def _quadrature_nodes(surface, cells=None):
    cells = tuple(cells) if cells is not None else sg.default_cells(surface)
    (u0, u1), (v0, v1) = surface.chart.domain
    nu_, wu = sg.gauss_legendre_nodes(u0, u1, cells[0], DEFAULT.quad_order)
    nv_, wv = sg.gauss_legendre_nodes(v0, v1, cells[1], DEFAULT.quad_order)
    U, V = np.meshgrid(nu_, nv_, indexing="ij")
    return U, V, np.outer(wu, wv)


def resolve_epsilon(surface: sg.ParametricSurface, samples: int = 64) -> int:
    """Sign making eps A(eta, eta) > 0 on the boundary; refuses mixed signs."""
    vals = []
    for _, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        t = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
        vals.append(sg.boundary_curvatures(surface, side, t)["A_eta_eta"])
    vals = np.concatenate(vals)
    if np.all(vals > 0):
        return 1
    if np.all(vals < 0):
        return -1
    raise DomainError("A(eta, eta) changes sign on the boundary; the dual sign is undefined", MODULE)


def dual_annulus(surface: sg.ParametricSurface, epsilon="auto", tol: Tolerances = DEFAULT) -> DualSurface:
    """The Gauss-map dual eps * nu of a minimal annulus, with its contact data.

    Checks g~ = psi^2 g with psi = |A|/sqrt2 and the measured dual contact
    angle against g~, both within 1e-5.
    """
    if surface.closed or len(surface.loops) != 2:
        raise DomainError("dual surfaces are defined for annuli", MODULE)
    R, gamma = _boundary_data(surface)
    U, V, _ = _quadrature_nodes(surface)
    pack = sg.fundamental_forms(surface, (U, V), intrinsic_K=False)
    if np.min(np.sqrt(pack.A_norm2)) <= 1e-6:
        raise DomainError("|A| vanishes somewhere; the Gauss map is not an immersion", MODULE)
    eps_auto = resolve_epsilon(surface)
    eps = eps_auto if epsilon == "auto" else int(epsilon)
    if eps != eps_auto:
        warnings.warn("epsilon disagrees with the sign of A(eta, eta)", RuntimeWarning, stacklevel=2)
    R_t, g_t = dual_parameters(R, gamma, eps)
    chart = _gauss_chart(surface, eps)
    dual = sg.ParametricSurface(
        name=f"dual_{surface.name}",
        chart=chart,
        loops=surface.loops,
        contact_angle=g_t,
        ambient_cap=cf.Cap.about_e0(R_t),
        orientation=1,
        symmetry=dict(surface.symmetry),
        params={"epsilon": eps, "R": R_t, "gamma": g_t},
    )
    side = surface.loops[0].sides[0]
    lo, hi = chart.side_range(side)
    t = np.linspace(lo, hi, 17)[:-1] + 0.01
    measured = sg.boundary_frame(dual, side, t, check=False).gamma_measured
    if np.mean(measured) > 0.5 * np.pi + 1e-9:
        dual = replace(dual, orientation=-1)
        measured = sg.boundary_frame(dual, side, t, check=False).gamma_measured
    _, (xu, xv) = chart.derivatives(U, V, order=1)
    g_dual = np.stack(
        [np.stack([np.sum(xu * xu, -1), np.sum(xu * xv, -1)], -1), np.stack([np.sum(xu * xv, -1), np.sum(xv * xv, -1)], -1)], -2
    )
    psi2 = 0.5 * pack.A_norm2
    metric_err = float(np.max(np.abs(g_dual - psi2[..., None, None] * pack.metric)) / np.max(np.abs(pack.metric)))
    angle_err = float(np.max(np.abs(measured - g_t)))
    param_err = max(
        abs(math.cos(R_t) + eps * math.sin(R) * math.cos(gamma)),
        abs(math.sin(R_t) * math.sin(g_t) - math.sin(R) * math.sin(gamma)),
    )
    checks = {"metric": metric_err, "contact_angle": angle_err, "parameters": param_err}
    for name, limit in (("metric", 1e-5), ("contact_angle", 1e-5), ("parameters", 1e-8)):
        if checks[name] > limit:
            raise NumericError(f"dual {name} check failed: {checks[name]:.3g}", MODULE)
    return DualSurface(surface, eps, dual, R_t, g_t, checks)


# --------------------------------------------------------------------------
# quadratic forms on smooth trial fields


@dataclass(frozen=True)
class TrialField:
    """f(u, v) = sum c_jk cos(j pi s) trig_k(2 pi k w), s, w the rescaled parameters.

    The v-direction uses full periods so the field is periodic when the
    chart is.
    """

    domain: tuple
    coeffs: np.ndarray

    @classmethod
    def random(cls, domain, rng: np.random.Generator, modes: int = 3) -> "TrialField":
        return cls(domain, rng.standard_normal((modes, 2 * modes - 1)))

    @classmethod
    def constant(cls, domain, value: float = 1.0) -> "TrialField":
        c = np.zeros((1, 1))
        c[0, 0] = value
        return cls(domain, c)

    def evaluate(self, u, v):
        (u0, u1), (v0, v1) = self.domain
        s = (u - u0) / (u1 - u0)
        w = (v - v0) / (v1 - v0)
        f = np.zeros_like(s)
        fu = np.zeros_like(s)
        fv = np.zeros_like(s)
        J, K = self.coeffs.shape
        for j in range(J):
            a = np.cos(j * np.pi * s)
            da = -j * np.pi * np.sin(j * np.pi * s) / (u1 - u0)
            for k in range(K):
                m = (k + 1) // 2
                if k == 0:
                    b, db = np.ones_like(w), np.zeros_like(w)
                elif k % 2:
                    b = np.cos(2 * np.pi * m * w)
                    db = -2 * np.pi * m * np.sin(2 * np.pi * m * w) / (v1 - v0)
                else:
                    b = np.sin(2 * np.pi * m * w)
                    db = 2 * np.pi * m * np.cos(2 * np.pi * m * w) / (v1 - v0)
                c = self.coeffs[j, k]
                f += c * a * b
                fu += c * da * b
                fv += c * a * db
        return f, fu, fv


@dataclass
class FormGeometry:
    """Quadrature nodes of a surface with the metric data and weights p, q of each flavor."""

    U: np.ndarray
    V: np.ndarray
    dA: np.ndarray
    ginv: tuple
    p: dict
    boundary: list

    def value(self, flavor: str, f: TrialField) -> float:
        val, fu, fv = f.evaluate(self.U, self.V)
        guu, guv, gvv = self.ginv
        grad2 = guu * fu * fu + 2 * guv * fu * fv + gvv * fv * fv
        total = float(np.sum((grad2 - self.p[flavor] * val * val) * self.dA))
        for u, v, dl, q in self.boundary:
            fb, _, _ = f.evaluate(u, v)
            total -= float(np.sum(q[flavor] * fb * fb * dl))
        return total


def form_geometry(surface: sg.ParametricSurface, cells=None) -> FormGeometry:
    U, V, W = _quadrature_nodes(surface, cells)
    pack = sg.fundamental_forms(surface, (U, V), intrinsic_K=False)
    g = pack.metric
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    ginv = (g[..., 1, 1] / det, -g[..., 0, 1] / det, g[..., 0, 0] / det)
    p = {"spectral": RICCI, "morse": pack.A_norm2 + RICCI, "modified": pack.A_norm2}
    boundary = []
    if not surface.closed:
        R, gamma = _boundary_data(surface)
        n_cells = tuple(cells) if cells is not None else sg.default_cells(surface)
        for _, side in surface.boundary_sides():
            lo, hi = surface.chart.side_range(side)
            count = n_cells[1] if side[0] == "u" else n_cells[0]
            t, w = sg.gauss_legendre_nodes(lo, hi, count, DEFAULT.quad_order)
            sample = sg.BoundarySample(surface, side, None, t, w)
            qa = q_morse(R, gamma, sg.boundary_curvatures(surface, side, t)["A_eta_eta"])
            q = {"spectral": math.cos(R) / math.sin(R), "morse": qa, "modified": qa}
            boundary.append((sample.u, sample.v, sample.length_element * w, q))
    return FormGeometry(U, V, np.sqrt(det) * W, ginv, p, boundary)


def quadratic_form_value(surface: sg.ParametricSurface, flavor: str, f: TrialField, cells=None) -> float:
    """Q_{p,q}(f) = int |grad f|^2 - p f^2 - int_boundary q f^2 by quadrature."""
    if flavor not in FLAVORS:
        raise DomainError(f"flavor must be one of {FLAVORS}", MODULE)
    return form_geometry(surface, cells).value(flavor, f)


def dual_form_identity_check(surface: sg.ParametricSurface, trials: int = 20, seed: int = 0, dual: Optional[DualSurface] = None) -> dict:
    """Q^A(f) vs Q~^A(f), and Q^A_*(f) vs Q~^S(f) on shared parameter-space trials.

    The second identity needs R = pi/2.  Residuals are relative to
    max(1, |Q(f)|).
    """
    dual = dual or dual_annulus(surface)
    rng = np.random.default_rng(seed)
    domain = surface.chart.domain
    fields = [TrialField.constant(domain)] + [TrialField.random(domain, rng) for _ in range(trials)]
    R, _ = _boundary_data(surface)
    energy_pair = abs(R - 0.5 * np.pi) < 1e-12
    out = {"index_dual": [], "index_energy": [], "constant": {}}
    base, other = form_geometry(surface), form_geometry(dual.dual)
    for k, f in enumerate(fields):
        qa = base.value("morse", f)
        qa_t = other.value("morse", f)
        out["index_dual"].append(abs(qa - qa_t) / max(1.0, abs(qa)))
        if energy_pair:
            qm = base.value("modified", f)
            qs_t = other.value("spectral", f)
            out["index_energy"].append(abs(qm - qs_t) / max(1.0, abs(qm)))
            if k == 0:
                out["constant"] = {"modified": qm, "dual_spectral": qs_t}
    out["max_index_dual"] = float(max(out["index_dual"]))
    out["max_index_energy"] = float(max(out["index_energy"])) if out["index_energy"] else None
    return out


# --------------------------------------------------------------------------
# conformal balancing


def nodal_boundary_weight(surface: sg.ParametricSurface, mesh: TriMesh, values: np.ndarray) -> Callable:
    """Piecewise-linear interpolation of nodal boundary values along each side."""
    sides = boundary_vertex_sides(surface, mesh)
    table = {}
    for side, idx, t in sides:
        order = np.argsort(t)
        table[side] = (t[order], np.asarray(values)[idx][order])

    def weight(sample):
        t_nodes, vals = table[sample.side]
        t = sample.v if sample.side[0] == "u" else sample.u
        lo, hi = surface.chart.side_range(sample.side)
        period = (hi - lo) if (sample.side[0] == "u" and surface.chart.periodic[1]) else None
        return np.interp(t, t_nodes, vals, period=period)

    return weight


def _boundary_nodes(surface, cells=None):
    n_cells = tuple(cells) if cells is not None else sg.default_cells(surface)
    samples = []
    for loop, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        count = n_cells[1] if side[0] == "u" else n_cells[0]
        t, w = sg.gauss_legendre_nodes(lo, hi, count, DEFAULT.quad_order)
        samples.append(sg.BoundarySample(surface, side, loop, t, w))
    return samples


@dataclass
class BalanceResult:
    map: cf.MoebiusMap
    y: np.ndarray
    residual: float
    iterations: int
    history: list


def conformal_balance(surface: sg.ParametricSurface, weight=1.0, tol: Tolerances = DEFAULT, cells=None) -> BalanceResult:
    """Find y (orthogonal to e0) with int_dS (phi_y x)_i w = 0 for i = 1, 2, 3.

    Damped Newton with a central-difference Jacobian; steps are halved
    until the moment norm decreases and |y| < 1.  The residual is the
    moment norm divided by int w.
    """
    if surface.closed or surface.ambient_cap is None or abs(surface.radius - 0.5 * np.pi) > 1e-12:
        raise DomainError("balancing needs a surface with boundary in the hemisphere", MODULE)
    samples = _boundary_nodes(surface, cells)
    X = np.concatenate([s.x for s in samples])
    dl = np.concatenate([s.length_element * s.weights for s in samples])
    w = np.concatenate([np.asarray(weight(s) if callable(weight) else np.full(len(s.x), float(weight)), float) for s in samples])
    if np.any(w < -1e-12) or not np.any(w > 0):
        raise DomainError("weight must be nonnegative and not identically zero", MODULE)
    mass = float(np.sum(w * dl))

    def moments(y3):
        y = np.concatenate([[0.0], y3])
        return (cf.phi(y, X)[:, 1:] * (w * dl)[:, None]).sum(0) / mass

    def jacobian(y3, step=1e-6):
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            J[:, k] = (moments(y3 + e) - moments(y3 - e)) / (2 * step)
        return J

    y3 = np.zeros(3)
    F = moments(y3)
    norm = float(np.linalg.norm(F))
    if norm > tol.balance_residual:
        y3 = -0.1 * F / norm
        F = moments(y3)
        norm = float(np.linalg.norm(F))
    history = [norm]
    it = 0
    while norm > tol.balance_residual:
        if it >= tol.balance_max_iter:
            raise NumericError(f"conformal balancing did not converge; residual {norm:.3g}", MODULE)
        it += 1
        step = np.linalg.solve(jacobian(y3), -F)
        lam = 1.0
        while True:
            cand = y3 + lam * step
            if np.linalg.norm(cand) < 1.0:
                Fc = moments(cand)
                nc = float(np.linalg.norm(Fc))
                if nc < norm:
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise NumericError(f"conformal balancing stalled; residual {norm:.3g}", MODULE)
        y3, F, norm = cand, Fc, nc
        history.append(norm)
    y = np.concatenate([[0.0], y3])
    return BalanceResult(cf.conf_cap_element(0.5 * np.pi, np.eye(4), y, tol), y, norm, it, history)


# --------------------------------------------------------------------------
# reports


def is_rotationally_symmetric(surface: sg.ParametricSurface, samples: int = 16) -> bool:
    """Declared symmetry if present, else variance of |A|^2 along v below 1e-8."""
    if "rotational" in surface.symmetry:
        return bool(surface.symmetry["rotational"])
    (u0, u1), (v0, v1) = surface.chart.domain
    u = u0 + (u1 - u0) * (np.arange(samples) + 0.5) / samples
    v = v0 + (v1 - v0) * np.arange(samples) / samples
    U, V = np.meshgrid(u, v, indexing="ij")
    A2 = sg.fundamental_forms(surface, (U, V), intrinsic_K=False).A_norm2
    return bool(np.max(np.var(A2, axis=1)) < 1e-8)


def is_totally_geodesic(surface: sg.ParametricSurface) -> bool:
    if surface.symmetry.get("totally_geodesic"):
        return True
    U, V, _ = _quadrature_nodes(surface)
    return bool(np.max(sg.fundamental_forms(surface, (U, V), intrinsic_K=False).A_norm2) < 1e-10)


def boundary_integral_qA(surface: sg.ParametricSurface) -> float:
    if surface.closed:
        return 0.0
    R, gamma = _boundary_data(surface)
    return sg.integrate(surface, lambda b: q_morse(R, gamma, sg.boundary_curvatures(surface, b.side, b.t)["A_eta_eta"]), "boundary")


def urbano_report(surface: sg.ParametricSurface, h: float = 0.05, zero_tol: Optional[float] = None, tol: Tolerances = DEFAULT) -> dict:
    """Morse index, modified index and the theorem checks around them.

    ``consistent_with_theorems`` lists, in the order of ``theorem_checks``:
    ind_0(Q^A_*) <= ind(Q^A); ind(Q^A) = 4 only for rotationally symmetric
    surfaces; ind(Q^S) >= 1 unless totally geodesic (free boundary only);
    the dichotomy branch is one the area-index proposition allows.
    """
    mesh = mesh_parametric(surface, h)
    morse = build_index_problem(surface, "morse", mesh=mesh)
    modified = build_index_problem(surface, "modified", mesh=mesh)
    rep_a = morse.index(zero_tol, tol)
    rep_m = modified.index(zero_tol, tol)
    zt = rep_a.zero_tol
    ind0_mod = int(rep_m.robin.counts[0] + rep_m.robin.counts[1])
    qA = boundary_integral_qA(surface)
    names, flags = [], []

    names.append("ind0_modified_le_ind")
    flags.append(ind0_mod <= rep_a.ind)

    rotational = is_rotationally_symmetric(surface)
    names.append("index_4_implies_rotational")
    flags.append(rep_a.ind != 4 or rotational)

    branch = None
    if not surface.closed:
        lam_d0 = float(rep_m.dirichlet.eigenvalues[0])
        steklov = rep_m.steklov.eigenvalues if rep_m.steklov is not None else np.array([])
        if abs(lam_d0) <= zt:
            branch = "lambda_D0_zero"
            allowed = len(steklov) > 0 and abs(steklov[0]) <= zt
        elif lam_d0 > zt:
            branch = "lambda_D0_positive"
            allowed = len(steklov) > 1 and abs(steklov[1]) <= zt
        else:
            branch = "lambda_D0_negative"
            allowed = False
        geodesic = is_totally_geodesic(surface)
        applies = (not geodesic) and ind0_mod == 4
        names.append("area_index_dichotomy")
        flags.append(allowed if applies else True)
        _, gamma = _boundary_data(surface)
        if abs(gamma - 0.5 * np.pi) < 1e-12:
            spec_rep = build_index_problem(surface, "spectral", mesh=mesh).index(zero_tol, tol)
            names.append("spectral_index_at_least_one")
            flags.append(geodesic or spec_rep.ind >= 1)
        hypothesis = "free boundary" if abs(gamma - 0.5 * np.pi) < 1e-12 else "undetermined (wet-surface embeddedness)"
    else:
        hypothesis = "closed"
    return {
        "surface": surface.name,
        "flavor": "morse",
        "eigen_summary": {"morse": rep_a.summary(), "modified": rep_m.summary()},
        "a": rep_a.a,
        "b": rep_a.b,
        "ind": rep_a.ind,
        "ind_robin": rep_a.ind_robin,
        "nullity": rep_a.nullity,
        "ind0_modified": ind0_mod,
        "dichotomy_branch": branch,
        "boundary_integral_qA": float(qA),
        "rotationally_symmetric": rotational,
        "hypothesis_class": hypothesis,
        "theorem_checks": names,
        "consistent_with_theorems": [bool(f) for f in flags],
    }
