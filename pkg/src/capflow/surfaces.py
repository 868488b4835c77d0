"""Parametric surfaces in S^3: curvature, contact frames, pushforward, quadrature.

A surface is one chart on a parameter rectangle.  Sides of the rectangle
may be periodic, collapsed to a point (polar charts), or boundary.  All
evaluation is vectorised over arrays of parameter values.

Conventions: the normal is ``orientation * N(x, x_u, x_v)`` with N the
four-dimensional cross product, and A(X, Y) = <D_X nu, Y> = -<x_XY, nu>.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import conformal as cf
from .config import DEFAULT, Tolerances
from .errors import DomainError, InvariantViolation, NumericError

MODULE = "surface_geometry"

SIDES = ("u0", "u1", "v0", "v1")


@dataclass(frozen=True)
class Chart:
    """Immersion of a parameter rectangle, with optional analytic derivatives.

    ``first(u, v)`` returns (x_u, x_v) and ``second(u, v)`` returns
    (x_uu, x_uv, x_vv); missing ones fall back to central differences.
    """

    domain: tuple
    position: Callable
    first: Optional[Callable] = None
    second: Optional[Callable] = None
    periodic: tuple = (False, False)
    collapsed: tuple = ()
    fd_step: float = DEFAULT.fd_step
    fd_step_second: float = DEFAULT.fd_step_second

    @property
    def spans(self) -> tuple:
        (u0, u1), (v0, v1) = self.domain
        return u1 - u0, v1 - v0

    def derivatives(self, u, v, order: int = 2):
        """Return x, (x_u, x_v) and, for order 2, (x_uu, x_uv, x_vv)."""
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        x = self.position(u, v)
        if self.first is not None:
            xu, xv = self.first(u, v)
        else:
            hu, hv = self.fd_step * max(1.0, self.spans[0]), self.fd_step * max(1.0, self.spans[1])
            xu = (self.position(u + hu, v) - self.position(u - hu, v)) / (2 * hu)
            xv = (self.position(u, v + hv) - self.position(u, v - hv)) / (2 * hv)
        if order < 2:
            return x, (xu, xv)
        if self.second is not None:
            second = self.second(u, v)
        else:
            h = self.fd_step_second
            p = self.position
            xuu = (p(u + h, v) - 2 * x + p(u - h, v)) / h**2
            xvv = (p(u, v + h) - 2 * x + p(u, v - h)) / h**2
            xuv = (p(u + h, v + h) - p(u + h, v - h) - p(u - h, v + h) + p(u - h, v - h)) / (4 * h * h)
            second = (xuu, xuv, xvv)
        return x, (xu, xv), second

    def side_points(self, side: str, t):
        """Parameter values along a side, t running over the free coordinate."""
        (u0, u1), (v0, v1) = self.domain
        t = np.asarray(t, float)
        fixed = {"u0": u0, "u1": u1, "v0": v0, "v1": v1}[side]
        if side[0] == "u":
            return np.full_like(t, fixed), t
        return t, np.full_like(t, fixed)

    def side_range(self, side: str) -> tuple:
        (u0, u1), (v0, v1) = self.domain
        return (v0, v1) if side[0] == "u" else (u0, u1)


@dataclass(frozen=True)
class BoundaryLoop:
    sides: tuple
    tag: int = 0


@dataclass(frozen=True)
class ParametricSurface:
    """Immersed surface with optional contact data.

    ``wet`` holds one wet-region surface per boundary loop (or None); each
    wet chart has boundary side ``u1`` parametrised like the loop it bounds.
    """

    name: str
    chart: Chart
    loops: tuple = ()
    contact_angle: Optional[float] = None
    ambient_cap: Optional[cf.Cap] = None
    wet: Optional[tuple] = None
    orientation: int = 1
    ambient: str = "sphere"
    symmetry: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    base: Optional["ParametricSurface"] = None
    map: Optional[cf.MoebiusMap] = None

    @property
    def charts(self) -> list:
        return [self.chart]

    @property
    def closed(self) -> bool:
        return not self.loops

    @property
    def radius(self) -> float:
        if self.ambient_cap is None:
            raise DomainError(f"{self.name} has no ambient cap", MODULE)
        return self.ambient_cap.radius

    @property
    def gamma(self) -> float:
        if self.contact_angle is None:
            raise DomainError(f"{self.name} has no contact angle", MODULE)
        return self.contact_angle

    def boundary_sides(self):
        for loop in self.loops:
            for side in loop.sides:
                yield loop, side


def cross4(a, b, c) -> np.ndarray:
    """Vector n with det[a, b, c, n] = |n|^2, orthogonal to a, b, c in R^4."""
    m = np.stack([a, b, c], axis=-2)
    cols = [np.delete(m, i, axis=-1) for i in range(4)]
    return np.stack([(-1) ** (3 + i) * np.linalg.det(cols[i]) for i in range(4)], axis=-1)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def unit_normal(surface: ParametricSurface, x, xu, xv) -> np.ndarray:
    if surface.ambient == "sphere":
        n = cross4(x, xu, xv)
    else:
        if x.shape[-1] != 3:
            raise DomainError("normals of euclidean charts need R^3", MODULE)
        n = np.cross(xu, xv)
    return surface.orientation * _normalize(n)


@dataclass(frozen=True)
class CurvaturePack:
    """Curvature data at a batch of parameter points (leading axes broadcast)."""

    metric: np.ndarray
    A: np.ndarray
    H: np.ndarray
    A_norm2: np.ndarray
    traceless_norm2: np.ndarray
    K: np.ndarray
    K_gauss: np.ndarray
    normal: np.ndarray
    principal: np.ndarray


def _metric(xu, xv):
    E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
    return E, F, G


def _brioschi(chart: Chart, u, v, step: float = 1e-4):
    """Intrinsic Gaussian curvature from metric coefficients only."""
    h = step

    def met(du, dv):
        _, (xu, xv) = chart.derivatives(u + du, v + dv, order=1)
        return np.stack(_metric(xu, xv))

    m00 = met(0, 0)
    mp0, mm0 = met(h, 0), met(-h, 0)
    m0p, m0m = met(0, h), met(0, -h)
    mpp, mpm, mmp, mmm = met(h, h), met(h, -h), met(-h, h), met(-h, -h)
    E, F, G = m00
    d_u = (mp0 - mm0) / (2 * h)
    d_v = (m0p - m0m) / (2 * h)
    Eu, Fu, Gu = d_u
    Ev, Fv, Gv = d_v
    Evv = (m0p[0] - 2 * E + m0m[0]) / h**2
    Guu = (mp0[2] - 2 * G + mm0[2]) / h**2
    Fuv = (mpp[1] - mpm[1] - mmp[1] + mmm[1]) / (4 * h * h)
    m1 = np.stack(
        [
            np.stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev], -1),
            np.stack([Fv - 0.5 * Gu, E, F], -1),
            np.stack([0.5 * Gv, F, G], -1),
        ],
        -2,
    )
    zero = np.zeros_like(E)
    m2 = np.stack(
        [
            np.stack([zero, 0.5 * Ev, 0.5 * Gu], -1),
            np.stack([0.5 * Ev, E, F], -1),
            np.stack([0.5 * Gu, F, G], -1),
        ],
        -2,
    )
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (E * G - F * F) ** 2


def fundamental_forms(surface: ParametricSurface, uv, tol: Tolerances = DEFAULT, intrinsic_K: bool = True) -> CurvaturePack:
    """First and second fundamental forms and derived curvatures at uv.

    ``uv`` is a pair (u, v) of scalars or equal-shape arrays.
    """
    u, v = uv
    x, (xu, xv), (xuu, xuv, xvv) = surface.chart.derivatives(u, v)
    E, F, G = _metric(xu, xv)
    det_g = E * G - F * F
    if np.any(det_g <= tol.metric_det):
        raise NumericError("degenerate immersion: det g below threshold", MODULE)
    nu = unit_normal(surface, x, xu, xv)
    L, M, N = -_dot(xuu, nu), -_dot(xuv, nu), -_dot(xvv, nu)
    g = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
    A = np.stack([np.stack([L, M], -1), np.stack([M, N], -1)], -2)
    shape = np.linalg.solve(g, A)
    H = np.trace(shape, axis1=-2, axis2=-1)
    A2 = np.einsum("...ij,...ji->...", shape, shape)
    det_s = (L * N - M * M) / det_g
    disc = np.sqrt(np.maximum(0.25 * H * H - det_s, 0.0))
    principal = np.stack([0.5 * H - disc, 0.5 * H + disc], -1)
    curv_ext = (1.0 if surface.ambient == "sphere" else 0.0) + det_s
    K = _brioschi(surface.chart, u, v) if intrinsic_K else curv_ext
    return CurvaturePack(
        metric=g,
        A=A,
        H=H,
        A_norm2=A2,
        traceless_norm2=A2 - 0.5 * H * H,
        K=K,
        K_gauss=curv_ext,
        normal=nu,
        principal=principal,
    )


@dataclass(frozen=True)
class BoundaryFrame:
    """Orthonormal frames of the normal bundle of the boundary curve."""

    x: np.ndarray
    tangent: np.ndarray
    eta: np.ndarray
    nu: np.ndarray
    eta_bar: np.ndarray
    nu_bar: np.ndarray
    gamma_measured: np.ndarray
    speed: np.ndarray
    curvature_vector: np.ndarray


def _outward_sign(side: str) -> float:
    return 1.0 if side.endswith("1") else -1.0


def boundary_frame(
    surface: ParametricSurface, side: str, t, check: bool = True, tol: Tolerances = DEFAULT
) -> BoundaryFrame:
    """Contact frame at boundary points ``t`` of ``side``.

    nu_bar is sin(g) nu - cos(g) eta, i.e. the normalised barrier projection
    of -(eta - sin(g) eta_bar); at g = pi/2 this is the completing normal nu.
    """
    if surface.ambient_cap is None:
        raise DomainError("boundary frame needs an ambient cap", MODULE)
    u, v = surface.chart.side_points(side, t)
    x, (xu, xv), (xuu, xuv, xvv) = surface.chart.derivatives(u, v)
    along, across, second = (xv, xu, xvv) if side[0] == "u" else (xu, xv, xuu)
    speed = np.linalg.norm(along, axis=-1)
    T = along / speed[..., None]
    out = _outward_sign(side) * across
    eta = _normalize(out - _dot(out, T)[..., None] * T)
    nu = unit_normal(surface, x, xu, xv)
    eta_bar = surface.ambient_cap.outward_normal(x)
    s, c = _dot(eta, eta_bar), _dot(nu, eta_bar)
    gamma = np.arctan2(s, c)
    nu_bar = _normalize(np.sin(gamma)[..., None] * nu - np.cos(gamma)[..., None] * eta)
    kvec = (second - _dot(second, T)[..., None] * T) / (speed**2)[..., None]
    kvec = kvec + x if surface.ambient == "sphere" else kvec
    frame = BoundaryFrame(x, T, eta, nu, eta_bar, nu_bar, gamma, speed, kvec)
    if check and surface.contact_angle is not None:
        dev = np.max(np.abs(gamma - surface.contact_angle))
        if dev > tol.contact_angle:
            raise InvariantViolation(
                f"{surface.name}: measured contact angle deviates by {dev:.3g}", MODULE
            )
    return frame


def wet_conormal(surface: ParametricSurface, loop_index: int, t) -> np.ndarray:
    """Outward conormal of the wet region along its boundary side u1."""
    wet = surface.wet[loop_index]
    u, v = wet.chart.side_points("u1", t)
    x, (xu, xv) = wet.chart.derivatives(u, v, order=1)
    T = _normalize(xv)
    return _normalize(xu - _dot(xu, T)[..., None] * T)


def boundary_curvatures(surface: ParametricSurface, side: str, t) -> dict:
    """Pointwise boundary quantities entering the contact identities."""
    fr = boundary_frame(surface, side, t, check=False)
    u, v = surface.chart.side_points(side, t)
    pack = fundamental_forms(surface, (u, v), intrinsic_K=False)
    _, (xu, xv) = surface.chart.derivatives(u, v, order=1)
    # express eta and T in the coordinate basis to evaluate A
    basis = np.stack([xu, xv], -1)
    coef_eta = _solve_tangent(basis, fr.eta)
    coef_T = _solve_tangent(basis, fr.tangent)
    A_eta = np.einsum("...i,...ij,...j->...", coef_eta, pack.A, coef_eta)
    A_T = np.einsum("...i,...ij,...j->...", coef_T, pack.A, coef_T)
    cot_r = 1.0 / np.tan(surface.radius)
    return {
        "A_eta_eta": A_eta,
        "A_TT": A_T,
        "H": pack.H,
        "k_S_TT": np.full_like(A_T, cot_r),
        "h_eta": -_dot(fr.curvature_vector, fr.eta),
        "h_nu_bar": -_dot(fr.curvature_vector, fr.nu_bar),
        "gamma": fr.gamma_measured,
        "frame": fr,
    }


def _solve_tangent(basis, vec):
    """Coefficients c with basis @ c = vec (least squares, basis shape (..., d, 2))."""
    gram = np.einsum("...ki,...kj->...ij", basis, basis)
    rhs = np.einsum("...ki,...k->...i", basis, vec)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def check_boundary_curvature_identities(surface: ParametricSurface, samples: int = 64) -> dict:
    """Residuals of the pointwise and traced contact identities on every boundary side."""
    if surface.contact_angle is None or surface.ambient_cap is None:
        raise DomainError("contact data required", MODULE)
    res = {"k_S": 0.0, "A_from_k_S": 0.0, "traced_barrier": 0.0, "traced_surface": 0.0, "three_way": 0.0}
    cot_r = 1.0 / np.tan(surface.radius)
    for _, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        t = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
        bc = boundary_curvatures(surface, side, t)
        g = bc["gamma"]
        sg, cg = np.sin(g), np.cos(g)
        h_eta, h_nb = bc["h_eta"], bc["h_nu_bar"]
        H_minus = bc["H"] - bc["A_eta_eta"]
        res["k_S"] = max(res["k_S"], np.max(np.abs(cot_r - (cg * bc["A_TT"] + sg * h_eta))))
        res["A_from_k_S"] = max(res["A_from_k_S"], np.max(np.abs(bc["A_TT"] - (cg * cot_r + sg * h_nb))))
        res["traced_barrier"] = max(res["traced_barrier"], np.max(np.abs(cot_r - (cg * H_minus + sg * h_eta))))
        res["traced_surface"] = max(res["traced_surface"], np.max(np.abs(H_minus - (cg * cot_r + sg * h_nb))))
        lhs = cg / sg * H_minus
        mid = cot_r / sg - h_eta
        rhs = cg * cg / sg * cot_r + cg * h_nb
        res["three_way"] = max(res["three_way"], np.max(np.abs(lhs - mid)), np.max(np.abs(mid - rhs)))
    res["max_residual"] = max(res.values())
    return res


# --------------------------------------------------------------------------
# pushforward


def _chain_chart(chart: Chart, fn, d1, d2) -> Chart:
    """Chart of fn o chart, with derivatives by the chain rule."""

    def position(u, v):
        return fn(chart.position(u, v))

    def first(u, v):
        x, (xu, xv) = chart.derivatives(u, v, order=1)
        return d1(x, xu), d1(x, xv)

    def second(u, v):
        x, (xu, xv), (xuu, xuv, xvv) = chart.derivatives(u, v)
        return (
            d2(x, xu, xu) + d1(x, xuu),
            d2(x, xu, xv) + d1(x, xuv),
            d2(x, xv, xv) + d1(x, xvv),
        )

    return replace(chart, position=position, first=first, second=second)


def _moebius_chart(chart: Chart, m: cf.MoebiusMap) -> Chart:
    return _chain_chart(
        chart,
        lambda x: cf.moebius_apply(m, x),
        lambda x, a: cf.moebius_d1(m, x, a),
        lambda x, a, b: cf.moebius_d2(m, x, a, b),
    )


def pushforward_surface(m: cf.MoebiusMap, surface: ParametricSurface) -> ParametricSurface:
    """Image of ``surface`` under a conformal map of S^3.

    The cap is kept if the map preserves it and otherwise replaced by its
    image.  Contact angle and orientation carry over since the map is
    conformal and orientation preserving.
    """
    if surface.ambient != "sphere":
        raise DomainError("pushforward needs a surface in S^3", MODULE)
    cap = surface.ambient_cap
    if cap is not None:
        moved = cf.image_cap(m, cap)
        same = abs(moved.radius - cap.radius) < 1e-10 and np.linalg.norm(
            moved.center.coords - cap.center.coords
        ) < 1e-10
        cap = cap if same else moved
    wet = None
    if surface.wet is not None:
        wet = tuple(None if w is None else pushforward_surface(m, w) for w in surface.wet)
    return replace(
        surface,
        name=f"{surface.name}*",
        chart=_moebius_chart(surface.chart, m),
        ambient_cap=cap,
        wet=wet,
        base=surface,
        map=m,
    )


def flow_surface(surface: ParametricSurface, spec: cf.FlowSpec, t: float) -> ParametricSurface:
    return pushforward_surface(spec.map_at(t), surface)


def predicted_pushforward_curvature(m: cf.MoebiusMap, surface: ParametricSurface, uv) -> dict:
    """Curvature of the image predicted from the base and the conformal factor.

    A*_ij = e^psi (A_ij + g_ij d_nu psi), H* = e^-psi (H + 2 d_nu psi),
    |A°*|^2 = e^-2psi |A°|^2.
    """
    u, v = uv
    pack = fundamental_forms(surface, uv, intrinsic_K=False)
    x = surface.chart.position(np.asarray(u, float), np.asarray(v, float))
    y = m.y
    den = 1.0 + 2.0 * (x @ y) + y @ y
    e_psi = (1.0 - y @ y) / den
    dpsi = -2.0 * (pack.normal @ y) / den
    return {
        "A": e_psi[..., None, None] * (pack.A + pack.metric * dpsi[..., None, None]),
        "H": (pack.H + 2.0 * dpsi) / e_psi,
        "traceless_norm2": pack.traceless_norm2 / e_psi**2,
        "conformal_factor": e_psi,
    }


# --------------------------------------------------------------------------
# builtin surfaces

E = np.eye(4)


def _polar_cap_chart(center, e1, e2, radius_param: float, scale: float = 1.0, offset=None) -> Chart:
    """offset + scale (cos r center + sin r (cos th e1 + sin th e2)), r in [0, radius_param]."""
    center, e1, e2 = (np.asarray(a, float) for a in (center, e1, e2))
    off = np.zeros_like(center) if offset is None else np.asarray(offset, float)

    def pos(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        return off + scale * (np.cos(r) * center + np.sin(r) * (np.cos(th) * e1 + np.sin(th) * e2))

    def first(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        ring = np.cos(th) * e1 + np.sin(th) * e2
        dring = -np.sin(th) * e1 + np.cos(th) * e2
        return scale * (-np.sin(r) * center + np.cos(r) * ring), scale * np.sin(r) * dring

    def second(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        ring = np.cos(th) * e1 + np.sin(th) * e2
        dring = -np.sin(th) * e1 + np.cos(th) * e2
        return (
            scale * (-np.cos(r) * center - np.sin(r) * ring),
            scale * np.cos(r) * dring,
            -scale * np.sin(r) * ring,
        )

    return Chart(((0.0, radius_param), (0.0, 2 * np.pi)), pos, first, second, (False, True), ("u0",))


def _orientation_for(chart: Chart, target_normal, uv=(0.3, 0.4)) -> int:
    x, (xu, xv) = chart.derivatives(np.array(uv[0]), np.array(uv[1]), order=1)
    n = cross4(x, xu, xv)
    return 1 if n @ np.asarray(target_normal) > 0 else -1


def cap_boundary_wet(cap: cf.Cap, pole, frame, angular_radius: float) -> ParametricSurface:
    """Round disc of the barrier sphere bounded by a circular contact loop.

    ``pole`` is a unit vector orthogonal to the cap center marking the middle
    of the disc and ``frame`` a pair of unit vectors completing it.
    """
    o = cap.center.coords
    chart = _polar_cap_chart(pole, frame[0], frame[1], angular_radius, np.sin(cap.radius), np.cos(cap.radius) * o)
    return ParametricSurface(
        name="wet",
        chart=chart,
        loops=(BoundaryLoop(("u1",), 0),),
        ambient_cap=None,
        params={"angular_radius": angular_radius},
    )


def half_equator(radius: float = np.pi / 2, gamma: float = np.pi / 2) -> ParametricSurface:
    """Totally geodesic disc in Cap(e0, R) meeting the barrier at angle gamma.

    It is the part of the great sphere with normal m = m0 e0 + m3 e3,
    m0 = -sin R cos gamma, lying in the cap.
    """
    if not 0 < gamma <= np.pi / 2:
        raise DomainError("gamma must lie in (0, pi/2]", MODULE)
    cap = cf.Cap.about_e0(radius)
    m0 = -np.sin(radius) * np.cos(gamma)
    m3 = np.sqrt(1.0 - m0 * m0)
    normal = m0 * E[0] + m3 * E[3]
    pole = m3 * E[0] - m0 * E[3]
    rho_max = float(np.arccos(np.cos(radius) / m3))
    chart = _polar_cap_chart(pole, E[1], E[2], rho_max)
    orientation = _orientation_for(chart, normal)
    c = np.cos(radius) * np.cos(gamma) / m3
    wet = cap_boundary_wet(cap, -E[3], (E[1], E[2]), float(np.arccos(-c)))
    return ParametricSurface(
        name="half_equator",
        chart=chart,
        loops=(BoundaryLoop(("u1",), 0),),
        contact_angle=float(gamma),
        ambient_cap=cap,
        wet=(wet,),
        orientation=orientation,
        symmetry={"rotational": True, "totally_geodesic": True, "axis": "v"},
        params={"R": float(radius), "gamma": float(gamma)},
    )


def _clifford_chart(s_range) -> Chart:
    r = 1.0 / np.sqrt(2.0)

    def pos(s, t):
        return r * np.stack([np.cos(s), np.sin(s), np.cos(t), np.sin(t)], -1)

    def first(s, t):
        z = np.zeros_like(np.asarray(s, float) + np.asarray(t, float))
        return (
            r * np.stack([-np.sin(s), np.cos(s), z, z], -1),
            r * np.stack([z, z, -np.sin(t), np.cos(t)], -1),
        )

    def second(s, t):
        z = np.zeros_like(np.asarray(s, float) + np.asarray(t, float))
        return (
            r * np.stack([-np.cos(s), -np.sin(s), z, z], -1),
            np.zeros(z.shape + (4,)),
            r * np.stack([z, z, -np.cos(t), -np.sin(t)], -1),
        )

    periodic_s = s_range[1] - s_range[0] >= 2 * np.pi - 1e-15
    return Chart((s_range, (0.0, 2 * np.pi)), pos, first, second, (periodic_s, True))


def half_clifford_torus() -> ParametricSurface:
    """(cos s, sin s, cos t, sin t)/sqrt2 with |s| <= pi/2, free boundary in the hemisphere."""
    chart = _clifford_chart((-np.pi / 2, np.pi / 2))
    target = np.array([1.0, 0.0, -1.0, 0.0]) / np.sqrt(2.0)
    orientation = _orientation_for(chart, target, uv=(0.0, 0.0))
    return ParametricSurface(
        name="half_clifford_torus",
        chart=chart,
        loops=(BoundaryLoop(("u0",), 0), BoundaryLoop(("u1",), 1)),
        contact_angle=np.pi / 2,
        ambient_cap=cf.Cap.about_e0(np.pi / 2),
        orientation=orientation,
        symmetry={"rotational": True, "axis": "v"},
    )


def clifford_torus() -> ParametricSurface:
    chart = _clifford_chart((0.0, 2 * np.pi))
    target = np.array([1.0, 0.0, -1.0, 0.0]) / np.sqrt(2.0)
    return ParametricSurface(
        name="clifford_torus",
        chart=chart,
        orientation=_orientation_for(chart, target, uv=(0.0, 0.0)),
        symmetry={"rotational": True, "axis": "v"},
    )


def _inversion_parts():
    """w -> 2 w/|w|^2 - e0 and its first two differentials (w = e0 + z)."""

    def f(w):
        ww = _dot(w, w)[..., None]
        return 2.0 * w / ww - E[0]

    def d1(w, a):
        ww = _dot(w, w)[..., None]
        return 2.0 * (a / ww - 2.0 * _dot(w, a)[..., None] * w / ww**2)

    def d2(w, a, b):
        ww = _dot(w, w)[..., None]
        wa, wb, ab = (_dot(w, a)[..., None], _dot(w, b)[..., None], _dot(a, b)[..., None])
        return 2.0 * (-2.0 * wb * a / ww**2 - 2.0 * wa * b / ww**2 - 2.0 * ab * w / ww**2 + 8.0 * wa * wb * w / ww**3)

    return f, d1, d2


def flat_disc_chart(dim: int = 2, radius: float = 1.0, offset=None) -> Chart:
    """Polar chart of the flat disc of given radius in the first two axes of R^dim."""
    e = np.eye(dim)
    off = np.zeros(dim) if offset is None else np.asarray(offset, float)

    def pos(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        return off + r * (np.cos(th) * e[0] + np.sin(th) * e[1])

    def first(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        return np.cos(th) * e[0] + np.sin(th) * e[1] + 0 * r, r * (-np.sin(th) * e[0] + np.cos(th) * e[1])

    def second(r, th):
        r, th = np.asarray(r)[..., None], np.asarray(th)[..., None]
        z = np.zeros(np.broadcast(r, th).shape[:-1] + (dim,))
        return z, -np.sin(th) * e[0] + np.cos(th) * e[1] + 0 * r, -r * (np.cos(th) * e[0] + np.sin(th) * e[1])

    return Chart(((0.0, radius), (0.0, 2 * np.pi)), pos, first, second, (False, True), ("u0",))


def flat_disc(dim: int = 2) -> ParametricSurface:
    """Unit disc of the Euclidean plane (used as a chart into the unit ball when dim = 3)."""
    return ParametricSurface(
        name="flat_disc",
        chart=flat_disc_chart(dim),
        loops=(BoundaryLoop(("u1",), 0),),
        ambient="euclidean",
        symmetry={"rotational": True, "axis": "v"},
    )


def unit_square() -> ParametricSurface:
    def pos(u, v):
        return np.stack([u, v], -1)

    chart = Chart(((0.0, 1.0), (0.0, 1.0)), pos)
    return ParametricSurface(
        name="unit_square",
        chart=chart,
        loops=(BoundaryLoop(("v0", "u1", "v1", "u0"), 0),),
        ambient="euclidean",
    )


def ball_chart_in_cap(euclidean: ParametricSurface, radius: float) -> ParametricSurface:
    """Transplant a chart in the unit ball of R^3 into Cap(e0, R) by xi_R."""
    if euclidean.ambient != "euclidean" or euclidean.chart.position(np.array(0.5), np.array(0.5)).shape[-1] != 3:
        raise DomainError("expected a chart into R^3", MODULE)
    inner = euclidean.chart

    def lift(u, v):
        return np.concatenate([np.ones(np.shape(u) + (1,)), inner.position(u, v)], -1)

    def lift_first(u, v):
        _, (zu, zv) = inner.derivatives(u, v, order=1)
        pad = np.zeros(np.shape(zu)[:-1] + (1,))
        return np.concatenate([pad, zu], -1), np.concatenate([pad, zv], -1)

    def lift_second(u, v):
        _, _, sec = inner.derivatives(u, v)
        pad = np.zeros(np.shape(sec[0])[:-1] + (1,))
        return tuple(np.concatenate([pad, s], -1) for s in sec)

    lifted = replace(inner, position=lift, first=lift_first, second=lift_second)
    f, d1, d2 = _inversion_parts()
    stereo = _chain_chart(lifted, f, d1, d2)
    shift = cf.MoebiusMap.translation(cf.s_radius(radius) * E[0])
    chart = _moebius_chart(stereo, shift)
    probe = np.array(0.3), np.array(0.4)
    x, (xu, xv) = chart.derivatives(*probe, order=1)
    orientation = 1 if cross4(x, xu, xv) @ E[3] > 0 else -1
    return ParametricSurface(
        name=f"{euclidean.name}_in_ball",
        chart=chart,
        loops=euclidean.loops,
        contact_angle=np.pi / 2 if euclidean.loops else None,
        ambient_cap=cf.Cap.about_e0(radius),
        orientation=orientation,
        symmetry=dict(euclidean.symmetry),
        params={"R": float(radius)},
    )


def disc_in_ball(radius: float) -> ParametricSurface:
    """Image of the flat unit disc under xi_R: free boundary in Cap(e0, R)."""
    return ball_chart_in_cap(flat_disc(3), radius)


_BUILTINS = {
    "half_equator": half_equator,
    "half_clifford_torus": half_clifford_torus,
    "half_clifford": half_clifford_torus,
    "clifford_torus": clifford_torus,
    "clifford": clifford_torus,
    "disc_in_ball": disc_in_ball,
    "flat_disc": flat_disc,
    "unit_square": unit_square,
    "cap_boundary_wet": cap_boundary_wet,
}


def builtin_surface(name: str, **params) -> ParametricSurface:
    """Look up a builtin by name (hyphens and underscores are interchangeable)."""
    key = name.replace("-", "_")
    if key not in _BUILTINS:
        raise DomainError(f"unknown surface {name!r}; choose from {sorted(_BUILTINS)}", MODULE)
    return _BUILTINS[key](**params)


# --------------------------------------------------------------------------
# quadrature


class SurfaceSample:
    """Quadrature nodes of an interior region with lazily computed geometry."""

    def __init__(self, surface: ParametricSurface, u, v, weights):
        self.surface, self.u, self.v, self.weights = surface, u, v, weights
        self.x, (self.xu, self.xv) = surface.chart.derivatives(u, v, order=1)
        E_, F_, G_ = _metric(self.xu, self.xv)
        self.area_element = np.sqrt(np.maximum(E_ * G_ - F_ * F_, 0.0))

    @cached_property
    def normal(self):
        return unit_normal(self.surface, self.x, self.xu, self.xv)

    @cached_property
    def curvature(self) -> CurvaturePack:
        return fundamental_forms(self.surface, (self.u, self.v))


class BoundarySample:
    """Quadrature nodes along boundary sides."""

    def __init__(self, surface: ParametricSurface, side: str, loop: BoundaryLoop, t, weights):
        self.surface, self.side, self.loop, self.t, self.weights = surface, side, loop, t, weights
        self.u, self.v = surface.chart.side_points(side, t)
        self.x, (xu, xv) = surface.chart.derivatives(self.u, self.v, order=1)
        along = xv if side[0] == "u" else xu
        self.length_element = np.linalg.norm(along, axis=-1)

    @cached_property
    def frame(self) -> BoundaryFrame:
        return boundary_frame(self.surface, self.side, self.t, check=False)


def gauss_legendre_nodes(lo: float, hi: float, cells: int, order: int):
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, cells + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def default_cells(surface: ParametricSurface, tol: Tolerances = DEFAULT) -> tuple:
    su, sv = surface.chart.spans
    return max(2, int(np.ceil(su / tol.quad_h))), max(2, int(np.ceil(sv / tol.quad_h)))


def _eval(integrand, sample):
    if callable(integrand):
        return np.asarray(integrand(sample), float)
    return np.full(np.shape(sample.weights), float(integrand))


def integrate(
    surface: ParametricSurface,
    integrand=1.0,
    region: str = "interior",
    cells: Optional[Sequence[int]] = None,
    order: Optional[int] = None,
    tol: Tolerances = DEFAULT,
) -> float:
    """Tensor Gauss-Legendre quadrature over the interior, boundary or wet region.

    ``integrand`` is a constant or a callable receiving a SurfaceSample or
    BoundarySample and returning values at its nodes.
    """
    order = order or tol.quad_order
    cells = tuple(cells) if cells is not None else default_cells(surface, tol)
    if region == "interior":
        (u0, u1), (v0, v1) = surface.chart.domain
        nu_, wu = gauss_legendre_nodes(u0, u1, cells[0], order)
        nv_, wv = gauss_legendre_nodes(v0, v1, cells[1], order)
        U, V = np.meshgrid(nu_, nv_, indexing="ij")
        W = np.outer(wu, wv)
        sample = SurfaceSample(surface, U, V, W)
        return float(np.sum(_eval(integrand, sample) * sample.area_element * W))
    if region == "boundary":
        total = 0.0
        for loop, side in surface.boundary_sides():
            lo, hi = surface.chart.side_range(side)
            n_side = cells[1] if side[0] == "u" else cells[0]
            t, w = gauss_legendre_nodes(lo, hi, n_side, order)
            sample = BoundarySample(surface, side, loop, t, w)
            total += float(np.sum(_eval(integrand, sample) * sample.length_element * w))
        return total
    if region == "wet":
        if surface.wet is None:
            raise DomainError(f"{surface.name} has no wet region", MODULE)
        return float(sum(integrate(w, integrand, "interior", None, order, tol) for w in surface.wet if w is not None))
    raise DomainError(f"unknown region {region!r}", MODULE)


def area(surface: ParametricSurface, **kw) -> float:
    return integrate(surface, 1.0, "interior", **kw)


def boundary_length(surface: ParametricSurface, **kw) -> float:
    return integrate(surface, 1.0, "boundary", **kw)


def wet_area(surface: ParametricSurface, **kw) -> float:
    return integrate(surface, 1.0, "wet", **kw)


def gauss_bonnet_terms(surface: ParametricSurface, cells=None) -> dict:
    """Curvature integral and boundary geodesic-curvature integral."""
    interior = integrate(surface, lambda s: s.curvature.K, "interior", cells)
    geodesic = 0.0
    if not surface.closed:
        geodesic = integrate(surface, lambda b: -_dot(b.frame.curvature_vector, b.frame.eta), "boundary", cells)
    return {"curvature": interior, "geodesic": geodesic, "total": interior + geodesic}
