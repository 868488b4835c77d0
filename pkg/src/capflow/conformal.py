"""Conformal group of the round sphere S^n and of its geodesic caps.

Points of S^n are unit vectors in R^{n+1}; e_0 is the first coordinate
axis.  A conformal map is stored as a rotation composed with the ball
translation ``phi(y, .)`` and all formulas work for any n.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import DegenerateInputError, DomainError, NumericError

MODULE = "conformal_kernel"


def _vec(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=float)


def basis(i: int, dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector of R^{n+1}."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 1:
            raise DomainError("SpherePoint needs a 1-d vector", MODULE)
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise DomainError(f"|x| = {np.linalg.norm(c)!r} is not 1", MODULE)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    @property
    def dim(self) -> int:
        return self.coords.size - 1


@dataclass(frozen=True)
class Cap:
    """Geodesic ball of radius ``radius`` about ``center``."""

    center: SpherePoint
    radius: float

    def __post_init__(self):
        if not isinstance(self.center, SpherePoint):
            object.__setattr__(self, "center", SpherePoint(np.asarray(self.center)))
        if not 0.0 < self.radius < np.pi:
            raise DomainError(f"cap radius {self.radius!r} not in (0, pi)", MODULE)

    @classmethod
    def about_e0(cls, radius: float, dim: int = 3) -> "Cap":
        return cls(SpherePoint(basis(0, dim + 1)), float(radius))

    def distance(self, x) -> np.ndarray:
        """Geodesic distance from the center."""
        c = np.clip(_vec(x) @ self.center.coords, -1.0, 1.0)
        return np.arccos(c)

    def boundary_diameters(self) -> np.ndarray:
        """Endpoints cos R o +- sin R E_k of n orthogonal diameters, shape (2n, n+1)."""
        o = self.center.coords
        frame = tangent_frame(o)
        c, s = np.cos(self.radius), np.sin(self.radius)
        return np.concatenate([c * o + s * frame, c * o - s * frame])

    def outward_normal(self, x) -> np.ndarray:
        """Outward unit normal of the cap boundary at x, as a tangent vector of S^n."""
        x = _vec(x)
        o = self.center.coords
        u = (x @ o)[..., None]
        return -(o - u * x) / np.sin(self.radius)

    def to_json(self) -> dict:
        return {"center": self.center.coords.tolist(), "radius": self.radius}


def tangent_frame(o: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to o."""
    o = np.asarray(o, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([o, np.eye(o.size)]))
    frame = q[:, 1 : o.size].T
    return frame - np.outer(frame @ o, o)


@dataclass(frozen=True)
class MoebiusMap:
    """The map x -> rotation @ phi(y, x)."""

    rotation: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        y = np.array(self.y, dtype=float)
        d = y.size
        if rot.shape != (d, d):
            raise DomainError("rotation and y have mismatched sizes", MODULE)
        if np.max(np.abs(rot.T @ rot - np.eye(d))) > 1e-12:
            raise DomainError("rotation is not orthogonal", MODULE)
        if np.linalg.det(rot) < 0:
            raise DomainError("rotation has determinant -1", MODULE)
        if not np.linalg.norm(y) < 1.0:
            raise DomainError(f"|y| = {np.linalg.norm(y)!r} must be < 1", MODULE)
        rot.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "y", y)

    @classmethod
    def identity(cls, dim: int = 3) -> "MoebiusMap":
        return cls(np.eye(dim + 1), np.zeros(dim + 1))

    @classmethod
    def translation(cls, y) -> "MoebiusMap":
        y = np.asarray(y, dtype=float)
        return cls(np.eye(y.size), y)

    @classmethod
    def pure_rotation(cls, rotation) -> "MoebiusMap":
        rotation = np.asarray(rotation, dtype=float)
        return cls(rotation, np.zeros(rotation.shape[0]))

    @property
    def dim(self) -> int:
        return self.y.size - 1

    def __call__(self, x) -> np.ndarray:
        return moebius_apply(self, x)

    def to_json(self) -> dict:
        return {"rotation": self.rotation.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_json(cls, data) -> "MoebiusMap":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(np.asarray(data["rotation"], dtype=float), np.asarray(data["y"], dtype=float))


@dataclass(frozen=True)
class FlowSpec:
    """Conformal field V_a(x) = a - <x,a> x and its potential u_a(x) = <x,a>."""

    direction: SpherePoint
    dimension: int = 3

    def __post_init__(self):
        if not isinstance(self.direction, SpherePoint):
            object.__setattr__(self, "direction", SpherePoint.normalized(self.direction))
        if self.direction.coords.size != self.dimension + 1:
            raise DomainError("direction does not live in R^{n+1}", MODULE)

    @property
    def a(self) -> np.ndarray:
        return self.direction.coords

    def u(self, x) -> np.ndarray:
        return _vec(x) @ self.a

    def field(self, x) -> np.ndarray:
        x = _vec(x)
        return self.a - (x @ self.a)[..., None] * x

    def map_at(self, t: float) -> MoebiusMap:
        return MoebiusMap.translation(np.tanh(0.5 * t) * self.a)


def phi(y, x) -> np.ndarray:
    """Ball translation phi_y(x); broadcasts over leading axes of x."""
    y = np.asarray(y, dtype=float)
    x = _vec(x)
    xy = x @ y
    xx = np.sum(x * x, axis=-1)
    yy = y @ y
    den = 1.0 + 2.0 * xy + xx * yy
    if np.any(den < 1e-14):
        raise DegenerateInputError("denominator of phi_y vanishes", MODULE)
    num = (1.0 - yy) * x + (1.0 + 2.0 * xy + xx)[..., None] * y
    return num / den[..., None]


def moebius_apply(map: MoebiusMap, x) -> np.ndarray:
    """Evaluate rotation @ phi_y(x) for one point or an array of points."""
    return phi(map.y, x) @ map.rotation.T


def moebius_inverse(map: MoebiusMap) -> MoebiusMap:
    """Exact inverse: (R phi_y)^{-1} = R^T phi_{-R y}."""
    return MoebiusMap(map.rotation.T, -(map.rotation @ map.y))


def moebius_compose(f: MoebiusMap, g: MoebiusMap, tol: Tolerances = DEFAULT) -> MoebiusMap:
    """Return f o g, recovered from the images of the origin and the basis vectors.

    The image Y of the origin fixes the translation part; pulling the basis
    images back by phi_{-Y} gives the columns of the rotation.
    """
    d = f.y.size
    if g.y.size != d:
        raise DomainError("cannot compose maps of different dimension", MODULE)
    Y = moebius_apply(f, moebius_apply(g, np.zeros(d)))
    frame = moebius_apply(f, moebius_apply(g, np.eye(d)))
    cols = phi(-Y, frame).T
    cond = np.linalg.cond(cols)
    if not np.isfinite(cond) or cond > tol.frame_condition:
        raise NumericError(f"frame fit ill-conditioned (cond={cond:.3g})", MODULE)
    u, _, vt = np.linalg.svd(cols)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        raise NumericError("frame fit produced a reflection", MODULE)
    out = MoebiusMap(rot, rot.T @ Y)
    probe = np.full(d, 1.0 / np.sqrt(d))
    err = np.linalg.norm(moebius_apply(out, probe) - moebius_apply(f, moebius_apply(g, probe)))
    if err > 1e-8:
        raise NumericError(f"composed map misses the pointwise composition by {err:.3g}", MODULE)
    return out


def compose_all(*maps: MoebiusMap) -> MoebiusMap:
    """Compose left to right as written: compose_all(f, g, h) = f o g o h."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = moebius_compose(m, out)
    return out


def conformal_factor(map: MoebiusMap, x) -> np.ndarray:
    """Linear scale factor (1-|y|^2)/(1+2<x,y>+|x|^2|y|^2) of the map at x."""
    y = map.y
    x = _vec(x)
    yy = y @ y
    return (1.0 - yy) / (1.0 + 2.0 * (x @ y) + np.sum(x * x, axis=-1) * yy)


def moebius_d1(map: MoebiusMap, x, v) -> np.ndarray:
    """Differential of the map at x applied to v."""
    y = map.y
    x, v = _vec(x), np.asarray(v, dtype=float)
    yy = y @ y
    xy, xx = x @ y, np.sum(x * x, axis=-1)
    vy, xv = v @ y, np.sum(x * v, axis=-1)
    den = 1.0 + 2.0 * xy + xx * yy
    num = (1.0 - yy) * x + (1.0 + 2.0 * xy + xx)[..., None] * y
    dnum = (1.0 - yy) * v + (2.0 * vy + 2.0 * xv)[..., None] * y
    dden = 2.0 * vy + 2.0 * xv * yy
    out = dnum / den[..., None] - num * (dden / den**2)[..., None]
    return out @ map.rotation.T


def moebius_d2(map: MoebiusMap, x, v, w) -> np.ndarray:
    """Second differential of the map at x applied to (v, w)."""
    y = map.y
    x, v, w = _vec(x), np.asarray(v, dtype=float), np.asarray(w, dtype=float)
    yy = y @ y
    xy, xx = x @ y, np.sum(x * x, axis=-1)
    den = 1.0 + 2.0 * xy + xx * yy
    num = (1.0 - yy) * x + (1.0 + 2.0 * xy + xx)[..., None] * y

    def dnum(a):
        return (1.0 - yy) * a + (2.0 * (a @ y) + 2.0 * np.sum(x * a, axis=-1))[..., None] * y

    def dden(a):
        return 2.0 * (a @ y) + 2.0 * np.sum(x * a, axis=-1) * yy

    vw = np.sum(v * w, axis=-1)
    d2num = (2.0 * vw)[..., None] * y
    d2den = 2.0 * vw * yy
    dv, dw = dden(v), dden(w)
    out = (
        d2num / den[..., None]
        - (dnum(v) * dw[..., None] + dnum(w) * dv[..., None]) / (den**2)[..., None]
        - num * (d2den / den**2)[..., None]
        + num * (2.0 * dv * dw / den**3)[..., None]
    )
    return out @ map.rotation.T


def flow_point(spec: FlowSpec, t: float, x) -> np.ndarray:
    """Time-t flow of V_a, realised as phi_{tanh(t/2) a}."""
    return phi(np.tanh(0.5 * t) * spec.a, x)


def flow_potential(u0, t: float) -> np.ndarray:
    """Closed form u_a(x_t) = tanh(t + artanh u_a(x_0)) in its rational form."""
    s = np.tanh(0.5 * t)
    u0 = np.asarray(u0, dtype=float)
    return (2.0 * s + (1.0 + s * s) * u0) / (1.0 + s * s + 2.0 * s * u0)


def flow_conformal_factor_sq(spec: FlowSpec, t: float, x) -> np.ndarray:
    """e^{2 psi} = (1 - u(Psi x)^2) / (1 - u(x)^2) along the flow."""
    u = spec.u(x)
    ut = flow_potential(u, t)
    return (1.0 - ut**2) / (1.0 - u**2)


def image_cap(map: MoebiusMap, cap: Cap) -> Cap:
    """Image of a cap, reconstructed from the images of n orthogonal diameters.

    The image boundary is the intersection of S^n with an affine hyperplane
    <x, o'> = cos R'; it is fitted by the null vector of [points, -1].
    """
    pts = moebius_apply(map, cap.boundary_diameters())
    aug = np.column_stack([pts, -np.ones(len(pts))])
    _, sv, vt = np.linalg.svd(aug)
    w, c = vt[-1, :-1], vt[-1, -1]
    scale = np.linalg.norm(w)
    w, c = w / scale, c / scale
    inside = moebius_apply(map, cap.center.coords)
    if inside @ w < c:
        w, c = -w, -c
    if sv[-1] > 1e-8 * max(1.0, sv[0]):
        raise NumericError("mapped cap boundary is not a round sphere", MODULE)
    radius = float(np.arccos(np.clip(c, -1.0, 1.0)))
    return Cap(SpherePoint.normalized(w), radius)


def moving_radius_cot(radius: float, cos_alpha: float, t: float) -> float:
    """cot R_t = cot R cosh t - cos(alpha) csc R sinh t."""
    return np.cos(radius) / np.sin(radius) * np.cosh(t) - cos_alpha / np.sin(radius) * np.sinh(t)


def moving_radius_cot_rate(radius: float, cos_alpha: float, t: float) -> float:
    """Time derivative of cot R_t."""
    return np.cos(radius) / np.sin(radius) * np.sinh(t) - cos_alpha / np.sin(radius) * np.cosh(t)


def flow_cap(spec: FlowSpec, t: float, cap: Cap, tol: Tolerances = DEFAULT) -> Cap:
    """Cap carried by the flow for time t.

    The cap is rebuilt from tracked diameters, so nothing degenerates when
    R_t crosses pi/2; the closed-form radius serves as a cross-check.
    """
    moved = image_cap(spec.map_at(t), cap)
    cos_alpha = -float(cap.center.coords @ spec.a)
    cot_t = moving_radius_cot(cap.radius, cos_alpha, t)
    expected = np.arctan2(1.0, cot_t)
    if abs(expected - moved.radius) > tol.flow_radius:
        raise NumericError(
            f"tracked radius {moved.radius!r} disagrees with closed form {expected!r}", MODULE
        )
    return moved


def cap_normal_pairing(spec: FlowSpec, t: float, cap: Cap, x, tol: Tolerances = DEFAULT) -> np.ndarray:
    """<outer normal of the moved cap, V_a> at x on its boundary.

    Uses -d/dt cot R_t + u_a cot R_t, which extends continuously through
    R_t = pi/2.
    """
    x = _vec(x)
    moved = flow_cap(spec, t, cap, tol)
    gap = np.abs(x @ moved.center.coords - np.cos(moved.radius))
    if np.any(gap > tol.on_boundary):
        raise DomainError(f"point is {np.max(gap):.3g} away from the moved cap boundary", MODULE)
    cos_alpha = -float(cap.center.coords @ spec.a)
    cot_t = moving_radius_cot(cap.radius, cos_alpha, t)
    rate = moving_radius_cot_rate(cap.radius, cos_alpha, t)
    return -rate + spec.u(x) * cot_t


def s_radius(radius: float) -> float:
    """s_R = tan((pi/2 - R)/2); phi_{s_R e_0} sends the hemisphere onto the cap of radius R."""
    return float(np.tan(0.5 * (0.5 * np.pi - radius)))


def lies_on_slice(y, c: float, tol: float = 1e-10) -> bool:
    """Membership in S_c = {x : <x, e_0> = |x|^2 c}."""
    y = np.asarray(y, dtype=float)
    return bool(abs(y[0] - (y @ y) * c) <= tol)


def conf_cap_element(radius: float, rotation, y, tol: Tolerances = DEFAULT) -> MoebiusMap:
    """Rotation o phi_{s_R e0} o phi_y o phi_{-s_R e0}, a conformal automorphism of Cap(e0, R).

    ``rotation`` must fix e_0 and ``y`` must be orthogonal to e_0.
    """
    y = np.asarray(y, dtype=float)
    d = y.size
    rotation = np.asarray(rotation, dtype=float)
    if abs(y[0]) > 1e-12:
        raise DomainError("y must be orthogonal to e_0", MODULE)
    e0 = basis(0, d)
    if np.linalg.norm(rotation @ e0 - e0) > tol.orthogonality:
        raise DomainError("rotation must fix e_0", MODULE)
    s = s_radius(radius)
    return compose_all(
        MoebiusMap.pure_rotation(rotation),
        MoebiusMap.translation(s * e0),
        MoebiusMap.translation(y),
        MoebiusMap.translation(-s * e0),
    )


def cap_image_of_origin(radius: float, y) -> np.ndarray:
    """Closed form of conf_cap_element(R, I, y) applied to 0."""
    y = np.asarray(y, dtype=float)
    yy = y @ y
    c, s = np.cos(radius), np.sin(radius)
    return (yy * c * basis(0, y.size) + s * y) / (s * s + yy * c * c)


def plane_rotation(dim: int, i_vec, j_vec, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in the plane of orthonormal i_vec, j_vec (i_vec -> j_vec)."""
    i_vec, j_vec = np.asarray(i_vec, float), np.asarray(j_vec, float)
    c, s = np.cos(angle), np.sin(angle)
    return (
        np.eye(dim)
        + (c - 1.0) * (np.outer(i_vec, i_vec) + np.outer(j_vec, j_vec))
        + s * (np.outer(j_vec, i_vec) - np.outer(i_vec, j_vec))
    )


def realize_by_flow(Y, radius: float, tol: Tolerances = DEFAULT):
    """Write the cap automorphism sending 0 to Y as a rotation after a flow.

    Returns ``(spec, t, rotation)`` with spec.map_at(t) followed by
    ``rotation`` preserving Cap(e0, R) and sending the origin to Y.
    """
    Y = np.asarray(Y, dtype=float)
    d = Y.size
    e0 = basis(0, d)
    if not lies_on_slice(Y, np.cos(radius), tol.slice):
        raise DomainError("Y is not on the slice S_{cos R}", MODULE)
    norm = float(np.linalg.norm(Y))
    if norm == 0.0:
        return FlowSpec(SpherePoint(basis(1, d)), d - 1), 0.0, np.eye(d)
    if norm >= 1.0 - tol.artanh_clamp:
        warnings.warn("|Y| clamped below 1 before artanh", RuntimeWarning, stacklevel=2)
        norm = 1.0 - tol.artanh_clamp
    in_slice = Y - Y[0] * e0
    e1p = in_slice / np.linalg.norm(in_slice)
    unit = Y / np.linalg.norm(Y)
    alpha = float(np.arctan2(unit @ e1p, unit[0]))
    a = -np.cos(alpha) * e0 + np.sin(alpha) * e1p
    rotation = plane_rotation(d, e0, e1p, -(np.pi - 2.0 * alpha))
    t = 2.0 * float(np.arctanh(norm))
    return FlowSpec(SpherePoint.normalized(a), d - 1), t, rotation


def flow_realization_map(Y, radius: float) -> MoebiusMap:
    spec, t, rotation = realize_by_flow(Y, radius)
    return MoebiusMap(rotation, np.tanh(0.5 * t) * spec.a)


def stereographic(z) -> np.ndarray:
    """Inverse stereographic projection R^n -> S^n with the origin sent to e_0."""
    z = np.asarray(z, dtype=float)
    zz = np.sum(z * z, axis=-1)[..., None]
    return np.concatenate([(1.0 - zz), 2.0 * z], axis=-1) / (1.0 + zz)


def xi_R(z, radius: float) -> np.ndarray:
    """Unit ball to Cap(e0, R): stereographic projection followed by phi_{s_R e0}."""
    x = stereographic(z)
    return phi(s_radius(radius) * basis(0, x.shape[-1]), x)


def f_R(z, radius: float) -> np.ndarray:
    """Conformal factor of xi_R: 2 sin R / (1 + |z|^2 + (1 - |z|^2) cos R)."""
    z = np.asarray(z, dtype=float)
    zz = np.sum(z * z, axis=-1)
    return 2.0 * np.sin(radius) / (1.0 + zz + (1.0 - zz) * np.cos(radius))


def random_rotation(rng: np.random.Generator, dim: int, fix_e0: bool = False) -> np.ndarray:
    """Haar-random rotation of R^dim, optionally fixing e_0."""
    if fix_e0:
        out = np.eye(dim)
        out[1:, 1:] = random_rotation(rng, dim - 1)
        return out
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_ball_point(rng: np.random.Generator, dim: int, max_norm: float = 0.9) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v) * max_norm * rng.uniform() ** (1.0 / dim)


def random_sphere_point(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_moebius(rng: np.random.Generator, dim: int = 3, max_norm: float = 0.9) -> MoebiusMap:
    return MoebiusMap(random_rotation(rng, dim + 1), random_ball_point(rng, dim + 1, max_norm))


def random_cap_element(rng: np.random.Generator, radius: float, dim: int = 3, max_norm: float = 0.8) -> MoebiusMap:
    """Random automorphism of Cap(e0, R)."""
    y = np.zeros(dim + 1)
    y[1:] = random_ball_point(rng, dim, max_norm)
    return conf_cap_element(radius, random_rotation(rng, dim + 1, fix_e0=True), y)
