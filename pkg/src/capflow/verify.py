"""Self-check suites run by ``capflow verify``.

Each suite is a list of quick checks against closed forms. The pytest suite
under tests/ is the thorough version; these exist so an installed copy can
be sanity-checked without the repository.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import conformal as cf
from . import functionals as fn
from . import index_lab as il
from . import spectral as sp
from . import surfaces as sg
from .config import DEFAULT, Tolerances
from .errors import DomainError
from .mesh import mesh_parametric

MODULE = "cli_reports"


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    ok: bool

    def to_json(self) -> dict:
        return {"name": self.name, "value": float(self.value), "limit": float(self.limit), "ok": bool(self.ok)}


def _at_most(name, value, limit) -> Check:
    return Check(name, float(value), float(limit), bool(value <= limit))


def conformal_suite(seed: int = 0, tol: Tolerances = DEFAULT) -> list:
    rng = np.random.default_rng(seed)
    inverse_err = equidistance_err = radius_err = slice_err = 0.0
    for _ in range(50):
        y = cf.random_ball_point(rng, 4)
        x = cf.random_sphere_point(rng, 4)
        m = cf.MoebiusMap.translation(y)
        back = cf.phi(-y, cf.phi(y, x))
        inverse_err = max(inverse_err, np.linalg.norm(back - x))
        cap = cf.Cap(cf.random_sphere_point(rng, 4), rng.uniform(0.3, 2.8))
        moved = cf.image_cap(m, cap)
        pts = m(cap.boundary_diameters())
        equidistance_err = max(equidistance_err, np.ptp(pts @ moved.center.coords))
        spec = cf.FlowSpec(cf.random_sphere_point(rng, 4))
        t = rng.uniform(0.0, 2.0)
        cos_alpha = -float(cap.center.coords @ spec.a)
        expected = np.arctan2(1.0, cf.moving_radius_cot(cap.radius, cos_alpha, t))
        radius_err = max(radius_err, abs(cf.flow_cap(spec, t, cap, tol).radius - expected))
        R = rng.uniform(0.3, 1.5)
        g = cf.conf_cap_element(R, cf.random_rotation(rng, 4, fix_e0=True), np.r_[0.0, cf.random_ball_point(rng, 3, 0.8)])
        img = g(cf.Cap.about_e0(R).boundary_diameters())
        slice_err = max(slice_err, np.max(np.abs(img[:, 0] - np.cos(R))))

    spec = cf.FlowSpec(cf.random_sphere_point(rng, 4))
    x0 = cf.random_sphere_point(rng, 4)
    sol = solve_ivp(lambda _, x: spec.field(x), (0.0, 2.0), x0, method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
    ts = np.linspace(0.0, 2.0, 21)
    flow_err = max(np.linalg.norm(sol.sol(t) - cf.flow_point(spec, t, x0)) for t in ts)
    return [
        _at_most("phi_y o phi_-y = id", inverse_err, 1e-9),
        _at_most("image cap boundary equidistant", equidistance_err, 1e-9),
        _at_most("moving radius closed form", radius_err, 1e-9),
        _at_most("cap elements preserve the cap boundary", slice_err, 1e-9),
        _at_most("ODE flow matches phi_{tanh(t/2)a}", flow_err, 1e-8),
    ]


def surfaces_suite(tol: Tolerances = DEFAULT) -> list:
    he = sg.builtin_surface("half_equator")
    ct = sg.builtin_surface("clifford_torus")
    hc = sg.builtin_surface("half_clifford_torus")
    ident = sg.check_boundary_curvature_identities(hc)
    return [
        _at_most("half-equator area 2 pi", abs(sg.area(he) - 2 * np.pi), 1e-10),
        _at_most("half-equator boundary 2 pi", abs(sg.boundary_length(he) - 2 * np.pi), 1e-10),
        _at_most("Clifford torus area 2 pi^2", abs(sg.area(ct) - 2 * np.pi**2), 1e-10),
        _at_most("boundary curvature identities", max(ident.values()), 1e-6),
        Check("Clifford torus mesh Euler characteristic", float(mesh_parametric(ct, 0.3).euler_characteristic), 0.0, mesh_parametric(ct, 0.3).euler_characteristic == 0),
    ]


def functionals_suite(tol: Tolerances = DEFAULT) -> list:
    checks = []
    for gamma in (np.pi / 6, np.pi / 3, np.pi / 2):
        b = fn.blowup_bound_check(sg.half_equator(np.pi / 2, gamma), tol=tol)
        checks.append(_at_most(f"blowup bound equality at gamma={gamma:.4f}", abs(b.margin), 1e-8))
    rng = np.random.default_rng(1)
    hc = sg.builtin_surface("half_clifford_torus")
    m = cf.conf_cap_element(np.pi / 2, np.eye(4), np.r_[0.0, cf.random_ball_point(rng, 3, 0.5)])
    rep = fn.willmore_identity_report(hc, m, tol=tol)
    checks.append(_at_most("Willmore and Gauss-Bonnet identities", rep["max_residual"], 1e-4))
    return checks


def spectral_suite(tol: Tolerances = DEFAULT) -> list:
    disc = sg.builtin_surface("flat_disc")
    mesh = mesh_parametric(disc, 0.05)
    st = sp.steklov_spectrum(sp.FormSpec(mesh, 0.0, 0.0), count=5, tol=tol)
    expected = np.array([0.0, 1.0, 1.0, 2.0, 2.0])
    disc_err = np.max(np.abs(st.eigenvalues[:5] - expected) / np.maximum(1.0, expected))
    he = il.build_index_problem(sg.builtin_surface("half_equator"), "spectral", h=0.05)
    rob = sp.robin_spectrum(he.form, count=6, tol=tol)
    hemi = np.array([-2.0, 0.0, 0.0, 4.0, 4.0, 4.0])
    hemi_err = np.max(np.abs(rob.eigenvalues[:6] - hemi) / np.maximum(1.0, np.abs(hemi)))
    return [
        _at_most("flat disc Steklov (0,1,1,2,2)", disc_err, 0.02),
        _at_most("hemisphere Robin (-2,0,0,4,4,4)", hemi_err, 0.02),
    ]


def index_suite(tol: Tolerances = DEFAULT) -> list:
    checks = []
    expected = {("half_equator", "morse"): 1, ("half_clifford_torus", "spectral"): 1, ("half_clifford_torus", "morse"): 4, ("clifford_torus", "morse"): 5}
    for (name, flavor), ind in expected.items():
        rep = il.build_index_problem(sg.builtin_surface(name), flavor, h=0.05).index()
        checks.append(Check(f"ind {name} {flavor} = {ind}", float(rep.ind), float(ind), rep.ind == ind and rep.agreement))
    dual = il.dual_annulus(sg.builtin_surface("half_clifford_torus"), tol=tol)
    checks.append(_at_most("dual annulus checks", max(dual.checks.values()), 1e-5))
    return checks


SUITES = {
    "conformal": conformal_suite,
    "surfaces": surfaces_suite,
    "functionals": functionals_suite,
    "spectral": spectral_suite,
    "index": index_suite,
}


def run_suite(name: str, tol: Tolerances = DEFAULT) -> list:
    if name == "all":
        return [c for key in SUITES for c in run_suite(key, tol)]
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}", MODULE)
    return SUITES[name](tol=tol)
