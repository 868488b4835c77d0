"""Energies, monotone quantities along conformal flows, and Gauss-Bonnet identities."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import conformal as cf
from . import surfaces as sg
from .config import DEFAULT, Tolerances, parallel_map
from .errors import DomainError, InvariantViolation
from .reports import format_float

MODULE = "functionals"

HALF_PI = 0.5 * np.pi


def _cot(R: float) -> float:
    return math.cos(R) / math.sin(R)


def _is_right_angle(gamma: float) -> bool:
    return abs(gamma - HALF_PI) < 1e-12


@dataclass(frozen=True)
class EnergyValue:
    area: float
    wet_area: Optional[float]
    boundary_length: float
    E_R: float
    E_R_gamma: Optional[float]
    radius_used: float
    gamma_used: float

    def __post_init__(self):
        if np.isfinite(self.radius_used):
            parts = self.area + _cot(self.radius_used) * self.boundary_length
            if abs(parts - self.E_R) > 1e-12 * max(1.0, abs(parts)):
                raise InvariantViolation("E_R does not match its parts", MODULE)

    @property
    def E(self) -> float:
        """The capillary energy when available, otherwise E^R."""
        return self.E_R if self.E_R_gamma is None else self.E_R_gamma

    def to_json(self) -> dict:
        return {k: (None if v is None else float(v)) for k, v in self.__dict__.items()}


def energy(surface: sg.ParametricSurface, cells=None, order=None, require_gamma: bool = False, tol: Tolerances = DEFAULT) -> EnergyValue:
    """|S|, |S^-|, |dS|, E^R and E^{R,gamma} by tensor Gauss-Legendre quadrature.

    At a right contact angle the wet term drops and E^{R,gamma} = E^R.
    Without an ambient cap (closed surfaces) R is reported as nan and
    E^R is the area.
    """
    kw = {"cells": cells, "order": order, "tol": tol}
    A = sg.area(surface, **kw)
    L = 0.0 if surface.closed else sg.boundary_length(surface, **kw)
    wet = None
    if surface.wet is not None and any(w is not None for w in surface.wet):
        wet = sg.integrate(surface, 1.0, "wet", None, order, tol)
    if surface.ambient_cap is None:
        if require_gamma:
            raise DomainError(f"{surface.name} has no contact data", MODULE)
        return EnergyValue(A, wet, L, A, None, float("nan"), float("nan"))
    R = surface.radius
    gamma = surface.contact_angle if surface.contact_angle is not None else HALF_PI
    E_R = A + _cot(R) * L
    if _is_right_angle(gamma):
        E_g = E_R
    elif wet is None:
        if require_gamma:
            raise DomainError(f"{surface.name} has no wet surface; E^(R,gamma) is undefined", MODULE)
        E_g = None
    else:
        E_g = A + math.cos(gamma) / math.sin(R) ** 2 * wet + math.sin(gamma) * _cot(R) * L
    return EnergyValue(A, wet, L, E_R, E_g, float(R), float(gamma))


def capillary_energy(surface: sg.ParametricSurface, **kw) -> float:
    """A^gamma = |S| + cos(gamma)|S^-| in the hemisphere, i.e. E^{pi/2,gamma}."""
    if surface.ambient_cap is None or abs(surface.radius - HALF_PI) > 1e-12:
        raise DomainError("A^gamma is defined for surfaces in the hemisphere", MODULE)
    return energy(surface, require_gamma=True, **kw).E_R_gamma


# --------------------------------------------------------------------------
# wetting energy and monotone quantities


def _boundary_flux(surface: sg.ParametricSurface, spec: cf.FlowSpec, t: float, cells=None, tol: Tolerances = DEFAULT) -> float:
    moved = sg.flow_surface(surface, spec, t)
    return sg.integrate(moved, lambda b: np.sum(b.frame.nu_bar * spec.field(b.x), -1), "boundary", cells, tol=tol)


def wetting_energy_local(
    surface: sg.ParametricSurface,
    spec: cf.FlowSpec,
    t_grid: Sequence[float],
    substeps: int = 4,
    cells=None,
    tol: Tolerances = DEFAULT,
) -> np.ndarray:
    """W(t) = int_0^t int_{dS_tau} <nu_bar, V_a>, cumulative trapezoid on a refined grid.

    Each interval of ``t_grid`` is split into ``substeps`` pieces; values
    are returned on ``t_grid`` with W(t_grid[0]) = 0.
    """
    if surface.contact_angle is None or surface.ambient_cap is None or surface.closed:
        raise DomainError("local wetting energy needs contact data", MODULE)
    t_grid = np.asarray(t_grid, float)
    if substeps < 1:
        raise DomainError("substeps must be at least 1", MODULE)
    fine = np.concatenate(
        [np.linspace(a, b, substeps + 1)[:-1] for a, b in zip(t_grid[:-1], t_grid[1:])] + [t_grid[-1:]]
    )
    flux = np.array(parallel_map(lambda t: _boundary_flux(surface, spec, t, cells, tol), fine))
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(fine) * (flux[1:] + flux[:-1]))])
    return cumulative[::substeps]


@dataclass
class MonotonicityTrace:
    times: np.ndarray
    energies: list
    caps: list
    W: np.ndarray
    C_H: float
    violations: list
    mode: str
    monotone: np.ndarray
    slopes: np.ndarray
    slope_tol: np.ndarray
    error_estimate: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return not self.violations

    def rows(self) -> list:
        flags = np.zeros(len(self.times), dtype=int)
        for k in range(len(self.slopes)):
            flags[k] = int(self.slopes[k] > self.slope_tol[k])
        out = []
        for i, t in enumerate(self.times):
            e = self.energies[i]
            out.append(
                {
                    "t": float(t),
                    "R_t": float(self.caps[i].radius) if self.caps[i] is not None else float("nan"),
                    "area": e.area,
                    "wet": float("nan") if e.wet_area is None else e.wet_area,
                    "boundary": e.boundary_length,
                    "E": e.E,
                    "monotone_quantity": float(self.monotone[i]),
                    "slope_flag": int(flags[i]),
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = ["t", "R_t", "area", "wet", "boundary", "E", "monotone_quantity", "slope_flag"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in self.rows():
            writer.writerow([row[k] if k == "slope_flag" else format_float(row[k]) for k in header])
        return buf.getvalue()


def sup_mean_curvature(surface: sg.ParametricSurface, cells=None, tol: Tolerances = DEFAULT) -> float:
    """Largest |H| over the quadrature nodes."""
    cells = tuple(cells) if cells is not None else sg.default_cells(surface, tol)
    (u0, u1), (v0, v1) = surface.chart.domain
    nu_, _ = sg.gauss_legendre_nodes(u0, u1, cells[0], tol.quad_order)
    nv_, _ = sg.gauss_legendre_nodes(v0, v1, cells[1], tol.quad_order)
    U, V = np.meshgrid(nu_, nv_, indexing="ij")
    return float(np.max(np.abs(sg.fundamental_forms(surface, (U, V), intrinsic_K=False).H)))


def select_mode(surface: sg.ParametricSurface, spec: cf.FlowSpec) -> str:
    """Which monotone quantity applies to this (gamma, R, a) configuration."""
    gamma = surface.contact_angle if surface.contact_angle is not None else HALF_PI
    if surface.ambient_cap is None:
        raise DomainError("monotonicity needs an ambient cap", MODULE)
    if _is_right_angle(gamma):
        return "free_boundary"
    if surface.wet is not None and any(w is not None for w in surface.wet):
        return "capillary"
    if abs(surface.radius - HALF_PI) < 1e-12 and abs(spec.a[0]) < 1e-12:
        return "hemisphere"
    raise DomainError("no monotone quantity: capillary surface without a wet surface outside the hemisphere case", MODULE)


def _default_cells(surface, tol):
    return sg.default_cells(surface, tol)


def monotonicity_trace(
    surface: sg.ParametricSurface,
    spec: cf.FlowSpec,
    t_grid: Sequence[float],
    C_H: Optional[float] = None,
    mode: str = "auto",
    cells=None,
    substeps: int = 4,
    tol: Tolerances = DEFAULT,
) -> MonotonicityTrace:
    """Evaluate the declared monotone quantity along Psi^a_t and flag rising steps.

    Modes: ``free_boundary`` uses exp(-C_H t) E^{R_t}; ``capillary`` uses
    E^{R_t,gamma} with the pushed wet surface; ``hemisphere`` uses
    |S_t| + cos(gamma) W(t) and needs a orthogonal to e0.

    Each value is computed with ``cells`` and with doubled cells; their
    difference bounds the quadrature error and widens the slope tolerance
    of the adjacent steps.  Violations are reported, never raised.
    """
    t_grid = np.asarray(t_grid, float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be increasing with at least two points", MODULE)
    if mode == "auto":
        mode = select_mode(surface, spec)
    if mode not in ("free_boundary", "capillary", "hemisphere"):
        raise DomainError(f"unknown mode {mode!r}", MODULE)
    if mode == "hemisphere" and (abs(surface.radius - HALF_PI) > 1e-12 or abs(spec.a[0]) > 1e-12):
        raise DomainError("hemisphere monotonicity needs R = pi/2 and a orthogonal to e0", MODULE)
    measured = sup_mean_curvature(surface, cells, tol)
    if C_H is None:
        C_H = 1.1 * measured
    elif C_H < measured - 1e-8:
        warnings.warn(f"C_H = {C_H:.6g} is below the measured sup|H| = {measured:.6g}", RuntimeWarning, stacklevel=2)
    if mode != "free_boundary":
        C_H = 0.0

    coarse = tuple(cells) if cells is not None else _default_cells(surface, tol)
    fine = tuple(2 * c for c in coarse)
    base_cap = surface.ambient_cap

    def evaluate(t):
        moved = sg.flow_surface(surface, spec, t)
        cap = cf.flow_cap(spec, t, base_cap, tol)
        mc = moved.ambient_cap
        if abs(mc.radius - cap.radius) > tol.flow_radius or np.linalg.norm(mc.center.coords - cap.center.coords) > tol.flow_radius:
            raise InvariantViolation(f"cap of the flowed surface disagrees with flow_cap at t={t}", MODULE)
        return energy(moved, fine, tol=tol), energy(moved, coarse, tol=tol), cap

    results = parallel_map(evaluate, t_grid)
    energies = [r[0] for r in results]
    caps = [r[2] for r in results]

    gamma = surface.contact_angle if surface.contact_angle is not None else HALF_PI
    W = np.zeros(len(t_grid))
    W_err = np.zeros(len(t_grid))
    if not _is_right_angle(gamma) and not surface.closed:
        W = wetting_energy_local(surface, spec, t_grid, 2 * substeps, fine, tol)
        W_err = np.abs(W - wetting_energy_local(surface, spec, t_grid, substeps, coarse, tol))

    def quantity(e_fine, e_coarse, t, i):
        if mode == "free_boundary":
            damp = math.exp(-C_H * t)
            return damp * e_fine.E_R, damp * e_coarse.E_R
        if mode == "capillary":
            return e_fine.E_R_gamma, e_coarse.E_R_gamma
        c = math.cos(gamma)
        return e_fine.area + c * W[i], e_coarse.area + c * W[i]

    pairs = np.array([quantity(r[0], r[1], t, i) for i, (r, t) in enumerate(zip(results, t_grid))])
    Q = pairs[:, 0]
    err = np.abs(pairs[:, 0] - pairs[:, 1])
    if mode == "hemisphere":
        err = err + abs(math.cos(gamma)) * W_err
    dt = np.diff(t_grid)
    slopes = np.diff(Q) / dt
    scale = max(1.0, float(np.max(np.abs(Q))))
    slope_tol = tol.slope_rel * scale + (err[1:] + err[:-1]) / dt
    violations = [(float(t_grid[k]), float(slopes[k])) for k in range(len(slopes)) if slopes[k] > slope_tol[k]]
    return MonotonicityTrace(t_grid, energies, caps, W, float(C_H), violations, mode, Q, slopes, slope_tol, err)


# --------------------------------------------------------------------------
# Gauss-Bonnet identities


def euler_characteristic(surface: sg.ParametricSurface, h: float = 0.3) -> int:
    """From the combinatorics of a coarse structured mesh of the chart."""
    from .mesh import mesh_parametric

    return mesh_parametric(surface, h).euler_characteristic


def _willmore_terms(surface, cells, tol):
    """int H^2 and int |A°|^2."""
    cells = tuple(cells) if cells is not None else sg.default_cells(surface, tol)
    (u0, u1), (v0, v1) = surface.chart.domain
    nu_, wu = sg.gauss_legendre_nodes(u0, u1, cells[0], tol.quad_order)
    nv_, wv = sg.gauss_legendre_nodes(v0, v1, cells[1], tol.quad_order)
    U, V = np.meshgrid(nu_, nv_, indexing="ij")
    sample = sg.SurfaceSample(surface, U, V, np.outer(wu, wv))
    pack = sg.fundamental_forms(surface, (U, V), intrinsic_K=False)
    vals = np.stack([pack.H**2, pack.traceless_norm2]) * sample.area_element * sample.weights
    return float(vals[0].sum()), float(vals[1].sum())


def _gauss_bonnet_side(surface, e: EnergyValue, H2: float, traceless: float, chi: int, chi_wet: int):
    """2 pi (chi + cos g chi(S^-)) minus the curvature side; zero for exact data."""
    gamma, R = e.gamma_used, e.radius_used
    rhs = e.area + 0.25 * H2 - 0.5 * traceless
    lhs = 2 * np.pi * chi
    if np.isfinite(R):
        rhs += math.sin(gamma) * _cot(R) * e.boundary_length
        if not _is_right_angle(gamma):
            lhs += 2 * np.pi * math.cos(gamma) * chi_wet
            rhs += math.cos(gamma) / math.sin(R) ** 2 * (e.wet_area or 0.0)
    return lhs - rhs


def willmore_identity_report(surface: sg.ParametricSurface, m: cf.MoebiusMap, cells=None, tol: Tolerances = DEFAULT) -> dict:
    """Residuals of the Gauss-Bonnet route to conformal maximisation.

    ``free_boundary``: |S| - |S*| - 1/4 int|H*|^2 + cot R |dS| - cot R* |dS*|.
    ``capillary``: the same with cos(g) csc^2 R |S^-| and sin(g) cot R |dS|.
    Gauss-Bonnet residuals of S and S* are reported separately, with the
    Euler characteristic taken from mesh combinatorics.
    """
    pushed = sg.pushforward_surface(m, surface)
    if cells is None:
        base_cells = sg.default_cells(surface, tol)
        cells = tuple(2 * c for c in base_cells)
    e0 = energy(surface, cells, tol=tol)
    e1 = energy(pushed, cells, tol=tol)
    H2_0, tr0 = _willmore_terms(surface, cells, tol)
    H2_1, tr1 = _willmore_terms(pushed, cells, tol)
    if H2_0 > 1e-10 * max(1.0, e0.area):
        warnings.warn(f"base surface is not minimal (int H^2 = {H2_0:.3g})", RuntimeWarning, stacklevel=2)
    chi = euler_characteristic(surface)
    chi_wet = 0
    if surface.wet is not None:
        chi_wet = sum(euler_characteristic(w) for w in surface.wet if w is not None)
    report = {
        "area": e0.area,
        "area_pushed": e1.area,
        "willmore_pushed": H2_1,
        "traceless_base": tr0,
        "traceless_pushed": tr1,
        "boundary_length": e0.boundary_length,
        "boundary_length_pushed": e1.boundary_length,
        "R": e0.radius_used,
        "R_pushed": e1.radius_used,
        "chi": chi,
        "chi_wet": chi_wet,
        "gauss_bonnet_base": _gauss_bonnet_side(surface, e0, H2_0, tr0, chi, chi_wet),
        "gauss_bonnet_pushed": _gauss_bonnet_side(pushed, e1, H2_1, tr1, chi, chi_wet),
    }
    R0, R1 = e0.radius_used, e1.radius_used
    if np.isfinite(R0) and _is_right_angle(e0.gamma_used):
        report["free_boundary"] = (
            e0.area - e1.area - 0.25 * H2_1 + _cot(R0) * e0.boundary_length - _cot(R1) * e1.boundary_length
        )
    elif not np.isfinite(R0):
        report["free_boundary"] = e0.area - e1.area - 0.25 * H2_1
    if np.isfinite(R0) and e0.wet_area is not None:
        g = e0.gamma_used
        report["wet_area"] = e0.wet_area
        report["wet_area_pushed"] = e1.wet_area
        report["capillary"] = (
            e0.area
            - e1.area
            - 0.25 * H2_1
            + math.cos(g) / math.sin(R0) ** 2 * e0.wet_area
            - math.cos(g) / math.sin(R1) ** 2 * e1.wet_area
            + math.sin(g) * _cot(R0) * e0.boundary_length
            - math.sin(g) * _cot(R1) * e1.boundary_length
        )
    keys = [k for k in ("free_boundary", "capillary", "gauss_bonnet_base", "gauss_bonnet_pushed") if k in report]
    report["max_residual"] = float(max(abs(report[k]) for k in keys))
    return report


class BlowupCheck(NamedTuple):
    E_value: float
    bound: float
    margin: float


def blowup_bound_check(surface: sg.ParametricSurface, **kw) -> BlowupCheck:
    """E^{pi/2,gamma} against 2 pi (1 + cos gamma), the area of a limiting half-equator plus wet half."""
    value = capillary_energy(surface, **kw)
    bound = 2.0 * np.pi * (1.0 + math.cos(surface.gamma))
    margin = value - bound
    if margin < -1e-6:
        raise InvariantViolation(f"energy {value:.12g} below the blowup bound {bound:.12g}", MODULE)
    return BlowupCheck(value, bound, margin)


# --------------------------------------------------------------------------
# Euclidean limit


def _fit_order(R, errors, scale: float = 1.0):
    """Observed order; inf when every error is at roundoff level (exact data)."""
    R, errors = np.asarray(R, float), np.asarray(errors, float)
    ok = errors > 1e-12 * max(1.0, scale)
    if ok.sum() < 2:
        return float("inf"), []
    pairwise = [
        float(np.log(errors[i] / errors[i + 1]) / np.log(R[i] / R[i + 1]))
        for i in range(len(R) - 1)
        if ok[i] and ok[i + 1]
    ]
    slope = np.polyfit(np.log(R[ok]), np.log(errors[ok]), 1)[0]
    return float(slope), pairwise


def euclidean_limit_trace(euclidean_surface: sg.ParametricSurface, R_sequence: Sequence[float], cells=None, tol: Tolerances = DEFAULT) -> dict:
    """Rescaled area and boundary length of xi_R(S) as R decreases.

    The limits are the Euclidean area and length of the chart itself.  The
    fitted order is the least-squares slope of log error against log R.
    """
    R_sequence = [float(r) for r in R_sequence]
    if any(not 0 < r <= HALF_PI for r in R_sequence):
        raise DomainError("radii must lie in (0, pi/2]", MODULE)
    if len(R_sequence) > 1 and np.any(np.diff(R_sequence) >= 0):
        raise DomainError("R_sequence must be decreasing", MODULE)
    area_ref = sg.area(euclidean_surface, cells=cells, tol=tol)
    length_ref = sg.boundary_length(euclidean_surface, cells=cells, tol=tol)
    rows = []
    for R in R_sequence:
        lifted = sg.ball_chart_in_cap(euclidean_surface, R)
        a = sg.area(lifted, cells=cells, tol=tol)
        L = sg.boundary_length(lifted, cells=cells, tol=tol)
        s = math.sin(R)
        rows.append(
            {
                "R": R,
                "area": a,
                "boundary_length": L,
                "rescaled_area": a / s**2,
                "rescaled_length": L / s,
                "area_error": abs(a / s**2 - area_ref),
                "length_error": abs(L / s - length_ref),
            }
        )
    area_order, area_pairs = _fit_order(R_sequence, [r["area_error"] for r in rows], area_ref)
    length_order, length_pairs = _fit_order(R_sequence, [r["length_error"] for r in rows], length_ref)
    return {
        "area_limit": area_ref,
        "length_limit": length_ref,
        "rows": rows,
        "area_order": area_order,
        "length_order": length_order,
        "area_pairwise_orders": area_pairs,
        "length_pairwise_orders": length_pairs,
    }


def artanh_factor_table(y, R_values: Sequence[float]) -> list:
    """(1 - cos R)/sin R * artanh|Y| for the slice point Y of a fixed y.

    1 - |Y| is formed without cancellation since |Y| approaches 1 as R -> 0.
    """
    y = np.asarray(y, float)
    if abs(y[0]) > 1e-14:
        raise DomainError("y must be orthogonal to e0", MODULE)
    r2 = float(y @ y)
    rows = []
    for R in R_values:
        s, c = math.sin(R), math.cos(R)
        den = s * s + r2 * c * c
        norm_Y = math.sqrt(r2 * r2 * c * c + s * s * r2) / den
        # |Y|^2 = r2 / den, so 1 - |Y|^2 = s^2 (1 - r2) / den
        one_minus_sq = s * s * (1.0 - r2) / den
        atanh = 0.5 * math.log((1.0 + norm_Y) ** 2 / one_minus_sq)
        rows.append({"R": float(R), "norm_Y": norm_Y, "artanh": atanh, "factor": (1.0 - c) / s * atanh})
    return rows
