import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capflow import conformal as cf
from capflow import index_lab as il
from capflow import surfaces as sg
from capflow.errors import DomainError

from conftest import cached_index, cached_surface


def flat_cylinder_spectrum(p, closed, count):
    """-Delta - p on the flat half Clifford cylinder (Neumann ends) or the full torus.

    Both factors have radius 1/sqrt2, so the Laplacian eigenvalues are
    2 (j^2 + k^2) with j >= 0 (Neumann) or j in Z (periodic), k in Z.
    """
    js = range(-4, 5) if closed else range(0, 5)
    vals = sorted(2 * (j * j + k * k) - p for j in js for k in range(-4, 5))
    return np.array(vals[:count], float)


def close(got, expected):
    return np.all(np.abs(np.asarray(got) - expected) <= 0.02 * np.maximum(1.0, np.abs(expected)))


def test_half_clifford_morse_spectrum_matches_flat_cylinder():
    _, rep = cached_index("half_clifford_torus", "morse")
    assert close(rep.robin.eigenvalues[:8], flat_cylinder_spectrum(4, False, 8))
    assert (rep.a, rep.b, rep.ind, rep.ind_robin) == (3, 1, 4, 4)


def test_clifford_torus_spectrum():
    _, rep = cached_index("clifford_torus", "morse")
    assert close(rep.robin.eigenvalues[:9], flat_cylinder_spectrum(4, True, 9))
    assert rep.ind == 5 and rep.nullity == 4 and rep.closed


def test_half_clifford_spectral_and_modified():
    _, spec = cached_index("half_clifford_torus", "spectral")
    _, mod = cached_index("half_clifford_torus", "modified")
    assert close(spec.robin.eigenvalues[:6], flat_cylinder_spectrum(2, False, 6))
    assert (spec.ind, spec.nullity) == (1, 3)
    assert (mod.ind, mod.nullity) == (1, 3)


@pytest.mark.parametrize("name", ["half_equator", "half_clifford_torus", "clifford_torus"])
@pytest.mark.parametrize("flavor", il.FLAVORS)
def test_index_sum_matches_robin_count(name, flavor):
    _, rep = cached_index(name, flavor)
    assert rep.ind == rep.a + rep.b == rep.ind_robin


def test_q_morse_reduces_to_cot_at_right_angle():
    for R in (0.4, 1.0, 2.0):
        assert abs(il.q_morse(R, np.pi / 2, 3.7) - 1 / math.tan(R)) < 1e-14


@given(st.floats(0.2, np.pi - 0.2), st.floats(0.1, np.pi / 2), st.sampled_from([1, -1]))
def test_dual_parameters_satisfy_their_relations(R, gamma, eps):
    Rt, gt = il.dual_parameters(R, gamma, eps)
    assert abs(math.cos(Rt) + eps * math.sin(R) * math.cos(gamma)) < 1e-12
    assert abs(math.sin(Rt) * math.sin(gt) - math.sin(R) * math.sin(gamma)) < 1e-12
    assert 0 < gt <= np.pi / 2 + 1e-15


def test_dual_parameters_example():
    Rt, gt = il.dual_parameters(np.pi / 2, np.pi / 3, 1)
    assert abs(Rt - 2 * np.pi / 3) < 1e-12 and abs(gt - np.pi / 2) < 1e-12


def test_dual_involution_is_isometric():
    hc = cached_surface("half_clifford_torus")
    d1 = il.dual_annulus(hc)
    d2 = il.dual_annulus(d1.dual)
    U, V, _ = il._quadrature_nodes(hc)
    g0 = sg.fundamental_forms(hc, (U, V), intrinsic_K=False).metric
    _, (xu, xv) = d2.dual.chart.derivatives(U, V, order=1)
    g2 = np.stack([np.stack([np.sum(xu * xu, -1), np.sum(xu * xv, -1)], -1), np.stack([np.sum(xu * xv, -1), np.sum(xv * xv, -1)], -1)], -2)
    assert np.max(np.abs(g2 - g0)) < 1e-6


def test_dual_needs_an_annulus():
    with pytest.raises(DomainError):
        il.dual_annulus(sg.half_equator())


def test_trial_field_derivatives(rng):
    domain = ((-1.0, 2.0), (0.0, 2 * np.pi))
    f = il.TrialField.random(domain, rng)
    u, v, h = np.array([0.3]), np.array([1.1]), 1e-6
    val, fu, fv = f.evaluate(u, v)
    assert abs(fu[0] - (f.evaluate(u + h, v)[0] - f.evaluate(u - h, v)[0])[0] / (2 * h)) < 1e-6
    assert abs(fv[0] - (f.evaluate(u, v + h)[0] - f.evaluate(u, v - h)[0])[0] / (2 * h)) < 1e-6


def test_constant_field_form_value():
    hc = cached_surface("half_clifford_torus")
    const = il.TrialField.constant(hc.chart.domain)
    # Q^A_*(1) = -int |A|^2 = -2 |S| on the half Clifford torus (q = 0)
    assert abs(il.quadratic_form_value(hc, "modified", const) + 2 * np.pi**2) < 1e-10
    assert abs(il.quadratic_form_value(hc, "morse", const) + 4 * np.pi**2) < 1e-10


def test_coordinate_and_gauss_spans():
    assert il.coordinate_span_rank(cached_surface("half_clifford_torus")) == 4
    assert il.coordinate_span_rank(sg.half_equator()) == 3
    assert il.gauss_span_rank(cached_surface("half_clifford_torus")) == 4


def test_gauss_kernel_rayleigh_quotients_scale_like_h2():
    rep = il.verify_gauss_eigenfunctions(cached_surface("half_clifford_torus"), h_values=(0.1, 0.05))
    for i in (1, 2, 3):
        coarse, fine = rep["components"][i]["rayleigh"]
        assert fine <= 10 * 0.05**2
        assert fine < coarse or fine < 1e-10
    assert max(rep["boundary_relations"].values()) < 1e-10


def test_coordinate_boundary_relations_off_hemisphere():
    rep = il.verify_coordinate_eigenfunctions(sg.half_equator(1.0), h_values=(0.1, 0.05))
    assert max(rep["boundary_relations"].values()) < 1e-10
    for i in range(4):
        orders = rep["components"][i]["order"]
        assert all(o >= 1.8 for o in orders), (i, orders)


def test_non_minimal_surface_rejected():
    with pytest.raises(DomainError):
        il.verify_coordinate_eigenfunctions(sg.pushforward_surface(cf.MoebiusMap.translation(np.array([0.1, 0.2, 0.3, 0.4])), sg.half_equator()))


def test_balancing_symmetric_surface_needs_no_map():
    res = il.conformal_balance(cached_surface("half_clifford_torus"))
    assert np.linalg.norm(res.y) == 0.0 and res.iterations == 0


def test_balancing_recovers_known_map():
    hc = cached_surface("half_clifford_torus")
    y0 = np.array([0.0, 0.2, -0.1, 0.15])
    m = cf.conf_cap_element(np.pi / 2, np.eye(4), y0)
    pushed = sg.pushforward_surface(m, hc)

    def weight(sample):
        return 1.0 / cf.conformal_factor(m, cf.phi(-y0, sample.x))

    res = il.conformal_balance(pushed, weight)
    assert res.residual < 1e-8 and res.iterations <= 50
    assert np.linalg.norm(res.y + y0) < 1e-6


def test_balancing_with_steklov_weight():
    # the modified flavor has no Dirichlet kernel on the hemisphere, so its
    # first Steklov eigenfunction has one sign
    problem, rep = cached_index("half_equator", "modified")
    f = rep.steklov.eigenfunctions[:, 0]
    f = f if f.sum() > 0 else -f
    assert np.all(f[problem.mesh.boundary_vertices] > 0)
    m = cf.conf_cap_element(np.pi / 2, np.eye(4), np.array([0.0, 0.3, 0.1, 0.0]))
    pushed = sg.pushforward_surface(m, problem.surface)
    weight = il.nodal_boundary_weight(problem.surface, problem.mesh, np.abs(f))
    res = il.conformal_balance(pushed, weight)
    assert res.residual < 1e-8


def test_balancing_rejects_negative_weight():
    with pytest.raises(DomainError):
        il.conformal_balance(cached_surface("half_clifford_torus"), -1.0)


def test_rotational_symmetry_detection():
    hc = cached_surface("half_clifford_torus")
    assert il.is_rotationally_symmetric(replace(hc, symmetry={}))
    assert il.is_totally_geodesic(replace(sg.half_equator(), symmetry={}))
    assert not il.is_totally_geodesic(hc)


@pytest.mark.parametrize("name,ind", [("half_equator", 1), ("half_clifford_torus", 4), ("clifford_torus", 5)])
def test_urbano_report(name, ind):
    rep = il.urbano_report(cached_surface(name))
    for key in ("surface", "flavor", "eigen_summary", "a", "b", "ind", "ind_robin", "dichotomy_branch", "boundary_integral_qA", "consistent_with_theorems"):
        assert key in rep
    assert rep["ind"] == ind
    assert rep["ind0_modified"] <= rep["ind"]
    assert all(rep["consistent_with_theorems"])
