import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capflow import conformal as cf
from capflow import surfaces as sg
from capflow.errors import DomainError, InvariantViolation
from capflow.mesh import TriMesh, mesh_parametric, validate_mesh

from conftest import cached_surface


def boundary_points(surface, n=64):
    out = []
    for _, side in surface.boundary_sides():
        lo, hi = surface.chart.side_range(side)
        u, v = surface.chart.side_points(side, np.linspace(lo, hi, n, endpoint=False))
        out.append(surface.chart.position(u, v))
    return np.concatenate(out)


@given(st.floats(0.4, 2.6), st.floats(0.2, np.pi / 2))
@settings(max_examples=15)
def test_half_equator_is_a_spherical_disc(R, gamma):
    s = sg.half_equator(R, gamma)
    pts = boundary_points(s)
    assert np.max(np.abs(pts[:, 0] - np.cos(R))) < 1e-12
    # the boundary is a round circle on a great sphere; its spherical radius
    # about the pole of that disc gives area 2 pi (1 - cos rho)
    center = pts.mean(axis=0)
    pole = center / np.linalg.norm(center)
    rho = np.arccos(np.clip(pts @ pole, -1, 1))
    assert np.ptp(rho) < 1e-10
    inside = s.chart.position(np.array(0.0), np.array(0.0))
    if inside @ pole < 0:
        rho = np.pi - rho
    assert abs(sg.area(s) - 2 * np.pi * (1 - np.cos(rho[0]))) < 1e-9
    assert abs(sg.boundary_length(s) - 2 * np.pi * np.sin(rho[0])) < 1e-9
    frame = sg.boundary_frame(s, "u1", np.linspace(0, 6, 7))
    assert np.max(np.abs(frame.gamma_measured - gamma)) < 1e-10


def test_clifford_geometry():
    ct = cached_surface("clifford_torus")
    hc = cached_surface("half_clifford_torus")
    assert abs(sg.area(ct) - 2 * np.pi**2) < 1e-10
    assert abs(sg.area(hc) - np.pi**2) < 1e-10
    assert abs(sg.boundary_length(hc) - 2 * np.sqrt(2) * np.pi) < 1e-10
    uv = (np.array([0.1, 0.7]), np.array([0.3, 2.0]))
    pack = sg.fundamental_forms(hc, uv)
    assert np.max(np.abs(pack.H)) < 1e-12
    assert np.max(np.abs(pack.A_norm2 - 2.0)) < 1e-12
    assert np.max(np.abs(pack.K_gauss)) < 1e-12
    assert np.max(np.abs(pack.K)) < 1e-6
    assert sg.check_boundary_curvature_identities(hc)["max_residual"] < 1e-10


def test_half_equator_curvature_identities():
    res = sg.check_boundary_curvature_identities(sg.half_equator(1.1, 0.9))
    assert res["max_residual"] < 1e-10


def test_disc_in_ball_is_free_boundary():
    s = sg.disc_in_ball(0.8)
    pts = boundary_points(s)
    assert np.max(np.abs(pts[:, 0] - np.cos(0.8))) < 1e-12
    frame = sg.boundary_frame(s, "u1", np.linspace(0, 6, 5))
    assert np.max(np.abs(frame.gamma_measured - np.pi / 2)) < 1e-8


def test_pushforward_curvature_two_routes(rng):
    s = sg.half_equator(np.pi / 2, np.pi / 3)
    m = cf.random_moebius(rng, 3, 0.5)
    pushed = sg.pushforward_surface(m, s)
    uv = (np.array([0.3, 0.9, 1.2]), np.array([0.5, 2.5, 4.0]))
    direct = sg.fundamental_forms(pushed, uv, intrinsic_K=False)
    predicted = sg.predicted_pushforward_curvature(m, s, uv)
    assert np.max(np.abs(direct.H - predicted["H"])) < 1e-8
    assert np.max(np.abs(direct.A - predicted["A"])) < 1e-8


@given(st.integers(0, 10_000))
@settings(max_examples=4)
def test_traceless_energy_is_conformally_invariant(seed):
    rng = np.random.default_rng(seed)
    hc = cached_surface("half_clifford_torus")
    m = cf.random_moebius(rng, 3, 0.6)

    def traceless(smp):
        return sg.fundamental_forms(smp.surface, (smp.u, smp.v), intrinsic_K=False).traceless_norm2

    base = sg.integrate(hc, traceless)
    pushed = sg.integrate(sg.pushforward_surface(m, hc), traceless, cells=(40, 80))
    assert abs(base - pushed) < 1e-6 * max(1.0, abs(base))


def test_cap_elements_keep_boundary_on_cap(rng):
    hc = cached_surface("half_clifford_torus")
    m = cf.random_cap_element(rng, np.pi / 2)
    pushed = sg.pushforward_surface(m, hc)
    assert pushed.ambient_cap is hc.ambient_cap
    assert np.max(np.abs(boundary_points(pushed)[:, 0])) < 1e-12


def test_quadrature_converges_to_exact_area():
    s = sg.half_equator(1.0, 0.7)
    coarse = sg.area(s, cells=(2, 2), order=2)
    fine = sg.area(s, cells=(8, 8), order=8)
    exact = sg.area(s, cells=(16, 16), order=12)
    assert abs(fine - exact) < 1e-12 < abs(coarse - exact)


def test_gauss_bonnet_disc_and_annulus():
    assert abs(sg.gauss_bonnet_terms(sg.half_equator(1.2, 0.8))["total"] - 2 * np.pi) < 1e-6
    assert abs(sg.gauss_bonnet_terms(cached_surface("half_clifford_torus"))["total"]) < 1e-6


def test_unknown_surface_and_bad_gamma():
    with pytest.raises(DomainError):
        sg.builtin_surface("moebius_strip")
    with pytest.raises(DomainError):
        sg.half_equator(1.0, 2.0)
    assert sg.builtin_surface("half-clifford").name == "half_clifford_torus"


@pytest.mark.parametrize("name,chi", [("half_equator", 1), ("half_clifford_torus", 0), ("clifford_torus", 0), ("flat_disc", 1), ("unit_square", 1)])
def test_mesh_topology(name, chi):
    mesh = mesh_parametric(cached_surface(name), 0.2)
    assert mesh.euler_characteristic == chi
    validate_mesh(mesh)


def test_mesh_area_converges_at_second_order():
    s = cached_surface("half_clifford_torus")
    errs = [abs(mesh_parametric(s, h).area() - np.pi**2) for h in (0.2, 0.1)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_mesh_round_trip(tmp_path):
    mesh = mesh_parametric(cached_surface("half_equator"), 0.3)
    path = tmp_path / "m.txt"
    mesh.dump(path)
    back = TriMesh.load(path)
    assert np.array_equal(back.positions, mesh.positions)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_edges, mesh.boundary_edges)


def test_validate_mesh_rejects_broken_boundary():
    mesh = mesh_parametric(cached_surface("flat_disc"), 0.3)
    broken = TriMesh(mesh.uv, mesh.positions, mesh.triangles, mesh.boundary_edges[1:], mesh.boundary_tags[1:], mesh.metrics)
    with pytest.raises(InvariantViolation):
        validate_mesh(broken)
