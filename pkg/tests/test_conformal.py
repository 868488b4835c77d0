import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from capflow import conformal as cf
from capflow.errors import DegenerateInputError, DomainError

finite = st.floats(-1.0, 1.0, allow_nan=False)
vec4 = arrays(np.float64, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def ball(v, r):
    return v / np.linalg.norm(v) * r


def sphere(v):
    return v / np.linalg.norm(v)


@given(vec4, st.floats(0.0, 0.95), vec4)
def test_phi_inverse_is_phi_minus_y(yv, r, xv):
    y, x = ball(yv, r), sphere(xv)
    assert np.linalg.norm(cf.phi(-y, cf.phi(y, x)) - x) < 1e-9


@given(vec4, st.floats(0.0, 0.95), vec4)
def test_phi_preserves_the_sphere(yv, r, xv):
    out = cf.phi(ball(yv, r), sphere(xv))
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12


@given(vec4, st.floats(0.0, 0.9), vec4, st.floats(0.0, 0.9), vec4)
def test_compose_matches_pointwise_application(av, ra, bv, rb, xv):
    rng = np.random.default_rng(int(1e6 * ra) + 7)
    f = cf.MoebiusMap(cf.random_rotation(rng, 4), ball(av, ra))
    g = cf.MoebiusMap(cf.random_rotation(rng, 4), ball(bv, rb))
    x = sphere(xv)
    fg = cf.moebius_compose(f, g)
    assert np.linalg.norm(fg(x) - f(g(x))) < 1e-9
    ident = cf.moebius_compose(f, cf.moebius_inverse(f))
    assert np.linalg.norm(ident(x) - x) < 1e-9


@given(vec4, st.floats(0.0, 0.9), vec4)
def test_conformal_factor_matches_finite_differences(yv, r, xv):
    m = cf.MoebiusMap.translation(ball(yv, r))
    x = sphere(xv)
    frame = cf.tangent_frame(x)
    h = 1e-6
    for v in frame:
        fd = (m(sphere(x + h * v)) - m(sphere(x - h * v))) / (2 * h)
        assert abs(np.linalg.norm(fd) - cf.conformal_factor(m, x)) < 1e-5 * (1 + cf.conformal_factor(m, x))
        assert np.linalg.norm(cf.moebius_d1(m, x, v) - fd) < 1e-5 * (1 + np.linalg.norm(fd))


def test_second_differential_matches_finite_differences(rng):
    m = cf.random_moebius(rng, 3, 0.7)
    x = cf.random_sphere_point(rng, 4)
    v, w = rng.standard_normal((2, 4))
    h = 1e-5
    fd = (cf.moebius_d1(m, x + h * w, v) - cf.moebius_d1(m, x - h * w, v)) / (2 * h)
    assert np.linalg.norm(cf.moebius_d2(m, x, v, w) - fd) < 1e-6 * (1 + np.linalg.norm(fd))


@given(vec4, st.floats(0.0, 3.0), vec4)
def test_flow_potential_matches_tanh_form(av, t, xv):
    spec = cf.FlowSpec(sphere(av))
    x = sphere(xv)
    u0 = float(spec.u(x))
    direct = float(spec.u(cf.flow_point(spec, t, x)))
    # tanh(t + artanh u0) written via the addition formula, avoiding artanh(+-1)
    closed = (np.tanh(t) + u0) / (1 + np.tanh(t) * u0)
    assert abs(direct - closed) < 1e-12
    assert abs(cf.flow_potential(u0, t) - closed) < 1e-12


@given(vec4, st.floats(0.2, 2.9), vec4, st.floats(0.0, 2.0))
def test_flow_cap_radius_matches_closed_form(cv, R, av, t):
    cap = cf.Cap(sphere(cv), R)
    spec = cf.FlowSpec(sphere(av))
    moved = cf.flow_cap(spec, t, cap)
    cos_alpha = -cap.center.coords @ spec.a
    cot_t = np.cos(R) / np.sin(R) * np.cosh(t) - cos_alpha / np.sin(R) * np.sinh(t)
    assert abs(moved.radius - np.arctan2(1.0, cot_t)) < 1e-9


@given(vec4, st.floats(0.0, 2.0))
def test_hemisphere_is_preserved_by_horizontal_flows(av, t):
    a = np.r_[0.0, av[1:]]
    if np.linalg.norm(a) < 1e-3:
        a = np.array([0.0, 1.0, 0.0, 0.0])
    moved = cf.flow_cap(cf.FlowSpec(sphere(a)), t, cf.Cap.about_e0(np.pi / 2))
    assert abs(moved.radius - np.pi / 2) < 1e-10
    assert np.linalg.norm(moved.center.coords - np.eye(4)[0]) < 1e-10


def test_normal_pairing_matches_direct_evaluation(rng):
    for _ in range(20):
        cap = cf.Cap(cf.random_sphere_point(rng, 4), rng.uniform(0.3, 2.8))
        spec = cf.FlowSpec(cf.random_sphere_point(rng, 4))
        t = rng.uniform(0, 2)
        moved = cf.flow_cap(spec, t, cap)
        x = spec.map_at(t)(cap.boundary_diameters())
        direct = np.sum(moved.outward_normal(x) * spec.field(x), axis=-1)
        assert np.max(np.abs(cf.cap_normal_pairing(spec, t, cap, x) - direct)) < 1e-8


@given(st.floats(0.2, 1.5), vec4, st.floats(0.0, 0.85))
def test_cap_elements_fix_the_cap(R, yv, r):
    rng = np.random.default_rng(int(R * 1e6))
    y = np.r_[0.0, ball(yv[1:] if np.linalg.norm(yv[1:]) > 1e-3 else np.ones(3), r)]
    rot = cf.random_rotation(rng, 4, fix_e0=True)
    g = cf.conf_cap_element(R, rot, y)
    moved = cf.image_cap(g, cf.Cap.about_e0(R))
    assert abs(moved.radius - R) < 1e-9
    assert np.linalg.norm(moved.center.coords - np.eye(4)[0]) < 1e-9
    assert np.linalg.norm(g(np.zeros(4)) - rot @ cf.cap_image_of_origin(R, y)) < 1e-9


def test_cap_element_at_hemisphere_is_phi_y(rng):
    y = np.r_[0.0, cf.random_ball_point(rng, 3, 0.8)]
    g = cf.conf_cap_element(np.pi / 2, np.eye(4), y)
    x = cf.random_sphere_point(rng, 4)
    assert np.linalg.norm(g(x) - cf.phi(y, x)) < 1e-12


def test_realize_by_flow_hits_target_and_keeps_cap(rng):
    for _ in range(20):
        R = rng.uniform(0.3, 1.5)
        Y = cf.cap_image_of_origin(R, np.r_[0.0, cf.random_ball_point(rng, 3, 0.8)])
        assert cf.lies_on_slice(Y, np.cos(R))
        m = cf.flow_realization_map(Y, R)
        assert np.linalg.norm(m(np.zeros(4)) - Y) < 1e-9
        pts = m(cf.Cap.about_e0(R).boundary_diameters())
        assert np.max(np.abs(pts[:, 0] - np.cos(R))) < 1e-9


def test_stereographic_factor_matches_xi_R(rng):
    R = 1.1
    z = cf.random_ball_point(rng, 3, 0.9)
    v = rng.standard_normal(3)
    h = 1e-6
    fd = (cf.xi_R(z + h * v, R) - cf.xi_R(z - h * v, R)) / (2 * h)
    assert abs(np.linalg.norm(fd) / np.linalg.norm(v) - cf.f_R(z, R)) < 1e-6
    assert abs(cf.xi_R(np.array([1.0, 0, 0]), R)[0] - np.cos(R)) < 1e-12


def test_rejects_bad_inputs():
    with pytest.raises(DomainError):
        cf.SpherePoint(np.array([1.0, 1.0, 0, 0]))
    with pytest.raises(DomainError):
        cf.MoebiusMap.translation(np.array([1.0, 0, 0, 0]))
    with pytest.raises(DomainError):
        cf.conf_cap_element(1.0, np.eye(4), np.array([0.1, 0, 0, 0]))
    with pytest.raises(DomainError):
        cf.Cap.about_e0(3.5)
    with pytest.raises(DomainError):
        cf.realize_by_flow(np.array([0.5, 0.1, 0, 0]), 1.0)
    with pytest.raises(DegenerateInputError):
        cf.phi(np.array([0.5, 0, 0, 0]), np.array([-2.0, 0, 0, 0]))


def test_moebius_json_round_trip(rng):
    m = cf.random_moebius(rng)
    back = cf.MoebiusMap.from_json(m.to_json())
    assert np.array_equal(back.rotation, m.rotation) and np.array_equal(back.y, m.y)
