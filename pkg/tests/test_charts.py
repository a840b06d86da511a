"""Geodesic charts: exponential maps, transport, distance fields, estimates."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcurvelab import charts as C
from jcurvelab import geometry as G
from jcurvelab.errors import (
    ChartFailure,
    LeftDomain,
    ShootingDiverged,
    StepUnderflow,
)


@pytest.fixture(scope="module")
def sphere_chart(sphere1):
    return C.normal_chart(sphere1, np.zeros(2))


@pytest.fixture(scope="module")
def flat_chart(flat4):
    return C.normal_chart(flat4, np.array([0.1, 0.2, -0.3, 0.05]))


@pytest.fixture(scope="module")
def rescaled_sphere(sphere1):
    return G.rescale(sphere1, 10.0)


@pytest.fixture(scope="module")
def rescaled_sphere_chart(rescaled_sphere):
    return C.normal_chart(rescaled_sphere, np.zeros(2))


# ---------------------------------------------------------------------------
# exponential map


def test_exp_flat_is_translation(flat4):
    p = np.array([0.1, -0.2, 0.3, 0.0])
    X = np.array([0.5, 0.4, -0.3, 0.2])
    q, v = C.exp_map(flat4, p, X, return_velocity=True)
    assert np.abs(q - (p + X)).max() <= 1e-14
    assert np.abs(v - X).max() <= 1e-14


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.lists(st.floats(-0.8, 0.8), min_size=4, max_size=4))
def test_exp_flat_translation_property(vals):
    m = G.flat_family(n=2)
    p = np.array([0.1, -0.2, 0.3, 0.0])
    X = np.array(vals)
    q = C.exp_map(m, p, X)
    assert np.abs(q - (p + X)).max() <= 1e-13


def test_exp_batch_matches_single(sphere1):
    X = C.ball_net(2, 8) * 1.2
    batch, inside = C.exp_map_batch(sphere1, np.zeros(2), X)
    assert inside.all()
    for i in range(8):
        single = C.exp_map(sphere1, np.zeros(2), X[i])
        # fixed 64-step batch vs adaptive single: truncation-limited agreement
        assert np.abs(batch[i] - single).max() <= 1e-6


def test_exp_sphere_preserves_speed(sphere1):
    p = np.zeros(2)
    X = np.array([0.9, 0.4])
    q, v = C.exp_map(sphere1, p, X, return_velocity=True)
    s0 = X @ sphere1.metric(p) @ X
    s1 = v @ sphere1.metric(q) @ v
    assert abs(s1 - s0) / s0 <= 1e-9


def test_exp_leaves_domain_raises(flat4):
    with pytest.raises(LeftDomain):
        C.exp_map(flat4, np.zeros(4), np.array([5.0, 0.0, 0.0, 0.0]))


def test_exp_step_budget_raises(sphere1):
    with pytest.raises(StepUnderflow):
        C.exp_map(sphere1, np.zeros(2), np.array([1.0, 0.2]), max_steps=2)


# ---------------------------------------------------------------------------
# parallel transport


def test_transport_flat_identity(flat4):
    path = np.linspace(np.zeros(4), np.array([0.5, 0.3, -0.2, 0.1]), 9)
    v = np.array([1.0, 2.0, -1.0, 0.5])
    out = C.parallel_transport(flat4, path, v)
    assert np.abs(out - v).max() <= 1e-14


def test_transport_preserves_inner_products(sphere1):
    p = np.array([0.2, -0.1])
    X = np.array([0.7, 0.5])
    path = C.geodesic_polyline(sphere1, p, X, nodes=17, steps_per=4)
    v = np.array([[0.3, -0.8], [1.1, 0.4]])
    out = C.parallel_transport(sphere1, path, v)
    g0, g1 = sphere1.metric(path[0]), sphere1.metric(path[-1])
    ip0 = v @ g0 @ v.T
    ip1 = out @ g1 @ out.T
    assert np.abs(ip1 - ip0).max() <= 1e-8


def test_transport_square_holonomy_matches_curvature_area(sphere1):
    # curvature 1 at the center: rotation angle around a small geodesic
    # square of metric side s approaches s^2
    for s, lo, hi in ((0.15, 0.90, 1.10), (0.25, 0.90, 1.10)):
        half = s / 2.0  # metric factor at the origin is 4: coordinate side s/2
        corners = np.array(
            [[0.0, 0.0], [half, 0.0], [half, half], [0.0, half], [0.0, 0.0]]
        )
        nodes = []
        for a, b in zip(corners[:-1], corners[1:]):
            nodes.append(np.linspace(a, b, 9)[:-1])
        path = np.vstack(nodes + [corners[-1:]])
        v = np.array([1.0, 0.0])
        out = C.parallel_transport(sphere1, path, v, substeps=16)
        g0 = sphere1.metric(np.zeros(2))
        cosang = (out @ g0 @ v) / np.sqrt((out @ g0 @ out) * (v @ g0 @ v))
        angle = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
        assert lo <= angle / s**2 <= hi


def test_transport_rejects_path_leaving_box(sphere1):
    path = np.linspace(np.zeros(2), np.array([4.0, 0.0]), 9)
    with pytest.raises(LeftDomain):
        C.parallel_transport(sphere1, path, np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# covariant derivative of the almost complex structure, checked through
# transport: frame-expressed J along a geodesic differentiates to nabla_J


def _dual_path_defect(m, x0, Z, h=1e-3):
    outs = []
    for s in (h, -h):
        path = C.geodesic_polyline(m, x0, s * Z, nodes=9, steps_per=2)
        frame = C.parallel_transport(m, path, np.eye(m.dim)).T
        outs.append(np.linalg.solve(frame, m.j(path[-1]) @ frame))
    fd = (outs[0] - outs[1]) / (2.0 * h)
    direct = np.einsum("mbv,v->mb", G.nabla_j_tensor(m, x0), Z)
    return float(np.abs(fd - direct).max())


def test_nabla_j_agrees_with_transported_frame_derivative(conformal4):
    x0 = np.array([0.15, -0.2, 0.3, 0.1])
    Z = np.array([0.3, -0.5, 0.2, 0.4])
    assert _dual_path_defect(conformal4, x0, Z) <= 1e-6


def test_nabla_j_transport_check_perturbed():
    m = G.perturbed_family(eps=0.05)
    x0 = np.array([0.3, -0.4, 0.1, 0.25])
    Z = np.array([0.3, -0.5, 0.2, 0.4])
    assert _dual_path_defect(m, x0, Z) <= 1e-6


# ---------------------------------------------------------------------------
# normal charts


def test_flat_chart_probe_and_radius(flat_chart):
    # probe cap is the box margin (1.7), and every rung inverts in flat space
    assert abs(flat_chart.est_inj - 1.7) <= 1e-12
    assert abs(flat_chart.radius - 0.68) <= 1e-12


def test_flat_chart_affine_roundtrip(flat_chart):
    X = C.ball_net(4, 20) * flat_chart.radius
    q = flat_chart.forward(X)
    expect = flat_chart.center + X @ flat_chart.frame.T
    assert np.abs(q - expect).max() <= 1e-13
    back = flat_chart.inverse(q)
    assert np.abs(back - X).max() <= 1e-10


def test_sphere_chart_probe(sphere_chart):
    # domain-capped probe: the coordinate image of longer rungs exits the box
    assert abs(sphere_chart.est_inj - 2.0) <= 1e-12
    assert abs(sphere_chart.radius - 1.5) <= 1e-12


def test_sphere_inverse_of_forward(sphere_chart):
    X = C.ball_net(2, 100) * 1.5
    q = sphere_chart.forward(X)
    back = sphere_chart.inverse(q)
    assert np.abs(back - X).max() <= 1e-9


def test_rescaled_chart_probe_scales(rescaled_sphere_chart):
    assert abs(rescaled_sphere_chart.est_inj - 20.0) <= 1e-9
    assert abs(rescaled_sphere_chart.radius - 15.0) <= 1e-9


def test_inverse_diverges_for_far_point(sphere_chart):
    with pytest.raises(ShootingDiverged):
        sphere_chart.inverse(np.array([2.9, 2.9]), max_iter=4)


def test_chart_rejects_empty_radius(flat4):
    with pytest.raises(ChartFailure):
        C.normal_chart(flat4, np.zeros(4), radius=-1.0)


def test_forward_outside_box_raises(sphere_chart):
    with pytest.raises(LeftDomain):
        sphere_chart.forward(np.array([2.8, 0.0]))


# ---------------------------------------------------------------------------
# distance fields


def test_distance_flat_is_euclidean(flat4):
    p = np.array([0.1, 0.2, -0.3, 0.05])
    field = C.distance_field(flat4, p, radius=0.6)
    q = p + np.array([0.3, -0.2, 0.1, 0.25])
    assert abs(field.beta(q) - np.linalg.norm(q - p)) <= 1e-10


def test_distance_sphere_closed_form(sphere_chart):
    # distance from the pole point: 2 * arctan(Euclidean radius)
    field = C.DistanceField(sphere_chart)
    for q in (np.array([0.8, 0.3]), np.array([-0.2, 0.6]), np.array([0.45, -0.45])):
        expect = 2.0 * np.arctan(np.linalg.norm(q))
        # truncation of the fixed-step flow bounds agreement with the
        # analytic arclength, not the inverse tolerance
        assert abs(field.beta(q) - expect) <= 1e-6


def test_distance_equals_radial_coordinate(sphere_chart):
    X = C.ball_net(2, 100) * 1.4
    r = np.sqrt((X**2).sum(-1))
    q = sphere_chart.forward(X)
    field = C.DistanceField(sphere_chart)
    assert np.abs(field.beta(q) - r).max() <= 1e-9


def test_distance_symmetry_spot_check(sphere1):
    centers = C.ball_net(2, 10) * 0.6
    partners = np.roll(centers, 3, axis=0) * -0.9
    for p, q in zip(centers, partners):
        bp = C.distance_field(sphere1, p, radius=2.0).beta(q)
        bq = C.distance_field(sphere1, q, radius=2.0).beta(p)
        assert abs(bp - bq) <= 1e-6


# ---------------------------------------------------------------------------
# tensor norms in chart coordinates


def test_flat_ck_norms(flat4, flat_chart):
    p = flat_chart.center
    c0 = C.tensor_ck_norm(flat4, p, 0, chart=flat_chart)
    c1 = C.tensor_ck_norm(flat4, p, 1, chart=flat_chart)
    c2 = C.tensor_ck_norm(flat4, p, 2, chart=flat_chart)
    assert abs(c0 - 2.0) <= 1e-10
    # sampled differences of an exactly constant field: rounding floor only
    assert c1 <= 1e-8
    assert c2 <= 5e-8
    j0 = C.tensor_ck_norm(flat4, p, 0, kind="end", chart=flat_chart)
    j1 = C.tensor_ck_norm(flat4, p, 1, kind="end", chart=flat_chart)
    assert abs(j0 - 2.0) <= 1e-10
    assert j1 <= 1e-8


def test_sphere_c2_norm_value_and_stability(sphere1, sphere_chart):
    p = np.zeros(2)
    a = C.tensor_ck_norm(sphere1, p, 2, chart=sphere_chart, fd_frac=0.02)
    b = C.tensor_ck_norm(sphere1, p, 2, chart=sphere_chart, fd_frac=0.01)
    assert abs(a - 1.1468) <= 2e-3
    assert abs(a - b) / max(a, b) <= 0.05


def test_sphere_j_norms_regression(sphere1, sphere_chart):
    p = np.zeros(2)
    j0 = C.tensor_ck_norm(sphere1, p, 0, kind="end", chart=sphere_chart)
    j1 = C.tensor_ck_norm(sphere1, p, 1, kind="end", chart=sphere_chart)
    assert abs(j0 - 1.62496) <= 2e-2
    assert abs(j1 - 1.13567) <= 2e-2


def test_rescaling_divides_c2_by_square(sphere1, sphere_chart, rescaled_sphere, rescaled_sphere_chart):
    a = C.tensor_ck_norm(sphere1, np.zeros(2), 2, chart=sphere_chart)
    b = C.tensor_ck_norm(rescaled_sphere, np.zeros(2), 2, chart=rescaled_sphere_chart)
    assert abs(b - a / 100.0) <= 1e-6


def test_admissibility_after_rescaling(rescaled_sphere, rescaled_sphere_chart):
    rep = C.admissibility(rescaled_sphere, np.zeros(2), chart=rescaled_sphere_chart)
    assert rep.passed
    assert abs(rep.g_c2 - 0.011468) <= 1e-4
    assert 10.0 * rescaled_sphere.dim**2 * rep.g_c2 <= 1.0
    assert rep.est_inj >= 2.0


# ---------------------------------------------------------------------------
# chart estimate reports


def test_report_flat_all_zero(flat4, flat_chart):
    rep = C.chart_estimate_report(flat_chart, 0.5)
    assert rep.passed
    # ratios divide rounding residue by small |q| powers, so the floor sits
    # above raw machine epsilon
    assert max(abs(v) for v in rep.measured.values()) <= 1e-9


def test_report_sphere_small_ball(sphere1, sphere_chart):
    rep = C.chart_estimate_report(sphere_chart, 0.3)
    assert rep.passed
    assert rep.measured["metric_deviation_ratio"] <= 1.0
    assert rep.measured["christoffel_ratio"] <= 1.0
    assert 0.30 <= rep.margin <= 0.37


def test_report_rescaled_sphere_wide_margin(rescaled_sphere, rescaled_sphere_chart):
    rep = C.chart_estimate_report(rescaled_sphere_chart, 1.0)
    assert rep.passed
    assert rep.margin > 0.5


# ---------------------------------------------------------------------------
# adapted charts along totally geodesic model submanifolds


def test_adapted_chart_flat_is_identity(flat4):
    L = G.LagrangianModel.coordinate_plane(flat4)
    chart = C.l_adapted_chart(flat4, L, np.array([0.1, -0.2]), radius=0.8)
    X = C.ball_net(4, 30) * 0.8
    q = chart.forward(X)
    expect = chart.center + X @ chart.frame.T
    assert np.abs(q - expect).max() <= 1e-12
    # frame pairs: normal partner is the J-image of the tangent one
    j0 = flat4.j(chart.center)
    for k in range(2):
        assert np.abs(j0 @ chart.frame[:, 2 * k] - chart.frame[:, 2 * k + 1]).max() <= 1e-13


def test_adapted_chart_flat_maps_plane_to_even_zero(flat4):
    L = G.LagrangianModel.coordinate_plane(flat4)
    chart = C.l_adapted_chart(flat4, L, np.array([0.1, -0.2]), radius=0.8)
    t = np.zeros((12, 4))
    t[:, 0::2] = C.ball_net(2, 12) * 0.7
    q = chart.forward(t)
    assert np.abs(q[:, 1::2]).max() <= 1e-12  # stays inside the plane
    back = chart.inverse(q)
    assert np.abs(back[:, 1::2]).max() <= 1e-10


def test_adapted_report_flat(flat4):
    L = G.LagrangianModel.coordinate_plane(flat4)
    chart = C.l_adapted_chart(flat4, L, np.array([0.1, -0.2]), radius=0.8)
    rep = C.chart_estimate_report(chart, 0.6, samples=24)
    assert rep.passed
    assert rep.measured["christoffel_on_L"] <= 1e-14
    assert rep.measured["block_structure_defect"] <= 1e-12
    assert rep.measured["origin_metric_defect"] <= 1e-11


def test_adapted_report_conformal_even_raw_scale(conformal4_even):
    # metric block structure and vanishing mixed Christoffel components hold
    # at any scale; the small-ball ratio bounds need the rescaled regime
    L = G.LagrangianModel.coordinate_plane(conformal4_even)
    chart = C.l_adapted_chart(conformal4_even, L, np.array([0.1, -0.2]), radius=0.5)
    rep = C.chart_estimate_report(chart, 0.5, samples=24)
    assert rep.measured["block_structure_defect"] <= 1e-6
    assert rep.measured["christoffel_on_L"] <= 1e-7
    assert rep.measured["origin_metric_defect"] <= 1e-6
    assert rep.measured["origin_christoffel_defect"] <= 1e-7


def test_adapted_report_conformal_even_rescaled(conformal4_even):
    big = G.rescale(conformal4_even, 20.0)
    L = G.LagrangianModel.coordinate_plane(big)
    chart = C.l_adapted_chart(big, L, np.array([0.1, -0.2]), radius=1.0)
    rep = C.chart_estimate_report(chart, 1.0, samples=24)
    assert rep.passed
    assert rep.margin > 0.9


def test_adapted_report_perturbed(perturbed4_adapted):
    L = G.LagrangianModel.coordinate_plane(perturbed4_adapted)
    chart = C.l_adapted_chart(
        perturbed4_adapted, L, np.array([0.1, -0.2]), radius=0.5, steps=32
    )
    rep = C.chart_estimate_report(chart, 0.5, samples=16)
    assert rep.passed
    assert rep.measured["block_structure_defect"] <= 1e-7
    assert rep.measured["christoffel_on_L"] <= 1e-7
    assert rep.measured["origin_christoffel_defect"] <= 1e-7


# ---------------------------------------------------------------------------
# geodesic curvature of discrete paths


def test_semicircle_curvature_and_short_path_bound(flat4):
    # a path of length l leaving the plane orthogonally and returning must
    # bend at rate at least 1/(2l) - 1; semicircles realize curvature 1/R
    th = np.linspace(0.0, np.pi, 201)
    for radius in (0.05, 0.1, 0.2):
        arc = np.stack(
            [radius * np.cos(th), radius * np.sin(th), np.zeros_like(th), np.zeros_like(th)],
            axis=-1,
        )
        kg = C.path_geodesic_curvature(flat4, arc)
        assert np.abs(kg * radius - 1.0).max() <= 1e-3
        length = np.pi * radius
        assert kg.max() >= 1.0 / (2.0 * length) - 1.0
