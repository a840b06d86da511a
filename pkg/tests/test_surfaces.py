"""Discrete surfaces: polar grids, induced geometry, curvature, exchange files."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcurvelab import geometry as G
from jcurvelab import surfaces as S
from jcurvelab.errors import (
    DegenerateMetric,
    EmptyRegion,
    LeftDomain,
    NotImmersed,
    ParseError,
)

Z2 = S.holomorphic_graph({2: 1.0})
Z3 = S.holomorphic_graph({3: 1.0})
Z2_AREA = np.pi * 0.25 + 2.0 * np.pi * 0.5**4


def sup(x):
    return float(np.abs(np.asarray(x)).max())


def quartic_graph(s, t):
    # generic graph with nonvanishing fourth derivatives, so every stencil
    # contributes genuine truncation error
    w1 = s**4 - 3.0 * s**2 * t**2 + 0.5 * s * t
    w2 = s * t**3 + 0.3 * s**2 * t - t**2
    return np.stack([w1, w2], axis=-1)


@pytest.fixture(scope="module")
def flat_plane(flat4):
    zero = lambda s, t: np.zeros(s.shape + (2,))
    return S.graph_surface(flat4, zero, 0.5, 1.0 / 32)


@pytest.fixture(scope="module")
def z2_32(flat4):
    return S.graph_surface(flat4, Z2, 0.5, 1.0 / 32)


@pytest.fixture(scope="module")
def z2_64(flat4):
    return S.graph_surface(flat4, Z2, 0.5, 1.0 / 64)


# ---------------------------------------------------------------------------
# grid layout


def test_ring_and_theta_counts():
    assert S.ring_count(0.5, 1.0 / 32) == 16
    assert S.ring_count(0.5, 1.0 / 64) == 32
    assert S.ring_count(0.5, 1.0 / 128) == 64
    assert S.theta_count(0.5, 1.0 / 32) == 104
    assert S.theta_count(0.5, 1.0 / 64) == 200
    assert S.theta_count(0.5, 1.0 / 128) == 400
    assert S.theta_count(0.25, 1.0 / 32) == 48


def test_ring_count_rejects_non_multiple_radius():
    with pytest.raises(ValueError):
        S.ring_count(0.5, 0.11)


def test_ring_count_rejects_too_few_rings():
    with pytest.raises(ValueError):
        S.ring_count(3.0 / 32, 1.0 / 32)


def test_half_grid_must_sit_on_centerline():
    with pytest.raises(ValueError):
        S.PolarGrid(0.5, 1.0 / 32, center=(0.0, 0.1), half=True)


def test_trig_tables_exactly_mirror_symmetric():
    grid = S.PolarGrid(0.5, 1.0 / 32)
    cos_t, sin_t = grid.trig()
    nt = grid.n_theta
    assert sin_t[0] == 0.0 and sin_t[nt // 2] == 0.0
    j = np.arange(nt)
    j_ref = (-j) % nt
    assert np.array_equal(cos_t, cos_t[j_ref])
    assert np.array_equal(sin_t, -sin_t[j_ref])


def test_cell_areas_sum_to_disc_area():
    grid = S.PolarGrid(0.5, 1.0 / 32)
    assert abs(grid.cell_areas().sum() - np.pi * 0.25) <= 1e-14
    half = S.PolarGrid(0.5, 1.0 / 32, half=True)
    assert abs(half.half_weights().sum() - np.pi * 0.125) <= 1e-14


def test_node_layout_replicates_pole_row():
    grid = S.PolarGrid(0.5, 1.0 / 32, center=(0.3, -0.2))
    nodes = grid.nodes()
    assert nodes.shape == (17, 104, 2)
    assert np.array_equal(nodes[0], np.broadcast_to([0.3, -0.2], (104, 2)))


def test_full_disc_boundary_masks():
    masks = S.PolarGrid(0.5, 1.0 / 32).boundary_masks()
    assert masks["interior"].sum() == 1 + 15 * 104
    assert masks["arc"].sum() == 104
    assert masks["segment"].sum() == 0


def test_half_disc_masks_partition_public_nodes():
    grid = S.PolarGrid(0.5, 1.0 / 32, half=True)
    masks = grid.boundary_masks()
    assert masks["interior"].sum() == 765
    assert masks["arc"].sum() == 53
    assert masks["segment"].sum() == 31
    union = masks["interior"] | masks["arc"] | masks["segment"]
    assert np.array_equal(union, grid.public_mask())
    assert not (masks["interior"] & masks["arc"]).any()
    assert not (masks["interior"] & masks["segment"]).any()
    assert not (masks["arc"] & masks["segment"]).any()


# ---------------------------------------------------------------------------
# construction and validation


def test_graph_surface_carries_node_coordinates(z2_32):
    assert np.array_equal(z2_32.values[..., :2], z2_32.grid.nodes())


def test_tampered_base_coordinates_rejected(z2_32, flat4):
    vals = z2_32.values.copy()
    vals[3, 5, 0] += 1e-6
    with pytest.raises(NotImmersed):
        S.GridImmersion(z2_32.grid, flat4, vals)


def test_wrong_value_shape_rejected(flat4):
    grid = S.PolarGrid(0.5, 1.0 / 32)
    with pytest.raises(ValueError):
        S.GridImmersion(grid, flat4, np.zeros((17, 104, 3)))


def test_pole_row_must_be_replicated(z2_32, flat4):
    vals = z2_32.values.copy()
    vals[0, 7, 2] += 1.0
    with pytest.raises(ValueError):
        S.GridImmersion(z2_32.grid, flat4, vals, graphical=False)


def test_values_outside_chart_box_rejected(flat4):
    big = lambda s, t: np.full(s.shape + (2,), 3.0)
    with pytest.raises(LeftDomain):
        S.graph_surface(flat4, big, 0.5, 1.0 / 32)


def test_constant_map_has_degenerate_metric(flat4):
    grid = S.PolarGrid(0.5, 1.0 / 32)
    vals = np.zeros(grid.nodes().shape[:-1] + (4,))
    u = S.GridImmersion(grid, flat4, vals, graphical=False)
    with pytest.raises(DegenerateMetric):
        S.induced_metric(u)


def test_integrate_rejects_empty_region(z2_32):
    nothing = np.zeros((17, 104), dtype=bool)
    with pytest.raises(EmptyRegion):
        S.integrate(z2_32, region=nothing)


def test_sphere_patch_needs_three_ambient_coordinates():
    with pytest.raises(ValueError):
        S.sphere_patch(G.flat_family(n=1), 1.0, 0.5, 1.0 / 32)


# ---------------------------------------------------------------------------
# flat plane: everything is exact


def test_flat_graph_metric_is_identity(flat_plane):
    gam, gam_inv, root = S.induced_metric(flat_plane)
    assert sup(gam - np.eye(2)) <= 1e-12
    assert sup(gam_inv - np.eye(2)) <= 1e-12
    assert sup(root - 1.0) <= 1e-12


def test_flat_graph_curvature_vanishes(flat_plane):
    cf = S.curvature_field(flat_plane)
    assert sup(cf.B_norm) <= 1e-12
    assert sup(cf.H_norm) <= 1e-12
    assert sup(cf.K_gauss) <= 1e-8
    assert sup(cf.gradB_norm) <= 1e-12


def test_flat_graph_spans_a_complex_line(flat_plane):
    assert sup(S.dbar_residual(flat_plane)) <= 1e-12


def test_flat_area_exact(flat_plane):
    assert abs(S.integrate(flat_plane) - np.pi * 0.25) <= 1e-13


def test_flat_offcenter_area_exact(flat4):
    zero = lambda s, t: np.zeros(s.shape + (2,))
    u = S.graph_surface(flat4, zero, 0.5, 1.0 / 32, center=(0.4, -0.3))
    assert abs(S.integrate(u) - np.pi * 0.25) <= 1e-13


def test_flat_laplacian_of_squared_radius(flat_plane):
    f = (flat_plane.grid.nodes() ** 2).sum(-1)
    lap = S.laplace_beltrami(flat_plane, f)
    # the one-sided outer ring is extrapolated, every assembled stencil is exact
    assert sup(lap[:-1] - 4.0) <= 1e-10


def test_flat_divergence_defect_vanishes(flat_plane):
    f = (flat_plane.grid.nodes() ** 2).sum(-1)
    assert S.divergence_defect(flat_plane, f) <= 1e-12


def test_totally_real_plane_has_unit_defect_everywhere(flat4):
    # the (s, 0, t, 0) plane maximizes the anti-complex energy: sqrt(2) per node
    grid = S.PolarGrid(0.5, 1.0 / 32)
    nodes = grid.nodes()
    vals = np.zeros(nodes.shape[:-1] + (4,))
    vals[..., 0] = nodes[..., 0]
    vals[..., 2] = nodes[..., 1]
    vals[0] = vals[0, 0]
    u = S.GridImmersion(grid, flat4, vals, graphical=False)
    assert sup(S.dbar_residual(u) - np.sqrt(2.0)) <= 1e-13


# ---------------------------------------------------------------------------
# squaring graph: closed forms


def test_z2_induced_metric_closed_form(z2_32):
    rho2 = (z2_32.grid.nodes() ** 2).sum(-1)
    gam, _, _ = S.induced_metric(z2_32)
    assert sup(gam[..., 0, 0] - 1.0 - 4.0 * rho2) <= 1e-12
    assert sup(gam[..., 1, 1] - 1.0 - 4.0 * rho2) <= 1e-12
    assert sup(gam[..., 0, 1]) <= 1e-12


def test_z2_inverse_metric_uniformly_elliptic(z2_32):
    _, gam_inv, _ = S.induced_metric(z2_32)
    eigs = np.linalg.eigvalsh(gam_inv)
    assert eigs.min() >= 0.25
    # worst node sits on the boundary ring where 1/(1 + 4 rho^2) = 1/2
    assert abs(eigs.min() - 0.5) <= 1e-9


@pytest.mark.parametrize("h", [1.0 / 32, 1.0 / 64])
def test_z2_complex_tangencies(flat4, h):
    u = S.graph_surface(flat4, Z2, 0.5, h)
    db = S.dbar_residual(u)
    assert sup(db) <= 5.0 * h**2
    assert sup(db) <= 1e-12


def test_z2_curvature_at_center(z2_32, z2_64):
    for u, h in ((z2_32, 1.0 / 32), (z2_64, 1.0 / 64)):
        cf = S.second_fundamental(u)
        assert abs(cf.B_norm[0, 0] - 4.0) <= 10.0 * h**2
        assert abs(cf.B_norm[0, 0] - 4.0) <= 1e-11
        K = S.gauss_curvature(u)
        assert abs(K[0, 0] + 8.0) <= 20.0 * h
        assert abs(K[0, 0] + 8.0) <= 1e-9


def test_z2_is_minimal(z2_32):
    h = 1.0 / 32
    cf = S.second_fundamental(z2_32)
    assert sup(cf.H_norm) <= 10.0 * h**2
    assert sup(cf.H_norm) <= 1e-11
    assert sup(S.mc_residual(z2_32)) <= 1e-11


def test_z2_gauss_relation_defect_small(z2_32, z2_64):
    # ambient curvature - intrinsic curvature + the quadratic tensor terms
    assert sup(S.gauss_defect(z2_32)[:-1]) <= 1e-7
    assert sup(S.gauss_defect(z2_64)[:-1]) <= 1e-7


def test_z2_both_norm_routes_agree(z2_32):
    cf = S.second_fundamental(z2_32)
    assert sup(cf.A_norm - cf.B_norm) <= 1e-8
    assert sup(cf.A_norm - cf.B_norm) <= 1e-10
    direct, dual = S.grad_B_norm(z2_32)
    assert sup(direct - dual) <= 1e-8
    assert sup(direct - dual) <= 1e-10


def test_z2_area_converges_to_closed_form(flat4, z2_32, z2_64):
    a32 = S.integrate(z2_32)
    a64 = S.integrate(z2_64)
    assert abs(a32 - 1.1788642355) <= 1e-9
    e32, e64 = abs(a32 - Z2_AREA), abs(a64 - Z2_AREA)
    assert e32 <= 1e-3
    assert 3.0 <= e32 / e64 <= 5.0
    u = S.graph_surface(flat4, Z2, 0.5, 1.0 / 128)
    a128 = S.integrate(u)
    assert abs(a128 - 1.178145181995794) <= 1e-9
    assert abs(a128 - Z2_AREA) <= 2e-3


def test_z2_area_additive_over_regions(z2_32):
    rho = np.sqrt((z2_32.grid.nodes() ** 2).sum(-1))
    inner = rho <= 0.25 + 1e-12
    total = S.integrate(z2_32)
    parts = S.integrate(z2_32, region=inner) + S.integrate(z2_32, region=~inner)
    assert abs(parts - total) <= 1e-12


@pytest.mark.parametrize("h", [1.0 / 32, 1.0 / 64])
def test_z2_laplacian_of_squared_distance(flat4, h):
    u = S.graph_surface(flat4, Z2, 0.5, h)
    beta2 = ((u.values - u.pole) ** 2).sum(-1)
    lap = S.laplace_beltrami(u, beta2)
    assert sup(lap[:-1] - 4.0) <= 20.0 * h**2


def test_z2_divergence_defect_telescopes(z2_32):
    beta2 = ((z2_32.values - z2_32.pole) ** 2).sum(-1)
    assert S.divergence_defect(z2_32, beta2) <= 1e-12


def test_z2_curvature_gradient_stable_at_center(flat4):
    # reflection symmetry forces the gradient to vanish at the center, so
    # successive refinements must not move the value
    vals = []
    for h in (1.0 / 16, 1.0 / 32, 1.0 / 64):
        u = S.graph_surface(flat4, Z2, 0.5, h)
        direct, dual = S.grad_B_norm(u)
        assert sup(direct - dual) <= 1e-10
        vals.append(float(direct[0, 0]))
    assert all(abs(v) <= 1e-8 for v in vals)
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    assert d2 <= 0.5 * d1 + 1e-9


# ---------------------------------------------------------------------------
# round sphere patch


@pytest.mark.parametrize("h", [1.0 / 32, 1.0 / 64])
def test_sphere_patch_curvatures(flat4, h):
    u = S.sphere_patch(flat4, 1.0, 0.5, h)
    cf = S.second_fundamental(u)
    assert sup(cf.B_norm**2 - 2.0) <= 10.0 * h**2
    assert sup(cf.H_norm - 2.0) <= 10.0 * h**2
    assert sup(S.gauss_curvature(u) - 1.0) <= 2.0 * h**2
    assert sup(S.mc_residual(u) - 2.0) <= 10.0 * h**2


def test_sphere_patch_curvature_gradient_small(flat4):
    for h in (1.0 / 32, 1.0 / 64):
        u = S.sphere_patch(flat4, 1.0, 0.5, h)
        direct, dual = S.grad_B_norm(u)
        assert sup(direct) <= 50.0 * h
        assert sup(direct) <= 3.0 * h
        assert sup(direct - dual) <= 1e-8


def test_sphere_gauss_relation_second_order(flat4):
    sups = []
    for h in (1.0 / 32, 1.0 / 64, 1.0 / 128):
        u = S.sphere_patch(flat4, 1.0, 0.5, h)
        sups.append(sup(S.gauss_defect(u)[:-1]))
    assert sups[0] <= 2e-4
    assert 3.0 <= sups[0] / sups[1] <= 5.0
    assert 3.0 <= sups[1] / sups[2] <= 5.0


def test_sphere_patch_rescales_with_radius(flat4):
    u1 = S.sphere_patch(flat4, 1.0, 0.5, 1.0 / 32)
    u2 = S.sphere_patch(flat4, 2.0, 0.5, 1.0 / 32)
    cf1, cf2 = S.second_fundamental(u1), S.second_fundamental(u2)
    assert sup(2.0 * cf2.H_norm - cf1.H_norm) <= 1e-2
    assert sup(2.0 * cf2.B_norm - cf1.B_norm) <= 1e-2


# ---------------------------------------------------------------------------
# second-order convergence on generic smooth data


def test_quartic_mc_residual_second_order(perturbed4):
    vals = []
    for h in (1.0 / 32, 1.0 / 64, 1.0 / 128):
        u = S.graph_surface(perturbed4, quartic_graph, 0.5, h)
        mc = S.mc_residual(u)
        vals.append(float(mc[round(0.25 / h), 0]))
    assert abs(vals[0] - 1.98511567862) <= 1e-8
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    assert 3.0 <= d1 / d2 <= 5.0


def test_quartic_gauss_relation_second_order(flat4):
    sups = []
    for h in (1.0 / 32, 1.0 / 64, 1.0 / 128):
        u = S.graph_surface(flat4, quartic_graph, 0.5, h)
        sups.append(sup(S.gauss_defect(u)[:-1]))
    assert 3.0 <= sups[0] / sups[1] <= 5.0
    assert 3.0 <= sups[1] / sups[2] <= 5.0


# ---------------------------------------------------------------------------
# invariances


def test_b_tensor_symmetric_in_surface_slots(z2_32):
    B = S.second_fundamental(z2_32).B
    assert sup(B[..., 0, 1, :] - B[..., 1, 0, :]) <= 1e-13


def test_tangent_frame_rotation_invariance(z2_32):
    cf = S.second_fundamental(z2_32)
    cfr = S.second_fundamental(z2_32, frame_angle=0.7)
    assert sup(cf.B_norm - cfr.B_norm) <= 1e-12
    assert sup(cf.H - cfr.H) <= 1e-12
    assert sup(cf.H_norm - cfr.H_norm) <= 1e-12


def test_metric_rescaling_laws(flat4, z2_32):
    c = 3.0
    scaled = S.GridImmersion(z2_32.grid, G.rescale(flat4, c), z2_32.values)
    cf, cfc = S.second_fundamental(z2_32), S.second_fundamental(scaled)
    assert sup(cfc.B_norm * c - cf.B_norm) / sup(cf.B_norm) <= 1e-10
    assert sup(cfc.H_norm * c - cf.H_norm) <= 1e-10
    assert sup(S.dbar_residual(scaled) - S.dbar_residual(z2_32)) <= 1e-12
    assert abs(S.integrate(scaled) - c**2 * S.integrate(z2_32)) <= 1e-10


# ---------------------------------------------------------------------------
# half discs


def test_half_disc_area_is_half(flat4, z2_32):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    assert abs(S.integrate(uh) - S.integrate(z2_32) / 2.0) <= 1e-13


def test_half_disc_centerline_parity_exact(flat4):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    nt = uh.grid.n_theta
    # odd-parity fiber component vanishes identically on the t = 0 line
    assert sup(uh.values[:-1, 0, 3]) == 0.0
    assert sup(uh.values[1:-1, nt // 2, 3]) == 0.0
    j_ref = (-np.arange(nt)) % nt
    signs = S.parity_signs(4)
    assert np.array_equal(uh.values, uh.values[:, j_ref, :] * signs)


def test_symmetrize_fixes_symmetric_data(flat4):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    again = S.symmetrize_half(uh.grid, uh.values)
    assert np.array_equal(again, uh.values)


def test_half_disc_curvature_matches_full(flat4, z2_32):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    cf, cfh = S.second_fundamental(z2_32), S.second_fundamental(uh)
    keep = uh.grid.public_mask()
    assert sup((cf.B_norm - cfh.B_norm)[keep]) <= 1e-12


def test_divergence_defect_requires_full_disc(flat4):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    f = ((uh.values - uh.pole) ** 2).sum(-1)
    with pytest.raises(ValueError):
        S.divergence_defect(uh, f)


# ---------------------------------------------------------------------------
# more holomorphic graphs


def test_z3_graph_is_minimal_and_complex_tangent(flat4):
    u = S.graph_surface(flat4, Z3, 0.5, 1.0 / 32)
    assert sup(S.dbar_residual(u)) <= 1e-12
    assert sup(S.second_fundamental(u).H_norm) <= 1e-10


@settings(max_examples=15, derandomize=True, deadline=None)
@given(
    st.floats(-0.5, 0.5),
    st.floats(-0.5, 0.5),
    st.floats(-0.3, 0.3),
    st.floats(-0.3, 0.3),
)
def test_holomorphic_graphs_are_complex_tangent(a1r, a1i, a3r, a3i):
    flat = G.flat_family(n=2)
    fn = S.holomorphic_graph({1: a1r + 1j * a1i, 3: a3r + 1j * a3i})
    u = S.graph_surface(flat, fn, 0.5, 1.0 / 32)
    assert sup(S.dbar_residual(u)) <= 1e-10


@settings(max_examples=10, derandomize=True, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generic_graph_invariants(seed):
    rng = np.random.default_rng(seed)
    coef = 0.4 * rng.standard_normal((2, 3, 3))

    def fn(s, t):
        powers = np.stack([s**i * t**j for i in range(3) for j in range(3)], axis=-1)
        flat_c = coef.reshape(2, 9)
        return powers @ flat_c.T

    flat = G.flat_family(n=2)
    u = S.graph_surface(flat, fn, 0.5, 1.0 / 32)
    cf = S.second_fundamental(u)
    B = cf.B
    assert sup(B[..., 0, 1, :] - B[..., 1, 0, :]) <= 1e-10
    assert sup(cf.A_norm - cf.B_norm) <= 1e-9
    cfr = S.second_fundamental(u, frame_angle=1.1)
    assert sup(cf.B_norm - cfr.B_norm) <= 1e-9
    beta2 = ((u.values - u.pole) ** 2).sum(-1)
    assert S.divergence_defect(u, beta2) <= 1e-9


# ---------------------------------------------------------------------------
# exchange files


def test_csv_roundtrip_exact(z2_32, flat4, tmp_path):
    path = str(tmp_path / "surface.csv")
    S.save_grid(z2_32, path)
    back = S.load_grid(path, flat4)
    assert np.array_equal(back.values, z2_32.values)
    assert back.grid == z2_32.grid
    assert back.graphical


def test_csv_rewrite_byte_identical(z2_32, flat4, tmp_path):
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    S.save_grid(z2_32, p1)
    S.save_grid(S.load_grid(p1, flat4), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_binary_roundtrip_preserves_half_flag(flat4, tmp_path):
    uh = S.graph_surface(flat4, Z2, 0.5, 1.0 / 32, half=True)
    path = str(tmp_path / "surface.bin")
    S.save_grid(uh, path)
    back = S.load_grid(path, flat4)
    assert np.array_equal(back.values, uh.values)
    assert back.grid.half


def test_binary_rewrite_byte_identical(z2_32, flat4, tmp_path):
    p1, p2 = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    S.save_grid(z2_32, p1)
    S.save_grid(S.load_grid(p1, flat4), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_roundtrip_preserves_nongraphical_flag(flat4, tmp_path):
    u = S.sphere_patch(flat4, 1.0, 0.5, 1.0 / 32)
    for name in ("patch.csv", "patch.bin"):
        path = str(tmp_path / name)
        S.save_grid(u, path)
        back = S.load_grid(path, flat4)
        assert not back.graphical
        assert np.array_equal(back.values, u.values)


def test_load_rejects_bad_magic(flat4, tmp_path):
    path = str(tmp_path / "junk.bin")
    with open(path, "wb") as fh:
        fh.write(b"XXXX" + b"\x00" * 80)
    with pytest.raises(ParseError):
        S.load_grid(path, flat4)


def test_load_rejects_unknown_version(z2_32, flat4, tmp_path):
    path = str(tmp_path / "v2.bin")
    S.save_grid(z2_32, path)
    raw = bytearray(open(path, "rb").read())
    raw[4:8] = np.array([2], dtype="<u4").tobytes()
    open(path, "wb").write(bytes(raw))
    with pytest.raises(ParseError):
        S.load_grid(path, flat4)


def test_load_rejects_truncated_body(z2_32, flat4, tmp_path):
    path = str(tmp_path / "short.bin")
    S.save_grid(z2_32, path)
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-16])
    with pytest.raises(ParseError):
        S.load_grid(path, flat4)


def test_load_rejects_malformed_csv_header(flat4, tmp_path):
    path = str(tmp_path / "bad.csv")
    with open(path, "w") as fh:
        fh.write("# shape disc\n0,0,0,0,0,0\n")
    with pytest.raises(ParseError):
        S.load_grid(path, flat4)


def test_load_rejects_missing_csv_field(z2_32, flat4, tmp_path):
    path = str(tmp_path / "missing.csv")
    S.save_grid(z2_32, path)
    lines = open(path).read().splitlines()
    lines = [ln for ln in lines if not ln.startswith("# h =")]
    open(path, "w").write("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        S.load_grid(path, flat4)
