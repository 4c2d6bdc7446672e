import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from rotirs.errors import DegenerateGeometryError, DomainError
from rotirs.experiment import default_geometry
from rotirs.geometry import (ArrayLayout, Orientation, ScenarioGeometry, bs_antenna_positions,
                             elevation_angles, feasibility_slacks, irs_element_positions,
                             local_coordinates, rotation_matrix, rotation_matrix_irs1,
                             rotation_matrix_irs2, single_feasibility_slacks, single_gain,
                             single_irs_geometry, surface_gains, surface_normal)

from oracles import (elevation, element_positions, irs1_axes, irs2_axes, rotation_irs1,
                     rotation_irs2)

angle = st.floats(-math.pi / 2, math.pi / 2, allow_nan=False)


def test_rotation_orthonormal_on_random_angles():
    rng = np.random.default_rng(0)
    o = Orientation(rng.uniform(-math.pi / 2, math.pi / 2, 1000),
                    rng.uniform(-math.pi / 2, math.pi / 2, 1000))
    for q in (rotation_matrix_irs1(o), rotation_matrix_irs2(o)):
        assert q.shape == (1000, 3, 3)
        assert_allclose(np.swapaxes(q, -1, -2) @ q, np.broadcast_to(np.eye(3), q.shape), atol=1e-12)
        assert_allclose(np.abs(np.linalg.det(q)), 1.0, atol=1e-12)


@given(angle, angle)
def test_rotation_matches_euler_composition(theta, phi):
    o = Orientation(theta, phi)
    assert_allclose(rotation_matrix_irs1(o), rotation_irs1(theta, phi), atol=1e-12)
    assert_allclose(rotation_matrix_irs2(o), rotation_irs2(theta, phi), atol=1e-12)


def test_rotation_at_zero_orientation():
    q = rotation_matrix_irs1(Orientation(0.0, 0.0))
    assert_allclose(q, [[0, 0, 1], [0, 1, 0], [-1, 0, 0]], atol=1e-15)
    assert_allclose(rotation_matrix(Orientation(0.0, 0.0), "irs2"), q, atol=1e-15)


@pytest.mark.parametrize("theta, phi", [(math.pi / 2 + 1e-6, 0.0), (0.0, -2.0), (math.nan, 0.0)])
def test_rotation_rejects_out_of_box(theta, phi):
    with pytest.raises(DomainError, match="theta" if theta != 0.0 else "phi"):
        rotation_matrix_irs1(Orientation(theta, phi))


def test_rotation_unknown_surface():
    with pytest.raises(ValueError):
        rotation_matrix(Orientation(0.0, 0.0), "irs3")


def test_box_edges_accepted():
    q = rotation_matrix_irs2(Orientation(-math.pi / 2, math.pi / 2))
    assert_allclose(q.T @ q, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("which, axes", [("irs1", irs1_axes), ("irs2", irs2_axes)])
@given(theta=angle, phi=angle)
@settings(max_examples=30)
def test_element_positions_match_index_map(which, axes, theta, phi):
    layout = ArrayLayout(3, 5, 0.0625)
    origin = np.array([1.0, -2.0, 3.0])
    got = irs_element_positions(origin, layout, Orientation(theta, phi), which)
    m_r, m_c = axes(theta, phi)
    want = element_positions(origin, 3, 5, 0.0625, m_r, m_c)
    assert_allclose(got, want, atol=1e-12)
    # all pairwise distances agree as well
    dg = np.linalg.norm(got[:, None] - got[None], axis=-1)
    dw = np.linalg.norm(want[:, None] - want[None], axis=-1)
    assert_allclose(dg, dw, atol=1e-12)


def test_same_row_spacing():
    layout = ArrayLayout(4, 6, 0.1)
    p = irs_element_positions(np.zeros(3), layout, Orientation(0.4, -0.9), "irs1")
    row, col = layout.indices()
    for i in range(layout.size):
        for j in range(layout.size):
            if row[i] == row[j]:
                assert math.isclose(np.linalg.norm(p[i] - p[j]), 0.1 * abs(col[i] - col[j]),
                                    abs_tol=1e-12)


def test_elements_lie_in_surface_plane():
    o = Orientation(np.array([-1.0, 0.2]), np.array([0.5, -1.4]))
    for which in ("irs1", "irs2"):
        p = irs_element_positions(np.array([3.0, 1.0, 2.0]), ArrayLayout(3, 3, 0.2), o, which)
        n = surface_normal(o, which)
        assert_allclose(np.einsum("bni,bi->bn", p - [3.0, 1.0, 2.0], n), 0.0, atol=1e-12)


def test_element_one_at_anchor_and_batch_shape():
    o = Orientation(np.zeros((2, 3)), np.full((2, 3), 0.1))
    p = irs_element_positions(np.array([1.0, 2.0, 3.0]), ArrayLayout(2, 2, 0.5), o, "irs2")
    assert p.shape == (2, 3, 4, 3)
    assert_allclose(p[..., 0, :], np.broadcast_to([1.0, 2.0, 3.0], (2, 3, 3)))


def test_bs_antennas_on_ground_plane():
    g = default_geometry(m=8)
    p = bs_antenna_positions(g)
    assert p.shape == (8, 3)
    assert_allclose(p[0], g.bs_origin)
    assert_allclose(p[:, 2], 0.0)
    row, col = g.bs_layout.indices()
    l = g.bs_layout.spacing
    assert_allclose(p - g.bs_origin, np.stack([-col * l, row * l, 0 * row], axis=-1), atol=1e-15)


def test_layout_indices_row_major():
    row, col = ArrayLayout(2, 3, 1.0).indices()
    assert list(row) == [0, 0, 0, 1, 1, 1]
    assert list(col) == [0, 1, 2, 0, 1, 2]


@pytest.mark.parametrize("n, shape", [(32, (4, 8)), (64, (8, 8)), (7, (1, 7)), (131072, (256, 512))])
def test_square_layout(n, shape):
    layout = ArrayLayout.square(n, 0.1)
    assert (layout.rows, layout.cols) == shape
    assert layout.size == n


def test_layout_validation():
    with pytest.raises(ValueError):
        ArrayLayout(0, 3, 0.1)
    with pytest.raises(ValueError):
        ArrayLayout(2, 3, 0.0)


def test_local_coordinates_identity_orientation():
    q = rotation_matrix_irs1(Orientation(0.0, math.pi / 2))
    assert_allclose(q, np.eye(3), atol=1e-15)
    assert_allclose(local_coordinates([1.0, 2.0, 3.0], np.zeros(3), q), [1.0, 2.0, 3.0], atol=1e-15)
    assert_allclose(local_coordinates([1.0, 2.0, 3.0], np.zeros(3), q), q.T @ [1.0, 2.0, 3.0])


def test_elevation_angles_match_dot_product_oracle():
    g = default_geometry()
    o = Orientation(-math.pi / 4, -math.pi / 4)
    ang = elevation_angles(g, o, o)
    n1 = rotation_irs1(*o)[:, 2]
    n2 = rotation_irs2(*o)[:, 2]
    want = [elevation(g.bs_origin, g.irs1_origin, n1), elevation(g.irs2_origin, g.irs1_origin, n1),
            elevation(g.irs1_origin, g.irs2_origin, n2), elevation(g.user_pos, g.irs2_origin, n2)]
    assert_allclose(ang, want, atol=1e-10)


def test_fixed_orientation_values():
    # frozen from the dot-product oracle above
    g = default_geometry()
    o = Orientation(-math.pi / 4, -math.pi / 4)
    g1, g2 = surface_gains(g, o, o)
    assert_allclose([g1, g2], [0.2307460274833195, 0.3905639656527144], rtol=1e-12)
    s = feasibility_slacks(g, o, o)
    assert all(v > 0 for v in s)
    assert bool(s.all_feasible())


def test_slack_sign_matches_expansion_on_grid():
    g = default_geometry()
    th, ph = np.meshgrid(np.linspace(-math.pi / 2, math.pi / 2, 181),
                         np.linspace(-math.pi / 2, math.pi / 2, 181), indexing="ij")
    o = Orientation(th, ph)
    s = feasibility_slacks(g, o, o)
    dx, dy, dz = g.bs_origin - g.irs1_origin
    bs1 = np.cos(th) * np.cos(ph) * dx + np.sin(th) * np.cos(ph) * dy + np.sin(ph) * dz
    dx, dy, dz = g.user_pos - g.irs2_origin
    user2 = np.cos(th) * np.cos(ph) * dx - np.sin(th) * np.cos(ph) * dy + np.sin(ph) * dz
    assert_allclose(s.bs_at_irs1, bs1, atol=1e-9)
    assert_allclose(s.user_at_irs2, user2, atol=1e-9)
    clear = np.abs(bs1) > 1e-9
    assert np.array_equal(s.bs_at_irs1[clear] >= 0, bs1[clear] >= 0)


@given(angle, angle, angle, angle)
@settings(max_examples=100)
def test_gains_bounded_and_feasibility_sign(t1, p1, t2, p2):
    g = default_geometry()
    o1, o2 = Orientation(t1, p1), Orientation(t2, p2)
    ang = elevation_angles(g, o1, o2)
    assert all(0.0 <= a <= math.pi for a in ang)
    g1, g2 = surface_gains(g, o1, o2)
    assert -1.0 <= g1 <= 1.0 and -1.0 <= g2 <= 1.0
    s = feasibility_slacks(g, o1, o2)
    if s.bs_at_irs1 >= 0 and s.irs2_at_irs1 >= 0:
        assert g1 >= 0
    if s.irs1_at_irs2 >= 0 and s.user_at_irs2 >= 0:
        assert g2 >= 0


def test_gain_one_when_normal_bisects_colinear_nodes():
    # BS and IRS 2 both straight in front of IRS 1: both elevations are zero
    layout = ArrayLayout(1, 1, 0.1)
    g = ScenarioGeometry(np.array([10.0, 0.0, 0.0]), np.zeros(3), np.array([20.0, 0.0, 0.0]),
                         np.array([30.0, 5.0, 0.0]), layout, layout, layout, 0.1)
    o1 = Orientation(0.0, 0.0)  # normal along +x
    assert_allclose(surface_gains(g, o1, o1)[0], 1.0)


def test_coincident_anchors_rejected():
    layout = ArrayLayout(1, 1, 0.1)
    with pytest.raises(DegenerateGeometryError, match="coincide"):
        ScenarioGeometry(np.zeros(3), np.zeros(3), np.ones(3), np.array([2.0, 0, 0]),
                         layout, layout, layout, 0.1)


def test_geometry_helpers():
    g = default_geometry(m=8, n1=16, n2=32)
    assert (g.m, g.n1, g.n2) == (8, 16, 32)
    h = g.with_sizes(n1=64)
    assert (h.m, h.n1, h.n2) == (8, 64, 32)
    flat = g.projected_to_ground()
    assert flat.irs1_origin[2] == 0.0 and flat.irs2_origin[2] == 0.0
    single = single_irs_geometry(g)
    assert single.n == 48
    assert_allclose(single.irs_origin, g.irs1_origin)
    moved = single_irs_geometry(g, np.array([1.0, 2.0, 3.0]), n_elements=10)
    assert moved.n == 10 and moved.irs_origin[2] == 3.0


def test_single_surface_slacks_and_gain():
    g = default_geometry()
    single = single_irs_geometry(g)
    o = Orientation(-0.3, 0.2)
    zb, zu = single_feasibility_slacks(single, o)
    n = rotation_irs1(-0.3, 0.2)[:, 2]
    assert_allclose(zb, np.dot(g.bs_origin - g.irs1_origin, n), atol=1e-12)
    assert_allclose(zu, np.dot(g.user_pos - g.irs1_origin, n), atol=1e-12)
    want = (math.cos(elevation(g.bs_origin, g.irs1_origin, n))
            * math.cos(elevation(g.user_pos, g.irs1_origin, n)))
    assert_allclose(single_gain(single, o), want, atol=1e-12)
