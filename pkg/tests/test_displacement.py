import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomorph.displacement import (
    DisplacementField,
    advect,
    anchors,
    base_mapping,
    mapping_grid,
    mapping_point,
    residual_field,
    sample_bilinear,
)
from cartomorph.integral import integral_images

from oracles import brute_mapping_grid

coord = st.floats(0.0, 1.0)


class TestAnchors:
    def test_paper_case_point(self):
        a = anchors(0.5, 0.25)
        assert a.q1 == (1.0, 0.75)
        assert a.q2 == (0.75, 0.0)
        assert a.q3 == (0.25, 0.0)
        assert a.q4 == (0.0, 0.75)

    def test_center(self):
        a = anchors(0.5, 0.5)
        assert a.q1 == (1.0, 1.0)
        assert a.q2 == (1.0, 0.0)
        assert a.q3 == (0.0, 0.0)
        assert a.q4 == (0.0, 1.0)

    def test_origin_corner(self):
        a = anchors(0.0, 0.0)
        assert a.q1 == (1.0, 1.0)
        assert a.q2 == (0.0, 0.0)
        assert a.q3 == (0.0, 0.0)
        assert a.q4 == (0.0, 0.0)

    @given(coord, coord)
    @settings(max_examples=200, deadline=None)
    def test_anchor_geometry(self, x, y):
        a = anchors(x, y)
        for q in (a.q1, a.q2, a.q3, a.q4):
            assert min(q) >= -1e-12 and max(q) <= 1 + 1e-12
            assert min(abs(q[0]), abs(q[0] - 1), abs(q[1]), abs(q[1] - 1)) <= 1e-12
        # q1, q3 on the slope +1 diagonal through (x, y): x - y constant
        assert a.q1[0] - a.q1[1] == pytest.approx(x - y, abs=1e-12)
        assert a.q3[0] - a.q3[1] == pytest.approx(x - y, abs=1e-12)
        # q2, q4 on the slope -1 diagonal: x + y constant
        assert a.q2[0] + a.q2[1] == pytest.approx(x + y, abs=1e-12)
        assert a.q4[0] + a.q4[1] == pytest.approx(x + y, abs=1e-12)


class TestMapping:
    @pytest.mark.parametrize("n", [16, 64])
    def test_constant_density_center_is_fixed(self, n):
        # symmetric up to the tilted tie rule's one-pixel quantum (the query
        # pixel itself belongs to the top sector), which scales as 1/n^2
        ii = integral_images(np.full((n, n), 2.5))
        t = mapping_point(0.5, 0.5, ii)
        np.testing.assert_allclose(t, [0.5, 0.5], atol=1.0 / n**2)

    def test_mass_upper_left_pushes_lower_right_point_toward_q1(self):
        n = 16
        d = np.full((n, n), 0.01)
        d[:4, :4] = 10.0  # heavy upper-left corner
        ii = integral_images(d)
        uniform = integral_images(np.ones((n, n)))
        q = np.array([0.75, 0.75])
        moved = mapping_point(*q, ii) - mapping_point(*q, uniform)
        # q1 for (0.75, 0.75) is (1, 1): displacement should point down-right
        assert moved[0] > 0
        assert moved[1] > 0

    def test_coefficients_sum_to_one(self):
        rng = np.random.default_rng(0)
        d = rng.uniform(0.1, 4.0, (32, 32))
        ii = integral_images(d)
        total = sum(ii.straight_channels()) + sum(ii.tilted_channels())
        np.testing.assert_allclose(total / (2 * ii.total), 1.0, atol=1e-9)

    def test_grid_matches_brute_force(self):
        rng = np.random.default_rng(1)
        d = rng.uniform(0.05, 3.0, (8, 8))
        fast = mapping_grid(integral_images(d))
        np.testing.assert_allclose(fast, brute_mapping_grid(d), atol=1e-12)

    def test_mapping_stays_in_domain(self):
        rng = np.random.default_rng(2)
        d = rng.uniform(0.0, 5.0, (32, 32)) + 1e-6
        t = mapping_grid(integral_images(d))
        assert t.min() >= -1e-9 and t.max() <= 1 + 1e-9


class TestResidual:
    def test_fixed_point_constant_density(self):
        fld = residual_field(integral_images(np.full((64, 64), 0.7)))
        assert fld.max_magnitude() < 1e-6

    def test_left_heavy_mass_expands_left(self):
        n = 8
        d = np.ones((n, n))
        d[:, : n // 2] = 3.0
        fld = residual_field(integral_images(d))
        # pixels in the light right half move right (away from the mass)
        assert (fld.u[:, 3 * n // 4 :, 0] > 0).all()

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        d = rng.uniform(0.5, 2.0, (16, 16))
        u1 = residual_field(integral_images(d)).u
        u2 = residual_field(integral_images(3.7 * d)).u
        np.testing.assert_allclose(u1, u2, atol=1e-9)

    def test_size_mismatch_rejected(self):
        ii = integral_images(np.ones((8, 8)))
        with pytest.raises(ValueError, match="size"):
            residual_field(ii, base=base_mapping(16))

    def test_residual_matches_brute_force_difference(self):
        rng = np.random.default_rng(4)
        d = rng.uniform(0.2, 2.0, (8, 8))
        fld = residual_field(integral_images(d))
        expected = brute_mapping_grid(d) - brute_mapping_grid(np.ones((8, 8)))
        np.testing.assert_allclose(fld.u, expected, atol=1e-12)

    def test_smoothness_no_outlier_jumps(self):
        rng = np.random.default_rng(5)
        d = rng.uniform(0.5, 2.0, (64, 64))
        u = residual_field(integral_images(d)).u
        jumps = np.hypot(*np.diff(u, axis=1).transpose(2, 0, 1))
        assert jumps.max() <= 10 * jumps.mean() + 1e-12


class TestAdvect:
    def _field(self, n, value):
        u = np.zeros((n, n, 2))
        u[...] = value
        return DisplacementField(size=n, u=u)

    def test_zero_field_identity(self):
        pts = np.array([[0.1, 0.2], [0.7, 0.9]])
        moved, clamps = advect(pts, self._field(8, 0.0))
        np.testing.assert_allclose(moved, pts)
        assert clamps == 0

    def test_vertex_at_pixel_center(self):
        n = 8
        u = np.zeros((n, n, 2))
        u[3, 5] = (0.25, -0.125)
        fld = DisplacementField(size=n, u=u)
        vertex = np.array([[(5 + 0.5) / n, (3 + 0.5) / n]])
        moved, _ = advect(vertex, fld)
        np.testing.assert_allclose(moved[0] - vertex[0], [0.25, -0.125], atol=1e-12)

    def test_midpoint_between_centers(self):
        n = 8
        u = np.zeros((n, n, 2))
        u[0, 0] = (0.1, 0.0)
        u[0, 1] = (0.3, 0.0)
        fld = DisplacementField(size=n, u=u)
        midpoint = np.array([[1.0 / n, 0.5 / n]])  # halfway between centers 0 and 1
        sample = sample_bilinear(fld.u, midpoint)
        np.testing.assert_allclose(sample[0], [0.2, 0.0], atol=1e-12)

    def test_clamping_counted(self):
        pts = np.array([[0.95, 0.5]])
        moved, clamps = advect(pts, self._field(8, 0.2))
        assert clamps == 1
        assert moved[0, 0] == 1.0

    def test_base_mapping_cached(self):
        assert base_mapping(32) is base_mapping(32)
