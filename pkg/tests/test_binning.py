import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atfr.binning import (
    coordinate_kinds,
    from_spherical,
    magnitudes,
    make_geometry,
    make_multidim_geometry,
    spherical_backward,
    to_spherical,
)
from atfr.core import ConfigError, finite_diff

deltas = arrays(np.float64, st.integers(1, 32), elements=st.floats(0.0, 1e3))
positive_deltas = arrays(np.float64, st.integers(1, 32), elements=st.floats(1e-3, 1e3))


class TestMagnitudes:
    def test_pythagoras(self):
        np.testing.assert_array_equal(magnitudes([[3.0, 4.0]]).delta, [5.0])

    def test_zero_row(self):
        np.testing.assert_array_equal(magnitudes([[0.0, 0.0, 0.0]]).delta, [0.0])

    def test_hand_example(self):
        np.testing.assert_allclose(magnitudes([[1.0, 1.0], [2.0, 2.0]]).delta,
                                   [math.sqrt(2), 2 * math.sqrt(2)], rtol=1e-15)


class TestSpherical:
    def test_45_degrees(self):
        np.testing.assert_allclose(to_spherical([[1.0, 1.0]]), [[math.sqrt(2), math.pi / 4]], rtol=1e-15)

    def test_negative_axis(self):
        np.testing.assert_allclose(to_spherical([[-1.0, 0.0]]), [[1.0, math.pi]], rtol=1e-15)

    def test_three_dimensional(self):
        expected = [[math.sqrt(3), math.acos(1 / math.sqrt(3)), math.pi / 4]]
        np.testing.assert_allclose(to_spherical([[1.0, 1.0, 1.0]]), expected, rtol=1e-15)

    def test_zero_row_angles_are_zero(self):
        np.testing.assert_array_equal(to_spherical([[0.0, 0.0, 0.0]]), [[0.0, 0.0, 0.0]])

    def test_negative_zero_stays_in_range(self):
        out = to_spherical([[-1.0, -0.0]])
        assert 0.0 <= out[0, 1] < 2 * math.pi

    def test_needs_two_dims(self):
        with pytest.raises(ValueError):
            to_spherical([[1.0]])

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)),
                  elements=st.floats(-10, 10).filter(lambda v: abs(v) > 1e-3)))
    def test_roundtrip_and_ranges(self, z):
        sph = to_spherical(z)
        np.testing.assert_allclose(from_spherical(sph), z, atol=1e-10)
        assert np.all(sph[:, 1:-1] >= 0) and np.all(sph[:, 1:-1] <= math.pi)
        assert np.all(sph[:, -1] >= 0) and np.all(sph[:, -1] < 2 * math.pi)

    def test_backward_matches_finite_differences(self, rng):
        for _ in range(20):
            L = int(rng.integers(2, 6))
            z = rng.normal(size=(4, L))
            weights = rng.normal(size=(4, L))
            loss = lambda v: float(np.sum(weights * to_spherical(v.reshape(4, L))))
            fd = finite_diff(loss, z.ravel()).reshape(4, L)
            np.testing.assert_allclose(spherical_backward(weights, z), fd, rtol=1e-6, atol=1e-7)


class TestMakeGeometry:
    def test_strict_hand_example(self):
        g = make_geometry([1.0, 2.0, 3.0, 4.0], 4, "strict")
        assert g.gamma == 0.5
        np.testing.assert_array_equal(g.centers, [0.5, 1.5, 2.5, 3.5])
        assert not g.degenerate

    def test_centered_hand_example(self):
        g = make_geometry([1.0, 1.0, 3.0], 2, "centered")
        assert g.gamma == 1.0
        np.testing.assert_array_equal(g.centers, [1.0, 3.0])

    def test_all_zero_is_degenerate(self):
        assert make_geometry([0.0, 0.0, 0.0], 5).degenerate

    @pytest.mark.parametrize("B", [0, -1, 2.5])
    def test_bad_bin_count(self, B):
        with pytest.raises(ConfigError):
            make_geometry([1.0], B)

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            make_geometry([1.0], 2, "sloppy")

    @settings(max_examples=200, deadline=None)
    @given(positive_deltas, st.integers(1, 32), st.sampled_from(["strict", "centered"]))
    def test_spacing_is_twice_gamma(self, delta, B, mode):
        g = make_geometry(delta, B, mode)
        np.testing.assert_allclose(np.diff(g.centers), 2 * g.gamma, rtol=1e-12)
        assert np.all(np.diff(g.centers) > 0)
        if mode == "centered":
            assert g.centers[-1] == pytest.approx(delta.max(), rel=1e-14)
        else:
            # strict supports tile (0, max) without overlap
            assert g.centers[0] - g.gamma == pytest.approx(0.0, abs=1e-12 * delta.max())
            assert g.centers[-1] + g.gamma == pytest.approx(delta.max(), rel=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(positive_deltas, st.integers(1, 32), st.floats(0.01, 100.0))
    def test_strict_scale_covariance(self, delta, B, s):
        g = make_geometry(delta, B, "strict")
        gs = make_geometry(delta * s, B, "strict")
        assert gs.gamma == pytest.approx(s * g.gamma, rel=1e-12)
        np.testing.assert_allclose(gs.centers, s * g.centers, rtol=1e-12)
        # bin index of each delta is unchanged, away from the bin edges
        u = delta / (2 * g.gamma)
        clear = np.abs(u - np.round(u)) > 1e-9
        idx = np.floor(u[clear])
        idx_s = np.floor((delta * s)[clear] / (2 * gs.gamma))
        np.testing.assert_array_equal(idx, idx_s)


class TestMultiDim:
    def test_single_radial_axis_matches_1d(self, rng):
        delta = rng.uniform(0, 5, size=9)
        for mode in ("strict", "centered"):
            g1 = make_geometry(delta, 6, mode)
            gm = make_multidim_geometry(delta[:, None], [6], mode)
            assert gm.K == 1
            assert gm.axes[0].gamma == g1.gamma
            np.testing.assert_array_equal(gm.axes[0].centers, g1.centers)

    def test_azimuth_uses_fixed_range(self, rng):
        coords = rng.uniform(0, 1.0, size=(5, 1))
        g = make_multidim_geometry(coords, [8], "strict", kinds=["azimuthal"]).axes[0]
        assert g.gamma == pytest.approx(math.pi / 8, rel=1e-15)
        np.testing.assert_allclose(g.centers, (2 * np.arange(8) + 1) * math.pi / 8, rtol=1e-15)

    def test_spherical_2x4x4(self, rng):
        coords = to_spherical(rng.normal(size=(6, 3)))
        g = make_multidim_geometry(coords, [2, 4, 4], "strict", kinds=coordinate_kinds("spherical", 3))
        assert g.K == 3
        assert g.grid_shape == (2, 4, 4)
        assert g.axes[1].gamma == pytest.approx(math.pi / 8)
        assert g.axes[2].gamma == pytest.approx(2 * math.pi / 8)

    def test_kind_counts(self):
        assert len(coordinate_kinds("magnitude", 8)) == 1
        assert len(coordinate_kinds("angular", 8)) == 7
        assert len(coordinate_kinds("spherical", 8)) == 8

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            make_multidim_geometry(np.ones((3, 2)), [2], "strict")
