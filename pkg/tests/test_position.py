import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridnav.errors import SingularBeaconGeometry, UncertifiedGain
from hybridnav.position import (
    beacon_difference_matrix,
    certify_position_range_gain,
    position_continuous_field,
    position_update_linear,
    position_update_ranges,
    range_gain,
    squared_range_residual,
)
from hybridnav.truth import BeaconSet, range_measurements

RANGES = json.loads((Path(__file__).parent / "data" / "ranges.json").read_text())
UNIT = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]], dtype=float)


def bench_beacons(t=0.0):
    return BeaconSet.benchmark().positions(t)


class TestContinuous:
    @pytest.mark.parametrize("v", [[0, 0, 0], [1, 2, 3], [-0.5, 1e6, 3e-9]])
    def test_identity(self, v):
        np.testing.assert_array_equal(position_continuous_field(v), v)


class TestLinearUpdate:
    def test_zero_gain(self):
        np.testing.assert_array_equal(position_update_linear([1, 2, 3], [4, 5, 6], 0.0), [4, 5, 6])

    def test_third(self):
        r = np.array([1.0, -2.0, 0.5])
        e = np.array([0.3, 0.6, -0.9])
        np.testing.assert_allclose(position_update_linear(r + e, r, np.eye(3) / 3) - r, e / 3, atol=1e-15)

    def test_rejects_expanding(self):
        with pytest.raises(UncertifiedGain, match="1.21"):
            position_update_linear([0, 0, 0], [1, 1, 1], np.diag([0.9, 0.9, 1.1]))


class TestBeaconDifferenceMatrix:
    def test_unit(self):
        g = beacon_difference_matrix(UNIT)
        np.testing.assert_array_equal(g.J, np.eye(3))
        assert g.det == 1.0 and g.triple_product == 1.0 and not g.singular

    def test_coplanar(self):
        pts = [[0, 0, 0], [2, 1, 0], [-1, 3, 0], [5, 5, 0]]
        g = beacon_difference_matrix(pts)
        assert g.det == 0.0 and g.triple_product == 0.0 and g.singular
        with pytest.raises(SingularBeaconGeometry):
            range_gain(pts)

    def test_benchmark_at_t0(self):
        g = beacon_difference_matrix(bench_beacons(0.0))
        assert g.det == pytest.approx(RANGES["det_J"], rel=1e-12)
        assert not g.singular

    def test_benchmark_never_singular(self):
        for t in np.linspace(0, 20, 201):
            assert not beacon_difference_matrix(bench_beacons(t)).singular

    def test_triple_product_equals_det_random(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            g = beacon_difference_matrix(rng.normal(size=(4, 3)) * 10)
            assert g.det == pytest.approx(g.triple_product, rel=1e-9, abs=1e-9)

    def test_constructed_coplanar_sets(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            u, v = rng.normal(size=(2, 3))
            o = rng.normal(size=3)
            pts = o + rng.normal(size=(4, 1)) * u + rng.normal(size=(4, 1)) * v
            g = beacon_difference_matrix(pts)
            assert g.singular
            assert abs(g.triple_product) <= 1e-9 * max(g.scale, 1.0)


class TestRangeUpdate:
    def test_fixed_point(self):
        b = bench_beacons(1.7)
        r = np.array([3.0, -2.0, 5.0])
        np.testing.assert_allclose(position_update_ranges(r, range_measurements(r, b), b), r, atol=1e-12)

    def test_residual_is_linear(self):
        b = bench_beacons(0.4)
        r = np.array([1.0, 2.0, 3.0])
        e = np.array([4.0, -7.0, 2.5])
        g = beacon_difference_matrix(b)
        res = squared_range_residual(r + e, range_measurements(r, b), b)
        np.testing.assert_allclose(res, 2 * g.J @ e, rtol=1e-12, atol=1e-9)

    def test_unit_gain_exact_for_large_error(self):
        b = bench_beacons(2.3)
        r = np.array([1.0, 1.0, 1.0])
        d = np.array([1.0, -2.0, 2.0]) / 3.0
        out = position_update_ranges(r + 10.0 * d, range_measurements(r, b), b, k=1.0)
        np.testing.assert_allclose(out, r, atol=1e-10)

    def test_two_thirds(self):
        b = bench_beacons(0.0)
        r = np.array(RANGES["r"], dtype=float)
        e = np.array([0.5, -0.25, 0.125])
        out = position_update_ranges(r + e, RANGES["ranges"], b, k=2 / 3)
        np.testing.assert_allclose(out - r, e / 3, atol=1e-12)

    def test_negative_range_rejected(self):
        with pytest.raises(ValueError):
            position_update_ranges([0, 0, 0], [1.0, -1.0, 1.0, 1.0], UNIT)

    def test_coplanar_rejected(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        with pytest.raises(SingularBeaconGeometry):
            position_update_ranges([0, 0, 1], [1, 1, 1, 1], pts)

    @given(st.integers(0, 2**31), st.floats(0.0, 10.0), st.floats(0.05, 1.95))
    @settings(max_examples=60)
    def test_exact_error_map(self, seed, mag, k):
        rng = np.random.default_rng(seed)
        b = bench_beacons(rng.uniform(0, 20))
        r = rng.uniform(-5, 65, 3)
        d = rng.normal(size=3)
        e = mag * d / np.linalg.norm(d)
        out = position_update_ranges(r + e, range_measurements(r, b), b, k=k)
        assert np.linalg.norm(out - r) == pytest.approx(abs(1 - k) * mag, abs=1e-10)

    def test_relabeling_invariance(self):
        # noiseless data: every non-coplanar ordering gives the same update
        b = bench_beacons(0.9)
        r = np.array([2.0, 3.0, -1.0])
        r_minus = r + np.array([0.4, 0.1, -0.3])
        y = range_measurements(r, b)
        ref = position_update_ranges(r_minus, y, b, k=2 / 3)
        for perm in itertools.permutations(range(4)):
            p = list(perm)
            np.testing.assert_allclose(position_update_ranges(r_minus, y[p], b[p], k=2 / 3), ref, atol=1e-10)

    def test_reversed_order_same_rows_up_to_sign(self):
        b = bench_beacons(0.0)
        J = beacon_difference_matrix(b).J
        Jr = beacon_difference_matrix(b[::-1]).J
        np.testing.assert_allclose(Jr, -J[::-1])


class TestRangeCertificate:
    def test_reference_gain(self):
        c = certify_position_range_gain(2 / 3)
        assert c.lambda_i == pytest.approx(1 / 9) and c.certified

    @pytest.mark.parametrize("k", [0.0, 2.0])
    def test_boundary(self, k):
        c = certify_position_range_gain(k)
        assert c.lambda_i == 1.0 and not c.certified

    def test_growth_breaks_certificate(self):
        assert not certify_position_range_gain(2 / 3, lam_bar=5.0, dt=0.5).certified
