from math import exp

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridnav.bounds import (
    CAP_MARGIN,
    CandidateMeasurement,
    ErrorBoundState,
    minimize_affine,
    nonlinear_bound,
    optimal_gain,
    propagate_bound,
    propagate_bound_timevarying,
    select_measurement,
    write_bound_csv,
)
from hybridnav.errors import EmptyCandidates
from hybridnav.position import beacon_difference_matrix, position_update_ranges, range_gain
from hybridnav.truth import BeaconSet, range_measurements

nonneg = st.floats(0.0, 10.0)
unit_gain = st.floats(0.0, 0.999)


def grid_min(a, b, n, k_m, points=101):
    ks = np.linspace(0.0, k_m, points)
    return float(np.min((a + b - n) * ks + n))


class TestPropagate:
    def test_pure_contraction(self):
        assert propagate_bound(ErrorBoundState(0.9), 1 / 3, 0.5) == pytest.approx(0.3, abs=1e-16)

    def test_full_trust(self):
        assert propagate_bound(ErrorBoundState(5.0, 0.3, 0.2, 0.07), 0.0, 1.0) == 0.07

    def test_printed_formula(self):
        s = ErrorBoundState(1.0, lam_bar=0.5, D=0.1, N=0.05)
        ref = 0.2 * exp(0.5) + 0.2 * (0.1 / 0.5) * (exp(0.5) - 1) + 0.8 * 0.05
        assert propagate_bound(s, 0.2, 1.0) == pytest.approx(ref, rel=1e-15)

    def test_zero_rate_limit(self):
        k, R, D, N, dt = 0.4, 2.0, 0.3, 0.1, 0.5
        lim = k * R + k * D * dt + (1 - k) * N
        assert abs(propagate_bound(ErrorBoundState(R, 1e-12, D, N), k, dt) - lim) < 1e-8
        assert propagate_bound(ErrorBoundState(R, 0.0, D, N), k, dt) == pytest.approx(lim, abs=1e-15)

    @given(nonneg, nonneg, nonneg, st.floats(-1, 1), unit_gain, st.floats(0, 0.5), st.floats(0.01, 2))
    def test_monotone(self, R, D, N, lam, k, bump, dt):
        base = propagate_bound(ErrorBoundState(R, lam, D, N), k, dt)
        for s in (ErrorBoundState(R + bump, lam, D, N), ErrorBoundState(R, lam, D + bump, N),
                  ErrorBoundState(R, lam, D, N + bump)):
            assert propagate_bound(s, k, dt) >= base

    def test_negative_bound_rejected(self):
        with pytest.raises(ValueError):
            ErrorBoundState(-1.0)


class TestOptimalGain:
    def test_first_branch(self):
        assert minimize_affine(1.5, 0.5, 1.0, 0.9) == (0.0, 1.0)

    def test_second_branch(self):
        k, f = minimize_affine(0.15, 0.05, 1.0, 0.5)
        assert k == 0.5 and f == pytest.approx(0.6, abs=1e-15)

    def test_tie_goes_to_zero(self):
        assert minimize_affine(0.25, 0.25, 0.5, 0.9) == (0.0, 0.5)

    def test_cap_from_rate(self):
        s = ErrorBoundState(0.1, lam_bar=0.4, N=1.0)
        k, _ = optimal_gain(s, 0.5)
        assert k == pytest.approx(exp(-0.2) - CAP_MARGIN, abs=0)
        assert k * exp(0.2) < 1.0

    def test_cap_at_non_positive_rate(self):
        assert ErrorBoundState(1.0, lam_bar=-1.0).k_m(0.5) == 1.0 - CAP_MARGIN
        assert ErrorBoundState(1.0, k_max=0.7).k_m(0.5) == 0.7

    def test_grid_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a, b, n = rng.uniform(0, 2, 3)
            k_m = rng.uniform(0, 1)
            _, f = minimize_affine(a, b, n, k_m)
            assert abs(f - grid_min(a, b, n, k_m)) <= 1e-12

    def test_overrides(self):
        s = ErrorBoundState(1.0, 0.0, D=5.0, N=0.0)
        assert optimal_gain(s, 1.0, D=0.0, N=2.0)[0] == pytest.approx(1 - CAP_MARGIN)


class TestTimeVarying:
    def test_reduces_to_constant(self):
        s = ErrorBoundState(2.0, 0.2, 0.1, 0.05)
        steps = propagate_bound_timevarying(s, [0.5] * 8)
        R = 2.0
        for st_ in steps:
            cur = ErrorBoundState(R, 0.2, 0.1, 0.05)
            k, f = optimal_gain(cur, 0.5)
            R = propagate_bound(cur, k, 0.5)
            assert st_.R == R and st_.k == k and st_.F_min == f

    def test_decreasing_noise(self):
        Ns = [1.0, 0.5, 0.8, 0.1, 0.3]
        steps = propagate_bound_timevarying(ErrorBoundState(0.7), [1.0] * 5, D_seq=[0.0] * 5, N_seq=Ns)
        k_m = 1 - CAP_MARGIN
        R = 0.7
        for st_, n in zip(steps, Ns):
            R = n if R >= n else (R - n) * k_m + n
            assert st_.R == pytest.approx(R, abs=1e-15)

    def test_random_against_grid(self):
        rng = np.random.default_rng(3)
        s = ErrorBoundState(1.0, 0.3)
        dts = rng.uniform(0.1, 1.0, 20)
        Ds, Ns = rng.uniform(0, 0.5, 20), rng.uniform(0, 0.5, 20)
        R = s.R
        for i, st_ in enumerate(propagate_bound_timevarying(s, dts, Ds, Ns)):
            cur = ErrorBoundState(R, 0.3, Ds[i], Ns[i])
            a, b = cur.growth_terms(dts[i])
            assert abs(st_.F_min - grid_min(a, b, Ns[i], cur.k_m(dts[i]))) <= 1e-12
            R = st_.R

    def test_fixed_gains(self):
        steps = propagate_bound_timevarying(ErrorBoundState(1.0), [0.5] * 3, k_seq=[0.5, 0.5, 0.5])
        assert [s.R for s in steps] == [0.5, 0.25, 0.125]

    def test_misaligned(self):
        with pytest.raises(ValueError):
            propagate_bound_timevarying(ErrorBoundState(1.0), [0.5, 0.5], D_seq=[0.0])


class TestNonlinear:
    def test_noiseless(self):
        assert nonlinear_bound(2.0, 0.25, 0.3, 0.0, 1.0, 0.0, 0.0, 0.5) == pytest.approx(0.5 * exp(0.15) * 2.0)

    @given(nonneg, nonneg, nonneg, st.floats(-1, 1), unit_gain, st.floats(0.01, 2))
    def test_reduces_to_linear(self, R, D, N, lam, k, dt):
        s = ErrorBoundState(R, lam, D, N)
        c = CandidateMeasurement.linear(k, N)
        assert c.bound(s, dt) == pytest.approx(propagate_bound(s, k, dt), rel=1e-12, abs=1e-15)

    def test_range_noise_factor(self):
        # lam_e from the range-update Jacobian bounds the response to a noise of size N
        pts = BeaconSet.benchmark().positions(0.7)
        r = np.array([2.0, 1.0, 3.0])
        y = range_measurements(r, pts)
        k = 2 / 3
        K = range_gain(pts, k)
        dres = -2.0 * (np.diag(y)[:-1] - np.diag(y)[1:])
        E = -0.5 * K @ dres
        lam_e = float(np.linalg.eigvalsh(E.T @ E)[-1])
        N = 1e-6
        base = position_update_ranges(r, y, pts, k)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(200):
            n = rng.normal(size=4)
            n *= N / np.linalg.norm(n)
            worst = max(worst, np.linalg.norm(position_update_ranges(r, y + n, pts, k) - base))
        u = np.linalg.svd(E)[2][0]
        top = np.linalg.norm(position_update_ranges(r, y + N * u, pts, k) - base)
        assert worst <= np.sqrt(lam_e) * N * (1 + 1e-4)
        assert top == pytest.approx(np.sqrt(lam_e) * N, rel=1e-4)
        assert beacon_difference_matrix(pts).det != 0

    def test_negative_factor(self):
        with pytest.raises(ValueError):
            nonlinear_bound(1.0, -0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0)


class TestSelect:
    def test_single(self):
        assert select_measurement([CandidateMeasurement.linear(0.5, 1.0)], ErrorBoundState(1.0), 0.5) == 0

    def test_prefers_lower_noise(self):
        c = [CandidateMeasurement.linear(0.0, 0.1), CandidateMeasurement.linear(0.0, 0.3)]
        assert select_measurement(c, ErrorBoundState(1.0), 0.5) == 0
        assert select_measurement(c[::-1], ErrorBoundState(1.0), 0.5) == 1

    def test_tie_lowest_index(self):
        c = [CandidateMeasurement.linear(0.0, 0.2, "a"), CandidateMeasurement.linear(0.0, 0.2, "b")]
        assert select_measurement(c, ErrorBoundState(1.0), 0.5) == 0

    def test_mixed_exhaustive(self):
        s = ErrorBoundState(0.8, 0.2, 0.1, 0.0)
        c = [CandidateMeasurement.linear(0.3, 0.4), CandidateMeasurement(0.05, 2.0, 0.1),
             CandidateMeasurement(0.2, 0.5, 0.05, lam_i=-0.5)]
        vals = [x.bound(s, 0.5) for x in c]
        assert select_measurement(c, s, 0.5) == int(np.argmin(vals))

    def test_empty(self):
        with pytest.raises(EmptyCandidates):
            select_measurement([], ErrorBoundState(1.0), 0.5)


def test_write_csv(tmp_path):
    steps = propagate_bound_timevarying(ErrorBoundState(1.0), [0.5, 0.5], k_seq=[0.5, 0.25])
    p = tmp_path / "b.csv"
    write_bound_csv(p, steps)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,R,k,F_min"
    assert lines[1].split(",")[:3] == ["0.5", "0.5", "0.5"]
