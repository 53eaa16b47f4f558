import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridnav import kinematics as kin
from hybridnav.errors import GimbalLock
from hybridnav.hybrid_sim import EventSchedule
from hybridnav.truth import (
    BeaconSet,
    DisturbanceSpec,
    SignalSpec,
    emit_measurements,
    range_measurements,
    sample_ball,
    simulate_truth,
)

DATA = Path(__file__).parent / "data"
BENCH = SignalSpec.benchmark()


@pytest.fixture(scope="module")
def bench_truth():
    sched = EventSchedule.periodic(0.5, 0.0, 20.0, "attitude")
    return simulate_truth(BENCH, [0.1] * 3, [0.0] * 3, [1.0] * 3, 20.0, 1e-3, breakpoints=sched)


class TestSimulateTruth:
    def test_static(self):
        tr = simulate_truth(SignalSpec.constant(), [0.1, -0.2, 0.3], [0, 0, 0], [1, 2, 3], 2.0, 1e-2)
        np.testing.assert_array_equal(tr.x[-1], [0.1, -0.2, 0.3])
        np.testing.assert_array_equal(tr.r[-1], [1, 2, 3])

    def test_double_integrator(self):
        c = np.array([0.3, -1.0, 2.0])
        tr = simulate_truth(SignalSpec.constant(gamma=c), [0, 0, 0], [0, 0, 0], [0, 0, 0], 3.0, 1e-2)
        np.testing.assert_allclose(tr.v[-1], 3.0 * c, atol=1e-12)
        np.testing.assert_allclose(tr.r[-1], 4.5 * c, atol=1e-12)

    def test_benchmark_matches_reference_integration(self, bench_truth):
        # reference: independent DOP853 solve at rtol = atol = 1e-13
        ref = json.loads((DATA / "truth_benchmark.json").read_text())
        idx = [bench_truth.index_of(t) for t in ref["t"]]
        y = np.column_stack([bench_truth.x, bench_truth.v, bench_truth.r])[idx]
        np.testing.assert_allclose(y, ref["y"], atol=2e-9)

    def test_benchmark_stays_in_chart(self, bench_truth):
        assert np.max(np.abs(bench_truth.x[:, 1])) < np.pi / 2 - 0.05

    def test_chart_consistency(self, bench_truth):
        sched = EventSchedule.periodic(0.5, 0.0, 20.0, "attitude")
        trq = simulate_truth(BENCH, [0.1] * 3, [0.0] * 3, [1.0] * 3, 20.0, 1e-3, chart="quaternion",
                             breakpoints=sched)
        assert np.array_equal(trq.times, bench_truth.times)
        for i in range(0, bench_truth.times.size, 250):
            np.testing.assert_allclose(kin.unwrap_toward(bench_truth.x[i], trq.euler(i)), bench_truth.x[i], atol=1e-6)
        np.testing.assert_allclose(trq.v, bench_truth.v, atol=1e-6)
        np.testing.assert_allclose(trq.r, bench_truth.r, atol=1e-6)

    def test_gimbal_lock(self):
        # constant pitch rate drives theta through pi/2
        with pytest.raises(GimbalLock):
            simulate_truth(SignalSpec.constant(omega=[0, 1.0, 0]), [0, 0, 0], [0] * 3, [0] * 3, 2.0, 1e-3)
        trq = simulate_truth(SignalSpec.constant(omega=[0, 1.0, 0]), [0, 0, 0], [0] * 3, [0] * 3, 2.0, 1e-3,
                             chart="quaternion")
        assert abs(np.linalg.norm(trq.q[-1]) - 1.0) < 1e-9


class TestBeacons:
    def test_coincident(self):
        b = BeaconSet.benchmark()
        a = b.positions(1.3)[0]
        assert range_measurements(a, b, 1.3)[0] == 0.0

    def test_three_four_five(self):
        pts = [[3, 4, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]]
        assert range_measurements([0, 0, 0], pts)[0] == 5.0

    def test_benchmark_at_t0(self):
        ref = json.loads((DATA / "ranges.json").read_text())
        b = BeaconSet.benchmark()
        np.testing.assert_allclose(b.positions(0.0), ref["beacons"], atol=1e-14)
        np.testing.assert_allclose(range_measurements(ref["r"], b, 0.0), ref["ranges"], rtol=1e-14)

    def test_benchmark_circles(self):
        b = BeaconSet.benchmark()
        centers = np.array([[0, 0, 0], [60, 0, 0], [60, 60, 0], [60, 60, 60]])
        for t in np.linspace(0, 10, 17):
            p = b.positions(t)
            np.testing.assert_allclose(np.linalg.norm(p - centers, axis=1), 1.0, atol=1e-14)
            assert p[0, 2] == 0 and p[1, 2] == 0 and p[2, 0] == 60 and p[3, 1] == 60

    @given(st.integers(0, 2**31))
    @settings(max_examples=30)
    def test_rigid_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(4, 3)) * 10
        r = rng.normal(size=3) * 5
        R = kin.dcm_from_euler(rng.uniform(-1, 1, 3))
        np.testing.assert_allclose(range_measurements(R @ r, pts @ R.T), range_measurements(r, pts), rtol=1e-12)


class TestMeasurements:
    def test_noiseless_equals_truth(self, bench_truth):
        sched = EventSchedule.periodic(0.5, 0.0, 5.0, "attitude").merge(
            EventSchedule.periodic(0.5, 0.0, 5.0, "position"), EventSchedule.periodic(0.5, 0.0, 5.0, "velocity"))
        for m in emit_measurements(bench_truth, sched):
            i = bench_truth.index_of(m.t)
            ref = {"attitude": kin.wrap_angle(bench_truth.x[i]), "position": bench_truth.r[i],
                   "velocity": bench_truth.v[i]}[m.kind]
            np.testing.assert_array_equal(m.value, ref)

    def test_noise_bounded(self, bench_truth):
        sched = EventSchedule.periodic(0.01, 0.0, 10.0, "position")
        assert len(sched) == 1000
        ms = emit_measurements(bench_truth, sched, disturbance=DisturbanceSpec(N=0.01, seed=3))
        norms = np.array([np.linalg.norm(m.noise) for m in ms])
        assert norms.max() <= 0.01
        assert norms.max() > 0.009

    def test_deterministic(self, bench_truth):
        sched = EventSchedule.periodic(0.5, 0.0, 5.0, "range")
        d = DisturbanceSpec(N=0.05, seed=11)
        b = BeaconSet.benchmark()
        a1 = emit_measurements(bench_truth, sched, disturbance=d, beacons=b)
        a2 = emit_measurements(bench_truth, sched, disturbance=d, beacons=b)
        assert all(np.array_equal(x.value, y.value) for x, y in zip(a1, a2))

    def test_interleaved_stream(self, bench_truth):
        sched = EventSchedule.periodic(0.5, 0.0, 7.0, "attitude").merge(
            EventSchedule.periodic(0.7, 0.0, 7.0, "range"))
        ms = emit_measurements(bench_truth, sched, beacons=BeaconSet.benchmark())
        ts = [m.t for m in ms]
        assert ts == sorted(ts)
        assert sum(m.kind == "attitude" for m in ms) == 14
        assert sum(m.kind == "range" for m in ms) == 10
        both = [m.kind for m in ms if m.t == 3.5]
        assert both == ["attitude", "range"]

    def test_quaternion_fix(self, bench_truth):
        sched = EventSchedule.periodic(0.5, 0.0, 5.0, "attitude")
        ms = emit_measurements(bench_truth, sched, disturbance=DisturbanceSpec(N=0.02, seed=1),
                               attitude_chart="quaternion")
        for m in ms:
            i = bench_truth.index_of(m.t)
            ang = kin.rotation_angle_between(kin.dcm_from_quaternion(m.value), bench_truth.attitude_dcm(i))
            assert ang <= 0.02 + 1e-12
            assert m.value[0] >= 0


class TestDisturbance:
    @given(st.integers(0, 2**31), st.integers(1, 6), st.floats(0, 10))
    def test_sample_ball(self, seed, dim, radius):
        n = sample_ball(np.random.default_rng(seed), dim, radius)
        assert n.shape == (dim,)
        assert np.linalg.norm(n) <= radius

    def test_input_disturbance_bounded(self):
        d = DisturbanceSpec(D=0.05, seed=4).input_disturbance(3)
        norms = [np.linalg.norm(d(t)) for t in np.linspace(0, 50, 5001)]
        assert max(norms) <= 0.05

    def test_per_interval_noise(self):
        d = DisturbanceSpec(N=1.0, N_seq=(0.5, 0.2))
        assert d.noise_bound(0) == 0.5 and d.noise_bound(1) == 0.2 and d.noise_bound(7) == 0.2
