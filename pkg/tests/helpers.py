"""Shared scenario builders for the test suite and the oracle generator."""
import numpy as np

from hybridnav import kinematics as kin
from hybridnav.hybrid_sim import EventSchedule
from hybridnav.observer import HierarchicalObserver, ObserverConfig
from hybridnav.truth import SignalSpec, emit_measurements, simulate_truth

X0 = np.array([0.1, 0.1, 0.1])
R0 = np.array([1.0, 1.0, 1.0])


def attitude_run(dt=1e-3, horizon=10.0, period=0.5, offset=0.2, gain=1.0 / 3.0):
    """Attitude-only observer with exact fixes; returns event times and the
    post-update metric errors ``|A H (x) wrap(x_hat - x)|`` (first entry: t = 0)."""
    sig = SignalSpec.benchmark()
    sched = EventSchedule.periodic(period, 0.0, horizon, "attitude")
    truth = simulate_truth(sig, X0, np.zeros(3), R0, horizon, dt, breakpoints=sched)
    meas = emit_measurements(truth, sched)
    cfg = ObserverConfig(attitude_gain=gain, velocity_mode="none", position_mode="none")
    run = HierarchicalObserver(cfg, sig, X0 + offset, np.zeros(3), R0).run(meas, 0.0, horizon, dt)

    def merr(y, i):
        return float(np.linalg.norm(kin.metric_factor(truth.x[i], "AH") @ kin.wrap_angle(y[:3] - truth.x[i])))

    times = [0.0] + [float(e.t) for e in run.trace.events]
    errs = [merr(run.trace.states[0], 0)] + [merr(e.after, e.sample_index) for e in run.trace.events]
    return times, errs
