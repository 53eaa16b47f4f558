"""End-to-end scenario runs: truth, measurements, observer, error summaries and output files."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from . import kinematics as kin
from .attitude import align_sign, certify_attitude_gain
from .contraction import ContractionReport, MetricSpec, verify_hybrid_condition
from .errors import ConfigError, UncertifiedGain
from .hybrid_sim import HybridTrace
from .observer import HierarchicalObserver, ObserverRun
from .report import render_svg, write_trace_csv
from .scenario import ScenarioConfig, load
from .truth import TruthTrajectory, emit_measurements, simulate_truth

# Errors below this are round-off; ratios against them are not reported.
RATIO_FLOOR = 1e-12
STAGES = ("attitude", "velocity", "position")


@dataclass
class RunSummary:
    """Outcome of one scenario run.

    ``event_errors`` are post-update error norms ``(attitude angle, |v err|,
    |r err|)`` at each event; ``event_ratios[stage]`` divides consecutive
    entries where the earlier one is above round-off.
    """

    name: str
    chart: str
    final_errors: dict
    event_times: list
    event_errors: list
    event_ratios: dict
    alpha: float
    contraction_satisfied: bool
    certificates: dict
    wall_time: float
    skipped_events: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        fe = self.final_errors
        lines = [
            f"scenario {self.name} ({self.chart} chart)",
            f"  final errors: attitude {fe['attitude']:.3e} rad, velocity {fe['velocity']:.3e} m/s, "
            f"position {fe['position']:.3e} m",
            f"  events: {len(self.event_times)}, skipped (singular geometry): {len(self.skipped_events)}",
        ]
        for s in STAGES:
            r = self.event_ratios[s]
            if r:
                lines.append(f"  {s} per-event ratio: max {max(r):.4f}, median {float(np.median(r)):.4f}")
        lines.append(f"  attitude hybrid condition: alpha = {self.alpha:.6g} "
                     f"({'satisfied' if self.contraction_satisfied else 'VIOLATED'})")
        lines.append(f"  wall time: {self.wall_time:.2f} s")
        for k, v in self.outputs.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    truth: TruthTrajectory
    run: ObserverRun
    errors: NDArray
    components: NDArray
    contraction: ContractionReport
    summary: RunSummary


def certify_scenario(cfg: ScenarioConfig) -> dict:
    """Gain certificates and schedule margins, without simulating.

    Raises
    ------
    UncertifiedGain
        If any gain in use fails its contraction certificate.
    """
    certs = cfg.observer.certificates()
    bad = [k for k, (_, ok) in certs.items() if not ok]
    dt_min, dt_max = cfg.schedule_bounds()
    out = {
        "certificates": {k: {"lambda": lam, "certified": ok} for k, (lam, ok) in certs.items()},
        "events": len(cfg.schedule),
        "dt_min": dt_min,
        "dt_max": dt_max,
    }
    if bad:
        raise UncertifiedGain(f"uncertified gain(s): {', '.join(bad)}", out)
    return out


def attitude_errors(run: ObserverRun, truth: TruthTrajectory) -> NDArray:
    """Geodesic angle between true and estimated attitude at every sample."""
    lay = run.layout
    s = run.trace.states
    return np.array([kin.rotation_angle_between(truth.attitude_dcm(i), lay.dcm(s[i])) for i in range(s.shape[0])])


def error_norms(run: ObserverRun, truth: TruthTrajectory) -> NDArray:
    """``(n, 3)`` per-stage errors: attitude angle, velocity norm, position norm."""
    lay = run.layout
    s = run.trace.states
    ev = np.linalg.norm(s[:, lay.vel] - truth.v, axis=1)
    ep = np.linalg.norm(s[:, lay.pos] - truth.r, axis=1)
    return np.column_stack([attitude_errors(run, truth), ev, ep])


def _euler_series(run: ObserverRun) -> NDArray:
    lay = run.layout
    s = run.trace.states
    if lay.chart == "euler":
        return s[:, lay.att]
    return np.array([kin.quaternion_to_euler(q) for q in s[:, lay.att]])


def component_errors(run: ObserverRun, truth: TruthTrajectory) -> NDArray:
    """``(n, 9)`` signed errors: wrapped Euler angles, velocity, position."""
    lay = run.layout
    s = run.trace.states
    x_true = np.array([truth.euler(i) for i in range(truth.times.size)])
    ex = kin.wrap_angle(_euler_series(run) - x_true)
    return np.column_stack([ex, s[:, lay.vel] - truth.v, s[:, lay.pos] - truth.r])


def attitude_contraction(cfg: ScenarioConfig, trace: HybridTrace, sample_stride: int = 10) -> ContractionReport:
    """Hybrid condition for the attitude stage along the observer trace."""
    obs = cfg.observer
    att_events = [e for e in trace.events if "attitude" in e.tags]
    sub = HybridTrace(trace.times, trace.states, att_events)
    signals = cfg.signals
    gain = obs.attitude_gain
    if obs.chart == "quaternion":
        G = gain * np.eye(4) if np.ndim(gain) == 0 else np.asarray(gain, dtype=float)
        f = lambda q, t: kin.quaternion_rates(q, signals.omega(t))
        return verify_hybrid_condition(sub, f, lambda t, x: G, MetricSpec.identity(4),
                                       select=lambda y: y[0:4], sample_stride=sample_stride)
    G = gain * np.eye(3) if np.ndim(gain) == 0 else np.asarray(gain, dtype=float)
    f = lambda x, t: kin.euler_rates(x, signals.omega(t))
    metric = MetricSpec(lambda x, t: kin.metric_factor(x, obs.metric))
    return verify_hybrid_condition(sub, f, lambda t, x: G, metric,
                                   select=lambda y: y[0:3], sample_stride=sample_stride)


def _event_ratios(event_errors: NDArray) -> dict:
    out = {}
    for j, s in enumerate(STAGES):
        e = event_errors[:, j]
        prev, cur = e[:-1], e[1:]
        ok = prev > RATIO_FLOOR
        out[s] = [float(r) for r in cur[ok] / prev[ok]]
    return out


def simulate(cfg: ScenarioConfig) -> tuple[TruthTrajectory, ObserverRun]:
    """Truth, measurements and observer on a shared integrator grid."""
    truth = simulate_truth(cfg.signals, cfg.x0, cfg.v0, cfg.r0, cfg.horizon, cfg.dt,
                           chart=cfg.truth_chart, t0=cfg.t0, breakpoints=cfg.schedule)
    meas = emit_measurements(truth, cfg.schedule, disturbance=cfg.disturbance,
                             beacons=cfg.beacons, attitude_chart=cfg.chart)
    dist = cfg.disturbance
    observer = HierarchicalObserver(
        cfg.observer, cfg.signals, cfg.x0_hat, cfg.v0_hat, cfg.r0_hat,
        omega_disturbance=dist.input_disturbance(3, 0),
        gamma_disturbance=dist.input_disturbance(3, 1),
    )
    run = observer.run(meas, cfg.t0, cfg.t1, cfg.dt, breakpoints=cfg.schedule)
    if run.trace.times.size != truth.times.size or not np.array_equal(run.trace.times, truth.times):
        raise RuntimeError("observer and truth grids differ")
    return truth, run


def _columns(run: ObserverRun, truth: TruthTrajectory) -> tuple[NDArray, NDArray]:
    lay = run.layout
    s = run.trace.states
    n = truth.times.size
    if lay.chart == "quaternion":
        q_est = s[:, lay.att]
        q_true = np.array([align_sign(q_est[i], truth.quaternion(i)) for i in range(n)])
        t_att = q_true
    else:
        t_att = np.array([truth.euler(i) for i in range(n)])
    true = np.column_stack([t_att, truth.v, truth.r])
    return true, s.copy()


def _event_markers(trace: HybridTrace) -> list[str]:
    marks = [""] * trace.times.size
    for e in trace.events:
        if e.sample_index is not None:
            marks[e.sample_index] = "+".join(e.tags)
    return marks


def run_scenario(
    scenario: Union[str, Path, ScenarioConfig],
    out_dir: Optional[Union[str, Path]] = None,
    contraction_stride: int = 10,
) -> ScenarioResult:
    """Run a scenario end to end; write outputs when ``out_dir`` is given.

    Output files: ``trace.csv`` (every ``sample_every``-th sample plus all
    event samples), ``figure.svg``, ``contraction.csv`` and ``summary.json``.

    Raises
    ------
    ConfigError, UncertifiedGain
        Before any simulation.
    GimbalLock, SingularBeaconGeometry
        At run time (the latter only with ``singular_policy = abort``).
    """
    t_start = time.perf_counter()
    cfg = scenario if isinstance(scenario, ScenarioConfig) else load(scenario)
    cert = certify_scenario(cfg)
    truth, run = simulate(cfg)
    errors = error_norms(run, truth)
    comps = component_errors(run, truth)
    contraction = attitude_contraction(cfg, run.trace, contraction_stride)

    idx = np.array([e.sample_index for e in run.trace.events], dtype=int)
    ev_err = errors[idx] if idx.size else np.zeros((0, 3))
    summary = RunSummary(
        name=cfg.name,
        chart=cfg.chart,
        final_errors={s: float(errors[-1, j]) for j, s in enumerate(STAGES)},
        event_times=[float(e.t) for e in run.trace.events],
        event_errors=ev_err.tolist(),
        event_ratios=_event_ratios(ev_err) if idx.size > 1 else {s: [] for s in STAGES},
        alpha=contraction.alpha,
        contraction_satisfied=contraction.satisfied,
        certificates=cert["certificates"],
        wall_time=0.0,
        skipped_events=[float(t) for t in run.skipped],
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        marks = _event_markers(run.trace)
        keep = np.zeros(truth.times.size, dtype=bool)
        keep[:: cfg.sample_every] = True
        keep[-1] = True
        keep[idx] = True
        true, est = _columns(run, truth)
        write_trace_csv(out / "trace.csv", truth.times[keep], true[keep], est[keep], errors[keep],
                        [m for m, k in zip(marks, keep) if k], cfg.chart)
        x_true = np.array([truth.euler(i) for i in range(truth.times.size)])
        x_est = kin.unwrap_toward(x_true, _euler_series(run))
        lay = run.layout
        s = run.trace.states
        render_svg(
            truth.times,
            np.column_stack([x_true, truth.v, truth.r]),
            np.column_stack([x_est, s[:, lay.vel], s[:, lay.pos]]),
            ["psi [rad]", "theta [rad]", "phi [rad]", "vx [m/s]", "vy [m/s]", "vz [m/s]",
             "rx [m]", "ry [m]", "rz [m]"],
            title=f"{cfg.name}: true vs estimated state",
            path=out / "figure.svg",
        )
        contraction.to_csv(out / "contraction.csv")
        summary.outputs = {k: str(out / f) for k, f in
                           (("trace", "trace.csv"), ("figure", "figure.svg"),
                            ("contraction", "contraction.csv"), ("summary", "summary.json"))}
    summary.wall_time = time.perf_counter() - t_start
    if out_dir is not None:
        Path(summary.outputs["summary"]).write_text(json.dumps(summary.to_dict(), indent=2) + "\n",
                                                    encoding="utf-8")
    return ScenarioResult(cfg, truth, run, errors, comps, contraction, summary)
