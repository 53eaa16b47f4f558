"""Three-stage hierarchical observer (attitude -> velocity -> position) on the hybrid engine."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kinematics as kin
from .attitude import (
    attitude_discrete_update,
    certify_attitude_gain,
    quaternion_discrete_update,
)
from .errors import ConfigError, SingularBeaconGeometry
from .hybrid_sim import DEFAULT_DT, Event, EventSchedule, HybridTrace, run_hybrid
from .position import (
    beacon_difference_matrix,
    certify_position_range_gain,
    position_update_linear,
    position_update_ranges,
)
from .truth import MeasurementEvent, SignalSpec
from .velocity import RangeFix, VelocityObserverState, velocity_update_direct

log = logging.getLogger(__name__)

Gain = Union[float, NDArray]

VELOCITY_MODES = ("positions", "ranges", "direct", "none")
POSITION_MODES = ("linear", "ranges", "none")


def _key(t: float) -> float:
    return round(t, 9)


@dataclass
class ObserverConfig:
    chart: str = "euler"
    attitude_gain: Gain = 1.0 / 3.0
    metric: str = "AH"
    velocity_mode: str = "ranges"
    velocity_gain: Gain = 0.5
    position_mode: str = "ranges"
    position_gain: Gain = 1.0 / 3.0
    range_k: float = 2.0 / 3.0
    singular_policy: str = "skip"

    def validate(self) -> None:
        if self.chart not in ("euler", "quaternion"):
            raise ConfigError(f"chart must be 'euler' or 'quaternion', got {self.chart!r}")
        if self.metric not in kin.METRIC_VARIANTS:
            raise ConfigError(f"metric must be one of {kin.METRIC_VARIANTS}")
        if self.velocity_mode not in VELOCITY_MODES:
            raise ConfigError(f"velocity_mode must be one of {VELOCITY_MODES}")
        if self.position_mode not in POSITION_MODES:
            raise ConfigError(f"position_mode must be one of {POSITION_MODES}")
        if self.singular_policy not in ("skip", "abort"):
            raise ConfigError("singular_policy must be 'skip' or 'abort'")
        if self.velocity_mode == "ranges" and self.position_mode != "ranges":
            raise ConfigError("range-based velocity updates need position_mode = ranges")

    def certificates(self) -> dict[str, tuple[float, bool]]:
        """``name -> (lambda, certified)`` for every gain in use."""
        # matrix attitude gains are also checked per event for commuting with Theta(x_hat-)
        c = certify_attitude_gain(self.attitude_gain)
        certs = {"attitude": (c.lambda_bar, c.certified)}
        if self.velocity_mode == "direct":
            c = certify_attitude_gain(self.velocity_gain)
            certs["velocity"] = (c.lambda_bar, c.certified)
        if self.position_mode == "linear":
            c = certify_attitude_gain(self.position_gain)
            certs["position"] = (c.lambda_bar, c.certified)
        elif self.position_mode == "ranges":
            c = certify_position_range_gain(self.range_k)
            certs["position"] = (c.lambda_i, c.certified)
        return certs


@dataclass
class StateLayout:
    chart: str

    @property
    def att(self) -> slice:
        return slice(0, 4) if self.chart == "quaternion" else slice(0, 3)

    @property
    def vel(self) -> slice:
        o = self.att.stop
        return slice(o, o + 3)

    @property
    def pos(self) -> slice:
        o = self.att.stop + 3
        return slice(o, o + 3)

    @property
    def size(self) -> int:
        return self.att.stop + 6

    def dcm(self, y: NDArray) -> NDArray:
        a = y[self.att]
        if self.chart == "quaternion":
            return kin.dcm_from_quaternion(a / np.linalg.norm(a))
        return kin.dcm_from_euler(a)

    def euler(self, y: NDArray) -> NDArray:
        a = y[self.att]
        return kin.quaternion_to_euler(a) if self.chart == "quaternion" else a


@dataclass
class ObserverRun:
    trace: HybridTrace
    layout: StateLayout
    measurements: list[MeasurementEvent]
    skipped: list[float] = field(default_factory=list)


class HierarchicalObserver:
    """Hybrid observer for ``xdot = H^-1 omega, vdot = A gamma, rdot = v``.

    Within one event instant the stages update in the order attitude,
    position, velocity, so range-based velocity updates see the
    post-update position estimate.

    ``omega_disturbance``/``gamma_disturbance`` are added to the signals the
    observer integrates (bounded input disturbance).
    """

    def __init__(
        self,
        config: ObserverConfig,
        signals: SignalSpec,
        x0_hat: ArrayLike,
        v0_hat: ArrayLike,
        r0_hat: ArrayLike,
        omega_disturbance: Optional[Callable[[float], NDArray]] = None,
        gamma_disturbance: Optional[Callable[[float], NDArray]] = None,
    ):
        config.validate()
        self.config = config
        self.signals = signals
        self.layout = StateLayout(config.chart)
        x0_hat = np.asarray(x0_hat, dtype=float)
        att0 = kin.euler_to_quaternion(x0_hat) if config.chart == "quaternion" else x0_hat
        self.y0 = np.concatenate([att0, np.asarray(v0_hat, float), np.asarray(r0_hat, float)])
        self._dw = omega_disturbance
        self._dg = gamma_disturbance
        self.vstate = VelocityObserverState(np.asarray(v0_hat, dtype=float))
        self.skipped: list[float] = []
        self._by_time: dict[float, list[MeasurementEvent]] = {}

    def omega(self, t: float) -> NDArray:
        w = self.signals.omega(t)
        return w + self._dw(t) if self._dw is not None else w

    def gamma(self, t: float) -> NDArray:
        g = self.signals.gamma(t)
        return g + self._dg(t) if self._dg is not None else g

    def field(self, t: float, y: NDArray) -> NDArray:
        lay = self.layout
        a = y[lay.att]
        w = self.omega(t)
        if lay.chart == "quaternion":
            att_rate = kin.quaternion_rates(a, w)
            dcm = kin.dcm_from_quaternion(a / np.sqrt(a @ a))
        else:
            kin.require_in_chart(a)
            att_rate = kin.euler_rates(a, w)
            dcm = kin.dcm_from_euler(a)
        return np.concatenate([att_rate, dcm @ self.gamma(t), y[lay.vel]])

    def integrand(self, t: float, y: NDArray) -> NDArray:
        return y[self.layout.vel]

    def _attitude_update(self, a: NDArray, m: MeasurementEvent) -> NDArray:
        cfg = self.config
        meas = np.asarray(m.value, dtype=float)
        if cfg.chart == "quaternion":
            if meas.size == 3:
                meas = kin.euler_to_quaternion(meas)
            return quaternion_discrete_update(a, meas, cfg.attitude_gain)
        if meas.size == 4:
            meas = kin.quaternion_to_euler(meas)
        return attitude_discrete_update(a, meas, cfg.attitude_gain, cfg.metric)

    def discrete_map(self, ev: Event, y: NDArray, acc: Optional[NDArray]):
        cfg, lay = self.config, self.layout
        y = y.copy()
        info: dict = {}
        ms = self._by_time.get(_key(ev.t), [])
        by_kind = {m.kind: m for m in ms}

        if "attitude" in by_kind:
            y[lay.att] = self._attitude_update(y[lay.att], by_kind["attitude"])

        r_minus = y[lay.pos].copy()
        range_fix = None
        if "range" in by_kind and cfg.position_mode == "ranges":
            m = by_kind["range"]
            range_fix = RangeFix(ev.t, np.asarray(m.value), np.asarray(m.beacons))
            geo = beacon_difference_matrix(range_fix.beacons)
            if geo.singular:
                info["singular"] = True
                self.skipped.append(ev.t)
                log.warning("singular beacon geometry at t=%.6g (rel det %.3e); skipping range fix",
                            ev.t, geo.relative_det)
                if cfg.singular_policy == "abort":
                    raise SingularBeaconGeometry(f"coplanar beacons at t = {ev.t!r}")
                range_fix = None
            else:
                y[lay.pos] = position_update_ranges(r_minus, range_fix.ranges, range_fix.beacons, cfg.range_k)
        elif "position" in by_kind and cfg.position_mode == "linear":
            y[lay.pos] = position_update_linear(r_minus, by_kind["position"].value, cfg.position_gain)

        vs = self.vstate
        vs.v_hat = y[lay.vel].copy()
        reset = False
        if cfg.velocity_mode == "positions" and "position" in by_kind:
            vs.apply_position_fix(ev.t, by_kind["position"].value, acc)
            reset = True
        elif cfg.velocity_mode == "ranges" and range_fix is not None:
            vs.apply_range_fix(range_fix, r_minus, y[lay.pos])
            reset = True
        elif cfg.velocity_mode == "direct" and "velocity" in by_kind:
            vs.v_hat = velocity_update_direct(vs.v_hat, by_kind["velocity"].value, cfg.velocity_gain)
        y[lay.vel] = vs.v_hat

        if reset and acc is not None:
            acc = np.zeros_like(acc)
        info["kinds"] = tuple(by_kind)
        return y, acc, info

    def _project(self, y: NDArray) -> NDArray:
        y = y.copy()
        a = self.layout.att
        y[a] = y[a] / np.linalg.norm(y[a])
        return y

    def run(
        self,
        measurements: Sequence[MeasurementEvent],
        t0: float,
        t1: float,
        dt: float = DEFAULT_DT,
        breakpoints: Optional[EventSchedule] = None,
    ) -> ObserverRun:
        """Run the observer over ``[t0, t1]`` consuming ``measurements``.

        ``breakpoints`` adds integrator landings without measurements so the
        observer grid can match a truth grid built from the same schedule.
        """
        self._by_time = {}
        for m in measurements:
            self._by_time.setdefault(_key(m.t), []).append(m)
        keys = sorted(self._by_time)
        sched = EventSchedule(
            tuple(self._by_time[k][0].t for k in keys),
            tuple(tuple(m.kind for m in self._by_time[k]) for k in keys),
        )
        if breakpoints is not None:
            sched = sched.merge(breakpoints)
        self.vstate = VelocityObserverState(self.y0[self.layout.vel].copy())
        self.skipped = []
        project = self._project if self.layout.chart == "quaternion" else None
        trace = run_hybrid(
            self.field, self.discrete_map, sched, self.y0, t0, t1, dt,
            integrand=self.integrand, project=project, project_every=1000,
        )
        return ObserverRun(trace, self.layout, list(measurements), list(self.skipped))
