"""Ground-truth trajectories, beacon motion and the discrete measurement stream."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin, sqrt
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kinematics as kin
from .hybrid_sim import DEFAULT_DT, TIME_TOL, EventSchedule, run_hybrid

Signal = Callable[[float], NDArray]

MEASUREMENT_KINDS = ("attitude", "position", "velocity", "range")


def _benchmark_omega(t: float) -> NDArray:
    return np.array([(2.0 + sin(t)) / 3.0, (3.0 + cos(t)) / 5.0, (2.0 + sin(2.0 * t)) / 3.0])


def _benchmark_gamma(t: float) -> NDArray:
    return np.array([cos(2.0 * t), sin(t), (1.0 + 2.0 * sin(t)) / 3.0])


@dataclass(frozen=True)
class SignalSpec:
    """Body turn rate ``omega(t)`` [rad/s] and body acceleration ``gamma(t)`` [m/s^2]."""

    omega: Signal
    gamma: Signal
    name: str = "custom"

    @classmethod
    def benchmark(cls) -> "SignalSpec":
        return cls(_benchmark_omega, _benchmark_gamma, "benchmark")

    @classmethod
    def constant(cls, omega: ArrayLike = (0.0, 0.0, 0.0), gamma: ArrayLike = (0.0, 0.0, 0.0)) -> "SignalSpec":
        w = np.array(omega, dtype=float)
        g = np.array(gamma, dtype=float)
        return cls(lambda t: w.copy(), lambda t: g.copy(), "constant")


@dataclass(frozen=True)
class CircularBeacon:
    """Point moving on ``center + radius*(cos(rate*t+phase)*u + sin(rate*t+phase)*w)``."""

    center: tuple[float, float, float]
    u: tuple[float, float, float]
    w: tuple[float, float, float]
    radius: float = 1.0
    rate: float = 1.0
    phase: float = 0.0

    def position(self, t: float) -> NDArray:
        a = self.rate * t + self.phase
        c, s = cos(a), sin(a)
        return np.array([self.center[k] + self.radius * (c * self.u[k] + s * self.w[k]) for k in range(3)])


@dataclass(frozen=True)
class StaticBeacon:
    point: tuple[float, float, float]

    def position(self, t: float) -> NDArray:
        return np.array(self.point, dtype=float)


@dataclass(frozen=True)
class BeaconSet:
    """Four reference points A, B, C, D as functions of time."""

    beacons: tuple

    def __post_init__(self):
        if len(self.beacons) != 4:
            raise ValueError("a beacon set has exactly four beacons")

    def positions(self, t: float) -> NDArray:
        """(4, 3) array of beacon positions at ``t``."""
        return np.array([b.position(t) for b in self.beacons])

    @classmethod
    def static(cls, points: ArrayLike) -> "BeaconSet":
        pts = np.asarray(points, dtype=float)
        return cls(tuple(StaticBeacon(tuple(p)) for p in pts))

    @classmethod
    def benchmark(cls, rate: float = 1.0, phase: float = 0.0) -> "BeaconSet":
        """Unit circles: A about the origin and B about (60,0,0) in z=0, C about
        (60,60,0) in x=60, D about (60,60,60) in y=60."""
        ex, ey, ez = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
        return cls(
            (
                CircularBeacon((0.0, 0.0, 0.0), ex, ey, 1.0, rate, phase),
                CircularBeacon((60.0, 0.0, 0.0), ex, ey, 1.0, rate, phase),
                CircularBeacon((60.0, 60.0, 0.0), ey, ez, 1.0, rate, phase),
                CircularBeacon((60.0, 60.0, 60.0), ex, ez, 1.0, rate, phase),
            )
        )


def range_measurements(r: ArrayLike, beacons: BeaconSet | ArrayLike, t: float = 0.0) -> NDArray:
    """Distances ``(y1, y2, y3, y4)`` from ``r`` to the four beacons at time ``t``."""
    pts = beacons.positions(t) if isinstance(beacons, BeaconSet) else np.asarray(beacons, dtype=float)
    return np.linalg.norm(pts - np.asarray(r, dtype=float), axis=1)


@dataclass
class TruthTrajectory:
    """Dense truth samples. ``x`` holds Euler angles (unwrapped, continuous), ``q`` quaternions."""

    times: NDArray
    x: Optional[NDArray]
    q: Optional[NDArray]
    v: NDArray
    r: NDArray
    chart: str
    signals: SignalSpec

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t - TIME_TOL))
        if i >= self.times.size or abs(self.times[i] - t) > TIME_TOL:
            raise KeyError(f"t = {t!r} is not a truth sample time")
        return i

    def attitude_dcm(self, i: int) -> NDArray:
        if self.chart == "quaternion":
            return kin.dcm_from_quaternion(kin.normalize_quaternion(self.q[i]))
        return kin.dcm_from_euler(self.x[i])

    def euler(self, i: int) -> NDArray:
        if self.x is not None:
            return self.x[i]
        return kin.quaternion_to_euler(self.q[i])

    def quaternion(self, i: int) -> NDArray:
        if self.q is not None:
            return kin.normalize_quaternion(self.q[i])
        return kin.euler_to_quaternion(self.x[i])


def truth_field(signals: SignalSpec, chart: str = "euler"):
    """Vector field of the strapdown kinematics on ``[att, v, r]``."""
    if chart == "euler":
        def f(t, y):
            x = y[0:3]
            kin.require_in_chart(x)
            return np.concatenate(
                [kin.euler_rates(x, signals.omega(t)), kin.dcm_from_euler(x) @ signals.gamma(t), y[3:6]]
            )
    elif chart == "quaternion":
        def f(t, y):
            q = y[0:4]
            # unnormalized q between renormalizations; A(q/|q|)
            a = kin.dcm_from_quaternion(q / sqrt(q @ q))
            return np.concatenate([kin.quaternion_rates(q, signals.omega(t)), a @ signals.gamma(t), y[4:7]])
    else:
        raise ValueError(f"unknown chart {chart!r}")
    return f


def _renormalize_quaternion_head(y: NDArray) -> NDArray:
    y = y.copy()
    y[0:4] = y[0:4] / np.linalg.norm(y[0:4])
    return y


def simulate_truth(
    signals: SignalSpec,
    x0: ArrayLike,
    v0: ArrayLike,
    r0: ArrayLike,
    horizon: float,
    dt: float = DEFAULT_DT,
    chart: str = "euler",
    t0: float = 0.0,
    breakpoints: Optional[EventSchedule] = None,
    renormalize_every: int = 1000,
) -> TruthTrajectory:
    """Integrate the true system on ``[t0, t0 + horizon]``.

    ``x0`` is always given as Euler angles. ``breakpoints`` forces integrator
    landings at those instants (use the measurement schedule) so measurements
    sample truth exactly.

    Raises
    ------
    GimbalLock
        In the Euler chart, if the trajectory reaches the chart singularity.
    """
    x0 = np.asarray(x0, dtype=float)
    sched = breakpoints if breakpoints is not None else EventSchedule.empty()
    f = truth_field(signals, chart)
    if chart == "euler":
        y0 = np.concatenate([x0, v0, r0]).astype(float)
        trace = run_hybrid(f, None, sched, y0, t0, t0 + horizon, dt)
        s = trace.states
        return TruthTrajectory(trace.times, s[:, 0:3], None, s[:, 3:6], s[:, 6:9], chart, signals)
    y0 = np.concatenate([kin.euler_to_quaternion(x0), v0, r0]).astype(float)
    trace = run_hybrid(
        f, None, sched, y0, t0, t0 + horizon, dt,
        project=_renormalize_quaternion_head, project_every=renormalize_every,
    )
    s = trace.states
    return TruthTrajectory(trace.times, None, s[:, 0:4], s[:, 4:7], s[:, 7:10], chart, signals)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bounds on input disturbance ``|d| <= D`` and measurement noise ``|n| <= N``.

    ``D_seq``/``N_seq`` optionally give per-interval bounds (interval ``i`` is
    ``[t_i, t_{i+1})`` of the measurement schedule).
    """

    D: float = 0.0
    N: float = 0.0
    seed: int = 0
    D_seq: Optional[tuple[float, ...]] = None
    N_seq: Optional[tuple[float, ...]] = None

    def noise_bound(self, i: int) -> float:
        if self.N_seq is not None:
            return self.N_seq[min(i, len(self.N_seq) - 1)]
        return self.N

    def input_disturbance(self, dim: int = 3, stream: int = 0) -> Signal:
        """Smooth deterministic signal with ``|d(t)| <= D`` for all ``t``."""
        if self.D == 0.0 and self.D_seq is None:
            zero = np.zeros(dim)
            return lambda t: zero
        rng = np.random.default_rng([self.seed, 1, stream])
        freq = rng.uniform(0.3, 3.0, size=dim)
        phase = rng.uniform(0.0, 2 * np.pi, size=dim)
        scale = self.D / sqrt(dim)
        return lambda t: scale * np.sin(freq * t + phase)


def sample_ball(rng: np.random.Generator, dim: int, radius: float) -> NDArray:
    """Uniform sample in the closed ball of ``radius``, hard-clamped to the bound."""
    if radius <= 0.0:
        return np.zeros(dim)
    d = rng.standard_normal(dim)
    d /= np.linalg.norm(d)
    n = radius * rng.uniform() ** (1.0 / dim) * d
    norm = np.linalg.norm(n)
    if norm > radius:
        n *= radius / norm
    return n


@dataclass(frozen=True)
class MeasurementEvent:
    """A discrete measurement at ``t``.

    ``value`` is Euler angles or a quaternion (``kind='attitude'``), a
    position or velocity vector, or four ranges (``kind='range'``, with the
    beacon positions at ``t`` in ``beacons``). ``noise`` records the realized
    perturbation.
    """

    t: float
    kind: str
    value: NDArray
    beacons: Optional[NDArray] = None
    noise: Optional[NDArray] = field(default=None, compare=False)


def _small_rotation_quaternion(rv: NDArray) -> NDArray:
    angle = np.linalg.norm(rv)
    if angle == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.concatenate([[cos(angle / 2)], sin(angle / 2) * rv / angle])


def _quat_mul(p: NDArray, q: NDArray) -> NDArray:
    p0, pv = p[0], p[1:]
    q0, qv = q[0], q[1:]
    return np.concatenate([[p0 * q0 - pv @ qv], p0 * qv + q0 * pv + np.cross(pv, qv)])


def emit_measurements(
    truth: TruthTrajectory,
    schedule: EventSchedule,
    kinds: Optional[Mapping[str, str]] = None,
    disturbance: DisturbanceSpec = DisturbanceSpec(),
    beacons: Optional[BeaconSet] = None,
    attitude_chart: str = "euler",
) -> list[MeasurementEvent]:
    """Sample truth at each scheduled instant and add bounded noise.

    ``kinds`` maps schedule tags to measurement kinds; by default a tag is its
    own kind. Euler-angle fixes are reported wrapped to ``[-pi, pi)``.
    Quaternion fixes are perturbed by a rotation of angle ``<= N``.
    """
    kinds = dict(kinds or {})
    rng = np.random.default_rng(disturbance.seed)
    out: list[MeasurementEvent] = []
    order = {k: i for i, k in enumerate(MEASUREMENT_KINDS)}
    for ev in schedule:
        i = truth.index_of(ev.t)
        bound = disturbance.noise_bound(ev.index)
        evs = []
        for tag in ev.tags:
            kind = kinds.get(tag, tag)
            if kind == "attitude":
                if attitude_chart == "quaternion":
                    n = sample_ball(rng, 3, bound)
                    q = _quat_mul(truth.quaternion(i), _small_rotation_quaternion(n))
                    value = q if q[0] >= 0 else -q
                else:
                    n = sample_ball(rng, 3, bound)
                    value = kin.wrap_angle(truth.euler(i) + n)
                evs.append(MeasurementEvent(ev.t, kind, value, None, n))
            elif kind == "position":
                n = sample_ball(rng, 3, bound)
                evs.append(MeasurementEvent(ev.t, kind, truth.r[i] + n, None, n))
            elif kind == "velocity":
                n = sample_ball(rng, 3, bound)
                evs.append(MeasurementEvent(ev.t, kind, truth.v[i] + n, None, n))
            elif kind == "range":
                if beacons is None:
                    raise ValueError("range measurements need a BeaconSet")
                pts = beacons.positions(ev.t)
                n = sample_ball(rng, 4, bound)
                # a distance cannot be negative; clipping only moves it closer to truth
                y = np.maximum(range_measurements(truth.r[i], pts) + n, 0.0)
                evs.append(MeasurementEvent(ev.t, kind, y, pts, n))
            else:
                raise ValueError(f"unknown measurement kind {kind!r}")
        evs.sort(key=lambda m: order[m.kind])
        out.extend(evs)
    return out
