"""Fixed-step hybrid execution: RK4 between scheduled instants, discrete maps at them."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NonFiniteState

DEFAULT_DT = 1e-3

# Event times closer than this are treated as the same instant when merging.
TIME_TOL = 1e-9

Field = Callable[[float, NDArray], NDArray]
Integrand = Callable[[float, NDArray], NDArray]


@dataclass(frozen=True)
class Event:
    t: float
    tags: tuple[str, ...]
    index: int


@dataclass(frozen=True)
class EventSchedule:
    """Strictly increasing event instants, each carrying one or more payload tags."""

    times: tuple[float, ...]
    tags: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.times) != len(self.tags):
            raise ValueError("times and tags must have equal length")
        t = np.asarray(self.times, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("event times must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("event times must be strictly increasing")

    @classmethod
    def empty(cls) -> "EventSchedule":
        return cls((), ())

    @classmethod
    def from_times(cls, times: Iterable[float], tag: str = "event") -> "EventSchedule":
        times = tuple(float(t) for t in times)
        return cls(times, tuple((tag,) for _ in times))

    @classmethod
    def periodic(cls, period: float, t0: float, t1: float, tag: str = "event",
                 offset: Optional[float] = None) -> "EventSchedule":
        """Instants ``t0 + offset + k*period`` in ``(t0, t1]``; ``offset`` defaults to ``period``."""
        if not period > 0.0:
            raise ValueError("period must be positive")
        first = t0 + (period if offset is None else offset)
        n = int(np.floor((t1 - first) / period + TIME_TOL)) + 1
        times = [round(first + k * period, 12) for k in range(max(n, 0))]
        return cls.from_times([t for t in times if t0 < t <= t1 + TIME_TOL], tag)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        for i, (t, tags) in enumerate(zip(self.times, self.tags)):
            yield Event(t, tags, i)

    def merge(self, *others: "EventSchedule") -> "EventSchedule":
        """Merge schedules; coincident instants (within ``TIME_TOL``) become one event."""
        pairs = []
        for s in (self, *others):
            pairs.extend(zip(s.times, s.tags))
        pairs.sort(key=lambda p: p[0])
        times: list[float] = []
        tags: list[tuple[str, ...]] = []
        for t, tg in pairs:
            if times and abs(t - times[-1]) <= TIME_TOL:
                tags[-1] = tags[-1] + tuple(x for x in tg if x not in tags[-1])
            else:
                times.append(t)
                tags.append(tuple(tg))
        return EventSchedule(tuple(times), tuple(tags))

    def intervals(self, t0: float) -> NDArray:
        """Interval lengths ``t_{i+1} - t_i`` with ``t0`` prepended."""
        return np.diff(np.concatenate([[t0], self.times]))

    def select(self, tag: str) -> "EventSchedule":
        keep = [(t, tg) for t, tg in zip(self.times, self.tags) if tag in tg]
        return EventSchedule(tuple(t for t, _ in keep), tuple(tg for _, tg in keep))


@dataclass(frozen=True)
class EventRecord:
    t: float
    tags: tuple[str, ...]
    before: NDArray
    after: NDArray
    sample_index: int
    info: dict = field(default_factory=dict)


@dataclass
class HybridTrace:
    """Dense samples at every integrator landing plus pre/post state at each event.

    At an event instant the dense sample holds the post-event state.
    """

    times: NDArray
    states: NDArray
    events: list[EventRecord]

    @property
    def final_state(self) -> NDArray:
        return self.states[-1]

    def event_times(self) -> NDArray:
        return np.array([e.t for e in self.events])


def step_grid(t0: float, t1: float, dt: float) -> NDArray:
    """Landing times from ``t0`` to ``t1``; the last step is shortened to hit ``t1`` exactly."""
    if not t1 > t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    n = max(1, int(ceil((t1 - t0) / dt - TIME_TOL)))
    grid = t0 + dt * np.arange(n + 1, dtype=float)
    grid[-1] = t1
    return grid


def rk4_step(f: Field, t: float, y: NDArray, h: float) -> NDArray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(
    f: Field,
    y0: ArrayLike,
    t0: float,
    t1: float,
    dt: float = DEFAULT_DT,
    integrand: Optional[Integrand] = None,
    acc0: Optional[ArrayLike] = None,
    project: Optional[Callable[[NDArray], NDArray]] = None,
    project_every: int = 1000,
    record: Optional[list] = None,
) -> tuple[NDArray, Optional[NDArray]]:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1`` with classical RK4.

    Parameters
    ----------
    integrand
        Optional ``g(t, y)``; its running integral is accumulated with the
        trapezoid rule on step endpoints (error ``O(dt**2)``) and returned.
    project
        Optional map applied to the state every ``project_every`` steps
        (e.g. quaternion renormalization).
    record
        If given, ``(t, y)`` is appended after every step.

    Raises
    ------
    NonFiniteState
        If any state component stops being finite.
    """
    y = np.array(y0, dtype=float)
    acc = None
    if integrand is not None:
        acc = np.zeros_like(integrand(t0, y), dtype=float) if acc0 is None else np.array(acc0, dtype=float)
        g_prev = integrand(t0, y)
    grid = step_grid(t0, t1, dt)
    for k in range(1, grid.size):
        t_prev, t = grid[k - 1], grid[k]
        h = t - t_prev
        y = rk4_step(f, t_prev, y, h)
        if project is not None and k % project_every == 0:
            y = project(y)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at t = {t!r}")
        if integrand is not None:
            g = integrand(t, y)
            acc = acc + 0.5 * h * (g_prev + g)
            g_prev = g
        if record is not None:
            record.append((t, y))
    return y, acc


# discrete_map(event, state_minus, accumulator) -> (state_plus, accumulator_plus[, info])
DiscreteMap = Callable[[Event, NDArray, Optional[NDArray]], tuple]


def run_hybrid(
    f: Field,
    discrete_map: Optional[DiscreteMap],
    schedule: EventSchedule,
    y0: ArrayLike,
    t0: float,
    t1: float,
    dt: float = DEFAULT_DT,
    integrand: Optional[Integrand] = None,
    project: Optional[Callable[[NDArray], NDArray]] = None,
    project_every: int = 1000,
) -> HybridTrace:
    """Alternate continuous propagation and discrete maps over ``schedule``.

    Events outside ``(t0, t1]`` are ignored; no map fires at ``t0``. The
    discrete map may return a third element, a dict stored on the event record.
    """
    y = np.array(y0, dtype=float)
    acc = None
    if integrand is not None:
        acc = np.zeros_like(np.asarray(integrand(t0, y), dtype=float))
    record: list = [(t0, y.copy())]
    events: list[EventRecord] = []
    t = t0
    for ev in schedule:
        if ev.t <= t0 or ev.t > t1 + TIME_TOL:
            continue
        if ev.t > t:
            y, acc = propagate(f, y, t, ev.t, dt, integrand, acc, project, project_every, record)
            t = ev.t
        before = y.copy()
        info: dict = {}
        if discrete_map is not None:
            out = discrete_map(ev, y, acc)
            y, acc = np.array(out[0], dtype=float), out[1]
            if len(out) > 2 and out[2]:
                info = dict(out[2])
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(f"non-finite state after event at t = {ev.t!r}")
        record[-1] = (t, y.copy())
        events.append(EventRecord(ev.t, ev.tags, before, y.copy(), len(record) - 1, info))
    if t1 > t + TIME_TOL:
        y, acc = propagate(f, y, t, t1, dt, integrand, acc, project, project_every, record)
    times = np.array([r[0] for r in record])
    states = np.array([r[1] for r in record])
    return HybridTrace(times, states, events)
