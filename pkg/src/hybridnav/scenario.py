"""Scenario files: line-based ``key = value`` with one section per concern.

Example::

    [scenario]
    name = paper-sec4
    horizon = 20
    dt = 1e-3
    chart = euler            ; euler | quaternion

    [signals]
    preset = benchmark      ; benchmark | constant (then omega = a, b, c / gamma = ...)

    [truth]
    x0 = 0.1, 0.1, 0.1       ; Euler angles (psi, theta, phi), rad
    v0 = 0, 0, 0
    r0 = 1, 1, 1

    [schedule]
    attitude_period = 0.5    ; or attitude_times = 0.5, 1.0, ...; also *_offset
    range_period = 0.5       ; kinds: attitude, position, velocity, range

    [beacons]
    preset = benchmark      ; or points = ax, ay, az; bx, by, bz; ...
    rate = 1.0
    phase = 0.0

    [observer]
    x0 = 0, 0, 0
    attitude_gain = 1/3      ; scalar, or "diag(a, b, c)", or rows "a, b, c; d, e, f; ..."
    velocity_mode = ranges   ; positions | ranges | direct | none
    position_mode = ranges   ; linear | ranges | none
    range_k = 2/3

    [disturbance]
    D = 0
    N = 0
    seed = 0

    [output]
    sample_every = 10

All quantities are SI units and radians. Inline comments start with ``;`` or ``#``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .hybrid_sim import EventSchedule
from .observer import ObserverConfig
from .truth import MEASUREMENT_KINDS, BeaconSet, DisturbanceSpec, SignalSpec

BUILTIN_PACKAGE = "hybridnav.scenarios"

_KNOWN_SECTIONS = ("scenario", "signals", "truth", "schedule", "beacons", "observer", "disturbance", "output")


def parse_scalar(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"not a number: {text!r}") from None


def parse_vector(text: str, n: Optional[int] = None) -> NDArray:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    vec = np.array([parse_scalar(p) for p in parts])
    if n is not None and vec.size != n:
        raise ConfigError(f"expected {n} components, got {vec.size} in {text!r}")
    return vec


def parse_gain(text: str, dim: int = 3) -> Union[float, NDArray]:
    """Scalar (``1/3``), ``diag(a, b, c)`` or ``;``-separated matrix rows."""
    s = text.strip()
    if s.lower().startswith("diag(") and s.endswith(")"):
        return np.diag(parse_vector(s[5:-1], dim))
    if ";" in s:
        rows = [parse_vector(r, dim) for r in s.split(";") if r.strip()]
        if len(rows) != dim:
            raise ConfigError(f"gain matrix must be {dim}x{dim}: {text!r}")
        return np.array(rows)
    return parse_scalar(s)


def _periodic_or_listed(sec: configparser.SectionProxy, kind: str, t0: float, t1: float) -> EventSchedule:
    if f"{kind}_times" in sec:
        times = [t for t in parse_vector(sec[f"{kind}_times"]) if t0 < t <= t1]
        return EventSchedule.from_times(times, kind)
    if f"{kind}_period" in sec:
        period = parse_scalar(sec[f"{kind}_period"])
        offset = parse_scalar(sec[f"{kind}_offset"]) if f"{kind}_offset" in sec else None
        return EventSchedule.periodic(period, t0, t1, kind, offset)
    return EventSchedule.empty()


@dataclass
class ScenarioConfig:
    """Parsed scenario. ``source`` is the file it came from (if any)."""

    name: str
    horizon: float
    dt: float
    chart: str
    truth_chart: str
    signals: SignalSpec
    x0: NDArray
    v0: NDArray
    r0: NDArray
    schedule: EventSchedule
    beacons: Optional[BeaconSet]
    observer: ObserverConfig
    x0_hat: NDArray
    v0_hat: NDArray
    r0_hat: NDArray
    disturbance: DisturbanceSpec
    t0: float = 0.0
    sample_every: int = 10
    description: str = ""
    source: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def t1(self) -> float:
        return self.t0 + self.horizon

    def schedule_bounds(self) -> tuple[float, float]:
        """Smallest and largest interval between consecutive events (from ``t0``)."""
        if not len(self.schedule):
            return float("inf"), float("inf")
        d = self.schedule.intervals(self.t0)
        return float(d.min()), float(d.max())


def loads(text: str, source: Optional[str] = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<string>")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = [s for s in cp.sections() if s not in _KNOWN_SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    for s in _KNOWN_SECTIONS:
        if not cp.has_section(s):
            cp.add_section(s)
    sc, sg, tr, sh, bc, ob, di, out = (cp[s] for s in _KNOWN_SECTIONS)

    try:
        name = sc.get("name", Path(source).stem if source else "scenario")
        t0 = parse_scalar(sc.get("t0", "0"))
        horizon = parse_scalar(sc.get("horizon", "20"))
        dt = parse_scalar(sc.get("dt", "1e-3"))
        if not (horizon > 0 and dt > 0):
            raise ConfigError("horizon and dt must be positive")
        chart = sc.get("chart", "euler").strip()
        truth_chart = sc.get("truth_chart", "euler").strip()

        preset = sg.get("preset", "benchmark").strip()
        if preset == "benchmark":
            signals = SignalSpec.benchmark()
        elif preset == "constant":
            signals = SignalSpec.constant(parse_vector(sg.get("omega", "0,0,0"), 3),
                                          parse_vector(sg.get("gamma", "0,0,0"), 3))
        else:
            raise ConfigError(f"unknown signal preset {preset!r}")

        x0 = parse_vector(tr.get("x0", "0.1, 0.1, 0.1"), 3)
        v0 = parse_vector(tr.get("v0", "0, 0, 0"), 3)
        r0 = parse_vector(tr.get("r0", "1, 1, 1"), 3)

        parts = [_periodic_or_listed(sh, k, t0, t0 + horizon) for k in MEASUREMENT_KINDS]
        schedule = parts[0].merge(*parts[1:])

        beacons = None
        if "points" in bc:
            pts = parse_vector(bc["points"], 12).reshape(4, 3)
            beacons = BeaconSet.static(pts)
        elif bc.get("preset", "benchmark").strip() == "benchmark":
            beacons = BeaconSet.benchmark(parse_scalar(bc.get("rate", "1")), parse_scalar(bc.get("phase", "0")))
        else:
            raise ConfigError(f"unknown beacon preset {bc.get('preset')!r}")

        adim = 4 if chart == "quaternion" else 3
        obs = ObserverConfig(
            chart=chart,
            attitude_gain=parse_gain(ob.get("attitude_gain", "1/3"), adim),
            metric=ob.get("metric", "AH").strip(),
            velocity_mode=ob.get("velocity_mode", "ranges").strip(),
            velocity_gain=parse_gain(ob.get("velocity_gain", "1/2")),
            position_mode=ob.get("position_mode", "ranges").strip(),
            position_gain=parse_gain(ob.get("position_gain", "1/3")),
            range_k=parse_scalar(ob.get("range_k", "2/3")),
            singular_policy=ob.get("singular_policy", "skip").strip(),
        )
        obs.validate()
        x0_hat = parse_vector(ob.get("x0", "0, 0, 0"), 3)
        v0_hat = parse_vector(ob.get("v0", "0, 0, 0"), 3)
        r0_hat = parse_vector(ob.get("r0", "0, 0, 0"), 3)

        seq = lambda k: tuple(parse_vector(di[k])) if k in di else None
        disturbance = DisturbanceSpec(
            D=parse_scalar(di.get("D", "0")),
            N=parse_scalar(di.get("N", "0")),
            seed=int(di.get("seed", sc.get("seed", "0"))),
            D_seq=seq("D_seq"),
            N_seq=seq("N_seq"),
        )
        sample_every = int(out.get("sample_every", "10"))
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    if chart not in ("euler", "quaternion") or truth_chart not in ("euler", "quaternion"):
        raise ConfigError("chart and truth_chart must be 'euler' or 'quaternion'")
    needs = {"ranges": "range", "positions": "position", "direct": "velocity"}
    tags = {t for tg in schedule.tags for t in tg}
    if obs.velocity_mode in needs and needs[obs.velocity_mode] not in tags:
        raise ConfigError(f"velocity_mode = {obs.velocity_mode} but no {needs[obs.velocity_mode]} schedule")
    if obs.position_mode == "ranges" and "range" not in tags:
        raise ConfigError("position_mode = ranges but no range schedule")
    if obs.position_mode == "linear" and "position" not in tags:
        raise ConfigError("position_mode = linear but no position schedule")

    raw = {s: dict(cp[s]) for s in cp.sections()}
    return ScenarioConfig(
        name=name, horizon=horizon, dt=dt, chart=chart, truth_chart=truth_chart, signals=signals,
        x0=x0, v0=v0, r0=r0, schedule=schedule, beacons=beacons, observer=obs,
        x0_hat=x0_hat, v0_hat=v0_hat, r0_hat=r0_hat, disturbance=disturbance, t0=t0,
        sample_every=max(1, sample_every), description=sc.get("description", ""),
        source=source, raw=raw,
    )


def builtin_names() -> list[str]:
    files = resources.files(BUILTIN_PACKAGE).iterdir()
    return sorted(p.name[:-4] for p in files if p.name.endswith(".ini"))


def load(spec: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from a file path or a built-in name."""
    p = Path(spec)
    if p.is_file():
        return loads(p.read_text(encoding="utf-8"), str(p))
    name = str(spec)
    if name in builtin_names():
        text = resources.files(BUILTIN_PACKAGE).joinpath(name + ".ini").read_text(encoding="utf-8")
        return loads(text, name + ".ini")
    raise ConfigError(f"no scenario file or built-in scenario named {name!r}")
