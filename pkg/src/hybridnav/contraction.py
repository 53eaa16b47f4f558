"""Numerical contraction certificates for continuous, discrete and hybrid dynamics.

Continuous rate: ``lambda_bar`` is the largest eigenvalue of ``F^T + F`` for the
generalized Jacobian ``F = (dTheta/dt + Theta df/dx) Theta^-1``. Discrete rate:
``lambda_i`` is the largest eigenvalue of ``F_i^T F_i`` with
``F_i = Theta_{i+1} G_i Theta_i^-1``. The hybrid condition holds on a trace when
``lambda_i * exp(lambda_bar * dt_i) <= alpha < 1`` on every interval.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import SingularMetric
from .hybrid_sim import HybridTrace

FD_STEP = 1e-6
COND_LIMIT = 1e12

VectorField = Callable[[NDArray, float], NDArray]


@dataclass(frozen=True)
class MetricSpec:
    """Metric factor ``Theta(x, t)``; ``theta_dot(x, xdot, t)`` may be registered analytically."""

    theta: Callable[[NDArray, float], NDArray]
    theta_dot: Optional[Callable[[NDArray, NDArray, float], NDArray]] = None

    @classmethod
    def identity(cls, n: int) -> "MetricSpec":
        eye = np.eye(n)
        return cls(lambda x, t: eye, lambda x, xd, t: np.zeros((n, n)))

    @classmethod
    def constant(cls, theta: ArrayLike) -> "MetricSpec":
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        return cls(lambda x, t: th, lambda x, xd, t: np.zeros_like(th))

    def condition_number(self, x: NDArray, t: float) -> float:
        return float(np.linalg.cond(np.atleast_2d(self.theta(x, t))))


def _inv(theta: NDArray) -> NDArray:
    theta = np.atleast_2d(theta)
    if not np.linalg.cond(theta) < COND_LIMIT:
        raise SingularMetric(f"metric factor condition number exceeds {COND_LIMIT:.0e}")
    return np.linalg.inv(theta)


def numerical_jacobian(f: VectorField, x: ArrayLike, t: float, h: float = FD_STEP) -> NDArray:
    """Central-difference ``df/dx`` with per-component step ``h * max(1, |x_j|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cols = []
    for j in range(x.size):
        hj = h * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = hj
        cols.append((np.atleast_1d(f(x + e, t)) - np.atleast_1d(f(x - e, t))) / (2.0 * hj))
    return np.column_stack(cols)


def generalized_jacobian(
    f: VectorField, metric: MetricSpec, x: ArrayLike, t: float, h: float = FD_STEP
) -> NDArray:
    """``(Theta_dot + Theta df/dx) Theta^-1`` at ``(x, t)``.

    ``Theta_dot`` is the total derivative along the flow, by central
    differences ``(Theta(x + h xdot, t + h) - Theta(x - h xdot, t - h)) / 2h``
    unless the metric registers it analytically.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_2d(metric.theta(x, t))
    theta_inv = _inv(theta)
    jac = numerical_jacobian(f, x, t, h)
    xdot = np.atleast_1d(f(x, t))
    if metric.theta_dot is not None:
        theta_dot = np.atleast_2d(metric.theta_dot(x, xdot, t))
    else:
        theta_dot = (
            np.atleast_2d(metric.theta(x + h * xdot, t + h)) - np.atleast_2d(metric.theta(x - h * xdot, t - h))
        ) / (2.0 * h)
    return (theta_dot + theta @ jac) @ theta_inv


def continuous_rate(F: ArrayLike) -> float:
    """Largest eigenvalue of ``F^T + F``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    return float(np.linalg.eigvalsh(F + F.T)[-1])


def discrete_contraction_factor(G: ArrayLike, theta_i: ArrayLike, theta_ip1: Optional[ArrayLike] = None) -> float:
    """Largest eigenvalue of ``F_i^T F_i`` with ``F_i = Theta_{i+1} G Theta_i^-1``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    theta_i = np.atleast_2d(np.asarray(theta_i, dtype=float))
    theta_ip1 = theta_i if theta_ip1 is None else np.atleast_2d(np.asarray(theta_ip1, dtype=float))
    Fi = theta_ip1 @ G @ _inv(theta_i)
    return float(np.linalg.eigvalsh(Fi.T @ Fi)[-1])


@dataclass
class ContractionReport:
    """Per-interval hybrid-condition evaluation.

    Interval ``i`` runs from ``starts[i]`` to ``ends[i]``, the continuous phase
    followed by the discrete step at ``ends[i]``.
    """

    starts: NDArray
    ends: NDArray
    lambda_cont: NDArray
    lambda_disc: NDArray
    products: NDArray
    sample_times: NDArray
    sample_rates: NDArray

    @property
    def alpha(self) -> float:
        return float(np.max(self.products)) if self.products.size else 0.0

    @property
    def flagged(self) -> NDArray:
        return ~(self.products < 1.0)

    @property
    def satisfied(self) -> bool:
        return bool(self.products.size) and not bool(np.any(self.flagged))

    @property
    def margin(self) -> float:
        return 1.0 - self.alpha

    def rows(self) -> list[dict]:
        return [
            {
                "t_start": float(a), "t_end": float(b), "lambda_bar": float(lc),
                "lambda_i": float(ld), "product": float(p), "flagged": bool(fl),
            }
            for a, b, lc, ld, p, fl in zip(
                self.starts, self.ends, self.lambda_cont, self.lambda_disc, self.products, self.flagged
            )
        ]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start", "t_end", "lambda_bar", "lambda_i", "product", "flagged"])
        for r in self.rows():
            w.writerow([repr(r["t_start"]), repr(r["t_end"]), repr(r["lambda_bar"]),
                        repr(r["lambda_i"]), repr(r["product"]), int(r["flagged"])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_table(self, max_rows: int = 20) -> str:
        lines = [f"{'t_start':>9} {'t_end':>9} {'lambda_bar':>12} {'lambda_i':>12} {'product':>12}  flag"]
        rows = self.rows()
        for r in rows[:max_rows]:
            lines.append(
                f"{r['t_start']:9.4f} {r['t_end']:9.4f} {r['lambda_bar']:12.4e} "
                f"{r['lambda_i']:12.6f} {r['product']:12.6f}  {'FAIL' if r['flagged'] else 'ok'}"
            )
        if len(rows) > max_rows:
            lines.append(f"... {len(rows) - max_rows} more intervals")
        lines.append(f"alpha = {self.alpha:.6g}, margin = {self.margin:.6g}, "
                     f"condition {'satisfied' if self.satisfied else 'VIOLATED'}")
        return "\n".join(lines)


def hybrid_condition(
    lambda_cont: Sequence[float], lambda_disc: Sequence[float], dts: Sequence[float],
    starts: Optional[Sequence[float]] = None,
) -> ContractionReport:
    """Evaluate ``lambda_i * exp(lambda_bar_i * dt_i)`` per interval from precomputed rates."""
    lc = np.asarray(lambda_cont, dtype=float)
    ld = np.asarray(lambda_disc, dtype=float)
    dts = np.asarray(dts, dtype=float)
    if starts is None:
        starts = np.concatenate([[0.0], np.cumsum(dts)[:-1]])
    starts = np.asarray(starts, dtype=float)
    products = ld * np.exp(lc * dts)
    return ContractionReport(starts, starts + dts, lc, ld, products, np.array([]), np.array([]))


def verify_hybrid_condition(
    trace: HybridTrace,
    f: VectorField,
    map_jacobian: Callable[[float, NDArray], NDArray],
    metric: MetricSpec,
    select: Callable[[NDArray], NDArray] = lambda y: y,
    sample_stride: int = 1,
    h: float = FD_STEP,
) -> ContractionReport:
    """Check the hybrid condition along a recorded trace.

    Parameters
    ----------
    f
        Continuous field ``f(x, t)`` of the analysed (sub)state.
    map_jacobian
        ``G(t_i, x_minus)``, Jacobian of the discrete map at the event.
    select
        Extracts the analysed substate from a trace state vector.

    ``lambda_bar`` per interval is the supremum of the sampled continuous rate
    over that interval. The discrete factor uses ``Theta`` at the pre-event
    state on both sides.
    """
    times = trace.times
    idx = np.arange(0, times.size, max(1, sample_stride))
    rates = np.array([continuous_rate(generalized_jacobian(f, metric, select(trace.states[i]), times[i], h))
                      for i in idx])
    st = times[idx]
    starts, ends, lc, ld = [], [], [], []
    t_prev = float(times[0])
    for ev in trace.events:
        x_minus = select(ev.before)
        in_iv = (st >= t_prev) & (st <= ev.t)
        lam = float(np.max(rates[in_iv])) if np.any(in_iv) else continuous_rate(
            generalized_jacobian(f, metric, x_minus, ev.t, h))
        theta = metric.theta(x_minus, ev.t)
        starts.append(t_prev)
        ends.append(ev.t)
        lc.append(lam)
        ld.append(discrete_contraction_factor(map_jacobian(ev.t, x_minus), theta))
        t_prev = ev.t
    lc_a = np.asarray(lc)
    ld_a = np.asarray(ld)
    s = np.asarray(starts)
    e = np.asarray(ends)
    products = ld_a * np.exp(lc_a * (e - s))
    return ContractionReport(s, e, lc_a, ld_a, products, st, rates)
