"""Worst-case estimation-error bounds under bounded disturbances, and gain selection.

Between fixes the error grows at most like ``exp(lam*dt) R + D/lam (exp(lam*dt) - 1)``;
a blend with gain ``k`` and a fix with noise ``|n| <= N`` then gives

    R_new = |k| exp(lam dt) R_old + |k| D/lam (exp(lam dt) - 1) + |k - 1| N.

``R_new`` is affine in ``k`` on ``[0, k_m]``, so its minimum sits at an end point.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import exp, expm1, sqrt
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyCandidates

# Below this |lam| the growth term D/lam*(exp(lam dt)-1) is replaced by its limit D*dt.
LAMBDA_ZERO = 1e-9
# Keeps the strict inequality k * exp(lam dt) < 1 at the cap.
CAP_MARGIN = 1e-9


def drift_growth(lam: float, dt: float) -> float:
    """``(exp(lam dt) - 1) / lam``, continuous at ``lam = 0``."""
    if abs(lam) < LAMBDA_ZERO:
        return dt
    return expm1(lam * dt) / lam


@dataclass
class ErrorBoundState:
    """Running bound ``R`` with continuous rate ``lam_bar`` and bounds ``D``, ``N``.

    ``k_max`` overrides the default cap ``exp(-lam_bar * dt)``.
    """

    R: float
    lam_bar: float = 0.0
    D: float = 0.0
    N: float = 0.0
    k_max: Optional[float] = None

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("R must be non-negative")

    def k_m(self, dt: float) -> float:
        """Gain cap: ``min(k_max, 1)``, kept strictly below ``exp(-lam dt)`` and 1."""
        if self.k_max is not None:
            return min(self.k_max, 1.0 - CAP_MARGIN)
        return min(exp(-self.lam_bar * dt), 1.0) - CAP_MARGIN

    def growth_terms(self, dt: float, D: Optional[float] = None) -> tuple[float, float]:
        """``(A, B)`` with ``A = exp(lam dt) R`` and ``B = D (exp(lam dt) - 1)/lam``."""
        D = self.D if D is None else D
        return exp(self.lam_bar * dt) * self.R, D * drift_growth(self.lam_bar, dt)


def propagate_bound(state: ErrorBoundState, k: float, dt: float) -> float:
    a, b = state.growth_terms(dt)
    return abs(k) * a + abs(k) * b + abs(k - 1.0) * state.N


def minimize_affine(A: float, B: float, N: float, k_m: float) -> tuple[float, float]:
    """Minimize ``F(k) = (A + B - N) k + N`` over ``[0, k_m]``; ties go to ``k = 0``."""
    slope = A + B - N
    if slope < 0.0:
        return k_m, slope * k_m + N
    return 0.0, N


def optimal_gain(state: ErrorBoundState, dt: float, D: Optional[float] = None,
                 N: Optional[float] = None) -> tuple[float, float]:
    """Gain minimizing the bound after the next fix.

    Returns ``(k_star, F_min)``. ``D``/``N`` override the state's bounds.
    """
    N = state.N if N is None else N
    a, b = state.growth_terms(dt, D)
    return minimize_affine(a, b, N, state.k_m(dt))


@dataclass
class BoundStep:
    t: float
    R: float
    k: float
    F_min: float


def propagate_bound_timevarying(
    state: ErrorBoundState,
    dts: Sequence[float],
    D_seq: Optional[Sequence[float]] = None,
    N_seq: Optional[Sequence[float]] = None,
    k_seq: Optional[Sequence[float]] = None,
    t0: float = 0.0,
) -> list[BoundStep]:
    """Run the bound recursion with per-interval ``D_i``, ``N_i``.

    With ``k_seq=None`` each step uses the optimal gain for that interval.
    ``F_min`` is always reported; ``R`` follows the gain actually used.
    """
    n = len(dts)
    D_seq = [state.D] * n if D_seq is None else list(D_seq)
    N_seq = [state.N] * n if N_seq is None else list(N_seq)
    if not (len(D_seq) == len(N_seq) == n) or (k_seq is not None and len(k_seq) != n):
        raise ValueError("sequences must be aligned with dts")
    R = state.R
    t = t0
    out: list[BoundStep] = []
    for i in range(n):
        st = ErrorBoundState(R, state.lam_bar, D_seq[i], N_seq[i], state.k_max)
        k_star, f_min = optimal_gain(st, dts[i])
        k = k_star if k_seq is None else k_seq[i]
        R = propagate_bound(st, k, dts[i])
        t += dts[i]
        out.append(BoundStep(t, R, k, f_min))
    return out


def nonlinear_bound(
    R_old: float, lam_disc: float, lam_i: float, lam_bar: float, lam_e: float,
    D: float, N: float, dt: float,
) -> float:
    """Bound after a nonlinear fix.

    ``lam_disc`` is ``lambda_max`` of ``(I + dg/dy dy/dx)^T (.)``, ``lam_e`` that
    of the noise Jacobian, ``lam_i`` the symmetric-part rate used for ``R_old``
    and ``lam_bar`` the rate used for the disturbance term.
    """
    if min(lam_disc, lam_e) < 0:
        raise ValueError("discrete factors must be non-negative")
    s = sqrt(lam_disc)
    return s * exp(lam_i * dt) * R_old + s * D * drift_growth(lam_bar, dt) + sqrt(lam_e) * N


@dataclass(frozen=True)
class CandidateMeasurement:
    """A candidate discrete update with its Jacobian-derived factors and noise bound."""

    lam_disc: float
    lam_e: float
    N: float
    name: str = ""
    lam_i: Optional[float] = None

    @classmethod
    def linear(cls, k: float, N: float, name: str = "") -> "CandidateMeasurement":
        """Blend ``k x- + (1-k) x_meas``: factors ``k**2`` and ``(1-k)**2``."""
        return cls(k * k, (1.0 - k) ** 2, N, name)

    def bound(self, state: ErrorBoundState, dt: float) -> float:
        lam_i = state.lam_bar if self.lam_i is None else self.lam_i
        return nonlinear_bound(state.R, self.lam_disc, lam_i, state.lam_bar, self.lam_e, state.D, self.N, dt)


def select_measurement(candidates: Sequence[CandidateMeasurement], state: ErrorBoundState, dt: float) -> int:
    """Index of the candidate with the smallest ``R_new``; ties go to the lowest index."""
    if not candidates:
        raise EmptyCandidates("no candidate measurements")
    values = [c.bound(state, dt) for c in candidates]
    return int(np.argmin(values))


def write_bound_csv(path, steps: Sequence[BoundStep]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "R", "k", "F_min"])
        for s in steps:
            w.writerow([repr(s.t), repr(s.R), repr(s.k), repr(s.F_min)])
