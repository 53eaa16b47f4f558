"""Second stage of the hierarchy: velocity from ``A(attitude) gamma`` plus discrete information.

Three update forms are available: consecutive position fixes with the running
integral of the estimate, direct velocity fixes, and consecutive range fixes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kinematics as kin
from .attitude import certify_attitude_gain
from .errors import MissingAccumulator
from .position import range_gain, squared_range_residual


def velocity_continuous_field(attitude: ArrayLike, gamma: ArrayLike) -> NDArray:
    """``A(attitude) @ gamma``; ``attitude`` is Euler angles (3) or a quaternion (4)."""
    att = np.asarray(attitude, dtype=float)
    if att.size == 4:
        a = kin.dcm_from_quaternion(att / np.linalg.norm(att))
    else:
        a = kin.dcm_from_euler(att)
    return a @ np.asarray(gamma, dtype=float)


def velocity_update_from_positions(
    v_minus: ArrayLike, integral: Optional[ArrayLike], r_i: ArrayLike, r_ip1: ArrayLike, dt_i: float
) -> NDArray:
    """``v+ = v- - integral/dt + (r_{i+1} - r_i)/dt``.

    ``integral`` is the running integral of the velocity estimate over
    ``[t_i, t_{i+1}]``.
    """
    if integral is None:
        raise MissingAccumulator("no open position-fix interval")
    if not dt_i > 0.0:
        raise ValueError("dt_i must be positive")
    r_i = np.asarray(r_i, dtype=float)
    r_ip1 = np.asarray(r_ip1, dtype=float)
    return np.asarray(v_minus, dtype=float) - (np.asarray(integral) - (r_ip1 - r_i)) / dt_i


def velocity_update_direct(v_minus: ArrayLike, v_meas: ArrayLike, gain: Union[float, NDArray]) -> NDArray:
    """``v+ = F v- + (I - F) v_meas``; ``lambda_max(F^T F) < 1`` required."""
    certify_attitude_gain(gain).require("velocity gain")
    v_minus = np.asarray(v_minus, dtype=float)
    v_meas = np.asarray(v_meas, dtype=float)
    if np.ndim(gain) == 0:
        return gain * v_minus + (1.0 - gain) * v_meas
    f = np.asarray(gain, dtype=float)
    return f @ v_minus + (np.eye(3) - f) @ v_meas


@dataclass(frozen=True)
class RangeFix:
    t: float
    ranges: NDArray
    beacons: NDArray


def velocity_update_from_ranges(
    v_minus: ArrayLike,
    r_hat_plus_i: ArrayLike,
    fix_i: RangeFix,
    r_hat_minus_ip1: ArrayLike,
    fix_ip1: RangeFix,
    K_i: Optional[NDArray] = None,
    K_ip1: Optional[NDArray] = None,
) -> NDArray:
    """Velocity correction from two consecutive range fixes.

    ``v+ = v- - 1/(2 dt) * (K_{i+1} res(r_hat-_{i+1}) - K_i res(r_hat+_i))``
    with ``K = J^-1`` at each instant by default. ``r_hat_plus_i`` is the
    position estimate right after the update at ``t_i``; ``r_hat_minus_ip1``
    is the estimate just before the update at ``t_{i+1}``.
    """
    dt_i = fix_ip1.t - fix_i.t
    if not dt_i > 0.0:
        raise ValueError("range fixes must be strictly ordered in time")
    if K_i is None:
        K_i = range_gain(fix_i.beacons)
    if K_ip1 is None:
        K_ip1 = range_gain(fix_ip1.beacons)
    term_ip1 = K_ip1 @ squared_range_residual(r_hat_minus_ip1, fix_ip1.ranges, fix_ip1.beacons)
    term_i = K_i @ squared_range_residual(r_hat_plus_i, fix_i.ranges, fix_i.beacons)
    return np.asarray(v_minus, dtype=float) - (term_ip1 - term_i) / (2.0 * dt_i)


@dataclass
class VelocityObserverState:
    """Bookkeeping between position-bearing fixes.

    ``integral`` is the running integral of the velocity estimate since
    ``t_last_fix``; it is reset after every position- or range-based update.
    """

    v_hat: NDArray
    integral: Optional[NDArray] = None
    t_last_fix: Optional[float] = None
    r_fix_prev: Optional[NDArray] = None
    range_fix_prev: Optional[RangeFix] = None
    r_hat_plus_prev: Optional[NDArray] = None
    K_prev_term: Optional[NDArray] = field(default=None, repr=False)

    def _advance(self, t: float):
        if self.t_last_fix is not None and not t > self.t_last_fix:
            raise ValueError(f"fix at t = {t!r} does not follow t_last_fix = {self.t_last_fix!r}")
        self.t_last_fix = t
        self.integral = np.zeros(3)

    def apply_position_fix(self, t: float, r_meas: ArrayLike, integral: ArrayLike) -> Optional[NDArray]:
        """Update from a position fix; the first fix only opens the interval."""
        r_meas = np.asarray(r_meas, dtype=float)
        out = None
        if self.t_last_fix is not None:
            out = velocity_update_from_positions(
                self.v_hat, integral, self.r_fix_prev, r_meas, t - self.t_last_fix
            )
            self.v_hat = out
        self._advance(t)
        self.r_fix_prev = r_meas
        return out

    def apply_range_fix(
        self, fix: RangeFix, r_hat_minus: ArrayLike, r_hat_plus: ArrayLike
    ) -> Optional[NDArray]:
        """Update from a range fix. ``r_hat_minus``/``r_hat_plus`` bracket the position update at ``fix.t``."""
        out = None
        if self.range_fix_prev is not None:
            out = velocity_update_from_ranges(
                self.v_hat, self.r_hat_plus_prev, self.range_fix_prev, r_hat_minus, fix
            )
            self.v_hat = out
        self._advance(fix.t)
        self.range_fix_prev = fix
        self.r_hat_plus_prev = np.asarray(r_hat_plus, dtype=float)
        self.K_prev_term = range_gain(fix.beacons) @ squared_range_residual(r_hat_plus, fix.ranges, fix.beacons)
        return out
