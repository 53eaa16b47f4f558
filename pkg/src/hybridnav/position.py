"""Third stage of the hierarchy: position from the velocity estimate plus position or range fixes.

The range update works on squared-range differences between consecutive
beacons. For a true position ``r`` and estimate ``r_hat``,

    (|r_hat - a_j|^2 - |r_hat - a_{j+1}|^2) - (|r - a_j|^2 - |r - a_{j+1}|^2)
        = 2 (a_{j+1} - a_j) . (r_hat - r)

so the residual vector is exactly ``2 J (r_hat - r)`` with ``J`` the
beacon-difference matrix. With ``K = k J^-1`` the error map is exactly
``(1 - k)``, at any error magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .attitude import GainCertificate, certify_attitude_gain
from .errors import SingularBeaconGeometry

# |det J| below this times the product of row norms counts as coplanar.
SINGULAR_REL_TOL = 1e-9


@dataclass(frozen=True)
class BeaconGeometry:
    """Beacon-difference matrix ``J`` (rows B-A, C-B, D-C) and its diagnostics."""

    J: NDArray
    det: float
    triple_product: float
    scale: float

    @property
    def relative_det(self) -> float:
        return abs(self.det) / self.scale if self.scale > 0 else 0.0

    @property
    def singular(self) -> bool:
        return not self.relative_det >= SINGULAR_REL_TOL


def beacon_difference_matrix(beacons: ArrayLike) -> BeaconGeometry:
    """Build ``J`` from a (4, 3) array of beacon positions A, B, C, D."""
    p = np.asarray(beacons, dtype=float)
    ab, bc, cd = p[1] - p[0], p[2] - p[1], p[3] - p[2]
    j = np.array([ab, bc, cd])
    triple = float(ab @ np.cross(bc, cd))
    scale = float(np.prod(np.linalg.norm(j, axis=1)))
    return BeaconGeometry(j, float(np.linalg.det(j)), triple, scale)


def range_gain(beacons: ArrayLike, k: float = 1.0) -> NDArray:
    """``K = k J^-1``.

    Raises
    ------
    SingularBeaconGeometry
        If the beacons are (numerically) coplanar.
    """
    geo = beacon_difference_matrix(beacons)
    if geo.singular:
        raise SingularBeaconGeometry(
            f"beacons coplanar: |det J| / prod|rows| = {geo.relative_det:.3e} < {SINGULAR_REL_TOL}"
        )
    return k * np.linalg.inv(geo.J)


def squared_range_residual(r_hat: ArrayLike, ranges: ArrayLike, beacons: ArrayLike) -> NDArray:
    """Residual vector ``(yh1^2 - yh2^2 - (y1^2 - y2^2), ...)`` for the three consecutive pairs."""
    y = np.asarray(ranges, dtype=float)
    if np.any(y < 0.0):
        raise ValueError("measured distances must be non-negative")
    p = np.asarray(beacons, dtype=float)
    yh2 = np.sum((p - np.asarray(r_hat, dtype=float)) ** 2, axis=1)
    y2 = y * y
    return (yh2[:-1] - yh2[1:]) - (y2[:-1] - y2[1:])


def position_continuous_field(v_hat: ArrayLike) -> NDArray:
    return np.asarray(v_hat, dtype=float)


def position_update_linear(r_minus: ArrayLike, r_meas: ArrayLike, gain: Union[float, NDArray]) -> NDArray:
    """``r+ = F r- + (I - F) r_meas``; rejects gains with ``lambda_max(F^T F) >= 1``."""
    certify_attitude_gain(gain).require("position gain")
    r_minus = np.asarray(r_minus, dtype=float)
    r_meas = np.asarray(r_meas, dtype=float)
    if np.ndim(gain) == 0:
        return gain * r_minus + (1.0 - gain) * r_meas
    f = np.asarray(gain, dtype=float)
    return f @ r_minus + (np.eye(3) - f) @ r_meas


def position_update_ranges(
    r_minus: ArrayLike,
    ranges: ArrayLike,
    beacons: ArrayLike,
    k: float = 2.0 / 3.0,
    K: Optional[NDArray] = None,
) -> NDArray:
    """``r+ = r- - 0.5 K residual(r-)`` with ``K = k J^-1`` unless ``K`` is given."""
    if K is None:
        K = range_gain(beacons, k)
    return np.asarray(r_minus, dtype=float) - 0.5 * K @ squared_range_residual(r_minus, ranges, beacons)


@dataclass(frozen=True)
class RangeGainCertificate:
    lambda_i: float
    product: float
    certified: bool


def certify_position_range_gain(k: float, lam_bar: float = 0.0, dt: float = 0.0) -> RangeGainCertificate:
    """Certify ``(1 - k)**2 * exp(lam_bar * dt) < 1``."""
    lam_i = (1.0 - k) ** 2
    prod = lam_i * exp(lam_bar * dt)
    return RangeGainCertificate(lam_i, prod, prod < 1.0)


def certify_position_gain(gain: Union[float, NDArray]) -> GainCertificate:
    return certify_attitude_gain(gain)
