"""First stage of the hierarchy: attitude from continuous turn rate and discrete fixes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kinematics as kin
from .errors import UncertifiedGain

COMMUTATOR_TOL = 1e-8

Gain = Union[float, NDArray]


@dataclass(frozen=True)
class GainCertificate:
    """``lambda_bar`` is the largest eigenvalue of ``F^T F`` (``k**2`` for a scalar)."""

    lambda_bar: float
    commutator_norm: float
    certified: bool

    def require(self, what: str = "gain") -> "GainCertificate":
        if not self.certified:
            raise UncertifiedGain(
                f"{what}: lambda_bar = {self.lambda_bar:.6g}, "
                f"commutator = {self.commutator_norm:.3g} (need lambda_bar < 1, commutator < {COMMUTATOR_TOL})"
            )
        return self


def max_eig_ftf(gain: Gain) -> float:
    """Largest eigenvalue of ``F^T F``; ``k**2`` for scalar gains."""
    if np.ndim(gain) == 0:
        return float(gain) ** 2
    f = np.asarray(gain, dtype=float)
    return float(np.linalg.eigvalsh(f.T @ f)[-1])


def certify_attitude_gain(gain: Gain, theta: Optional[ArrayLike] = None) -> GainCertificate:
    """Certify a discrete attitude gain.

    Scalar gains need ``k**2 < 1``. Matrix gains additionally must commute with
    the metric factor ``theta`` (Frobenius commutator below ``COMMUTATOR_TOL``);
    with ``theta=None`` the metric is taken as the identity.
    """
    lam = max_eig_ftf(gain)
    comm = 0.0
    if np.ndim(gain) != 0 and theta is not None:
        f = np.asarray(gain, dtype=float)
        th = np.asarray(theta, dtype=float)
        comm = float(np.linalg.norm(th @ f - f @ th))
    ok = lam < 1.0 and comm < COMMUTATOR_TOL
    return GainCertificate(lam, comm, ok)


def attitude_continuous_field(x_hat: ArrayLike, omega: ArrayLike) -> NDArray:
    """``H(x_hat)^-1 omega``; raises ``GimbalLock`` at the chart singularity."""
    return kin.euler_rates(x_hat, omega)


def attitude_discrete_update(
    x_minus: ArrayLike,
    x_meas: ArrayLike,
    gain: Gain,
    metric: str = "AH",
    theta: Optional[ArrayLike] = None,
) -> NDArray:
    """Blend ``x+ = F x- + (I - F) x_meas`` in the Euler chart.

    The measurement is first unwrapped to the representative nearest
    ``x_minus``. For a matrix gain, ``theta`` defaults to the metric factor
    evaluated at ``x_minus`` and the gain must commute with it.
    """
    x_minus = np.asarray(x_minus, dtype=float)
    x_meas = kin.unwrap_toward(x_minus, x_meas)
    if np.ndim(gain) == 0:
        certify_attitude_gain(gain).require("attitude gain")
        k = float(gain)
        return k * x_minus + (1.0 - k) * x_meas
    f = np.asarray(gain, dtype=float)
    if theta is None:
        theta = kin.metric_factor(x_minus, metric)
    certify_attitude_gain(f, theta).require("attitude gain")
    return f @ x_minus + (np.eye(3) - f) @ x_meas


def quaternion_continuous_field(q_hat: ArrayLike, omega: ArrayLike) -> NDArray:
    """``0.5 * Omega(omega) @ q_hat``; the estimate, not the truth, drives the right side."""
    return kin.quaternion_rates(q_hat, omega)


def align_sign(q_ref: ArrayLike, q: ArrayLike) -> NDArray:
    """Return ``q`` or ``-q``, whichever is on the same hemisphere as ``q_ref``."""
    q = np.asarray(q, dtype=float)
    return -q if float(np.dot(q_ref, q)) < 0.0 else q


def quaternion_discrete_update(
    q_minus: ArrayLike, q_meas: ArrayLike, gain: Gain, normalize: bool = True
) -> NDArray:
    """Blend ``q+ = F q- + (I - F) q_meas`` then renormalize.

    ``gain`` is a scalar or a 4x4 matrix with ``lambda_max(F^T F) < 1``.
    """
    q_minus = np.asarray(q_minus, dtype=float)
    q_meas = align_sign(q_minus, q_meas)
    certify_attitude_gain(gain).require("quaternion gain")
    if np.ndim(gain) == 0:
        k = float(gain)
        q = k * q_minus + (1.0 - k) * q_meas
    else:
        f = np.asarray(gain, dtype=float)
        q = f @ q_minus + (np.eye(4) - f) @ q_meas
    return kin.normalize_quaternion(q) if normalize else q
