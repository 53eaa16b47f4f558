"""Attitude parameterizations and the kinematic matrices of the strapdown system.

Conventions
-----------
Euler angles are stored as ``(psi, theta, phi)``. The direction cosine matrix
``A`` maps body-frame vectors to the inertial frame and factors as
``Rz(phi) @ Ry(theta) @ Rx(psi)``. ``H`` maps Euler-angle rates to body turn
rates, ``omega = H @ xdot``, so ``xdot = H^-1 @ omega``; it is singular at
``cos(theta) = 0``.

Quaternions are ``(q0, q1, q2, q3)`` with ``q0`` the scalar part and
``A(q)`` the usual Hamilton rotation matrix. Their rate matrix ``Omega(omega)``
is built so that ``qdot = 0.5 * Omega @ q`` reproduces the same ``A``
trajectory as the Euler chart for a body-frame ``omega``.
"""
from __future__ import annotations

from math import asin, atan2, cos, pi, sin, sqrt

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import GimbalLock, NonUnitQuaternion

GIMBAL_EPS = 1e-6
QUAT_NORM_TOL = 1e-6

METRIC_VARIANTS = ("AH", "H")


def euler_rate_matrix(x: ArrayLike) -> NDArray:
    """Return ``H(x)`` with ``omega = H @ xdot``."""
    psi, theta, _ = x
    cps, sps = cos(psi), sin(psi)
    cth, sth = cos(theta), sin(theta)
    return np.array(
        [
            [1.0, 0.0, -sth],
            [0.0, cps, cth * sps],
            [0.0, -sps, cth * cps],
        ]
    )


def euler_rate_matrix_inverse(x: ArrayLike, eps: float = GIMBAL_EPS) -> NDArray:
    """Closed-form ``H(x)^-1``.

    Raises
    ------
    GimbalLock
        If ``|cos(theta)| <= eps``.
    """
    psi, theta, _ = x
    cth = cos(theta)
    if not abs(cth) > eps:
        raise GimbalLock(f"|cos(theta)| = {abs(cth):.3e} <= {eps:.1e} at theta = {theta!r}")
    cps, sps = cos(psi), sin(psi)
    tth = sin(theta) / cth
    return np.array(
        [
            [1.0, sps * tth, cps * tth],
            [0.0, cps, -sps],
            [0.0, sps / cth, cps / cth],
        ]
    )


def require_in_chart(x: ArrayLike, eps: float = GIMBAL_EPS) -> None:
    """Raise ``GimbalLock`` unless ``cos(theta) > eps``, i.e. ``|theta| < pi/2`` with margin.

    Signed on purpose: a trajectory that steps across ``theta = pi/2`` has left
    the chart even though ``H^-1`` is finite on the far side.
    """
    cth = cos(x[1])
    if not cth > eps:
        raise GimbalLock(f"theta = {x[1]!r} left the Euler chart (cos(theta) = {cth:.3e})")


def euler_rates(x: ArrayLike, omega: ArrayLike, eps: float = GIMBAL_EPS) -> NDArray:
    """``H(x)^-1 @ omega`` without forming the matrix."""
    psi, theta, _ = x
    w1, w2, w3 = omega
    cth = cos(theta)
    if not abs(cth) > eps:
        raise GimbalLock(f"|cos(theta)| = {abs(cth):.3e} <= {eps:.1e} at theta = {theta!r}")
    cps, sps = cos(psi), sin(psi)
    s = sps * w2 + cps * w3
    return np.array([w1 + s * sin(theta) / cth, cps * w2 - sps * w3, s / cth])


def dcm_from_euler(x: ArrayLike) -> NDArray:
    psi, theta, phi = x
    cps, sps = cos(psi), sin(psi)
    cth, sth = cos(theta), sin(theta)
    cph, sph = cos(phi), sin(phi)
    return np.array(
        [
            [cth * cph, sps * sth * cph - cps * sph, cps * sth * cph + sps * sph],
            [cth * sph, sps * sth * sph + cps * cph, cps * sth * sph - sps * cph],
            [-sth, cth * sps, cth * cps],
        ]
    )


def dcm_from_quaternion(q: ArrayLike, tol: float = QUAT_NORM_TOL) -> NDArray:
    """Rotation matrix of a unit quaternion.

    Raises
    ------
    NonUnitQuaternion
        If ``| |q| - 1 | > tol``.
    """
    q0, q1, q2, q3 = q
    n2 = q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3
    if not abs(sqrt(n2) - 1.0) <= tol:
        raise NonUnitQuaternion(f"|q| = {sqrt(n2)!r}")
    return np.array(
        [
            [q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3, 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2)],
            [2 * (q1 * q2 + q0 * q3), q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3, 2 * (q2 * q3 - q0 * q1)],
            [2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3],
        ]
    )


def quaternion_rate_matrix(omega: ArrayLike) -> NDArray:
    """Skew-symmetric ``Omega`` such that ``qdot = 0.5 * Omega @ q`` for body rate ``omega``.

    Equivalent to ``q (x) (0, omega)`` in Hamilton product form.
    """
    w1, w2, w3 = omega
    return np.array(
        [
            [0.0, -w1, -w2, -w3],
            [w1, 0.0, w3, -w2],
            [w2, -w3, 0.0, w1],
            [w3, w2, -w1, 0.0],
        ]
    )


def quaternion_rates(q: ArrayLike, omega: ArrayLike) -> NDArray:
    """``0.5 * Omega(omega) @ q``."""
    q0, q1, q2, q3 = q
    w1, w2, w3 = omega
    return 0.5 * np.array(
        [
            -w1 * q1 - w2 * q2 - w3 * q3,
            w1 * q0 + w3 * q2 - w2 * q3,
            w2 * q0 - w3 * q1 + w1 * q3,
            w3 * q0 + w2 * q1 - w1 * q2,
        ]
    )


def metric_factor(x: ArrayLike, variant: str = "AH") -> NDArray:
    """Contraction metric factor ``Theta``: ``A(x) @ H(x)`` or ``H(x)``."""
    if variant == "AH":
        return dcm_from_euler(x) @ euler_rate_matrix(x)
    if variant == "H":
        return euler_rate_matrix(x)
    raise ValueError(f"unknown metric variant {variant!r}; expected one of {METRIC_VARIANTS}")


def normalize_quaternion(q: ArrayLike) -> NDArray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not n > 0.0:
        raise NonUnitQuaternion("cannot normalize a zero quaternion")
    return q / n


def euler_to_quaternion(x: ArrayLike) -> NDArray:
    """Unit quaternion with ``A(q) == A(x)``, canonicalized to ``q0 >= 0``."""
    psi, theta, phi = x
    c1, s1 = cos(psi / 2), sin(psi / 2)
    c2, s2 = cos(theta / 2), sin(theta / 2)
    c3, s3 = cos(phi / 2), sin(phi / 2)
    q = np.array(
        [
            c1 * c2 * c3 + s1 * s2 * s3,
            s1 * c2 * c3 - c1 * s2 * s3,
            c1 * s2 * c3 + s1 * c2 * s3,
            c1 * c2 * s3 - s1 * s2 * c3,
        ]
    )
    if q[0] < 0.0:
        q = -q
    return q


def euler_from_dcm(a: NDArray, eps: float = GIMBAL_EPS) -> NDArray:
    """Principal-branch Euler angles (``|theta| < pi/2``) of a rotation matrix."""
    s = -a[2, 0]
    s = min(1.0, max(-1.0, s))
    if not sqrt(max(0.0, 1.0 - s * s)) > eps:
        raise GimbalLock("rotation lies at the Euler-chart singularity")
    theta = asin(s)
    psi = atan2(a[2, 1], a[2, 2])
    phi = atan2(a[1, 0], a[0, 0])
    return np.array([psi, theta, phi])


def quaternion_to_euler(q: ArrayLike, eps: float = GIMBAL_EPS) -> NDArray:
    # normalize first so slightly-off quaternions from integration still convert
    return euler_from_dcm(dcm_from_quaternion(normalize_quaternion(q)), eps)


def wrap_angle(a):
    """Wrap angle(s) to ``[-pi, pi)``."""
    return (np.asarray(a, dtype=float) + pi) % (2 * pi) - pi


def unwrap_toward(reference: ArrayLike, angles: ArrayLike) -> NDArray:
    """Shift each angle by a multiple of 2*pi to lie nearest ``reference``."""
    reference = np.asarray(reference, dtype=float)
    return reference + wrap_angle(np.asarray(angles, dtype=float) - reference)


def rotation_angle_between(a1: NDArray, a2: NDArray) -> float:
    """Geodesic angle of ``a1 @ a2.T``, i.e. the attitude error in radians."""
    r = a1 @ a2.T
    c = 0.5 * (np.trace(r) - 1.0)
    # acos is ill-conditioned near 0; use the skew part for the sine
    s = 0.5 * np.linalg.norm([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return atan2(s, c)
