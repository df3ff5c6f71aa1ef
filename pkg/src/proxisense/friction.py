"""Quasi-static cable friction: sign hysteresis and capstan propagation."""

from __future__ import annotations

import numpy as np

from .params import RobotParams

# hold-state tolerance on segment-length changes (mm)
LENGTH_TOL = 1e-6


def friction_sign_update(prev_sign, length_now, length_prev, tension,
                         params: RobotParams, length_tol: float = LENGTH_TOL):
    """Mobilized friction value for the next quasi-static step.

    Shortening segment -> +u, lengthening -> -u, unchanged (within
    ``length_tol``) -> previous value held, slack cable (zero tension) -> 0.
    Operates elementwise on arrays; ``tension`` broadcasts against the
    segment arrays.
    """
    prev_sign = np.asarray(prev_sign, dtype=float)
    l_now = np.asarray(length_now, dtype=float)
    l_prev = np.asarray(length_prev, dtype=float)
    u = params.friction_coeff
    out = np.where(l_now < l_prev - length_tol, u,
                   np.where(l_now > l_prev + length_tol, -u, prev_sign))
    out = np.where(np.asarray(tension, dtype=float) <= 0.0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def capstan_propagate(tension_in: float, wraps) -> float:
    """Tension after a sequence of frictional contacts.

    ``wraps`` is an iterable of (wrap_angle, sign) pairs; each contact
    multiplies the tension by exp(sign * angle), with the sign already
    carrying the friction coefficient.
    """
    if tension_in < 0.0:
        raise ValueError("tension must be >= 0")
    exponent = 0.0
    for angle, sign in wraps:
        exponent += sign * angle
    return tension_in * np.exp(exponent)


def chain_tension_exponents(phi_a, phi_b, signs):
    """Capstan exponent for the segment tension entering each joint.

    The cable crosses both contacts of every proximal joint and the guide
    exit of its own joint: e_i = s_i*|phi_A_i| + sum_{j<i} s_j*(|phi_A_j| +
    |phi_B_j|). Wrap angles enter as magnitudes; the slip direction is
    carried by the signs. Arrays are (..., N, C); the joint axis is -2.
    """
    full = signs * (np.abs(phi_a) + np.abs(phi_b))
    cum = np.cumsum(full, axis=-2)
    return cum - full + signs * np.abs(phi_a)


def chain_tensions(phi_a, phi_b, signs, input_tension):
    """Free-segment tension at each joint from the proximal input tension."""
    expo = chain_tension_exponents(phi_a, phi_b, signs)
    return np.asarray(input_tension, dtype=float)[..., None, :] * np.exp(expo)


def discrete_contact_balance(t_minus: float, t_plus: float, wrap_angle: float,
                             sign: float) -> float:
    """Residual of the discrete force balance at a single cable contact.

    The support force lies on the bisector of the two cable segments; the
    normal balance gives N = (T- + T+) * sin(angle/2) and the returned value
    is the tangential imbalance (T+ - T-) * cos(angle/2) - sign * N.
    Consistency check only: the capstan relation is its differential limit,
    so tensions related by exp(sign * angle) leave an O(angle^3 * T)
    residual.
    """
    half = 0.5 * wrap_angle
    normal = (t_minus + t_plus) * np.sin(half)
    return (t_plus - t_minus) * np.cos(half) - sign * normal
