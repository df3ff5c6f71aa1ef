"""Closed-form intermediate-deflection beam model for one flexure.

The planar beam with tip loads (F_r transverse, F_z axial, M_y moment,
components in the beam root frame, positive F_z directed away from the
root) is solved through the constraint-model polynomial form

    [f; m] = (A + p B) [r_hat; theta]
    z_hat  = 1 + c_ax p + q^T C q - p q^T D q

with the dimensionless loads f = F_r L^2 / (E I), p = F_z L^2 / (E I),
m = M L / (E I) and fixed coefficient matrices A, B, C, D. Valid for
moderate tip angles (|theta| <= ~0.35 rad) and |p| <= ~1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BucklingError
from .params import RobotParams

A11, A12, A22 = 12.0, -6.0, 4.0
B11, B12, B22 = 1.2, -0.1, 0.13
C11, C12, C22 = -0.6, 0.05, -0.067
D11, D12, D22 = 1.0 / 700.0, -1.0 / 1400.0, 11.0 / 6300.0

# smaller-magnitude root of det(A + p B) = 0; the model's compressive limit
_DET_A = B11 * B22 - B12 * B12
_DET_B = A11 * B22 + A22 * B11 - 2.0 * A12 * B12
_DET_C = A11 * A22 - A12 * A12
P_CRITICAL = (-_DET_B + np.sqrt(_DET_B**2 - 4.0 * _DET_A * _DET_C)) / (2.0 * _DET_A)
_P_GUARD = 0.97 * P_CRITICAL


@dataclass
class BeamLoads:
    """Tip loads per joint in the beam root frame plus effective modulus."""

    f_r: np.ndarray      # transverse force (N)
    f_z: np.ndarray      # axial force (N), positive away from the root
    m_y: np.ndarray      # bending moment (N*mm)
    e_eff: np.ndarray    # effective modulus (GPa)


def effective_modulus(theta, params: RobotParams):
    """Phase-mixture modulus E_A*xi + E_M*(1 - xi) in GPa.

    Without a calibrated xi curve the material is treated as fully
    austenitic (xi = 1).
    """
    if params.xi_curve is None:
        return np.full_like(np.asarray(theta, dtype=float), params.austenite_modulus_gpa)
    xi = params.xi_curve(theta)
    return params.austenite_modulus_gpa * xi + params.martensite_modulus_gpa * (1.0 - xi)


def bcm_deflection_arrays(f_r, f_z, m_y, e_eff_gpa, params: RobotParams):
    """Vectorized constraint-model solve; no raising.

    Returns (r, z, theta, ok) where ``ok`` flags loads for which the 2x2
    system is safely away from the compressive singularity.
    """
    length = params.beam_length
    ei = 1e3 * np.asarray(e_eff_gpa, dtype=float) * params.second_moment
    l2_ei = length * length / ei
    p = np.asarray(f_z, dtype=float) * l2_ei
    f = np.asarray(f_r, dtype=float) * l2_ei
    m = np.asarray(m_y, dtype=float) * l2_ei / length

    m11 = A11 + B11 * p
    m12 = A12 + B12 * p
    m22 = A22 + B22 * p
    det = m11 * m22 - m12 * m12
    ok = (p > _P_GUARD) & (det > 1e-9)
    safe = np.where(ok, det, 1.0)

    r_hat = (m22 * f - m12 * m) / safe
    theta = (m11 * m - m12 * f) / safe
    quad_c = C11 * r_hat**2 + 2.0 * C12 * r_hat * theta + C22 * theta**2
    quad_d = D11 * r_hat**2 + 2.0 * D12 * r_hat * theta + D22 * theta**2
    z_hat = 1.0 + params.axial_compliance * p + quad_c - p * quad_d
    return r_hat * length, z_hat * length, theta, ok


def bcm_deflection(loads: BeamLoads, length: float, params: RobotParams):
    """Tip deflection (r, z, theta) of one flexure under tip loads.

    ``length`` must equal the configured flexure length. Raises
    BucklingError near the compressive singularity of the 2x2 system.
    """
    if not np.isclose(length, params.beam_length):
        params = RobotParams(**{**_param_dict(params), "beam_length": float(length)})
    r, z, theta, ok = bcm_deflection_arrays(loads.f_r, loads.f_z, loads.m_y,
                                            loads.e_eff, params)
    if not np.all(ok):
        raise BucklingError(
            "axial load within 3% of the buckling-critical compressive value; "
            "the deflection system is singular")
    return r, z, theta


def _param_dict(params: RobotParams) -> dict:
    import dataclasses
    return {f.name: getattr(params, f.name) for f in dataclasses.fields(params)}
