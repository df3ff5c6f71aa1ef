"""Robot parameter set, material curves, and sensor noise description.

Internal unit system: N, mm, rad, N*mm. Moduli are carried in GPa as
configured and converted to N/mm^2 (1 GPa = 1000 N/mm^2) where stiffness
products are formed. Forces are converted to grams-force only at reporting
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# N per gram-force and per pound-force
N_PER_GF = 9.80665e-3
N_PER_LB = 4.4482216152605

# Quoted sensor resolutions, used as default noise standard deviations.
FORCE_RESOLUTION_N = 1.0 / 320.0
TORQUE_RESOLUTION_NMM = 1.0 / 64.0
TENSION_RESOLUTION_N = N_PER_LB / 100.0


def gf_to_n(value):
    return np.asarray(value, dtype=float) * N_PER_GF


def n_to_gf(value):
    return np.asarray(value, dtype=float) / N_PER_GF


def rect_segment_second_moment(beam_width: float, outer_diameter: float,
                               inner_diameter: float) -> float:
    """Rectangular approximation of the notched-spine cross section (mm^4).

    The remaining spine is treated as a rectangle of width ``beam_width``
    lying in the bending plane and wall thickness (D_o - D_i)/2 out of it,
    bending across the width: I = t * w^3 / 12.
    """
    t = 0.5 * (outer_diameter - inner_diameter)
    if t <= 0.0 or beam_width <= 0.0:
        raise ValueError("wall thickness and beam width must be positive")
    return t * beam_width**3 / 12.0


@dataclass(frozen=True)
class XiCurve:
    """Monotone piecewise-linear austenite-fraction lookup xi(|theta|).

    User supplied calibration data; values must lie in [0, 1]. Outside the
    tabulated range the end values are held.
    """

    theta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if theta.ndim != 1 or theta.shape != xi.shape or theta.size < 2:
            raise ValueError("xi curve needs matching 1-d theta/xi tables with >= 2 knots")
        if np.any(np.diff(theta) <= 0):
            raise ValueError("xi curve theta knots must be strictly increasing")
        if np.any(xi < 0.0) or np.any(xi > 1.0):
            raise ValueError("xi values must lie in [0, 1]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "xi", xi)

    def __call__(self, theta):
        return np.interp(np.abs(theta), self.theta, self.xi)

    def __eq__(self, other):
        if not isinstance(other, XiCurve):
            return NotImplemented
        return np.array_equal(self.theta, other.theta) and np.array_equal(self.xi, other.xi)


@dataclass(frozen=True)
class NoiseModel:
    """Per-channel zero-mean Gaussian noise standard deviations."""

    force_n: float = FORCE_RESOLUTION_N
    torque_nmm: float = TORQUE_RESOLUTION_NMM
    tension_n: float = TENSION_RESOLUTION_N

    def __post_init__(self):
        for name in ("force_n", "torque_nmm", "tension_n"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"noise {name} must be >= 0")


@dataclass(frozen=True)
class RobotParams:
    """Geometry, stiffness, and friction constants of the notched joint chain.

    Lengths in mm, moduli in GPa, stiffness in N, forces in N. ``beam_length``
    is the flexure, ``channel_length`` the rigid cable channel preceding it
    within each joint.
    """

    outer_diameter: float = 3.5
    inner_diameter: float = 3.2
    cable_pitch_diameter: float = 2.6
    beam_width: float = 0.4
    notch_height: float = 2.5
    beam_length: float = 2.1
    channel_length: float = 0.9
    joint_count: int = 7
    austenite_modulus_gpa: float = 47.05
    martensite_modulus_gpa: float = 0.08
    friction_coeff: float = 0.33
    second_moment: float = field(default_factory=lambda: rect_segment_second_moment(0.4, 3.5, 3.2))
    cable_axial_stiffness: float = 11500.0
    unloaded_cable_length: float = 100.0
    cable_count: int = 2
    axial_compliance: float = 0.0
    xi_curve: XiCurve | None = None

    def __post_init__(self):
        if not self.inner_diameter < self.outer_diameter:
            raise ValueError("inner_diameter must be smaller than outer_diameter")
        if not 0.0 < self.cable_pitch_diameter < self.inner_diameter:
            raise ValueError("cable_pitch_diameter must lie in (0, inner_diameter)")
        if self.beam_length <= 0.0:
            raise ValueError("beam_length must be positive")
        if self.channel_length < 0.0:
            raise ValueError("channel_length must be >= 0")
        if self.joint_count < 1:
            raise ValueError("joint_count must be >= 1")
        if not 0.0 < self.martensite_modulus_gpa <= self.austenite_modulus_gpa:
            raise ValueError("moduli must satisfy 0 < E_M <= E_A")
        if self.friction_coeff < 0.0:
            raise ValueError("friction_coeff must be >= 0")
        if self.second_moment <= 0.0:
            raise ValueError("second_moment must be positive")
        if self.cable_axial_stiffness <= 0.0:
            raise ValueError("cable_axial_stiffness must be positive")
        if self.unloaded_cable_length <= 0.0:
            raise ValueError("unloaded_cable_length must be positive")
        if self.cable_count != 2:
            raise ValueError("only the planar antagonistic pair (cable_count = 2) is supported")
        if self.axial_compliance < 0.0:
            raise ValueError("axial_compliance must be >= 0")

    # -- derived quantities -------------------------------------------------

    @property
    def pitch_radius(self) -> float:
        return 0.5 * self.cable_pitch_diameter

    @property
    def joint_pitch(self) -> float:
        """Arc length contributed by one joint: channel plus flexure (mm)."""
        return self.channel_length + self.beam_length

    @property
    def backbone_length(self) -> float:
        return self.joint_count * self.joint_pitch

    @property
    def austenite_modulus_nmm2(self) -> float:
        return 1e3 * self.austenite_modulus_gpa

    @property
    def martensite_modulus_nmm2(self) -> float:
        return 1e3 * self.martensite_modulus_gpa

    @property
    def bending_stiffness_nmm2(self) -> float:
        """Nominal (austenite) E*I in N*mm^2."""
        return self.austenite_modulus_nmm2 * self.second_moment

    def cable_elongation(self, tension):
        """Elastic cable elongation F * L_os / k_cable (mm)."""
        return np.asarray(tension, dtype=float) * self.unloaded_cable_length / self.cable_axial_stiffness


def default_params(**overrides) -> RobotParams:
    """The shipped planar two-cable notched robot parameter set."""
    return RobotParams(**overrides)
