"""Proprioception for cable-driven continuum robots from proximal-only
sensing: set cable lengths, input cable tensions, and a six-axis base wrench
in; estimated shape, 3-D contact force, and contact location out."""

from .beam import BeamLoads, bcm_deflection, effective_modulus
from .equilibrium import (ContactSpec, EquilibriumResult, beam_tip_loads,
                          cable_length_residual, solve_displacement_control,
                          solve_force_control)
from .errors import (BucklingError, ConfigError, ConvergenceError,
                     EstimationFailedError, InfeasibleDisplacementError,
                     OracleFailure, ProxisenseError, RecalibrationAborted,
                     ScenarioError)
from .friction import capstan_propagate, friction_sign_update
from .geometry import (CableGeometry, JointState, Pose, cable_attach_point,
                       cable_geometry, cable_wrap_angles,
                       chain_forward_kinematics, contact_pose,
                       total_cable_length)
from .params import (NoiseModel, RobotParams, XiCurve, default_params,
                     gf_to_n, n_to_gf, rect_segment_second_moment)
from .perception import (ContactEstimate, ProximalEstimator, ProximalFrame,
                         classify_contact_mode, decouple_contact_force,
                         estimate_contact, estimate_tip_force,
                         reciprocation_recalibrate)
from .simulator import (ContactEvent, GroundTruth, QuasiStaticPlant, Scenario,
                        SensorTrace, StaticScene, ode_shooting_deflection,
                        run_scenario, static_contact_scene,
                        synthesize_base_wrench)

__version__ = "0.1.0"
