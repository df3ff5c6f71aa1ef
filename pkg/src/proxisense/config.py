"""Robot configuration and scenario files (JSON with unit-suffixed keys).

Unknown keys are rejected everywhere, every quantity carries its unit in
the key name, and floats are printed in shortest round-trip form so
parse-print round trips are lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ScenarioError
from .params import NoiseModel, RobotParams, XiCurve
from .simulator import ContactEvent, Scenario

# config key -> RobotParams field
_ROBOT_KEYS = {
    "outer_diameter_mm": "outer_diameter",
    "inner_diameter_mm": "inner_diameter",
    "cable_pitch_diameter_mm": "cable_pitch_diameter",
    "beam_width_mm": "beam_width",
    "notch_height_mm": "notch_height",
    "beam_length_mm": "beam_length",
    "channel_length_mm": "channel_length",
    "joint_count": "joint_count",
    "austenite_modulus_gpa": "austenite_modulus_gpa",
    "martensite_modulus_gpa": "martensite_modulus_gpa",
    "friction_coeff": "friction_coeff",
    "second_moment_mm4": "second_moment",
    "cable_axial_stiffness_n": "cable_axial_stiffness",
    "unloaded_cable_length_mm": "unloaded_cable_length",
    "cable_count": "cable_count",
    "axial_compliance": "axial_compliance",
}
_INT_KEYS = {"joint_count", "cable_count"}
_NOISE_KEYS = {"force_n", "torque_nmm", "tension_n"}


@dataclass(frozen=True)
class RobotConfig:
    params: RobotParams
    noise: NoiseModel | None = None


def _number(section: str, key: str, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def config_from_dict(doc: dict) -> RobotConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - {"robot", "xi_curve", "noise"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    robot = doc.get("robot")
    if not isinstance(robot, dict):
        raise ConfigError("config needs a 'robot' section")
    unknown = set(robot) - set(_ROBOT_KEYS)
    if unknown:
        raise ConfigError(f"unknown robot key(s): {', '.join(sorted(unknown))}")
    missing = set(_ROBOT_KEYS) - set(robot)
    if missing:
        raise ConfigError(f"missing robot key(s): {', '.join(sorted(missing))}")

    fields = {}
    for key, field in _ROBOT_KEYS.items():
        fields[field] = _number("robot", key, robot[key], integer=key in _INT_KEYS)

    xi = doc.get("xi_curve")
    if xi is not None:
        if not isinstance(xi, dict) or set(xi) != {"theta_rad", "xi"}:
            raise ConfigError("xi_curve needs exactly the keys theta_rad and xi")
        try:
            fields["xi_curve"] = XiCurve(theta=np.asarray(xi["theta_rad"], dtype=float),
                                         xi=np.asarray(xi["xi"], dtype=float))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"xi_curve: {exc}") from exc

    try:
        params = RobotParams(**fields)
    except ValueError as exc:
        raise ConfigError(f"robot: {exc}") from exc

    noise = None
    block = doc.get("noise")
    if block is not None:
        if not isinstance(block, dict):
            raise ConfigError("noise section must be an object")
        unknown = set(block) - _NOISE_KEYS
        if unknown:
            raise ConfigError(f"unknown noise key(s): {', '.join(sorted(unknown))}")
        values = {k: _number("noise", k, v) for k, v in block.items()}
        try:
            noise = NoiseModel(**values)
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc
    return RobotConfig(params=params, noise=noise)


def config_to_dict(config: RobotConfig) -> dict:
    p = config.params
    doc = {"robot": {key: getattr(p, field) for key, field in _ROBOT_KEYS.items()}}
    if p.xi_curve is not None:
        doc["xi_curve"] = {"theta_rad": p.xi_curve.theta.tolist(),
                           "xi": p.xi_curve.xi.tolist()}
    if config.noise is not None:
        doc["noise"] = {"force_n": config.noise.force_n,
                        "torque_nmm": config.noise.torque_nmm,
                        "tension_n": config.noise.tension_n}
    return doc


def loads_config(text: str) -> RobotConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def dumps_config(config: RobotConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"


def load_config(path) -> RobotConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return loads_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(config: RobotConfig, path) -> None:
    Path(path).write_text(dumps_config(config))


def default_config() -> RobotConfig:
    """The bundled planar two-cable robot with sensor-resolution noise."""
    text = resources.files("proxisense").joinpath("configs/planar_ncr.json").read_text()
    return loads_config(text)


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"duration_s", "sample_rate_hz", "seed", "actuation",
                  "contacts", "noise"}
_EVENT_KEYS = {"start_s", "end_s", "location", "force_gf", "mass_gf"}


def _event_from_dict(idx: int, doc: dict) -> ContactEvent:
    if not isinstance(doc, dict):
        raise ScenarioError(f"contacts[{idx}] must be an object")
    unknown = set(doc) - _EVENT_KEYS
    if unknown:
        raise ScenarioError(f"contacts[{idx}]: unknown key(s) {', '.join(sorted(unknown))}")
    for key in ("start_s", "end_s", "location"):
        if key not in doc:
            raise ScenarioError(f"contacts[{idx}]: missing {key}")
    location = doc["location"]
    if isinstance(location, str):
        if location != "tip":
            raise ScenarioError(f"contacts[{idx}]: location must be a number (mm) or 'tip'")
    else:
        location = _number(f"contacts[{idx}]", "location", location)
    force = doc.get("force_gf")
    if force is not None:
        if not isinstance(force, (list, tuple)) or len(force) != 3:
            raise ScenarioError(f"contacts[{idx}]: force_gf must be a 3-vector")
        force = tuple(_number(f"contacts[{idx}]", "force_gf", v) for v in force)
    mass = doc.get("mass_gf")
    if mass is not None:
        mass = _number(f"contacts[{idx}]", "mass_gf", mass)
    try:
        return ContactEvent(start_s=_number(f"contacts[{idx}]", "start_s", doc["start_s"]),
                            end_s=_number(f"contacts[{idx}]", "end_s", doc["end_s"]),
                            location_mm=location, force_gf=force, mass_gf=mass)
    except ScenarioError as exc:
        raise ScenarioError(f"contacts[{idx}]: {exc}") from exc


def scenario_from_dict(doc: dict, default_noise: NoiseModel | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
    for key in ("duration_s", "sample_rate_hz", "actuation"):
        if key not in doc:
            raise ScenarioError(f"scenario missing {key}")

    act = doc["actuation"]
    if not isinstance(act, dict):
        raise ScenarioError("actuation must be an object")
    mode = act.get("mode", "delta")
    cables = sorted(k for k in act if k != "mode")
    expected = [f"cable_{i + 1}" for i in range(len(cables))]
    if cables != expected or not cables:
        raise ScenarioError("actuation needs keys cable_1, cable_2, ... (plus optional mode)")
    knots = []
    for name in expected:
        table = act[name]
        if (not isinstance(table, list) or not table
                or any(not isinstance(kn, list) or len(kn) != 2 for kn in table)):
            raise ScenarioError(f"actuation.{name} must be a list of [t_s, length_mm] pairs")
        knots.append(tuple((_number(name, "t_s", kn[0]), _number(name, "mm", kn[1]))
                           for kn in table))

    noise = doc.get("noise")
    if noise == "resolution":
        noise = default_noise if default_noise is not None else NoiseModel()
    elif noise is not None:
        if not isinstance(noise, dict):
            raise ScenarioError("noise must be an object or the string 'resolution'")
        unknown = set(noise) - _NOISE_KEYS
        if unknown:
            raise ScenarioError(f"unknown noise key(s): {', '.join(sorted(unknown))}")
        noise = NoiseModel(**{k: _number("noise", k, v) for k, v in noise.items()})

    events = tuple(_event_from_dict(i, ev) for i, ev in enumerate(doc.get("contacts", [])))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("seed must be an integer")
    return Scenario(duration_s=_number("scenario", "duration_s", doc["duration_s"]),
                    sample_rate_hz=_number("scenario", "sample_rate_hz", doc["sample_rate_hz"]),
                    actuation=tuple(knots), contacts=events, noise=noise,
                    seed=seed, actuation_mode=mode)


def load_scenario(path, default_noise: NoiseModel | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return scenario_from_dict(doc, default_noise)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
