"""Run configuration: JSON schema, parsing, and assembly into a SimulationProblem.

Units are part of every field name (``_m``, ``_mps``, ``_hz``, ``_rad_s`` ...).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .defect_field import DefectModeSpec, MicrocavityCalibration, g0_from_microcavity
from .dynamics import SimulationProblem
from .geometry import CODATA, AtomSpec, CrystalSpec, exit_time, standard_trajectories

SCHEMA_VERSION = 1
HOLES = ("A", "B", "C")

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_pos = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "photonic_entangle run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "crystal", "atoms"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "crystal": {
            "type": "object",
            "additionalProperties": False,
            "required": ["side_m", "cell_m", "hole_angle_deg"],
            "properties": {
                "side_m": _pos,
                "cell_m": _pos,
                "hole_angle_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 90},
            },
        },
        "transition_frequency_hz": _pos,
        "atoms": {
            "type": "array",
            "minItems": 1,
            "maxItems": 3,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["speed_mps"],
                "properties": {
                    "label": {"type": "string", "minLength": 1},
                    "hole": {"enum": list(HOLES)},
                    "speed_mps": _pos,
                    "initially_excited": {"type": "boolean"},
                    "dipole_dir": _vec3,
                    "x_offset_m": {"type": ["number", "null"]},
                },
            },
        },
        "mode": {
            "type": ["object", "null"],
            "if": {"type": "object"},
            "then": {"oneOf": [{"required": ["g0_rad_s"]}, {"required": ["calibration"]}]},
            "additionalProperties": False,
            "required": ["center_m", "radius_m", "phase_rad"],
            "properties": {
                "center_m": _vec3,
                "radius_m": _pos,
                "phase_rad": {"type": "number"},
                "k_dir": _vec3,
                "polarization": _vec3,
                "detuning_rad_s": {"type": "number"},
                "g0_rad_s": {"type": "number", "minimum": 0},
                "calibration": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["v_cav_m3"],
                    "properties": {
                        "v_cav_m3": _pos,
                        "rabi_hz": _pos,
                        "rabi_rad_s": _pos,
                    },
                    "oneOf": [{"required": ["rabi_hz"]}, {"required": ["rabi_rad_s"]}],
                },
            },
        },
        "rddi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "interaction_box_m": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "dipole_mag_over_e_m": {"type": "number", "minimum": 0},
            },
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"rel_tol": _pos, "abs_tol": _pos},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid_points": {"type": "integer", "minimum": 1},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
            },
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "transition_frequency_hz": 21.50651e9,
    "rddi": {"enabled": False, "interaction_box_m": None, "dipole_mag_over_e_m": 6.72e-7},
    "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12},
    "output": {"grid_points": 1001, "formats": ["csv", "json"]},
}
ATOM_DEFAULTS: dict[str, Any] = {"initially_excited": False, "dipole_dir": [1.0, 0.0, 0.0], "x_offset_m": None}
MODE_DEFAULTS: dict[str, Any] = {"k_dir": [0.0, 0.0, 1.0], "polarization": [1.0, 0.0, 0.0], "detuning_rad_s": 0.0}


class ConfigError(ValueError):
    pass


def _merged(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merged(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with defaults filled in; ``data`` is plain JSON."""

    data: dict = field(repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        data = _merged(DEFAULTS, raw)
        data["atoms"] = [_merged(ATOM_DEFAULTS, a) for a in data["atoms"]]
        for i, atom in enumerate(data["atoms"]):
            atom.setdefault("hole", HOLES[i])
            atom.setdefault("label", atom["hole"])
        if data.get("mode") is not None:
            data["mode"] = _merged(MODE_DEFAULTS, data["mode"])
        else:
            data["mode"] = None
        _check_semantics(data)
        return cls(data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(self.to_json())

    def with_speeds(self, speeds: dict[int, float]) -> "RunConfig":
        """Copy with atoms[idx] flying at the given speeds (no schema re-check needed)."""
        data = self.to_dict()
        for idx, v in speeds.items():
            if not v > 0:
                raise ConfigError(f"speed must be positive, got {v}")
            data["atoms"][idx]["speed_mps"] = float(v)
        return RunConfig(data)

    def with_x_offset(self, idx: int, offset_m: float) -> "RunConfig":
        data = self.to_dict()
        data["atoms"][idx]["x_offset_m"] = float(offset_m)
        return RunConfig(data)

    @property
    def n_atoms(self) -> int:
        return len(self.data["atoms"])


def _check_semantics(data: dict) -> None:
    atoms = data["atoms"]
    holes = [a["hole"] for a in atoms]
    if len(set(holes)) != len(holes):
        raise ConfigError("each atom needs its own hole")
    labels = [a["label"] for a in atoms]
    if len(set(labels)) != len(labels):
        raise ConfigError("atom labels must be unique")
    if sum(a["initially_excited"] for a in atoms) != 1:
        raise ConfigError("exactly one atom must be initially excited")
    for a in atoms:
        if not math.isclose(float(np.linalg.norm(a["dipole_dir"])), 1.0, abs_tol=1e-12):
            raise ConfigError(f"atom {a['label']}: dipole_dir must be a unit vector")
    mode = data["mode"]
    if mode is not None:
        if not math.isclose(float(np.linalg.norm(mode["polarization"])), 1.0, abs_tol=1e-12):
            raise ConfigError("mode polarization must be a unit vector")
        if not np.linalg.norm(mode["k_dir"]) > 0:
            raise ConfigError("mode k_dir must be nonzero")
    if mode is None and not data["rddi"]["enabled"]:
        raise ConfigError("no interaction enabled: give a mode or enable rddi")


def crystal_from_config(config: RunConfig) -> CrystalSpec:
    c = config.data["crystal"]
    return CrystalSpec.from_degrees(c["side_m"], c["cell_m"], c["hole_angle_deg"])


def resolve_g0(mode: dict) -> float:
    if "g0_rad_s" in mode:
        return float(mode["g0_rad_s"])
    cal = mode["calibration"]
    rabi = cal["rabi_rad_s"] if "rabi_rad_s" in cal else 2 * math.pi * cal["rabi_hz"]
    return g0_from_microcavity(MicrocavityCalibration(cal["v_cav_m3"], rabi, mode["radius_m"]))


def atoms_from_config(config: RunConfig) -> tuple[AtomSpec, ...]:
    data = config.data
    crystal = crystal_from_config(config)
    speeds = {h: 1.0 for h in HOLES}
    for a in data["atoms"]:
        speeds[a["hole"]] = a["speed_mps"]
    trajs = dict(zip(HOLES, standard_trajectories(crystal, speeds["A"], speeds["B"], speeds["C"])))
    omega = 2 * math.pi * data["transition_frequency_hz"]
    mu = data["rddi"]["dipole_mag_over_e_m"] * CODATA.e_charge
    atoms = []
    for a in data["atoms"]:
        traj = trajs[a["hole"]].shifted(dx=a["x_offset_m"] or 0.0)
        dipole = np.asarray(a["dipole_dir"], dtype=float)
        atoms.append(AtomSpec(a["label"], traj, dipole, mu, omega, a["initially_excited"]))
    return tuple(atoms)


def mode_from_config(config: RunConfig) -> DefectModeSpec | None:
    data = config.data
    mode = data["mode"]
    if mode is None:
        return None
    crystal = crystal_from_config(config)
    k_dir = np.asarray(mode["k_dir"], dtype=float)
    omega = 2 * math.pi * data["transition_frequency_hz"]
    return DefectModeSpec(
        center=np.asarray(mode["center_m"], dtype=float),
        radius=mode["radius_m"],
        phase=mode["phase_rad"],
        k_vec=crystal.k_mag * k_dir / np.linalg.norm(k_dir),
        polarization=np.asarray(mode["polarization"], dtype=float),
        omega0=omega - mode["detuning_rad_s"],
        g0=resolve_g0(mode),
    )


def build_problem(config: RunConfig, grid_points: int | None = None) -> SimulationProblem:
    """Assemble atoms, mode and integration window from a validated config.

    The window runs from injection (t = 0) until the last atom leaves
    through the top face; ``grid_points`` overrides the output grid size
    (1 means final state only).
    """
    data = config.data
    crystal = crystal_from_config(config)
    atoms = atoms_from_config(config)
    t_end = max(exit_time(a.trajectory, crystal) for a in atoms)
    n = grid_points if grid_points is not None else data["output"]["grid_points"]
    grid = (t_end,) if n == 1 else tuple(np.linspace(0.0, t_end, n))
    mode = data["mode"]
    rddi = data["rddi"]
    try:
        return SimulationProblem(
            atoms=atoms,
            mode=mode_from_config(config),
            rddi_enabled=rddi["enabled"],
            t_span=(0.0, t_end),
            detuning=0.0 if mode is None else mode["detuning_rad_s"],
            rel_tol=data["integrator"]["rel_tol"],
            abs_tol=data["integrator"]["abs_tol"],
            output_grid=grid,
            interaction_box=rddi["interaction_box_m"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
