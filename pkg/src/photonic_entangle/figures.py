"""Frozen configurations reproducing the reference figures."""

from __future__ import annotations

import copy

from .config import RunConfig

CRYSTAL = {"side_m": 0.2, "cell_m": 16.3e-3, "hole_angle_deg": 35.26}
TRANSITION_HZ = 21.50651e9
CALIBRATION = {"v_cav_m3": 11.5e-6, "rabi_hz": 43e3}

CENTRED_MODE = {
    "center_m": [0.0, 0.0, 0.0],
    "radius_m": 10e-3,
    "phase_rad": 0.0,
    "k_dir": [0.0, 0.0, 1.0],
    "polarization": [1.0, 0.0, 0.0],
    "calibration": CALIBRATION,
}
OFFSET_MODE = {**CENTRED_MODE, "center_m": [1e-3, -3e-3, 2e-3]}

RDDI_OFF = {"enabled": False, "interaction_box_m": None, "dipole_mag_over_e_m": 6.72e-7}
RDDI_FIG2 = {"enabled": True, "interaction_box_m": 0.02, "dipole_mag_over_e_m": 6.72e-7}

# Fig. 2 curves are labelled by the closest approach of the two atoms; with
# equal speeds the atoms share z(t), so R_min equals the x offset of atom A.
FIG2_RMIN_M = (0.05e-3, 0.1e-3, 0.3e-3)


def _atom(hole, speed, excited=False, x_offset=None):
    return {
        "label": hole,
        "hole": hole,
        "speed_mps": speed,
        "initially_excited": excited,
        "dipole_dir": [1.0, 0.0, 0.0],
        "x_offset_m": x_offset,
    }


def _config(atoms, mode, rddi, grid_points=2001):
    # deep copy so callers may edit the result without touching the shared blocks
    return copy.deepcopy({
        "schema_version": 1,
        "crystal": CRYSTAL,
        "transition_frequency_hz": TRANSITION_HZ,
        "atoms": atoms,
        "mode": mode,
        "rddi": rddi,
        "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12},
        "output": {"grid_points": grid_points, "formats": ["csv", "json"]},
    })


def fig2_config(r_min: float, speed: float = 200.0) -> dict:
    return _config([_atom("A", speed, True, r_min), _atom("B", speed)], None, RDDI_FIG2)


def fig4_config(v_b: float, x_offset_a: float | None = None) -> dict:
    return _config([_atom("A", 500.0, True, x_offset_a), _atom("B", v_b)], CENTRED_MODE, RDDI_OFF)


def fig6_config(v_b: float = 536.4, v_c: float = 527.4) -> dict:
    return _config(
        [_atom("A", 500.0, True), _atom("B", v_b), _atom("C", v_c)], OFFSET_MODE, RDDI_OFF
    )


# name -> {description, runs: {run name: raw config}} or {description, sweep: {base, vb, vc}}
FIGURES: dict[str, dict] = {
    "2": {
        "description": "RDDI only, v = 200 m/s, populations for R_min = 0.05, 0.1, 0.3 mm",
        "runs": {f"rmin_{r * 1e3:g}mm": fig2_config(r) for r in FIG2_RMIN_M},
    },
    "3": {
        "description": "single atom through a centred defect mode, v_A = 500 m/s",
        "runs": {"single": _config([_atom("A", 500.0, True)], CENTRED_MODE, RDDI_OFF)},
    },
    "4a": {
        "description": "two atoms, v_B = 500 m/s, atom A displaced by 0.3 mm",
        "runs": {"vb_500": fig4_config(500.0, 0.3e-3)},
    },
    "4b": {"description": "two atoms, v_B = 490 m/s", "runs": {"vb_490": fig4_config(490.0)}},
    "4c": {"description": "two atoms, v_B = 515 m/s", "runs": {"vb_515": fig4_config(515.0)}},
    "4d": {"description": "two atoms, v_B = 532.8 m/s", "runs": {"vb_532.8": fig4_config(532.8)}},
    "5": {
        "description": "final populations of three atoms versus (v_B, v_C), R0 = (1, -3, 2) mm",
        "sweep": {"base": fig6_config(), "vb": (480.0, 600.0, 61), "vc": (480.0, 600.0, 61)},
    },
    "6": {
        "description": "three atoms at v_B = 536.4, v_C = 527.4 m/s, R0 = (1, -3, 2) mm",
        "runs": {"w_point": fig6_config()},
    },
}


def figure_names() -> list[str]:
    return list(FIGURES)


def figure_runs(name: str) -> dict[str, RunConfig]:
    entry = FIGURES[name]
    return {run: RunConfig.from_dict(copy.deepcopy(raw)) for run, raw in entry.get("runs", {}).items()}
