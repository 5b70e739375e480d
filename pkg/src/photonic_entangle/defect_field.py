"""Localized defect mode: spatial profile, atom-mode coupling and its calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .geometry import AtomSpec, Vector, as_vector, position_at


@dataclass(frozen=True)
class DefectModeSpec:
    """Defect mode with profile exp(-|r - center|/radius) * sin(k_vec . r + phase).

    ``g0`` is the coupling scale in rad/s; ``omega0`` the mode angular frequency.
    """

    center: Vector
    radius: float
    phase: float
    k_vec: Vector
    polarization: Vector = field(default_factory=lambda: as_vector((1.0, 0.0, 0.0)))
    omega0: float = 2 * math.pi * 21.50651e9
    g0: float = 0.0

    def __post_init__(self):
        for name in ("center", "k_vec", "polarization"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        if self.radius <= 0:
            raise ValueError("defect radius must be positive")
        if abs(np.linalg.norm(self.polarization) - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        if self.g0 < 0:
            raise ValueError("g0 must be >= 0")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")


@dataclass(frozen=True)
class MicrocavityCalibration:
    """Reference microcavity: mode volume (m^3), vacuum Rabi frequency (rad/s), defect radius (m)."""

    v_cav: float
    rabi: float
    r_def: float

    def __post_init__(self):
        if min(self.v_cav, self.rabi, self.r_def) <= 0:
            raise ValueError("calibration values must be positive")


def mode_amplitude(r, mode: DefectModeSpec) -> float:
    r = np.asarray(r, dtype=float)
    envelope = math.exp(-float(np.linalg.norm(r - mode.center)) / mode.radius)
    return envelope * math.sin(float(mode.k_vec @ r) + mode.phase)


def coupling(atom: AtomSpec, mode: DefectModeSpec, r) -> float:
    projection = float(mode.polarization @ atom.dipole_dir)
    return mode.g0 * projection * mode_amplitude(r, mode)


def coupling_pulse(atom: AtomSpec, mode: DefectModeSpec, t: float) -> float:
    return coupling(atom, mode, position_at(atom.trajectory, t))


def effective_mode_volume(r_def: float) -> float:
    return 4.0 / 3.0 * math.pi * (2.0 * r_def) ** 3


def g0_from_microcavity(cal: MicrocavityCalibration) -> float:
    return math.sqrt(cal.v_cav / effective_mode_volume(cal.r_def)) * cal.rabi


def pulse_area(
    atom: AtomSpec,
    mode: DefectModeSpec,
    t0: float,
    t1: float,
    abs_tol: float = 1e-9,
) -> float:
    """Integral of the coupling pulse over [t0, t1] in radians.

    The interval is cut into pieces no longer than the fastest spatial
    feature of the profile (decay radius or half wavelength) divided by the
    atom's speed, and each piece is integrated adaptively.
    """
    if t1 < t0:
        raise ValueError("pulse_area requires t1 >= t0")
    if t1 == t0 or mode.g0 == 0 or float(mode.polarization @ atom.dipole_dir) == 0:
        return 0.0

    speed = atom.trajectory.speed
    k = float(np.linalg.norm(mode.k_vec))
    feature = mode.radius if k == 0 else min(mode.radius, math.pi / k)
    n_pieces = max(1, math.ceil((t1 - t0) * speed / feature))
    edges = np.linspace(t0, t1, n_pieces + 1)
    # the envelope has a kink where the atom passes closest to the mode centre
    traj = atom.trajectory
    t_kink = -float((traj.r0 - mode.center) @ traj.v) / speed**2
    if t0 < t_kink < t1:
        edges = np.union1d(edges, [t_kink])
        n_pieces = len(edges) - 1
    piece_tol = abs_tol / n_pieces

    def pulse(t):
        return coupling_pulse(atom, mode, t)

    total = math.fsum(
        integrate.quad(pulse, lo, hi, epsabs=piece_tol, epsrel=0.0, limit=200)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    )
    return total
