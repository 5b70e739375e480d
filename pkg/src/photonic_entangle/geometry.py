"""Crystal geometry and straight-line atom trajectories.

The origin sits at the centre of the cubic crystal. All atoms are injected
through the bottom face (z = -L/2) at t = 0 and move along the axes of the
drilled holes, which are tilted by the hole angle from the vertical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

Vector = np.ndarray


def as_vector(values: Sequence[float]) -> Vector:
    vec = np.asarray(values, dtype=float).reshape(3)
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants (CODATA 2018). Override only in tests."""

    hbar: float = 1.054571817e-34
    epsilon0: float = 8.8541878128e-12
    c: float = 299792458.0
    e_charge: float = 1.602176634e-19

    def __post_init__(self):
        for name in ("hbar", "epsilon0", "c", "e_charge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class CrystalSpec:
    """Cube of side ``L`` built from cells of side ``a``; holes tilted by ``theta`` (rad)."""

    L: float
    a: float
    theta: float

    def __post_init__(self):
        if self.L <= 0 or self.a <= 0:
            raise ValueError("crystal side and cell size must be positive")
        if not 0 < self.theta < math.pi / 2:
            raise ValueError("hole angle must lie in (0, pi/2)")

    @property
    def k_mag(self) -> float:
        return math.pi / self.a

    @classmethod
    def from_degrees(cls, L: float, a: float, theta_deg: float) -> "CrystalSpec":
        return cls(L=L, a=a, theta=math.radians(theta_deg))


@dataclass(frozen=True)
class Trajectory:
    r0: Vector
    v: Vector

    def __post_init__(self):
        object.__setattr__(self, "r0", as_vector(self.r0))
        object.__setattr__(self, "v", as_vector(self.v))
        if not np.linalg.norm(self.v) > 0:
            raise ValueError("trajectory velocity must be nonzero")

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))

    def shifted(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0) -> "Trajectory":
        return Trajectory(self.r0 + np.array([dx, dy, dz]), self.v)


@dataclass(frozen=True)
class AtomSpec:
    """A flying two-level atom.

    ``dipole_dir`` is the unit direction of the transition dipole,
    ``dipole_mag`` its magnitude in C*m and ``omega`` the transition
    angular frequency.
    """

    label: str
    trajectory: Trajectory
    dipole_dir: Vector = field(default_factory=lambda: as_vector((1.0, 0.0, 0.0)))
    dipole_mag: float = 0.0
    omega: float = 2 * math.pi * 21.50651e9
    initially_excited: bool = False

    def __post_init__(self):
        d = as_vector(self.dipole_dir)
        object.__setattr__(self, "dipole_dir", d)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError(f"atom {self.label}: dipole_dir must be a unit vector")
        if self.dipole_mag < 0:
            raise ValueError(f"atom {self.label}: dipole_mag must be >= 0")
        if self.omega <= 0:
            raise ValueError(f"atom {self.label}: omega must be positive")


def position_at(traj: Trajectory, t: float) -> Vector:
    return traj.r0 + traj.v * t


def standard_trajectories(
    crystal: CrystalSpec,
    v_A: float,
    v_B: float,
    v_C: float,
    x_offset_A: float = 0.0,
) -> tuple[Trajectory, Trajectory, Trajectory]:
    """Trajectories along the three hole axes.

    Each axis passes through the crystal centre; ``x_offset_A`` displaces
    atom A's axis parallel to itself so that A and B need not collide.
    """
    if min(v_A, v_B, v_C) <= 0:
        raise ValueError("speeds must be positive")
    L, th = crystal.L, crystal.theta
    tan, sin, cos = math.tan(th), math.sin(th), math.cos(th)
    s3 = math.sqrt(3.0)

    traj_a = Trajectory(
        L / 4 * np.array([tan, -s3 * tan, -2.0]) + np.array([x_offset_A, 0.0, 0.0]),
        v_A / 2 * np.array([-sin, s3 * sin, 2 * cos]),
    )
    traj_b = Trajectory(
        L / 4 * np.array([tan, s3 * tan, -2.0]),
        v_B / 2 * np.array([-sin, -s3 * sin, 2 * cos]),
    )
    traj_c = Trajectory(
        L / 2 * np.array([-tan, 0.0, -1.0]),
        v_C * np.array([sin, 0.0, cos]),
    )
    return traj_a, traj_b, traj_c


def exit_time(traj: Trajectory, crystal: CrystalSpec) -> float:
    """Time at which the atom crosses the top face z = +L/2."""
    vz = traj.v[2]
    if vz <= 0:
        raise ValueError("atom never reaches the top face (v_z <= 0)")
    return float((crystal.L / 2 - traj.r0[2]) / vz)


def mid_plane_time(traj: Trajectory) -> float:
    """Time at which the atom crosses the horizontal mid-plane z = 0."""
    return float(-traj.r0[2] / traj.v[2])


def sphere_window(traj: Trajectory, center: Vector, radius: float) -> tuple[float, float] | None:
    """Interval of t for which |position_at(t) - center| <= radius, or None."""
    d = traj.r0 - center
    vv = float(traj.v @ traj.v)
    b = float(d @ traj.v)
    c = float(d @ d) - radius * radius
    disc = b * b - vv * c
    if disc <= 0:
        return None
    root = math.sqrt(disc)
    return (-b - root) / vv, (-b + root) / vv


def box_window(traj: Trajectory, half_side: float) -> tuple[float, float] | None:
    """Interval of t for which the atom is inside the centred cube of half side ``half_side``."""
    lo, hi = -math.inf, math.inf
    for r, v in zip(traj.r0, traj.v):
        if v == 0:
            if abs(r) > half_side:
                return None
            continue
        t1, t2 = (-half_side - r) / v, (half_side - r) / v
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    if lo >= hi:
        return None
    return lo, hi


def closest_approach(ta: Trajectory, tb: Trajectory) -> tuple[float, float]:
    """(time, distance) of closest approach between two straight trajectories."""
    dr = tb.r0 - ta.r0
    dv = tb.v - ta.v
    dv2 = float(dv @ dv)
    t = 0.0 if dv2 == 0 else -float(dr @ dv) / dv2
    return t, float(np.linalg.norm(dr + dv * t))
