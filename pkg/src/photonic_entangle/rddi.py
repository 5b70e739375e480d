"""Free-space resonant dipole-dipole coupling between two moving atoms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CODATA, AtomSpec, PhysicalConstants, Vector, as_vector, position_at


@dataclass(frozen=True)
class SeparationGeometry:
    """Separation vector pointing from atom A to atom B."""

    r_vec: Vector

    def __post_init__(self):
        object.__setattr__(self, "r_vec", as_vector(self.r_vec))
        if not self.distance > 0:
            raise ValueError("atoms at coincident positions: separation must be nonzero")

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.r_vec))

    @property
    def unit(self) -> Vector:
        return self.r_vec / self.distance

    @classmethod
    def between(cls, r_a, r_b) -> "SeparationGeometry":
        return cls(np.asarray(r_b, dtype=float) - np.asarray(r_a, dtype=float))


def j_coupling(
    dipole_a,
    dipole_b,
    dipole_mag: float,
    sep: SeparationGeometry,
    omega: float,
    consts: PhysicalConstants = CODATA,
) -> float:
    """Exchange rate J_AB in rad/s for two dipoles of common magnitude ``dipole_mag``.

    Retarded free-space dipole-dipole matrix element divided by hbar, with
    k = omega / c.
    """
    da = np.asarray(dipole_a, dtype=float)
    db = np.asarray(dipole_b, dtype=float)
    R = sep.distance
    u = sep.unit
    kR = omega / consts.c * R

    parallel = float(da @ db)
    projected = float(da @ u) * float(db @ u)
    near = (parallel - 3.0 * projected) * (math.cos(kR) + kR * math.sin(kR))
    far = (parallel - projected) * kR * kR * math.cos(kR)

    prefactor = dipole_mag**2 / (4.0 * math.pi * consts.epsilon0 * R**3 * consts.hbar)
    return prefactor * (near - far)


def inside_box(r, box_side: float | None) -> bool:
    if box_side is None:
        return True
    return bool(np.all(np.abs(r) <= box_side / 2))


def j_coupling_at_time(
    atom_a: AtomSpec,
    atom_b: AtomSpec,
    t: float,
    consts: PhysicalConstants = CODATA,
    box_side: float | None = None,
) -> float:
    """Quasi-static J_AB(t) on the instantaneous positions.

    With ``box_side`` set, the coupling is switched off whenever either atom
    is outside the centred cube of that side length.
    """
    r_a = position_at(atom_a.trajectory, t)
    r_b = position_at(atom_b.trajectory, t)
    if not (inside_box(r_a, box_side) and inside_box(r_b, box_side)):
        return 0.0
    sep = SeparationGeometry.between(r_a, r_b)
    mag = math.sqrt(atom_a.dipole_mag * atom_b.dipole_mag)
    return j_coupling(atom_a.dipole_dir, atom_b.dipole_dir, mag, sep, atom_a.omega, consts)
