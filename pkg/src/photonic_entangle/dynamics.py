"""Single-excitation dynamics of up to three atoms, a defect mode and RDDI.

The state lives in the basis {|e_j, rest g, 0>} + {|all g, 1>}. Equations
are written in the interaction picture rotating at the mode frequency, so
only the couplings (and an optional detuning phase) remain:

    i da_j/dt  = G_j(t) exp(+i D t) gamma + sum_{l != j} J_jl(t) a_l
    i dgamma/dt = sum_j G_j(t) exp(-i D t) a_j
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .defect_field import DefectModeSpec, pulse_area
from .geometry import (
    CODATA,
    AtomSpec,
    PhysicalConstants,
    box_window,
    closest_approach,
    sphere_window,
)

log = logging.getLogger(__name__)

NORM_ABORT = 1e-6
NORM_FINAL = 1e-8
# integration step ceilings relative to the fastest coefficient feature
MODE_WINDOW_RADII = 10.0
MODE_STEP_FRACTION = 0.1
RDDI_WINDOW_WIDTHS = 20.0
RDDI_STEP_FRACTION = 0.5
# closest approach below this (m) counts as a collision when RDDI is on
COINCIDENT_DISTANCE = 1e-12


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t = {t:.9g} s)")
        self.t = t


class NormDriftError(IntegrationError):
    pass


@dataclass(frozen=True)
class ExcitationState:
    atom_amps: tuple[complex, ...]
    photon_amp: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "atom_amps", tuple(complex(a) for a in self.atom_amps))
        object.__setattr__(self, "photon_amp", complex(self.photon_amp))

    @classmethod
    def from_array(cls, y) -> "ExcitationState":
        y = np.asarray(y, dtype=complex)
        return cls(tuple(y[:-1]), y[-1])

    def as_array(self) -> np.ndarray:
        return np.array([*self.atom_amps, self.photon_amp], dtype=complex)

    @property
    def n_atoms(self) -> int:
        return len(self.atom_amps)

    @property
    def populations(self) -> tuple[float, ...]:
        return tuple(abs(a) ** 2 for a in self.atom_amps)

    @property
    def photon_prob(self) -> float:
        return abs(self.photon_amp) ** 2

    @property
    def norm_sq(self) -> float:
        return math.fsum(self.populations) + self.photon_prob


@dataclass(frozen=True)
class SimulationProblem:
    atoms: tuple[AtomSpec, ...]
    mode: DefectModeSpec | None
    rddi_enabled: bool
    t_span: tuple[float, float]
    detuning: float = 0.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    output_grid: tuple[float, ...] = ()
    interaction_box: float | None = None
    consts: PhysicalConstants = field(default=CODATA)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "t_span", (float(self.t_span[0]), float(self.t_span[1])))
        grid = tuple(float(t) for t in self.output_grid) or (self.t_span[1],)
        object.__setattr__(self, "output_grid", grid)

        if not 1 <= len(self.atoms) <= 3:
            raise ValueError(f"between 1 and 3 atoms supported, got {len(self.atoms)}")
        if sum(a.initially_excited for a in self.atoms) != 1:
            raise ValueError("exactly one atom must be initially excited")
        if len({a.label for a in self.atoms}) != len(self.atoms):
            raise ValueError("atom labels must be unique")
        if not self.t_span[1] > self.t_span[0]:
            raise ValueError("t_span must be increasing")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.mode is None and not self.rddi_enabled:
            raise ValueError("no interaction enabled: need a defect mode or RDDI")
        if self.interaction_box is not None and self.interaction_box <= 0:
            raise ValueError("interaction box side must be positive")
        g = np.asarray(grid)
        if np.any(np.diff(g) <= 0):
            raise ValueError("output grid must be strictly increasing")
        if g[0] < self.t_span[0] or g[-1] > self.t_span[1]:
            raise ValueError("output grid must lie inside t_span")

    def initial_state(self) -> ExcitationState:
        return ExcitationState(tuple(1.0 if a.initially_excited else 0.0 for a in self.atoms), 0j)


@dataclass(frozen=True)
class TimeSeries:
    """Amplitudes on a time grid; row k holds (a_1..a_n, gamma) at times[k]."""

    times: np.ndarray
    amplitudes: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.amplitudes):
            raise ValueError("times and amplitudes differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[ExcitationState]:
        return [ExcitationState.from_array(row) for row in self.amplitudes]

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.populations.sum(axis=1) - 1.0)))


def pack_coefficients(problem: SimulationProblem):
    """Arrays consumed by the compiled right-hand side (layout in ``_kernels``)."""
    atoms = problem.atoms
    r0 = np.array([a.trajectory.r0 for a in atoms])
    v = np.array([a.trajectory.v for a in atoms])
    mode = problem.mode
    if mode is not None and mode.g0 != 0.0:
        d0 = r0 - mode.center
        mode_coef = np.column_stack(
            [
                np.einsum("ij,ij->i", d0, d0),
                2.0 * np.einsum("ij,ij->i", d0, v),
                np.einsum("ij,ij->i", v, v),
                r0 @ mode.k_vec + mode.phase,
                v @ mode.k_vec,
                mode.g0 * np.array([float(mode.polarization @ a.dipole_dir) for a in atoms]),
                np.full(len(atoms), 1.0 / mode.radius),
            ]
        )
    else:
        mode_coef = np.zeros((0, 7))

    rows = []
    if problem.rddi_enabled:
        c = problem.consts
        for j in range(len(atoms)):
            for l in range(j + 1, len(atoms)):
                aj, al = atoms[j], atoms[l]
                prefactor = aj.dipole_mag * al.dipole_mag / (4.0 * math.pi * c.epsilon0 * c.hbar)
                rows.append(
                    [j, l, *r0[j], *v[j], *r0[l], *v[l], *aj.dipole_dir, *al.dipole_dir, prefactor, aj.omega / c.c]
                )
    pair_coef = np.array(rows, dtype=float).reshape(-1, 22)
    box_half = -1.0 if problem.interaction_box is None else problem.interaction_box / 2
    return mode_coef, pair_coef, box_half, float(problem.detuning)


def rhs_function(problem: SimulationProblem):
    """Python callable f(t, y) of the equations of motion, for external solvers."""
    packed = pack_coefficients(problem)

    def f(t, y):
        dy = np.empty(len(y), dtype=complex)
        _kernels.rhs(float(t), np.asarray(y, dtype=complex), dy, *packed)
        return dy

    return f


def _step_windows(problem: SimulationProblem) -> list[tuple[float, float, float]]:
    """(start, stop, max_step) windows where the coefficients vary quickly."""
    windows = []
    mode = problem.mode
    if mode is not None and mode.g0 != 0.0:
        k = float(np.linalg.norm(mode.k_vec))
        feature = mode.radius if k == 0 else min(mode.radius, math.pi / k)
        for atom in problem.atoms:
            span = sphere_window(atom.trajectory, mode.center, MODE_WINDOW_RADII * mode.radius)
            if span is not None:
                windows.append((*span, MODE_STEP_FRACTION * feature / atom.trajectory.speed))
    if problem.rddi_enabled:
        atoms = problem.atoms
        for j in range(len(atoms)):
            for l in range(j + 1, len(atoms)):
                ta, tb = atoms[j].trajectory, atoms[l].trajectory
                dv = float(np.linalg.norm(tb.v - ta.v))
                if dv == 0:
                    continue
                t_ca, r_min = closest_approach(ta, tb)
                width = max(r_min, 1e-9) / dv
                windows.append(
                    (t_ca - RDDI_WINDOW_WIDTHS * width, t_ca + RDDI_WINDOW_WIDTHS * width, RDDI_STEP_FRACTION * width)
                )
        if problem.interaction_box is not None:
            # zero-width windows: only mark the switch-on/off discontinuities
            for atom in atoms:
                span = box_window(atom.trajectory, problem.interaction_box / 2)
                if span is not None:
                    windows.extend([(span[0], span[0], math.inf), (span[1], span[1], math.inf)])
    return windows


def plan_segments(problem: SimulationProblem, t0: float, t1: float) -> list[tuple[float, float, float]]:
    """Split [t0, t1] (either order) into (start, stop, max_step) pieces."""
    lo, hi = min(t0, t1), max(t0, t1)
    windows = _step_windows(problem)
    cuts = {lo, hi}
    for start, stop, _ in windows:
        cuts.update(t for t in (start, stop) if lo < t < hi)
    edges = sorted(cuts)
    segments = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        ceiling = min((m for s, e, m in windows if s <= mid <= e), default=math.inf)
        segments.append((a, b, ceiling))
    if t1 < t0:
        segments = [(b, a, m) for a, b, m in reversed(segments)]
    return segments


def _check_collisions(problem: SimulationProblem, t0: float, t1: float) -> None:
    # J diverges as 1/R^3; fail fast instead of shrinking the step into the pole
    if not problem.rddi_enabled:
        return
    atoms = problem.atoms
    lo, hi = min(t0, t1), max(t0, t1)
    for j in range(len(atoms)):
        for l in range(j + 1, len(atoms)):
            t_ca, r_min = closest_approach(atoms[j].trajectory, atoms[l].trajectory)
            if r_min < COINCIDENT_DISTANCE and lo <= t_ca <= hi:
                raise IntegrationError(f"atoms {atoms[j].label} and {atoms[l].label} coincide", t_ca)


def propagate(
    problem: SimulationProblem,
    y0,
    t0: float,
    t1: float,
    grid: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Evolve amplitudes ``y0`` from t0 to t1 (forward or backward).

    Returns (amplitudes on ``grid``, amplitudes at t1). Grid points must lie
    between t0 and t1 and be ordered in the direction of integration.
    """
    _check_collisions(problem, t0, t1)
    packed = pack_coefficients(problem)
    y = np.asarray(y0, dtype=complex).copy()
    grid = np.asarray([] if grid is None else grid, dtype=float)
    out = np.empty((len(grid), len(y)), dtype=complex)
    direction = 1.0 if t1 >= t0 else -1.0
    norm0 = float(np.vdot(y, y).real)

    filled = 0
    segments = plan_segments(problem, t0, t1)
    for idx, (a, b, max_step) in enumerate(segments):
        last = idx == len(segments) - 1
        # each grid point is owned by exactly one segment: [a, b), last one [a, b]
        s = direction * grid
        lo, hi = direction * a, direction * b
        mask = (s >= lo) & ((s <= hi) if last else (s < hi))
        seg_grid = np.ascontiguousarray(grid[mask])
        ys, y, status, t_reached, _ = _kernels.dopri5(
            a, b, y, seg_grid, problem.rel_tol, problem.abs_tol, max_step, *packed
        )
        if status != _kernels.STATUS_OK:
            raise IntegrationError("step size underflow", float(t_reached))
        out[filled : filled + len(seg_grid)] = ys
        filled += len(seg_grid)
        drift = abs(float(np.vdot(y, y).real) - norm0)
        if not drift <= NORM_ABORT:
            raise NormDriftError(f"normalization drift {drift:.3g} exceeds {NORM_ABORT:g}", b)
    if filled != len(grid):
        raise ValueError("grid points outside the propagation interval")
    return out, y


def integrate(problem: SimulationProblem) -> TimeSeries:
    t0, _ = problem.t_span
    grid = np.asarray(problem.output_grid)
    amps, _ = propagate(problem, problem.initial_state().as_array(), t0, problem.t_span[1], grid)
    series = TimeSeries(grid, amps, tuple(a.label for a in problem.atoms))
    drift = series.norm_drift()
    if drift > NORM_ABORT:
        raise NormDriftError(f"normalization drift {drift:.3g} on output grid")
    log.debug("integrated %d atoms over %s, max norm drift %.2e", len(problem.atoms), problem.t_span, drift)
    return series


def single_atom_closed_form(
    atom: AtomSpec,
    mode: DefectModeSpec,
    t: float,
    detuning: float = 0.0,
) -> tuple[complex, complex]:
    """Exact (a(t), gamma(t)) for one resonant atom excited at t = 0."""
    if detuning != 0.0:
        raise ValueError("closed form holds only on resonance")
    area = pulse_area(atom, mode, 0.0, t) if t >= 0 else -pulse_area(atom, mode, t, 0.0)
    return complex(math.cos(area)), -1j * math.sin(area)


def final_state(series: TimeSeries) -> ExcitationState:
    if len(series) == 0:
        raise ValueError("empty time series")
    state = ExcitationState.from_array(series.amplitudes[-1])
    drift = abs(state.norm_sq - 1.0)
    if drift > NORM_FINAL:
        raise NormDriftError(f"final-state normalization drift {drift:.3g} exceeds {NORM_FINAL:g}")
    if drift:
        log.debug("renormalizing final state (drift %.2e)", drift)
        state = ExcitationState.from_array(state.as_array() / math.sqrt(state.norm_sq))
    return state
