"""Entangling flying two-level atoms in a photonic crystal.

Atoms cross the crystal along straight holes and exchange a single
excitation either through a localized defect mode or through the resonant
dipole-dipole interaction.
"""

from .analysis import FinalStateReport, bell_fidelity, von_neumann_entropy, w_fidelity
from .config import ConfigError, RunConfig, build_problem
from .defect_field import (
    DefectModeSpec,
    MicrocavityCalibration,
    coupling,
    coupling_pulse,
    g0_from_microcavity,
    mode_amplitude,
    pulse_area,
)
from .dynamics import (
    ExcitationState,
    IntegrationError,
    SimulationProblem,
    TimeSeries,
    final_state,
    integrate,
    single_atom_closed_form,
)
from .geometry import (
    CODATA,
    AtomSpec,
    CrystalSpec,
    PhysicalConstants,
    Trajectory,
    exit_time,
    position_at,
    standard_trajectories,
)
from .rddi import SeparationGeometry, j_coupling, j_coupling_at_time
from .sweep import SweepResult, SweepSpec, run_sweep, search_bell_velocity, search_w_velocities

__version__ = "0.1.0"
