"""Entanglement and target-state metrics for final states."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import ExcitationState

PROB_SLACK = 1e-12


def von_neumann_entropy(p: float) -> float:
    """Single-atom entropy (nats) of a two-atom pure state with |a|^2 = p."""
    if p < -PROB_SLACK or p > 1 + PROB_SLACK:
        raise ValueError(f"probability {p} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    q = 1.0 - p
    return -sum(x * math.log(x) for x in (p, q) if x > 0)


def _require_atoms(state: ExcitationState, n: int) -> None:
    if state.n_atoms != n:
        raise ValueError(f"expected a {n}-atom state, got {state.n_atoms} atoms")


def bell_fidelity(state: ExcitationState) -> float:
    """Overlap with (|e g> + |g e>)/sqrt(2)."""
    _require_atoms(state, 2)
    a, b = state.atom_amps
    return abs(a + b) ** 2 / 2


def best_bell_fidelity(state: ExcitationState) -> float:
    """Bell fidelity maximised over the relative phase of the two branches."""
    _require_atoms(state, 2)
    a, b = state.atom_amps
    return (abs(a) + abs(b)) ** 2 / 2


def w_fidelity(state: ExcitationState) -> float:
    """Overlap with the equal-weight W state (|egg> + |geg> + |gge>)/sqrt(3)."""
    _require_atoms(state, 3)
    return abs(sum(state.atom_amps)) ** 2 / 3


@dataclass(frozen=True)
class FinalStateReport:
    """Metrics derived from one final state; every number recomputes from ``state``."""

    state: ExcitationState
    labels: tuple[str, ...] = ()

    @property
    def populations(self) -> tuple[float, ...]:
        return self.state.populations

    @property
    def photon_prob(self) -> float:
        return self.state.photon_prob

    @property
    def entropy(self) -> float | None:
        # the reduced state of the first atom is diagonal in the single-excitation
        # subspace, so its entropy depends on |a|^2 alone even with a photon present
        if self.state.n_atoms != 2:
            return None
        return von_neumann_entropy(self.populations[0])

    @property
    def bell_fidelity(self) -> float | None:
        return bell_fidelity(self.state) if self.state.n_atoms == 2 else None

    @property
    def best_bell_fidelity(self) -> float | None:
        return best_bell_fidelity(self.state) if self.state.n_atoms == 2 else None

    @property
    def w_fidelity(self) -> float | None:
        return w_fidelity(self.state) if self.state.n_atoms == 3 else None

    def to_dict(self) -> dict:
        labels = self.labels or tuple("ABC"[: self.state.n_atoms])
        return {
            "amplitudes": {
                **{lab: [a.real, a.imag] for lab, a in zip(labels, self.state.atom_amps)},
                "gamma": [self.state.photon_amp.real, self.state.photon_amp.imag],
            },
            "populations": dict(zip(labels, self.populations)),
            "photon_prob": self.photon_prob,
            "entropy_nats": self.entropy,
            "bell_fidelity": self.bell_fidelity,
            "best_bell_fidelity": self.best_bell_fidelity,
            "w_fidelity": self.w_fidelity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FinalStateReport":
        amps = dict(data["amplitudes"])
        gamma = amps.pop("gamma")
        labels = tuple(amps)
        state = ExcitationState(tuple(complex(*amps[k]) for k in labels), complex(*gamma))
        return cls(state, labels)
