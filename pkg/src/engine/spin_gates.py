"""Spin rotations with y/z control errors.

Matrices act on the spin basis ordered (|↑⟩, |↓⟩), i.e. |↑⟩ is the +1
eigenstate of Z in R_y(θ) = exp(−iYθ/2) and R_z(φ) = exp(−iZφ/2). With
that order every gate equals R_z(Δz)·R_y(kπ/2 + Δy) entrywise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from src.engine.fock import PureState
from src.shared.models import GateLabel, Spin

UNITARITY_TOLERANCE = 1e-12

# Row/column index of each spin label.
SPIN_INDEX = {Spin.UP: 0, Spin.DOWN: 1}
_INDEX_SPIN = {0: Spin.UP, 1: Spin.DOWN}


@dataclass(frozen=True, eq=False)
class SpinGate:
    matrix: np.ndarray
    label: GateLabel

    def __post_init__(self) -> None:
        if self.matrix.shape != (2, 2):
            raise ValueError(f"Spin gate must be 2x2, got shape {self.matrix.shape}")
        deviation = np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(2)))
        if deviation > UNITARITY_TOLERANCE:
            raise ValueError(f"{self.label} gate is not unitary (deviation {deviation:.3e})")

    def act(self, spin: Spin) -> dict[Spin, complex]:
        """Column of the matrix: image of a basis spin state."""
        column = self.matrix[:, SPIN_INDEX[spin]]
        return {_INDEX_SPIN[i]: complex(column[i]) for i in range(2) if column[i] != 0}


def epsilon_plus(delta: float) -> float:
    return math.cos(delta / 2) + math.sin(delta / 2)


def epsilon_minus(delta: float) -> float:
    return math.cos(delta / 2) - math.sin(delta / 2)


def rotation_y(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rotation_z(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def compose(*matrices: np.ndarray) -> np.ndarray:
    """Product in application order: ``compose(a, b)`` applies ``a`` first."""
    return reduce(lambda acc, m: m @ acc, matrices, np.eye(2, dtype=complex))


def hadamard_gate(dy: float = 0.0, dz: float = 0.0) -> SpinGate:
    ph = np.exp(-0.5j * dz)
    em, ep = epsilon_minus(dy), epsilon_plus(dy)
    matrix = np.array(
        [[ph * em, -ph * ep], [ph.conjugate() * ep, ph.conjugate() * em]],
    ) / math.sqrt(2)
    return SpinGate(matrix, GateLabel.HADAMARD)


def inverse_hadamard_gate(dy: float = 0.0, dz: float = 0.0) -> SpinGate:
    ph = np.exp(-0.5j * dz)
    em, ep = epsilon_minus(dy), epsilon_plus(dy)
    matrix = np.array(
        [[-ph * ep, -ph * em], [ph.conjugate() * em, -ph.conjugate() * ep]],
    ) / math.sqrt(2)
    return SpinGate(matrix, GateLabel.INVERSE_HADAMARD)


def flip_gate(dy: float = 0.0, dz: float = 0.0) -> SpinGate:
    ph = np.exp(-0.5j * dz)
    s, c = math.sin(dy / 2), math.cos(dy / 2)
    matrix = np.array([[-ph * s, -ph * c], [ph.conjugate() * c, -ph.conjugate() * s]])
    return SpinGate(matrix, GateLabel.FLIP)


def z_phase_gate(phi: float) -> SpinGate:
    return SpinGate(rotation_z(phi), GateLabel.Z_PHASE)


GATE_BUILDERS = {
    GateLabel.HADAMARD: hadamard_gate,
    GateLabel.INVERSE_HADAMARD: inverse_hadamard_gate,
    GateLabel.FLIP: flip_gate,
}


def gate_for(label: GateLabel, dy: float = 0.0, dz: float = 0.0) -> SpinGate:
    return GATE_BUILDERS[label](dy, dz)


def apply_spin_gate(state: PureState, gate: SpinGate) -> PureState:
    """Apply ``gate`` to the spin factor of every term; photons are untouched."""
    images = {spin: gate.act(spin) for spin in Spin}
    return PureState.from_terms(
        (ket.with_spin(out), amp * coeff)
        for ket, amp in state.items()
        for out, coeff in images[ket.spin].items()
    )
