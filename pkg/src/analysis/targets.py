"""Ideal resource states and their logical (qubit) description.

The ideal output of the protocol is a linear graph state whose vertices are
GHZ-encoded on M_n photonic time-bin qubits, with the spin attached to the
last vertex. Time bins encode the logical value (early → 0, late → 1) and
the spin encodes ↓ → 0, ↑ → 1.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.engine.fock import BasisKet, ModeAddress, PureState, project_spin
from src.shared.errors import ConfigurationError
from src.shared.models import (
    Channel,
    InitialSign,
    ProtocolConfig,
    Spin,
    Step5bMode,
    TimeBin,
)

logger = logging.getLogger(__name__)

SPIN_LABEL = "S"

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2)


class TargetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertex_sizes: list[int]
    step5b_mode: Step5bMode = Step5bMode.ALTERNATING
    initial_sign: InitialSign = InitialSign.PLUS

    @field_validator("vertex_sizes")
    @classmethod
    def validate_sizes(cls, v: list[int]) -> list[int]:
        if not v or any(size < 1 for size in v):
            raise ValueError(f"Every vertex needs at least one qubit, got {v}")
        return v

    @classmethod
    def from_config(cls, config: ProtocolConfig) -> TargetSpec:
        return cls(
            vertex_sizes=config.vertex_sizes,
            step5b_mode=config.step5b_mode,
            initial_sign=config.initial_sign,
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_sizes)

    @property
    def spin_sign(self) -> int:
        """Relative sign of the spin-↑ component."""
        sign = 1 if self.initial_sign is InitialSign.PLUS else -1
        if self.step5b_mode is Step5bMode.ALTERNATING:
            sign *= (-1) ** self.n_vertices
        return sign

    @property
    def vertex_sign(self) -> int:
        """Relative sign of the late component of each vertex before the CZ gates."""
        return -1 if self.step5b_mode is Step5bMode.CONSISTENT else 1

    def qubit_labels(self) -> list[str]:
        return [SPIN_LABEL] + [
            f"{n}.{m}"
            for n, size in enumerate(self.vertex_sizes, start=1)
            for m in range(1, size + 1)
        ]


# ---------------------------------------------------------------------------
# Fock-space targets
# ---------------------------------------------------------------------------


def _occupations(spec: TargetSpec, bits: tuple[int, ...]) -> dict[ModeAddress, int]:
    return {
        ModeAddress(n, m, TimeBin.LATE if bit else TimeBin.EARLY): 1
        for n, (size, bit) in enumerate(zip(spec.vertex_sizes, bits), start=1)
        for m in range(1, size + 1)
    }


def _chain_sign(bits: tuple[int, ...]) -> int:
    """CZ between neighbouring vertices: −1 for every adjacent pair of late bins."""
    return (-1) ** sum(a * b for a, b in itertools.pairwise(bits))


def _graph_state(spec: TargetSpec, spin_sign: int, vertex_sign: int) -> PureState:
    terms: list[tuple[BasisKet, complex]] = []
    for bits in itertools.product((0, 1), repeat=spec.n_vertices):
        photonic = vertex_sign ** sum(bits) * _chain_sign(bits)
        occ = _occupations(spec, bits)
        terms.append((BasisKet.of(Spin.DOWN, occ), photonic))
        # CZ between spin and the last vertex
        terms.append((BasisKet.of(Spin.UP, occ), spin_sign * photonic * (-1) ** bits[-1]))
    return PureState.from_terms(terms)


def build_consistent_state(spec: TargetSpec) -> PureState:
    """Target of the consistent 5b variant: vertices (|E⟩ − |L⟩), spin (|↓⟩ ± |↑⟩)."""
    sign = 1 if spec.initial_sign is InitialSign.PLUS else -1
    return _graph_state(spec, spin_sign=sign, vertex_sign=-1)


def build_alternating_state(spec: TargetSpec) -> PureState:
    """Target of the alternating 5b variant: vertices (|E⟩ + |L⟩), spin (|↓⟩ ± (−1)^N |↑⟩)."""
    sign = 1 if spec.initial_sign is InitialSign.PLUS else -1
    return _graph_state(spec, spin_sign=sign * (-1) ** spec.n_vertices, vertex_sign=1)


# Short names for the consistent and alternating targets
build_eq1_state = build_consistent_state
build_eq2_state = build_alternating_state


def build_target_state(spec: TargetSpec) -> PureState:
    if spec.step5b_mode is Step5bMode.CONSISTENT:
        return build_consistent_state(spec)
    return build_alternating_state(spec)


def build_resource_state(spec: TargetSpec, spin: Spin = Spin.DOWN) -> PureState:
    """Photonic graph state with the spin disconnected and left in ``spin``."""
    terms = [
        (
            BasisKet.of(spin, _occupations(spec, bits)),
            spec.vertex_sign ** sum(bits) * _chain_sign(bits),
        )
        for bits in itertools.product((0, 1), repeat=spec.n_vertices)
    ]
    return PureState.from_terms(terms)


def disconnect_spin(state: PureState, outcome: Spin) -> PureState:
    """Z-measure the spin. Outcome ↑ leaves a −1 on the late bin of the last vertex."""
    projected = project_spin(state, outcome)
    logger.debug("Disconnected spin with outcome %s", outcome)
    return projected


def remnant_phase_correction(
    state: PureState, spec: TargetSpec, phase: float = math.pi
) -> PureState:
    """Multiply every term whose last vertex is late by e^{i·phase}."""
    last = ModeAddress(spec.n_vertices, 1, TimeBin.LATE, Channel.RESONANT_H)
    factor = complex(math.cos(phase), math.sin(phase))
    return PureState.from_terms(
        (ket, amp * factor if ket.count(last) else amp) for ket, amp in state.items()
    )


# ---------------------------------------------------------------------------
# Logical description
# ---------------------------------------------------------------------------


@dataclass
class LogicalState:
    """State vector over qubit ``labels``; labels[0] is the most significant bit."""

    labels: list[str]
    amplitudes: np.ndarray

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ConfigurationError(f"Unknown qubit {label!r}") from None

    @property
    def n_qubits(self) -> int:
        return len(self.labels)


def encode_logical(state: PureState, spec: TargetSpec) -> LogicalState:
    """Map a Fock state inside the computational subspace onto qubits.

    Every photonic qubit must hold exactly one resonant photon; anything else
    (loss, detuned or orthogonal photons, empty qubits) raises.
    """
    labels = spec.qubit_labels()
    positions = {label: i for i, label in enumerate(labels)}
    n_qubits = len(labels)
    amplitudes = np.zeros(2**n_qubits, dtype=complex)
    for ket, amp in state.items():
        bits = [0] * n_qubits
        bits[0] = 1 if ket.spin is Spin.UP else 0
        seen: set[str] = set()
        for mode, count in ket.occupations:
            if not isinstance(mode, ModeAddress) or mode.channel is not Channel.RESONANT_H:
                raise ConfigurationError(f"{ket.label()} is outside the computational subspace")
            label = f"{mode.vertex}.{mode.qubit}"
            if count != 1 or label in seen or label not in positions:
                raise ConfigurationError(f"{ket.label()} is outside the computational subspace")
            seen.add(label)
            bits[positions[label]] = 1 if mode.time_bin is TimeBin.LATE else 0
        if len(seen) != n_qubits - 1:
            raise ConfigurationError(f"{ket.label()} does not hold one photon per qubit")
        index = int("".join(map(str, bits)), 2)
        amplitudes[index] += amp
    return LogicalState(labels, amplitudes)


def build_computational_state(spec: TargetSpec) -> LogicalState:
    return encode_logical(build_target_state(spec), spec)


def apply_logical_hadamard(state: LogicalState, label: str) -> LogicalState:
    axis = state.index(label)
    tensor = state.amplitudes.reshape([2] * state.n_qubits)
    tensor = np.moveaxis(np.tensordot(_HADAMARD, tensor, axes=([1], [axis])), 0, axis)
    return LogicalState(list(state.labels), tensor.reshape(-1))


@dataclass(frozen=True)
class PauliString:
    """``sign`` · ∏ X over ``x`` · ∏ Z over ``z`` (Z applied first)."""

    sign: int
    x: frozenset[str]
    z: frozenset[str] = frozenset()

    def label(self) -> str:
        ops = sorted(
            [f"X{q}" for q in self.x] + [f"Z{q}" for q in self.z], key=lambda s: s[1:]
        )
        return ("+" if self.sign > 0 else "-") + " ".join(ops)


def stabilizer_generators(spec: TargetSpec) -> list[PauliString]:
    """Generators stabilising the ideal target, one per logical qubit."""
    n_vertices = spec.n_vertices
    generators: list[PauliString] = []
    for n, size in enumerate(spec.vertex_sizes, start=1):
        for m in range(1, size):
            generators.append(PauliString(1, frozenset(), frozenset({f"{n}.{m}", f"{n}.{m + 1}"})))
    for n, size in enumerate(spec.vertex_sizes, start=1):
        x = frozenset(f"{n}.{m}" for m in range(1, size + 1))
        z = {f"{k}.1" for k in (n - 1, n + 1) if 1 <= k <= n_vertices}
        if n == n_vertices:
            z.add(SPIN_LABEL)
        generators.append(PauliString(spec.vertex_sign, x, frozenset(z)))
    generators.append(
        PauliString(spec.spin_sign, frozenset({SPIN_LABEL}), frozenset({f"{n_vertices}.1"}))
    )
    return generators


def stabilizer_expectation(state: LogicalState, pauli: PauliString) -> float:
    n_qubits = state.n_qubits
    weights = 1 << np.arange(n_qubits - 1, -1, -1)
    x_mask = int(sum(weights[state.index(q)] for q in pauli.x))
    z_bits = np.zeros(n_qubits, dtype=np.int64)
    for q in pauli.z:
        z_bits[state.index(q)] = 1

    indices = np.arange(2**n_qubits)
    bits = (indices[:, None] >> np.arange(n_qubits - 1, -1, -1)) & 1
    signs = 1 - 2 * ((bits @ z_bits) % 2)
    psi = state.amplitudes
    value = pauli.sign * np.sum(psi[indices ^ x_mask].conj() * signs * psi)
    return float(value.real)
