"""Type-II fusion on dual-rail photonic qubits.

Two time-bin qubits are relabelled onto ports (A, B) and (C, D), mixed by
the four-port transfer matrix and measured with four detectors. Every
photon channel passes the circuit independently: photons in different
channels never interfere.

Usage::

    state = to_dual_rail(joint, (2, 1), (Port.A, Port.B))
    state = to_dual_rail(state, (3, 1), (Port.C, Port.D))
    report = fusion_report(state)
    print(report.success_probability)
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from src.engine.fock import (
    PRUNE_TOLERANCE,
    BasisKet,
    DualRailMode,
    Mixture,
    ModeAddress,
    PureState,
)
from src.shared.errors import ConfigurationError
from src.shared.models import Channel, Classification, FusionContext, Port, TimeBin

logger = logging.getLogger(__name__)

# Two two-photon qubits can bunch into a single output port.
FUSION_CAP = 4

FUSION_TRANSFER = 0.5 * np.array(
    [
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ],
    dtype=float,
)

RAIL_HADAMARD = np.array([[1, 1], [1, -1]], dtype=float) / math.sqrt(2)

_PORT_ORDER = {p: i for i, p in enumerate(Port)}
_CHANNEL_ORDER = {c: i for i, c in enumerate(Channel)}

PatternKey = tuple[tuple[tuple[Port, Channel], int], ...]


# ---------------------------------------------------------------------------
# Time-bin to dual-rail conversion
# ---------------------------------------------------------------------------


def to_dual_rail(
    state: PureState, qubit: tuple[int, int], rails: tuple[Port, Port]
) -> PureState:
    """Relabel qubit (n, m): early bin → ``rails[0]``, late bin → ``rails[1]``.

    Every photon channel is carried along; loss-channel photons stay on their
    time-bin address.
    """
    n, m = qubit
    first, second = rails
    if first == second:
        raise ConfigurationError(f"Rails of qubit {qubit} must be two distinct ports")
    used = {
        mode.port for ket in state.terms for mode in ket.modes() if isinstance(mode, DualRailMode)
    }
    if used & set(rails):
        raise ConfigurationError(f"Ports {sorted(used & set(rails))} are already in use")

    def relabel(mode):
        if not isinstance(mode, ModeAddress) or mode.is_loss:
            return mode
        if (mode.vertex, mode.qubit) == qubit:
            port = first if mode.time_bin is TimeBin.EARLY else second
            return DualRailMode(port, mode.channel)
        return mode

    found = any(
        isinstance(mode, ModeAddress) and (mode.vertex, mode.qubit) == qubit
        for ket in state.terms
        for mode in ket.modes()
    )
    if not found:
        raise ConfigurationError(f"Qubit ({n},{m}) holds no photon in any term")
    return PureState.from_terms(
        (
            BasisKet.of(
                ket.spin, [(relabel(mode), c) for mode, c in ket.occupations], cap=FUSION_CAP
            ),
            amp,
        )
        for ket, amp in state.items()
    )


# ---------------------------------------------------------------------------
# Linear-optical transforms
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _expand(
    matrix_key: tuple, counts: tuple[int, ...]
) -> tuple[tuple[tuple[int, ...], complex], ...]:
    """Output occupations and amplitudes of one input occupation pattern.

    Applies X_in† → Σ_Y M[X, Y] Y_out† to ∏ X†^c / √c! |0⟩.
    """
    matrix = np.array(matrix_key)
    size = len(counts)
    poly: dict[tuple[int, ...], complex] = {(0,) * size: 1.0 + 0.0j}
    for x, count in enumerate(counts):
        for _ in range(count):
            grown: dict[tuple[int, ...], complex] = defaultdict(complex)
            for monomial, coeff in poly.items():
                for y in range(size):
                    if matrix[x, y] == 0:
                        continue
                    out = list(monomial)
                    out[y] += 1
                    grown[tuple(out)] += coeff * matrix[x, y]
            poly = grown
    norm_in = math.prod(math.sqrt(math.factorial(c)) for c in counts)
    result = []
    for monomial, coeff in poly.items():
        amp = coeff * math.prod(math.sqrt(math.factorial(k)) for k in monomial) / norm_in
        if abs(amp) >= PRUNE_TOLERANCE:
            result.append((monomial, amp))
    return tuple(result)


def _apply_port_unitary(
    state: PureState, matrix: np.ndarray, ports: Sequence[Port]
) -> PureState:
    matrix_key = tuple(tuple(float(v) for v in row) for row in matrix)
    index = {p: i for i, p in enumerate(ports)}
    terms: list[tuple[BasisKet, complex]] = []
    for ket, amp in state.items():
        per_channel: dict[Channel, list[int]] = {}
        rest = []
        for mode, count in ket.occupations:
            if isinstance(mode, DualRailMode) and mode.port in index:
                per_channel.setdefault(mode.channel, [0] * len(ports))[index[mode.port]] = count
            else:
                rest.append((mode, count))
        branches: list[tuple[list[tuple], complex]] = [(rest, complex(amp))]
        for channel, counts in per_channel.items():
            expanded = []
            for occ, branch_amp in branches:
                for out, coeff in _expand(matrix_key, tuple(counts)):
                    added = [(DualRailMode(p, channel), k) for p, k in zip(ports, out) if k]
                    expanded.append((occ + added, branch_amp * coeff))
            branches = expanded
        terms.extend(
            (BasisKet.of(ket.spin, occ, cap=FUSION_CAP), branch_amp)
            for occ, branch_amp in branches
        )
    return PureState.from_terms(terms)


def apply_fusion_transfer(state: PureState) -> PureState:
    """Pass ports A-D through the four-port fusion circuit."""
    return _apply_port_unitary(state, FUSION_TRANSFER, tuple(Port))


def apply_dual_rail_hadamard(
    state: PureState, rails: tuple[Port, Port] = (Port.A, Port.B)
) -> PureState:
    """50:50 mixing of one qubit's rails.

    X† → (X† + Y†)/√2 and Y† → (X† − Y†)/√2 for ``rails = (X, Y)``.
    """
    return _apply_port_unitary(state, RAIL_HADAMARD, rails)


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


def _count_key(item: tuple[tuple[Port, Channel], int]) -> tuple[int, int]:
    (port, channel), _ = item
    return _PORT_ORDER[port], _CHANNEL_ORDER[channel]


def _pattern_sort_key(pattern: PatternKey) -> tuple:
    return tuple((_PORT_ORDER[p], _CHANNEL_ORDER[c], n) for (p, c), n in pattern)


def pattern_label(pattern: PatternKey) -> str:
    if not pattern:
        return "vacuum"
    return " ".join(f"{port}:{channel}={n}" for (port, channel), n in pattern)


@dataclass
class DetectionEvent:
    counts: dict[tuple[Port, Channel], int]
    probability: float
    post_state: Mixture
    classification: Classification = Classification.NO_ENTANGLEMENT_ATTEMPTED

    @property
    def pattern(self) -> PatternKey:
        return tuple(sorted(self.counts.items(), key=_count_key))

    @property
    def photon_number(self) -> int:
        return sum(self.counts.values())

    def resonant_counts(self) -> dict[Port, int]:
        return {
            port: n for (port, channel), n in self.counts.items() if channel is Channel.RESONANT_H
        }


def measure_detectors(state: PureState) -> list[DetectionEvent]:
    """Photon-number-resolving measurement of every (port, channel) output.

    Returns one event per pattern with its Born probability and the
    normalised state of everything not measured.
    """
    groups: dict[PatternKey, list[tuple[BasisKet, complex]]] = defaultdict(list)
    for ket, amp in state.items():
        detected, rest = ket.split(lambda m: isinstance(m, DualRailMode))
        pattern = tuple(((mode.port, mode.channel), c) for mode, c in detected)
        groups[pattern].append((rest, amp))

    events = []
    for pattern in sorted(groups, key=_pattern_sort_key):
        terms = groups[pattern]
        probability = sum(abs(a) ** 2 for _, a in terms)
        if probability < PRUNE_TOLERANCE**2:
            continue
        events.append(
            DetectionEvent(dict(pattern), probability, Mixture.pure(PureState.from_terms(terms)))
        )
    return events


def threshold_events(events: list[DetectionEvent]) -> list[DetectionEvent]:
    """Non-number-resolving detectors: every count is clipped to one click."""
    merged: dict[PatternKey, list[DetectionEvent]] = defaultdict(list)
    for event in events:
        clipped = {key: 1 for key, n in event.counts.items() if n}
        pattern = tuple(sorted(clipped.items(), key=_count_key))
        merged[pattern].append(event)
    out = []
    for pattern in sorted(merged, key=_pattern_sort_key):
        group = merged[pattern]
        probability = sum(e.probability for e in group)
        post = Mixture.from_weighted(
            (e.probability * p, s) for e in group for p, s in e.post_state
        )
        out.append(DetectionEvent(dict(pattern), probability, post))
    return out


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

_AC_BD = ({Port.A, Port.C}, {Port.B, Port.D})
_AD_BC = ({Port.A, Port.D}, {Port.B, Port.C})
_SAME_SIDE = ({Port.A, Port.B}, {Port.C, Port.D})


def _port_table(per_port: Mapping[Port, int], context: FusionContext) -> Classification:
    total = sum(per_port.values())
    if total == 0:
        return Classification.NO_ENTANGLEMENT_ATTEMPTED
    occupied = {p for p, n in per_port.items() if n}
    if total == 1:
        if context.herald_single_photon and occupied == {Port.C}:
            return Classification.SUCCESS_AC_BD
        if context.herald_single_photon and occupied == {Port.D}:
            return Classification.SUCCESS_AD_BC
        return Classification.FAILURE_ERROR_HERALDED
    if total == 2:
        same_side = len(occupied) == 1 or occupied in _SAME_SIDE
        if context.both_sided_flip_error:
            # Both inputs in |∅,∅⟩ ± |1,1⟩: two photons come from one side only
            return Classification.SUCCESS_FLIP_ERROR if same_side else Classification.AMBIGUOUS
        if len(occupied) == 1:
            return Classification.FAILURE_SEPARABLE
        if occupied in _AC_BD:
            return Classification.SUCCESS_AC_BD
        if occupied in _AD_BC:
            return Classification.SUCCESS_AD_BC
        return Classification.FAILURE_ERROR_HERALDED
    return Classification.FAILURE_ERROR_HERALDED


def classify_pattern(
    counts: Mapping[tuple[Port, Channel], int],
    context: FusionContext | None = None,
    *,
    discriminate_channels: bool = True,
) -> Classification:
    """Decision table mapping detector counts to a fusion outcome.

    With channel discrimination an orthogonally polarised click heralds an
    error and detuned clicks are filtered out. Without it all channels look
    alike, so a success-looking pattern is ambiguous whenever orthogonal
    emission could have contributed.
    """
    context = context or FusionContext()
    if not any(counts.values()):
        return Classification.NO_ENTANGLEMENT_ATTEMPTED
    has_orthogonal = any(
        n for (_, channel), n in counts.items() if channel is Channel.ORTHOGONAL_V
    )
    per_port: Counter[Port] = Counter()
    if discriminate_channels:
        if has_orthogonal:
            return Classification.FAILURE_ERROR_HERALDED
        for (port, channel), n in counts.items():
            if channel is Channel.RESONANT_H:
                per_port[port] += n
        return _port_table(per_port, context)

    for (port, _), n in counts.items():
        per_port[port] += n
    result = _port_table(per_port, context)
    if result.is_success and (context.orthogonal_emission_possible or has_orthogonal):
        return Classification.AMBIGUOUS
    return result


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class FusionReport:
    events: list[DetectionEvent]
    classification_table: dict[Classification, float] = field(default_factory=dict)

    @property
    def success_probability(self) -> float:
        return sum(p for c, p in self.classification_table.items() if c.is_success)

    def probability_of(self, classification: Classification) -> float:
        return self.classification_table.get(classification, 0.0)

    def to_dict(self) -> dict:
        return {
            "success_probability": self.success_probability,
            "classification_table": {
                str(c): self.classification_table[c]
                for c in Classification
                if c in self.classification_table
            },
            "events": [
                {
                    "pattern": pattern_label(e.pattern),
                    "photons": e.photon_number,
                    "probability": e.probability,
                    "classification": str(e.classification),
                    "post_state_components": len(e.post_state),
                }
                for e in self.events
            ],
        }


def fusion_report(
    state: PureState,
    *,
    discriminate_channels: bool = True,
    number_resolving: bool = True,
    context: FusionContext | None = None,
) -> FusionReport:
    """Run the fusion circuit on ``state`` and classify every detector pattern."""
    context = context or FusionContext()
    events = measure_detectors(apply_fusion_transfer(state))
    if not number_resolving:
        events = threshold_events(events)
    table: dict[Classification, float] = defaultdict(float)
    for event in events:
        event.classification = classify_pattern(
            event.counts, context, discriminate_channels=discriminate_channels
        )
        table[event.classification] += event.probability
    report = FusionReport(events, dict(table))
    logger.debug("Fusion: %d patterns, success %.12g", len(events), report.success_probability)
    return report
