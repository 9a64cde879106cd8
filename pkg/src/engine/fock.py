"""Sparse multi-mode state vectors for spin + time-bin photon systems.

A :class:`PureState` maps :class:`BasisKet` configurations (a spin label plus
photon occupations per mode) to complex amplitudes. Modes are either
time-bin addresses (:class:`ModeAddress`) produced by the generation
protocol, or dual-rail ports (:class:`DualRailMode`) used by the fusion
circuit. Loss is modelled by an extra ``loss`` channel on the same address.

Usage::

    ket = BasisKet.of(Spin.DOWN, {ModeAddress(1, 1, TimeBin.EARLY): 1})
    state = PureState.from_terms([(ket, 1.0)])
    print(format_state(state))
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from src.shared.errors import (
    ConfigurationError,
    InvalidTargetError,
    MeasurementError,
    RepresentationError,
)
from src.shared.models import Channel, Port, Spin, TimeBin

logger = logging.getLogger(__name__)

PRUNE_TOLERANCE = 1e-14
NORM_TOLERANCE = 1e-10
MAX_OCCUPATION = 2

_BIN_ORDER = {b: i for i, b in enumerate(TimeBin)}
_CHANNEL_ORDER = {c: i for i, c in enumerate(Channel)}
_PORT_ORDER = {p: i for i, p in enumerate(Port)}
_SPIN_ORDER = {s: i for i, s in enumerate(Spin)}


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ModeAddress:
    """Photon mode of qubit ``qubit`` in vertex ``vertex`` (both 1-based)."""

    vertex: int
    qubit: int
    time_bin: TimeBin
    channel: Channel = Channel.RESONANT_H

    @property
    def sort_key(self) -> tuple:
        return (
            0,
            self.vertex,
            self.qubit,
            _BIN_ORDER[self.time_bin],
            _CHANNEL_ORDER[self.channel],
        )

    @property
    def is_loss(self) -> bool:
        return self.channel is Channel.LOSS

    def with_channel(self, channel: Channel) -> ModeAddress:
        return ModeAddress(self.vertex, self.qubit, self.time_bin, channel)

    def label(self) -> str:
        return f"({self.vertex},{self.qubit},{self.time_bin},{self.channel})"


@dataclass(frozen=True, slots=True)
class DualRailMode:
    """Input/output port of the fusion circuit, per photon channel."""

    port: Port
    channel: Channel = Channel.RESONANT_H

    @property
    def sort_key(self) -> tuple:
        return (1, _PORT_ORDER[self.port], _CHANNEL_ORDER[self.channel])

    @property
    def is_loss(self) -> bool:
        return self.channel is Channel.LOSS

    def label(self) -> str:
        return f"({self.port},{self.channel})"


Mode = ModeAddress | DualRailMode


def _mode_key(item: tuple[Mode, int]) -> tuple:
    return item[0].sort_key


# ---------------------------------------------------------------------------
# Basis kets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BasisKet:
    """One classical configuration in canonical sparse form.

    ``occupations`` holds only nonzero counts, sorted by mode order, so two
    kets describing the same configuration are equal and hash alike.
    """

    spin: Spin
    occupations: tuple[tuple[Mode, int], ...] = ()

    @classmethod
    def of(
        cls,
        spin: Spin,
        occupations: Mapping[Mode, int] | Iterable[tuple[Mode, int]] = (),
        *,
        cap: int = MAX_OCCUPATION,
    ) -> BasisKet:
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        merged: dict[Mode, int] = defaultdict(int)
        for mode, count in items:
            merged[mode] += count
        for mode, count in merged.items():
            if count < 0:
                raise RepresentationError(f"Negative occupation {count} in {mode.label()}")
            if count > cap:
                raise RepresentationError(
                    f"Occupation {count} in {mode.label()} exceeds the cap of {cap}"
                )
        canonical = tuple(sorted(((m, c) for m, c in merged.items() if c), key=_mode_key))
        return cls(spin, canonical)

    def count(self, mode: Mode) -> int:
        for m, c in self.occupations:
            if m == mode:
                return c
        return 0

    def as_dict(self) -> dict[Mode, int]:
        return dict(self.occupations)

    def modes(self) -> Iterator[Mode]:
        return (m for m, _ in self.occupations)

    @property
    def photon_number(self) -> int:
        return sum(c for _, c in self.occupations)

    def with_spin(self, spin: Spin) -> BasisKet:
        return BasisKet(spin, self.occupations)

    def add_photon(self, mode: Mode, *, cap: int = MAX_OCCUPATION) -> tuple[BasisKet, float]:
        """Apply a creation operator; returns the new ket and its √(n+1) factor."""
        n = self.count(mode)
        if n + 1 > cap:
            raise RepresentationError(
                f"Adding a photon to {mode.label()} exceeds the occupation cap of {cap}"
            )
        occ = self.as_dict()
        occ[mode] = n + 1
        return BasisKet.of(self.spin, occ, cap=cap), math.sqrt(n + 1)

    def move_photon(self, source: Mode, target: Mode) -> BasisKet:
        """Relabel one photon from ``source`` to ``target`` (used for loss)."""
        occ = self.as_dict()
        occ[source] -= 1
        occ[target] = occ.get(target, 0) + 1
        return BasisKet.of(self.spin, occ)

    def split(
        self, predicate: Callable[[Mode], bool]
    ) -> tuple[tuple[tuple[Mode, int], ...], BasisKet]:
        """Separate occupations matching ``predicate`` from the rest."""
        selected = tuple(item for item in self.occupations if predicate(item[0]))
        rest = tuple(item for item in self.occupations if not predicate(item[0]))
        return selected, BasisKet(self.spin, rest)

    @property
    def sort_key(self) -> tuple:
        return (_SPIN_ORDER[self.spin], tuple((m.sort_key, c) for m, c in self.occupations))

    def label(self) -> str:
        body = " ".join(f"{m.label()}:{c}" for m, c in self.occupations)
        return f"|{self.spin}; {body}⟩" if body else f"|{self.spin}; ⟩"


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class PureState:
    """Normalised sparse superposition. Build with :meth:`from_terms`."""

    terms: Mapping[BasisKet, complex]

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[tuple[BasisKet, complex]],
        *,
        normalize: bool = True,
    ) -> PureState:
        acc: dict[BasisKet, complex] = defaultdict(complex)
        for ket, amp in terms:
            acc[ket] += amp
        kept = {k: complex(a) for k, a in acc.items() if abs(a) >= PRUNE_TOLERANCE}
        if not kept:
            raise RepresentationError("State has no amplitude left after pruning")
        pruned = len(acc) - len(kept)
        if pruned:
            logger.debug("Pruned %d negligible terms", pruned)
        if normalize:
            norm = math.sqrt(sum(abs(a) ** 2 for a in kept.values()))
            kept = {k: a / norm for k, a in kept.items()}
        return cls(MappingProxyType(kept))

    @classmethod
    def basis(cls, spin: Spin, occupations: Mapping[Mode, int] | None = None) -> PureState:
        return cls.from_terms([(BasisKet.of(spin, occupations or {}), 1.0)])

    def __len__(self) -> int:
        return len(self.terms)

    def items(self) -> Iterator[tuple[BasisKet, complex]]:
        return iter(self.terms.items())

    def amplitude(self, ket: BasisKet) -> complex:
        return self.terms.get(ket, 0.0j)

    @property
    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    @property
    def has_loss(self) -> bool:
        return any(m.is_loss for ket in self.terms for m in ket.modes())

    @property
    def spins(self) -> set[Spin]:
        return {ket.spin for ket in self.terms}

    def sorted_items(self) -> list[tuple[BasisKet, complex]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key)


@dataclass(frozen=True, slots=True)
class Mixture:
    """Probability-weighted list of pure states."""

    components: tuple[tuple[float, PureState], ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise RepresentationError("Mixture has no components")
        total = sum(p for p, _ in self.components)
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise RepresentationError(f"Mixture probabilities sum to {total}, expected 1")
        for p, _ in self.components:
            if not 0.0 < p <= 1.0 + NORM_TOLERANCE:
                raise RepresentationError(f"Mixture probability {p} outside (0, 1]")

    @classmethod
    def pure(cls, state: PureState) -> Mixture:
        return cls(((1.0, state),))

    @classmethod
    def from_weighted(cls, weighted: Iterable[tuple[float, PureState]]) -> Mixture:
        kept = [(p, s) for p, s in weighted if p > 0.0]
        total = sum(p for p, _ in kept)
        return cls(tuple((p / total, s) for p, s in kept))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[tuple[float, PureState]]:
        return iter(self.components)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def inner_product(a: PureState, b: PureState) -> complex:
    """⟨a|b⟩."""
    if len(a.terms) <= len(b.terms):
        return sum(
            (amp.conjugate() * b.terms.get(ket, 0.0j) for ket, amp in a.terms.items()), 0.0j
        )
    return sum(
        (a.terms.get(ket, 0.0j).conjugate() * amp for ket, amp in b.terms.items()), 0.0j
    )


def trace_loss_modes(state: PureState | Mixture) -> Mixture:
    """Trace out every loss-channel photon.

    Terms sharing a loss pattern form one component, weighted by the
    pattern's probability. A mixture is traced component by component.
    """
    if isinstance(state, Mixture):
        weighted: list[tuple[float, PureState]] = []
        for p, component in state:
            weighted.extend((p * q, s) for q, s in trace_loss_modes(component))
        return Mixture.from_weighted(weighted)

    groups: dict[tuple, list[tuple[BasisKet, complex]]] = defaultdict(list)
    for ket, amp in state.items():
        pattern, rest = ket.split(lambda m: m.is_loss)
        groups[pattern].append((rest, amp))

    weighted = []
    for pattern in sorted(groups, key=lambda pat: tuple((m.sort_key, c) for m, c in pat)):
        terms = groups[pattern]
        weight = sum(abs(a) ** 2 for _, a in terms)
        if weight < PRUNE_TOLERANCE**2:
            continue
        weighted.append((weight, PureState.from_terms(terms)))
    logger.debug("Traced loss modes into %d components", len(weighted))
    return Mixture.from_weighted(weighted)


def fidelity(state: PureState | Mixture, target: PureState) -> float:
    """Overlap fidelity with a pure target; loss modes are traced out first."""
    if target.has_loss:
        raise InvalidTargetError("Fidelity target must not contain loss-channel photons")
    if isinstance(state, PureState) and not state.has_loss:
        value = abs(inner_product(target, state)) ** 2
    else:
        mixture = trace_loss_modes(state)
        value = sum(p * abs(inner_product(target, s)) ** 2 for p, s in mixture)
    return min(1.0, max(0.0, value))


def spin_probability(state: PureState, outcome: Spin) -> float:
    return sum(abs(a) ** 2 for ket, a in state.items() if ket.spin is outcome)


def project_spin(state: PureState, outcome: Spin) -> PureState:
    """Measure the spin in its Z basis and keep ``outcome``."""
    if spin_probability(state, outcome) < PRUNE_TOLERANCE:
        raise MeasurementError(f"Spin outcome {outcome} has zero probability")
    return PureState.from_terms((ket, a) for ket, a in state.items() if ket.spin is outcome)


def tensor(a: PureState, b: PureState, vertex_offset: int) -> PureState:
    """Join two independently generated states.

    ``b`` must carry a single definite spin label, which is dropped; its
    vertex indices are shifted by ``vertex_offset``.
    """
    if len(b.spins) != 1:
        raise ConfigurationError("The second state must have a definite spin to be joined")
    shifted: list[tuple[tuple[tuple[Mode, int], ...], complex]] = []
    for ket, amp in b.items():
        occ = []
        for mode, count in ket.occupations:
            if isinstance(mode, ModeAddress):
                mode = ModeAddress(
                    mode.vertex + vertex_offset, mode.qubit, mode.time_bin, mode.channel
                )
            occ.append((mode, count))
        shifted.append((tuple(occ), amp))

    a_modes = {m for ket in a.terms for m in ket.modes()}
    b_modes = {m for occ, _ in shifted for m, _ in occ}
    clash = a_modes & b_modes
    if clash:
        labels = ", ".join(sorted(m.label() for m in clash))
        raise ConfigurationError(f"States overlap on modes {labels}; increase vertex_offset")

    return PureState.from_terms(
        (BasisKet.of(ka.spin, ka.occupations + occ), aa * ab)
        for ka, aa in a.items()
        for occ, ab in shifted
    )


def schmidt_rank(state: PureState, left_vertices: set[int], tol: float = 1e-9) -> int:
    """Schmidt rank across (spin + ``left_vertices``) | everything else."""

    def is_left(mode: Mode) -> bool:
        return isinstance(mode, ModeAddress) and mode.vertex in left_vertices

    rows: dict[tuple, int] = {}
    cols: dict[tuple, int] = {}
    entries = []
    for ket, amp in state.items():
        left, right = ket.split(is_left)
        row = rows.setdefault((ket.spin, left), len(rows))
        col = cols.setdefault(right.occupations, len(cols))
        entries.append((row, col, amp))
    matrix = np.zeros((len(rows), len(cols)), dtype=complex)
    for row, col, amp in entries:
        matrix[row, col] += amp
    singular = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(singular > tol))


def format_amplitude(amp: complex) -> str:
    return f"{amp.real:.12g}{amp.imag:+.12g}i"


def format_state(state: PureState) -> str:
    """Stable text dump, one term per line in canonical ket order."""
    return "\n".join(
        f"{format_amplitude(amp)} {ket.label()}" for ket, amp in state.sorted_items()
    )
