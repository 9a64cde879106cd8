"""Amplitude-level execution of the resource-state generation protocol.

Each round n runs, per sub-vertex j: early emission block (step 2), spin
flip (step 3), late emission block (step 4), then a flip between
sub-vertices (step 5a) and finally the vertex-closing Hadamard (step 5b).
Every error branch is kept coherent in its own photon channel; only the
mixed spin initialisation produces a classical mixture.

Usage::

    config = ProtocolConfig.uniform(vertices=2, qubits_per_vertex=3)
    mixture = run_protocol(config, ErrorModel(excitation_prob=0.9))
"""

from __future__ import annotations

import logging
import math

from src.engine.fock import (
    PRUNE_TOLERANCE,
    BasisKet,
    Mixture,
    ModeAddress,
    PureState,
)
from src.engine.spin_gates import apply_spin_gate, flip_gate, gate_for
from src.shared.errors import MeasurementError, RepresentationError
from src.shared.models import (
    Channel,
    ErrorModel,
    GateLabel,
    InitialSign,
    ProtocolConfig,
    Spin,
    SpinInit,
    Step5bMode,
    TimeBin,
)

logger = logging.getLogger(__name__)

IDEAL = ErrorModel()


def preparation_gate(sign: InitialSign) -> GateLabel:
    """Step 1b gate taking |↑⟩ to |+⟩ or |−⟩."""
    return GateLabel.HADAMARD if sign is InitialSign.PLUS else GateLabel.INVERSE_HADAMARD


def step5b_gate_sequence(
    n_vertices: int, mode: Step5bMode, sign: InitialSign
) -> list[GateLabel]:
    """Gate applied at step 5b of each round, in round order."""
    h, hbar = GateLabel.HADAMARD, GateLabel.INVERSE_HADAMARD
    if mode is Step5bMode.CONSISTENT:
        return [h if sign is InitialSign.PLUS else hbar] * n_vertices
    first, second = (hbar, h) if sign is InitialSign.PLUS else (h, hbar)
    return [first if n % 2 else second for n in range(1, n_vertices + 1)]


# ---------------------------------------------------------------------------
# Emission and loss
# ---------------------------------------------------------------------------


def emit_photon(
    state: PureState, address: tuple[int, int, TimeBin], errors: ErrorModel = IDEAL
) -> PureState:
    """One excitation pulse into qubit (n, m) at the given time bin."""
    n, m, time_bin = address
    p_gamma = errors.excitation(n, m, time_bin)
    p_up = errors.off_resonant(n, m, time_bin)
    p_dd = errors.cyclicity(n, m, time_bin)

    resonant = ModeAddress(n, m, time_bin, Channel.RESONANT_H)
    detuned = ModeAddress(n, m, time_bin, Channel.DETUNED_H)
    orthogonal = ModeAddress(n, m, time_bin, Channel.ORTHOGONAL_V)

    w_emit = math.sqrt(p_dd * p_gamma)
    w_silent = math.sqrt(p_dd * (1.0 - p_gamma))
    w_flip = math.sqrt(1.0 - p_dd)
    w_dark = math.sqrt(1.0 - p_up)
    w_detuned = math.sqrt(p_up)

    terms: list[tuple[BasisKet, complex]] = []
    for ket, amp in state.items():
        if ket.spin is Spin.DOWN:
            if ket.count(resonant):
                raise RepresentationError(f"Double excitation of {resonant.label()}")
            if w_emit:
                new, factor = ket.add_photon(resonant)
                terms.append((new, amp * w_emit * factor))
            if w_silent:
                terms.append((ket, amp * w_silent))
            if w_flip:
                new, factor = ket.add_photon(orthogonal)
                terms.append((new.with_spin(Spin.UP), amp * w_flip * factor))
        else:
            if w_dark:
                terms.append((ket, amp * w_dark))
            if w_detuned:
                new, factor = ket.add_photon(detuned)
                terms.append((new, amp * w_detuned * factor))
    return PureState.from_terms(terms)


def apply_loss(state: PureState, errors: ErrorModel) -> PureState:
    """Move each photon to the loss channel of its address with its loss probability.

    Early bins use ``loss_prob_early``, late bins ``loss_prob_late``.
    """
    terms: list[tuple[BasisKet, complex]] = []
    for ket, amp in state.items():
        branches = [(ket, complex(amp))]
        for mode, count in ket.occupations:
            if not isinstance(mode, ModeAddress) or mode.is_loss:
                continue
            p = errors.loss(mode.vertex, mode.qubit, mode.time_bin)
            if p == 0.0:
                continue
            lost_mode = mode.with_channel(Channel.LOSS)
            expanded = []
            for branch_ket, branch_amp in branches:
                for lost in range(count + 1):
                    weight = math.sqrt(math.comb(count, lost) * p**lost * (1 - p) ** (count - lost))
                    if weight == 0.0:
                        continue
                    moved = branch_ket
                    for _ in range(lost):
                        moved = moved.move_photon(mode, lost_mode)
                    expanded.append((moved, branch_amp * weight))
            branches = expanded
        terms.extend(branches)
    return PureState.from_terms(terms)


# ---------------------------------------------------------------------------
# Spin initialisation
# ---------------------------------------------------------------------------

_HERALD_QUBIT = (1, 1)


def _herald_branches(errors: ErrorModel) -> list[tuple[float, PureState]]:
    """Steps 2-4 for one photonic qubit from the mixed initial spin.

    The herald photon is emitted and flipped without errors, so only F_s
    shapes the outcome statistics.
    """
    f_s = errors.spin_init_fidelity
    n, m = _HERALD_QUBIT
    branches = []
    for weight, spin in ((f_s, Spin.DOWN), (1.0 - f_s, Spin.UP)):
        if weight <= 0.0:
            continue
        state = PureState.basis(spin)
        state = emit_photon(state, (n, m, TimeBin.EARLY))
        state = apply_spin_gate(state, flip_gate())
        state = emit_photon(state, (n, m, TimeBin.LATE))
        branches.append((weight, state))
    return branches


def _click_weight(state: PureState, outcome: TimeBin) -> float:
    mode = ModeAddress(*_HERALD_QUBIT, outcome)
    return sum(abs(a) ** 2 for ket, a in state.items() if ket.count(mode))


def measurement_outcome_probabilities(errors: ErrorModel) -> dict[TimeBin, float]:
    branches = _herald_branches(errors)
    return {
        outcome: sum(w * _click_weight(s, outcome) for w, s in branches) for outcome in TimeBin
    }


def initialize_spin_by_measurement(errors: ErrorModel, outcome: TimeBin) -> PureState:
    """Herald a pure spin state by measuring one time-bin photon.

    The mixed state carries weight F_s on the bright state |↓⟩. An early
    click leaves |↓⟩, a late click |↑⟩, after a corrective flip.
    Other error mechanisms act on the resource photons only, never on the
    herald photon.
    """
    probability = measurement_outcome_probabilities(errors)[outcome]
    if probability < PRUNE_TOLERANCE:
        raise MeasurementError(f"Measurement outcome {outcome} has zero probability")

    mode = ModeAddress(*_HERALD_QUBIT, outcome)
    terms: list[tuple[BasisKet, complex]] = []
    for weight, state in _herald_branches(errors):
        if _click_weight(state, outcome) < PRUNE_TOLERANCE:
            continue
        for ket, amp in state.items():
            if ket.count(mode):
                _, rest = ket.split(lambda mo: isinstance(mo, ModeAddress))
                terms.append((rest, amp * math.sqrt(weight)))
    spin_state = apply_spin_gate(PureState.from_terms(terms), flip_gate())
    logger.debug("Heralded spin with %s click (p=%.6f)", outcome, probability)
    return spin_state


def _initial_states(config: ProtocolConfig, errors: ErrorModel) -> list[tuple[float, PureState]]:
    if config.spin_init is SpinInit.HERALDED:
        out = []
        for outcome, probability in measurement_outcome_probabilities(errors).items():
            if probability < PRUNE_TOLERANCE:
                continue
            spin_state = initialize_spin_by_measurement(errors, outcome)
            if outcome is TimeBin.EARLY:
                # |↓⟩ → |↑⟩, the target of step 1a
                spin_state = apply_spin_gate(spin_state, flip_gate())
            out.append((probability, spin_state))
        return out
    f_s = errors.spin_init_fidelity
    return [
        (w, PureState.basis(spin))
        for w, spin in ((f_s, Spin.UP), (1.0 - f_s, Spin.DOWN))
        if w > 0.0
    ]


# ---------------------------------------------------------------------------
# Full protocol
# ---------------------------------------------------------------------------


def _generate(state: PureState, config: ProtocolConfig, errors: ErrorModel) -> PureState:
    gates = step5b_gate_sequence(config.n_vertices, config.step5b_mode, config.initial_sign)
    for n in range(1, config.n_vertices + 1):
        blocks = config.block_qubits(n)
        for j, qubits in enumerate(blocks, start=1):
            for m in qubits:
                state = emit_photon(state, (n, m, TimeBin.EARLY), errors)
            err = errors.step3_error(n, j)
            state = apply_spin_gate(state, flip_gate(err.dy, err.dz))
            for m in qubits:
                state = emit_photon(state, (n, m, TimeBin.LATE), errors)
            if j < len(blocks):
                err = errors.step5a_error(n, j)
                state = apply_spin_gate(state, flip_gate(err.dy, err.dz))
        err = errors.step5b_error(n)
        state = apply_spin_gate(state, gate_for(gates[n - 1], err.dy, err.dz))
        logger.debug("Round %d/%d done, %d terms", n, config.n_vertices, len(state))
    return state


def run_protocol(config: ProtocolConfig, errors: ErrorModel = IDEAL) -> Mixture:
    """Joint spin-photon state after all N rounds.

    Loss, when present, is applied after generation and kept coherent in the
    loss channel; use ``trace_loss_modes`` to obtain the mixed state.
    """
    errors.validate_against(config)
    prep = errors.step1b
    prep_gate = gate_for(preparation_gate(config.initial_sign), prep.dy, prep.dz)
    weighted = []
    for weight, state in _initial_states(config, errors):
        state = apply_spin_gate(state, prep_gate)
        state = _generate(state, config, errors)
        if errors.has_loss:
            state = apply_loss(state, errors)
        weighted.append((weight, state))
    logger.debug(
        "Generated %d component(s) for blocks=%s mode=%s sign=%s",
        len(weighted),
        config.blocks,
        config.step5b_mode,
        config.initial_sign,
    )
    return Mixture.from_weighted(weighted)
