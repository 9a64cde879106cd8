"""Closed-form fidelities, one error mechanism at a time.

Per-qubit arguments are nested per vertex: ``values[n-1][m-1]`` for qubit
(n, m). Per-step rotation arguments follow the same layout, indexed by
sub-vertex. All results are clamped to [0, 1].
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Sequence

from src.engine.protocol import step5b_gate_sequence
from src.engine.spin_gates import epsilon_minus, epsilon_plus
from src.shared.models import (
    ErrorModel,
    GateLabel,
    InitialSign,
    Mechanism,
    ProtocolConfig,
    SpinInit,
    Step5bMode,
    TimeBin,
)

Nested = Sequence[Sequence[float]]


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def _check_probabilities(name: str, values: Nested) -> None:
    for row in values:
        for value in row:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {value}")


def _check_shape(a: Nested, b: Nested) -> None:
    if [len(row) for row in a] != [len(row) for row in b]:
        raise ValueError("Early and late parameter layouts differ")


# ---------------------------------------------------------------------------
# Spin rotations
# ---------------------------------------------------------------------------


def fidelity_spin_prep(f_s: float, dy: float = 0.0, dz: float = 0.0) -> float:
    """Imperfect initialisation (weight f_s on the intended state) plus a faulty step 1b."""
    if not 0.0 <= f_s <= 1.0:
        raise ValueError(f"Spin initialisation fidelity must be within [0, 1], got {f_s}")
    return _clamp(0.5 * ((2 * f_s - 1) * math.cos(dy) * math.cos(dz) + 1))


def _flip_product(dy: Nested, dz: Nested) -> float:
    _check_shape(dy, dz)
    total = 1.0
    for dy_n, dz_n in zip(dy, dz):
        total *= math.cos(sum(dz_n) / 2) ** 2
        for angle in dy_n:
            total *= math.cos(angle / 2) ** 2
    return total


def fidelity_step3_flip(dy: Nested, dz: Nested) -> float:
    """Flip errors of step 3, one (dy, dz) per sub-vertex."""
    return _clamp(_flip_product(dy, dz))


def fidelity_step5a(dy: Nested, dz: Nested) -> float:
    """Flip errors between sub-vertices; each vertex with J blocks has J−1 entries."""
    return _clamp(_flip_product(dy, dz))


def step5b_recursion(
    dy: Sequence[float], dz: Sequence[float], gates: Sequence[GateLabel]
) -> complex:
    """f_a = e^{iΔz_a/2}(ε_a f_{a−1} + ε'_a f*_{a−1}), f_0 = 1.

    A Hadamard round uses (ε₊, ε₋), an inverse Hadamard round (ε₋, ε₊).
    """
    if not len(dy) == len(dz) == len(gates):
        raise ValueError("Need one (dy, dz) pair per 5b gate")
    f = 1.0 + 0.0j
    for a_dy, a_dz, gate in zip(dy, dz, gates):
        ep, em = epsilon_plus(a_dy), epsilon_minus(a_dy)
        first, second = (ep, em) if gate is GateLabel.HADAMARD else (em, ep)
        f = cmath.exp(0.5j * a_dz) * (first * f + second * f.conjugate())
    return f


def fidelity_step5b(
    dy: Sequence[float],
    dz: Sequence[float],
    gates: Sequence[GateLabel] | None = None,
) -> float:
    """Errors on the vertex-closing Hadamards; defaults to the alternating plus sequence."""
    if gates is None:
        gates = step5b_gate_sequence(len(dy), Step5bMode.ALTERNATING, InitialSign.PLUS)
    f = step5b_recursion(dy, dz, gates)
    return _clamp(abs((f + f.conjugate()) / 2 ** (len(gates) + 1)) ** 2)


# ---------------------------------------------------------------------------
# Emission and loss
# ---------------------------------------------------------------------------


def _branch_product(early_branch: Nested, late_branch: Nested) -> float:
    """∏_n [½(∏_m √a_E + ∏_m √a_L)]² over the two time-bin branches of each vertex."""
    _check_shape(early_branch, late_branch)
    total = 1.0
    for e_n, l_n in zip(early_branch, late_branch):
        e = math.prod(math.sqrt(a) for a in e_n)
        late = math.prod(math.sqrt(a) for a in l_n)
        total *= (0.5 * (e + late)) ** 2
    return _clamp(total)


def fidelity_excitation(p_gamma: Nested, p_gamma_late: Nested | None = None) -> float:
    """Imperfect π-pulse: the photon is emitted with probability p_gamma."""
    late = p_gamma if p_gamma_late is None else p_gamma_late
    _check_probabilities("p_gamma", p_gamma)
    _check_probabilities("p_gamma", late)
    return _branch_product(p_gamma, late)


def fidelity_off_resonant(p_up: Nested, p_up_late: Nested | None = None) -> float:
    """Detuned excitation of |↑⟩.

    The early branch leaves the spin in |↑⟩ during the late pulses and vice
    versa, so the early branch carries the late-bin factors.
    """
    late = p_up if p_up_late is None else p_up_late
    _check_probabilities("p_up", p_up)
    _check_probabilities("p_up", late)
    return _branch_product(
        [[1.0 - p for p in row] for row in late],
        [[1.0 - p for p in row] for row in p_up],
    )


def fidelity_cyclicity(p_dd: Nested, p_dd_late: Nested | None = None) -> float:
    """Finite cyclicity: the excited state returns to |↓⟩ with probability p_dd."""
    late = p_dd if p_dd_late is None else p_dd_late
    _check_probabilities("p_dd", p_dd)
    _check_probabilities("p_dd", late)
    return _branch_product(p_dd, late)


def fidelity_loss(q_early: Nested, q_late: Nested | None = None) -> float:
    """Photon survival q = 1 − p_loss per qubit and bin."""
    late = q_early if q_late is None else q_late
    _check_probabilities("q", q_early)
    _check_probabilities("q", late)
    return _branch_product(q_early, late)


def cyclicity_from_purcell(purcell: float) -> float:
    """Return probability C = F_P / (F_P + 1) of a Purcell-enhanced transition."""
    if purcell < 0:
        raise ValueError(f"Purcell factor must be >= 0, got {purcell}")
    return purcell / (purcell + 1.0)


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------


def standard_fusion_success(eta: float) -> float:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be within [0, 1], got {eta}")
    return 0.5 * eta**2


def boosted_fusion_success(m: int, eta: float) -> float:
    """(1 − 2^−m)·η^{2m}: up to m attempts, all 2m photons must survive."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be within [0, 1], got {eta}")
    return _clamp((1.0 - 2.0**-m) * eta ** (2 * m))


def optimal_m(eta: float, m_max: int = 50) -> int:
    """Redundancy maximising the boosted success rate; ties go to the smaller m."""
    best_m, best = 1, boosted_fusion_success(1, eta)
    for m in range(2, m_max + 1):
        value = boosted_fusion_success(m, eta)
        if value > best:
            best_m, best = m, value
    return best_m


# ---------------------------------------------------------------------------
# Dispatch from an error model
# ---------------------------------------------------------------------------


def _per_qubit(config: ProtocolConfig, lookup, time_bin: TimeBin) -> list[list[float]]:
    return [
        [lookup(n, m, time_bin) for m in range(1, size + 1)]
        for n, size in enumerate(config.vertex_sizes, start=1)
    ]


def closed_form_fidelity(
    mechanism: Mechanism, config: ProtocolConfig, errors: ErrorModel
) -> float:
    """Closed form for ``mechanism`` with every other mechanism taken as ideal."""
    vertices = range(1, config.n_vertices + 1)
    match mechanism:
        case Mechanism.SPIN_PREP:
            f_s = 1.0 if config.spin_init is SpinInit.HERALDED else errors.spin_init_fidelity
            return fidelity_spin_prep(f_s, errors.step1b.dy, errors.step1b.dz)
        case Mechanism.STEP3:
            errs = [
                [errors.step3_error(n, j) for j in range(1, len(config.blocks[n - 1]) + 1)]
                for n in vertices
            ]
            return fidelity_step3_flip(
                [[e.dy for e in r] for r in errs], [[e.dz for e in r] for r in errs]
            )
        case Mechanism.STEP5A:
            errs = [
                [errors.step5a_error(n, j) for j in range(1, len(config.blocks[n - 1]))]
                for n in vertices
            ]
            return fidelity_step5a(
                [[e.dy for e in r] for r in errs], [[e.dz for e in r] for r in errs]
            )
        case Mechanism.STEP5B:
            errs = [errors.step5b_error(n) for n in vertices]
            gates = step5b_gate_sequence(
                config.n_vertices, config.step5b_mode, config.initial_sign
            )
            return fidelity_step5b([e.dy for e in errs], [e.dz for e in errs], gates)
        case Mechanism.EXCITATION:
            return fidelity_excitation(
                _per_qubit(config, errors.excitation, TimeBin.EARLY),
                _per_qubit(config, errors.excitation, TimeBin.LATE),
            )
        case Mechanism.OFF_RESONANT:
            return fidelity_off_resonant(
                _per_qubit(config, errors.off_resonant, TimeBin.EARLY),
                _per_qubit(config, errors.off_resonant, TimeBin.LATE),
            )
        case Mechanism.CYCLICITY:
            return fidelity_cyclicity(
                _per_qubit(config, errors.cyclicity, TimeBin.EARLY),
                _per_qubit(config, errors.cyclicity, TimeBin.LATE),
            )
        case Mechanism.LOSS:
            early = _per_qubit(config, errors.loss, TimeBin.EARLY)
            late = _per_qubit(config, errors.loss, TimeBin.LATE)
            return fidelity_loss(
                [[1.0 - p for p in row] for row in early],
                [[1.0 - p for p in row] for row in late],
            )
    raise ValueError(f"No generation-fidelity closed form for mechanism {mechanism}")


def closed_form_for_errors(config: ProtocolConfig, errors: ErrorModel) -> float | None:
    """Closed form when at most one mechanism is active, otherwise None."""
    active = errors.active_mechanisms()
    if config.spin_init is SpinInit.HERALDED and errors.step1b.is_ideal:
        active.discard(Mechanism.SPIN_PREP)
    if not active:
        return 1.0
    if len(active) > 1:
        return None
    return closed_form_fidelity(active.pop(), config, errors)
