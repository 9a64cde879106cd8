"""Fusion experiments between two generated resource states.

A scenario names two protocol runs (left and right), the qubit of each that
enters the fusion circuit and what the experimenter knows about the inputs.
The left qubit is routed to ports (A, B), the right one to (C, D).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

from pydantic import BaseModel, Field

from src.engine.fock import PureState, project_spin, tensor
from src.engine.protocol import run_protocol
from src.fusion.circuit import FusionReport, fusion_report, to_dual_rail
from src.shared.errors import ConfigurationError
from src.shared.models import (
    ErrorModel,
    FusionContext,
    Port,
    ProtocolConfig,
    RotationError,
    Spin,
    TimeBin,
)

logger = logging.getLogger(__name__)


class FusionSide(BaseModel):
    protocol: ProtocolConfig
    errors: ErrorModel = Field(default_factory=ErrorModel)
    qubit: tuple[int, int] | None = None


class FusionScenario(BaseModel):
    name: str = "custom"
    left: FusionSide
    right: FusionSide
    context: FusionContext = Field(default_factory=FusionContext)
    discriminate_channels: bool = True
    number_resolving: bool = True
    spin_outcome: Spin = Spin.DOWN

    @property
    def left_qubit(self) -> tuple[int, int]:
        """Defaults to the first qubit of the last left vertex."""
        return self.left.qubit or (self.left.protocol.n_vertices, 1)

    @property
    def right_qubit(self) -> tuple[int, int]:
        """Right qubit in joint numbering; defaults to the first qubit of the first vertex."""
        n, m = self.right.qubit or (1, 1)
        return n + self.left.protocol.n_vertices, m


def _generated_state(side: FusionSide, outcome: Spin) -> PureState:
    mixture = run_protocol(side.protocol, side.errors)
    if len(mixture) != 1:
        raise ConfigurationError(
            "Fusion inputs must be pure: use spin_init_fidelity 1 or heralded initialisation"
        )
    (_, state), = mixture.components
    return project_spin(state, outcome)


def build_fusion_input(scenario: FusionScenario) -> PureState:
    """Joint dual-rail input of the fusion circuit, spins measured out."""
    left = _generated_state(scenario.left, scenario.spin_outcome)
    right = _generated_state(scenario.right, scenario.spin_outcome)
    joint = tensor(left, right, vertex_offset=scenario.left.protocol.n_vertices)
    joint = to_dual_rail(joint, scenario.left_qubit, (Port.A, Port.B))
    return to_dual_rail(joint, scenario.right_qubit, (Port.C, Port.D))


def run_scenario(scenario: FusionScenario) -> FusionReport:
    logger.info("Running fusion scenario %s", scenario.name)
    return fusion_report(
        build_fusion_input(scenario),
        discriminate_channels=scenario.discriminate_channels,
        number_resolving=scenario.number_resolving,
        context=scenario.context,
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_PAIR = ProtocolConfig.uniform(vertices=2)
_FLIP_FAILURE = RotationError(dy=math.pi)


def _both_bins(n: int, m: int, p: float) -> dict[tuple[int, int, TimeBin], float]:
    return {(n, m, b): p for b in TimeBin}


def ideal() -> FusionScenario:
    return FusionScenario(
        name="ideal", left=FusionSide(protocol=_PAIR), right=FusionSide(protocol=_PAIR)
    )


def step3_one_sided() -> FusionScenario:
    return FusionScenario(
        name="step3_one_sided",
        left=FusionSide(protocol=_PAIR, errors=ErrorModel(step3_overrides={(2, 1): _FLIP_FAILURE})),
        right=FusionSide(protocol=_PAIR),
    )


def step3_both_sided() -> FusionScenario:
    return FusionScenario(
        name="step3_both_sided",
        left=FusionSide(protocol=_PAIR, errors=ErrorModel(step3_overrides={(2, 1): _FLIP_FAILURE})),
        right=FusionSide(
            protocol=_PAIR, errors=ErrorModel(step3_overrides={(1, 1): _FLIP_FAILURE})
        ),
        context=FusionContext(both_sided_flip_error=True),
    )


def single_photon(p_gamma: float = 0.5) -> FusionScenario:
    """Both fused qubits emitted with probability p_gamma, from two 2-photon GHZ vertices."""
    ghz = ProtocolConfig.uniform(vertices=1, qubits_per_vertex=2)
    return FusionScenario(
        name="single_photon",
        left=FusionSide(
            protocol=ghz,
            errors=ErrorModel(excitation_overrides=_both_bins(1, 2, p_gamma)),
            qubit=(1, 2),
        ),
        right=FusionSide(
            protocol=ghz,
            errors=ErrorModel(excitation_overrides=_both_bins(1, 2, p_gamma)),
            qubit=(1, 2),
        ),
        context=FusionContext(herald_single_photon=True),
    )


def off_resonant_both(p_up: float = 0.3) -> FusionScenario:
    return FusionScenario(
        name="off_resonant_both",
        left=FusionSide(
            protocol=_PAIR, errors=ErrorModel(off_resonant_overrides=_both_bins(2, 1, p_up))
        ),
        right=FusionSide(
            protocol=_PAIR, errors=ErrorModel(off_resonant_overrides=_both_bins(1, 1, p_up))
        ),
    )


def cyclicity(p_dd: float = 0.9, discriminate_channels: bool = False) -> FusionScenario:
    return FusionScenario(
        name="cyclicity",
        left=FusionSide(
            protocol=_PAIR, errors=ErrorModel(cyclicity_overrides=_both_bins(2, 1, p_dd))
        ),
        right=FusionSide(
            protocol=_PAIR, errors=ErrorModel(cyclicity_overrides=_both_bins(1, 1, p_dd))
        ),
        context=FusionContext(orthogonal_emission_possible=True),
        discriminate_channels=discriminate_channels,
    )


PRESETS: dict[str, Callable[[], FusionScenario]] = {
    "ideal": ideal,
    "step3_one_sided": step3_one_sided,
    "step3_both_sided": step3_both_sided,
    "single_photon": single_photon,
    "off_resonant_both": off_resonant_both,
    "cyclicity": cyclicity,
}


def preset(name: str) -> FusionScenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(
            f"Unknown fusion preset {name!r}; expected one of {sorted(PRESETS)}"
        ) from None
