from __future__ import annotations

import math
from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from src.shared.errors import ConfigurationError


class Spin(StrEnum):
    DOWN = "down"
    UP = "up"


class TimeBin(StrEnum):
    EARLY = "early"
    LATE = "late"


class Channel(StrEnum):
    RESONANT_H = "resonant_H"
    DETUNED_H = "detuned_H"
    ORTHOGONAL_V = "orthogonal_V"
    LOSS = "loss"


class Port(StrEnum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class GateLabel(StrEnum):
    HADAMARD = "hadamard"
    INVERSE_HADAMARD = "inverse_hadamard"
    FLIP = "flip"
    Z_PHASE = "z_phase"


class Step5bMode(StrEnum):
    CONSISTENT = "consistent"
    ALTERNATING = "alternating"


class InitialSign(StrEnum):
    PLUS = "plus"
    MINUS = "minus"


class SpinInit(StrEnum):
    MIXED = "mixed"
    HERALDED = "heralded"


class Mechanism(StrEnum):
    SPIN_PREP = "spin_prep"
    STEP3 = "step3"
    STEP5A = "step5a"
    STEP5B = "step5b"
    EXCITATION = "excitation"
    OFF_RESONANT = "off_resonant"
    CYCLICITY = "cyclicity"
    LOSS = "loss"
    BOOST = "boost"


class Classification(StrEnum):
    SUCCESS_AC_BD = "success_AC_BD"
    SUCCESS_AD_BC = "success_AD_BC"
    # Two photons from one side only: entangles the step-3 error states
    SUCCESS_FLIP_ERROR = "success_flip_error"
    FAILURE_SEPARABLE = "failure_separable"
    FAILURE_ERROR_HERALDED = "failure_error_heralded"
    AMBIGUOUS = "ambiguous"
    NO_ENTANGLEMENT_ATTEMPTED = "no_entanglement_attempted"

    @property
    def is_success(self) -> bool:
        return self in (
            Classification.SUCCESS_AC_BD,
            Classification.SUCCESS_AD_BC,
            Classification.SUCCESS_FLIP_ERROR,
        )


class BoostClass(StrEnum):
    SUCCESS = "success"
    FAILURE_LOSS = "failure_loss"
    FAILURE_EXHAUSTED = "failure_exhausted"


class Layout(StrEnum):
    CHAIN = "chain"
    GHZ = "ghz"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


# ---------------------------------------------------------------------------
# Protocol configuration
# ---------------------------------------------------------------------------


class ProtocolConfig(BaseModel):
    """Shape of one generation run.

    ``blocks[n-1]`` lists the sub-vertex sizes M_i of vertex n, so the vertex
    is encoded on ``sum(blocks[n-1])`` photonic qubits.
    """

    model_config = ConfigDict(frozen=True)

    blocks: list[list[int]]
    step5b_mode: Step5bMode = Step5bMode.ALTERNATING
    initial_sign: InitialSign = InitialSign.PLUS
    spin_init: SpinInit = SpinInit.MIXED

    @model_validator(mode="before")
    @classmethod
    def expand_uniform_shape(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "blocks" in data:
            return data
        data = dict(data)
        vertices = int(data.pop("vertices", 1))
        qubits = int(data.pop("qubits_per_vertex", 1))
        sub_vertices = int(data.pop("sub_vertices", 1))
        data["blocks"] = _uniform_blocks(vertices, qubits, sub_vertices)
        return data

    @field_validator("blocks")
    @classmethod
    def validate_blocks(cls, v: list[list[int]]) -> list[list[int]]:
        if not v:
            raise ValueError("At least one vertex is required (N >= 1)")
        for n, sizes in enumerate(v, start=1):
            if not sizes:
                raise ValueError(f"Vertex {n} has no sub-vertices")
            if any(size < 1 for size in sizes):
                raise ValueError(f"Vertex {n} has a sub-vertex with fewer than 1 qubit: {sizes}")
        return v

    @classmethod
    def uniform(
        cls,
        vertices: int,
        qubits_per_vertex: int = 1,
        sub_vertices: int = 1,
        **kwargs: Any,
    ) -> ProtocolConfig:
        return cls(blocks=_uniform_blocks(vertices, qubits_per_vertex, sub_vertices), **kwargs)

    @property
    def n_vertices(self) -> int:
        return len(self.blocks)

    @property
    def vertex_sizes(self) -> list[int]:
        return [sum(sizes) for sizes in self.blocks]

    @property
    def total_photons(self) -> int:
        return sum(self.vertex_sizes)

    def block_qubits(self, n: int) -> list[list[int]]:
        """Qubit indices m of each sub-vertex of vertex n, in generation order."""
        out: list[list[int]] = []
        first = 1
        for size in self.blocks[n - 1]:
            out.append(list(range(first, first + size)))
            first += size
        return out


def _uniform_blocks(vertices: int, qubits: int, sub_vertices: int) -> list[list[int]]:
    if vertices < 1 or qubits < 1 or sub_vertices < 1:
        raise ValueError(
            f"Invalid uniform shape: vertices={vertices}, qubits={qubits}, "
            f"sub_vertices={sub_vertices}"
        )
    if qubits % sub_vertices:
        raise ValueError(f"{qubits} qubits cannot be split into {sub_vertices} equal sub-vertices")
    return [[qubits // sub_vertices] * sub_vertices for _ in range(vertices)]


# ---------------------------------------------------------------------------
# Error model
# ---------------------------------------------------------------------------


class RotationError(BaseModel):
    model_config = ConfigDict(frozen=True)

    dy: float = 0.0
    dz: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def accept_pair(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            if len(data) != 2:
                raise ValueError(f"Rotation error needs two angles (dy, dz), got {data!r}")
            return {"dy": data[0], "dz": data[1]}
        return data

    @property
    def is_ideal(self) -> bool:
        return self.dy == 0.0 and self.dz == 0.0


Probability = float
BinKey = tuple[int, int, TimeBin]


def _check_probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ValueError(f"{name} must be within [0, 1], got {value}")
    return value


class ErrorModel(BaseModel):
    """Per-step, per-qubit error parameters.

    Scalar fields apply everywhere; the ``*_overrides`` maps replace them at
    individual indices. Defaults describe the ideal protocol.
    """

    model_config = ConfigDict(frozen=True)

    spin_init_fidelity: float = Field(1.0, ge=0.0, le=1.0)
    step1b: RotationError = RotationError()

    step3: RotationError = RotationError()
    step3_overrides: dict[tuple[int, int], RotationError] = Field(default_factory=dict)
    step5a: RotationError = RotationError()
    step5a_overrides: dict[tuple[int, int], RotationError] = Field(default_factory=dict)
    step5b: RotationError = RotationError()
    step5b_overrides: dict[int, RotationError] = Field(default_factory=dict)

    excitation_prob: Probability = Field(1.0, ge=0.0, le=1.0)
    excitation_overrides: dict[BinKey, Probability] = Field(default_factory=dict)
    off_resonant_prob: Probability = Field(0.0, ge=0.0, le=1.0)
    off_resonant_overrides: dict[BinKey, Probability] = Field(default_factory=dict)
    cyclicity_return_prob: Probability = Field(1.0, ge=0.0, le=1.0)
    cyclicity_overrides: dict[BinKey, Probability] = Field(default_factory=dict)

    loss_prob_early: Probability = Field(0.0, ge=0.0, le=1.0)
    loss_early_overrides: dict[tuple[int, int], Probability] = Field(default_factory=dict)
    loss_prob_late: Probability = Field(0.0, ge=0.0, le=1.0)
    loss_late_overrides: dict[tuple[int, int], Probability] = Field(default_factory=dict)

    @field_validator(
        "excitation_overrides",
        "off_resonant_overrides",
        "cyclicity_overrides",
        "loss_early_overrides",
        "loss_late_overrides",
    )
    @classmethod
    def validate_override_probabilities(cls, v: dict, info: ValidationInfo) -> dict:
        for key, value in v.items():
            _check_probability(f"{info.field_name}[{key}]", value)
        return v

    # -- lookups -------------------------------------------------------------

    def step3_error(self, n: int, j: int) -> RotationError:
        return self.step3_overrides.get((n, j), self.step3)

    def step5a_error(self, n: int, j: int) -> RotationError:
        return self.step5a_overrides.get((n, j), self.step5a)

    def step5b_error(self, n: int) -> RotationError:
        return self.step5b_overrides.get(n, self.step5b)

    def excitation(self, n: int, m: int, time_bin: TimeBin) -> float:
        return self.excitation_overrides.get((n, m, time_bin), self.excitation_prob)

    def off_resonant(self, n: int, m: int, time_bin: TimeBin) -> float:
        return self.off_resonant_overrides.get((n, m, time_bin), self.off_resonant_prob)

    def cyclicity(self, n: int, m: int, time_bin: TimeBin) -> float:
        return self.cyclicity_overrides.get((n, m, time_bin), self.cyclicity_return_prob)

    def loss(self, n: int, m: int, time_bin: TimeBin) -> float:
        if time_bin is TimeBin.EARLY:
            return self.loss_early_overrides.get((n, m), self.loss_prob_early)
        return self.loss_late_overrides.get((n, m), self.loss_prob_late)

    # -- inspection ----------------------------------------------------------

    @property
    def has_loss(self) -> bool:
        return (
            self.loss_prob_early > 0.0
            or self.loss_prob_late > 0.0
            or any(p > 0.0 for p in self.loss_early_overrides.values())
            or any(p > 0.0 for p in self.loss_late_overrides.values())
        )

    def active_mechanisms(self) -> set[Mechanism]:
        active: set[Mechanism] = set()
        if self.spin_init_fidelity != 1.0 or not self.step1b.is_ideal:
            active.add(Mechanism.SPIN_PREP)
        if not self.step3.is_ideal or any(not e.is_ideal for e in self.step3_overrides.values()):
            active.add(Mechanism.STEP3)
        if not self.step5a.is_ideal or any(not e.is_ideal for e in self.step5a_overrides.values()):
            active.add(Mechanism.STEP5A)
        if not self.step5b.is_ideal or any(not e.is_ideal for e in self.step5b_overrides.values()):
            active.add(Mechanism.STEP5B)
        if self.excitation_prob != 1.0 or any(p != 1.0 for p in self.excitation_overrides.values()):
            active.add(Mechanism.EXCITATION)
        if self.off_resonant_prob != 0.0 or any(
            p != 0.0 for p in self.off_resonant_overrides.values()
        ):
            active.add(Mechanism.OFF_RESONANT)
        if self.cyclicity_return_prob != 1.0 or any(
            p != 1.0 for p in self.cyclicity_overrides.values()
        ):
            active.add(Mechanism.CYCLICITY)
        if self.has_loss:
            active.add(Mechanism.LOSS)
        return active

    def validate_against(self, config: ProtocolConfig) -> None:
        """Raise ConfigurationError if an override points outside the configuration."""
        n_vertices = config.n_vertices

        def vertex_ok(n: int) -> bool:
            return 1 <= n <= n_vertices

        for n, j in self.step3_overrides:
            if not vertex_ok(n) or not 1 <= j <= len(config.blocks[n - 1]):
                raise ConfigurationError(f"step3[{n},{j}] does not match the configuration")
        for n, j in self.step5a_overrides:
            if not vertex_ok(n) or not 1 <= j < len(config.blocks[n - 1]):
                raise ConfigurationError(f"step5a[{n},{j}] does not match the configuration")
        for n in self.step5b_overrides:
            if not vertex_ok(n):
                raise ConfigurationError(f"step5b[{n}] does not match the configuration")
        qubit_keys = [
            *((n, m) for n, m, _ in self.excitation_overrides),
            *((n, m) for n, m, _ in self.off_resonant_overrides),
            *((n, m) for n, m, _ in self.cyclicity_overrides),
            *self.loss_early_overrides,
            *self.loss_late_overrides,
        ]
        for n, m in qubit_keys:
            if not vertex_ok(n) or not 1 <= m <= config.vertex_sizes[n - 1]:
                raise ConfigurationError(f"Qubit ({n},{m}) does not exist in the configuration")


# ---------------------------------------------------------------------------
# Sweeps and results
# ---------------------------------------------------------------------------

SIZE_AXES = frozenset({"vertices", "qubits", "sub_vertices", "photons"})
PROBABILITY_AXES = frozenset({"f_s", "p_gamma", "p_up", "p_dd", "p_loss", "p_loss_late", "eta"})

MECHANISM_AXES: dict[Mechanism, frozenset[str]] = {
    Mechanism.SPIN_PREP: frozenset({"f_s", "dy", "dz"}),
    Mechanism.STEP3: frozenset({"dy", "dz"}),
    Mechanism.STEP5A: frozenset({"dy", "dz"}),
    Mechanism.STEP5B: frozenset({"dy", "dz"}),
    Mechanism.EXCITATION: frozenset({"p_gamma"}),
    Mechanism.OFF_RESONANT: frozenset({"p_up"}),
    Mechanism.CYCLICITY: frozenset({"p_dd", "purcell"}),
    Mechanism.LOSS: frozenset({"p_loss", "p_loss_late"}),
    Mechanism.BOOST: frozenset({"m", "eta"}),
}


class SweepSpec(BaseModel):
    mechanism: Mechanism
    grid: dict[str, list[float]]
    protocol: ProtocolConfig = Field(default_factory=lambda: ProtocolConfig(blocks=[[1]]))
    layout: Layout = Layout.CHAIN
    closed_form_only: bool = False
    trials: int = Field(100_000, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)
    output: Path | None = None
    format: OutputFormat = OutputFormat.CSV

    @model_validator(mode="after")
    def validate_grid(self) -> SweepSpec:
        if not self.grid:
            raise ValueError("Sweep grid is empty")
        allowed = MECHANISM_AXES[self.mechanism]
        if self.mechanism is not Mechanism.BOOST:
            allowed = allowed | SIZE_AXES
        for axis, values in self.grid.items():
            if axis not in allowed:
                raise ValueError(
                    f"Axis {axis!r} is not valid for mechanism {self.mechanism}; "
                    f"expected one of {sorted(allowed)}"
                )
            if not values:
                raise ValueError(f"Axis {axis!r} has no values")
            for value in values:
                if axis in PROBABILITY_AXES:
                    _check_probability(axis, value)
                elif axis in SIZE_AXES or axis == "m":
                    if value < 1 or value != int(value):
                        raise ValueError(f"Axis {axis!r} needs integers >= 1, got {value}")
                elif axis == "purcell" and value < 0:
                    raise ValueError(f"Purcell factor must be >= 0, got {value}")
        if self.mechanism is Mechanism.BOOST and not {"m", "eta"} <= set(self.grid):
            raise ValueError("Boost sweeps need both 'm' and 'eta' axes")
        return self


class FidelityResult(BaseModel):
    """One evaluated grid point: closed form, optional simulation, and the check."""

    mechanism: Mechanism
    parameters: dict[str, float]
    value: float = Field(ge=0.0, le=1.0)
    simulated: float | None = None
    tolerance: float = 1e-9

    @property
    def difference(self) -> float | None:
        if self.simulated is None:
            return None
        return abs(self.value - self.simulated)

    @property
    def passed(self) -> bool:
        diff = self.difference
        return diff is None or diff < self.tolerance


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------


class FusionContext(BaseModel):
    """What the experimenter knows about the inputs when reading detector patterns."""

    model_config = ConfigDict(frozen=True)

    herald_single_photon: bool = False
    both_sided_flip_error: bool = False
    orthogonal_emission_possible: bool = False


class BoostOutcome(BaseModel):
    trial: int
    m: int
    eta: float
    attempts_used: int
    lost_photons: int
    pattern: str
    classification: BoostClass
