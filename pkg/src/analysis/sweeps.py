"""Per-mechanism parameter sweeps: closed form next to full simulation.

Every grid point yields a :class:`FidelityResult`. Points are evaluated
independently (optionally in a process pool) and always reported in grid
order.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any, TextIO

from pydantic import BaseModel

from src.analysis.formulas import (
    boosted_fusion_success,
    closed_form_fidelity,
    cyclicity_from_purcell,
    optimal_m,
)
from src.analysis.targets import TargetSpec, build_target_state
from src.engine.fock import fidelity
from src.engine.protocol import run_protocol
from src.fusion.boost import binomial_stderr, boosted_fusion_rate, self_check_tolerance
from src.shared.models import (
    ErrorModel,
    FidelityResult,
    Layout,
    Mechanism,
    OutputFormat,
    ProtocolConfig,
    RotationError,
    SweepSpec,
)

logger = logging.getLogger(__name__)

MAX_SIMULATED_VERTICES = 6
MAX_SIMULATED_PHOTONS = 12
AGREEMENT_TOLERANCE = 1e-9


def expand_grid(spec: SweepSpec) -> list[dict[str, float]]:
    """Cartesian product of the grid axes; the last declared axis varies fastest."""
    axes = list(spec.grid)
    return [dict(zip(axes, values)) for values in itertools.product(*spec.grid.values())]


def config_for_point(spec: SweepSpec, point: dict[str, float]) -> ProtocolConfig:
    """Protocol for one grid point; size axes replace the base shape by a uniform one."""
    base = spec.protocol
    if not {"vertices", "qubits", "sub_vertices", "photons"} & set(point):
        return base
    vertices = int(point.get("vertices", base.n_vertices))
    qubits = int(point.get("qubits", base.vertex_sizes[0]))
    if "photons" in point:
        photons = int(point["photons"])
        vertices, qubits = (photons, 1) if spec.layout is Layout.CHAIN else (1, photons)
    base_sub = len(base.blocks[0])
    sub_vertices = int(point.get("sub_vertices", base_sub if qubits % base_sub == 0 else 1))
    return ProtocolConfig.uniform(
        vertices,
        qubits,
        sub_vertices,
        step5b_mode=base.step5b_mode,
        initial_sign=base.initial_sign,
        spin_init=base.spin_init,
    )


def errors_for_point(mechanism: Mechanism, point: dict[str, float]) -> ErrorModel:
    rotation = RotationError(dy=point.get("dy", 0.0), dz=point.get("dz", 0.0))
    match mechanism:
        case Mechanism.SPIN_PREP:
            return ErrorModel(spin_init_fidelity=point.get("f_s", 1.0), step1b=rotation)
        case Mechanism.STEP3:
            return ErrorModel(step3=rotation)
        case Mechanism.STEP5A:
            return ErrorModel(step5a=rotation)
        case Mechanism.STEP5B:
            return ErrorModel(step5b=rotation)
        case Mechanism.EXCITATION:
            return ErrorModel(excitation_prob=point.get("p_gamma", 1.0))
        case Mechanism.OFF_RESONANT:
            return ErrorModel(off_resonant_prob=point.get("p_up", 0.0))
        case Mechanism.CYCLICITY:
            if "purcell" in point:
                return ErrorModel(cyclicity_return_prob=cyclicity_from_purcell(point["purcell"]))
            return ErrorModel(cyclicity_return_prob=point.get("p_dd", 1.0))
        case Mechanism.LOSS:
            early = point.get("p_loss", 0.0)
            return ErrorModel(loss_prob_early=early, loss_prob_late=point.get("p_loss_late", early))
    raise ValueError(f"Mechanism {mechanism} has no generation error model")


def simulated_fidelity(config: ProtocolConfig, errors: ErrorModel) -> float:
    """Full simulation, loss traced out, overlap with the ideal target."""
    target = build_target_state(TargetSpec.from_config(config))
    return fidelity(run_protocol(config, errors), target)


def can_simulate(config: ProtocolConfig) -> bool:
    return (
        config.n_vertices <= MAX_SIMULATED_VERTICES
        and config.total_photons <= MAX_SIMULATED_PHOTONS
    )


def _boost_point(spec: SweepSpec, point: dict[str, float]) -> FidelityResult:
    m, eta = int(point["m"]), point["eta"]
    simulated = None
    if not spec.closed_form_only:
        simulated = boosted_fusion_rate(m, eta, spec.trials, spec.seed)
    return FidelityResult(
        mechanism=Mechanism.BOOST,
        parameters=point,
        value=boosted_fusion_success(m, eta),
        simulated=simulated,
        tolerance=self_check_tolerance(spec.trials),
    )


def evaluate_point(spec: SweepSpec, point: dict[str, float]) -> FidelityResult:
    if spec.mechanism is Mechanism.BOOST:
        return _boost_point(spec, point)
    config = config_for_point(spec, point)
    errors = errors_for_point(spec.mechanism, point)
    value = closed_form_fidelity(spec.mechanism, config, errors)
    simulated = None
    if not spec.closed_form_only and can_simulate(config):
        simulated = simulated_fidelity(config, errors)
    return FidelityResult(
        mechanism=spec.mechanism,
        parameters=point,
        value=value,
        simulated=simulated,
        tolerance=AGREEMENT_TOLERANCE,
    )


def _evaluate(args: tuple[SweepSpec, dict[str, float]]) -> FidelityResult:
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec) -> list[FidelityResult]:
    points = expand_grid(spec)
    logger.info("Sweep %s: %d points, %d worker(s)", spec.mechanism, len(points), spec.workers)
    jobs = [(spec, point) for point in points]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(job) for job in jobs]
    failed = sum(not r.passed for r in results)
    if failed:
        logger.warning("%d of %d points disagree with the closed form", failed, len(results))
    return results


# ---------------------------------------------------------------------------
# Boosted-fusion scan
# ---------------------------------------------------------------------------


class BoostScanRow(BaseModel):
    eta: float
    m: int
    closed_form: float
    monte_carlo: float | None = None
    stderr: float | None = None
    optimal_m: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.monte_carlo is None or abs(self.monte_carlo - self.closed_form) < self.tolerance


def boost_scan(
    etas: Iterable[float],
    m_max: int,
    trials: int,
    seed: int,
    closed_form_only: bool = False,
) -> list[BoostScanRow]:
    rows = []
    for eta in etas:
        best = optimal_m(eta, m_max)
        for m in range(1, m_max + 1):
            rate = stderr = None
            if not closed_form_only:
                rate = boosted_fusion_rate(m, eta, trials, seed)
                stderr = binomial_stderr(rate, trials)
            rows.append(
                BoostScanRow(
                    eta=eta,
                    m=m,
                    closed_form=boosted_fusion_success(m, eta),
                    monte_carlo=rate,
                    stderr=stderr,
                    optimal_m=best,
                    tolerance=self_check_tolerance(trials),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def result_records(results: list[FidelityResult]) -> list[dict[str, Any]]:
    records = []
    for r in results:
        record: dict[str, Any] = {"mechanism": str(r.mechanism)}
        record.update(r.parameters)
        record["closed_form"] = r.value
        record["simulated"] = r.simulated
        record["difference"] = r.difference
        records.append(record)
    return records


def boost_records(rows: list[BoostScanRow]) -> list[dict[str, Any]]:
    return [row.model_dump(exclude={"tolerance"}) for row in rows]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_rows(records: list[dict[str, Any]], stream: TextIO, fmt: OutputFormat) -> None:
    """CSV with a header row and 12 significant digits, or a JSON array."""
    if fmt is OutputFormat.JSON:
        json.dump(records, stream, indent=2)
        stream.write("\n")
        return
    if not records:
        return
    writer = csv.writer(stream, lineterminator="\n")
    header = list(records[0])
    writer.writerow(header)
    for record in records:
        writer.writerow([_cell(record.get(key)) for key in header])
