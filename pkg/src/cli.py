from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import TextIO

import yaml
from pydantic import ValidationError

from src.shared.config import SimConfig, SimSettings, load_config
from src.shared.errors import ConfigurationError, MeasurementError, RepresentationError
from src.shared.models import OutputFormat

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SELF_CHECK = 1
EXIT_USAGE = 2


@contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(Path(path).expanduser(), "w", newline="") as f:
        yield f


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(config: SimConfig, args: argparse.Namespace) -> int:
    from src.analysis.formulas import closed_form_for_errors
    from src.analysis.targets import TargetSpec, build_target_state
    from src.engine.fock import fidelity, format_amplitude, format_state
    from src.engine.protocol import run_protocol

    mixture = run_protocol(config.protocol, config.errors)
    target = build_target_state(TargetSpec.from_config(config.protocol))
    value = fidelity(mixture, target)
    closed = closed_form_for_errors(config.protocol, config.errors)
    logger.info("Generated %d vertices, fidelity %.12g", config.protocol.n_vertices, value)

    with _output(args.out) as out:
        if args.format is OutputFormat.JSON:
            payload = {
                "fidelity": value,
                "closed_form": closed,
                "components": [
                    {
                        "weight": weight,
                        "terms": [
                            {"ket": ket.label(), "amplitude": format_amplitude(amp)}
                            for ket, amp in state.sorted_items()
                        ],
                    }
                    for weight, state in mixture
                ],
            }
            json.dump(payload, out, indent=2, ensure_ascii=False)
            out.write("\n")
        else:
            out.write(f"# fidelity: {value:.12g}\n")
            if closed is not None:
                out.write(f"# closed_form: {closed:.12g}\n")
            for i, (weight, state) in enumerate(mixture, start=1):
                out.write(f"# component {i} weight {weight:.12g}\n")
                out.write(format_state(state) + "\n")
    return EXIT_OK


def cmd_sweep(config: SimConfig, args: argparse.Namespace) -> int:
    from src.analysis.sweeps import result_records, run_sweep, write_rows

    if config.sweep is None:
        raise ConfigurationError("The config has no sweep section")
    update: dict = {}
    if args.closed_form_only:
        update["closed_form_only"] = True
    if args.workers is not None:
        update["workers"] = args.workers
    if args.trials is not None:
        update["trials"] = args.trials
    if args.seed is not None:
        update["seed"] = args.seed
    spec = config.sweep.model_copy(update=update)

    results = run_sweep(spec)
    out_path = args.out or (str(spec.output) if spec.output else None)
    fmt = args.format or spec.format
    with _output(out_path) as out:
        write_rows(result_records(results), out, fmt)
    failed = [r for r in results if not r.passed]
    for r in failed:
        logger.error("Self-check failed at %s: |diff| = %.3e", r.parameters, r.difference)
    return EXIT_SELF_CHECK if failed else EXIT_OK


def cmd_fusion(config: SimConfig, args: argparse.Namespace) -> int:
    from src.analysis.formulas import boosted_fusion_success
    from src.fusion.boost import binomial_stderr, boosted_fusion_rate, self_check_tolerance
    from src.fusion.scenarios import run_scenario

    if config.fusion is None:
        raise ConfigurationError("The config has no fusion section")
    report = run_scenario(config.fusion)
    payload = {"scenario": config.fusion.name, **report.to_dict()}

    status = EXIT_OK
    if config.boost is not None:
        boost = config.boost
        trials = args.trials or boost.trials
        seed = boost.seed if args.seed is None else args.seed
        closed = boosted_fusion_success(boost.m, boost.eta)
        rate = boosted_fusion_rate(boost.m, boost.eta, trials, seed)
        passed = abs(rate - closed) < self_check_tolerance(trials)
        payload["boosted"] = {
            "m": boost.m,
            "eta": boost.eta,
            "trials": trials,
            "seed": seed,
            "closed_form": closed,
            "monte_carlo": rate,
            "stderr": binomial_stderr(rate, trials),
            "passed": passed,
        }
        if not passed:
            logger.error("Boosted fusion rate %.6f disagrees with %.6f", rate, closed)
            status = EXIT_SELF_CHECK

    with _output(args.out) as out:
        json.dump(payload, out, indent=2)
        out.write("\n")
    return status


def cmd_boost_scan(config: SimConfig | None, args: argparse.Namespace) -> int:
    from src.analysis.sweeps import boost_records, boost_scan, write_rows
    from src.fusion.boost import boosted_fusion_records
    from src.shared.config import BoostSection

    boost = (config.boost if config else None) or BoostSection()
    etas = args.eta or boost.etas
    m_max = args.m_max or boost.m_max
    trials = args.trials or boost.trials
    seed = boost.seed if args.seed is None else args.seed

    rows = boost_scan(etas, m_max, trials, seed, closed_form_only=args.closed_form_only)
    with _output(args.out) as out:
        write_rows(boost_records(rows), out, args.format or OutputFormat.CSV)
    if args.records:
        record_trials = args.records_trials or trials
        with _output(args.records) as out:
            for row in rows:
                for record in boosted_fusion_records(row.m, row.eta, record_trials, seed):
                    out.write(record.model_dump_json() + "\n")

    failed = [row for row in rows if not row.passed]
    for row in failed:
        logger.error(
            "Monte Carlo off at eta=%s m=%d: %.6f vs %.6f",
            row.eta,
            row.m,
            row.monte_carlo,
            row.closed_form,
        )
    return EXIT_SELF_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resource-state-sim",
        description="Simulate redundantly encoded photonic resource states",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required, help="YAML config document")
        p.add_argument("--out", default=None, help="Output file (default: stdout)")
        p.add_argument("--format", type=OutputFormat, choices=list(OutputFormat), default=None)

    # Generate
    generate = sub.add_parser("generate", help="Run the protocol and dump the state")
    common(generate)

    # Sweep
    sweep = sub.add_parser("sweep", help="Closed form vs simulation over a parameter grid")
    common(sweep)
    sweep.add_argument("--closed-form-only", action="store_true")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--trials", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)

    # Fusion
    fusion = sub.add_parser("fusion", help="Fuse two generated states and classify detections")
    common(fusion)
    fusion.add_argument("--trials", type=int, default=None)
    fusion.add_argument("--seed", type=int, default=None)

    # Boosted-fusion scan
    scan = sub.add_parser("boost-scan", help="Boosted fusion success over eta and m")
    common(scan, config_required=False)
    scan.add_argument("--eta", type=float, nargs="+", default=None)
    scan.add_argument("--m-max", type=int, default=None)
    scan.add_argument("--trials", type=int, default=None)
    scan.add_argument("--seed", type=int, default=None)
    scan.add_argument("--closed-form-only", action="store_true")
    scan.add_argument("--records", default=None, help="Write per-trial JSON lines here")
    scan.add_argument(
        "--records-trials", type=int, default=None, help="Trials per grid point in --records"
    )

    return parser


def run(argv: list[str] | None = None) -> int:
    settings = SimSettings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        for name in ("trials", "seed", "m_max", "workers"):
            value = getattr(args, name, None)
            if value is not None and value < (0 if name == "seed" else 1):
                raise ConfigurationError(f"--{name.replace('_', '-')} is out of range: {value}")
        config = load_config(args.config) if args.config else None

        if args.command == "generate":
            return cmd_generate(config, args)
        elif args.command == "sweep":
            return cmd_sweep(config, args)
        elif args.command == "fusion":
            return cmd_fusion(config, args)
        elif args.command == "boost-scan":
            return cmd_boost_scan(config, args)
    except (ConfigurationError, ValidationError, yaml.YAMLError, OSError, ValueError) as exc:
        logger.error("%s", str(exc).splitlines()[0] if str(exc) else type(exc).__name__)
        return EXIT_USAGE
    except (RepresentationError, MeasurementError) as exc:
        logger.error("Simulation failed: %s", exc)
        return EXIT_USAGE
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())
