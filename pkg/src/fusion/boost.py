"""Monte Carlo estimate of boosted (repeat-until-success) fusion.

Each vertex offers m redundantly encoding photons per side. Attempt a uses
the a-th photon pair and succeeds with probability ½ when both photons
arrive. Losing any of the 2m photons collapses the GHZ encoding, so a
success only counts when no photon was lost.

Trial k reads row ``k % block_size`` of a ``(block_size, 3m)`` uniform draw
from ``default_rng([seed, k // block_size])``: the first 2m columns decide
photon loss, the last m the attempt coins. Single trials, record streams and
the vectorised rate therefore see the same randomness.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator

import numpy as np

from src.shared.models import BoostClass, BoostOutcome

logger = logging.getLogger(__name__)

BLOCK_SIZE = 65_536


def _check(m: int, eta: float, seed: int, block_size: int = BLOCK_SIZE) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be within [0, 1], got {eta}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")


def _block(m: int, seed: int, block: int, size: int) -> np.ndarray:
    return np.random.default_rng([seed, block]).random((size, 3 * m))


def _outcome_from_row(m: int, eta: float, trial: int, row: np.ndarray) -> BoostOutcome:
    lost = row[: 2 * m] >= eta
    coins = row[2 * m :] < 0.5

    pattern = []
    succeeded = False
    for attempt in range(m):
        if lost[2 * attempt] or lost[2 * attempt + 1]:
            pattern.append("L")
            continue
        if coins[attempt]:
            pattern.append("S")
            succeeded = True
            break
        pattern.append("F")

    lost_photons = int(lost.sum())
    if lost_photons:
        classification = BoostClass.FAILURE_LOSS
    elif succeeded:
        classification = BoostClass.SUCCESS
    else:
        classification = BoostClass.FAILURE_EXHAUSTED
    return BoostOutcome(
        trial=trial,
        m=m,
        eta=eta,
        attempts_used=len(pattern),
        lost_photons=lost_photons,
        pattern="".join(pattern),
        classification=classification,
    )


def boosted_fusion_trial(
    m: int, eta: float, seed: int, trial: int = 0, block_size: int = BLOCK_SIZE
) -> BoostOutcome:
    """One repeat-until-success run, the same draw the rate uses for ``trial``."""
    _check(m, eta, seed, block_size)
    if trial < 0:
        raise ValueError(f"trial must be >= 0, got {trial}")
    block, row = divmod(trial, block_size)
    draws = _block(m, seed, block, row + 1)
    return _outcome_from_row(m, eta, trial, draws[-1])


def boosted_fusion_records(
    m: int, eta: float, trials: int, seed: int, block_size: int = BLOCK_SIZE
) -> Iterator[BoostOutcome]:
    _check(m, eta, seed, block_size)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    for block, start in enumerate(range(0, trials, block_size)):
        draws = _block(m, seed, block, min(block_size, trials - start))
        for offset, row in enumerate(draws):
            yield _outcome_from_row(m, eta, start + offset, row)


def boosted_fusion_rate(
    m: int, eta: float, trials: int, seed: int, block_size: int = BLOCK_SIZE
) -> float:
    """Fraction of successful trials, sampled in vectorised blocks.

    Counts exactly the successes ``boosted_fusion_records`` would yield for
    the same arguments.
    """
    _check(m, eta, seed, block_size)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    successes = 0
    for block, start in enumerate(range(0, trials, block_size)):
        draws = _block(m, seed, block, min(block_size, trials - start))
        all_arrived = (draws[:, : 2 * m] < eta).all(axis=1)
        any_heads = (draws[:, 2 * m :] < 0.5).any(axis=1)
        successes += int(np.count_nonzero(all_arrived & any_heads))
    rate = successes / trials
    logger.debug("Boosted fusion m=%d eta=%.4f: %d/%d", m, eta, successes, trials)
    return rate


def binomial_stderr(rate: float, trials: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / trials)


def self_check_tolerance(trials: int) -> float:
    """Allowed |Monte Carlo − closed form| for a run of ``trials``."""
    return 4.0 / math.sqrt(trials)
