"""
Expected calibration error and temperature search.

Confidence is the probability of the predicted class; a sample falls in bin
min(floor(conf * B), B - 1).
"""
import logging
from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import as_matrix, softmax_rows

logger = logging.getLogger(__name__)

DEFAULT_BINS = 15
DEFAULT_GRID = np.geomspace(0.05, 20.0, 61)


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


@dataclass(frozen=True)
class CalibrationResult:
    temperature: float
    ece_before: float
    ece_after: float


def _inputs(confidences, correct, bins):
    conf = np.asarray(confidences, dtype=np.float64).reshape(-1)
    hits = np.asarray(correct, dtype=bool).reshape(-1)
    if conf.size != hits.size:
        raise ContractViolation("one correctness flag per confidence")
    if conf.size == 0:
        raise ContractViolation("calibration needs at least one sample")
    if bins < 1:
        raise ContractViolation("bins must be >= 1")
    if np.any(~np.isfinite(conf)) or np.any(conf < 0) or np.any(conf > 1):
        raise ContractViolation("confidences must lie in [0, 1]")
    return conf, hits


def bin_index(confidences, bins: int) -> np.ndarray:
    return np.minimum((np.asarray(confidences) * bins).astype(np.int64), bins - 1)


def reliability_bins(confidences, correct, bins=DEFAULT_BINS) -> list:
    conf, hits = _inputs(confidences, correct, bins)
    index = bin_index(conf, bins)
    table = []
    for b in range(bins):
        members = index == b
        count = int(members.sum())
        table.append(ReliabilityBin(
            lower=b / bins,
            upper=(b + 1) / bins,
            count=count,
            accuracy=float(hits[members].mean()) if count else 0.0,
            confidence=float(conf[members].mean()) if count else 0.0,
        ))
    return table


def ece(confidences, correct, bins=DEFAULT_BINS) -> float:
    """sum over bins of (n_b / N) |acc_b - conf_b|."""
    conf, _ = _inputs(confidences, correct, bins)
    total = 0.0
    for row in reliability_bins(confidences, correct, bins):
        if row.count:
            total += row.count / conf.size * abs(row.accuracy - row.confidence)
    return total


def scaled_confidence(scores, temperature: float) -> np.ndarray:
    """Max softmax probability of scores / T per row."""
    return softmax_rows(as_matrix(scores, name="scores") / temperature).max(axis=1)


def temperature_calibrate(scores, correct, grid=None, bins=DEFAULT_BINS) -> CalibrationResult:
    """
    Grid search over T for the lowest ECE of softmax(scores / T). T = 1 is
    scored first and is only replaced by a strictly better value, so the
    returned ECE never exceeds the uncalibrated one.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    if np.any(grid <= 0):
        raise ContractViolation("temperatures must be > 0")
    scores = as_matrix(scores, name="scores")
    before = ece(scaled_confidence(scores, 1.0), correct, bins)
    best_t, best_ece = 1.0, before
    for t in grid:
        value = ece(scaled_confidence(scores, float(t)), correct, bins)
        if value < best_ece:
            best_t, best_ece = float(t), value
    logger.debug("temperature calibrated T=%.4g ece_before=%.6f ece_after=%.6f", best_t, before, best_ece)
    return CalibrationResult(temperature=best_t, ece_before=before, ece_after=best_ece)
