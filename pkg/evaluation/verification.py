"""
Pair verification: predict "same" when the pair distance is at most t and
pick the t that maximizes (TP + TN) / total.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from dataio.datasets import PairSet
from numkit.exceptions import ContractViolation
from numkit.linalg import EPS

logger = logging.getLogger(__name__)

EUCLIDEAN = "euclidean"
COSINE = "cosine"
METRICS = (EUCLIDEAN, COSINE)


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    true_positive_rate: float
    false_positive_rate: float
    accuracy: float


@dataclass(frozen=True)
class VerificationResult:
    best_accuracy: float
    best_threshold: float
    metric: str
    pair_count: int
    roc: list = field(default_factory=list)


def pair_distances(embeddings, pairs: PairSet, metric=EUCLIDEAN) -> np.ndarray:
    """Euclidean distance, or 1 - cos for the cosine metric."""
    if metric not in METRICS:
        raise ContractViolation(f"unknown metric {metric!r}")
    E = np.asarray(embeddings, dtype=np.float64)
    a, b = E[pairs.index_a], E[pairs.index_b]
    if metric == EUCLIDEAN:
        return np.linalg.norm(a - b, axis=1)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    cos = np.where(norms > EPS, np.sum(a * b, axis=1) / np.maximum(norms, EPS), 0.0)
    return 1.0 - np.clip(cos, -1.0, 1.0)


def candidate_thresholds(distances) -> np.ndarray:
    """min - 1, every midpoint between distinct sorted distances, max + 1."""
    values = np.unique(distances)
    mids = (values[:-1] + values[1:]) / 2.0
    return np.concatenate([[values[0] - 1.0], mids, [values[-1] + 1.0]])


def sweep_distances(distances, same_class, metric=EUCLIDEAN) -> VerificationResult:
    distances = np.asarray(distances, dtype=np.float64).reshape(-1)
    same = np.asarray(same_class, dtype=bool).reshape(-1)
    if distances.size == 0:
        raise ContractViolation("verification needs at least one pair")
    if distances.size != same.size:
        raise ContractViolation("one same_class flag per distance")
    positives = int(same.sum())
    negatives = same.size - positives
    roc = []
    best_accuracy, best_threshold = -1.0, None
    for t in candidate_thresholds(distances):
        accepted = distances <= t
        tp = int(np.count_nonzero(accepted & same))
        fp = int(np.count_nonzero(accepted & ~same))
        tn = negatives - fp
        acc = (tp + tn) / same.size
        roc.append(RocPoint(
            threshold=float(t),
            true_positive_rate=tp / positives if positives else 0.0,
            false_positive_rate=fp / negatives if negatives else 0.0,
            accuracy=acc,
        ))
        if acc > best_accuracy:
            best_accuracy, best_threshold = acc, float(t)
    logger.debug("verification pairs=%d metric=%s best_accuracy=%.4f threshold=%.6g", same.size, metric, best_accuracy, best_threshold)
    return VerificationResult(best_accuracy, best_threshold, metric, int(same.size), roc)


def verification_sweep(embeddings, pairs: PairSet, metric=EUCLIDEAN) -> VerificationResult:
    if len(pairs) == 0:
        raise ContractViolation("verification needs at least one pair")
    return sweep_distances(pair_distances(embeddings, pairs, metric), pairs.same_class, metric)
