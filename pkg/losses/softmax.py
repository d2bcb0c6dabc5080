"""
Shared softmax core for every margin loss.

Each loss builds an N x K logit matrix L and a per-sample target exponent a_i;
the per-sample loss is log sum_j exp(L_ij) - a_i. For a standard softmax
cross-entropy a_i = L_{i, y_i}.
"""
from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import check_finite, ordered_mean, softmax_rows, stable_log_sum_exp_rows


@dataclass(frozen=True)
class SoftmaxTerms:
    loss: float
    per_sample: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def check_labels(labels, class_count: int, batch_size: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != batch_size:
        raise ContractViolation(f"expected {batch_size} labels, got shape {labels.shape}")
    if batch_size < 1:
        raise ContractViolation("batch must contain at least one sample")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.floor(labels)):
            raise ContractViolation("labels must be integers")
        labels = labels.astype(np.int64)
    if np.any(labels < 0) or np.any(labels >= class_count):
        raise ContractViolation(f"labels must lie in [0, {class_count})")
    return labels.astype(np.int64)


def softmax_terms(logits, target_exponent, *, where="loss") -> SoftmaxTerms:
    check_finite(logits, where=f"{where} logits", axis_name="sample")
    per_sample = stable_log_sum_exp_rows(logits) - target_exponent
    check_finite(per_sample, where=f"{where} per-sample loss", axis_name="sample")
    return SoftmaxTerms(
        loss=ordered_mean(per_sample),
        per_sample=per_sample,
        logits=logits,
        probs=softmax_rows(logits),
    )
