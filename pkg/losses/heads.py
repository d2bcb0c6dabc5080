"""
One entry point for every training loss so the trainer does not branch on names.
"""
from dataclasses import dataclass, replace

import numpy as np

from geometry.proxies import ProxyBank
from numkit.exceptions import ContractViolation

from .baselines import (
    DEFAULT_SCALE,
    arcface_backward,
    arcface_forward,
    cosface_backward,
    cosface_forward,
    cross_entropy_backward,
    cross_entropy_forward,
)
from .distarc import DistArcConfig, distarc_backward, distarc_forward

DISTARC = "distarc"
ARCFACE = "arcface"
COSFACE = "cosface"
CROSS_ENTROPY = "cross_entropy"

LOSS_CHOICES = [
    (DISTARC, "DistArc"),
    (ARCFACE, "ArcFace"),
    (COSFACE, "CosFace"),
    (CROSS_ENTROPY, "Cross entropy"),
]
LOSS_NAMES = tuple(name for name, _ in LOSS_CHOICES)

# Angular baselines are compared with cosine distances, DistArc with raw Euclidean ones.
VERIFICATION_METRIC = {
    DISTARC: "euclidean",
    ARCFACE: "cosine",
    COSFACE: "cosine",
    CROSS_ENTROPY: "cosine",
}


@dataclass(frozen=True)
class HeadSettings:
    name: str = DISTARC
    distarc: DistArcConfig = DistArcConfig()
    margin: float = 0.4
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ContractViolation(f"unknown loss {self.name!r}; expected one of {LOSS_NAMES}")

    def with_lambda(self, value: float) -> "HeadSettings":
        return replace(self, distarc=replace(self.distarc, lambda_=value))


@dataclass(frozen=True)
class HeadResult:
    loss: float
    per_sample: np.ndarray
    d_x: np.ndarray
    d_w: np.ndarray
    d_b: np.ndarray


def head_loss_and_grads(settings: HeadSettings, X, labels, bank: ProxyBank, bias) -> HeadResult:
    """Loss and gradients for features X; d_b is zero for heads without a bias."""
    zero_bias = np.zeros(bank.class_count)
    if settings.name == DISTARC:
        breakdown = distarc_forward(X, labels, bank, settings.distarc)
        grads = distarc_backward(X, labels, bank, settings.distarc, breakdown)
        return HeadResult(breakdown.loss, breakdown.per_sample_loss, grads.d_x, grads.d_w, zero_bias)
    if settings.name == CROSS_ENTROPY:
        terms = cross_entropy_forward(X, labels, bank.W, bias)
        grads = cross_entropy_backward(X, labels, bank.W, bias, terms)
        return HeadResult(terms.loss, terms.per_sample, grads.d_x, grads.d_w, grads.d_b)
    if settings.name == ARCFACE:
        terms = arcface_forward(X, labels, bank.W, settings.margin, settings.scale)
        grads = arcface_backward(X, labels, bank.W, settings.margin, settings.scale, terms)
    else:
        terms = cosface_forward(X, labels, bank.W, settings.margin, settings.scale)
        grads = cosface_backward(X, labels, bank.W, settings.margin, settings.scale, terms)
    return HeadResult(terms.loss, terms.per_sample, grads.d_x, grads.d_w, zero_bias)
