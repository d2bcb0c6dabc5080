"""
DistArc loss with its analytic gradient.

Per sample i with true class y:

    numerator exponent   a_i = cos(theta_y + m) [+ cos(phi_y)] [- lambda delta_y]
    denominator          e^{cos(theta_y + m)} + sum_{j != y} e^{cos(theta_j) [- lambda delta_j]}
    loss_i               = log(denominator) - a_i

cos(phi_y) and -lambda delta_y appear only in the numerator, so loss_i may be
negative. Bracketed terms are switched by the ablation mask. With
symmetric_denominator the true-class denominator term carries the full a_i.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from geometry.batch import (
    cos_margin,
    cos_margin_derivative,
    cos_phi_rows,
    cos_phi_rows_backward,
    cos_theta_matrix,
    cos_theta_matrix_backward,
    delta_matrix,
    delta_matrix_backward,
    scaled_proxies,
    scaled_proxies_backward,
)
from geometry.proxies import ProxyBank
from numkit.exceptions import ContractViolation
from numkit.linalg import as_matrix, check_finite

from .softmax import check_labels, softmax_terms

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.4
LAMBDA_SIMPLE = 0.003
LAMBDA_COMPLEX = 0.005


@dataclass(frozen=True)
class AblationMask:
    """cos(theta) is always active; cos(phi) and delta are switchable."""

    use_cos_phi: bool = True
    use_delta: bool = True

    @property
    def use_cos_theta(self) -> bool:
        return True

    @property
    def label(self) -> str:
        parts = ["cos_theta"]
        if self.use_cos_phi:
            parts.append("cos_phi")
        if self.use_delta:
            parts.append("delta")
        return "+".join(parts)


MASK_COS_THETA = AblationMask(use_cos_phi=False, use_delta=False)
MASK_COS_PHI = AblationMask(use_cos_phi=True, use_delta=False)
MASK_DELTA = AblationMask(use_cos_phi=False, use_delta=True)
MASK_FULL = AblationMask(use_cos_phi=True, use_delta=True)

# Rows of the component ablation table, in table order.
ABLATION_ROWS = (MASK_COS_THETA, MASK_COS_PHI, MASK_DELTA, MASK_FULL)


@dataclass(frozen=True)
class DistArcConfig:
    margin: float = DEFAULT_MARGIN
    lambda_: float = LAMBDA_SIMPLE
    mask: AblationMask = MASK_FULL
    symmetric_denominator: bool = False

    def __post_init__(self):
        if not 0.0 <= self.margin < math.pi / 2:
            raise ContractViolation("margin must lie in [0, pi/2)")
        if self.lambda_ < 0:
            raise ContractViolation("lambda must be >= 0")


@dataclass(frozen=True)
class SampleTerms:
    cos_theta_true: float
    cos_phi_true: float
    delta_true: float
    logits: np.ndarray
    loss: float


@dataclass(frozen=True)
class LossBreakdown:
    loss: float
    per_sample_loss: np.ndarray
    cos_theta_true: np.ndarray
    cos_phi_true: np.ndarray
    delta_true: np.ndarray
    logits: np.ndarray
    _cache: dict = field(default=None, repr=False, compare=False)

    @property
    def per_sample(self) -> list:
        return [self.sample(i) for i in range(self.per_sample_loss.size)]

    def sample(self, i: int) -> SampleTerms:
        return SampleTerms(
            cos_theta_true=float(self.cos_theta_true[i]),
            cos_phi_true=float(self.cos_phi_true[i]),
            delta_true=float(self.delta_true[i]),
            logits=self.logits[i].copy(),
            loss=float(self.per_sample_loss[i]),
        )


@dataclass(frozen=True)
class GradientBundle:
    d_x: np.ndarray
    d_w: np.ndarray
    d_b: np.ndarray = None


def distarc_forward(X, labels, bank: ProxyBank, cfg: DistArcConfig) -> LossBreakdown:
    X = as_matrix(X, name="features", cols=bank.dim)
    check_finite(X, where="features", axis_name="sample")
    n = X.shape[0]
    labels = check_labels(labels, bank.class_count, n)
    bank.check_columns()
    rows = np.arange(n)

    cos, angular_cache = cos_theta_matrix(X, bank.W)
    cos_true = cos[rows, labels]
    cos_m = cos_margin(cos_true, cfg.margin)
    WR, unit_cache = scaled_proxies(bank.W, bank.radii)
    deltas, diff = delta_matrix(X, WR)
    phi, phi_cache = cos_phi_rows(X, WR[:, labels].T)

    logits = cos.copy()
    if cfg.mask.use_delta:
        logits = logits - cfg.lambda_ * deltas
    target = cos_m.copy()
    if cfg.mask.use_cos_phi:
        target = target + phi
    if cfg.mask.use_delta:
        target = target - cfg.lambda_ * deltas[rows, labels]
    logits[rows, labels] = target if cfg.symmetric_denominator else cos_m

    terms = softmax_terms(logits, target, where="distarc")
    logger.debug("distarc forward n=%d loss=%.6f", n, terms.loss)
    return LossBreakdown(
        loss=terms.loss,
        per_sample_loss=terms.per_sample,
        cos_theta_true=cos_true,
        cos_phi_true=phi,
        delta_true=deltas[rows, labels],
        logits=logits,
        _cache={
            "labels": labels,
            "probs": terms.probs,
            "angular": angular_cache,
            "cos_true": cos_true,
            "diff": diff,
            "phi": phi_cache,
            "unit": unit_cache,
        },
    )


def distarc_backward(X, labels, bank: ProxyBank, cfg: DistArcConfig, cache: LossBreakdown) -> GradientBundle:
    """Analytic gradient of the batch-mean DistArc loss w.r.t. X and the raw proxies."""
    if cache is None or cache._cache is None:
        raise ContractViolation("backward needs the LossBreakdown produced by distarc_forward")
    X = as_matrix(X, name="features", cols=bank.dim)
    c = cache._cache
    n, k = c["probs"].shape
    if X.shape[0] != n or not np.array_equal(check_labels(labels, k, n), c["labels"]):
        raise ContractViolation("cache does not match the inputs")
    labels = c["labels"]
    rows = np.arange(n)
    P = c["probs"] / n
    inv_n = 1.0 / n

    # softmax weight on every cosine; the true column goes through cos(theta + m)
    G_cos = P.copy()
    G_cos[rows, labels] = (P[rows, labels] - inv_n) * cos_margin_derivative(c["cos_true"], cfg.margin)
    d_x, d_w = cos_theta_matrix_backward(G_cos, c["angular"])

    d_wr = np.zeros_like(bank.W)
    radial_path = False
    if cfg.mask.use_delta and cfg.lambda_ != 0.0:
        radial_path = True
        G_delta = -cfg.lambda_ * P
        if cfg.symmetric_denominator:
            G_delta[rows, labels] = cfg.lambda_ * (inv_n - P[rows, labels])
        else:
            G_delta[rows, labels] = cfg.lambda_ * inv_n
        dx_delta, dwr_delta = delta_matrix_backward(G_delta, c["diff"])
        d_x = d_x + dx_delta
        d_wr = d_wr + dwr_delta

    if cfg.mask.use_cos_phi:
        radial_path = True
        g_phi = np.full(n, -inv_n)
        if cfg.symmetric_denominator:
            g_phi = g_phi + P[rows, labels]
        dx_phi, dwr_rows = cos_phi_rows_backward(g_phi, c["phi"])
        d_x = d_x + dx_phi
        np.add.at(d_wr.T, labels, dwr_rows)

    if radial_path:
        d_w = d_w + scaled_proxies_backward(d_wr, bank.radii, c["unit"])

    check_finite(d_x, where="distarc d_x", axis_name="sample")
    check_finite(d_w, where="distarc d_w")
    return GradientBundle(d_x=d_x, d_w=d_w)
