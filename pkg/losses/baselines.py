"""
Baseline heads: softmax cross-entropy on raw logits, ArcFace (additive angular
margin) and CosFace (additive cosine margin), each with an analytic backward.
"""
import math

import numpy as np

from geometry.batch import cos_margin, cos_margin_derivative, cos_theta_matrix, cos_theta_matrix_backward
from numkit.exceptions import ContractViolation
from numkit.linalg import as_matrix, as_vector, check_finite

from .distarc import GradientBundle
from .softmax import SoftmaxTerms, check_labels, softmax_terms

# Unscaled by default; 64 is the usual face-recognition value.
DEFAULT_SCALE = 1.0


def _inputs(X, W, labels):
    W = as_matrix(W, name="proxy matrix")
    X = as_matrix(X, name="features", cols=W.shape[0])
    check_finite(X, where="features", axis_name="sample")
    labels = check_labels(labels, W.shape[1], X.shape[0])
    return X, W, labels


def _check_margin(m, s):
    if s <= 0:
        raise ContractViolation("scale s must be positive")
    if m < 0:
        raise ContractViolation("margin must be >= 0")


def cross_entropy_forward(X, labels, W, b) -> SoftmaxTerms:
    """Softmax cross-entropy on the linear-head logits X W + b."""
    X, W, labels = _inputs(X, W, labels)
    b = as_vector(b, name="bias")
    if b.size != W.shape[1]:
        raise ContractViolation("bias length must equal the class count")
    logits = X @ W + b[None, :]
    return softmax_terms(logits, logits[np.arange(X.shape[0]), labels], where="cross_entropy")


def cross_entropy_backward(X, labels, W, b, cache: SoftmaxTerms) -> GradientBundle:
    X, W, labels = _inputs(X, W, labels)
    n = X.shape[0]
    G = cache.probs.copy()
    G[np.arange(n), labels] -= 1.0
    G /= n
    return GradientBundle(d_x=G @ W.T, d_w=X.T @ G, d_b=G.sum(axis=0))


def _angular_forward(X, labels, W, s, true_logit, where):
    X, W, labels = _inputs(X, W, labels)
    rows = np.arange(X.shape[0])
    cos, _ = cos_theta_matrix(X, W)
    logits = cos.copy()
    logits[rows, labels] = true_logit(cos[rows, labels])
    logits = s * logits
    return softmax_terms(logits, logits[rows, labels], where=where)


def _angular_backward(X, labels, W, s, cache, true_derivative):
    X, W, labels = _inputs(X, W, labels)
    n = X.shape[0]
    rows = np.arange(n)
    cos, angular_cache = cos_theta_matrix(X, W)
    P = cache.probs / n
    G = P.copy()
    G[rows, labels] = (P[rows, labels] - 1.0 / n) * true_derivative(cos[rows, labels])
    G = s * G
    d_x, d_w = cos_theta_matrix_backward(G, angular_cache)
    return GradientBundle(d_x=d_x, d_w=d_w)


def arcface_forward(X, labels, W, m, s=DEFAULT_SCALE) -> SoftmaxTerms:
    """True-class logit s cos(theta + m), others s cos(theta)."""
    _check_margin(m, s)
    if m >= math.pi / 2:
        raise ContractViolation("ArcFace margin must be < pi/2")
    return _angular_forward(X, labels, W, s, lambda c: cos_margin(c, m), "arcface")


def arcface_backward(X, labels, W, m, s, cache: SoftmaxTerms) -> GradientBundle:
    return _angular_backward(X, labels, W, s, cache, lambda c: cos_margin_derivative(c, m))


def cosface_forward(X, labels, W, m, s=DEFAULT_SCALE) -> SoftmaxTerms:
    """True-class logit s (cos(theta) - m), others s cos(theta)."""
    _check_margin(m, s)
    return _angular_forward(X, labels, W, s, lambda c: c - m, "cosface")


def cosface_backward(X, labels, W, m, s, cache: SoftmaxTerms) -> GradientBundle:
    return _angular_backward(X, labels, W, s, cache, np.ones_like)
