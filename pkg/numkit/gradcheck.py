"""
Central finite differences: the oracle every analytic gradient is tested against.
"""
import logging
import math

import numpy as np

from .exceptions import ContractViolation, GradientCheckError
from .linalg import as_vector

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5


def finite_difference_gradient(f, p, h=DEFAULT_STEP) -> np.ndarray:
    """
    (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate i of the flat vector p.
    f receives a fresh copy at every perturbed point.
    """
    if h <= 0:
        raise ContractViolation("step h must be positive")
    base = as_vector(p, name="p")
    grad = np.empty_like(base)
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] = base[i] + h
        upper = float(f(shifted))
        if not math.isfinite(upper):
            raise GradientCheckError(i, upper)
        shifted[i] = base[i] - h
        lower = float(f(shifted))
        if not math.isfinite(lower):
            raise GradientCheckError(i, lower)
        grad[i] = (upper - lower) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-8) -> float:
    """||a - n|| / max(||a||, ||n||, floor)."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise ContractViolation(f"shape mismatch {a.shape} vs {n.shape}")
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)), floor)
    return float(np.linalg.norm(a - n)) / scale


def gradient_error(f, p, analytic, h=DEFAULT_STEP) -> float:
    """Relative error between an analytic gradient and the finite-difference oracle."""
    numeric = finite_difference_gradient(f, p, h)
    error = relative_error(analytic, numeric)
    logger.debug("gradcheck size=%d rel_err=%.3e", numeric.size, error)
    return error
