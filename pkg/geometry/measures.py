"""
Single-sample radial-angular measures: angles to proxies, resultant vectors,
squared distances, triangle-law magnitudes and two-class decision boundaries.
"""
import math
from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import EPS, as_vector

from .proxies import ProxyBank, scaled_proxy

SWAPPED_NORMS = "swapped-norms"
PROJECTION_LAW = "projection-law"
TRIANGLE_VARIANTS = (SWAPPED_NORMS, PROJECTION_LAW)


def _pair(x, w, what="vectors"):
    x = as_vector(x)
    w = as_vector(w)
    if x.shape != w.shape:
        raise ContractViolation(f"{what} have different dimensions: {x.size} vs {w.size}")
    return x, w


def _clamp(value: float) -> float:
    return min(1.0, max(-1.0, value))


def cos_theta(x, w_col) -> float:
    """Cosine between x and a proxy column; 0 if either is (near) zero."""
    x, w = _pair(x, w_col)
    nx = float(np.linalg.norm(x))
    nw = float(np.linalg.norm(w))
    if nx < EPS or nw < EPS:
        return 0.0
    return _clamp(float(x @ w) / (nx * nw))


def cos_with_margin(cos_value: float, margin: float) -> float:
    """cos(theta + m) from cos(theta) by angle addition; sin(theta) >= 0 on [0, pi]."""
    sin_value = math.sqrt(max(0.0, 1.0 - cos_value * cos_value))
    return cos_value * math.cos(margin) - sin_value * math.sin(margin)


def resultant(x, w_r) -> np.ndarray:
    """R = x - omega_r."""
    x, w_r = _pair(x, w_r)
    return x - w_r


def cos_phi(x, w_r) -> float:
    """
    Cosine between R = x - omega_r and the reversed scaled proxy -omega_r.
    A sample sitting on its scaled proxy (||R|| < eps) counts as perfectly aligned.
    """
    x, w_r = _pair(x, w_r)
    nw = float(np.linalg.norm(w_r))
    if nw < EPS:
        raise ContractViolation("scaled proxy has (near) zero norm")
    r = x - w_r
    nr = float(np.linalg.norm(r))
    if nr < EPS:
        return 1.0
    return _clamp(float(r @ (-w_r)) / (nr * nw))


def delta_sq(x, w_r) -> float:
    """Squared Euclidean distance ||omega_r - x||^2."""
    r = resultant(x, w_r)
    return float(r @ r)


def angle_between(a, b) -> float:
    """Angle in [0, pi]; 0 for a (near) zero argument."""
    return math.acos(cos_theta(a, b))


def triangle_magnitude(norm_x, norm_wr, theta, phi, variant=PROJECTION_LAW) -> float:
    """
    Resultant length from the triangle (x, omega_r, R). Accepts scalars or
    equally shaped arrays.

    swapped-norms:  ||x|| cos(phi) + ||omega_r|| cos(pi - (theta + phi))
    projection-law: ||omega_r|| cos(phi) + ||x|| cos(pi - (theta + phi))

    With phi measured between R and -omega_r only the projection law equals
    ||x - omega_r||; the swapped form is exact when phi is the angle between x and R.
    """
    if variant not in TRIANGLE_VARIANTS:
        raise ContractViolation(f"unknown triangle variant {variant!r}; expected one of {TRIANGLE_VARIANTS}")
    norm_x, norm_wr, theta, phi = (np.asarray(v, dtype=np.float64) for v in (norm_x, norm_wr, theta, phi))
    if np.any(norm_x < 0) or np.any(norm_wr < 0):
        raise ContractViolation("norms must be nonnegative")
    if np.any((theta < 0) | (theta > math.pi) | (phi < 0) | (phi > math.pi)):
        raise ContractViolation("theta and phi must lie in [0, pi]")
    opposite = np.cos(math.pi - (theta + phi))
    if variant == SWAPPED_NORMS:
        out = norm_x * np.cos(phi) + norm_wr * opposite
    else:
        out = norm_wr * np.cos(phi) + norm_x * opposite
    return float(out) if out.ndim == 0 else out


def triangle_magnitude_from_vectors(x, w_r, variant=PROJECTION_LAW) -> float:
    """Evaluate triangle_magnitude with theta = angle(x, omega_r), phi = angle(R, -omega_r)."""
    x, w_r = _pair(x, w_r)
    theta = angle_between(x, w_r)
    phi = math.acos(cos_phi(x, w_r))
    return triangle_magnitude(
        float(np.linalg.norm(x)), float(np.linalg.norm(w_r)), theta, phi, variant
    )


def decision_boundary_residual(x1, x2, bank: ProxyBank, m: float, claimed_class: int) -> float:
    """
    Left-hand side of the two-class boundary line:

      class 1: (cos(theta_1 + m) + ||x_1||) - (cos(theta_2) + ||x_2||)
      class 2: (cos(theta_1) + ||x_1||) - (cos(theta_2 + m) + ||x_2||)

    theta_k is the angle between x_k and proxy k. Zero means the point pair lies
    on the boundary. Cosines and raw norms are combined without rescaling.
    """
    if bank.class_count != 2:
        raise ContractViolation(f"decision boundary needs K = 2, bank has K = {bank.class_count}")
    if claimed_class not in (1, 2):
        raise ContractViolation("claimed_class must be 1 or 2")
    x1, x2 = _pair(x1, x2)
    if x1.size != bank.dim:
        raise ContractViolation("sample dimension does not match the proxy bank")
    c1 = cos_theta(x1, bank.W[:, 0])
    c2 = cos_theta(x2, bank.W[:, 1])
    n1 = float(np.linalg.norm(x1))
    n2 = float(np.linalg.norm(x2))
    if claimed_class == 1:
        return (cos_with_margin(c1, m) + n1) - (c2 + n2)
    return (c1 + n1) - (cos_with_margin(c2, m) + n2)


@dataclass(frozen=True)
class SampleGeometry:
    cos_theta: np.ndarray
    cos_phi: float
    delta: np.ndarray
    resultant_norms: np.ndarray


def sample_geometry(x, bank: ProxyBank, label: int) -> SampleGeometry:
    """All per-class measures of one sample; cos_phi is taken against its own class."""
    x = as_vector(x)
    if x.size != bank.dim:
        raise ContractViolation("sample dimension does not match the proxy bank")
    cos_values = np.array([cos_theta(x, bank.W[:, k]) for k in range(bank.class_count)])
    scaled = [scaled_proxy(bank, k) for k in range(bank.class_count)]
    deltas = np.array([delta_sq(x, w_r) for w_r in scaled])
    norms = np.array([float(np.linalg.norm(resultant(x, w_r))) for w_r in scaled])
    return SampleGeometry(
        cos_theta=cos_values,
        cos_phi=cos_phi(x, scaled[label]),
        delta=deltas,
        resultant_norms=norms,
    )
