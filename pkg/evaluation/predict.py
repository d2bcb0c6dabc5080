"""
Predictive measures.

The radial-angular measure assigns x to the class whose scaled proxy is
closest: argmin_k ||x - r_k w_k / ||w_k|| ||. Ties go to the lowest index.
"""
from dataclasses import dataclass

import numpy as np

from geometry.measures import triangle_magnitude_from_vectors
from geometry.proxies import ProxyBank
from numkit.exceptions import ContractViolation
from numkit.linalg import as_matrix, as_vector, softmax_rows

DEFAULT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class PredictionReport:
    magnitudes: np.ndarray
    predicted: int
    confidence: np.ndarray


def resultant_magnitudes(X, bank: ProxyBank) -> np.ndarray:
    """N x K matrix of ||x_i - omega_r_k||."""
    X = as_matrix(X, name="features", cols=bank.dim)
    diff = X[:, None, :] - bank.scaled_proxies().T[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def triangle_magnitudes(x, bank: ProxyBank) -> np.ndarray:
    """Per-class magnitudes through the projection-law triangle form."""
    WR = bank.scaled_proxies()
    return np.array([triangle_magnitude_from_vectors(x, WR[:, k]) for k in range(bank.class_count)])


def confidence_from_magnitudes(magnitudes, temperature=DEFAULT_TEMPERATURE) -> np.ndarray:
    """softmax(-R / T) per row; rows of a 1-D input are treated as a single sample."""
    if not temperature > 0:
        raise ContractViolation("temperature must be > 0")
    R = np.asarray(magnitudes, dtype=np.float64)
    single = R.ndim == 1
    probs = softmax_rows(-np.atleast_2d(R) / temperature)
    return probs[0] if single else probs


def predict_radial_angular(x, bank: ProxyBank, temperature=DEFAULT_TEMPERATURE) -> PredictionReport:
    x = as_vector(x, name="x")
    if x.size != bank.dim:
        raise ContractViolation(f"x has {x.size} entries, proxies have {bank.dim}")
    magnitudes = resultant_magnitudes(x[None, :], bank)[0]
    return PredictionReport(
        magnitudes=magnitudes,
        predicted=int(np.argmin(magnitudes)),
        confidence=confidence_from_magnitudes(magnitudes, temperature),
    )


def predict_radial_angular_batch(X, bank: ProxyBank) -> np.ndarray:
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmin(resultant_magnitudes(X, bank), axis=1).astype(np.int64)


def confidence_scores(report: PredictionReport, temperature=DEFAULT_TEMPERATURE) -> np.ndarray:
    return confidence_from_magnitudes(report.magnitudes, temperature)


def linear_logits(X, W, b) -> np.ndarray:
    W = as_matrix(W, name="head weights")
    X = as_matrix(X, name="features", cols=W.shape[0])
    b = as_vector(b, name="bias")
    if b.size != W.shape[1]:
        raise ContractViolation("bias length must equal the class count")
    return X @ W + b[None, :]


def predict_linear_head(x, W, b) -> int:
    """argmax of the classification-layer logits w^T x + b."""
    return int(np.argmax(linear_logits(as_vector(x, name="x")[None, :], W, b)[0]))


def predict_linear_head_batch(X, W, b) -> np.ndarray:
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmax(linear_logits(X, W, b), axis=1).astype(np.int64)


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if predictions.size != labels.size:
        raise ContractViolation(f"{predictions.size} predictions for {labels.size} labels")
    if predictions.size == 0:
        raise ContractViolation("accuracy of an empty set is undefined")
    return float(np.count_nonzero(predictions == labels)) / predictions.size
