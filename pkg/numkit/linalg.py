"""
Dense float64 helpers shared by every other app.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in C
(row-major) order. Public helpers never return a view of their input.
"""
import numpy as np

from .exceptions import ContractViolation, NonFiniteError

# Library-wide guard for normalization of (near) zero vectors.
EPS = 1e-12


def as_vector(values, *, name="vector", allow_empty=False) -> np.ndarray:
    v = np.array(values, dtype=np.float64).reshape(-1)
    if v.size == 0 and not allow_empty:
        raise ContractViolation(f"{name} must be nonempty")
    return v


def as_matrix(values, *, name="matrix", rows=None, cols=None) -> np.ndarray:
    m = np.array(values, dtype=np.float64, order="C")
    if m.ndim != 2:
        raise ContractViolation(f"{name} must be 2-dimensional, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ContractViolation(f"{name} has {m.shape[0]} rows, expected {rows}")
    if cols is not None and m.shape[1] != cols:
        raise ContractViolation(f"{name} has {m.shape[1]} cols, expected {cols}")
    return m


def check_finite(values, *, where="", axis_name="row"):
    """Raise NonFiniteError naming the first offending row (or element)."""
    arr = np.asarray(values)
    if np.all(np.isfinite(arr)):
        return
    bad = np.argwhere(~np.isfinite(arr))[0]
    index = int(bad[0]) if bad.size else None
    raise NonFiniteError(
        f"non-finite value in {where or 'array'} at {axis_name} {index}",
        index=index,
        where=where,
    )


def l2_norm(v) -> float:
    v = as_vector(v)
    return float(np.linalg.norm(v))


def normalize(v, eps=EPS) -> np.ndarray:
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    v = as_vector(v)
    return v / max(float(np.linalg.norm(v)), eps)


def row_norms(m) -> np.ndarray:
    return np.linalg.norm(np.asarray(m, dtype=np.float64), axis=1)


def normalize_rows(m, eps=EPS):
    """Return (unit rows, original row norms)."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    return m / np.maximum(norms, eps)[:, None], norms


def normalize_columns(m, eps=EPS):
    """Return (unit columns, original column norms)."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=0)
    return m / np.maximum(norms, eps)[None, :], norms


def stable_log_sum_exp(logits) -> float:
    x = as_vector(logits, name="logits")
    top = float(np.max(x))
    return top + float(np.log(np.sum(np.exp(x - top))))


def stable_log_sum_exp_rows(logits) -> np.ndarray:
    """Row-wise stable_log_sum_exp of an N x K matrix."""
    x = np.asarray(logits, dtype=np.float64)
    top = np.max(x, axis=1)
    return top + np.log(np.sum(np.exp(x - top[:, None]), axis=1))


def softmax_rows(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    return np.exp(x - stable_log_sum_exp_rows(x)[:, None])


def ordered_mean(values) -> float:
    """Left-to-right mean; keeps batch reductions bitwise reproducible."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ContractViolation("cannot average an empty sequence")
    total = 0.0
    for value in values.tolist():
        total += value
    return total / values.size
