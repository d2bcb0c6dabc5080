from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation

DEFAULT_WINDOW = 10
DEFAULT_WARMUP = 20
# moving-average rise allowed at the plateau, as a fraction of first_loss - min_loss
PLATEAU_TOLERANCE = 1e-2


@dataclass(frozen=True)
class ConvergenceSummary:
    first_loss: float
    final_loss: float
    min_loss: float
    min_epoch: int
    decreased: bool
    smoothed_non_increasing: bool


def moving_average(values, window=DEFAULT_WINDOW) -> np.ndarray:
    """Trailing mean; entry i averages values[i : i + window]."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if window < 1:
        raise ContractViolation("window must be >= 1")
    if values.size < window:
        return np.zeros(0)
    return np.convolve(values, np.ones(window) / window, mode="valid")


def convergence_summary(
    losses, window=DEFAULT_WINDOW, warmup=DEFAULT_WARMUP, tolerance=1e-12, relative_tolerance=0.0,
) -> ConvergenceSummary:
    """
    Epochs are 1-based. The smoothed curve is checked from the first window
    that starts after `warmup` epochs; a step may rise by at most
    tolerance + relative_tolerance * (first_loss - min_loss).
    """
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    if losses.size == 0:
        raise ContractViolation("no losses to summarize")
    smoothed = moving_average(losses, window)[warmup:]
    allowed = tolerance + relative_tolerance * max(float(losses[0] - losses.min()), 0.0)
    return ConvergenceSummary(
        first_loss=float(losses[0]),
        final_loss=float(losses[-1]),
        min_loss=float(losses.min()),
        min_epoch=int(np.argmin(losses)) + 1,
        decreased=bool(losses[-1] < losses[0]),
        smoothed_non_increasing=bool(np.all(np.diff(smoothed) <= allowed)),
    )
