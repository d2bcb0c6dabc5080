import logging
import math

import numpy as np

from numkit.exceptions import ContractViolation

from .datasets import LabeledDataset

logger = logging.getLogger(__name__)

CENTER_SEPARATION = 8.0
MIN_SEPARATION = 1.0
GROW_EVERY = 1000
GROW_FACTOR = 1.5


def blob_centers(rng, class_count: int, dim: int, separation: float) -> np.ndarray:
    """Rejection-sample K centers in a cube, pairwise at least `separation` apart."""
    side = 2.0 * separation * math.ceil(class_count ** (1.0 / dim))
    centers = []
    rejections = 0
    while len(centers) < class_count:
        candidate = rng.uniform(-side / 2.0, side / 2.0, size=dim)
        if all(np.linalg.norm(candidate - c) >= separation for c in centers):
            centers.append(candidate)
            continue
        rejections += 1
        if rejections % GROW_EVERY == 0:
            side *= GROW_FACTOR
    return np.array(centers)


def synth_blobs(rng, class_count: int, input_dim: int, per_class: int, spread: float) -> LabeledDataset:
    """
    K isotropic Gaussian clusters of `per_class` samples each, in class order.
    Centers are pairwise at least max(8 spread, 1) apart.
    """
    if class_count < 1 or input_dim < 1 or per_class < 1:
        raise ContractViolation("class_count, input_dim and per_class must be >= 1")
    if not spread > 0:
        raise ContractViolation("spread must be > 0")
    separation = max(CENTER_SEPARATION * spread, MIN_SEPARATION)
    centers = blob_centers(rng, class_count, input_dim, separation)
    noise = rng.normal(scale=spread, size=(class_count, per_class, input_dim))
    inputs = (centers[:, None, :] + noise).reshape(-1, input_dim)
    labels = np.repeat(np.arange(class_count), per_class)
    logger.debug("synth blobs classes=%d in=%d per_class=%d spread=%g separation=%g", class_count, input_dim, per_class, spread, separation)
    return LabeledDataset(inputs, labels, class_count)
