"""
Proxy bank: learnable class directions plus the fixed radius of each class hypersphere.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from numkit.exceptions import ContractViolation, DegenerateProxyError
from numkit.linalg import EPS, as_matrix, as_vector, normalize_columns

logger = logging.getLogger(__name__)

# Best row of the radii sensitivity table: 10, 20, ..., 100.
DEFAULT_RADII_GAP = 10.0


def assign_radii(class_count: int, gap: float = DEFAULT_RADII_GAP, hyperspheres=None) -> np.ndarray:
    """
    r_k = gap * ((k mod H) + 1). With H = K (the default) every class gets its
    own shell: gap, 2 gap, ..., K gap.
    """
    if class_count < 1:
        raise ContractViolation("class_count must be >= 1")
    if gap <= 0:
        raise ContractViolation("radii gap must be positive")
    shells = class_count if hyperspheres is None else int(hyperspheres)
    if shells < 1:
        raise ContractViolation("hyperspheres must be >= 1")
    return gap * (np.arange(class_count) % shells + 1).astype(np.float64)


@dataclass(frozen=True)
class ProxyBank:
    """W is d x K (one raw proxy per column); radii has K positive entries."""

    W: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        W = as_matrix(self.W, name="proxy matrix")
        radii = as_vector(self.radii, name="radii")
        if W.shape[0] < 2:
            raise ContractViolation("embedding dimension d must be >= 2")
        if W.shape[1] != radii.size:
            raise ContractViolation(
                f"{W.shape[1]} proxy columns but {radii.size} radii"
            )
        if np.any(~np.isfinite(radii)) or np.any(radii <= 0):
            raise ContractViolation("radii must be finite and strictly positive")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "radii", radii)
        self.check_columns()

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def class_count(self) -> int:
        return self.W.shape[1]

    def check_columns(self):
        norms = np.linalg.norm(self.W, axis=0)
        for k, norm in enumerate(norms):
            if not np.isfinite(norm) or norm <= EPS:
                raise DegenerateProxyError(k, float(norm))

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.W, axis=0)

    def unit_proxies(self) -> np.ndarray:
        unit, _ = normalize_columns(self.W)
        return unit

    def scaled_proxies(self) -> np.ndarray:
        """d x K matrix of r_k * w_k / ||w_k||."""
        return self.unit_proxies() * self.radii[None, :]

    def with_weights(self, W) -> "ProxyBank":
        """New bank with updated proxies; radii are carried over untouched."""
        return replace(self, W=np.array(W, dtype=np.float64))


def init_proxy_bank(rng, dim: int, class_count: int, gap=DEFAULT_RADII_GAP, hyperspheres=None) -> ProxyBank:
    W = rng.normal(size=(dim, class_count))
    bank = ProxyBank(W=W, radii=assign_radii(class_count, gap, hyperspheres))
    logger.debug(
        "proxy bank initialized dim=%d classes=%d gap=%s radii_max=%.3f",
        dim, class_count, gap, float(bank.radii.max()),
    )
    return bank


def scaled_proxy(bank: ProxyBank, k: int) -> np.ndarray:
    """omega_r_k = r_k * w_k / ||w_k||; its norm equals r_k."""
    if not 0 <= k < bank.class_count:
        raise ContractViolation(f"class index {k} outside [0, {bank.class_count})")
    column = bank.W[:, k]
    norm = float(np.linalg.norm(column))
    if norm <= EPS:
        raise DegenerateProxyError(k, norm)
    return bank.radii[k] * (column / norm)
