"""
SGD with weight decay folded into the velocity:

    v <- momentum * v + (g + weight_decay * p)
    p <- p - learning_rate * v

Backbone layers, proxies and the linear-head bias are stepped together.
Radii are never part of the parameter set.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import check_finite

logger = logging.getLogger(__name__)

# Face-recognition training recipe.
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_WEIGHT_DECAY = 5e-4


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    momentum: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractViolation("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ContractViolation("weight_decay must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ContractViolation("momentum must lie in [0, 1)")


@dataclass
class SgdState:
    velocity: dict = field(default_factory=dict)
    steps: int = 0


def named_parameters(backbone, bank_weights, head_bias) -> "OrderedDict[str, np.ndarray]":
    """Ordered view over every trainable array; the arrays are shared, not copied."""
    params = OrderedDict()
    for i, (W, b) in enumerate(zip(backbone.weights, backbone.biases)):
        params[f"layer{i}.weight"] = W
        params[f"layer{i}.bias"] = b
    params["proxies"] = bank_weights
    params["head_bias"] = head_bias
    return params


def sgd_step(params, grads, cfg: SgdConfig, state: SgdState) -> SgdState:
    """
    Update every array of params in place. All gradients are validated before
    the first write, so a non-finite gradient leaves params and state untouched.
    """
    if list(params) != list(grads):
        raise ContractViolation("gradient names must match parameter names")
    for name, g in grads.items():
        g = np.asarray(g)
        if g.shape != params[name].shape:
            raise ContractViolation(f"{name}: gradient shape {g.shape} != parameter shape {params[name].shape}")
        check_finite(g, where=f"gradient {name}")

    for name, p in params.items():
        update = grads[name] + cfg.weight_decay * p
        if cfg.momentum:
            v = state.velocity.get(name)
            update = update if v is None else cfg.momentum * v + update
        state.velocity[name] = update
        p -= cfg.learning_rate * update
    state.steps += 1
    logger.debug("sgd step=%d lr=%g wd=%g momentum=%g", state.steps, cfg.learning_rate, cfg.weight_decay, cfg.momentum)
    return state
