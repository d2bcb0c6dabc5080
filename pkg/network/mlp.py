"""
Multi-layer perceptron backbone with a hand-written backward pass.

Weights are stored (fan_in, fan_out) so a layer is z = a @ W + b. The last
layer is linear: embeddings keep their raw magnitude.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import as_matrix

logger = logging.getLogger(__name__)

RELU = "relu"
TANH = "tanh"
ACTIVATIONS = (RELU, TANH)


@dataclass
class MlpParams:
    widths: list
    weights: list
    biases: list
    activation: str = RELU

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ContractViolation(f"invalid layer widths {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ContractViolation(f"unknown activation {self.activation!r}")
        if len(self.weights) != self.layer_count or len(self.biases) != self.layer_count:
            raise ContractViolation("one weight matrix and one bias per layer")
        for i, (fan_in, fan_out) in enumerate(zip(self.widths, self.widths[1:])):
            self.weights[i] = as_matrix(self.weights[i], name=f"layer{i}.weight", rows=fan_in, cols=fan_out)
            self.biases[i] = np.array(self.biases[i], dtype=np.float64).reshape(-1)
            if self.biases[i].size != fan_out:
                raise ContractViolation(f"layer{i}.bias must have {fan_out} entries")

    @property
    def layer_count(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def embedding_dim(self) -> int:
        return self.widths[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            widths=list(self.widths),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre_activations: list
    activations: list


@dataclass
class MlpGradients:
    weights: list
    biases: list
    d_inputs: np.ndarray


def init_mlp(rng, widths, activation=RELU) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    widths = [int(w) for w in widths]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths, widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(widths=widths, weights=weights, biases=biases, activation=activation)


def identity_mlp(dim: int) -> MlpParams:
    return MlpParams(widths=[dim, dim], weights=[np.eye(dim)], biases=[np.zeros(dim)])


def _activate(z, activation):
    if activation == RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_derivative(z, a, activation):
    if activation == RELU:
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def mlp_forward(params: MlpParams, inputs):
    inputs = as_matrix(inputs, name="inputs", cols=params.input_dim)
    pre, acts = [], []
    a = inputs
    last = params.layer_count - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b[None, :]
        a = z if i == last else _activate(z, params.activation)
        pre.append(z)
        acts.append(a)
    return a, ForwardCache(inputs=inputs, pre_activations=pre, activations=acts)


def mlp_backward(params: MlpParams, cache: ForwardCache, d_embeddings) -> MlpGradients:
    """Gradients of sum(d_embeddings * embeddings) w.r.t. every parameter and the inputs."""
    n = cache.inputs.shape[0]
    upstream = as_matrix(d_embeddings, name="d_embeddings", rows=n, cols=params.embedding_dim)
    d_weights = [None] * params.layer_count
    d_biases = [None] * params.layer_count
    for i in reversed(range(params.layer_count)):
        if i != params.layer_count - 1:
            upstream = upstream * _activation_derivative(
                cache.pre_activations[i], cache.activations[i], params.activation
            )
        previous = cache.inputs if i == 0 else cache.activations[i - 1]
        d_weights[i] = previous.T @ upstream
        d_biases[i] = upstream.sum(axis=0)
        upstream = upstream @ params.weights[i].T
    return MlpGradients(weights=d_weights, biases=d_biases, d_inputs=upstream)
