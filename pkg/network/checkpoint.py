"""
Binary checkpoint codec.

Layout (all integers little-endian uint32 unless noted, floats little-endian
float64, matrices row-major):

    magic            8 bytes  b"HSXCKPT\\0"
    version          uint32   1
    loss tag         uint8 length + ASCII bytes
    activation tag   uint8    0 relu, 1 tanh
    layer count L    uint32
    widths           (L + 1) x uint32
    per layer        weight (w_i x w_{i+1}) then bias (w_{i+1})
    class count K    uint32
    proxies          d x K
    radii            K
    head bias        K
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from geometry.proxies import ProxyBank
from numkit.exceptions import ContractViolation, HyperSpaceXError

from .mlp import ACTIVATIONS, MlpParams

logger = logging.getLogger(__name__)

MAGIC = b"HSXCKPT\x00"
VERSION = 1
_FLOAT = np.dtype("<f8")


class CheckpointFormatError(HyperSpaceXError):
    pass


@dataclass
class ModelCheckpoint:
    loss_name: str
    backbone: MlpParams
    bank: ProxyBank
    head_bias: np.ndarray

    def __post_init__(self):
        self.head_bias = np.array(self.head_bias, dtype=np.float64).reshape(-1)
        if self.backbone.embedding_dim != self.bank.dim:
            raise ContractViolation("backbone output width must equal the proxy dimension")
        if self.head_bias.size != self.bank.class_count:
            raise ContractViolation("head bias length must equal the class count")


def encode_checkpoint(checkpoint: ModelCheckpoint) -> bytes:
    tag = checkpoint.loss_name.encode("ascii")
    if len(tag) > 255:
        raise ContractViolation("loss tag too long")
    params = checkpoint.backbone
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<B", len(tag)),
        tag,
        struct.pack("<B", ACTIVATIONS.index(params.activation)),
        struct.pack("<I", params.layer_count),
        struct.pack(f"<{len(params.widths)}I", *params.widths),
    ]
    for W, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(W, dtype=_FLOAT).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=_FLOAT).tobytes())
    parts.append(struct.pack("<I", checkpoint.bank.class_count))
    parts.append(np.ascontiguousarray(checkpoint.bank.W, dtype=_FLOAT).tobytes())
    parts.append(np.ascontiguousarray(checkpoint.bank.radii, dtype=_FLOAT).tobytes())
    parts.append(np.ascontiguousarray(checkpoint.head_bias, dtype=_FLOAT).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointFormatError(f"checkpoint truncated at byte {self.offset}")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, *shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * _FLOAT.itemsize), dtype=_FLOAT).astype(np.float64).reshape(shape)


def decode_checkpoint(payload: bytes) -> ModelCheckpoint:
    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError("not a checkpoint file (bad magic)")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    (tag_length,) = reader.unpack("<B")
    loss_name = reader.take(tag_length).decode("ascii")
    (activation_tag,) = reader.unpack("<B")
    if activation_tag >= len(ACTIVATIONS):
        raise CheckpointFormatError(f"unknown activation tag {activation_tag}")
    (layer_count,) = reader.unpack("<I")
    widths = list(reader.unpack(f"<{layer_count + 1}I"))
    weights, biases = [], []
    for fan_in, fan_out in zip(widths, widths[1:]):
        weights.append(reader.floats(fan_in, fan_out))
        biases.append(reader.floats(fan_out))
    (class_count,) = reader.unpack("<I")
    proxies = reader.floats(widths[-1], class_count)
    radii = reader.floats(class_count)
    head_bias = reader.floats(class_count)
    if reader.offset != len(payload):
        raise CheckpointFormatError(f"{len(payload) - reader.offset} trailing bytes after checkpoint")
    backbone = MlpParams(widths=widths, weights=weights, biases=biases, activation=ACTIVATIONS[activation_tag])
    return ModelCheckpoint(loss_name=loss_name, backbone=backbone, bank=ProxyBank(W=proxies, radii=radii), head_bias=head_bias)


def save_checkpoint(path, checkpoint: ModelCheckpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.info("checkpoint saved path=%s loss=%s widths=%s", path, checkpoint.loss_name, checkpoint.backbone.widths)
    return path


def load_checkpoint(path) -> ModelCheckpoint:
    path = Path(path)
    checkpoint = decode_checkpoint(path.read_bytes())
    logger.info("checkpoint loaded path=%s loss=%s", path, checkpoint.loss_name)
    return checkpoint
