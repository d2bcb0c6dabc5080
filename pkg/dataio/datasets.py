from dataclasses import dataclass

import numpy as np

from numkit.exceptions import ContractViolation
from numkit.linalg import EPS, check_finite


@dataclass(frozen=True)
class LabeledDataset:
    """
    inputs is N x in, labels holds N class indices in [0, class_count).
    N = 0 is allowed only for derived splits; every loader rejects empty sources.
    """

    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64, order="C")
        if inputs.ndim != 2:
            raise ContractViolation(f"inputs must be N x in, got shape {inputs.shape}")
        labels = np.array(self.labels).reshape(-1)
        if labels.size != inputs.shape[0]:
            raise ContractViolation(f"{inputs.shape[0]} inputs but {labels.size} labels")
        if labels.size and not np.all(labels == np.floor(labels)):
            raise ContractViolation("labels must be integers")
        labels = labels.astype(np.int64)
        class_count = int(self.class_count)
        if class_count < 1:
            raise ContractViolation("class_count must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= class_count):
            raise ContractViolation(f"labels must lie in [0, {class_count})")
        check_finite(inputs, where="dataset inputs", axis_name="sample")
        inputs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", class_count)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.inputs[indices], self.labels[indices], self.class_count)

    def head(self, count: int) -> "LabeledDataset":
        return self.subset(np.arange(min(int(count), len(self))))


def require_nonempty(dataset: LabeledDataset, source) -> LabeledDataset:
    if len(dataset) == 0:
        raise ContractViolation(f"{source} contains no samples")
    return dataset


@dataclass(frozen=True)
class PairSet:
    """Rows of (index_a, index_b, same_class)."""

    index_a: np.ndarray
    index_b: np.ndarray
    same_class: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.index_a, dtype=np.int64).reshape(-1)
        b = np.asarray(self.index_b, dtype=np.int64).reshape(-1)
        same = np.asarray(self.same_class, dtype=bool).reshape(-1)
        if not a.size == b.size == same.size:
            raise ContractViolation("pair columns must have equal length")
        object.__setattr__(self, "index_a", a)
        object.__setattr__(self, "index_b", b)
        object.__setattr__(self, "same_class", same)

    def __len__(self) -> int:
        return self.same_class.size

    def rows(self):
        return list(zip(self.index_a.tolist(), self.index_b.tolist(), self.same_class.tolist()))

    def validate(self, dataset: LabeledDataset):
        n = len(dataset)
        if len(self) and (min(self.index_a.min(), self.index_b.min()) < 0 or max(self.index_a.max(), self.index_b.max()) >= n):
            raise ContractViolation("pair index outside the dataset")
        if not (self.same_class.any() and (~self.same_class).any()):
            raise ContractViolation("pair set must contain both genuine and impostor pairs")
        agree = dataset.labels[self.index_a] == dataset.labels[self.index_b]
        if not np.array_equal(agree, self.same_class):
            raise ContractViolation("same_class flags disagree with dataset labels")


@dataclass(frozen=True)
class InputScaling:
    """
    x -> (x - center) / scale with one scale shared by every coordinate, so
    the relative geometry of the inputs is kept. Fitted on the training split.
    """

    center: np.ndarray
    scale: float

    @classmethod
    def fit(cls, dataset: LabeledDataset) -> "InputScaling":
        if len(dataset) == 0:
            raise ContractViolation("cannot fit input scaling on an empty split")
        center = dataset.inputs.mean(axis=0)
        rms = float(np.sqrt(np.mean((dataset.inputs - center) ** 2)))
        return cls(center=center, scale=rms if rms > EPS else 1.0)

    def apply(self, dataset: LabeledDataset) -> LabeledDataset:
        if dataset.input_dim != self.center.size:
            raise ContractViolation(f"scaling fitted on {self.center.size} inputs, dataset has {dataset.input_dim}")
        return LabeledDataset((dataset.inputs - self.center) / self.scale, dataset.labels, dataset.class_count)
