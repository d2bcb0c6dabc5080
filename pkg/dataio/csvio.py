"""
Feature tables: header `label,f0,f1,...`, one sample per row, floats written
with 17 significant digits so a write/read cycle is lossless.
"""
import csv
import logging
from pathlib import Path

import numpy as np

from numkit.exceptions import ContractViolation

from .datasets import LabeledDataset, require_nonempty
from .exceptions import DatasetError, DatasetFormatError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def feature_header(dim: int) -> list:
    return ["label"] + [f"f{i}" for i in range(dim)]


def load_csv(path, class_count=None, allow_empty=False) -> LabeledDataset:
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None:
                raise DatasetFormatError(f"{path}: empty file")
            if not header or header[0].strip() != "label" or header[1:] != feature_header(len(header) - 1)[1:]:
                raise DatasetFormatError(f"{path}: header must be label,f0,f1,...")
            labels, rows = [], []
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DatasetFormatError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
                try:
                    label = float(row[0])
                    values = [float(v) for v in row[1:]]
                except ValueError as exc:
                    raise DatasetFormatError(f"{path}:{line_no}: {exc}") from exc
                if label != int(label):
                    raise DatasetFormatError(f"{path}:{line_no}: label {row[0]!r} is not an integer")
                labels.append(int(label))
                rows.append(values)
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    dim = len(header) - 1
    inputs = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    labels = np.array(labels, dtype=np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    try:
        dataset = LabeledDataset(inputs, labels, class_count)
    except ContractViolation as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc
    if not allow_empty:
        dataset = require_nonempty(dataset, path)
    logger.info("csv loaded path=%s n=%d in=%d classes=%d", path, len(dataset), dim, dataset.class_count)
    return dataset


def write_feature_csv(path, features, labels) -> Path:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if features.ndim != 2 or features.shape[0] != labels.size:
        raise ContractViolation("features must be N x d with one label per row")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(feature_header(features.shape[1]))
        for label, row in zip(labels.tolist(), features):
            writer.writerow([label] + [FLOAT_FORMAT % v for v in row])
    logger.info("features written path=%s rows=%d dim=%d", path, labels.size, features.shape[1])
    return path
