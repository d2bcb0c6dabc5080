"""
Line-delimited metric records: one JSON object per line, keys sorted.
"""
import json
import math
from pathlib import Path

from .exceptions import DatasetFormatError

METRIC_FIELDS = ("epoch", "loss", "acc_radial", "acc_head", "lambda", "seed")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_record(record: dict) -> str:
    return json.dumps({k: _clean(v) for k, v in record.items()}, sort_keys=True, allow_nan=False)


def append_record(path, record: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        handle.write(format_record(record) + "\n")


def read_records(path) -> list:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{line_no}: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise DatasetFormatError(f"{path}:{line_no}: record is not an object")
            records.append(record)
    return records
