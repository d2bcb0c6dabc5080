"""
Multi-run experiments: the component ablation, one-parameter sweeps and
the loss comparison. Every sub-run trains into its own directory under
the experiment's output directory.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from evaluation.convergence import PLATEAU_TOLERANCE, convergence_summary
from evaluation.stats import mcnemar
from losses.distarc import ABLATION_ROWS
from losses.heads import DISTARC, LOSS_NAMES
from numkit.exceptions import ContractViolation

from .config import RunConfig
from .training import Trainer
from .utils import log_sweep_result

logger = logging.getLogger(__name__)

# sweepable parameter -> LossSpec field and value parser
SWEEP_PARAMETERS = {
    "radii_gap": ("radii_gap", float),
    "lambda": ("lambda_", float),
    "hyperspheres": ("hyperspheres", int),
    "margin": ("margin", float),
}


@dataclass
class SeriesRow:
    """Accuracies of one configuration across the seed set."""

    label: str
    accuracies: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def low(self) -> float:
        return float(np.min(self.accuracies))

    @property
    def high(self) -> float:
        return float(np.max(self.accuracies))

    def as_row(self) -> list:
        return [self.label, self.mean, self.low, self.high, *self.accuracies]


def series_headers(first, seeds) -> list:
    return [first, "mean", "min", "max", *(f"seed{s}" for s in seeds)]


def _train(config: RunConfig, label: str, seed: int, out_dir: Path):
    seeded = config.with_seed(seed)
    return Trainer(seeded, run_label=f"{label}:seed{seed}", output_dir=out_dir / label / f"seed{seed}").fit()


def run_ablation(config: RunConfig, seeds, out_dir, run=None) -> list:
    """One row per ablation mask, in table order, for a DistArc configuration."""
    if config.loss.name != DISTARC:
        logger.warning("ablation forces loss=distarc (config has %s)", config.loss.name)
    rows = []
    for mask in ABLATION_ROWS:
        variant = config.with_loss(name=DISTARC, use_cos_phi=mask.use_cos_phi, use_delta=mask.use_delta)
        row = SeriesRow(mask.label)
        for seed in seeds:
            acc = _train(variant, mask.label, seed, Path(out_dir)).final.acc_radial
            row.accuracies.append(acc)
            log_sweep_result(run=run, parameter="mask", value=mask.label, seed=seed, accuracy=acc)
        logger.info("ablation row=%s mean=%.4f", mask.label, row.mean)
        rows.append(row)
    return rows


def parse_sweep_values(parameter: str, raw: str) -> list:
    if parameter not in SWEEP_PARAMETERS:
        raise ContractViolation(f"cannot sweep {parameter!r}; choose from {sorted(SWEEP_PARAMETERS)}")
    _, parse = SWEEP_PARAMETERS[parameter]
    try:
        values = [parse(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ContractViolation(f"bad values for {parameter}: {raw!r}")
    if not values:
        raise ContractViolation("no sweep values given")
    return values


def run_sweep(config: RunConfig, parameter: str, values, seeds, out_dir, run=None) -> list:
    attr, _ = SWEEP_PARAMETERS[parameter]
    rows = []
    for value in values:
        changes = {attr: value}
        if parameter == "lambda":
            # constant lambda for the whole run
            changes.update(lambda_increment=0.0, lambda_cap=None)
        variant = config.with_loss(**changes)
        label = f"{parameter}={value}"
        row = SeriesRow(label)
        for seed in seeds:
            acc = _train(variant, label, seed, Path(out_dir)).primary_accuracy()
            row.accuracies.append(acc)
            log_sweep_result(run=run, parameter=parameter, value=value, seed=seed, accuracy=acc)
        logger.info("sweep %s mean=%.4f", label, row.mean)
        rows.append(row)
    return rows


@dataclass
class ComparisonEntry:
    loss_name: str
    accuracy: float
    losses: list
    summary: object
    correct: np.ndarray


def run_comparison(config: RunConfig, loss_names, out_dir, run=None) -> list:
    """Train each loss on the same data and seed; DistArc is scored radially, the rest by the linear head."""
    entries = []
    for name in loss_names:
        if name not in LOSS_NAMES:
            raise ContractViolation(f"unknown loss {name!r}")
        result = _train(config.with_loss(name=name), name, config.seed, Path(out_dir))
        correct = result.final.radial_correct if name == DISTARC else result.final.head_correct
        entry = ComparisonEntry(
            loss_name=name,
            accuracy=result.primary_accuracy(),
            losses=list(result.epoch_losses),
            summary=convergence_summary(result.epoch_losses, relative_tolerance=PLATEAU_TOLERANCE),
            correct=correct,
        )
        log_sweep_result(run=run, parameter="loss", value=name, seed=config.seed, accuracy=entry.accuracy)
        entries.append(entry)
    return entries


def comparison_rows(entries) -> tuple:
    headers = [
        "loss", "accuracy", "first_loss", "final_loss", "min_loss", "min_epoch",
        "decreased", "smoothed_non_increasing", "mcnemar_vs_distarc", "p_value",
    ]
    reference = next((e for e in entries if e.loss_name == DISTARC), None)
    rows = []
    for e in entries:
        statistic, p_value = "", ""
        if reference is not None and e is not reference:
            test = mcnemar(reference.correct, e.correct)
            statistic, p_value = test.statistic, test.p_value
        s = e.summary
        rows.append([
            e.loss_name, e.accuracy, s.first_loss, s.final_loss, s.min_loss, s.min_epoch,
            s.decreased, s.smoothed_non_increasing, statistic, p_value,
        ])
    return headers, rows


def loss_curve_rows(entries) -> tuple:
    headers = ["epoch", *(e.loss_name for e in entries)]
    epochs = max(len(e.losses) for e in entries)
    rows = [
        [epoch + 1, *(e.losses[epoch] if epoch < len(e.losses) else "" for e in entries)]
        for epoch in range(epochs)
    ]
    return headers, rows
