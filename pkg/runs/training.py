"""
Training and evaluation of an MLP backbone under one of the loss heads.

A run draws four independent random streams from its seed (data, init,
shuffle, pairs), so changing the batch order never changes the dataset
or the initial weights.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dataio.csvio import load_csv, write_feature_csv
from dataio.datasets import InputScaling, LabeledDataset
from dataio.exceptions import DatasetError
from dataio.idx import load_idx
from dataio.records import append_record
from dataio.splits import train_test_split
from dataio.synthetic import synth_blobs
from evaluation.predict import (
    accuracy,
    predict_linear_head_batch,
    predict_radial_angular_batch,
)
from geometry.proxies import init_proxy_bank
from losses.heads import DISTARC, head_loss_and_grads
from network.checkpoint import ModelCheckpoint, save_checkpoint
from network.mlp import init_mlp, mlp_backward, mlp_forward
from numkit.exceptions import ContractViolation, NonFiniteError
from numkit.linalg import ordered_mean
from numkit.rng import spawn_rngs
from optimizer.sgd import SgdState, named_parameters, sgd_step

from .config import RunConfig, resolve_output_dir, write_resolved_config
from .forms import DATASET_CSV, DATASET_IDX, DATASET_SYNTH
from .utils import log_metric

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "model.ckpt"
FEATURES_FILE = "features.csv"

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"

# Order of the child streams drawn from the run seed.
STREAM_DATA, STREAM_INIT, STREAM_SHUFFLE, STREAM_PAIRS = range(4)


@dataclass(frozen=True)
class EvaluationReport:
    embeddings: np.ndarray
    labels: np.ndarray
    radial_predictions: np.ndarray
    head_predictions: np.ndarray
    loss: float

    @property
    def acc_radial(self) -> float:
        return accuracy(self.radial_predictions, self.labels)

    @property
    def acc_head(self) -> float:
        return accuracy(self.head_predictions, self.labels)

    @property
    def agreement(self) -> float:
        """Fraction of samples on which both measures pick the same class."""
        return accuracy(self.radial_predictions, self.head_predictions)

    @property
    def radial_correct(self) -> np.ndarray:
        return self.radial_predictions == self.labels

    @property
    def head_correct(self) -> np.ndarray:
        return self.head_predictions == self.labels


@dataclass
class TrainingResult:
    checkpoint: ModelCheckpoint
    output_dir: Path
    train: LabeledDataset
    test: LabeledDataset
    epoch_losses: list = field(default_factory=list)
    final: EvaluationReport = None

    @property
    def eval_split(self) -> LabeledDataset:
        return self.test if len(self.test) else self.train

    def primary_accuracy(self) -> float:
        """Radial-angular accuracy for DistArc models, linear-head accuracy otherwise."""
        if self.final is None:
            return math.nan
        return self.final.acc_radial if self.checkpoint.loss_name == DISTARC else self.final.acc_head

    def summary(self) -> dict:
        final = self.final
        return {
            "loss": self.epoch_losses[-1] if self.epoch_losses else None,
            "acc_radial": None if final is None else final.acc_radial,
            "acc_head": None if final is None else final.acc_head,
            "agreement": None if final is None else final.agreement,
            "epochs": len(self.epoch_losses),
        }


def load_datasets(config: RunConfig, rng):
    """(train, test) for the configured source; test may be empty when test_fraction is 0."""
    spec = config.dataset
    if spec.kind == DATASET_SYNTH:
        full = synth_blobs(rng, spec.classes, spec.input_dim, spec.per_class, spec.spread)
        train, test = train_test_split(full, rng, spec.test_fraction, spec.disjoint_classes)
        return _scaled(spec, train, test)

    if spec.kind == DATASET_IDX:
        train = load_idx(spec.train_images, spec.train_labels)
        test = None
        if spec.test_images:
            test = load_idx(spec.test_images, spec.test_labels, class_count=train.class_count)
    elif spec.kind == DATASET_CSV:
        train = load_csv(spec.path)
        test = load_csv(spec.test_path, class_count=train.class_count) if spec.test_path else None
    else:
        raise ContractViolation(f"unknown dataset kind {spec.kind!r}")

    if spec.subset is not None:
        train = train.head(spec.subset)
    if test is None:
        train, test = train_test_split(train, rng, spec.test_fraction, spec.disjoint_classes)
    return _scaled(spec, train, test)


def _scaled(spec, train: LabeledDataset, test: LabeledDataset):
    if not spec.standardize:
        return train, test
    scaling = InputScaling.fit(train)
    logger.info("inputs standardized center_norm=%.6g scale=%.6g", float(np.linalg.norm(scaling.center)), scaling.scale)
    return scaling.apply(train), scaling.apply(test)


def init_model(config: RunConfig, rng, input_dim: int, class_count: int) -> ModelCheckpoint:
    backbone = init_mlp(rng, config.backbone.layer_widths(input_dim), config.backbone.activation)
    bank = init_proxy_bank(
        rng,
        config.backbone.embedding_dim,
        class_count,
        gap=config.loss.radii_gap,
        hyperspheres=config.loss.hyperspheres,
    )
    return ModelCheckpoint(
        loss_name=config.loss.name,
        backbone=backbone,
        bank=bank,
        head_bias=np.zeros(class_count),
    )


def embed(checkpoint: ModelCheckpoint, dataset: LabeledDataset) -> np.ndarray:
    if len(dataset) == 0:
        return np.zeros((0, checkpoint.backbone.embedding_dim))
    embeddings, _ = mlp_forward(checkpoint.backbone, dataset.inputs)
    return embeddings


def evaluate_model(checkpoint: ModelCheckpoint, dataset: LabeledDataset, head_settings=None) -> EvaluationReport:
    """Both predictive measures on one dataset, plus the head loss when settings are given."""
    embeddings = embed(checkpoint, dataset)
    bank = checkpoint.bank
    loss = math.nan
    if head_settings is not None and len(dataset):
        loss = head_loss_and_grads(head_settings, embeddings, dataset.labels, bank, checkpoint.head_bias).loss
    return EvaluationReport(
        embeddings=embeddings,
        labels=dataset.labels,
        radial_predictions=predict_radial_angular_batch(embeddings, bank),
        head_predictions=predict_linear_head_batch(embeddings, bank.W, checkpoint.head_bias),
        loss=loss,
    )


def class_mean_norms(embeddings, labels, class_count: int) -> np.ndarray:
    """Mean embedding norm per class; NaN for classes absent from the set."""
    norms = np.linalg.norm(embeddings, axis=1) if len(embeddings) else np.zeros(0)
    out = np.full(class_count, np.nan)
    for k in range(class_count):
        mask = labels == k
        if mask.any():
            out[k] = float(norms[mask].mean())
    return out


def _epoch_record(epoch, split, seed, run_label, loss=None, acc_radial=None, acc_head=None, lam=None):
    return {
        "epoch": epoch,
        "split": split,
        "seed": seed,
        "run": run_label,
        "loss": loss,
        "acc_radial": acc_radial,
        "acc_head": acc_head,
        "lambda": lam,
    }


class Trainer:
    """
    One training run. Outputs land in `output_dir`: the resolved config,
    metrics.jsonl, model.ckpt and features.csv.
    """

    def __init__(self, config: RunConfig, *, run=None, run_label=None, output_dir=None, write_outputs=True):
        self.config = config
        self.run = run
        self.run_label = run_label or config.loss.name
        self.output_dir = Path(output_dir) if output_dir else resolve_output_dir(config, self.run_label)
        self.write_outputs = write_outputs
        self.metrics_path = self.output_dir / METRICS_FILE

    def _emit(self, record):
        if self.write_outputs:
            append_record(self.metrics_path, record)
        log_metric(
            run=self.run,
            split=record["split"],
            epoch=record["epoch"],
            seed=record["seed"],
            loss=_finite_or_none(record["loss"]),
            acc_radial=record["acc_radial"],
            acc_head=record["acc_head"],
            lambda_value=record["lambda"],
        )

    def fit(self) -> TrainingResult:
        config = self.config
        rngs = spawn_rngs(config.seed, 4)
        train, test = load_datasets(config, rngs[STREAM_DATA])
        if len(train) == 0:
            raise DatasetError("training split is empty")
        model = init_model(config, rngs[STREAM_INIT], train.input_dim, train.class_count)

        if self.write_outputs:
            write_resolved_config(config, self.output_dir)
            if self.metrics_path.exists():
                self.metrics_path.unlink()

        logger.info(
            "training start run=%s loss=%s seed=%d train=%d test=%d epochs=%d out=%s",
            self.run_label, config.loss.name, config.seed, len(train), len(test), config.epochs, self.output_dir,
        )
        sgd = config.optimizer.sgd_config()
        state = SgdState()
        params = named_parameters(model.backbone, model.bank.W, model.head_bias)
        shuffle_rng = rngs[STREAM_SHUFFLE]
        result = TrainingResult(checkpoint=model, output_dir=self.output_dir, train=train, test=test)

        for epoch in range(config.epochs):
            settings = config.loss.head_settings(epoch)
            lam = settings.distarc.lambda_
            order = shuffle_rng.permutation(len(train))
            sample_losses = []
            for step, start in enumerate(range(0, len(train), config.batch_size)):
                batch = order[start:start + config.batch_size]
                X, y = train.inputs[batch], train.labels[batch]
                embeddings, cache = mlp_forward(model.backbone, X)
                head = head_loss_and_grads(settings, embeddings, y, model.bank, model.head_bias)
                if not math.isfinite(head.loss):
                    raise NonFiniteError(
                        f"non-finite loss at epoch {epoch + 1} step {step + 1}",
                        index=step,
                        where=f"epoch {epoch + 1}",
                    )
                sample_losses.append(head.per_sample)
                if sgd is None:
                    continue
                # d_x is already the gradient of the batch-mean loss
                backbone_grads = mlp_backward(model.backbone, cache, head.d_x)
                grads = named_parameters(
                    _Gradients(backbone_grads.weights, backbone_grads.biases), head.d_w, head.d_b,
                )
                sgd_step(params, grads, sgd, state)
                model.bank.check_columns()

            epoch_loss = ordered_mean(np.concatenate(sample_losses))
            result.epoch_losses.append(epoch_loss)
            self._emit(_epoch_record(epoch + 1, SPLIT_TRAIN, config.seed, self.run_label, loss=epoch_loss, lam=lam))

            last = epoch + 1 == config.epochs
            if len(test) and ((epoch + 1) % config.eval_every == 0 or last):
                report = evaluate_model(model, test, settings)
                self._emit(_epoch_record(
                    epoch + 1, SPLIT_TEST, config.seed, self.run_label,
                    loss=report.loss, acc_radial=report.acc_radial, acc_head=report.acc_head, lam=lam,
                ))
                logger.info(
                    "epoch=%d loss=%.6f acc_radial=%.4f acc_head=%.4f lambda=%g",
                    epoch + 1, epoch_loss, report.acc_radial, report.acc_head, lam,
                )
            else:
                logger.debug("epoch=%d loss=%.6f lambda=%g", epoch + 1, epoch_loss, lam)

        result.final = evaluate_model(model, result.eval_split)
        if self.write_outputs:
            save_checkpoint(self.output_dir / CHECKPOINT_FILE, model)
            write_feature_csv(self.output_dir / FEATURES_FILE, result.final.embeddings, result.final.labels)
        logger.info(
            "training done run=%s acc_radial=%.4f acc_head=%.4f",
            self.run_label, result.final.acc_radial, result.final.acc_head,
        )
        return result


@dataclass
class _Gradients:
    """Shape-compatible stand-in for MlpParams so named_parameters can label gradients."""

    weights: list
    biases: list


def _finite_or_none(value):
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def train_model(config: RunConfig, **kwargs) -> TrainingResult:
    return Trainer(config, **kwargs).fit()


def radial_margin_report(checkpoint: ModelCheckpoint, dataset: LabeledDataset) -> dict:
    """Per-class mean embedding norm against the assigned radius."""
    embeddings = embed(checkpoint, dataset)
    means = class_mean_norms(embeddings, dataset.labels, checkpoint.bank.class_count)
    radii = checkpoint.bank.radii
    return {
        "mean_norms": means.tolist(),
        "radii": radii.tolist(),
        "relative_error": (np.abs(means - radii) / radii).tolist(),
    }

