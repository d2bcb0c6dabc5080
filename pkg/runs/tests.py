"""
Tests for the Runs app - configuration, training loop, ledger, plotting, export and commands.
"""
import csv
import math
import tempfile
import xml.etree.ElementTree as ET
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from openpyxl import load_workbook

from dataio.csvio import load_csv, write_feature_csv
from dataio.datasets import InputScaling
from dataio.records import read_records
from evaluation.convergence import PLATEAU_TOLERANCE, convergence_summary
from losses.heads import HeadResult
from network.checkpoint import load_checkpoint
from numkit.exceptions import DegenerateProxyError, NonFiniteError
from numkit.rng import spawn_rngs

from .config import ConfigError, load_run_config, write_resolved_config
from .experiments import run_ablation, run_sweep
from .export import format_table, write_table
from .models import EpochMetric, SweepResult, TrainingRun
from .plotting import CANVAS_SIZE, MARGIN, fit_viewport, render_latent_svg
from .training import (
    CHECKPOINT_FILE,
    FEATURES_FILE,
    METRICS_FILE,
    STREAM_INIT,
    Trainer,
    class_mean_norms,
    embed,
    init_model,
    load_datasets,
    radial_margin_report,
)
from .utils import finish_run, log_metric, start_run

SVG_NS = "{http://www.w3.org/2000/svg}"

SYNTH_INI = """\
[run]
config_version = 1
seed = {seed}
epochs = {epochs}
batch_size = 16
output_dir = {out}

[dataset]
kind = synth
classes = 3
input_dim = 2
per_class = 20
spread = 0.5
test_fraction = {test_fraction}
pairs_per_polarity = 10

[backbone]
widths = 8
activation = tanh
embedding_dim = {dim}

[loss]
name = {loss}
radii_gap = 10

[optimizer]
learning_rate = {lr}
"""


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()

    def write_config(self, name="run.ini", **overrides):
        values = {
            "seed": 0,
            "epochs": 3,
            "out": self.tmp / "out",
            "test_fraction": 0.25,
            "dim": 2,
            "loss": "distarc",
            "lr": 0.01,
        }
        values.update(overrides)
        path = self.tmp / name
        path.write_text(SYNTH_INI.format(**values), encoding="utf-8")
        return path

    def write_raw(self, text, name="raw.ini"):
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path


class RunConfigTest(TempDirMixin, SimpleTestCase):
    """Tests for loading and validating run configuration files."""

    def test_defaults_fill_missing_keys(self):
        """Keys absent from the file take the documented defaults."""
        config = load_run_config(self.write_config())
        self.assertEqual(config.epochs, 3)
        self.assertEqual(config.backbone.widths, (8,))
        self.assertAlmostEqual(config.loss.margin, 0.4)
        self.assertAlmostEqual(config.loss.lambda_, 0.003)
        self.assertAlmostEqual(config.optimizer.weight_decay, 5e-4)
        self.assertEqual(config.optimizer.momentum, 0.0)
        self.assertTrue(config.loss.use_cos_phi)
        self.assertFalse(config.loss.symmetric_denominator)
        self.assertEqual(config.eval_every, 1)

    def test_seed_and_output_overrides(self):
        """--seed and --out replace the file values."""
        config = load_run_config(self.write_config(), seed=7, output_dir=self.tmp / "elsewhere")
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.output_dir, self.tmp / "elsewhere")

    def test_embedding_dim_below_two_rejected(self):
        """d = 1 is a configuration error naming the key."""
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self.write_config(dim=1))
        self.assertIn("backbone.embedding_dim", ctx.exception.errors)

    def test_zero_epochs_rejected(self):
        """epochs must be at least 1."""
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(self.write_config(epochs=0))
        self.assertIn("run.epochs", ctx.exception.errors)

    def test_missing_dataset_file_rejected(self):
        """Referenced paths must exist when the config is loaded."""
        path = self.write_raw(
            "[run]\nconfig_version = 1\nepochs = 1\n"
            "[dataset]\nkind = idx\ntrain_images = missing.idx\ntrain_labels = missing-labels.idx\n"
            "[backbone]\nembedding_dim = 2\n[loss]\nname = distarc\n"
        )
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn("dataset.train_images", ctx.exception.errors)
        self.assertIn("dataset.train_labels", ctx.exception.errors)

    def test_unsupported_version_rejected(self):
        """Only config_version 1 is understood."""
        path = self.write_raw(self.write_config().read_text().replace("config_version = 1", "config_version = 2"))
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_unknown_key_rejected(self):
        """Typos in keys are reported rather than ignored."""
        path = self.write_raw(self.write_config().read_text().replace("radii_gap = 10", "radius_gap = 10"))
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn("loss.radius_gap", ctx.exception.errors)

    def test_bad_boolean_rejected(self):
        """Boolean keys accept only true/false spellings."""
        path = self.write_raw(self.write_config().read_text().replace("radii_gap = 10", "use_delta = maybe"))
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_missing_file(self):
        """A config path that does not exist is a configuration error."""
        with self.assertRaises(ConfigError):
            load_run_config(self.tmp / "nope.ini")

    def test_resolved_config_reloads_identically(self):
        """The resolved config written next to outputs loads back to the same RunConfig."""
        config = load_run_config(self.write_config())
        resolved = write_resolved_config(config, self.tmp / "resolved")
        again = load_run_config(resolved)
        self.assertEqual(again.dataset, config.dataset)
        self.assertEqual(again.backbone, config.backbone)
        self.assertEqual(again.loss, config.loss)
        self.assertEqual(again.optimizer, config.optimizer)
        self.assertEqual(again.output_dir, config.output_dir)
        self.assertEqual(again.eval_every, config.eval_every)

    def test_lambda_schedule_from_config(self):
        """The stepped schedule keys reproduce the face-recognition recipe."""
        path = self.write_raw(self.write_config().read_text().replace(
            "radii_gap = 10",
            "lambda = 0.001\nlambda_increment = 0.001\nlambda_step_every = 10\nlambda_cap = 0.005",
        ))
        loss = load_run_config(path).loss
        self.assertEqual([loss.lambda_at(e) for e in (0, 9, 10, 100)], [0.001, 0.001, 0.002, 0.005])
        self.assertEqual(loss.head_settings(10).distarc.lambda_, 0.002)

    def test_cap_below_base_rejected(self):
        """lambda_cap may not sit below the starting lambda."""
        path = self.write_raw(self.write_config().read_text().replace(
            "radii_gap = 10", "lambda = 0.004\nlambda_cap = 0.001",
        ))
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_standardize_flag_round_trips(self):
        """standardize is off by default and survives the resolved config."""
        self.assertFalse(load_run_config(self.write_config()).dataset.standardize)
        path = self.write_raw(self.write_config().read_text().replace(
            "pairs_per_polarity = 10", "pairs_per_polarity = 10\nstandardize = true",
        ))
        config = load_run_config(path)
        self.assertTrue(config.dataset.standardize)
        self.assertIn("standardize = true", config.to_ini())
        self.assertEqual(load_run_config(write_resolved_config(config, self.tmp / "resolved")).dataset, config.dataset)

    def test_standardize_rejected_for_idx(self):
        """Pixel inputs keep their [0, 1] scaling."""
        path = self.write_raw(
            "[run]\nconfig_version = 1\nepochs = 1\n"
            "[dataset]\nkind = idx\ntrain_images = missing.idx\ntrain_labels = missing-labels.idx\nstandardize = true\n"
            "[backbone]\nembedding_dim = 2\n[loss]\nname = distarc\n"
        )
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn("dataset.standardize", ctx.exception.errors)

    def test_zero_learning_rate_disables_updates(self):
        """lr = 0 is accepted and yields no optimizer."""
        config = load_run_config(self.write_config(lr=0))
        self.assertIsNone(config.optimizer.sgd_config())


class TrainerTest(TempDirMixin, SimpleTestCase):
    """Tests for the training loop outside the ledger."""

    def _config(self, **overrides):
        return load_run_config(self.write_config(**overrides))

    def test_zero_learning_rate_keeps_initial_parameters(self):
        """One epoch at lr = 0 saves exactly the initial model."""
        config = self._config(epochs=1, lr=0)
        Trainer(config).fit()
        saved = load_checkpoint(config.output_dir / CHECKPOINT_FILE)
        initial = init_model(config, spawn_rngs(config.seed, 4)[STREAM_INIT], 2, 3)
        for a, b in zip(saved.backbone.weights, initial.backbone.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(saved.backbone.biases, initial.backbone.biases):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(saved.bank.W, initial.bank.W)
        np.testing.assert_array_equal(saved.bank.radii, initial.bank.radii)
        np.testing.assert_array_equal(saved.head_bias, initial.head_bias)

    def test_same_seed_gives_identical_metrics(self):
        """Two runs of one config and seed write byte-identical metrics and features."""
        first = self._config(out=self.tmp / "a")
        second = self._config(out=self.tmp / "b")
        Trainer(first).fit()
        Trainer(second).fit()
        self.assertEqual(
            (self.tmp / "a" / METRICS_FILE).read_bytes(),
            (self.tmp / "b" / METRICS_FILE).read_bytes(),
        )
        self.assertEqual(
            (self.tmp / "a" / FEATURES_FILE).read_bytes(),
            (self.tmp / "b" / FEATURES_FILE).read_bytes(),
        )

    def test_different_seed_changes_metrics(self):
        """A different seed draws a different run."""
        Trainer(self._config(out=self.tmp / "a", seed=0)).fit()
        Trainer(self._config(out=self.tmp / "b", seed=1)).fit()
        self.assertNotEqual(
            (self.tmp / "a" / METRICS_FILE).read_bytes(),
            (self.tmp / "b" / METRICS_FILE).read_bytes(),
        )

    def test_metric_records(self):
        """One train record per epoch and one test record per evaluation."""
        config = self._config(epochs=4)
        Trainer(config).fit()
        records = read_records(config.output_dir / METRICS_FILE)
        train = [r for r in records if r["split"] == "train"]
        test = [r for r in records if r["split"] == "test"]
        self.assertEqual([r["epoch"] for r in train], [1, 2, 3, 4])
        self.assertEqual([r["epoch"] for r in test], [1, 2, 3, 4])
        for record in records:
            for key in ("epoch", "loss", "acc_radial", "acc_head", "lambda", "seed", "split", "run"):
                self.assertIn(key, record)
        self.assertTrue(all(0.0 <= r["acc_radial"] <= 1.0 for r in test))
        self.assertTrue(all(r["acc_radial"] is None for r in train))
        self.assertEqual({r["lambda"] for r in records}, {0.003})

    def test_rerun_truncates_metrics(self):
        """Training again into the same directory starts a fresh metrics file."""
        config = self._config(epochs=2)
        Trainer(config).fit()
        Trainer(config).fit()
        self.assertEqual(len(read_records(config.output_dir / METRICS_FILE)), 4)

    def test_loss_decreases(self):
        """A short DistArc run lowers the epoch-mean loss."""
        result = Trainer(self._config(epochs=40, lr=0.05)).fit()
        self.assertLess(result.epoch_losses[-1], result.epoch_losses[0])

    def test_every_loss_trains(self):
        """Each head produces finite epoch losses through the shared loop."""
        for loss in ("distarc", "arcface", "cosface", "cross_entropy"):
            with self.subTest(loss=loss):
                result = Trainer(self._config(loss=loss, out=self.tmp / loss, epochs=2)).fit()
                self.assertTrue(all(math.isfinite(v) for v in result.epoch_losses))
                self.assertEqual(result.checkpoint.loss_name, loss)

    def test_empty_test_split(self):
        """With test_fraction 0 the run skips test records and scores the training set."""
        config = self._config(test_fraction=0)
        result = Trainer(config).fit()
        records = read_records(config.output_dir / METRICS_FILE)
        self.assertEqual({r["split"] for r in records}, {"train"})
        self.assertEqual(len(result.final.labels), 60)

    def test_non_finite_loss_aborts_with_context(self):
        """A NaN loss stops training and names the epoch and step."""
        config = self._config()
        nan_result = HeadResult(
            loss=float("nan"),
            per_sample=np.array([np.nan]),
            d_x=np.zeros((1, 2)),
            d_w=np.zeros((2, 3)),
            d_b=np.zeros(3),
        )
        with mock.patch("runs.training.head_loss_and_grads", return_value=nan_result):
            with self.assertRaises(NonFiniteError) as ctx:
                Trainer(config).fit()
        self.assertIn("epoch 1 step 1", str(ctx.exception))

    def test_collapsed_proxy_stops_at_the_step(self):
        """A proxy column zeroed by an update is caught before the next batch."""
        def collapse(params, grads, cfg, state):
            params["proxies"][:, 0] = 0.0
            return state

        config = self._config(loss="cross_entropy")
        with mock.patch("runs.training.sgd_step", side_effect=collapse) as step:
            with self.assertRaises(DegenerateProxyError):
                Trainer(config).fit()
        self.assertEqual(step.call_count, 1)

    def test_dataset_streams_are_independent_of_training(self):
        """Reloading the data stream reproduces the training split."""
        config = self._config()
        result = Trainer(config).fit()
        train, test = load_datasets(config, spawn_rngs(config.seed, 4)[0])
        np.testing.assert_array_equal(train.inputs, result.train.inputs)
        np.testing.assert_array_equal(test.labels, result.test.labels)

    def test_class_mean_norms(self):
        """Per-class mean norms; absent classes are NaN."""
        emb = np.array([[3.0, 4.0], [0.0, 1.0], [6.0, 8.0]])
        means = class_mean_norms(emb, np.array([0, 1, 0]), 3)
        self.assertEqual(means[0], 7.5)
        self.assertEqual(means[1], 1.0)
        self.assertTrue(math.isnan(means[2]))

    def test_standardized_split_uses_training_statistics(self):
        """standardize maps both splits with the center and scale of the training split."""
        raw = self._config()
        scaled = load_run_config(self.write_raw(
            self.write_config().read_text().replace("pairs_per_polarity = 10", "pairs_per_polarity = 10\nstandardize = true"),
        ))
        raw_train, raw_test = load_datasets(raw, spawn_rngs(0, 4)[0])
        train, test = load_datasets(scaled, spawn_rngs(0, 4)[0])
        np.testing.assert_allclose(train.inputs.mean(axis=0), 0.0, atol=1e-12)
        self.assertAlmostEqual(float(np.sqrt(np.mean(train.inputs ** 2))), 1.0, places=12)
        np.testing.assert_allclose(test.inputs, InputScaling.fit(raw_train).apply(raw_test).inputs)
        np.testing.assert_array_equal(test.labels, raw_test.labels)


TREND_INI = """\
[run]
config_version = 1
seed = 0
epochs = 250
batch_size = 16
output_dir = {out}
eval_every = 250

[dataset]
kind = synth
classes = 2
input_dim = 2
per_class = 100
spread = 1.0
test_fraction = 0.2
standardize = true

[backbone]
widths = 64,64
activation = relu
embedding_dim = 2

[loss]
name = distarc
margin = 0.4
lambda = 0.005
radii_gap = 10

[optimizer]
learning_rate = 0.01
weight_decay = 0.0005
"""

TREND_SEEDS = (0, 1, 2)


class SyntheticTrendTest(TempDirMixin, SimpleTestCase):
    """
    Seed-averaged behaviour of DistArc on two standardized blobs with the
    synthetic hyperparameters (margin 0.4, lambda 0.005, lr 0.01, wd 5e-4).
    """

    def _config(self):
        return load_run_config(self.write_raw(TREND_INI.format(out=self.tmp / "out"), name="trend.ini"))

    def test_full_loss_matches_every_ablation_row(self):
        """The full loss is within half a point of each partial mask."""
        rows = {row.label: row for row in run_ablation(self._config(), TREND_SEEDS, self.tmp / "ablation")}
        full = rows["cos_theta+cos_phi+delta"]
        for label in ("cos_theta", "cos_theta+cos_phi", "cos_theta+delta"):
            with self.subTest(row=label):
                self.assertGreaterEqual(full.mean, rows[label].mean - 0.005)
        self.assertGreaterEqual(full.mean, 0.95)

    def test_widest_radii_gap_is_most_accurate(self):
        """Accuracy at gap 10 is at least that of gaps 1 and 5."""
        rows = run_sweep(self._config(), "radii_gap", [1.0, 5.0, 10.0], TREND_SEEDS, self.tmp / "sweep")
        self.assertEqual([row.label for row in rows], ["radii_gap=1.0", "radii_gap=5.0", "radii_gap=10.0"])
        widest = rows[-1].mean
        for row in rows[:-1]:
            with self.subTest(row=row.label):
                self.assertGreaterEqual(widest, row.mean - 0.003)
        self.assertGreaterEqual(widest, 0.95)

    def test_classes_settle_on_their_shells_and_loss_converges(self):
        """Every class mean norm is nearest its own radius and the smoothed loss stops rising."""
        config = self._config()
        norms = []
        for seed in TREND_SEEDS:
            result = Trainer(config.with_seed(seed), output_dir=self.tmp / f"seed{seed}").fit()
            report = radial_margin_report(result.checkpoint, result.test)
            np.testing.assert_array_equal(report["radii"], [10.0, 20.0])
            norms.append(report["mean_norms"])

            summary = convergence_summary(result.epoch_losses, relative_tolerance=PLATEAU_TOLERANCE)
            with self.subTest(seed=seed):
                self.assertTrue(summary.decreased)
                self.assertTrue(summary.smoothed_non_increasing)
        mean_norms = np.mean(norms, axis=0)
        radii = np.array([10.0, 20.0])
        for k, norm in enumerate(mean_norms):
            with self.subTest(label=k):
                self.assertEqual(int(np.argmin(np.abs(radii - norm))), k)
                self.assertLess(abs(norm - radii[k]), 5.0)


class PlottingTest(SimpleTestCase):
    """Tests for the SVG latent-space renderer."""

    def _parse(self, svg):
        return ET.fromstring(svg.encode("utf-8"))

    def test_point_coordinates_follow_viewport(self):
        """Point centers equal the documented affine transform of the features."""
        features = np.array([[1.0, 2.0], [-3.0, 0.5]])
        root = self._parse(render_latent_svg(features, [0, 1], [2.0, 4.0]))
        extent = 1.05 * 4.0
        scale = (CANVAS_SIZE / 2 - MARGIN) / extent
        points = root.findall(f".//{SVG_NS}circle[@class='point']")
        self.assertEqual(len(points), 2)
        for point, (x, y) in zip(points, features):
            self.assertAlmostEqual(float(point.get("cx")), 300 + scale * x, places=5)
            self.assertAlmostEqual(float(point.get("cy")), 300 - scale * y, places=5)

    def test_one_shell_per_distinct_radius(self):
        """Concentric circles sit at each configured radius, scaled."""
        root = self._parse(render_latent_svg(np.zeros((0, 2)), [], [10.0, 20.0, 20.0]))
        shells = root.findall(f".//{SVG_NS}circle[@class='shell']")
        view = fit_viewport(np.zeros((0, 2)), [10.0, 20.0])
        self.assertEqual([float(s.get("data-radius")) for s in shells], [10.0, 20.0])
        self.assertAlmostEqual(float(shells[1].get("r")), view.scale * 20.0, places=5)
        self.assertEqual(root.findall(f".//{SVG_NS}circle[@class='point']"), [])

    def test_proxy_rays(self):
        """A ray ends at each scaled proxy."""
        proxies = np.array([[10.0, 0.0], [0.0, -20.0]])
        root = self._parse(render_latent_svg(np.zeros((0, 2)), [], [10.0, 20.0], proxies))
        rays = root.findall(f".//{SVG_NS}line[@class='proxy']")
        self.assertEqual(len(rays), 2)
        view = fit_viewport(np.zeros((0, 2)), [10.0, 20.0])
        self.assertAlmostEqual(float(rays[1].get("y2")), 300 + view.scale * 20.0, places=5)

    def test_three_dimensional_features_rejected(self):
        """Plotting needs d = 2."""
        with self.assertRaises(ValueError):
            render_latent_svg(np.zeros((4, 3)), [0, 0, 1, 1], [1.0, 2.0])


class ExportTest(TempDirMixin, SimpleTestCase):
    """Tests for CSV and spreadsheet tables."""

    def test_csv_and_xlsx_agree(self):
        """Both files carry the header and every row."""
        headers = ["mask", "mean"]
        rows = [["cos_theta", 0.5], ["cos_theta+cos_phi+delta", 0.75]]
        csv_path, xlsx_path = write_table(self.tmp, "ablation", headers, rows)
        with csv_path.open(newline="") as handle:
            lines = list(csv.reader(handle))
        self.assertEqual(lines[0], headers)
        self.assertEqual(len(lines), 3)
        sheet = load_workbook(xlsx_path).active
        self.assertEqual([c.value for c in sheet[1]], headers)
        self.assertEqual(sheet.cell(row=3, column=2).value, 0.75)

    def test_format_table(self):
        """Text tables align columns and print floats with four decimals."""
        text = format_table(["a", "b"], [["x", 0.5]])
        self.assertEqual(text.splitlines()[1], "x  0.5000")


class LedgerTest(TestCase):
    """Tests for the run ledger helpers."""

    def test_run_lifecycle(self):
        """A run starts RUNNING, collects metrics and finishes DONE."""
        run = start_run(command="train", seed=3, loss_name="distarc")
        self.assertEqual(run.status, TrainingRun.STATUS_RUNNING)
        log_metric(run=run, split="train", epoch=1, seed=3, loss=1.5, lambda_value=0.003)
        finish_run(run, final_metrics={"acc_radial": 0.9})
        run.refresh_from_db()
        self.assertEqual(run.status, TrainingRun.STATUS_DONE)
        self.assertIsNotNone(run.finished)
        self.assertEqual(run.final_metrics["acc_radial"], 0.9)
        self.assertEqual(run.metrics.count(), 1)

    def test_no_run_is_a_no_op(self):
        """Helpers accept run=None without touching the database."""
        self.assertIsNone(log_metric(run=None, split="train", epoch=1, seed=0))
        self.assertEqual(EpochMetric.objects.count(), 0)

    def test_str(self):
        """String form names command, seed and status."""
        run = start_run(command="eval", seed=1)
        self.assertIn("eval", str(run))
        self.assertIn("RUNNING", str(run))


class CommandTest(TempDirMixin, TestCase):
    """Tests for the management commands."""

    def call(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, **kwargs)
        return out.getvalue()

    def _trained(self, **overrides):
        config_path = self.write_config(**overrides)
        self.call("train", config=str(config_path))
        return config_path, self.tmp / "out" / CHECKPOINT_FILE

    def test_train_writes_outputs_and_ledger(self):
        """train writes every artifact and records the run."""
        self._trained()
        out = self.tmp / "out"
        for name in ("resolved_config.ini", METRICS_FILE, CHECKPOINT_FILE, FEATURES_FILE):
            self.assertTrue((out / name).is_file(), name)
        run = TrainingRun.objects.get(command="train")
        self.assertEqual(run.status, TrainingRun.STATUS_DONE)
        self.assertEqual(run.metrics.filter(split="train").count(), 3)
        self.assertEqual(run.metrics.filter(split="test").count(), 3)

    def test_train_config_error_exit_code(self):
        """A bad configuration exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call("train", config=str(self.write_config(epochs=0)))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_train_numeric_failure_exit_code(self):
        """A non-finite loss exits with code 3 and marks the run FAILED."""
        nan_result = HeadResult(float("nan"), np.array([np.nan]), np.zeros((1, 2)), np.zeros((2, 3)), np.zeros(3))
        with mock.patch("runs.training.head_loss_and_grads", return_value=nan_result):
            with self.assertRaises(CommandError) as ctx:
                self.call("train", config=str(self.write_config()))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertEqual(TrainingRun.objects.get().status, TrainingRun.STATUS_FAILED)

    def test_eval_classify_reports_both_measures(self):
        """classify prints radial and linear-head accuracy plus calibration."""
        config_path, checkpoint = self._trained()
        output = self.call("eval", config=str(config_path), checkpoint=str(checkpoint))
        for key in ('"acc_radial"', '"acc_head"', '"agreement"', '"ece"', '"temperature"', '"ece_calibrated"'):
            self.assertIn(key, output)

    def test_eval_with_baseline_runs_mcnemar(self):
        """--baseline adds the McNemar statistic."""
        config_path, checkpoint = self._trained()
        output = self.call("eval", config=str(config_path), checkpoint=str(checkpoint), baseline=str(checkpoint))
        self.assertIn('"mcnemar_statistic": 0.0', output)

    def test_eval_baseline_input_width_mismatch(self):
        """A baseline trained on another input width exits with code 2."""
        config_path, checkpoint = self._trained()
        wide = self.write_raw(
            self.write_config(name="wide.ini", out=self.tmp / "wide").read_text(encoding="utf-8").replace(
                "input_dim = 2", "input_dim = 3",
            ),
            name="wide.ini",
        )
        self.call("train", config=str(wide))
        baseline = self.tmp / "wide" / CHECKPOINT_FILE
        with self.assertRaises(CommandError) as ctx:
            self.call("eval", config=str(config_path), checkpoint=str(checkpoint), baseline=str(baseline))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("baseline checkpoint expects 3", str(ctx.exception))

    def test_eval_verify(self):
        """verify sweeps thresholds over generated pairs."""
        config_path, checkpoint = self._trained()
        output = self.call("eval", config=str(config_path), checkpoint=str(checkpoint), mode="verify")
        self.assertIn('"pairs": 20', output)
        self.assertIn('"metric": "euclidean"', output)

    def test_eval_verify_without_pairs_fails(self):
        """Zero pairs is an error, not an accuracy."""
        config_path, checkpoint = self._trained()
        with self.assertRaises(CommandError) as ctx:
            self.call("eval", config=str(config_path), checkpoint=str(checkpoint), mode="verify", pairs=0)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_eval_missing_checkpoint_is_io_error(self):
        """An unreadable checkpoint exits with code 4."""
        with self.assertRaises(CommandError) as ctx:
            self.call("eval", config=str(self.write_config()), checkpoint=str(self.tmp / "missing.ckpt"))
        self.assertEqual(ctx.exception.returncode, 4)

    def test_dump_round_trips(self):
        """dump writes one row per sample that reloads to the in-memory embeddings."""
        config_path, checkpoint = self._trained()
        target = self.tmp / "dump.csv"
        self.call("dump", config=str(config_path), checkpoint=str(checkpoint), output=str(target))
        config = load_run_config(config_path)
        _, test = load_datasets(config, spawn_rngs(config.seed, 4)[0])
        dumped = load_csv(target)
        self.assertEqual(len(dumped), len(test))
        np.testing.assert_array_equal(dumped.inputs, embed(load_checkpoint(checkpoint), test))
        np.testing.assert_array_equal(dumped.labels, test.labels)

    def test_plot_from_checkpoint(self):
        """plot renders a standalone SVG with shells, rays and points."""
        config_path, checkpoint = self._trained()
        features = self.tmp / "out" / FEATURES_FILE
        target = self.tmp / "plot.svg"
        self.call("plot", features=str(features), checkpoint=str(checkpoint), output=str(target))
        root = ET.parse(target).getroot()
        self.assertEqual(len(root.findall(f".//{SVG_NS}circle[@class='shell']")), 3)
        self.assertEqual(len(root.findall(f".//{SVG_NS}line[@class='proxy']")), 3)
        self.assertEqual(len(root.findall(f".//{SVG_NS}circle[@class='point']")), 15)

    def test_plot_empty_dump_draws_circles_only(self):
        """An empty dump still yields the radius circles."""
        dump = write_feature_csv(self.tmp / "empty.csv", np.zeros((0, 2)), [])
        target = self.tmp / "empty.svg"
        self.call("plot", features=str(dump), radii="1,2", output=str(target))
        root = ET.parse(target).getroot()
        self.assertEqual(len(root.findall(f".//{SVG_NS}circle[@class='shell']")), 2)
        self.assertEqual(root.findall(f".//{SVG_NS}circle[@class='point']"), [])

    def test_plot_rejects_three_dimensional_dump(self):
        """A d = 3 dump is a dimension error."""
        dump = write_feature_csv(self.tmp / "d3.csv", np.ones((2, 3)), [0, 1])
        with self.assertRaises(CommandError) as ctx:
            self.call("plot", features=str(dump), radii="1,2", output=str(self.tmp / "d3.svg"))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_ablate_emits_four_rows(self):
        """A single-seed ablation tabulates exactly the four mask rows."""
        config_path = self.write_config(epochs=2)
        self.call("ablate", config=str(config_path), seeds="0")
        with (self.tmp / "out" / "ablation.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(len(rows), 5)
        self.assertEqual(
            [r[0] for r in rows[1:]],
            ["cos_theta", "cos_theta+cos_phi", "cos_theta+delta", "cos_theta+cos_phi+delta"],
        )
        self.assertTrue((self.tmp / "out" / "ablation.xlsx").is_file())
        self.assertEqual(SweepResult.objects.filter(parameter="mask").count(), 4)

    def test_sweep_radii_gap(self):
        """sweep trains once per value and seed."""
        config_path = self.write_config(epochs=2)
        self.call("sweep", config=str(config_path), parameter="radii_gap", values="1,5", seeds="0,1")
        with (self.tmp / "out" / "sweep_radii_gap.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["radii_gap", "mean", "min", "max", "seed0", "seed1"])
        self.assertEqual([r[0] for r in rows[1:]], ["radii_gap=1.0", "radii_gap=5.0"])
        self.assertEqual(SweepResult.objects.count(), 4)

    def test_sweep_bad_values(self):
        """Unparseable sweep values are a configuration error."""
        with self.assertRaises(CommandError) as ctx:
            self.call("sweep", config=str(self.write_config()), parameter="hyperspheres", values="two")
        self.assertEqual(ctx.exception.returncode, 2)

    def test_compare_losses(self):
        """compare writes an accuracy table and per-epoch loss curves."""
        config_path = self.write_config(epochs=3)
        self.call("compare", config=str(config_path), losses="distarc,cross_entropy")
        with (self.tmp / "out" / "comparison.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual([r[0] for r in rows[1:]], ["distarc", "cross_entropy"])
        with (self.tmp / "out" / "loss_curves.csv").open(newline="") as handle:
            curves = list(csv.reader(handle))
        self.assertEqual(curves[0], ["epoch", "distarc", "cross_entropy"])
        self.assertEqual(len(curves), 4)
