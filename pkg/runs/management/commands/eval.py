import numpy as np
from django.core.management.base import CommandError

from dataio.records import format_record
from dataio.splits import make_pairs
from evaluation.calibration import DEFAULT_BINS, ece, temperature_calibrate
from evaluation.predict import confidence_from_magnitudes, resultant_magnitudes
from evaluation.stats import mcnemar
from evaluation.verification import EUCLIDEAN, METRICS, verification_sweep
from losses.heads import DISTARC, VERIFICATION_METRIC
from network.checkpoint import load_checkpoint
from numkit.rng import spawn_rngs
from runs.command_base import EXIT_CONFIG, RunCommand, command_errors
from runs.training import STREAM_DATA, STREAM_PAIRS, embed, evaluate_model, load_datasets
from runs.utils import finish_run, log_metric, start_run

MODE_CLASSIFY = "classify"
MODE_VERIFY = "verify"


class Command(RunCommand):
    help = "Evaluate a checkpoint: classification with both predictive measures, or pair verification"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--mode", choices=[MODE_CLASSIFY, MODE_VERIFY], default=MODE_CLASSIFY)
        parser.add_argument("--split", choices=["train", "test"], default="test")
        parser.add_argument("--baseline", help="Second checkpoint compared with McNemar's test (classify)")
        parser.add_argument("--metric", choices=METRICS, help="Pair distance (verify); defaults by loss")
        parser.add_argument("--pairs", type=int, help="Pairs per polarity (verify); overrides the config")
        parser.add_argument("--bins", type=int, default=DEFAULT_BINS, help="Calibration bins (classify)")

    def handle(self, *args, **options):
        config = self.load_config(options)
        with command_errors():
            checkpoint = load_checkpoint(options["checkpoint"])
        run = start_run(
            command="eval",
            seed=config.seed,
            config_path=options["config"],
            loss_name=checkpoint.loss_name,
            resolved_config=config.to_ini(),
        )
        with command_errors(run):
            rngs = spawn_rngs(config.seed, 4)
            train, test = load_datasets(config, rngs[STREAM_DATA])
            dataset = train if options["split"] == "train" else test
            if len(dataset) == 0:
                raise CommandError(f"the {options['split']} split is empty", returncode=EXIT_CONFIG)
            _require_input_width(checkpoint, dataset, "checkpoint")
            if options["mode"] == MODE_CLASSIFY:
                record = self._classify(checkpoint, dataset, options)
                log_metric(
                    run=run, split=options["split"], epoch=0, seed=config.seed,
                    acc_radial=record["acc_radial"], acc_head=record["acc_head"],
                )
            else:
                record = self._verify(checkpoint, dataset, config, rngs[STREAM_PAIRS], options)
        record.update({"mode": options["mode"], "seed": config.seed, "split": options["split"]})
        finish_run(run, final_metrics=record)
        self.stdout.write(format_record(record))

    def _classify(self, checkpoint, dataset, options):
        report = evaluate_model(checkpoint, dataset)
        magnitudes = resultant_magnitudes(report.embeddings, checkpoint.bank)
        confidences = confidence_from_magnitudes(magnitudes).max(axis=1)
        calibration = temperature_calibrate(-magnitudes, report.radial_correct, bins=options["bins"])
        record = {
            "n": len(dataset),
            "acc_radial": report.acc_radial,
            "acc_head": report.acc_head,
            "agreement": report.agreement,
            "ece": ece(confidences, report.radial_correct, options["bins"]),
            "temperature": calibration.temperature,
            "ece_calibrated": calibration.ece_after,
        }
        if options["baseline"]:
            baseline = load_checkpoint(options["baseline"])
            _require_input_width(baseline, dataset, "baseline checkpoint")
            other = evaluate_model(baseline, dataset)
            ours = _primary_correct(checkpoint, report)
            theirs = _primary_correct(baseline, other)
            test = mcnemar(ours, theirs)
            record.update({
                "mcnemar_statistic": test.statistic,
                "mcnemar_p_value": test.p_value,
                "mcnemar_b": test.b,
                "mcnemar_c": test.c,
                "significant": test.significant,
            })
        return record

    def _verify(self, checkpoint, dataset, config, rng, options):
        per_polarity = config.dataset.pairs_per_polarity if options["pairs"] is None else options["pairs"]
        if per_polarity < 1:
            raise CommandError("verification needs at least one pair", returncode=EXIT_CONFIG)
        pairs = make_pairs(dataset, rng, per_polarity)
        metric = options["metric"] or VERIFICATION_METRIC.get(checkpoint.loss_name, EUCLIDEAN)
        result = verification_sweep(embed(checkpoint, dataset), pairs, metric)
        return {
            "pairs": result.pair_count,
            "metric": result.metric,
            "best_accuracy": result.best_accuracy,
            "best_threshold": result.best_threshold,
        }


def _primary_correct(checkpoint, report) -> np.ndarray:
    return report.radial_correct if checkpoint.loss_name == DISTARC else report.head_correct


def _require_input_width(checkpoint, dataset, role: str):
    if dataset.input_dim != checkpoint.backbone.input_dim:
        raise CommandError(
            f"dataset has {dataset.input_dim} inputs, {role} expects {checkpoint.backbone.input_dim}",
            returncode=EXIT_CONFIG,
        )
