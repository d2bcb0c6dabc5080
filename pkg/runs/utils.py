from django.utils import timezone

from .models import EpochMetric, SweepResult, TrainingRun


def start_run(*, command, seed, config_path="", output_dir="", loss_name="", resolved_config=""):
    return TrainingRun.objects.create(
        command=command,
        config_path=str(config_path),
        seed=seed,
        output_dir=str(output_dir),
        loss_name=loss_name,
        resolved_config=resolved_config,
    )


def log_metric(
    *,
    run,
    split,
    epoch,
    seed,
    loss=None,
    acc_radial=None,
    acc_head=None,
    lambda_value=None,
):
    if run is None:
        return None
    return EpochMetric.objects.create(
        run=run,
        split=split,
        epoch=epoch,
        loss=loss,
        acc_radial=acc_radial,
        acc_head=acc_head,
        lambda_value=lambda_value,
        seed=seed,
    )


def log_sweep_result(*, run, parameter, value, seed, accuracy):
    if run is None:
        return None
    return SweepResult.objects.create(
        run=run,
        parameter=parameter,
        value=str(value),
        seed=seed,
        accuracy=accuracy,
    )


def finish_run(run, *, status=TrainingRun.STATUS_DONE, final_metrics=None):
    if run is None:
        return None
    run.status = status
    run.final_metrics = final_metrics or {}
    run.finished = timezone.now()
    run.save(update_fields=["status", "final_metrics", "finished"])
    return run
