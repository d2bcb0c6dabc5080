from runs.command_base import RunCommand, command_errors
from runs.training import Trainer
from runs.utils import finish_run, start_run


class Command(RunCommand):
    help = "Train a model from a run configuration; writes checkpoint, metrics and feature dump"

    def handle(self, *args, **options):
        config = self.load_config(options)
        trainer = Trainer(config)
        run = start_run(
            command="train",
            seed=config.seed,
            config_path=options["config"],
            output_dir=trainer.output_dir,
            loss_name=config.loss.name,
            resolved_config=config.to_ini(),
        )
        trainer.run = run
        with command_errors(run):
            result = trainer.fit()
        finish_run(run, final_metrics=result.summary())

        final = result.final
        self.stdout.write(
            f"loss={result.epoch_losses[-1]:.6f} acc_radial={final.acc_radial:.4f} "
            f"acc_head={final.acc_head:.4f} out={result.output_dir}"
        )
