from runs.command_base import RunCommand, command_errors
from runs.config import resolve_output_dir, write_resolved_config
from runs.experiments import comparison_rows, loss_curve_rows, run_comparison
from runs.export import format_table, write_table
from runs.utils import finish_run, start_run
from losses.heads import LOSS_NAMES


class Command(RunCommand):
    help = "Train every loss on the same data and seed; compare accuracy and loss curves"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--losses", default=",".join(LOSS_NAMES), help="Comma-separated loss names")

    def handle(self, *args, **options):
        config = self.load_config(options)
        names = [n.strip() for n in options["losses"].split(",") if n.strip()]
        out_dir = resolve_output_dir(config, "compare")
        run = start_run(
            command="compare",
            seed=config.seed,
            config_path=options["config"],
            output_dir=out_dir,
            loss_name=",".join(names),
            resolved_config=config.to_ini(),
        )
        with command_errors(run):
            write_resolved_config(config, out_dir)
            entries = run_comparison(config, names, out_dir, run=run)
            headers, table = comparison_rows(entries)
            write_table(out_dir, "comparison", headers, table)
            write_table(out_dir, "loss_curves", *loss_curve_rows(entries))
        finish_run(run, final_metrics={e.loss_name: e.accuracy for e in entries})
        self.stdout.write(format_table(headers, table))
