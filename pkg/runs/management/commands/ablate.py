from runs.command_base import RunCommand, command_errors
from runs.config import resolve_output_dir, write_resolved_config
from runs.experiments import run_ablation, series_headers
from runs.export import format_table, write_table
from runs.utils import finish_run, start_run


class Command(RunCommand):
    help = "Train the four DistArc component masks over a seed set and tabulate radial-angular accuracy"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--seeds", help="Comma-separated seeds; defaults to the config seed")

    def handle(self, *args, **options):
        config = self.load_config(options)
        seeds = self.parse_seeds(options["seeds"], config.seed)
        out_dir = resolve_output_dir(config, "ablate")
        run = start_run(
            command="ablate",
            seed=seeds[0],
            config_path=options["config"],
            output_dir=out_dir,
            loss_name="distarc",
            resolved_config=config.to_ini(),
        )
        with command_errors(run):
            write_resolved_config(config, out_dir)
            rows = run_ablation(config, seeds, out_dir, run=run)
            headers = series_headers("mask", seeds)
            table = [row.as_row() for row in rows]
            write_table(out_dir, "ablation", headers, table)
        finish_run(run, final_metrics={row.label: row.mean for row in rows})
        self.stdout.write(format_table(headers, table))
