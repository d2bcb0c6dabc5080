from runs.command_base import RunCommand, command_errors
from runs.config import resolve_output_dir, write_resolved_config
from runs.experiments import SWEEP_PARAMETERS, parse_sweep_values, run_sweep, series_headers
from runs.export import format_table, write_table
from runs.utils import finish_run, start_run


class Command(RunCommand):
    help = "Train one configuration across values of a loss parameter and a seed set"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--parameter", required=True, choices=sorted(SWEEP_PARAMETERS))
        parser.add_argument("--values", required=True, help="Comma-separated values")
        parser.add_argument("--seeds", help="Comma-separated seeds; defaults to the config seed")

    def handle(self, *args, **options):
        config = self.load_config(options)
        seeds = self.parse_seeds(options["seeds"], config.seed)
        parameter = options["parameter"]
        with command_errors():
            values = parse_sweep_values(parameter, options["values"])
        out_dir = resolve_output_dir(config, f"sweep-{parameter}")
        run = start_run(
            command="sweep",
            seed=seeds[0],
            config_path=options["config"],
            output_dir=out_dir,
            loss_name=config.loss.name,
            resolved_config=config.to_ini(),
        )
        with command_errors(run):
            write_resolved_config(config, out_dir)
            rows = run_sweep(config, parameter, values, seeds, out_dir, run=run)
            headers = series_headers(parameter, seeds)
            table = [row.as_row() for row in rows]
            write_table(out_dir, f"sweep_{parameter}", headers, table)
        finish_run(run, final_metrics={row.label: row.mean for row in rows})
        self.stdout.write(format_table(headers, table))
