from django.core.management.base import BaseCommand, CommandError

from dataio.csvio import load_csv
from network.checkpoint import load_checkpoint
from runs.command_base import EXIT_CONFIG, command_errors
from runs.plotting import write_latent_svg


class Command(BaseCommand):
    help = "Render a 2-D feature dump as SVG with one circle per radius and the proxy rays"

    def add_arguments(self, parser):
        parser.add_argument("--features", required=True, help="Feature dump (.csv)")
        parser.add_argument("--checkpoint", help="Take radii and proxies from this checkpoint")
        parser.add_argument("--radii", help="Comma-separated radii when no checkpoint is given")
        parser.add_argument("--output", required=True, help="Destination .svg")
        parser.add_argument("--title", default="latent space")

    def handle(self, *args, **options):
        with command_errors():
            radii, proxies = self._geometry(options)
            dump = load_csv(options["features"], allow_empty=True)
            path = write_latent_svg(options["output"], dump.inputs, dump.labels, radii, proxies, options["title"])
        self.stdout.write(f"points={len(dump)} out={path}")

    def _geometry(self, options):
        if options["checkpoint"]:
            bank = load_checkpoint(options["checkpoint"]).bank
            return bank.radii, bank.scaled_proxies()
        if not options["radii"]:
            raise CommandError("give --checkpoint or --radii", returncode=EXIT_CONFIG)
        try:
            return [float(r) for r in options["radii"].split(",") if r.strip()], None
        except ValueError:
            raise CommandError(f"bad --radii {options['radii']!r}", returncode=EXIT_CONFIG)
