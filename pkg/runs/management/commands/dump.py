from django.core.management.base import CommandError

from dataio.csvio import write_feature_csv
from network.checkpoint import load_checkpoint
from numkit.rng import spawn_rngs
from runs.command_base import EXIT_CONFIG, RunCommand, command_errors
from runs.training import STREAM_DATA, embed, load_datasets

SPLITS = ("train", "test")


class Command(RunCommand):
    help = "Write the embeddings of a dataset split as label,f0,...,f{d-1} CSV"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--split", choices=SPLITS, default="test")
        parser.add_argument("--output", required=True, help="Destination .csv")

    def handle(self, *args, **options):
        config = self.load_config(options)
        with command_errors():
            checkpoint = load_checkpoint(options["checkpoint"])
            train, test = load_datasets(config, spawn_rngs(config.seed, 4)[STREAM_DATA])
            dataset = train if options["split"] == "train" else test
            if dataset.input_dim != checkpoint.backbone.input_dim:
                raise CommandError(
                    f"dataset has {dataset.input_dim} inputs, checkpoint expects {checkpoint.backbone.input_dim}",
                    returncode=EXIT_CONFIG,
                )
            path = write_feature_csv(options["output"], embed(checkpoint, dataset), dataset.labels)
        self.stdout.write(f"rows={len(dataset)} dim={checkpoint.backbone.embedding_dim} out={path}")
