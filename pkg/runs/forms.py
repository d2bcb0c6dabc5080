# runs/forms.py
import gzip
import math
from pathlib import Path

from django import forms

from dataio.idx import IMAGES_MAGIC
from losses.heads import LOSS_CHOICES
from network.mlp import ACTIVATIONS

CONFIG_VERSION = 1

DATASET_SYNTH = "synth"
DATASET_IDX = "idx"
DATASET_CSV = "csv"
DATASET_CHOICES = [
    (DATASET_SYNTH, "Synthetic Gaussian blobs"),
    (DATASET_IDX, "MNIST-family IDX files"),
    (DATASET_CSV, "CSV feature table"),
]

ACTIVATION_CHOICES = [(a, a) for a in ACTIVATIONS]

# (section, key) pairs that must name an existing file when set
PATH_FIELDS = [
    ("dataset", "train_images"),
    ("dataset", "train_labels"),
    ("dataset", "test_images"),
    ("dataset", "test_labels"),
    ("dataset", "path"),
    ("dataset", "test_path"),
]


def field_name(section, key):
    return f"{section}__{key}"


class RunConfigForm(forms.Form):
    """
    Flat view of a run configuration file; every field is named
    `<section>__<key>`.
    """

    run__config_version = forms.IntegerField()
    run__seed = forms.IntegerField(min_value=0, initial=0, required=False)
    run__epochs = forms.IntegerField(min_value=1)
    run__batch_size = forms.IntegerField(min_value=1, initial=64, required=False)
    run__output_dir = forms.CharField(required=False)
    run__eval_every = forms.IntegerField(min_value=1, required=False)

    dataset__kind = forms.ChoiceField(choices=DATASET_CHOICES)
    dataset__classes = forms.IntegerField(min_value=1, required=False)
    dataset__input_dim = forms.IntegerField(min_value=1, required=False)
    dataset__per_class = forms.IntegerField(min_value=1, required=False)
    dataset__spread = forms.FloatField(required=False)
    dataset__train_images = forms.CharField(required=False)
    dataset__train_labels = forms.CharField(required=False)
    dataset__test_images = forms.CharField(required=False)
    dataset__test_labels = forms.CharField(required=False)
    dataset__path = forms.CharField(required=False)
    dataset__test_path = forms.CharField(required=False)
    dataset__test_fraction = forms.FloatField(min_value=0.0, max_value=0.99, required=False)
    dataset__subset = forms.IntegerField(min_value=1, required=False)
    dataset__disjoint_classes = forms.BooleanField(required=False)
    dataset__pairs_per_polarity = forms.IntegerField(min_value=1, required=False)
    dataset__standardize = forms.BooleanField(required=False)

    backbone__widths = forms.CharField(required=False)
    backbone__activation = forms.ChoiceField(choices=ACTIVATION_CHOICES, required=False)
    backbone__embedding_dim = forms.IntegerField(min_value=2)

    loss__name = forms.ChoiceField(choices=LOSS_CHOICES)
    loss__margin = forms.FloatField(min_value=0.0, required=False)
    loss__lambda = forms.FloatField(min_value=0.0, required=False)
    loss__lambda_increment = forms.FloatField(min_value=0.0, required=False)
    loss__lambda_step_every = forms.IntegerField(min_value=1, required=False)
    loss__lambda_cap = forms.FloatField(min_value=0.0, required=False)
    loss__use_cos_phi = forms.BooleanField(required=False)
    loss__use_delta = forms.BooleanField(required=False)
    loss__symmetric_denominator = forms.BooleanField(required=False)
    loss__scale = forms.FloatField(required=False)
    loss__radii_gap = forms.FloatField(required=False)
    loss__hyperspheres = forms.IntegerField(min_value=1, required=False)

    optimizer__learning_rate = forms.FloatField(min_value=0.0, required=False)
    optimizer__weight_decay = forms.FloatField(min_value=0.0, required=False)
    optimizer__momentum = forms.FloatField(min_value=0.0, required=False)

    def clean_run__config_version(self):
        version = self.cleaned_data["run__config_version"]
        if version != CONFIG_VERSION:
            raise forms.ValidationError(f"unsupported config_version {version}; expected {CONFIG_VERSION}")
        return version

    def clean_backbone__widths(self):
        raw = (self.cleaned_data.get("backbone__widths") or "").strip()
        if not raw:
            return []
        try:
            widths = [int(part) for part in raw.replace(" ", "").split(",") if part]
        except ValueError:
            raise forms.ValidationError("widths must be a comma-separated list of integers")
        if any(w < 1 for w in widths):
            raise forms.ValidationError("hidden widths must be >= 1")
        return widths

    def clean_loss__margin(self):
        margin = self.cleaned_data.get("loss__margin")
        if margin is not None and margin >= math.pi / 2:
            raise forms.ValidationError("margin must be < pi/2")
        return margin

    def clean_loss__scale(self):
        scale = self.cleaned_data.get("loss__scale")
        if scale is not None and scale <= 0:
            raise forms.ValidationError("scale must be > 0")
        return scale

    def clean_loss__radii_gap(self):
        gap = self.cleaned_data.get("loss__radii_gap")
        if gap is not None and gap <= 0:
            raise forms.ValidationError("radii_gap must be > 0")
        return gap

    def clean_dataset__spread(self):
        spread = self.cleaned_data.get("dataset__spread")
        if spread is not None and spread <= 0:
            raise forms.ValidationError("spread must be > 0")
        return spread

    def clean_optimizer__momentum(self):
        momentum = self.cleaned_data.get("optimizer__momentum")
        if momentum is not None and momentum >= 1.0:
            raise forms.ValidationError("momentum must be < 1")
        return momentum

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get("dataset__kind")
        if kind == DATASET_IDX:
            for key in ("train_images", "train_labels"):
                if not cleaned.get(field_name("dataset", key)):
                    self.add_error(field_name("dataset", key), "required for kind = idx")
            if bool(cleaned.get("dataset__test_images")) != bool(cleaned.get("dataset__test_labels")):
                self.add_error("dataset__test_labels", "test_images and test_labels go together")
        elif kind == DATASET_CSV:
            if not cleaned.get("dataset__path"):
                self.add_error("dataset__path", "required for kind = csv")
        if kind == DATASET_IDX and cleaned.get("dataset__standardize"):
            self.add_error("dataset__standardize", "idx pixels are already scaled to [0, 1]")

        for section, key in PATH_FIELDS:
            name = field_name(section, key)
            value = cleaned.get(name)
            if value and not Path(value).is_file():
                self.add_error(name, f"file not found: {value}")

        lam = cleaned.get("loss__lambda")
        cap = cleaned.get("loss__lambda_cap")
        if lam is not None and cap is not None and cap < lam:
            self.add_error("loss__lambda_cap", "lambda_cap must be >= lambda")
        return cleaned


def is_idx_images(path) -> bool:
    """True when a file starts with the IDX image magic; used to catch swapped paths early."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as handle:
        head = handle.read(4)
    return len(head) == 4 and int.from_bytes(head, "big") == IMAGES_MAGIC
