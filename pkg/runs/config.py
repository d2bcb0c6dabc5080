"""
Run configuration files.

A run is described by an INI file with the sections [run], [dataset],
[backbone], [loss] and [optimizer]. The file is flattened into
RunConfigForm for validation and frozen into a RunConfig. Every run
writes the fully resolved configuration next to its outputs.
"""
import configparser
import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from django.conf import settings

from geometry.proxies import DEFAULT_RADII_GAP
from losses.distarc import DEFAULT_MARGIN, LAMBDA_SIMPLE, AblationMask, DistArcConfig
from losses.heads import DISTARC, HeadSettings
from losses.baselines import DEFAULT_SCALE
from losses.schedule import lambda_schedule
from network.mlp import RELU
from numkit.exceptions import HyperSpaceXError
from optimizer.sgd import DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY, SgdConfig

from .forms import (
    CONFIG_VERSION,
    DATASET_IDX,
    DATASET_SYNTH,
    RunConfigForm,
    field_name,
    is_idx_images,
)

logger = logging.getLogger(__name__)

SECTIONS = ("run", "dataset", "backbone", "loss", "optimizer")

BOOLEAN_FIELDS = {
    "dataset__disjoint_classes",
    "dataset__standardize",
    "loss__use_cos_phi",
    "loss__use_delta",
    "loss__symmetric_denominator",
}

# Values used when a key is absent from the file.
DEFAULTS = {
    "run__seed": 0,
    "run__batch_size": 64,
    "dataset__classes": 10,
    "dataset__input_dim": 2,
    "dataset__per_class": 100,
    "dataset__spread": 1.0,
    "dataset__test_fraction": 0.2,
    "dataset__pairs_per_polarity": 200,
    "backbone__activation": RELU,
    "loss__margin": DEFAULT_MARGIN,
    "loss__lambda": LAMBDA_SIMPLE,
    "loss__lambda_increment": 0.0,
    "loss__lambda_step_every": 1,
    "loss__use_cos_phi": True,
    "loss__use_delta": True,
    "loss__symmetric_denominator": False,
    "loss__scale": DEFAULT_SCALE,
    "loss__radii_gap": DEFAULT_RADII_GAP,
    "optimizer__learning_rate": DEFAULT_LEARNING_RATE,
    "optimizer__weight_decay": DEFAULT_WEIGHT_DECAY,
    "optimizer__momentum": 0.0,
}


class ConfigError(HyperSpaceXError):
    """Invalid run configuration; `errors` maps `section.key` to messages."""

    def __init__(self, message, errors=None):
        self.errors = errors or {}
        if self.errors:
            details = "; ".join(f"{key}: {', '.join(msgs)}" for key, msgs in sorted(self.errors.items()))
            message = f"{message}: {details}"
        super().__init__(message)


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = DATASET_SYNTH
    classes: int = 10
    input_dim: int = 2
    per_class: int = 100
    spread: float = 1.0
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    path: str = ""
    test_path: str = ""
    test_fraction: float = 0.2
    subset: int = None
    disjoint_classes: bool = False
    pairs_per_polarity: int = 200
    standardize: bool = False


@dataclass(frozen=True)
class BackboneSpec:
    widths: tuple = ()
    activation: str = RELU
    embedding_dim: int = 2

    def layer_widths(self, input_dim: int) -> list:
        return [input_dim, *self.widths, self.embedding_dim]


@dataclass(frozen=True)
class LossSpec:
    name: str = DISTARC
    margin: float = DEFAULT_MARGIN
    lambda_: float = LAMBDA_SIMPLE
    lambda_increment: float = 0.0
    lambda_step_every: int = 1
    lambda_cap: float = None
    use_cos_phi: bool = True
    use_delta: bool = True
    symmetric_denominator: bool = False
    scale: float = DEFAULT_SCALE
    radii_gap: float = DEFAULT_RADII_GAP
    hyperspheres: int = None

    @property
    def mask(self) -> AblationMask:
        return AblationMask(use_cos_phi=self.use_cos_phi, use_delta=self.use_delta)

    def lambda_at(self, epoch: int) -> float:
        cap = self.lambda_ if self.lambda_cap is None else self.lambda_cap
        return lambda_schedule(epoch, self.lambda_, self.lambda_increment, self.lambda_step_every, cap)

    def head_settings(self, epoch: int = 0) -> HeadSettings:
        return HeadSettings(
            name=self.name,
            distarc=DistArcConfig(
                margin=self.margin,
                lambda_=self.lambda_at(epoch),
                mask=self.mask,
                symmetric_denominator=self.symmetric_denominator,
            ),
            margin=self.margin,
            scale=self.scale,
        )


@dataclass(frozen=True)
class OptimizerSpec:
    learning_rate: float = DEFAULT_LEARNING_RATE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    momentum: float = 0.0

    def sgd_config(self):
        """None when the learning rate is zero: the trainer then leaves parameters untouched."""
        if self.learning_rate == 0:
            return None
        return SgdConfig(self.learning_rate, self.weight_decay, self.momentum)


@dataclass(frozen=True)
class RunConfig:
    epochs: int
    seed: int = 0
    batch_size: int = 64
    output_dir: Path = None
    eval_every: int = 1
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    backbone: BackboneSpec = field(default_factory=BackboneSpec)
    loss: LossSpec = field(default_factory=LossSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    source: str = ""

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed))

    def with_output_dir(self, output_dir) -> "RunConfig":
        return replace(self, output_dir=Path(output_dir))

    def with_loss(self, **changes) -> "RunConfig":
        return replace(self, loss=replace(self.loss, **changes))

    def to_ini(self) -> str:
        """Resolved configuration, every key spelled out."""
        parser = configparser.ConfigParser(interpolation=None)
        parser["run"] = {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "output_dir": "" if self.output_dir is None else str(self.output_dir),
            "eval_every": self.eval_every,
        }
        ds = self.dataset
        parser["dataset"] = {
            "kind": ds.kind,
            "classes": ds.classes,
            "input_dim": ds.input_dim,
            "per_class": ds.per_class,
            "spread": repr(ds.spread),
            "train_images": ds.train_images,
            "train_labels": ds.train_labels,
            "test_images": ds.test_images,
            "test_labels": ds.test_labels,
            "path": ds.path,
            "test_path": ds.test_path,
            "test_fraction": repr(ds.test_fraction),
            "subset": "" if ds.subset is None else ds.subset,
            "disjoint_classes": _flag(ds.disjoint_classes),
            "pairs_per_polarity": ds.pairs_per_polarity,
            "standardize": _flag(ds.standardize),
        }
        parser["backbone"] = {
            "widths": ",".join(str(w) for w in self.backbone.widths),
            "activation": self.backbone.activation,
            "embedding_dim": self.backbone.embedding_dim,
        }
        loss = self.loss
        parser["loss"] = {
            "name": loss.name,
            "margin": repr(loss.margin),
            "lambda": repr(loss.lambda_),
            "lambda_increment": repr(loss.lambda_increment),
            "lambda_step_every": loss.lambda_step_every,
            "lambda_cap": "" if loss.lambda_cap is None else repr(loss.lambda_cap),
            "use_cos_phi": _flag(loss.use_cos_phi),
            "use_delta": _flag(loss.use_delta),
            "symmetric_denominator": _flag(loss.symmetric_denominator),
            "scale": repr(loss.scale),
            "radii_gap": repr(loss.radii_gap),
            "hyperspheres": "" if loss.hyperspheres is None else loss.hyperspheres,
        }
        parser["optimizer"] = {
            "learning_rate": repr(self.optimizer.learning_rate),
            "weight_decay": repr(self.optimizer.weight_decay),
            "momentum": repr(self.optimizer.momentum),
        }
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _read_ini(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as handle:
            parser.read_file(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    unknown = [name for name in parser.sections() if name not in SECTIONS]
    if unknown:
        raise ConfigError(f"{path}: unknown sections {', '.join(unknown)}")
    return parser


def _form_data(parser: configparser.ConfigParser, base: Path) -> dict:
    known = set(RunConfigForm.base_fields)
    data = {}
    errors = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = field_name(section, key)
            if name not in known:
                errors.setdefault(f"{section}.{key}", []).append("unknown key")
                continue
            value = raw.strip()
            if name in BOOLEAN_FIELDS:
                try:
                    value = parser.getboolean(section, key) if value else None
                except ValueError:
                    errors.setdefault(f"{section}.{key}", []).append("expected true or false")
                    continue
            elif section == "dataset" and name in _path_fields() and value:
                path = Path(value).expanduser()
                value = str(path if path.is_absolute() else base / path)
            data[name] = value
    if errors:
        raise ConfigError("invalid configuration", errors)
    for name, default in DEFAULTS.items():
        if data.get(name) in (None, ""):
            data[name] = default
    return data


def _path_fields():
    return {
        "dataset__train_images",
        "dataset__train_labels",
        "dataset__test_images",
        "dataset__test_labels",
        "dataset__path",
        "dataset__test_path",
    }


def _default_eval_every(kind: str) -> int:
    return settings.MNIST_EVAL_EVERY if kind == DATASET_IDX else settings.SYNTH_EVAL_EVERY


def _build(cleaned: dict, source: str) -> RunConfig:
    def pick(section):
        prefix = f"{section}__"
        return {k[len(prefix):]: v for k, v in cleaned.items() if k.startswith(prefix)}

    run = pick("run")
    ds = pick("dataset")
    bb = pick("backbone")
    loss = pick("loss")
    opt = pick("optimizer")

    def text(value):
        return value or ""

    dataset = DatasetSpec(
        kind=ds["kind"],
        classes=ds["classes"],
        input_dim=ds["input_dim"],
        per_class=ds["per_class"],
        spread=ds["spread"],
        train_images=text(ds.get("train_images")),
        train_labels=text(ds.get("train_labels")),
        test_images=text(ds.get("test_images")),
        test_labels=text(ds.get("test_labels")),
        path=text(ds.get("path")),
        test_path=text(ds.get("test_path")),
        test_fraction=ds["test_fraction"],
        subset=ds.get("subset"),
        disjoint_classes=bool(ds.get("disjoint_classes")),
        pairs_per_polarity=ds["pairs_per_polarity"],
        standardize=bool(ds.get("standardize")),
    )
    output_dir = run.get("output_dir")
    return RunConfig(
        epochs=run["epochs"],
        seed=run["seed"],
        batch_size=run["batch_size"],
        output_dir=Path(output_dir) if output_dir else None,
        eval_every=run.get("eval_every") or _default_eval_every(dataset.kind),
        dataset=dataset,
        backbone=BackboneSpec(
            widths=tuple(bb["widths"]),
            activation=bb["activation"],
            embedding_dim=bb["embedding_dim"],
        ),
        loss=LossSpec(
            name=loss["name"],
            margin=loss["margin"],
            lambda_=loss["lambda"],
            lambda_increment=loss["lambda_increment"],
            lambda_step_every=loss["lambda_step_every"],
            lambda_cap=loss.get("lambda_cap"),
            use_cos_phi=bool(loss["use_cos_phi"]),
            use_delta=bool(loss["use_delta"]),
            symmetric_denominator=bool(loss["symmetric_denominator"]),
            scale=loss["scale"],
            radii_gap=loss["radii_gap"],
            hyperspheres=loss.get("hyperspheres"),
        ),
        optimizer=OptimizerSpec(
            learning_rate=opt["learning_rate"],
            weight_decay=opt["weight_decay"],
            momentum=opt["momentum"],
        ),
        source=source,
    )


def load_run_config(path, seed=None, output_dir=None) -> RunConfig:
    """
    Parse and validate a run configuration. Relative dataset paths are
    resolved against the config file's directory. `seed` and `output_dir`
    override the file.
    """
    path = Path(path)
    parser = _read_ini(path)
    data = _form_data(parser, path.resolve().parent)
    if seed is not None:
        data["run__seed"] = seed
    if output_dir is not None:
        data["run__output_dir"] = str(output_dir)

    form = RunConfigForm(data)
    if not form.is_valid():
        errors = {
            ("config" if key == "__all__" else key.replace("__", ".", 1)): [str(m) for m in messages]
            for key, messages in form.errors.items()
        }
        raise ConfigError(f"{path}: invalid configuration", errors)

    config = _build(form.cleaned_data, str(path))
    if config.dataset.kind == DATASET_IDX and not is_idx_images(config.dataset.train_images):
        raise ConfigError(f"{path}: train_images is not an IDX image file", {
            "dataset.train_images": ["bad magic"],
        })
    logger.debug("config loaded path=%s loss=%s seed=%d", path, config.loss.name, config.seed)
    return config


def resolve_output_dir(config: RunConfig, name: str) -> Path:
    if config.output_dir is not None:
        return Path(config.output_dir)
    return Path(settings.OUTPUT_ROOT) / f"{name}-seed{config.seed}"


def write_resolved_config(config: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "resolved_config.ini"
    target.write_text(config.to_ini(), encoding="utf-8")
    return target
