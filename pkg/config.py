import argparse
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from helpers.errors import ConfigError
from logger import Logger as logger
from nn.layers import NONLINEARITIES
from optim.schedule import SCHEDULES, LrSchedule

DATA_DIR_ENV = "BN_DATA_DIR"
DEFAULT_DATA_DIR = "mnist"
EVAL_STATS = ("ema", "population")
COMMANDS = ("train", "compare", "percentiles", "gradcheck", "fold", "eval")


def _on_off(value: str) -> bool:
    value = str(value).strip().lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {value!r}")


def _hidden(value: str) -> Tuple[int, ...]:
    """ Comma list of widths; an item `NxW` stands for N layers of width W ("3x100", "2x100,50"). """
    if isinstance(value, (tuple, list)):
        return tuple(int(v) for v in value)
    layers = []
    for item in str(value).replace("×", "x").split(","):
        item = item.strip()
        if not item:
            continue
        count, sep, width = item.partition("x")
        if sep:
            if int(count) < 1:
                raise ValueError(f"layer count must be >= 1 in {item!r}")
            layers.extend([int(width)] * int(count))
        else:
            layers.append(int(item))
    if not layers:
        raise ValueError("at least one hidden layer is needed")
    return tuple(layers)


def _probe(value: str) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    layer, sep, unit = str(value).partition(":")
    if not sep:
        raise ValueError(f"probe must look like LAYER:UNIT, got {value!r}")
    return int(layer), int(unit)


def _choice(options) -> Callable[[str], str]:
    def convert(value: str) -> str:
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {value!r}")
        return value
    return convert


# flag name -> converter; dest is the flag name with '-' replaced by '_'
TRAIN_FLAGS: Dict[str, Callable] = {
    "steps": int,
    "batch-size": int,
    "hidden": _hidden,
    "nonlinearity": _choice(tuple(NONLINEARITIES)),
    "bn": _on_off,
    "lr": float,
    "momentum": float,
    "lr-schedule": _choice(SCHEDULES),
    "lr-decay": float,
    "lr-period": int,
    "weight-decay": float,
    "eps": float,
    "seed": int,
    "eval-every": int,
    "probe": _probe,
    "probe-size": int,
    "init-std": float,
    "binarize": _on_off,
    "threshold": float,
    "ema-decay": float,
    "eval-stats": _choice(EVAL_STATS),
    "freeze-batches": int,
    "snapshots": _on_off,
    "out": str,
    "data-dir": str,
    "image-size": int,
}


@dataclass
class TrainConfig:
    """ Hyperparameters of one training run. Defaults reproduce the MNIST experiment. """
    steps: int = 50000
    batch_size: int = 60
    hidden: Tuple[int, ...] = (100, 100, 100)
    nonlinearity: str = "sigmoid"
    bn: bool = True
    lr: float = 0.1
    momentum: float = 0.9
    lr_schedule: str = "constant"
    lr_decay: float = 1.0
    lr_period: int = 1000
    weight_decay: float = 0.0
    eps: float = 1e-5
    seed: int = 0
    eval_every: int = 500
    probe: Optional[Tuple[int, int]] = None
    probe_size: int = 1000
    init_std: float = 0.1
    binarize: bool = True
    threshold: float = 0.5
    ema_decay: float = 0.9
    eval_stats: str = "ema"
    freeze_batches: int = 1000
    snapshots: bool = False
    out: str = "metrics.csv"
    data_dir: Optional[str] = None
    image_size: int = 28

    @property
    def image_shape(self) -> Tuple[int, int]:
        return self.image_size, self.image_size

    @property
    def probe_layer(self) -> int:
        return self.probe[0] if self.probe is not None else len(self.hidden) - 1

    @property
    def probe_unit(self) -> int:
        return self.probe[1] if self.probe is not None else 0

    def validate(self) -> "TrainConfig":
        """ Raise ConfigError on the first violated constraint. """
        checks = [
            (self.steps >= 1, f"steps must be >= 1, got {self.steps}"),
            (self.batch_size >= (2 if self.bn else 1),
             f"batch size {self.batch_size} is too small{' for batch normalization' if self.bn else ''}"),
            (all(h >= 1 for h in self.hidden), f"hidden layer sizes must be >= 1, got {self.hidden}"),
            (0 <= self.probe_layer < len(self.hidden),
             f"probe layer {self.probe_layer} outside 0..{len(self.hidden) - 1}"),
            (0 <= self.probe_unit < self.hidden[self.probe_layer] if 0 <= self.probe_layer < len(self.hidden)
             else True, f"probe unit {self.probe_unit} outside the probed layer"),
            (self.eps > 0, f"eps must be positive, got {self.eps}"),
            (self.eval_every >= 1, f"eval_every must be >= 1, got {self.eval_every}"),
            (self.probe_size >= 2, f"probe_size must be >= 2, got {self.probe_size}"),
            (self.init_std > 0, f"init_std must be positive, got {self.init_std}"),
            (0.0 < self.threshold < 1.0, f"threshold must lie in (0, 1), got {self.threshold}"),
            (0.0 < self.ema_decay < 1.0, f"ema_decay must lie in (0, 1), got {self.ema_decay}"),
            (self.freeze_batches >= 1, f"freeze_batches must be >= 1, got {self.freeze_batches}"),
            (0.0 <= self.momentum < 1.0, f"momentum must lie in [0, 1), got {self.momentum}"),
            (self.weight_decay >= 0.0, f"weight_decay must be >= 0, got {self.weight_decay}"),
            (self.image_size >= 1, f"image_size must be >= 1, got {self.image_size}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        self.schedule()
        return self

    def schedule(self) -> LrSchedule:
        return LrSchedule(base_lr=self.lr, kind=self.lr_schedule, decay_rate=self.lr_decay,
                          period=self.lr_period)

    def as_text(self) -> str:
        lines = []
        for key, value in sorted(asdict(self).items()):
            if isinstance(value, bool):
                value = "on" if value else "off"
            elif key == "hidden":
                value = ",".join(str(v) for v in value)
            elif key == "probe":
                value = f"{self.probe_layer}:{self.probe_unit}"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def _sibling(self, suffix: str) -> Path:
        out = Path(self.out)
        return out.with_name(out.stem + suffix)

    @property
    def metrics_path(self) -> Path:
        return Path(self.out)

    @property
    def sidecar_path(self) -> Path:
        return self._sibling(".config.txt")

    @property
    def checkpoint_path(self) -> Path:
        return self._sibling(".train.npz")

    @property
    def inference_path(self) -> Path:
        return self._sibling(".inference.npz")

    @property
    def snapshot_dir(self) -> Path:
        return self._sibling(".snapshots")

    @property
    def percentiles_path(self) -> Path:
        return self._sibling(".percentiles.csv")

    def arm_path(self, arm: str) -> Path:
        return self._sibling(f".{arm}.csv")


def read_config_file(path) -> Dict[str, object]:
    """
    Parse a flat key=value file into converted TrainConfig values.

    Same syntax as env_base.env. Keys are flag names with '-' or '_'.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    values = {}
    for name, raw in dotenv_values(path, interpolate=False).items():
        key = name.strip().replace("_", "-")
        if key not in TRAIN_FLAGS:
            raise ConfigError(f"{path}: unknown key {name!r}")
        if raw is None:
            raise ConfigError(f"{path}: {name} has no value")
        try:
            values[key.replace("-", "_")] = TRAIN_FLAGS[key](raw.strip())
        except ValueError as e:
            raise ConfigError(f"{path}: {name}: {e}")
    return values


class Config:
    """
    Holds the selected command and its settings, set by environment variables,
    an optional key=value config file and command line arguments (in rising priority).
    """
    DEV_MODE = False

    def __init__(self, argv: Optional[List[str]] = None):
        """ Init Config """
        args = self.parse_arguments(argv)
        self.load_environment()
        self.set_general_settings(args)
        if Config.DEV_MODE:
            self.set_development_settings()
        logger.debug(f"Config set for command {self.command}")

    def parse_arguments(self, argv: Optional[List[str]] = None):
        """ Parse arguments """
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="Flat key=value file; command line flags override it.")
        common.add_argument("--verbose", action="store_true", help="Print debug output.")
        common.add_argument("--quiet", action="store_true", help="Only print errors.")
        for flag, converter in TRAIN_FLAGS.items():
            common.add_argument(f"--{flag}", type=converter, default=None)

        parser = argparse.ArgumentParser(
            description="Batch normalization library and MNIST experiment runner.")
        sub = parser.add_subparsers(dest="command", required=True)
        sub.add_parser("train", parents=[common], help="Train one network and write metrics.")
        sub.add_parser("compare", parents=[common], help="Train baseline and BN networks with the same seed.")

        percentiles = sub.add_parser("percentiles", parents=[common],
                                     help="Probe percentiles over checkpoints.")
        percentiles.add_argument("checkpoints", nargs="+", help="Checkpoint files or snapshot directories.")

        gradcheck = sub.add_parser("gradcheck", parents=[common], help="Finite-difference gradient checks.")
        gradcheck.add_argument("--trials", type=int, default=20, help="Random instances per check.")
        gradcheck.add_argument("--max-batch", type=int, default=16, help="Largest batch size m in the sweep.")
        gradcheck.add_argument("--max-dim", type=int, default=8, help="Largest feature width d in the sweep.")
        gradcheck.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)

        fold = sub.add_parser("fold", parents=[common], help="Fold BN layers of an inference checkpoint.")
        fold.add_argument("checkpoint_in")
        fold.add_argument("checkpoint_out")

        evaluate = sub.add_parser("eval", parents=[common], help="Test accuracy of a checkpoint.")
        evaluate.add_argument("checkpoint")
        return parser.parse_args(argv)

    def load_environment(self):
        """
        Load environment variables from .env file
        """
        dotenv_path = Path("env_base.env")
        if dotenv_path.exists():
            load_dotenv(dotenv_path=dotenv_path)
            logger.debug("Environment loaded from env_base.env")
            Config.DEV_MODE = os.getenv("MODE") == "DEV"
        else:
            load_dotenv()

    def set_general_settings(self, args):
        """
        Set general settings

        Args:
            args (argparse.Namespace): Arguments
        """
        self.command = args.command
        logger.verbose = args.verbose
        logger.quiet = args.quiet

        values = read_config_file(args.config) if args.config else {}
        for flag in TRAIN_FLAGS:
            dest = flag.replace("-", "_")
            if getattr(args, dest) is not None:
                values[dest] = getattr(args, dest)
        known = {f.name for f in fields(TrainConfig)}
        self.train = TrainConfig(**{k: v for k, v in values.items() if k in known})
        if self.train.data_dir is None:
            self.train.data_dir = os.getenv(DATA_DIR_ENV, DEFAULT_DATA_DIR)
        self.train.validate()

        self.checkpoints = getattr(args, "checkpoints", [])
        self.checkpoint_in = getattr(args, "checkpoint_in", None)
        self.checkpoint_out = getattr(args, "checkpoint_out", None)
        self.checkpoint = getattr(args, "checkpoint", None)
        self.trials = getattr(args, "trials", 20)
        self.max_batch = getattr(args, "max_batch", 16)
        self.max_dim = getattr(args, "max_dim", 8)
        self.corrupt = getattr(args, "corrupt", None)

    def set_development_settings(self):
        """
        Set development settings
        These settings are only active when MODE=DEV in env_base.env
        """
        if not logger.quiet:
            logger.verbose = True
        logger.debug("Development Mode is enabled")
