"""Run configuration: flat ``section.key = value`` text files.

Lines are ``key = value``; ``#`` starts a comment. Unknown keys are rejected
and every value is validated after parsing. Precedence, lowest first:
built-in defaults, config file, ``PARAREALPINN__SECTION__KEY`` environment
variables, command-line flags.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .discretization import StepScheme
from .model import InvalidParameterError, MarketParams, UpperBoundary
from .parareal import Stopping
from .pinn.network import Activation

CONFIG_ENV = "PARAREALPINN_CONFIG"
ENV_PREFIX = "PARAREALPINN__"


class ConfigError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class MarketSection:
    r: float = 0.03
    sigma: float = 0.4
    strike: float = 2500.0
    expiry: float = 1.0
    domain_bound: float = 5000.0


@dataclass(frozen=True)
class GridSection:
    n_intervals: int = 1000
    upper_bc: str = "asymptotic"


@dataclass(frozen=True)
class SteppingSection:
    fine_steps: int = 200
    coarse_steps: int = 100
    fine_scheme: str = "crank_nicolson"
    coarse_scheme: str = "implicit_euler"
    startup_steps: int = 2


@dataclass(frozen=True)
class PararealSection:
    slices: int = 16
    max_iterations: int = 16
    tolerance: float = 1e-10
    stopping: str = "increment"
    workers: int = 1
    executor: str = "thread"
    repetitions: int = 5
    bench_iterations: int = 3
    bench_slices: tuple = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class NetworkSection:
    hidden_layers: int = 10
    width: int = 50
    activation: str = "tanh"
    input_scale: Optional[float] = None   # None: domain_bound
    output_scale: Optional[float] = None  # None: strike


@dataclass(frozen=True)
class TrainingSection:
    phases: tuple = ((5000, 1e-2), (800, 1e-3))
    batch_size: Optional[int] = None
    n_f: int = 100_000
    n_b: int = 10_000
    n_exp: int = 10_000
    seed: int = 0
    shuffle: bool = True
    dtype: str = "float32"
    data_node_stride: int = 10
    validation_fraction: float = 0.2


@dataclass(frozen=True)
class SweepSection:
    sigma_values: tuple = (0.4, 0.8, 2.0, 4.0)
    r_values: tuple = (0.03, 0.3)


@dataclass(frozen=True)
class PathsSection:
    checkpoint: str = "out/pinn.json"
    nn_checkpoint: str = "out/nn.json"
    out_dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    market: MarketSection = field(default_factory=MarketSection)
    grid: GridSection = field(default_factory=GridSection)
    stepping: SteppingSection = field(default_factory=SteppingSection)
    parareal: PararealSection = field(default_factory=PararealSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @property
    def market_params(self) -> MarketParams:
        return MarketParams(**asdict(self.market))

    @property
    def layer_sizes(self) -> list:
        return [2] + [self.network.width] * self.network.hidden_layers + [1]

    def set(self, key: str, value) -> "RunConfig":
        """Copy with one dotted key replaced (value already typed)."""
        section, name = _split_key(key)
        return replace(self, **{section: replace(getattr(self, section), **{name: value})})


def _split_key(key: str, line: Optional[int] = None) -> tuple[str, str]:
    section, _, name = key.partition(".")
    sections = {f.name: f for f in fields(RunConfig)}
    if section not in sections or not name:
        raise ConfigError(f"unknown key {key!r}", field=key, line=line)
    if name not in {f.name for f in fields(sections[section].default_factory())}:
        raise ConfigError(f"unknown key {key!r}", field=key, line=line)
    return section, name


def _default(key: str):
    section, name = _split_key(key)
    return getattr(getattr(RunConfig(), section), name)


# per-key value grammar beyond the type of the default
_OPTIONAL_FLOAT = {"network.input_scale", "network.output_scale"}
_OPTIONAL_INT = {"training.batch_size"}


def parse_value(key: str, text: str):
    text = text.strip()
    default = _default(key)
    if key in _OPTIONAL_FLOAT:
        return None if text == "auto" else float(text)
    if key in _OPTIONAL_INT:
        return None if text == "auto" else int(text)
    if key == "training.phases":
        out = []
        for item in text.split(","):
            epochs, _, lr = item.strip().partition(":")
            if not lr:
                raise ValueError(f"phase {item.strip()!r} is not epochs:lr")
            out.append((int(epochs), float(lr)))
        return tuple(out)
    if isinstance(default, bool):
        if text.lower() in ("true", "yes", "1", "on"):
            return True
        if text.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, tuple):
        kind = type(default[0])
        return tuple(kind(x) for x in text.split(",") if x.strip())
    return type(default)(text)


def format_value(key: str, value) -> str:
    if value is None:
        return "auto"
    if key == "training.phases":
        return ", ".join(f"{e}:{lr!r}" for e, lr in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def all_keys() -> list:
    cfg = RunConfig()
    return [f"{s.name}.{f.name}" for s in fields(cfg) for f in fields(getattr(cfg, s.name))]


def dumps(config: RunConfig) -> str:
    lines = []
    current = None
    for key in all_keys():
        section, name = key.split(".")
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"# {section}")
            current = section
        lines.append(f"{key} = {format_value(key, getattr(getattr(config, section), name))}")
    return "\n".join(lines) + "\n"


def loads(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key = key.strip()
        _split_key(key, lineno)
        try:
            cfg = cfg.set(key, parse_value(key, value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", field=key, line=lineno) from exc
    return cfg


def apply_env(config: RunConfig, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    for name, value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        _split_key(key)
        try:
            config = config.set(key, parse_value(key, value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key} in ${name}: {exc}", field=key) from exc
    return config


def validate(config: RunConfig) -> RunConfig:
    try:
        config.market_params
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), field=exc.field) from exc

    def check(ok: bool, key: str, msg: str):
        if not ok:
            raise ConfigError(f"{key}: {msg}", field=key.split(".")[-1])

    def member(enum, key: str, value):
        try:
            enum(value)
        except ValueError:
            check(False, key, f"must be one of {[e.value for e in enum]}, got {value!r}")

    g, st, pr, nw, tr = config.grid, config.stepping, config.parareal, config.network, config.training
    check(g.n_intervals >= 2, "grid.n_intervals", "must be >= 2")
    member(UpperBoundary, "grid.upper_bc", g.upper_bc)
    check(st.fine_steps >= 1, "stepping.fine_steps", "must be >= 1")
    check(st.coarse_steps >= 1, "stepping.coarse_steps", "must be >= 1")
    check(st.startup_steps >= 0, "stepping.startup_steps", "must be >= 0")
    member(StepScheme, "stepping.fine_scheme", st.fine_scheme)
    member(StepScheme, "stepping.coarse_scheme", st.coarse_scheme)
    check(pr.slices >= 1, "parareal.slices", "must be >= 1")
    check(1 <= pr.max_iterations <= pr.slices, "parareal.max_iterations", "must be in [1, slices]")
    check(pr.tolerance > 0, "parareal.tolerance", "must be > 0")
    member(Stopping, "parareal.stopping", pr.stopping)
    check(pr.workers >= 1, "parareal.workers", "must be >= 1")
    check(pr.executor in ("thread", "process"), "parareal.executor", "must be thread or process")
    check(pr.repetitions >= 1, "parareal.repetitions", "must be >= 1")
    check(pr.bench_iterations >= 1, "parareal.bench_iterations", "must be >= 1")
    check(len(pr.bench_slices) > 0 and min(pr.bench_slices) >= 1, "parareal.bench_slices",
          "must be a nonempty list of positive integers")
    check(nw.hidden_layers >= 0, "network.hidden_layers", "must be >= 0")
    check(nw.width >= 1, "network.width", "must be >= 1")
    member(Activation, "network.activation", nw.activation)
    for key, v in (("network.input_scale", nw.input_scale), ("network.output_scale", nw.output_scale)):
        check(v is None or v > 0, key, "must be > 0 or auto")
    check(len(tr.phases) > 0, "training.phases", "need at least one phase")
    for epochs, lr in tr.phases:
        check(epochs >= 0, "training.phases", f"epochs must be >= 0, got {epochs}")
        check(lr > 0, "training.phases", f"learning rate must be > 0, got {lr}")
    check(tr.batch_size is None or tr.batch_size >= 1, "training.batch_size", "must be >= 1 or auto")
    for key in ("n_f", "n_b", "n_exp"):
        check(getattr(tr, key) >= 1, f"training.{key}", "must be >= 1")
    check(tr.dtype in ("float32", "float64"), "training.dtype", "must be float32 or float64")
    check(tr.data_node_stride >= 1, "training.data_node_stride", "must be >= 1")
    check(0.0 <= tr.validation_fraction < 1.0, "training.validation_fraction", "must be in [0, 1)")
    for key in ("sigma_values", "r_values"):
        check(len(getattr(config.sweep, key)) > 0, f"sweep.{key}", "must not be empty")
    return config


def load_config(path=None, environ=None) -> RunConfig:
    """Defaults, then the file (``path`` or $PARAREALPINN_CONFIG), then env overrides."""
    environ = os.environ if environ is None else environ
    path = path or environ.get(CONFIG_ENV)
    cfg = RunConfig()
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = loads(text)
    return validate(apply_env(cfg, environ))


def dump_config(config: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps(config))
    return path
