"""Run configuration files.

A config is an INI-style document with one section per parameter group::

    [distribution]   workers, transport, queues, pacing
    [training]       learning hyperparameters and stop conditions
    [model]          hidden layer sizes and initialization seed
    [environment]    which environment and its settings
    [commbench]      (optional) communication benchmark settings
    [plan]           (optional) planner output, informational only

Every key has a default; unknown sections or keys are errors. Lists are
comma-separated. See ``docs/config.md`` for units.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from pushrl.envs import EnvError, EnvSpec
from pushrl.types import HyperParams


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line, self.field = line, field
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class DistributionConfig:
    mode: str = "distributed"        # distributed | serial
    n_actors: int = 1
    n_learners: int = 1
    n_groups: int = 1
    cores: int = 2
    transport: str = "inproc"        # inproc | tcp
    queue_depth: int = 1024          # envelopes
    publish_interval: int = 1        # learner updates between parameter pushes
    prefetch: int = 2                # outstanding batch credits per learner
    port: int = 0                    # TCP port for the first listener; 0 = ephemeral
    staleness_control: bool = True
    control_window: float = 1.0      # seconds


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = 0.99
    learning_rate: float = 5e-4
    epsilon: float = 1.0
    epsilon_decay: float = 0.98      # per episode, multiplicative
    epsilon_min: float = 0.01
    target_update_interval: int = 100
    batch_size: int = 32
    buffer_capacity: int = 2048
    warmup_size: int = 32
    rollout_length: int = 16
    train_interval: int = 1          # env steps per update in serial mode
    step_budget: int = 300_000       # total env steps across actors
    target_return: Optional[float] = 195.0
    time_limit: Optional[float] = None  # seconds

    def hyperparams(self) -> HyperParams:
        return HyperParams(self.gamma, self.learning_rate, self.epsilon, self.epsilon_decay,
                           self.epsilon_min, self.target_update_interval, self.batch_size,
                           self.buffer_capacity, self.warmup_size, self.rollout_length,
                           self.train_interval)


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple = (256,)
    seed: int = 0
    update_delay: float = 0.0        # seconds of simulated extra compute per update


@dataclass(frozen=True)
class EnvironmentConfig:
    name: str = "cartpole"
    max_steps: int = 200
    grid_size: int = 4
    step_delay: float = 0.0          # seconds per step
    seed: int = 0

    def spec(self) -> EnvSpec:
        return EnvSpec(self.name, self.max_steps, self.grid_size, self.step_delay)


@dataclass(frozen=True)
class CommbenchConfig:
    message_size: int = 512 * 1024   # bytes
    n_actors: tuple = (1, 2, 4, 8, 16)
    sample_time: float = 0.001       # seconds slept per sample
    n_samples: int = 10_000
    transport: str = "inproc"
    queue_depth: int = 1024
    message_sizes: tuple = ()        # optional size sweep (bytes) at the first n_actors


@dataclass(frozen=True)
class PlanSection:
    """Block written by ``plan``. Only ``target_p`` affects ``train``: it is the
    staleness target the pacing controller holds while the buffer runs at the
    planned (rescaled) capacity."""
    predicted_tr_a: float = 0.0
    predicted_tr_l: float = 0.0
    target_p: float = 0.0
    m_l: int = 0
    m_a: int = 0
    bottleneck: str = ""


GROUPS = {
    "distribution": DistributionConfig,
    "training": TrainingConfig,
    "model": ModelConfig,
    "environment": EnvironmentConfig,
    "commbench": CommbenchConfig,
    "plan": PlanSection,
}
OPTIONAL_GROUPS = ("commbench", "plan")


@dataclass(frozen=True)
class RunConfig:
    distribution: DistributionConfig = field(default_factory=DistributionConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    commbench: Optional[CommbenchConfig] = None
    plan: Optional[PlanSection] = None

    def settings(self):
        from pushrl.runtime import TrainSettings
        d, t = self.distribution, self.training
        return TrainSettings(
            env=self.environment.spec(), hp=t.hyperparams(), hidden=tuple(self.model.hidden),
            model_seed=self.model.seed, seed=self.environment.seed, mode=d.mode,
            n_actors=d.n_actors, n_learners=d.n_learners, n_groups=d.n_groups,
            transport=d.transport, queue_depth=d.queue_depth, publish_interval=d.publish_interval,
            prefetch=d.prefetch, step_budget=t.step_budget, target_return=t.target_return,
            time_limit=t.time_limit, staleness_control=d.staleness_control,
            control_window=d.control_window, update_delay=self.model.update_delay,
            target_P=self.plan.target_p if self.plan is not None and self.plan.target_p > 0 else None)


# --- value coercion -----------------------------------------------------------

def _coerce(raw: str, default, name: str, optional: bool = False):
    raw = raw.strip()
    if (optional or default is None) and raw.lower() in ("none", ""):
        return None
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        if not raw:
            return ()
        return tuple(int(float(x.replace("_", ""))) if _is_int(x) else float(x) for x in raw.split(","))
    if default is None or isinstance(default, float):
        return float(raw)
    if isinstance(default, int):
        if not _is_int(raw):
            raise ValueError(f"{name}: expected an integer, got {raw!r}")
        return int(float(raw.replace("_", "")))
    return raw


def _is_int(x: str) -> bool:
    # plain integers, with optional underscores or a non-negative exponent ("1e4")
    return re.fullmatch(r"[+-]?\d[\d_]*(e\+?\d+)?", x.strip(), re.IGNORECASE) is not None


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def loads(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        lineno, bad = exc.errors[0] if exc.errors else (None, "")
        bad = bad.strip("'\"").replace("\\n", "").strip()  # configparser stores repr(line)
        raise ConfigError(f"cannot parse {bad!r}; expected 'key = value'", lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None

    groups = {}
    for section in cp.sections():
        if section not in GROUPS:
            raise ConfigError(f"unknown section [{section}]", _line_of(text, section), section)
        cls = GROUPS[section]
        defaults = {f.name: _default(f) for f in fields(cls)}
        optional = {f.name for f in fields(cls) if "Optional" in str(f.type)}
        values = {}
        for key, raw in cp.items(section):
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  _line_of(text, section, key), f"{section}.{key}")
            try:
                values[key] = _coerce(raw, defaults[key], f"{section}.{key}",
                                      optional=key in optional)
            except ValueError as exc:
                raise ConfigError(str(exc), _line_of(text, section, key), f"{section}.{key}") from None
        groups[section] = cls(**values)
    cfg = RunConfig(**groups)
    validate(cfg)
    return cfg


def _default(f: dataclasses.Field):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def parse_config(path: Union[str, Path]) -> RunConfig:
    return loads(Path(path).read_text())


def validate(cfg: RunConfig) -> None:
    """Cross-field checks; raises :class:`ConfigError` naming the offending field."""
    d, t, m, e = cfg.distribution, cfg.training, cfg.model, cfg.environment
    checks = [
        (d.mode in ("distributed", "serial"), "distribution.mode", "must be 'distributed' or 'serial'"),
        (d.n_actors >= 1, "distribution.n_actors", "must be at least 1"),
        (d.n_learners >= 1, "distribution.n_learners", "must be at least 1"),
        (d.n_groups >= 1, "distribution.n_groups", "must be at least 1"),
        (d.cores >= 1, "distribution.cores", "must be at least 1"),
        (d.transport in ("inproc", "tcp"), "distribution.transport", "must be 'inproc' or 'tcp'"),
        (d.queue_depth >= 1, "distribution.queue_depth", "must be positive"),
        (d.publish_interval >= 1, "distribution.publish_interval", "must be positive"),
        (d.prefetch >= 1, "distribution.prefetch", "must be positive"),
        (0 <= d.port < 65536, "distribution.port", "must be a valid TCP port"),
        (d.control_window > 0, "distribution.control_window", "must be positive"),
        (t.step_budget >= 1, "training.step_budget", "must be positive"),
        (t.time_limit is None or t.time_limit > 0, "training.time_limit", "must be positive"),
        (all(isinstance(h, int) and h >= 1 for h in m.hidden), "model.hidden", "sizes must be positive integers"),
        (m.update_delay >= 0, "model.update_delay", "must be non-negative"),
    ]
    for ok, name, msg in checks:
        if not ok:
            raise ConfigError(f"{name} {msg}", field=name)
    if t.batch_size > t.buffer_capacity:
        raise ConfigError("training.batch_size must not exceed training.buffer_capacity",
                          field="training.batch_size")
    try:
        t.hyperparams()
    except ValueError as exc:
        raise ConfigError(f"training: {exc}", field="training") from None
    try:
        e.spec()
    except EnvError as exc:
        raise ConfigError(f"environment: {exc}", field="environment") from None
    if cfg.commbench is not None:
        c = cfg.commbench
        if c.message_size < 0 or c.n_samples < 1 or c.sample_time < 0 or not c.n_actors:
            raise ConfigError("commbench settings out of range", field="commbench")
        if any(n < 1 for n in c.n_actors):
            raise ConfigError("commbench.n_actors entries must be positive", field="commbench.n_actors")
        if c.transport not in ("inproc", "tcp"):
            raise ConfigError("commbench.transport must be 'inproc' or 'tcp'", field="commbench.transport")


def dumps(cfg: RunConfig, header: str = "") -> str:
    out = []
    if header:
        out += [f"# {line}" if line else "#" for line in header.splitlines()]
        out.append("")
    for name in GROUPS:
        group = getattr(cfg, name)
        if group is None:
            continue
        out.append(f"[{name}]")
        for f in fields(group):
            out.append(f"{f.name} = {_format(getattr(group, f.name))}")
        out.append("")
    return "\n".join(out)


def replace(cfg: RunConfig, **groups) -> RunConfig:
    """Copy of ``cfg`` with per-group field overrides, e.g. ``training={"batch_size": 64}``."""
    new = {}
    for name, changes in groups.items():
        current = getattr(cfg, name) or GROUPS[name]()
        new[name] = dataclasses.replace(current, **changes)
    out = dataclasses.replace(cfg, **new)
    validate(out)
    return out


# --- profile files ----------------------------------------------------------------

def dumps_profile(profile) -> str:
    """A measured :class:`~pushrl.strategy.ThroughputProfile` as a ``[profile]`` block."""
    lines = ["[profile]"]
    for k, v in profile.as_dict().items():
        lines.append(f"{k} = {_format(v)}")
    return "\n".join(lines) + "\n"


def load_profile(path: Union[str, Path]):
    from pushrl.strategy import StrategyError, ThroughputProfile

    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"profile file: {exc}") from None
    if not cp.has_section("profile"):
        raise ConfigError("profile file needs a [profile] section")
    known = {f.name: f for f in fields(ThroughputProfile)}
    values = {}
    for key, raw in cp.items("profile"):
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [profile]", _line_of(text, "profile", key))
        try:
            values[key] = raw.strip() if key == "measured_on" else float(raw)
        except ValueError:
            raise ConfigError(f"profile.{key}: expected a number, got {raw!r}",
                              _line_of(text, "profile", key), f"profile.{key}") from None
    try:
        return ThroughputProfile(**values)
    except (TypeError, StrategyError) as exc:
        raise ConfigError(f"profile: {exc}") from None
