"""Experiment configuration: flat `section.key = value` text files.

Unknown keys are rejected by name, as are unparseable values, so a typo
fails fast instead of silently running with a default. Every field has a
task-appropriate default; a config file only has to name the task and
whatever it wants to override.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError

TASKS = ("batch-classify", "online-predict")
_MISSING = object()


@dataclass
class ExperimentConfig:
    task: str
    seed: int = 0
    # network shape (online task; the batch task derives its shape from the data)
    n_visible: int = 9
    n_hidden: int = 2
    # value coding (online task)
    coding_scheme: str = "rate"
    steps_per_value: int = 5
    # synaptic/feedback basis
    basis_count: int = 5
    basis_durations: tuple = ()     # empty -> task default, see durations()
    basis_fb_durations: tuple = ()  # empty -> task default, see fb_durations()
    # training
    eta: float = 0.01
    kappa: float = 0.5
    alpha: float = 1.0
    target_rate: float = 0.1
    baseline: bool = True
    baseline_step: float = 0.01
    epochs: int = 150
    horizon: int = 40
    # evaluation
    eval_horizons: tuple = (5, 10, 20, 40)
    rollouts: int = 1
    # initialization
    init_scheme: str = "normal"
    init_scale: float = 0.1
    # data
    data_source: str = "synthetic"
    train_count: int = 100
    test_count: int = 50
    length: int = 20000
    # reporting
    figures: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}, got {self.task!r}")
        _check(self.seed >= 0, "seed", "must be >= 0")
        _check(self.n_visible >= 1, "topology.n_visible", "must be >= 1")
        _check(self.n_hidden >= 0, "topology.n_hidden", "must be >= 0")
        _check(self.coding_scheme in ("rate", "time"), "coding.scheme",
               "must be rate or time")
        _check(self.steps_per_value >= 1, "coding.steps_per_value", "must be >= 1")
        _check(self.basis_count >= 1, "basis.count", "must be >= 1")
        _check(all(d >= 1 for d in self.basis_durations), "basis.durations",
               "entries must be >= 1")
        _check(all(d >= 1 for d in self.basis_fb_durations), "basis.fb_durations",
               "entries must be >= 1")
        _check(self.eta >= 0, "train.eta", "must be >= 0")
        _check(0 <= self.kappa < 1, "train.kappa", "must lie in [0, 1)")
        _check(self.alpha >= 0, "train.alpha", "must be >= 0")
        _check(0 < self.target_rate < 1, "train.r", "must lie in (0, 1)")
        _check(0 < self.baseline_step <= 1, "train.baseline_step",
               "must lie in (0, 1]")
        _check(self.epochs >= 1, "train.epochs", "must be >= 1")
        _check(self.horizon >= 1, "train.horizon", "must be >= 1")
        _check(len(self.eval_horizons) >= 1
               and all(h >= 1 for h in self.eval_horizons),
               "eval.horizons", "must list horizons >= 1")
        _check(self.rollouts >= 1, "eval.rollouts", "must be >= 1")
        _check(self.init_scheme in ("normal", "uniform"), "init.scheme",
               "must be normal or uniform")
        _check(self.init_scale > 0, "init.scale", "must be > 0")
        _check(self.train_count >= 1, "data.train_count", "must be >= 1")
        _check(self.test_count >= 1, "data.test_count", "must be >= 1")
        _check(self.length >= 1, "data.length", "must be >= 1")

    def durations(self) -> tuple:
        """Basis durations, falling back to the task default spread.

        Online: half a coding window up to ten windows, the longest spans
        ten past values. Batch: equal fractions of the training horizon up
        to the full horizon.
        """
        if self.basis_durations:
            return self.basis_durations
        k = self.basis_count
        if self.task == "online-predict":
            if k == 5:
                spread = (0.5, 1.0, 3.0, 5.0, 10.0)
            elif k == 1:
                spread = (10.0,)
            else:
                spread = tuple(0.5 + 9.5 * i / (k - 1) for i in range(k))
            return tuple(max(1.0, f * self.steps_per_value) for f in spread)
        return tuple(max(1.0, self.horizon * (i + 1) / k) for i in range(k))

    def fb_durations(self) -> tuple:
        """Feedback basis durations, falling back to the task default.

        Online mirrors the synaptic spread. Batch keeps feedback within the
        last two steps: with longer windows the output units learn to echo
        their own training-time firing pattern, which is unstable once the
        network free-runs, while one- and two-step kernels can only express
        refractory self-inhibition.
        """
        if self.basis_fb_durations:
            return self.basis_fb_durations
        if self.task == "online-predict":
            return self.durations()
        k = self.basis_count
        return tuple(1.0 if i < (k + 1) // 2 else 2.0 for i in range(k))


def _check(ok, key, message):
    if not ok:
        raise ConfigError(f"{key} {message}")


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise ValueError(lowered)


def _parse_float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


# dotted config key -> (ExperimentConfig field, value parser)
KEYS = {
    "task": ("task", str),
    "seed": ("seed", int),
    "topology.n_visible": ("n_visible", int),
    "topology.n_hidden": ("n_hidden", int),
    "coding.scheme": ("coding_scheme", str),
    "coding.steps_per_value": ("steps_per_value", int),
    "basis.count": ("basis_count", int),
    "basis.durations": ("basis_durations", _parse_float_list),
    "basis.fb_durations": ("basis_fb_durations", _parse_float_list),
    "train.eta": ("eta", float),
    "train.kappa": ("kappa", float),
    "train.alpha": ("alpha", float),
    "train.r": ("target_rate", float),
    "train.baseline": ("baseline", _parse_bool),
    "train.baseline_step": ("baseline_step", float),
    "train.epochs": ("epochs", int),
    "train.horizon": ("horizon", int),
    "eval.horizons": ("eval_horizons", _parse_int_list),
    "eval.rollouts": ("rollouts", int),
    "init.scheme": ("init_scheme", str),
    "init.scale": ("init_scale", float),
    "data.source": ("data_source", str),
    "data.train_count": ("train_count", int),
    "data.test_count": ("test_count", int),
    "data.length": ("length", int),
    "report.figures": ("figures", _parse_bool),
}

_TASK_DEFAULTS = {
    # classification trains in batch mode with a wide uniform init
    "batch-classify": dict(basis_count=8, eta=0.05, init_scheme="uniform",
                           init_scale=1.0, epochs=100),
    # streaming prediction uses the online variational rule
    "online-predict": dict(basis_count=5, eta=0.01, init_scheme="normal",
                           init_scale=0.1),
}


def parse_config_text(text) -> dict:
    """`key = value` lines -> {key: raw string}; # starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"duplicate config key {key!r}")
        raw[key] = value.strip()
    return raw


def build_config(raw, seed=None) -> ExperimentConfig:
    """Raw key strings -> validated config; `seed` overrides any config seed."""
    unknown = [key for key in raw if key not in KEYS]
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    if "task" not in raw:
        raise ConfigError("config must set 'task'")
    task = raw["task"]
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}, got {task!r}")
    values = dict(task=task, **_TASK_DEFAULTS[task])
    for key, text in raw.items():
        field_name, parser = KEYS[key]
        try:
            values[field_name] = parser(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r}") from exc
    if seed is not None:
        values["seed"] = int(seed)
    return ExperimentConfig(**values)


def load_config(path, seed=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text), seed=seed)


def default_config(task, **overrides) -> ExperimentConfig:
    """Programmatic counterpart of a config file with only `task` set."""
    values = dict(task=task, **_TASK_DEFAULTS.get(task, {}))
    values.update(overrides)
    return ExperimentConfig(**values)


def config_fields(config) -> dict:
    """Field name -> value, for logging."""
    return {f.name: getattr(config, f.name) for f in fields(config)}


def with_overrides(config, **overrides) -> ExperimentConfig:
    return replace(config, **overrides)
