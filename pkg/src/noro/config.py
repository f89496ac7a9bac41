"""Experiment configuration: defaults, config-file parsing and validation.

Config files use INI syntax. Keys in ``[experiment]`` mirror the CLI flags
(dashes or underscores); ``[model.<kind>]`` sections override downstream
hyperparameters::

    [experiment]
    dataset = data/parkinsons_updrs.data
    snr = 10, 20, 30
    models = ridge, gpr

    [model.gpr]
    jitter = 1e-5
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from noro.errors import ConfigError
from noro.noise import NO_NOISE
from noro.regressors import KINDS, RegressorSpec, canonical_kind

TARGET_CHOICES = ("motor", "total", "both")
POWER_SCOPES = ("matrix", "train")
NONE_TOKENS = {"none", "inf", "clean", "no-noise"}


def parse_snr_list(text: str | list) -> tuple[float, ...]:
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    out = []
    for item in items:
        if isinstance(item, (int, float)):
            out.append(float(item))
            continue
        tok = item.strip().lower()
        if not tok:
            continue
        if tok in NONE_TOKENS:
            out.append(NO_NOISE)
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigError(f"invalid SNR value {item!r}") from None
    return tuple(out)


def snr_label(snr: float):
    """JSON/CSV representation of an SNR: a number, or ``"none"`` for no extra noise."""
    if snr == NO_NOISE:
        return "none"
    return int(snr) if float(snr).is_integer() else snr


def parse_int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"invalid integer list {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str = "data/parkinsons_updrs.data"
    target: str = "both"
    bins: int = 5
    snr_list: tuple[float, ...] = (10.0, 20.0, 30.0)
    models: tuple[str, ...] = KINDS
    trials: int = 10
    base_seed: int = 2024
    output_dir: str = "runs"
    denormalize: bool = False
    subject_disjoint_split: bool = False
    alpha_convention: str = "anchor"
    power_scope: str = "matrix"
    paired_test: bool = False
    significance_level: float = 0.05
    epochs_per_fold: int = 200
    encoder_folds: int = 10
    eval_folds: int = 10
    rf_trials: int = 10
    rf_trees: int = 100
    feature: str | None = None
    encoder_path: str | None = None
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(canonical_kind(m) for m in self.models))
        object.__setattr__(self, "snr_list", tuple(float(s) for s in self.snr_list))
        self.validate()

    def validate(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if not self.models:
            raise ConfigError("models must not be empty")
        if not self.snr_list:
            raise ConfigError("snr list must not be empty")
        for s in self.snr_list:
            if math.isnan(s) or (math.isinf(s) and s != NO_NOISE):
                raise ConfigError(f"SNR values must be finite or 'none', got {s}")
        if self.target not in TARGET_CHOICES:
            raise ConfigError(f"target must be one of {TARGET_CHOICES}")
        if self.power_scope not in POWER_SCOPES:
            raise ConfigError(f"power_scope must be one of {POWER_SCOPES}")
        if self.alpha_convention not in ("anchor", "symmetric"):
            raise ConfigError("alpha_convention must be 'anchor' or 'symmetric'")
        if not 1 <= self.eval_folds <= 10 or not 1 <= self.encoder_folds <= 10:
            raise ConfigError("eval_folds and encoder_folds must be in [1, 10]")
        if self.epochs_per_fold < 1 or self.rf_trials < 1 or self.rf_trees < 1:
            raise ConfigError("epochs_per_fold, rf_trials and rf_trees must be >= 1")
        for kind in self.model_params:
            if canonical_kind(kind) not in KINDS:
                raise ConfigError(f"unknown model section {kind!r}")
        for kind in self.models:
            self.regressor_spec(kind, 0)

    @property
    def targets(self) -> tuple[str, ...]:
        return ("motor", "total") if self.target == "both" else (self.target,)

    def regressor_spec(self, kind: str, trial: int) -> RegressorSpec:
        kind = canonical_kind(kind)
        overrides = {}
        for name, params in self.model_params.items():
            if canonical_kind(name) == kind:
                overrides.update(params)
        return RegressorSpec(kind, overrides, self.base_seed + trial)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> dict:
        doc = dataclasses.asdict(self)
        # where results land is not part of the experiment
        doc.pop("output_dir")
        doc["snr_list"] = [snr_label(s) for s in self.snr_list]
        doc["models"] = list(self.models)
        return doc


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {
    "dataset": "dataset_path",
    "snr": "snr_list",
    "seed": "base_seed",
    "output": "output_dir",
    "encoder": "encoder_path",
    "k": "bins",
}


def _coerce(name: str, raw: str):
    kind = str(_FIELD_TYPES[name])
    text = raw.strip()
    if name == "snr_list":
        return parse_snr_list(text)
    if name == "models":
        return tuple(m.strip() for m in text.split(",") if m.strip())
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if kind == "float":
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if "None" in kind and text.lower() in ("", "none"):
        return None
    return text


def _coerce_param(raw: str):
    text = raw.strip()
    if text.lower() == "none":
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config_file(path: str | Path) -> dict:
    """Parse an INI config file into ``ExperimentConfig`` keyword arguments."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    kwargs: dict = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            name = key.replace("-", "_")
            name = _ALIASES.get(name, name)
            if name not in _FIELD_TYPES or name == "model_params":
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(name, raw)
    params = {}
    for section in parser.sections():
        if section.startswith("model."):
            kind = canonical_kind(section[len("model."):])
            params[kind] = {k: _coerce_param(v) for k, v in parser.items(section)}
        elif section != "experiment":
            raise ConfigError(f"unknown config section [{section}]")
    if params:
        kwargs["model_params"] = params
    return kwargs
