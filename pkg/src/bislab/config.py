"""Flat INI-style run configuration with command-line overrides.

A config file holds [data], [train], [bis], [run] and [grid] sections of
key = value lines. Every key is optional (package defaults apply), but
unknown sections or keys are hard errors so a typo cannot silently fall
back to a default. Overrides use the same names: ``section.key=value``.
"""

from __future__ import annotations

import configparser
import os

from .data import DEFAULT_TEST_PER_CLASS, LongTailSpec
from .errors import ConfigError
from .sampling import SCHEDULE_KINDS
from .trainer import SAMPLER_KINDS, TrainConfig, make_bis_schedule

DEFAULT_SCHEDULE = "parabolic"
DEFAULT_PAIR = ("random", "mean")


def _choice(options, label):
    def parse(text: str):
        if text not in options:
            raise ValueError(f"unknown {label} {text!r}, expected one of {sorted(options)}")
        return text

    return parse


def _tokens(text: str) -> list[str]:
    toks = [tok.strip() for tok in text.split(",")]
    toks = [tok for tok in toks if tok]
    if not toks:
        raise ValueError("empty list")
    return toks


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in _tokens(text)]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in _tokens(text)]


def _pair(tok: str) -> tuple[str, str]:
    parts = tok.split(":")
    if len(parts) != 2:
        raise ValueError(f"sampler pair {tok!r} must look like labeled:unlabeled")
    a, b = parts[0].strip(), parts[1].strip()
    for name in (a, b):
        if name not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler {name!r} in pair {tok!r}")
    return a, b


def _pair_list(text: str) -> list[tuple[str, str]]:
    return [_pair(tok) for tok in _tokens(text)]


def _schedule_list(text: str) -> list[str]:
    parse = _choice(SCHEDULE_KINDS, "schedule")
    return [parse(tok) for tok in _tokens(text)]


_sampler = _choice(SAMPLER_KINDS, "sampler")

# section -> key -> coercion; this is the whole config surface
SCHEMA = {
    "data": {
        "k": int, "n1": int, "lam": float, "beta": float, "dim": int,
        "class_sep": float, "noise_sigma": float,
        "seed": int, "test_per_class": int,
    },
    "train": {
        "epochs": int, "steps_per_epoch": int,
        "batch_labeled": int, "batch_unlabeled": int,
        "tau": float, "lambda_u": float, "q": float,
        "lr": float, "hidden": int,
        "labeled_sampler": _sampler, "unlabeled_sampler": _sampler,
        "finetune_lr_scale": float,
    },
    "bis": {
        "schedule": _choice(SCHEDULE_KINDS, "schedule"),
        "sampler_a": _sampler, "sampler_b": _sampler,
    },
    "run": {"seed": int},
    "grid": {
        "lambdas": _float_list, "betas": _float_list,
        "pairs": _pair_list, "schedules": _schedule_list,
        "q_values": _float_list, "seeds": _int_list,
    },
}


def _coerce(section: str, key: str, raw: str):
    keys = SCHEMA.get(section)
    if keys is None:
        raise ConfigError(f"unknown config section [{section}]")
    fn = keys.get(key)
    if fn is None:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    try:
        return fn(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc


def parse_override(text: str) -> tuple[str, str, object]:
    """Parse one ``section.key=value`` command-line override."""
    head, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    section, dot, key = head.strip().partition(".")
    if not dot or not key:
        raise ConfigError(f"override {text!r} must name a section.key")
    return section, key.strip(), _coerce(section, key.strip(), raw.strip())


def load_settings(path: str | os.PathLike | None = None,
                  overrides: tuple[str, ...] = ()) -> dict:
    """Read a config file (if any) and apply overrides on top.

    Returns {section: {key: typed value}} holding only the keys that were
    actually given; callers fill in defaults from the dataclasses.
    """
    settings: dict[str, dict] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep keys case-sensitive
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        if parser.defaults():
            raise ConfigError("keys outside any [section] are not allowed")
        for section in parser.sections():
            for key, raw in parser[section].items():
                settings.setdefault(section, {})[key] = _coerce(section, key, raw)
    for text in overrides:
        section, key, value = parse_override(text)
        settings.setdefault(section, {})[key] = value
    return settings


def data_spec(settings: dict) -> LongTailSpec:
    given = dict(settings.get("data", {}))
    given.pop("seed", None)
    given.pop("test_per_class", None)
    return LongTailSpec(**given)


def data_seed(settings: dict) -> int:
    return settings.get("data", {}).get("seed", 0)


def eval_per_class(settings: dict) -> int:
    return settings.get("data", {}).get("test_per_class", DEFAULT_TEST_PER_CLASS)


def run_seed(settings: dict) -> int:
    return settings.get("run", {}).get("seed", 0)


def train_config(settings: dict, labeled_counts=None,
                 with_bis: bool = False) -> TrainConfig:
    """Build the TrainConfig, attaching a blend schedule when requested.

    The schedule needs the labeled per-class counts (strategies are derived
    from them), so callers pass counts only for BiS runs.
    """
    kwargs = dict(settings.get("train", {}))
    bis_keys = settings.get("bis", {})
    if with_bis:
        if labeled_counts is None:
            raise ConfigError("a blend schedule needs labeled class counts")
        epochs = kwargs.get("epochs", TrainConfig.__dataclass_fields__["epochs"].default)
        kwargs["bis"] = make_bis_schedule(
            bis_keys.get("schedule", DEFAULT_SCHEDULE),
            bis_keys.get("sampler_a", DEFAULT_PAIR[0]),
            bis_keys.get("sampler_b", DEFAULT_PAIR[1]),
            epochs, labeled_counts,
        )
    elif bis_keys:
        raise ConfigError("[bis] section given but this command does not blend samplers")
    return TrainConfig(**kwargs)
