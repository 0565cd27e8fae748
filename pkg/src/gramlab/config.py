"""Strict JSON experiment configs with per-experiment defaults.

A config file names an ``experiment`` and overrides any subset of the
defaults below. Unknown keys, wrong types and out-of-range values raise
:class:`ConfigInvalid` before anything is computed.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalid
from .nn import ACTIVATIONS, LOSSES
from .optim import RULES

EXPERIMENTS = (
    "whitening_compare",
    "tl_dynamics",
    "vcs_vs_agop",
    "lazy_vs_rich",
    "swissroll_virtual",
    "random_label",
    "grokking",
    "vae_beta",
    "nc_probe",
    "prop_checks",
)
DATASETS = ("mnist", "cifar10", "cifar100", "swiss_roll", "staircase", "mod_add", "none")


def _section(**kw) -> dict:
    return dict(kw)


def _base() -> dict:
    return {
        "seed": 0,
        "dataset": _section(name="none", n_train=0, n_test=0, standardize=True, seed=0),
        "network": _section(hidden=[256], activation="relu", bias=False, init="he", readout="identity"),
        "optimizer": _section(rule="sgd", lr=0.01, momentum=0.0, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0),
        "training": _section(epochs=1, batch_size=128, loss="softmax_ce"),
        "diagnostics": _section(tl_every=1, tl_subset=2000, lam=0.0, residual_samples=10),
        "params": {},
    }


def _merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


# Desk-scale defaults. Comments give the protocol constant each value stands in for.
_DEFAULTS = {
    "whitening_compare": {
        "dataset": {"name": "mnist", "n_train": 4000, "n_test": 1000},
        "network": {"hidden": [256, 256, 256]},  # three-layer MLP, width 256
        "optimizer": {"lr": 0.01, "momentum": 0.9},
        "training": {"epochs": 20, "batch_size": 128, "loss": "softmax_ce"},  # 20 epochs
        "params": {"rules": ["sgd", "whitened_sgd"], "n_seeds": 3},
    },
    "tl_dynamics": {
        "dataset": {"name": "cifar10", "n_train": 5000, "n_test": 1000},
        "network": {"hidden": [256, 256, 256, 256], "activation": "gelu"},  # four layers, width 256, GELU
        "optimizer": {"lr": 0.005},  # SGD lr 0.005
        "training": {"epochs": 30, "batch_size": 32, "loss": "softmax_ce"},
        "params": {},
    },
    "vcs_vs_agop": {
        "dataset": {"name": "cifar10", "n_train": 5000, "n_test": 1000},
        "network": {"hidden": [256, 256], "activation": "gelu"},  # two layers, width 256, GELU
        "optimizer": {"lr": 0.05},  # SGD lr 0.05
        "training": {"epochs": 10, "batch_size": 128, "loss": "softmax_ce"},
        "params": {"layer": 0},
    },
    "lazy_vs_rich": {
        "dataset": {"name": "staircase", "n_train": 1000, "n_test": 0, "standardize": False, "d": 10},
        "network": {"hidden": [32, 32, 32], "init": "ntk"},  # depth 3, relu, no bias, NTK init
        "optimizer": {"lr": 0.01},  # full-batch SGD lr 0.01
        "training": {"epochs": 2000, "batch_size": 0, "loss": "mse"},  # 0 = full batch
        "diagnostics": {"tl_every": 20},
        "params": {"widths": [32, 1024], "record_every": 20, "ols_eps": 1e-6},
    },
    "swissroll_virtual": {
        "dataset": {"name": "swiss_roll", "n_train": 1000, "n_test": 0, "standardize": False, "noise": 0.05},
        "network": {"hidden": [256, 256], "bias": True},
        "optimizer": {"lr": 0.05},
        "training": {"epochs": 300, "batch_size": 0, "loss": "mse"},
        "params": {"virtual_lr": 0.05, "snapshot_every": 50},
    },
    "random_label": {
        "dataset": {"name": "cifar10", "n_train": 2000, "n_test": 1000},
        "network": {"hidden": [256, 256, 256]},  # three layers, width 256
        "optimizer": {"lr": 0.005},  # SGD lr 0.005
        "training": {"epochs": 200, "batch_size": 32, "loss": "softmax_ce"},  # 200 epochs
        "params": {"probabilities": [0.0, 1.0]},
    },
    "grokking": {
        "dataset": {"name": "mod_add", "n_train": 0, "n_test": 0, "standardize": False, "p": 61, "train_frac": 0.4},
        "network": {"hidden": [256, 256, 256]},  # three layers, width 256
        "optimizer": {"rule": "adamw", "lr": 0.001, "weight_decay": 0.5},  # Adam lr 0.001, weight decay 0.5
        "training": {"epochs": 500, "batch_size": 0, "loss": "softmax_ce"},  # 500 epochs
        "params": {},
    },
    "vae_beta": {
        "dataset": {"name": "mnist", "n_train": 1000, "n_test": 500, "standardize": False},
        "network": {"hidden": [512]},  # encoder/decoder hidden width 512
        "optimizer": {"rule": "adam", "lr": 0.001},
        "training": {"epochs": 40, "batch_size": 64, "loss": "mse"},
        "params": {"betas": [0.05, 0.1, 1.0, 5.0, 10.0], "latent": 32, "interp_beta": 0.1,
                   "alphas": [0.0, 0.25, 0.5, 0.75, 1.0]},
    },
    "nc_probe": {
        "dataset": {"name": "mnist", "n_train": 4000, "n_test": 1000},
        "network": {"hidden": [256, 256]},
        "optimizer": {"lr": 0.01, "momentum": 0.9},  # 0.05 diverges under mse with He init
        "training": {"epochs": 30, "batch_size": 128, "loss": "mse"},
        "params": {"etf_classes": [2, 3, 5, 10], "etf_extra_dims": 3, "etf_per_class": 5},
    },
    "prop_checks": {
        "params": {"trials": 100},
    },
}

# Keys a dataset section may carry beyond the common ones.
_DATASET_EXTRAS = {"noise": 0.05, "d": 10, "p": 61, "train_frac": 0.4}


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = _merge(_base(), _DEFAULTS[experiment])
    cfg["experiment"] = experiment
    return cfg


def _type_ok(value, ref) -> bool:
    if isinstance(ref, bool):
        return isinstance(value, bool)
    if isinstance(ref, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(ref, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(ref, str):
        return isinstance(value, str)
    if isinstance(ref, list):
        return isinstance(value, list)
    if isinstance(ref, dict):
        return isinstance(value, dict)
    return True


def _check_keys(given: dict, ref: dict, where: str, extras=()) -> None:
    for key, value in given.items():
        if key not in ref and key not in extras:
            raise ConfigInvalid(f"unknown key {where}.{key}")
        target = ref.get(key, _DATASET_EXTRAS.get(key))
        if not _type_ok(value, target):
            raise ConfigInvalid(f"{where}.{key} should be {type(target).__name__}, got {value!r}")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigInvalid(msg)


def validate(raw: dict) -> dict:
    """Merge ``raw`` over the experiment defaults and validate every field."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    name = raw.get("experiment")
    _require(isinstance(name, str), "config needs an 'experiment' string")
    ref = default_config(name)
    for key, value in raw.items():
        if key not in ref:
            raise ConfigInvalid(f"unknown key {key!r}")
        if isinstance(ref[key], dict):
            _require(isinstance(value, dict), f"{key} must be an object")
            extras = tuple(_DATASET_EXTRAS) if key == "dataset" else ()
            _check_keys(value, ref[key], key, extras)
        elif not _type_ok(value, ref[key]):
            raise ConfigInvalid(f"{key} should be {type(ref[key]).__name__}")
    cfg = _merge(ref, {k: v for k, v in raw.items() if k != "experiment"})

    _require(0 <= cfg["seed"] < 2**64, "seed must be a u64")
    ds, net, opt, tr, diag = cfg["dataset"], cfg["network"], cfg["optimizer"], cfg["training"], cfg["diagnostics"]
    _require(ds["name"] in DATASETS, f"dataset.name must be one of {DATASETS}")
    _require(ds["n_train"] >= 0 and ds["n_test"] >= 0, "dataset sizes must be >= 0")
    _require(all(isinstance(w, int) and w >= 1 for w in net["hidden"]), "network.hidden must be positive ints")
    _require(net["activation"] in ACTIVATIONS, f"network.activation must be one of {ACTIVATIONS}")
    _require(net["readout"] in ACTIVATIONS, f"network.readout must be one of {ACTIVATIONS}")
    _require(net["init"] in ("he", "ntk"), "network.init must be 'he' or 'ntk'")
    _require(opt["rule"] in RULES, f"optimizer.rule must be one of {RULES}")
    _require(opt["lr"] > 0, "optimizer.lr must be positive")
    _require(0 <= opt["momentum"] < 1, "optimizer.momentum must lie in [0, 1)")
    _require(0 <= opt["beta1"] < 1 and 0 <= opt["beta2"] < 1, "adam betas must lie in [0, 1)")
    _require(opt["eps"] > 0 and opt["weight_decay"] >= 0, "optimizer.eps > 0 and weight_decay >= 0 required")
    _require(tr["epochs"] >= 1, "training.epochs must be >= 1")
    _require(tr["batch_size"] >= 0, "training.batch_size must be >= 0 (0 = full batch)")
    _require(tr["loss"] in LOSSES, f"training.loss must be one of {LOSSES}")
    _require(diag["tl_every"] >= 1 and diag["tl_subset"] >= 1, "diagnostics cadence and subset must be >= 1")
    _require(diag["lam"] >= 0 and diag["residual_samples"] >= 0, "diagnostics.lam and residual_samples must be >= 0")
    p = cfg["params"]
    if "rules" in p:
        _require(p["rules"] and all(r in RULES for r in p["rules"]), "params.rules must name optimizer rules")
    if "n_seeds" in p:
        _require(p["n_seeds"] >= 1, "params.n_seeds must be >= 1")
    if "widths" in p:
        _require(p["widths"] and all(isinstance(w, int) and w >= 1 for w in p["widths"]), "params.widths must be positive ints")
    if "probabilities" in p:
        _require(all(0 <= q <= 1 for q in p["probabilities"]), "params.probabilities must lie in [0, 1]")
    if "betas" in p:
        _require(all(b >= 0 for b in p["betas"]), "params.betas must be >= 0")
    for key in ("virtual_lr", "ols_eps"):
        if key in p:
            _require(p[key] > 0, f"params.{key} must be positive")
    if ds["name"] == "mod_add":
        _require(ds.get("p", 61) >= 2 and 0 < ds.get("train_frac", 0.4) < 1, "mod_add needs p >= 2, 0 < train_frac < 1")
    cfg["experiment"] = name
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file {path} not found")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    return validate(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated config with convenience accessors."""

    raw: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(validate(raw))

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def __getitem__(self, key):
        return self.raw[key]
