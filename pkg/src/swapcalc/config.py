"""Scenario configuration: TOML file, defaults, overrides and validation."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .errors import ValidationError

COMMANDS = ("fidelity-chain", "link-efficiency", "imbalance-map", "type2-report", "verify")

DEFAULTS: dict[str, Any] = {
    "run": {"seed": 0, "threads": 0},
    "fidelity_chain": {
        "p": 0.01,
        "fidelity": 0.9,
        "eta": 0.1,
        "eta_r": 0.9,
        "ell": {"start": 1, "stop": 10, "steps": 10},
    },
    "link_efficiency": {
        "fidelity": 0.9,
        "eta_r": 0.9,
        "eta_d": 0.9,
        "model": "closed_form",
        "ell_max": 32,
        "loss_db": {"start": 1.0, "stop": 150.0, "steps": 150},
    },
    "imbalance_map": {
        "combined_loss_db": 40.0,
        "p": 0.01,
        "eta_r": 0.9,
        "chains": ["I", "II", "IA", "IB"],
        "ells": [2, 3, 4],
        "three_pair_threshold": 1.0,
        "split": {"start": 0.0, "stop": 1.0, "steps": 41},
    },
    "type2": {
        "delta_f": 0.01,
        "bsm_loss_db": 20.0,
        "alpha_receiver": 0.0,
        "worked_example": True,
        "split_db": {"start": 0.5, "stop": 19.5, "steps": 39},
        "cascaded": {"enabled": True, "M": 1000.0, "eta_r": 0.95},
        "example": {"combined_loss_db": 40.0, "fidelity": 0.95},
    },
    "verify": {"draws": 5, "mc_samples": 20000, "loss_states": 20, "perturb_eta": 0.0, "tol": 1e-10},
}

# channels that may be given either as a transmission or as a loss in dB
_DB_PAIRS = {("fidelity_chain", "eta"), ("fidelity_chain", "eta_r"), ("link_efficiency", "eta_r"),
             ("link_efficiency", "eta_d"), ("imbalance_map", "eta_r"), ("type2.cascaded", "eta_r")}


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def _merge(base: dict, upd: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        where = f"{path}{k}"
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v, where + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str) -> Any:
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one ``dotted.key=value`` override; the value is read as a TOML literal."""
    if "=" not in item:
        raise ValidationError(f"override {item!r} is not key=value")
    key, text = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ValidationError(f"override {item!r} has an empty key")
    out = copy.deepcopy(cfg)
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValidationError(f"override {key}: {p} is not a section")
    node[parts[-1]] = _parse_value(text.strip())
    return out


def _resolve_db(cfg: dict) -> dict:
    for sec, key in _DB_PAIRS:
        node = cfg
        for p in sec.split("."):
            node = node.get(p, {})
        dbkey = f"{key}_db"
        if dbkey in node:
            db = node.pop(dbkey)
            if not isinstance(db, (int, float)) or db < 0:
                raise ValidationError(f"{sec}.{dbkey}: must be a non-negative number")
            node[key] = 10.0 ** (-db / 10.0)
    return cfg


def _check_exclusive(user: dict):
    for sec, key in _DB_PAIRS:
        node = user
        for p in sec.split("."):
            node = node.get(p, {}) if isinstance(node, dict) else {}
        if isinstance(node, dict) and key in node and f"{key}_db" in node:
            raise ValidationError(f"{sec}: {key} and {key}_db are both set")


def _num(cfg: dict, sec: str, key: str, lo: float, hi: float, lo_open=False, hi_open=False, integer=False):
    node = cfg
    for p in sec.split("."):
        node = node[p]
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{sec}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ValidationError(f"{sec}.{key}: expected an integer, got {v!r}")
    if math.isnan(v) or v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ValidationError(f"{sec}.{key}={v} outside {lb}{lo}, {hi}{rb}")


def _grid(cfg: dict, sec: str, key: str, lo: float, hi: float, integer=False):
    node = cfg
    for p in sec.split("."):
        node = node[p]
    g = node[key]
    if not isinstance(g, dict) or set(g) != {"start", "stop", "steps"}:
        raise ValidationError(f"{sec}.{key}: grid needs exactly start, stop, steps")
    for k in ("start", "stop"):
        _num(cfg, f"{sec}.{key}", k, lo, hi, integer=integer)
    _num(cfg, f"{sec}.{key}", "steps", 1, 10 ** 6, integer=True)
    if g["stop"] < g["start"]:
        raise ValidationError(f"{sec}.{key}: stop < start")
    if g["steps"] == 1 and g["stop"] != g["start"]:
        raise ValidationError(f"{sec}.{key}: a single step needs start == stop")


def validate(cfg: dict) -> None:
    """Raise ``ValidationError`` naming the first offending field."""
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown section(s): {', '.join(sorted(unknown))}")
    for sec, body in DEFAULTS.items():
        _check_keys(cfg[sec], body, sec)
    _num(cfg, "run", "seed", 0, 2 ** 64 - 1, integer=True)
    _num(cfg, "run", "threads", 0, 1024, integer=True)

    s = "fidelity_chain"
    _num(cfg, s, "p", 0, 8 / 27)
    _num(cfg, s, "fidelity", 0.25, 1, lo_open=True, hi_open=True)
    _num(cfg, s, "eta", 0, 1)
    _num(cfg, s, "eta_r", 0, 1)
    _grid(cfg, s, "ell", 1, 10 ** 4, integer=True)

    s = "link_efficiency"
    _num(cfg, s, "fidelity", 0.25, 1, lo_open=True, hi_open=True)
    _num(cfg, s, "eta_r", 0, 1, lo_open=True)
    _num(cfg, s, "eta_d", 0, 1, lo_open=True)
    _num(cfg, s, "ell_max", 1, 4096, integer=True)
    if cfg[s]["model"] not in ("closed_form", "two_level"):
        raise ValidationError(f"{s}.model must be 'closed_form' or 'two_level'")
    _grid(cfg, s, "loss_db", 0, 1000)

    s = "imbalance_map"
    _num(cfg, s, "combined_loss_db", 0, 1000, lo_open=True)
    _num(cfg, s, "p", 0, 8 / 27, lo_open=True)
    _num(cfg, s, "eta_r", 0, 1)
    _num(cfg, s, "three_pair_threshold", 0, math.inf, lo_open=True)
    chains = cfg[s]["chains"]
    if not chains or not set(chains) <= {"I", "II", "IA", "IB"}:
        raise ValidationError(f"{s}.chains must be a non-empty subset of I, II, IA, IB")
    ells = cfg[s]["ells"]
    if not isinstance(ells, list) or any(not isinstance(x, int) or x < 1 for x in ells):
        raise ValidationError(f"{s}.ells must be a list of positive integers")
    _grid(cfg, s, "split", 0, 1)

    s = "type2"
    _num(cfg, s, "delta_f", 0, 0.75, lo_open=True, hi_open=True)
    _num(cfg, s, "bsm_loss_db", 0, 1000, lo_open=True)
    _num(cfg, s, "alpha_receiver", 0, 1, hi_open=True)
    _grid(cfg, s, "split_db", 0, cfg[s]["bsm_loss_db"])
    if not isinstance(cfg[s]["worked_example"], bool):
        raise ValidationError(f"{s}.worked_example must be true or false")
    _num(cfg, "type2.cascaded", "M", 1, math.inf)
    _num(cfg, "type2.cascaded", "eta_r", 0, 1, lo_open=True, hi_open=True)
    _num(cfg, "type2.example", "combined_loss_db", 0, 1000, lo_open=True)
    _num(cfg, "type2.example", "fidelity", 0.25, 1, lo_open=True, hi_open=True)

    s = "verify"
    _num(cfg, s, "draws", 1, 10 ** 4, integer=True)
    _num(cfg, s, "mc_samples", 1, 10 ** 8, integer=True)
    _num(cfg, s, "loss_states", 1, 10 ** 4, integer=True)
    _num(cfg, s, "perturb_eta", -1, 1)
    _num(cfg, s, "tol", 0, 1, lo_open=True)


def _check_keys(node: Any, default: dict, path: str):
    if not isinstance(node, dict):
        raise ValidationError(f"{path}: expected a section")
    extra = set(node) - set(default)
    if extra:
        raise ValidationError(f"{path}: unknown key(s) {', '.join(sorted(extra))}")
    for k, v in default.items():
        if isinstance(v, dict) and k not in ("ell", "loss_db", "split", "split_db"):
            _check_keys(node[k], v, f"{path}.{k}")


def resolve(user: dict, overrides: list[str] | tuple[str, ...] = ()) -> dict:
    """Merge ``user`` and ``overrides`` over the defaults, convert dB fields and validate."""
    for item in overrides:
        user = apply_override(user, item)
    _check_exclusive(user)
    cfg = _merge(DEFAULTS, _strip_superseded(user))
    cfg = _resolve_db(cfg)
    validate(cfg)
    return cfg


def _strip_superseded(user: dict) -> dict:
    # a user-supplied *_db field replaces the default linear value
    out = copy.deepcopy(user)
    for sec, key in _DB_PAIRS:
        node = out
        for p in sec.split("."):
            node = node.get(p, {}) if isinstance(node, dict) else {}
        if isinstance(node, dict) and f"{key}_db" in node:
            node[key] = None
    return out


def load(path: str | Path | None, overrides: list[str] | tuple[str, ...] = ()) -> dict:
    """Read a TOML scenario file (or none) and resolve it."""
    user: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except FileNotFoundError as exc:
            raise ValidationError(f"config file not found: {path}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    return resolve(user, overrides)


def dumps(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


def loads(text: str) -> dict:
    return resolve(tomli.loads(text))


def grid(cfg: dict, section: str, key: str) -> Grid:
    node = cfg
    for p in section.split("."):
        node = node[p]
    g = node[key]
    return Grid(g["start"], g["stop"], int(g["steps"]))
