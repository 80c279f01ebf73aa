"""JSON experiment configs: validation, conversion and hashing.

A config document looks like::

    {
      "protocol": "clifford-global",
      "n": 12,
      "t_steps": 10,
      "signals": {"pool": "local", "sparsity": {"coherent": 5, "incoherent": 5},
                  "ranges": {"theta": [0.1, 0.15], "gamma": [0.07, 0.1]}},
      "n_circuits": {"coherent": 10, "incoherent": 3},
      "gamma_readout": 0.0,
      "shots": 10000,
      "seed": 7,
      "corrections": {"threshold": {"theta_min": 0.1, "gamma_min": 0.07}, "overlap": true},
      "output": {"dir": "out"}
    }

``signals`` is either a list of ``{kind, pauli, t, amplitude}`` rows or a
generation recipe.  Unknown keys are rejected so that typos do not silently
fall back to defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .estimators import DEFAULT_PHI
from .harness import PROTOCOLS, ConfigError, Corrections, ExperimentConfig
from .signals import KINDS, SignalError, build_signal_set
from .pauli import PauliError

TOP_KEYS = {
    "protocol", "n", "t_steps", "signals", "n_circuits", "phi", "gamma_readout", "shots",
    "seed", "repetitions", "corrections", "depth", "tau", "beta", "score_ids",
    "redraw_instance", "redraw_circuits", "output",
}
RECIPE_KEYS = {"pool", "bodies", "pool_size", "max_weight", "sparsity", "ranges", "kinds", "signs"}
ROW_KEYS = {"kind", "pauli", "t", "amplitude"}
CORRECTION_KEYS = {"confusion", "decode", "threshold", "second_order", "overlap"}
THRESHOLD_KEYS = {"theta_min", "gamma_min"}
OUTPUT_KEYS = {"dir"}


@dataclass(frozen=True)
class LoadedConfig:
    """A validated config with its source document and output directory."""

    experiment: ExperimentConfig
    document: dict
    output_dir: str | None

    @property
    def hash(self) -> str:
        return config_hash(self.document)


def _unknown(where: str, doc: dict, allowed: set[str]) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _mapping(where: str, value: Any) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a JSON object")
    return value


def _integer(where: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _number(where: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _flag(where: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false, got {value!r}")
    return value


def _recipe(doc: dict) -> dict:
    _unknown("signals recipe", doc, RECIPE_KEYS)
    recipe = dict(doc)
    ranges = _mapping("signals.ranges", recipe.get("ranges", {}))
    for key, pair in ranges.items():
        if key not in ("theta", "gamma"):
            raise ConfigError(f"unknown range {key!r}; expected theta or gamma")
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"range {key} must be a two-element list")
        lo, hi = (_number(f"signals.ranges.{key}", v) for v in pair)
        if lo > hi:
            raise ConfigError(f"range {key} has lower end above upper end")
    for kind in recipe.get("kinds", KINDS):
        if kind not in KINDS:
            raise ConfigError(f"unknown signal kind {kind!r}")
    return recipe


def _rows(n: int, T: int, rows: list):
    parsed = []
    for i, row in enumerate(rows):
        row = _mapping(f"signals[{i}]", row)
        _unknown(f"signals[{i}]", row, ROW_KEYS)
        missing = ROW_KEYS - set(row)
        if missing:
            raise ConfigError(f"signals[{i}] lacks {', '.join(sorted(missing))}")
        parsed.append((row["kind"], row["pauli"], _integer(f"signals[{i}].t", row["t"]),
                       _number(f"signals[{i}].amplitude", row["amplitude"])))
    try:
        return build_signal_set(n, T, parsed)
    except (SignalError, PauliError) as exc:
        raise ConfigError(f"bad signal list: {exc}") from None


def _corrections(doc: dict) -> Corrections:
    _unknown("corrections", doc, CORRECTION_KEYS)
    threshold = doc.get("threshold", False)
    theta_min = gamma_min = None
    if isinstance(threshold, dict):
        _unknown("corrections.threshold", threshold, THRESHOLD_KEYS)
        if "theta_min" in threshold and threshold["theta_min"] is not None:
            theta_min = _number("theta_min", threshold["theta_min"])
        if "gamma_min" in threshold and threshold["gamma_min"] is not None:
            gamma_min = _number("gamma_min", threshold["gamma_min"])
        threshold = True
    else:
        threshold = _flag("corrections.threshold", threshold)
    return Corrections(
        confusion=_flag("confusion", doc.get("confusion", False)),
        decode=_flag("decode", doc.get("decode", False)),
        threshold=threshold,
        theta_min=theta_min,
        gamma_min=gamma_min,
        second_order=_flag("second_order", doc.get("second_order", False)),
        overlap=_flag("overlap", doc.get("overlap", False)),
    )


def parse_config(doc: Any) -> LoadedConfig:
    """Validate a config document and build the experiment it describes."""
    doc = _mapping("config", doc)
    _unknown("config", doc, TOP_KEYS)
    for key in ("protocol", "n", "signals"):
        if key not in doc:
            raise ConfigError(f"config lacks the required key {key!r}")
    protocol = doc["protocol"]
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    n = _integer("n", doc["n"])
    T = _integer("t_steps", doc.get("t_steps", 1))
    if n < 1 or T < 1:
        raise ConfigError("n and t_steps must be positive")

    signals = recipe = None
    if isinstance(doc["signals"], list):
        signals = _rows(n, T, doc["signals"])
    else:
        recipe = _recipe(_mapping("signals", doc["signals"]))

    shots = doc.get("shots", 10_000)
    shots = [shots] if not isinstance(shots, list) else shots
    if not shots:
        raise ConfigError("shots must not be empty")
    shots = tuple(_integer("shots", m) for m in shots)

    n_circuits = _mapping("n_circuits", doc.get("n_circuits", {}))
    for key, val in n_circuits.items():
        _integer(f"n_circuits.{key}", val)

    beta = doc.get("beta")
    if beta is not None:
        if not isinstance(beta, list) or len(beta) != 2:
            raise ConfigError("beta must be a [beta_c, beta_ic] pair")
        beta = tuple(_number("beta", b) for b in beta)
    score_ids = doc.get("score_ids")
    if score_ids is not None:
        score_ids = tuple(_integer("score_ids", i) for i in score_ids)

    output = _mapping("output", doc.get("output", {}))
    _unknown("output", output, OUTPUT_KEYS)

    kwargs = dict(
        protocol=protocol,
        n=n,
        T=T,
        signals=signals,
        recipe=recipe,
        phi=_number("phi", doc.get("phi", DEFAULT_PHI)),
        gamma_r=_number("gamma_readout", doc.get("gamma_readout", 0.0)),
        shots=shots,
        seed=_integer("seed", doc.get("seed", 0)),
        repetitions=_integer("repetitions", doc.get("repetitions", 1)),
        corrections=_corrections(_mapping("corrections", doc.get("corrections", {}))),
        depth=_integer("depth", doc.get("depth", 2)),
        tau=_number("tau", doc.get("tau", 5.0)),
        beta=beta,
        score_ids=score_ids,
        redraw_instance=_flag("redraw_instance", doc.get("redraw_instance", False)),
        redraw_circuits=_flag("redraw_circuits", doc.get("redraw_circuits", True)),
    )
    if n_circuits:
        kwargs["n_circuits"] = dict(n_circuits)
    try:
        experiment = ExperimentConfig(**kwargs)
    except (SignalError, PauliError) as exc:
        raise ConfigError(str(exc)) from None
    return LoadedConfig(experiment, doc, output.get("dir"))


def load_config(path: str | Path) -> LoadedConfig:
    """Read and validate a JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return parse_config(doc)


def config_hash(doc: dict) -> str:
    """Short SHA-256 of the canonical JSON form of a config document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def preset_names() -> list[str]:
    from importlib import resources

    folder = resources.files("scramble_sense") / "presets"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def preset_document(name: str) -> dict:
    """The bundled config document called ``name``."""
    from importlib import resources

    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    text = (resources.files("scramble_sense") / "presets" / f"{name}.json").read_text()
    return json.loads(text)


__all__ = [
    "LoadedConfig",
    "config_hash",
    "load_config",
    "parse_config",
    "preset_document",
    "preset_names",
]
