"""Experiment configuration: JSON schema, validation and object construction.

Document layout (unknown keys anywhere are rejected)::

    {
      "decode":   {"L": 512, "K": 32, "w": 4, "tau0": 0.9, "alpha": 0.3,
                   "early_exit": true, "keep_trailing": true, "prune": true,
                   "steps_per_block": 8, "scheduler_kind": "streaming", "seed": 0},
      "denoiser": {"kind": "toy_transformer", "params": {"embed_dim": 64, "vocab": 256}},
      "prompt":   {"length": 128, "seed": 0}        # or {"file": "tokens.json"}
      "repetitions": 1,
      "output_dir": "runs/default",                  # optional
      "sweep": {"w": [1, 2, 4], "alpha": [0.1, 0.3]} # optional; keys w, alpha, K, L
    }
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import FIRST_REGULAR
from .denoisers import LocalMarkovOracle, ScriptedOracle, ToyTransformer, load_script, script_from_json
from .denoisers.base import Denoiser
from .errors import ConfigInvalidError, StreamDecError
from .scheduler import SCHEDULER_KINDS, DecodeConfig

DENOISER_PARAMS = {
    "scripted": {"script", "vocab"},
    "local_markov": {"D", "vocab", "seed", "eos_permille"},
    "toy_transformer": {"embed_dim", "vocab", "seed", "logit_scale", "attn_scale"},
}
SWEEP_KEYS = ("w", "alpha", "K", "L")
_TOP_KEYS = {"decode", "denoiser", "prompt", "repetitions", "output_dir", "sweep"}
_INT_FIELDS = {"L", "K", "w", "steps_per_block", "seed"}
_FLOAT_FIELDS = {"tau0", "alpha"}
_BOOL_FIELDS = {"early_exit", "keep_trailing", "prune"}


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PromptSpec:
    length: Optional[int] = None
    seed: int = 0
    file: Optional[str] = None


@dataclass(frozen=True)
class ExperimentConfig:
    decode: DecodeConfig
    denoiser: DenoiserSpec
    prompt: PromptSpec
    repetitions: int = 1
    output_dir: Optional[str] = None
    sweep: Optional[dict[str, list]] = None
    base_dir: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "decode": dataclasses.asdict(self.decode),
            "denoiser": {"kind": self.denoiser.kind, "params": dict(self.denoiser.params)},
            "prompt": {k: v for k, v in dataclasses.asdict(self.prompt).items() if v is not None},
            "repetitions": self.repetitions,
        }
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        if self.sweep is not None:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, decode=dataclasses.replace(self.decode, seed=seed))

    def sweep_points(self) -> list[dict[str, Any]]:
        if not self.sweep:
            return []
        points = [{}]
        for key in SWEEP_KEYS:
            if key in self.sweep:
                points = [dict(p, **{key: v}) for p in points for v in self.sweep[key]]
        return points

    def at_point(self, point: dict[str, Any]) -> "ExperimentConfig":
        return dataclasses.replace(
            self, decode=dataclasses.replace(self.decode, **point), sweep=None
        )


def _unknown(section: str, data: dict, allowed) -> None:
    for key in data:
        if key not in allowed:
            name = f"{section}.{key}" if section else key
            raise ConfigInvalidError(name, "unknown key")


def _check_type(name: str, value: Any, kind: str) -> Any:
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalidError(name, f"expected an integer, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalidError(name, f"expected a number, got {value!r}")
        value = float(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigInvalidError(name, f"expected true/false, got {value!r}")
    return value


def _decode_field(key: str, value: Any) -> Any:
    if key in _INT_FIELDS:
        return _check_type(key, value, "int")
    if key in _FLOAT_FIELDS:
        return _check_type(key, value, "float")
    if key in _BOOL_FIELDS:
        return _check_type(key, value, "bool")
    if key == "scheduler_kind" and value not in SCHEDULER_KINDS:
        raise ConfigInvalidError("scheduler_kind", f"must be one of {SCHEDULER_KINDS}, got {value!r}")
    return value


def parse_config(data: dict, base_dir: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigInvalidError("config", "top level must be a JSON object")
    # a run manifest carries the resolved config under "config"
    if "engine_version" in data and "config" in data:
        data = data["config"]
    _unknown("", data, _TOP_KEYS)
    for key in ("decode", "denoiser", "prompt"):
        if key not in data:
            raise ConfigInvalidError(key, "missing section")

    decode_raw = data["decode"]
    if not isinstance(decode_raw, dict):
        raise ConfigInvalidError("decode", "must be an object")
    allowed = {f.name for f in dataclasses.fields(DecodeConfig)}
    _unknown("decode", decode_raw, allowed)
    decode = DecodeConfig(**{k: _decode_field(k, v) for k, v in decode_raw.items()})

    den_raw = data["denoiser"]
    if not isinstance(den_raw, dict):
        raise ConfigInvalidError("denoiser", "must be an object")
    _unknown("denoiser", den_raw, {"kind", "params"})
    kind = den_raw.get("kind")
    if kind not in DENOISER_PARAMS:
        raise ConfigInvalidError("denoiser.kind", f"must be one of {sorted(DENOISER_PARAMS)}, got {kind!r}")
    params = den_raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalidError("denoiser.params", "must be an object")
    _unknown("denoiser.params", params, DENOISER_PARAMS[kind])
    for key in ("embed_dim", "vocab", "D", "seed", "eos_permille"):
        if key in params:
            _check_type(f"denoiser.params.{key}", params[key], "int")
    for key in ("logit_scale", "attn_scale"):
        if key in params:
            _check_type(f"denoiser.params.{key}", params[key], "float")
    if kind == "local_markov" and "D" not in params:
        raise ConfigInvalidError("denoiser.params.D", "required for local_markov")
    if kind == "scripted" and "script" not in params:
        raise ConfigInvalidError("denoiser.params.script", "required for scripted")

    prompt_raw = data["prompt"]
    if not isinstance(prompt_raw, dict):
        raise ConfigInvalidError("prompt", "must be an object")
    _unknown("prompt", prompt_raw, {"length", "seed", "file"})
    if ("file" in prompt_raw) == ("length" in prompt_raw):
        raise ConfigInvalidError("prompt", "give exactly one of 'length' or 'file'")
    if "length" in prompt_raw:
        length = _check_type("prompt.length", prompt_raw["length"], "int")
        if length < 1:
            raise ConfigInvalidError("prompt.length", "must be at least 1")
    prompt = PromptSpec(
        length=prompt_raw.get("length"),
        seed=_check_type("prompt.seed", prompt_raw.get("seed", 0), "int"),
        file=prompt_raw.get("file"),
    )

    reps = _check_type("repetitions", data.get("repetitions", 1), "int")
    if reps < 1:
        raise ConfigInvalidError("repetitions", "must be at least 1")

    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not sweep:
            raise ConfigInvalidError("sweep", "must be a non-empty object")
        _unknown("sweep", sweep, SWEEP_KEYS)
        for key, values in sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigInvalidError(f"sweep.{key}", "must be a non-empty list")
            sweep[key] = [_decode_field(key, v) for v in values]

    cfg = ExperimentConfig(
        decode=decode,
        denoiser=DenoiserSpec(kind, dict(params)),
        prompt=prompt,
        repetitions=reps,
        output_dir=data.get("output_dir"),
        sweep=sweep,
        base_dir=base_dir,
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    points = cfg.sweep_points() or [{}]
    for point in points:
        try:
            dataclasses.replace(cfg.decode, **point).validate()
        except ConfigInvalidError as exc:
            if point:
                raise ConfigInvalidError(exc.field, f"{exc} at sweep point {point}") from None
            raise
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalidError("config", f"not valid JSON: {exc}") from exc
    return parse_config(data, base_dir=str(path.parent))


def default_config() -> ExperimentConfig:
    text = resources.files("streamdec").joinpath("configs/default.json").read_text()
    return parse_config(json.loads(text))


def _resolve(cfg: ExperimentConfig, name: str) -> Path:
    p = Path(name)
    if not p.is_absolute() and cfg.base_dir is not None:
        p = Path(cfg.base_dir) / p
    return p


def build_denoiser(cfg: ExperimentConfig) -> Denoiser:
    spec = cfg.denoiser
    p = dict(spec.params)
    seed = p.pop("seed", cfg.decode.seed)
    if spec.kind == "toy_transformer":
        return ToyTransformer(p.pop("embed_dim", 64), p.pop("vocab", 256), seed, **p)
    if spec.kind == "local_markov":
        return LocalMarkovOracle(p.pop("D"), p.pop("vocab", 256), seed, **p)
    script = p["script"]
    if isinstance(script, str):
        script = load_script(_resolve(cfg, script))
    else:
        script = script_from_json(script)
    return ScriptedOracle(script, vocab=p.get("vocab"), seed=seed)


def make_prompt(cfg: ExperimentConfig, rep: int, vocab: int) -> np.ndarray:
    """Prompt for repetition ``rep``: a literal file, or seeded regular tokens."""
    spec = cfg.prompt
    if spec.file is not None:
        text = _resolve(cfg, spec.file).read_text()
        try:
            tokens = json.loads(text)
        except json.JSONDecodeError:
            tokens = [int(t) for t in text.split()]
        prompt = np.asarray(tokens, dtype=np.int64)
        if prompt.ndim != 1 or prompt.size == 0:
            raise ConfigInvalidError("prompt.file", "must hold a non-empty flat list of token ids")
        return prompt
    rng = np.random.default_rng([cfg.decode.seed, spec.seed, rep])
    return rng.integers(FIRST_REGULAR, vocab, size=spec.length, dtype=np.int64)


def comparability_key(cfg: ExperimentConfig) -> dict:
    return {
        "L": cfg.decode.L,
        "K": cfg.decode.K,
        "seed": cfg.decode.seed,
        "denoiser": {"kind": cfg.denoiser.kind, "params": cfg.denoiser.params},
        "prompt": dataclasses.asdict(cfg.prompt),
        "repetitions": cfg.repetitions,
    }


__all__ = [
    "ExperimentConfig", "DenoiserSpec", "PromptSpec", "parse_config", "load_config",
    "default_config", "build_denoiser", "make_prompt", "comparability_key", "StreamDecError",
]
