"""Replay denoiser for exact tests: (block, step, local position) -> (token, conf)."""

from __future__ import annotations

import json
from os import PathLike
from typing import Mapping, Optional, Union

import numpy as np

from ..core import FIRST_REGULAR, MASK
from ..errors import MalformedScriptError
from ..pruner import PrefixCache, SequenceView
from .base import Denoiser, Predictions

ScriptKey = tuple[int, int, int]
OracleScript = Mapping[ScriptKey, tuple[int, float]]

# answer for queries outside the masked part of the current block; never committed
PLACEHOLDER = (FIRST_REGULAR, 0.0)


class ScriptedOracle(Denoiser):
    """Returns scripted values for masked current-block queries, ignoring view content.

    Other queries (committed slots, suffix window, trailing slot) get
    ``PLACEHOLDER``. A masked current-block query with no script entry raises
    MalformedScriptError.
    """

    locality = 0

    def __init__(self, script: OracleScript, vocab: Optional[int] = None, seed: int = 0):
        table: dict[ScriptKey, tuple[int, float]] = {}
        for key, value in script.items():
            try:
                block, step, local = (int(k) for k in key)
                token, conf = int(value[0]), float(value[1])
            except (TypeError, ValueError) as exc:
                raise MalformedScriptError(f"bad script entry {key!r}: {value!r}") from exc
            if min(block, step, local) < 0:
                raise MalformedScriptError(f"negative index in script key {key!r}")
            if not 0.0 <= conf <= 1.0:
                raise MalformedScriptError(f"confidence {conf} at {key!r} outside [0, 1]")
            if token < 0 or token == MASK:
                raise MalformedScriptError(f"token {token} at {key!r} is not a committable id")
            table[(block, step, local)] = (token, conf)
        max_token = max((t for t, _ in table.values()), default=FIRST_REGULAR)
        self.vocab_size = int(vocab) if vocab is not None else max(max_token + 1, FIRST_REGULAR + 1)
        if max_token >= self.vocab_size:
            raise MalformedScriptError(f"script token {max_token} outside vocabulary {self.vocab_size}")
        self.script = table
        self.seed = seed

    def _predict(self, view: SequenceView, queries: np.ndarray, rows: np.ndarray,
                 cache: Optional[PrefixCache]) -> Predictions:
        cur_start, cur_end = view.current_range
        tokens = np.empty(queries.size, dtype=np.int64)
        confs = np.empty(queries.size, dtype=np.float64)
        for i, (pos, row) in enumerate(zip(queries.tolist(), rows.tolist())):
            if cur_start <= pos < cur_end and view.tokens[row] == MASK:
                key = (view.block, view.step, pos - cur_start)
                try:
                    tokens[i], confs[i] = self.script[key]
                except KeyError:
                    raise MalformedScriptError(
                        f"no script entry for block {key[0]}, step {key[1]}, local position {key[2]}"
                    ) from None
            else:
                tokens[i], confs[i] = PLACEHOLDER
        return Predictions(positions=queries.copy(), tokens=tokens, confidences=confs)


def scripted_oracle_new(script: OracleScript, vocab: Optional[int] = None) -> ScriptedOracle:
    return ScriptedOracle(script, vocab=vocab)


def script_from_json(data: Union[dict, str]) -> dict[ScriptKey, tuple[int, float]]:
    """Parse ``{"steps": [{"block", "step", "entries": [{"local_pos", "token", "conf"}]}]}``."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        steps = data["steps"]
        script = {}
        for s in steps:
            for e in s["entries"]:
                key = (int(s["block"]), int(s["step"]), int(e["local_pos"]))
                if key in script:
                    raise MalformedScriptError(f"duplicate script entry {key}")
                script[key] = (int(e["token"]), float(e["conf"]))
    except (KeyError, TypeError) as exc:
        raise MalformedScriptError(f"malformed script document: {exc!r}") from exc
    return script


def load_script(path: Union[str, PathLike]) -> dict[ScriptKey, tuple[int, float]]:
    with open(path) as fh:
        return script_from_json(json.load(fh))


def script_to_json(script: OracleScript) -> dict:
    grouped: dict[tuple[int, int], list] = {}
    for (block, step, local), (token, conf) in sorted(script.items()):
        grouped.setdefault((block, step), []).append({"local_pos": local, "token": token, "conf": conf})
    return {"steps": [{"block": b, "step": s, "entries": e} for (b, s), e in grouped.items()]}


def uniform_script(N: int, K: int, conf: float, token: int = FIRST_REGULAR,
                   steps: Optional[int] = None) -> dict[ScriptKey, tuple[int, float]]:
    steps = K if steps is None else steps
    return {(b, t, i): (token, conf) for b in range(N) for t in range(steps) for i in range(K)}


def random_script(N: int, K: int, vocab: int, seed: int,
                  eos_rate: float = 0.0) -> dict[ScriptKey, tuple[int, float]]:
    """Full-coverage script with uniform confidences and tokens.

    Covers every (block, step < K, local position), which is enough for any
    scheduler that commits at least one token per step.
    """
    rng = np.random.default_rng(seed)
    size = (N, K, K)
    confs = rng.random(size)
    tokens = rng.integers(FIRST_REGULAR, vocab, size=size)
    if eos_rate:
        from ..core import EOS
        tokens = np.where(rng.random(size) < eos_rate, EOS, tokens)
    return {
        (b, t, i): (int(tokens[b, t, i]), float(confs[b, t, i]))
        for b in range(N) for t in range(K) for i in range(K)
    }
