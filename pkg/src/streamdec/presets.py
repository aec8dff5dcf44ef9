"""Published per-benchmark decoding settings as ready-made configs.

Window sizes in the source table are given in tokens; with the fixed block
size of 32 they convert to ``window_tokens // 32`` blocks.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

from .scheduler import DecodeConfig

BLOCK_SIZE = 32


class Preset(NamedTuple):
    model: str
    benchmark: str
    gen_length: int
    window_tokens: int
    tau0: float
    alpha: float


PRESETS = [
    Preset("dream", "humaneval", 256, 192, 0.9, 0.7),
    Preset("dream", "humaneval", 512, 128, 0.9, 0.4),
    Preset("dream", "gsm8k", 256, 32, 0.9, 0.3),
    Preset("dream", "gsm8k", 512, 32, 0.9, 0.3),
    Preset("dream", "mbpp", 256, 192, 0.9, 0.3),
    Preset("dream", "mbpp", 512, 192, 0.9, 0.6),
    Preset("dream", "math", 256, 32, 0.9, 0.1),
    Preset("dream", "math", 512, 32, 0.9, 0.3),
    Preset("llada", "humaneval", 256, 192, 0.9, 0.3),
    Preset("llada", "humaneval", 512, 256, 0.9, 0.4),
    Preset("llada", "gsm8k", 256, 96, 0.9, 0.3),
    Preset("llada", "gsm8k", 512, 96, 0.9, 0.3),
    Preset("llada", "mbpp", 256, 32, 0.9, 0.3),
    Preset("llada", "mbpp", 512, 32, 0.9, 0.3),
    Preset("llada", "math", 256, 128, 0.9, 0.3),
    Preset("llada", "math", 512, 256, 0.9, 0.2),
    Preset("llada-1.5", "humaneval", 256, 96, 0.9, 0.3),
    Preset("llada-1.5", "humaneval", 512, 96, 0.9, 0.4),
    Preset("llada-1.5", "gsm8k", 256, 96, 0.9, 0.4),
    Preset("llada-1.5", "gsm8k", 512, 128, 0.9, 0.6),
    Preset("llada-1.5", "mbpp", 256, 96, 0.9, 0.3),
    Preset("llada-1.5", "mbpp", 512, 96, 0.9, 0.3),
    Preset("llada-1.5", "math", 256, 96, 0.9, 0.4),
    Preset("llada-1.5", "math", 512, 192, 0.9, 0.3),
]


def preset_config(model: str, benchmark: str, gen_length: int, **overrides) -> DecodeConfig:
    for p in PRESETS:
        if (p.model, p.benchmark, p.gen_length) == (model.lower(), benchmark.lower(), gen_length):
            cfg = DecodeConfig(
                L=p.gen_length, K=BLOCK_SIZE, w=p.window_tokens // BLOCK_SIZE,
                tau0=p.tau0, alpha=p.alpha,
            )
            return dataclasses.replace(cfg, **overrides).validate()
    raise KeyError(f"no preset for ({model!r}, {benchmark!r}, {gen_length})")
