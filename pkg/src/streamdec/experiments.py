"""Desk-scale experiment helpers: module ablations, window sweeps, locality
divergence and the streaming-vs-vanilla speedup demonstration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import FIRST_REGULAR
from .denoisers import LocalMarkovOracle, ToyTransformer
from .denoisers.base import Denoiser
from .metrics import Speedup, ThroughputReport, speedup, throughput_proxy
from .scheduler import DecodeConfig, DecodeResult, decode_sequence, run_baseline


@dataclass(frozen=True)
class AblationRow:
    suffix_pruning: bool
    dynamic_threshold: bool
    early_exit: bool
    report: ThroughputReport
    steps: int


def ablation_configs(base: DecodeConfig) -> list[tuple[bool, bool, bool, DecodeConfig]]:
    """The cumulative module toggles: none, +pruning, +adaptive threshold, +early exit."""
    rows = []
    for suf, dyn, ext in [(False, False, False), (True, False, False), (True, True, False), (True, True, True)]:
        cfg = dataclasses.replace(
            base, scheduler_kind="streaming", prune=suf,
            alpha=base.alpha if dyn else 0.0, early_exit=ext,
        )
        rows.append((suf, dyn, ext, cfg))
    return rows


def ablation_table(prompt, denoiser: Denoiser, base: DecodeConfig) -> list[AblationRow]:
    out = []
    for suf, dyn, ext, cfg in ablation_configs(base):
        result = decode_sequence(prompt, denoiser, cfg)
        out.append(AblationRow(suf, dyn, ext, throughput_proxy(result.ledger, result, result.wall_clock_seconds),
                               len(result.trace)))
    return out


def sweep(prompt, denoiser: Denoiser, base: DecodeConfig, **axes: Iterable) -> list[tuple[dict, DecodeResult]]:
    """Cartesian sweep over DecodeConfig fields, e.g. ``sweep(p, d, cfg, w=[1, 2, 4])``."""
    points = [{}]
    for name, values in axes.items():
        points = [dict(p, **{name: v}) for p in points for v in values]
    return [(p, decode_sequence(prompt, denoiser, dataclasses.replace(base, **p))) for p in points]


@dataclass(frozen=True)
class DivergenceReport:
    runs: int
    diverged: int

    @property
    def rate(self) -> float:
        return self.diverged / self.runs if self.runs else 0.0


def locality_divergence(D: int, w: int, K: int, L: int, prompt_len: int, seeds: Iterable[int],
                        vocab: int = 256, **cfg_kwargs) -> DivergenceReport:
    """How often pruned and unpruned streaming runs of the D-local oracle disagree.

    When ``w * K >= D`` every current-block query sees the same neighbourhood
    in both views, so the rate is zero.
    """
    runs = diverged = 0
    base = DecodeConfig(L=L, K=K, w=w, **cfg_kwargs)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        prompt = rng.integers(FIRST_REGULAR, vocab, size=prompt_len)
        den = LocalMarkovOracle(D, vocab, seed)
        pruned = decode_sequence(prompt, den, base)
        full = decode_sequence(prompt, den, dataclasses.replace(base, prune=False))
        runs += 1
        diverged += not np.array_equal(pruned.tokens, full.tokens)
    return DivergenceReport(runs, diverged)


@dataclass(frozen=True)
class SpeedupDemo:
    streaming: DecodeResult
    vanilla: DecodeResult
    proxy: Speedup
    wall_clock_ratio: float


def speedup_demo(prompt_len: int = 64, L: int = 256, K: int = 32, w: int = 2, tau0: float = 0.9,
                 alpha: float = 0.3, steps_per_block: int = 8, seed: int = 0,
                 denoiser: Optional[Denoiser] = None) -> SpeedupDemo:
    """Streaming vs vanilla on the toy transformer; proxy and wall-clock speedups."""
    den = denoiser or ToyTransformer(64, 256, seed)
    rng = np.random.default_rng(seed)
    prompt = rng.integers(FIRST_REGULAR, den.vocab_size, size=prompt_len)
    cfg = DecodeConfig(L=L, K=K, w=w, tau0=tau0, alpha=alpha, steps_per_block=steps_per_block, seed=seed)
    ours = decode_sequence(prompt, den, cfg)
    base = run_baseline(prompt, den, "vanilla", cfg)
    s = speedup(throughput_proxy(ours.ledger, ours), throughput_proxy(base.ledger, base))
    return SpeedupDemo(ours, base, s, base.wall_clock_seconds / ours.wall_clock_seconds)
