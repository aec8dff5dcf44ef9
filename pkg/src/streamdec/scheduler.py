"""Block-wise decoding schedulers.

``streaming`` is the full method: pruned suffix view, prefix cache, adaptive
confidence threshold and EOS early exit. Three baselines share the same loop:

* ``fixed_threshold``: unpruned view + prefix cache + constant threshold tau0.
* ``prefix_cache``: unpruned view + prefix cache + fixed-step top-(K/M) commits.
* ``vanilla``: unpruned view, no cache, fixed-step top-(K/M) commits. This is a
  reconstruction of the usual low-confidence fixed-step sampler.

Tokens are committed only inside the current block, even though suffix-window
positions are queried.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import EOS, MASK, SequenceState, init_sequence, masked_ratio
from .denoisers.base import Denoiser, Entry, Predictions
from .errors import (
    BlockAlreadyDoneError,
    ConfigInvalidError,
    EmptyPredictionsError,
    ParamOutOfRangeError,
    UnknownKindError,
)
from .metrics import CostLedger
from .pruner import PrefixCache, build_view, full_index_set, prefix_cache_update, pruned_index_set

logger = logging.getLogger(__name__)

SCHEDULER_KINDS = ("streaming", "fixed_threshold", "prefix_cache", "vanilla")
BASELINE_KINDS = ("fixed_threshold", "prefix_cache", "vanilla")


@dataclass(frozen=True)
class DecodeConfig:
    L: int = 512
    K: int = 32
    w: int = 4
    tau0: float = 0.9
    alpha: float = 0.3
    early_exit: bool = True
    keep_trailing: bool = True
    steps_per_block: int = 8
    scheduler_kind: str = "streaming"
    seed: int = 0
    # False feeds the whole suffix to the denoiser (suffix pruning ablated)
    prune: bool = True

    def validate(self) -> "DecodeConfig":
        if not isinstance(self.L, int) or self.L < 1:
            raise ConfigInvalidError("L", f"must be a positive integer (got {self.L!r})")
        if not isinstance(self.K, int) or self.K < 1:
            raise ConfigInvalidError("K", f"must be a positive integer (got {self.K!r})")
        if self.L % self.K:
            raise ConfigInvalidError("K", f"block size {self.K} does not divide L={self.L}")
        if not isinstance(self.w, int) or self.w < 0:
            raise ConfigInvalidError("w", f"must be a non-negative integer (got {self.w!r})")
        if not 0.0 < self.tau0 <= 1.0:
            raise ConfigInvalidError("tau0", f"must lie in (0, 1] (got {self.tau0!r})")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigInvalidError("alpha", f"must lie in [0, 1] (got {self.alpha!r})")
        if self.scheduler_kind not in SCHEDULER_KINDS:
            raise ConfigInvalidError("scheduler_kind", f"unknown kind {self.scheduler_kind!r}")
        if self.scheduler_kind in ("vanilla", "prefix_cache"):
            M = self.steps_per_block
            if not isinstance(M, int) or M < 1 or self.K % M:
                raise ConfigInvalidError("steps_per_block", f"must be a positive divisor of K={self.K} (got {M!r})")
        return self

    @property
    def N(self) -> int:
        return self.L // self.K


@dataclass
class StepRecord:
    block: int
    step: int
    tau: float
    r_mask: float
    accepted: list[Entry]
    fallback_used: bool = False
    attention_by_region: Optional[tuple[float, float, float]] = None
    # (position, confidence) of every masked current-block slot at this step
    candidates: list[tuple[int, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "block": self.block,
            "step": self.step,
            "tau": self.tau,
            "r_mask": self.r_mask,
            "accepted": [{"pos": e.position, "token": e.token, "conf": e.confidence} for e in self.accepted],
            "fallback": self.fallback_used,
        }
        if self.attention_by_region is not None:
            out["attn"] = list(self.attention_by_region)
        out["candidates"] = [[p, c] for p, c in self.candidates]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "StepRecord":
        attn = data.get("attn")
        return cls(
            block=int(data["block"]),
            step=int(data["step"]),
            tau=float(data["tau"]),
            r_mask=float(data["r_mask"]),
            accepted=[Entry(int(a["pos"]), int(a["token"]), float(a["conf"])) for a in data["accepted"]],
            fallback_used=bool(data["fallback"]),
            attention_by_region=None if attn is None else tuple(float(x) for x in attn),
            candidates=[(int(p), float(c)) for p, c in data.get("candidates", [])],
        )


@dataclass
class DecodeResult:
    tokens: np.ndarray
    trace: list[StepRecord]
    ledger: CostLedger
    exited_early_at: Optional[int] = None
    prompt_len: int = 0
    wall_clock_seconds: Optional[float] = None
    config: Optional[DecodeConfig] = None

    def steps_per_block(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for rec in self.trace:
            counts[rec.block] = counts.get(rec.block, 0) + 1
        return counts


def adaptive_threshold(tau0: float, alpha: float, r_mask: float) -> float:
    """``tau0 * (1 - alpha * (1 - r_mask))``: tau0 on a fresh block, tau0*(1-alpha) on a full one."""
    if not 0.0 < tau0 <= 1.0:
        raise ParamOutOfRangeError(f"tau0 must lie in (0, 1] (got {tau0})")
    if not 0.0 <= alpha <= 1.0:
        raise ParamOutOfRangeError(f"alpha must lie in [0, 1] (got {alpha})")
    if not 0.0 <= r_mask <= 1.0:
        raise ParamOutOfRangeError(f"r_mask must lie in [0, 1] (got {r_mask})")
    return tau0 * (1.0 - alpha * (1.0 - r_mask))


@dataclass(frozen=True)
class Selection:
    accepted: list[Entry]
    fallback_used: bool


def _order(preds: Predictions) -> np.ndarray:
    # highest confidence first, lowest position on ties
    return np.lexsort((preds.positions, -preds.confidences))


def select_positions(preds: Predictions, tau: float) -> Selection:
    """Accept every entry with confidence >= tau, or the single best one if none pass."""
    if len(preds) == 0:
        raise EmptyPredictionsError("no candidate positions to select from")
    passing = preds.confidences >= tau
    if passing.any():
        sub = preds.subset(passing)
        order = np.argsort(sub.positions, kind="stable")
        return Selection([Entry(*e) for e in _entries(sub, order)], False)
    best = int(_order(preds)[0])
    return Selection([Entry(*e) for e in _entries(preds, [best])], True)


def select_top_k(preds: Predictions, k: int) -> Selection:
    """Fixed-step rule: the ``k`` most confident entries (ties to lower positions)."""
    if len(preds) == 0:
        raise EmptyPredictionsError("no candidate positions to select from")
    chosen = _order(preds)[:k]
    chosen = chosen[np.argsort(preds.positions[chosen], kind="stable")]
    return Selection([Entry(*e) for e in _entries(preds, chosen)], False)


def _entries(preds: Predictions, idx) -> list[tuple[int, int, float]]:
    return [(int(preds.positions[i]), int(preds.tokens[i]), float(preds.confidences[i])) for i in idx]


def decode_block(
    state: SequenceState,
    c: int,
    denoiser: Denoiser,
    cfg: DecodeConfig,
    cache: Optional[PrefixCache],
    ledger: CostLedger,
) -> list[StepRecord]:
    """Decode block ``c`` until it has no masked slot; one StepRecord per forward call."""
    if state.block_done(c):
        raise BlockAlreadyDoneError(f"block {c} has no masked slots")
    kind = cfg.scheduler_kind
    cur_start, cur_end = state.abs_block_range(c)
    per_step = cfg.K // cfg.steps_per_block if kind in ("vanilla", "prefix_cache") else 0
    use_cache = kind != "vanilla" and cache is not None
    if kind == "streaming" and cfg.prune:
        idx = pruned_index_set(state.partition, c, cfg.w, state.prompt_len, cfg.keep_trailing)
    else:
        idx = full_index_set(state.partition, c, state.prompt_len)
    prefix_len = idx.current[0]

    records = []
    step = 0
    while not state.block_done(c):
        hit: Optional[bool] = None
        if use_cache:
            prefix_cache_update(cache, state, c)
            hit = cache.last_hit
        view = build_view(state, idx, step=step)
        preds = denoiser.predict(view, view.query_span, cache if use_cache else None)
        q_cost = view.query_span.size + (0 if hit else prefix_len)
        ledger.record_forward(c, q_cost, len(view), hit)

        r_mask = masked_ratio(state, c)
        in_block = (preds.positions >= cur_start) & (preds.positions < cur_end)
        masked = state.tokens[preds.positions] == MASK
        cands = preds.subset(in_block & masked)
        if kind == "streaming":
            tau = adaptive_threshold(cfg.tau0, cfg.alpha, r_mask)
            sel = select_positions(cands, tau)
        elif kind == "fixed_threshold":
            tau = cfg.tau0
            sel = select_positions(cands, tau)
        else:
            tau = 0.0
            sel = select_top_k(cands, per_step)
        for e in sel.accepted:
            state.commit(e.position, e.token)

        attn = None
        if preds.attention is not None:
            cur_attn = preds.attention[in_block]
            attn = tuple(float(x) for x in cur_attn.mean(axis=0))
        records.append(StepRecord(
            block=c, step=step, tau=tau, r_mask=r_mask, accepted=sel.accepted,
            fallback_used=sel.fallback_used, attention_by_region=attn,
            candidates=list(zip(cands.positions.tolist(), cands.confidences.tolist())),
        ))
        step += 1
    return records


def early_exit_triggered(block_records: Sequence[StepRecord], cfg: DecodeConfig) -> bool:
    """EOS committed with threshold-passing confidence anywhere in the block."""
    if not cfg.early_exit or cfg.scheduler_kind != "streaming":
        return False
    return any(
        e.token == EOS and e.confidence >= rec.tau and not rec.fallback_used
        for rec in block_records for e in rec.accepted
    )


def decode_sequence(prompt, denoiser: Denoiser, cfg: DecodeConfig) -> DecodeResult:
    cfg.validate()
    state = init_sequence(prompt, cfg.L, cfg.K)
    ledger = CostLedger.for_blocks(cfg.N)
    cache = PrefixCache(state.prompt_len, cfg.K) if cfg.scheduler_kind != "vanilla" else None
    trace: list[StepRecord] = []
    exited = None
    t0 = time.perf_counter()
    for c in range(cfg.N):
        records = decode_block(state, c, denoiser, cfg, cache, ledger)
        trace.extend(records)
        if early_exit_triggered(records, cfg):
            exited = c
            break
    if exited is not None:
        for pos in np.flatnonzero(state.tokens == MASK).tolist():
            state.commit(pos, EOS)
        logger.debug("early exit after block %d of %d", exited, cfg.N)
    elapsed = time.perf_counter() - t0
    return DecodeResult(
        tokens=state.gen.copy(), trace=trace, ledger=ledger, exited_early_at=exited,
        prompt_len=state.prompt_len, wall_clock_seconds=elapsed, config=cfg,
    )


def run_baseline(prompt, denoiser: Denoiser, kind: str, cfg: DecodeConfig) -> DecodeResult:
    if kind not in BASELINE_KINDS:
        raise UnknownKindError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    changes = {"scheduler_kind": kind, "early_exit": False}
    if kind == "fixed_threshold":
        changes["alpha"] = 0.0
    return decode_sequence(prompt, denoiser, dataclasses.replace(cfg, **changes))
