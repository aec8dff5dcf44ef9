"""Suffix pruning: which positions the denoiser sees while decoding block ``c``.

The retained set is the whole prefix, the current block, the ``w`` blocks right
after it, and (optionally) the final generation slot as a length cue. Views keep
the original absolute positions so rotary position ids stay meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .core import MASK, BlockPartition, SequenceState
from .errors import BlockOutOfRangeError, BlockRegressionError, InconsistentIndexSetError


@dataclass(frozen=True)
class PrunedIndexSet:
    prompt_len: int
    L: int
    K: int
    block: int
    prefix: tuple[int, int]
    current: tuple[int, int]
    window: tuple[int, int]
    trailing: Optional[int] = None

    def positions(self) -> np.ndarray:
        # prefix and current block are contiguous from position 0
        parts = [np.arange(self.current[1])]
        if self.window[1] > self.window[0]:
            parts.append(np.arange(*self.window))
        if self.trailing is not None:
            parts.append(np.array([self.trailing]))
        return np.concatenate(parts).astype(np.int64)

    def __len__(self) -> int:
        n = self.current[1] + (self.window[1] - self.window[0])
        return n + (self.trailing is not None)


def pruned_index_set(
    partition: BlockPartition, c: int, w: int, p_L: int, keep_trailing: bool = True
) -> PrunedIndexSet:
    """Retained positions for block ``c`` with a ``w``-block suffix window.

    The trailing slot ``p_L + L - 1`` is kept only when the window stops short
    of the last block.
    """
    if not 0 <= c < partition.N:
        raise BlockOutOfRangeError(f"block {c} not in [0, {partition.N})")
    if w < 0:
        raise ValueError(f"window size must be non-negative (got {w})")
    K, N = partition.K, partition.N
    cur = (p_L + c * K, p_L + (c + 1) * K)
    last = min(c + w, N - 1)
    window = (cur[1], p_L + (last + 1) * K)
    trailing = p_L + partition.L - 1 if keep_trailing and last < N - 1 else None
    return PrunedIndexSet(
        prompt_len=p_L, L=partition.L, K=K, block=c,
        prefix=(0, cur[0]), current=cur, window=window, trailing=trailing,
    )


def full_index_set(partition: BlockPartition, c: int, p_L: int) -> PrunedIndexSet:
    """The unpruned sequence expressed as an index set."""
    return pruned_index_set(partition, c, partition.N, p_L, keep_trailing=False)


@dataclass(frozen=True, eq=False)
class SequenceView:
    """Tokens gathered at retained positions, with their original position ids.

    ``block`` and ``step`` identify the decode step that produced the view;
    the region layout is recoverable from ``prompt_len`` and ``block_size``.
    """

    tokens: np.ndarray
    position_ids: np.ndarray
    query_span: np.ndarray
    prompt_len: int
    block_size: int
    gen_len: int
    block: int
    step: int = 0

    def __len__(self) -> int:
        return int(self.tokens.size)

    @property
    def current_range(self) -> tuple[int, int]:
        start = self.prompt_len + self.block * self.block_size
        return start, start + self.block_size

    @property
    def prefix_len(self) -> int:
        return self.current_range[0]

    def index_of(self, positions) -> np.ndarray:
        """Row index in the view for each absolute position (-1 if absent)."""
        positions = np.asarray(positions, dtype=np.int64)
        idx = np.searchsorted(self.position_ids, positions)
        idx = np.minimum(idx, len(self) - 1)
        found = self.position_ids[idx] == positions
        return np.where(found, idx, -1)

    def num_masked(self) -> int:
        return int(np.count_nonzero(self.tokens == MASK))


def build_view(state: SequenceState, idx: PrunedIndexSet, step: int = 0) -> SequenceView:
    if (idx.prompt_len, idx.L, idx.K) != (state.prompt_len, state.L, state.K):
        raise InconsistentIndexSetError(
            f"index set built for (p_L={idx.prompt_len}, L={idx.L}, K={idx.K}), "
            f"state has (p_L={state.prompt_len}, L={state.L}, K={state.K})"
        )
    positions = idx.positions()
    tokens = state.tokens[positions].copy()
    cur_start, cur_end = idx.current
    is_current = (positions >= cur_start) & (positions < cur_end)
    is_query = is_current | ((positions >= cur_end) & (tokens == MASK))
    return SequenceView(
        tokens=tokens,
        position_ids=positions,
        query_span=positions[is_query],
        prompt_len=state.prompt_len,
        block_size=state.K,
        gen_len=state.L,
        block=idx.block,
        step=step,
    )


@dataclass
class PrefixCache:
    """Bookkeeping for prefix key/value reuse within a block.

    ``payload`` is scratch space a denoiser may use to hold its actual cached
    tensors; it is cleared on every rebuild.
    """

    prompt_len: int
    block_size: int
    cached_upto: Optional[int] = None
    valid_for_block: int = -1
    hits: int = 0
    misses: int = 0
    last_hit: bool = False
    payload: dict[str, Any] = field(default_factory=dict)


def prefix_cache_update(cache: PrefixCache, state: SequenceState, c: int) -> PrefixCache:
    if c < cache.valid_for_block:
        raise BlockRegressionError(f"cache valid for block {cache.valid_for_block}, asked for {c}")
    if c > cache.valid_for_block:
        cache.valid_for_block = c
        cache.cached_upto = state.prompt_len + c * state.K
        cache.misses += 1
        cache.last_hit = False
        cache.payload.clear()
    else:
        cache.hits += 1
        cache.last_hit = True
    return cache
