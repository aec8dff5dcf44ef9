"""Domain types shared by every module: reserved token ids, block partitions,
sequence state and region bookkeeping.

Absolute positions index the concatenation ``prompt + generation buffer``;
generation slot ``i`` lives at absolute position ``prompt_len + i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockOutOfRangeError,
    EmptyPromptError,
    NonDivisibleError,
    PositionOutOfRangeError,
    SlotAlreadyCommittedError,
    VocabMismatchError,
    ZeroLengthError,
)

PAD = 0
EOS = 1
MASK = 2
RESERVED = (PAD, EOS, MASK)
FIRST_REGULAR = 3
MIN_VOCAB = 4


def check_token(token: int, vocab: int) -> int:
    token = int(token)
    if not 0 <= token < vocab:
        raise VocabMismatchError(f"token {token} outside vocabulary of size {vocab}")
    return token


class Region(enum.IntEnum):
    PREFIX = 0
    CURRENT = 1
    SUFFIX = 2


@dataclass(frozen=True)
class BlockPartition:
    L: int
    K: int
    N: int
    ranges: tuple[tuple[int, int], ...]

    def block_range(self, n: int) -> tuple[int, int]:
        if not 0 <= n < self.N:
            raise BlockOutOfRangeError(f"block {n} not in [0, {self.N})")
        return self.ranges[n]


def partition_blocks(L: int, K: int) -> BlockPartition:
    """Split a generation buffer of ``L`` slots into ``L // K`` blocks.

    Ranges are half-open and relative to the generation buffer, so block ``n``
    is ``[n*K, (n+1)*K)``. Ragged final blocks are rejected.
    """
    if L <= 0 or K <= 0:
        raise ZeroLengthError(f"L and K must be positive (got L={L}, K={K})")
    if L % K:
        raise NonDivisibleError(f"block size {K} does not divide generation length {L}")
    N = L // K
    return BlockPartition(L=L, K=K, N=N, ranges=tuple((n * K, (n + 1) * K) for n in range(N)))


class SequenceState:
    """Prompt plus an ``L``-slot generation buffer.

    Masked slots hold the MASK id. A slot can be committed exactly once and
    never reverts; ``commit`` enforces it.
    """

    def __init__(self, prompt, L: int, K: int | None = None):
        prompt = np.asarray(prompt, dtype=np.int64).reshape(-1)
        if prompt.size == 0:
            raise EmptyPromptError("prompt must contain at least one token")
        if np.any(prompt == MASK):
            raise VocabMismatchError("prompt may not contain the MASK id")
        K = L if K is None else K
        self.partition = partition_blocks(L, K)
        self.prompt_len = int(prompt.size)
        self.tokens = np.full(self.prompt_len + L, MASK, dtype=np.int64)
        self.tokens[: self.prompt_len] = prompt

    @property
    def L(self) -> int:
        return self.partition.L

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def N(self) -> int:
        return self.partition.N

    @property
    def total_len(self) -> int:
        return self.prompt_len + self.partition.L

    @property
    def prompt(self) -> np.ndarray:
        return self.tokens[: self.prompt_len]

    @property
    def gen(self) -> np.ndarray:
        return self.tokens[self.prompt_len:]

    def abs_block_range(self, block: int) -> tuple[int, int]:
        start, end = self.partition.block_range(block)
        return self.prompt_len + start, self.prompt_len + end

    def is_masked(self, position: int) -> bool:
        return bool(self.tokens[position] == MASK)

    def masked_positions(self, block: int) -> np.ndarray:
        start, end = self.abs_block_range(block)
        return start + np.flatnonzero(self.tokens[start:end] == MASK)

    def block_done(self, block: int) -> bool:
        start, end = self.abs_block_range(block)
        return not np.any(self.tokens[start:end] == MASK)

    def commit(self, position: int, token: int) -> None:
        if not self.prompt_len <= position < self.total_len:
            raise PositionOutOfRangeError(f"position {position} is not a generation slot")
        if self.tokens[position] != MASK:
            raise SlotAlreadyCommittedError(f"slot at position {position} already committed")
        if token == MASK:
            raise VocabMismatchError("cannot commit the MASK id")
        self.tokens[position] = token

    def copy(self) -> "SequenceState":
        other = object.__new__(SequenceState)
        other.partition = self.partition
        other.prompt_len = self.prompt_len
        other.tokens = self.tokens.copy()
        return other


def init_sequence(prompt, L: int, K: int | None = None) -> SequenceState:
    """Fresh state: the prompt followed by ``L`` masked slots.

    ``K`` defaults to ``L`` (a single block).
    """
    return SequenceState(prompt, L, K)


def masked_ratio(state: SequenceState, block: int) -> float:
    start, end = state.abs_block_range(block)
    return int(np.count_nonzero(state.tokens[start:end] == MASK)) / state.K


def region_of(position: int, state: SequenceState, current_block: int) -> Region:
    if not 0 <= position < state.total_len:
        raise PositionOutOfRangeError(f"position {position} not in [0, {state.total_len})")
    start, end = state.abs_block_range(current_block)
    if position < start:
        return Region.PREFIX
    if position < end:
        return Region.CURRENT
    return Region.SUFFIX
