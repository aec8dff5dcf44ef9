from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np

from ..core import MIN_VOCAB
from ..errors import QueryNotInViewError, VocabMismatchError
from ..pruner import PrefixCache, SequenceView


class Entry(NamedTuple):
    position: int
    token: int
    confidence: float


@dataclass(frozen=True, eq=False)
class Predictions:
    """One (token, confidence) per query position, in query order.

    ``attention`` is an optional ``(n, 3)`` array of attention mass on the
    prefix, current and suffix regions for each query.
    """

    positions: np.ndarray
    tokens: np.ndarray
    confidences: np.ndarray
    attention: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.positions.size)

    def __iter__(self) -> Iterator[Entry]:
        for p, t, c in zip(self.positions.tolist(), self.tokens.tolist(), self.confidences.tolist()):
            yield Entry(p, t, c)

    def subset(self, mask: np.ndarray) -> "Predictions":
        return Predictions(
            positions=self.positions[mask],
            tokens=self.tokens[mask],
            confidences=self.confidences[mask],
            attention=None if self.attention is None else self.attention[mask],
        )


class Denoiser(abc.ABC):
    """Maps a (possibly pruned) view to per-query argmax tokens and confidences.

    ``locality`` is the radius in tokens outside which content cannot affect a
    prediction (``math.inf`` when unbounded).
    """

    vocab_size: int
    locality: float = math.inf
    seed: int = 0

    def predict(
        self,
        view: SequenceView,
        queries=None,
        cache: Optional[PrefixCache] = None,
    ) -> Predictions:
        queries = view.query_span if queries is None else np.asarray(queries, dtype=np.int64)
        rows = view.index_of(queries) if len(view) else np.full(queries.shape, -1)
        if np.any(rows < 0):
            missing = queries[rows < 0].tolist()
            raise QueryNotInViewError(f"query positions {missing[:8]} not present in view")
        if view.tokens.size and (view.tokens.min() < 0 or view.tokens.max() >= self.vocab_size):
            raise VocabMismatchError(f"view holds token ids outside vocabulary of size {self.vocab_size}")
        return self._predict(view, queries, rows, cache)

    @abc.abstractmethod
    def _predict(
        self,
        view: SequenceView,
        queries: np.ndarray,
        rows: np.ndarray,
        cache: Optional[PrefixCache],
    ) -> Predictions:
        ...


def check_vocab(vocab: int) -> int:
    if vocab < MIN_VOCAB:
        raise ValueError(f"vocabulary must hold at least {MIN_VOCAB} ids (got {vocab})")
    return int(vocab)
