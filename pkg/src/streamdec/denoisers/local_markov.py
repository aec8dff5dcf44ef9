from __future__ import annotations

from typing import Optional

import numpy as np

from .. import kernels
from ..core import EOS, FIRST_REGULAR, MASK
from ..pruner import PrefixCache, SequenceView
from .base import Denoiser, Predictions, check_vocab

CONF_FLOOR = 0.2
CONF_CEIL = 0.99
# concave: a half-committed neighbourhood already gives ~0.76
CONF_EXPONENT = 0.5
DEFAULT_EOS_PERMILLE = 2


class LocalMarkovOracle(Denoiser):
    """Deterministic predictor that only looks ``D`` tokens either side.

    For a query at position q, let ``frac`` be the share of committed slots
    among the view's other positions within distance D. Confidence is::

        CONF_FLOOR + (CONF_CEIL - CONF_FLOOR) * frac ** CONF_EXPONENT

        frac = 0 -> 0.2,  frac = 1 -> 0.99,  strictly increasing in between.

    The token is a hash of the committed neighbours (with relative offsets,
    combined order-independently), the masked-neighbour count, and the view's
    last slot (the trailing cue).
    About ``eos_permille`` in 1000 predictions are EOS.
    """

    def __init__(self, D: int, vocab: int, seed: int, eos_permille: int = DEFAULT_EOS_PERMILLE):
        if D < 0:
            raise ValueError(f"locality radius must be non-negative (got {D})")
        if not 0 <= eos_permille <= 1000:
            raise ValueError("eos_permille must lie in [0, 1000]")
        self.locality = int(D)
        self.vocab_size = check_vocab(vocab)
        self.seed = int(seed)
        self.eos_permille = int(eos_permille)

    def _predict(self, view: SequenceView, queries: np.ndarray, rows: np.ndarray,
                 cache: Optional[PrefixCache]) -> Predictions:
        tokens, confs = kernels.local_markov_predict(
            np.ascontiguousarray(view.position_ids, dtype=np.int64),
            np.ascontiguousarray(view.tokens, dtype=np.int64),
            np.ascontiguousarray(rows, dtype=np.int64),
            self.locality, self.seed, self.vocab_size, self.eos_permille,
            MASK, EOS, FIRST_REGULAR, CONF_FLOOR, CONF_CEIL, CONF_EXPONENT,
        )
        return Predictions(positions=queries.copy(), tokens=tokens, confidences=confs)


def local_markov_oracle_new(D: int, vocab: int, seed: int, **kwargs) -> LocalMarkovOracle:
    return LocalMarkovOracle(D, vocab, seed, **kwargs)
