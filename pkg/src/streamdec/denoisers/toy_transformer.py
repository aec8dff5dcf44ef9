from __future__ import annotations

from typing import Optional

import numpy as np

from ..core import MASK, PAD
from ..errors import OddEmbedDimError
from ..pruner import PrefixCache, SequenceView
from .base import Denoiser, Predictions, check_vocab

ROPE_BASE = 10000.0
DEFAULT_LOGIT_SCALE = 16.0
DEFAULT_ATTN_SCALE = 8.0
QK_NOISE = 0.5


_TABLE_CHUNK = 256
_tables: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def _rotary_table(d: int, base: float, max_pos: int) -> tuple[np.ndarray, np.ndarray]:
    # Built in fixed-size chunks so a position's cos/sin never depend on how
    # far the table has grown (vectorised libm tails can round differently).
    key = (d, base)
    cos, sin = _tables.get(key, (np.empty((0, d // 2)), np.empty((0, d // 2))))
    if cos.shape[0] <= max_pos:
        inv_freq = base ** (-np.arange(0, d, 2, dtype=np.float64) / d)
        cos_parts, sin_parts = [cos], [sin]
        start = cos.shape[0]
        while start <= max_pos:
            angles = np.arange(start, start + _TABLE_CHUNK, dtype=np.float64)[:, None] * inv_freq[None, :]
            cos_parts.append(np.cos(angles))
            sin_parts.append(np.sin(angles))
            start += _TABLE_CHUNK
        cos, sin = np.concatenate(cos_parts), np.concatenate(sin_parts)
        _tables[key] = (cos, sin)
    return cos, sin


def rotary(x: np.ndarray, positions: np.ndarray, base: float = ROPE_BASE) -> np.ndarray:
    """Rotate consecutive feature pairs of ``x`` (n, d) by ``position * base**(-2i/d)``."""
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        return x.copy()
    cos_tab, sin_tab = _rotary_table(x.shape[-1], base, int(positions.max()))
    cos, sin = cos_tab[positions], sin_tab[positions]
    even, odd = x[:, 0::2], x[:, 1::2]
    out = np.empty_like(x)
    out[:, 0::2] = even * cos - odd * sin
    out[:, 1::2] = even * sin + odd * cos
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


class ToyTransformer(Denoiser):
    """One bidirectional attention layer with rotary position ids and fixed random weights.

    Queries attend to every key in the view. Per-token projections are
    precomputed, so a key row depends only on its (token, position) pair and
    cached prefix keys match recomputed ones bit for bit.
    """

    def __init__(self, embed_dim: int, vocab: int, seed: int,
                 logit_scale: float = DEFAULT_LOGIT_SCALE,
                 attn_scale: float = DEFAULT_ATTN_SCALE):
        if embed_dim <= 0 or embed_dim % 2:
            raise OddEmbedDimError(f"embed_dim must be a positive even number (got {embed_dim})")
        self.vocab_size = check_vocab(vocab)
        self.embed_dim = int(embed_dim)
        self.seed = int(seed)
        self.logit_scale = float(logit_scale)
        self.attn_scale = float(attn_scale)
        rng = np.random.default_rng(self.seed)
        d = self.embed_dim
        # Query/key embeddings share a common direction, so rotary ids make
        # scores decay with relative distance; the per-token part keeps
        # content-dependence.
        common = rng.standard_normal(d)
        self.qk_embedding = common[None, :] + QK_NOISE * rng.standard_normal((vocab, d))
        self.value_embedding = rng.standard_normal((vocab, d)) / np.sqrt(d)
        # placeholders carry no content
        self.value_embedding[[MASK, PAD]] = 0.0
        # token b scores highly when the context holds its predecessor
        self.successor = rng.permutation(vocab)
        readout = np.empty((vocab, d))
        readout[self.successor] = self.value_embedding
        self.readout = readout
        self._k_tab = self.qk_embedding
        self._q_tab = self.qk_embedding
        self._v_tab = self.value_embedding
        self._blocked = np.zeros(vocab, dtype=bool)
        self._blocked[[MASK, PAD]] = True

    def keys(self, tokens: np.ndarray, positions: np.ndarray) -> np.ndarray:
        return rotary(self._k_tab[tokens], positions)

    def attention(self, view: SequenceView, rows: np.ndarray,
                  cache: Optional[PrefixCache] = None) -> np.ndarray:
        """(len(rows), len(view)) attention weights of the selected query rows."""
        keys = self._cached_keys(view, cache)
        queries = rotary(self._q_tab[view.tokens[rows]], view.position_ids[rows])
        scores = self.attn_scale * (queries @ keys.T) / np.sqrt(self.embed_dim)
        return _softmax(scores)

    def _cached_keys(self, view: SequenceView, cache: Optional[PrefixCache]) -> np.ndarray:
        if cache is None or cache.cached_upto is None or cache.cached_upto != view.prefix_len:
            return self.keys(view.tokens, view.position_ids)
        n_prefix = view.prefix_len
        entry = cache.payload.get("toy_keys")
        if entry is None or entry[0] != id(self):
            prefix_keys = self.keys(view.tokens[:n_prefix], view.position_ids[:n_prefix])
            cache.payload["toy_keys"] = (id(self), prefix_keys)
        else:
            prefix_keys = entry[1]
        rest = self.keys(view.tokens[n_prefix:], view.position_ids[n_prefix:])
        return np.concatenate([prefix_keys, rest])

    def _predict(self, view: SequenceView, queries: np.ndarray, rows: np.ndarray,
                 cache: Optional[PrefixCache]) -> Predictions:
        attn = self.attention(view, rows, cache)
        # readout attends over content-bearing keys only
        content = ~self._blocked[view.tokens]
        content_mass = attn[:, content].sum(axis=1, keepdims=True)
        hidden = (attn @ self._v_tab[view.tokens]) / np.maximum(content_mass, 1e-300)
        logits = self.logit_scale * (hidden @ self.readout.T)
        logits[:, self._blocked] = -np.inf
        probs = _softmax(logits)
        tokens = probs.argmax(axis=1)
        confs = probs[np.arange(tokens.size), tokens]

        cur_start, cur_end = view.current_range
        pos = view.position_ids
        regions = np.stack([pos < cur_start, (pos >= cur_start) & (pos < cur_end), pos >= cur_end], axis=1)
        mass = attn @ regions.astype(np.float64)
        return Predictions(positions=queries.copy(), tokens=tokens.astype(np.int64),
                           confidences=confs, attention=mass)


def toy_transformer_new(embed_dim: int, vocab: int, seed: int, **kwargs) -> ToyTransformer:
    return ToyTransformer(embed_dim, vocab, seed, **kwargs)
