"""Pure-Python kernels.

``local_markov_predict_reference`` is the scalar reference semantics. The
compiled ``_kernels`` twin and the numpy-vectorized ``local_markov_predict``
must agree with it bit for bit.
"""

from __future__ import annotations

import numpy as np

_M = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _smix(z: int) -> int:
    z = (z + _GOLDEN) & _M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M
    return z ^ (z >> 31)


def _mix(h: int, v: int) -> int:
    return _smix(h ^ (((v & _M) * _GOLDEN) & _M))


def _term(v: int) -> int:
    # neighbours combine by wrapping sum, so scan order does not matter
    return _smix(((v & _M) * _GOLDEN) & _M)


def mix64(h: int, v: int) -> int:
    return _mix(h & _M, v)


def local_markov_predict_reference(positions, tokens, rows, radius, seed, vocab, eos_permille,
                                   mask_id, eos_id, first_regular, conf_floor, conf_ceil,
                                   exponent):
    """Token and confidence for each view row in ``rows``.

    Only rows whose position lies within ``radius`` of the query, plus the
    view's last row, influence the result.
    """
    pos = positions.tolist()
    tok = tokens.tolist()
    n = len(pos)
    out_tok = np.empty(len(rows), dtype=np.int64)
    out_conf = np.empty(len(rows), dtype=np.float64)
    seed = seed & _M
    span = conf_ceil - conf_floor
    n_regular = vocab - first_regular
    for i, r in enumerate(rows.tolist()):
        q = pos[r]
        h = _mix(seed, q)
        acc = 0
        n_c = 0
        n_m = 0
        j = r - 1
        while j >= 0 and q - pos[j] <= radius:
            if tok[j] == mask_id:
                n_m += 1
            else:
                n_c += 1
                acc = (acc + _term(((pos[j] - q) << 32) ^ tok[j])) & _M
            j -= 1
        j = r + 1
        while j < n and pos[j] - q <= radius:
            if tok[j] == mask_id:
                n_m += 1
            else:
                n_c += 1
                acc = (acc + _term(((pos[j] - q) << 32) ^ tok[j])) & _M
            j += 1
        h = _mix(h, acc)
        h = _mix(h, n_m)
        h = _mix(h, pos[n - 1] - q)
        h = _mix(h, tok[n - 1])
        frac = n_c / (n_c + n_m) if n_c + n_m else 0.0
        out_conf[i] = conf_floor + span * (frac ** exponent)
        if h % 1000 < eos_permille:
            out_tok[i] = eos_id
        else:
            out_tok[i] = first_regular + (h >> 16) % n_regular
    return out_tok, out_conf


_U = np.uint64
_GOLDEN_U = _U(_GOLDEN)
_C1 = _U(0xBF58476D1CE4E5B9)
_C2 = _U(0x94D049BB133111EB)
_S30, _S27, _S31, _S16, _S32 = _U(30), _U(27), _U(31), _U(16), np.int64(32)


def _smix_vec(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN_U
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _mix_vec(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    # int64 -> uint64 reinterpretation is the two's-complement mask
    return _smix_vec(h ^ (v.astype(np.int64).view(np.uint64) * _GOLDEN_U))


def local_markov_predict(positions, tokens, rows, radius, seed, vocab, eos_permille,
                         mask_id, eos_id, first_regular, conf_floor, conf_ceil,
                         exponent):
    """Vectorized over a (query, neighbour) matrix; same results as the reference."""
    positions = np.asarray(positions, dtype=np.int64)
    tokens = np.asarray(tokens, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    n = positions.size
    q = positions[rows]
    lo = np.searchsorted(positions, q - radius, side="left")
    hi = np.searchsorted(positions, q + radius, side="right")
    width = int((hi - lo).max()) if rows.size else 0
    cols = lo[:, None] + np.arange(width)[None, :]
    inside = (cols < hi[:, None]) & (cols != rows[:, None])
    cols = np.minimum(cols, n - 1)
    tok = tokens[cols]
    masked = inside & (tok == mask_id)
    committed = inside & ~masked
    n_m = masked.sum(axis=1)
    n_c = committed.sum(axis=1)
    # hash committed entries only; row sums via a wrapping cumulative sum
    r_idx, c_idx = np.nonzero(committed)
    v = ((positions[cols[r_idx, c_idx]] - q[r_idx]) << _S32) ^ tok[r_idx, c_idx]
    csum = np.zeros(v.size + 1, dtype=np.uint64)
    np.cumsum(_smix_vec(v.view(np.uint64) * _GOLDEN_U), out=csum[1:])
    ends = np.cumsum(n_c)
    acc = csum[ends] - csum[ends - n_c]

    h = _mix_vec(np.full(rows.size, seed & _M, dtype=np.uint64), q)
    h = _mix_vec(h, acc.view(np.int64))
    h = _mix_vec(h, n_m)
    h = _mix_vec(h, positions[n - 1] - q)
    h = _mix_vec(h, np.full(rows.size, tokens[n - 1], dtype=np.int64))
    total = n_c + n_m
    frac = np.where(total > 0, n_c / np.maximum(total, 1), 0.0)
    # scalar pow keeps libm rounding identical to the reference
    powed = np.array([f ** exponent for f in frac.tolist()], dtype=np.float64)
    out_conf = conf_floor + (conf_ceil - conf_floor) * powed
    eos = h % _U(1000) < _U(eos_permille)
    regular = first_regular + ((h >> _S16) % _U(vocab - first_regular)).astype(np.int64)
    out_tok = np.where(eos, eos_id, regular).astype(np.int64)
    return out_tok, out_conf
