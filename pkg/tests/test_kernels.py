import numpy as np
import pytest
from hypothesis import given, strategies as st

from streamdec import _kernels_py, kernels
from streamdec.core import EOS, FIRST_REGULAR, MASK

try:
    from streamdec import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _inputs(rng):
    n = int(rng.integers(1, 80))
    positions = np.sort(rng.choice(np.arange(400), n, replace=False)).astype(np.int64)
    tokens = np.where(rng.random(n) < 0.4, MASK, rng.integers(FIRST_REGULAR, 300, n)).astype(np.int64)
    rows = rng.choice(n, int(rng.integers(1, n + 1)), replace=False).astype(np.int64)
    return positions, tokens, rows


def _call(mod, positions, tokens, rows, radius, seed, vocab, permille):
    return mod.local_markov_predict(positions, tokens, rows, radius, seed, vocab, permille,
                                    MASK, EOS, FIRST_REGULAR, 0.2, 0.99, 0.5)


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


def _random_args(rng):
    return (int(rng.integers(0, 50)), int(rng.integers(0, 2**63)), int(rng.integers(4, 300)),
            int(rng.integers(0, 1001)))


def test_vectorized_matches_reference_bit_for_bit():
    rng = np.random.default_rng(0)
    for _ in range(300):
        positions, tokens, rows = _inputs(rng)
        args = _random_args(rng)
        rt, rc = _kernels_py.local_markov_predict_reference(
            positions, tokens, rows, *args, MASK, EOS, FIRST_REGULAR, 0.2, 0.99, 0.5)
        vt, vc = _call(_kernels_py, positions, tokens, rows, *args)
        assert np.array_equal(rt, vt)
        assert np.array_equal(rc, vc)


@needs_compiled
def test_compiled_matches_python_bit_for_bit():
    rng = np.random.default_rng(1)
    for _ in range(300):
        positions, tokens, rows = _inputs(rng)
        args = _random_args(rng)
        rt, rc = _kernels_py.local_markov_predict_reference(
            positions, tokens, rows, *args, MASK, EOS, FIRST_REGULAR, 0.2, 0.99, 0.5)
        ct, cc = _call(compiled, positions, tokens, rows, *args)
        assert np.array_equal(rt, ct)
        assert np.array_equal(rc, cc)


@needs_compiled
@given(st.integers(0, 2**64 - 1), st.integers(-2**62, 2**62))
def test_mix64_matches(h, v):
    assert compiled.mix64(h, v) == _kernels_py.mix64(h, v)


def test_python_kernel_ranges():
    rng = np.random.default_rng(1)
    for _ in range(50):
        positions, tokens, rows = _inputs(rng)
        toks, confs = _call(_kernels_py, positions, tokens, rows, 5, 3, 64, 10)
        assert np.all((confs >= 0.2) & (confs <= 0.99 + 1e-15))
        assert np.all((toks == EOS) | ((toks >= FIRST_REGULAR) & (toks < 64)))
