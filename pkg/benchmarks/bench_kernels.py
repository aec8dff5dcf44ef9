"""Compiled vs pure-Python timing of the D-local oracle kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--view 800] [--radius 64]

Times the raw kernel on one synthetic view and a full streaming decode with
the D-local oracle under each implementation: the compiled extension, the
numpy-vectorized fallback, and the scalar reference loop.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from types import SimpleNamespace

from streamdec import _kernels_py, kernels
from streamdec.core import EOS, FIRST_REGULAR, MASK
from streamdec.denoisers import LocalMarkovOracle
from streamdec.denoisers.local_markov import CONF_CEIL, CONF_EXPONENT, CONF_FLOOR
from streamdec.scheduler import DecodeConfig, decode_sequence

try:
    from streamdec import _kernels as _compiled
except ImportError:
    _compiled = None


def _view(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    positions = np.arange(n, dtype=np.int64)
    tokens = np.where(rng.random(n) < 0.5, MASK, rng.integers(FIRST_REGULAR, 256, n)).astype(np.int64)
    rows = np.arange(n // 2, n // 2 + 32, dtype=np.int64)
    return positions, tokens, rows


def bench_kernel(mod, n: int, radius: int, repeat: int) -> float:
    positions, tokens, rows = _view(n)
    call = lambda: mod.local_markov_predict(positions, tokens, rows, radius, 0, 256, 2, MASK, EOS,
                                            FIRST_REGULAR, CONF_FLOOR, CONF_CEIL, CONF_EXPONENT)
    number = 20
    return min(timeit.repeat(call, number=number, repeat=repeat)) / number


def bench_decode(mod, radius: int, repeat: int) -> float:
    saved = kernels.local_markov_predict
    kernels.local_markov_predict = mod.local_markov_predict
    try:
        prompt = np.random.default_rng(0).integers(FIRST_REGULAR, 256, 64)
        cfg = DecodeConfig(L=256, K=32, w=2, early_exit=False)
        den = LocalMarkovOracle(radius, 256, 0)
        return min(timeit.repeat(lambda: decode_sequence(prompt, den, cfg), number=1, repeat=repeat))
    finally:
        kernels.local_markov_predict = saved


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--view", type=int, default=800, help="view length for the kernel benchmark")
    p.add_argument("--radius", type=int, default=64)
    args = p.parse_args(argv)

    reference = SimpleNamespace(local_markov_predict=_kernels_py.local_markov_predict_reference)
    backends = [("numpy", _kernels_py), ("reference", reference)]
    if _compiled is not None:
        backends.insert(0, ("compiled", _compiled))
    else:
        print("compiled extension not built; timing the pure-Python kernels only")

    results = {}
    for name, mod in backends:
        results[name] = (bench_kernel(mod, args.view, args.radius, args.repeat),
                         bench_decode(mod, args.radius, args.repeat))
    print(f"{'backend':<10}{'kernel (32 queries)':>22}{'full decode':>16}")
    for name, (k, d) in results.items():
        print(f"{name:<10}{k * 1e3:>19.3f} ms{d:>14.3f} s")
    if "compiled" in results:
        ck, cd = results["compiled"]
        for name in ("numpy", "reference"):
            pk, pd = results[name]
            print(f"{'vs ' + name:<12}{pk / ck:>18.1f}x{pd / cd:>15.1f}x")


if __name__ == "__main__":
    main()
