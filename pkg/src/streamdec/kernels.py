"""Kernel backend selection.

The compiled extension is used when it was built and ``STREAMDEC_PURE_PYTHON``
is unset; otherwise the pure-Python implementation is loaded.
"""

import os

from . import _kernels_py

if os.environ.get("STREAMDEC_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "compiled"

local_markov_predict = _impl.local_markov_predict
mix64 = _impl.mix64
