"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``COREPRUNE_PURE_PYTHON=1``
to force the numpy fallback. Both expose ``draw_indices``, ``accumulate`` and
``correlate2d`` with identical contracts.
"""
import os

import numpy as np

from ._ext import pykernels

BACKEND = "python"
_impl = pykernels

if os.environ.get("COREPRUNE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = pykernels


def draw_indices(cdf, uniforms, last, impl=None):
    impl = impl or _impl
    return impl.draw_indices(
        np.ascontiguousarray(cdf, dtype=np.float64),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        int(last),
    )


def accumulate(draws, n, weights, probs, m, impl=None):
    impl = impl or _impl
    return impl.accumulate(
        np.ascontiguousarray(draws, dtype=np.int64),
        int(n),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(probs, dtype=np.float64),
        int(m),
    )


def correlate2d(x, kernels, stride=(1, 1), impl=None):
    impl = impl or _impl
    return impl.correlate2d(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(kernels, dtype=np.float64),
        int(stride[0]),
        int(stride[1]),
    )


def backends():
    """Mapping of available backend name -> module."""
    out = {"python": pykernels}
    try:
        from ._ext import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
