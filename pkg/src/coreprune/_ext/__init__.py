"""Kernel backends.

``_kernels`` is the compiled Cython module; ``pykernels`` is the numpy
fallback with the same signatures. :mod:`coreprune.kernels` picks one at
import time.
"""
