"""Pure numpy implementations of the hot loops."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def draw_indices(cdf, uniforms, last):
    """Inverse-CDF lookup: index j with cdf[j-1] <= u < cdf[j].

    Draws that land past the end of ``cdf`` (rounding) go to ``last``, the
    highest index with non-zero probability.
    """
    idx = np.searchsorted(cdf, uniforms, side="right").astype(np.int64)
    np.minimum(idx, last, out=idx)
    return idx


def accumulate(draws, n, weights, probs, m):
    """Merge draws into (counts, u) with u[i, j] = w[i, j] * (counts[j] / (m * pr[j])).

    The factor is formed first so that a point drawn on every draw with
    pr = 1 keeps its weight bit-for-bit.
    """
    counts = np.bincount(draws, minlength=n).astype(np.int64)
    u = np.zeros_like(weights)
    hit = counts > 0
    u[:, hit] = weights[:, hit] * (counts[hit] / (m * probs[hit]))
    return counts, u


def correlate2d(x, kernels, stride_h, stride_w):
    """Valid cross-correlation of x (C, H, W) with kernels (O, C, kh, kw)."""
    O, _, kh, kw = kernels.shape
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride_h, ::stride_w]
    Ho, Wo = win.shape[1:3]
    # patch matrix (Ho*Wo, C*kh*kw), then one product per out channel; a single
    # matrix product would round each channel differently depending on O
    cols = np.ascontiguousarray(win.transpose(1, 2, 0, 3, 4)).reshape(Ho * Wo, -1)
    flat = kernels.reshape(O, -1)
    out = np.empty((O, Ho * Wo))
    for o in range(O):
        out[o] = cols @ flat[o]
    return out.reshape(O, Ho, Wo)
