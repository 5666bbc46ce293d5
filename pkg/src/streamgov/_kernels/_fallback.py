"""Pure-numpy fallback for the compiled kernels.

Same contracts as ``streamgov._kernels._fast``: offset scans return the
smallest shift attaining the minimum, distance matrices are exactly
symmetric with a zero diagonal.
"""
import numpy as np


def shift_losses(x, g, max_offset, normalized):
    """Full (n, max_offset+1) table of truncated squared-error losses."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    n, T = x.shape
    out = np.empty((n, max_offset + 1), dtype=np.float64)
    for s in range(max_offset + 1):
        r = x[:, s:] - g[: T - s]
        loss = np.einsum("it,it->i", r, r)
        if normalized:
            loss = loss / (T - s)
        out[:, s] = loss
    return out


def offset_scan(x, g, max_offset, normalized):
    """Per-row argmin shift; ties broken toward the smaller shift."""
    losses = shift_losses(x, g, max_offset, normalized)
    return np.argmin(losses, axis=1).astype(np.int64)


def pairwise_l1(m):
    """Symmetric matrix of L1 distances between the rows of ``m``."""
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        d = np.abs(m[i + 1:] - m[i]).sum(axis=1)
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out
