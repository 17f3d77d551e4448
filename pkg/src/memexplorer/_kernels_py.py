"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``MEMEXPLORER_PURE_PYTHON=1`` is set. Signatures mirror ``_kernels.pyx``.
"""

import math

import numpy as np

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def serve_boundary(arrivals, sizes, start, rate):
    """FIFO single-server pass over chunks sorted by arrival time.

    Returns the departure time of every chunk. The server opens at ``start``.
    """
    n = len(arrivals)
    out = np.empty(n, dtype=np.float64)
    t = start
    for k in range(n):
        a = arrivals[k]
        if a > t:
            t = a
        t += sizes[k] / rate
        out[k] = t
    return out


def _psi(u, mu, sigma):
    """E[max(0, u - Y)] for Y ~ N(mu, sigma^2); u may be +/-inf."""
    if u == -math.inf:
        return 0.0
    if sigma <= 0.0:
        return max(0.0, u - mu)
    z = (u - mu) / sigma
    cdf = 0.5 * math.erfc(-z / _SQRT2)
    pdf = _INV_SQRT2PI * math.exp(-0.5 * z * z)
    return (u - mu) * cdf + sigma * pdf


def ehvi_2d(mu1, sigma1, mu2, sigma2, front1, front2, r1, r2):
    """Exact 2-objective EHVI (minimisation) for a batch of candidates.

    ``front1``/``front2`` hold a non-dominated front sorted by the first
    objective ascending, already clipped to points strictly inside ``r``.
    The non-dominated region splits into vertical strips between
    consecutive front points; each strip contributes a product of two
    one-dimensional expected improvements.
    """
    n = len(front1)
    m = len(mu1)
    out = np.empty(m, dtype=np.float64)
    bounds = [-math.inf] + [float(v) for v in front1] + [float(r1)]
    uppers = [float(r2)] + [float(v) for v in front2]
    for c in range(m):
        acc = 0.0
        prev = 0.0
        for j in range(n + 1):
            nxt = _psi(bounds[j + 1], mu1[c], sigma1[c])
            width = nxt - prev
            prev = nxt
            if width <= 0.0:
                continue
            height = _psi(uppers[j], mu2[c], sigma2[c])
            acc += width * height
        out[c] = acc if acc > 0.0 else 0.0
    return out


def hypervolume_2d(f1, f2, r1, r2):
    """Area dominated by points (minimisation) and bounded by ``(r1, r2)``."""
    pts = sorted((a, b) for a, b in zip(f1, f2) if a < r1 and b < r2)
    area = 0.0
    best2 = r2
    for a, b in pts:
        if b < best2:
            area += (r1 - a) * (best2 - b)
            best2 = b
    return area
