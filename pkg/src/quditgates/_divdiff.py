"""Divided differences of the exponential function.

Every closed-form time integral in the package reduces to an integral of
``exp`` of a linear form over a simplex, which by the Hermite-Genocchi
formula is a divided difference ``exp[z_0, ..., z_n]``.  Nodes may coincide
(confluent case), which is how derivatives with respect to a frequency are
obtained.
"""

import math

import numpy as np

# Nodes whose diameter is below this are summed as a Taylor series; wider
# node sets are split so the recursion never divides by less than this.
_CLUSTER_DIAMETER = 1.0
_SERIES_TERMS = 34


def _series(z):
    # exp[z_0..z_{n-1}] = e^c * sum_k h_k(z - c) / (k + n - 1)!
    n = z.shape[-1]
    c = z.mean(axis=-1)
    w = z - c[..., None]
    # h[k] holds the complete homogeneous symmetric polynomial of degree k
    h = np.empty((_SERIES_TERMS,) + w.shape[:-1], dtype=complex)
    h[0] = 1.0
    for k in range(1, _SERIES_TERMS):
        h[k] = h[k - 1] * w[..., 0]
    for i in range(1, n):
        wi = w[..., i]
        for k in range(1, _SERIES_TERMS):
            h[k] = h[k] + wi * h[k - 1]
    total = np.zeros(w.shape[:-1], dtype=complex)
    for k in range(_SERIES_TERMS - 1, -1, -1):
        total += h[k] / math.factorial(k + n - 1)
    return np.exp(c) * total


def dd_exp(z):
    """Divided difference of ``exp`` over the last axis of ``z``.

    ``z`` is complex with shape ``(..., n)``; the result has shape ``(...)``.
    Stable for arbitrarily close or repeated nodes.
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    if n == 1:
        return np.exp(z[..., 0])
    lead = z.shape[:-1]
    flat = z.reshape(-1, n)
    out = np.empty(flat.shape[0], dtype=complex)

    diffs = np.abs(flat[:, :, None] - flat[:, None, :])
    diam = diffs.reshape(flat.shape[0], -1).max(axis=1)
    near = diam <= _CLUSTER_DIAMETER
    if near.any():
        out[near] = _series(flat[near])
    far = ~near
    if far.any():
        zf = flat[far]
        d = diffs[far].reshape(zf.shape[0], -1)
        arg = d.argmax(axis=1)
        i, j = np.divmod(arg, n)
        # order nodes as (z_i, others..., z_j)
        order = np.empty((zf.shape[0], n), dtype=int)
        rows = np.arange(zf.shape[0])
        rest = np.ones((zf.shape[0], n), dtype=bool)
        rest[rows, i] = False
        rest[rows, j] = False
        order[:, 0] = i
        order[:, -1] = j
        if n > 2:
            order[:, 1:-1] = np.nonzero(rest)[1].reshape(zf.shape[0], n - 2)
        zs = np.take_along_axis(zf, order, axis=1)
        upper = dd_exp(zs[:, 1:])
        lower = dd_exp(zs[:, :-1])
        out[far] = (upper - lower) / (zs[:, -1] - zs[:, 0])
    return out.reshape(lead)


def exp_moment(x, tau, k=0):
    """``int_0^tau t^k exp(i x t) dt`` for real ``x`` (array), exactly."""
    x = np.asarray(x, dtype=float)
    z = 1j * x * tau
    nodes = np.concatenate(
        [np.zeros(x.shape + (1,), dtype=complex),
         np.repeat(z[..., None], k + 1, axis=-1)], axis=-1)
    return math.factorial(k) * tau ** (k + 1) * dd_exp(nodes)
