"""Reproducible Wiener increments from a counter-based generator.

Every (seed, path, channel) triple keys its own Philox stream; the step index
is the counter.  A value therefore depends only on (seed, path, step, channel),
never on how many other channels or paths were drawn, or in what order.
Gaussians come from the inverse normal CDF applied to 53-bit uniforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

# channel layout: transport Brownian motions first, w^k from W_OFFSET,
# reserved channels for random initial data from XI_OFFSET
W_OFFSET = 1 << 10
XI_OFFSET = 1 << 20
_MASK64 = (1 << 64) - 1


def _key(seed, path, channel):
    if path < 0 or channel < 0:
        raise ValueError("path and channel must be non-negative")
    if path >= 1 << 40 or channel >= 1 << 24:
        raise ValueError("path or channel index out of range")
    return np.array([int(seed) & _MASK64, (path << 24) | channel], dtype=np.uint64)


def uniforms(seed, path, channel, count):
    """``count`` uniforms in (0, 1) from the stream keyed by (seed, path, channel)."""
    bits = np.random.Philox(key=_key(seed, path, channel)).random_raw(count)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed, path, channel, count):
    return ndtri(uniforms(seed, path, channel, count))


@dataclass(frozen=True)
class NoiseModel:
    """Brownian increments for ``d_transport`` transport and ``k_noise`` other channels.

    ``substeps > 1`` draws the stream on the finer step ``dt / substeps`` and
    sums consecutive increments, so runs at different ``dt`` share one
    Brownian path when their finest step agrees.
    """

    d_transport: int
    k_noise: int
    seed: int
    dt: float
    n_steps: int
    substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 0 or self.substeps < 1:
            raise ValueError("need dt > 0, n_steps >= 0 and substeps >= 1")
        if self.d_transport < 0 or self.k_noise < 0:
            raise ValueError("channel counts must be non-negative")

    @property
    def channels(self):
        return list(range(self.d_transport)) + [W_OFFSET + k for k in range(self.k_noise)]

    def channel_increments(self, path_index, channel):
        fine = self.n_steps * self.substeps
        z = standard_normals(self.seed, path_index, channel, fine)
        z *= np.sqrt(self.dt / self.substeps)
        if self.substeps > 1:
            z = z.reshape(self.n_steps, self.substeps).sum(axis=1)
        return z

    def make_stream(self, path_index):
        """Increments for one path: array ``(n_steps, d_transport + k_noise)``.

        Columns are the transport increments followed by the ``w^k`` increments.
        """
        if path_index < 0:
            raise ValueError("path_index must be >= 0")
        cols = [self.channel_increments(path_index, c) for c in self.channels]
        if not cols:
            return np.zeros((self.n_steps, 0))
        return np.column_stack(cols)


def coarsen(increments, factor):
    """Sum blocks of ``factor`` consecutive increments along axis 0."""
    n = increments.shape[0]
    if n % factor:
        raise ValueError("number of steps is not divisible by factor")
    return increments.reshape((n // factor, factor) + increments.shape[1:]).sum(axis=1)
