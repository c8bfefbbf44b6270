"""Shared-uniform monotone coupling.

All chains started from different states are driven by the same uniforms,
``X_{n+1}(x) = F^{-1}(X_n(x), U_{n+1})``.  One uniform is drawn per time step
no matter how many initial states are simulated, so adding a path never
changes the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .kernel import MONOTONE_SLACK, MonotoneKernel

_MANTISSA = 2**53


class UniformStream:
    """Deterministic stream of Uniform(0, 1) draws.

    Backed by the counter-based Philox generator keyed through a SeedSequence,
    so ``child(i)`` substreams are independent and reproducible.  Draws are
    ``(k + 1/2) / 2**53`` for integer k, which keeps them strictly inside (0, 1).
    """

    def __init__(self, seed: int, substream: Sequence[int] = ()):
        self.seed = int(seed)
        self.substream = tuple(int(s) for s in substream)
        self.index = 0
        seq = np.random.SeedSequence(self.seed, spawn_key=self.substream)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def uniforms(self, size=None):
        bits = self._gen.integers(0, _MANTISSA, size=size, dtype=np.int64)
        self.index += int(np.prod(size)) if size is not None else 1
        return (bits + 0.5) / _MANTISSA

    def child(self, key: int) -> "UniformStream":
        return UniformStream(self.seed, self.substream + (key,))

    def __repr__(self):
        return f"UniformStream(seed={self.seed}, substream={self.substream}, index={self.index})"


def as_stream(stream_or_seed) -> UniformStream:
    if isinstance(stream_or_seed, UniformStream):
        return stream_or_seed
    return UniformStream(int(stream_or_seed))


@dataclass(frozen=True)
class RandomMap:
    """kappa(.) = F^{-1}(., u) for one realised uniform."""

    kernel: MonotoneKernel
    u: float

    def __call__(self, x):
        return self.kernel.inverse_cdf(x, self.u)


@dataclass
class CoupledPaths:
    initial_states: np.ndarray
    horizon: int
    paths: np.ndarray  # (len(initial_states), horizon + 1)
    seed: Optional[int]


@dataclass
class OrderReport:
    violations: int
    first: Optional[tuple]  # (index of lower path, ..., step) of the first violation
    worst: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _state_dtype(k):
    return np.int64 if k.discrete else float


def _check_sorted(xs):
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise InvalidArgument("need at least one initial state")
    if (np.diff(xs) < 0).any():
        raise InvalidArgument("initial states must be sorted ascending")
    return xs


def simulate_coupled(k: MonotoneKernel, xs, n: int, seed) -> CoupledPaths:
    xs = _check_sorted(xs)
    if n < 0:
        raise InvalidArgument("horizon must be non-negative")
    stream = as_stream(seed)
    u = stream.uniforms(n)
    paths = np.empty((xs.size, n + 1), dtype=_state_dtype(k))
    paths[:, 0] = xs
    for t in range(n):
        paths[:, t + 1] = k.inverse_cdf(paths[:, t], u[t])
    return CoupledPaths(xs.astype(paths.dtype), n, paths, stream.seed)


def simulate_coupled_batch(k: MonotoneKernel, xs, n: int, seeds) -> np.ndarray:
    """Many independent coupled ensembles; result[s] equals simulate_coupled(.., seeds[s]).paths."""
    U = np.stack([UniformStream(s).uniforms(n) for s in seeds]) if n else np.empty((len(seeds), 0))
    return coupled_from_uniforms(k, xs, U)


def coupled_from_uniforms(k: MonotoneKernel, xs, U) -> np.ndarray:
    """Forward coupled ensembles, one per row of U; shape (rows, len(xs), n + 1)."""
    xs = _check_sorted(xs)
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    out = np.empty((m, xs.size, n + 1), dtype=_state_dtype(k))
    out[:, :, 0] = xs
    for t in range(n):
        out[:, :, t + 1] = k.inverse_cdf(out[:, :, t], U[:, t, None])
    return out


def simulate_backward(k: MonotoneKernel, x, n: int, seed):
    """X~_n(x) = kappa_1(kappa_2(...kappa_n(x)...)); the newest map is applied first."""
    if n < 0:
        raise InvalidArgument("horizon must be non-negative")
    u = as_stream(seed).uniforms(n)
    y = np.asarray(x, dtype=_state_dtype(k))
    for t in range(n - 1, -1, -1):
        y = k.inverse_cdf(y, u[t])
    return y[()] if y.ndim == 0 else y


def simulate_backward_batch(k: MonotoneKernel, x, n: int, seeds) -> np.ndarray:
    U = np.stack([UniformStream(s).uniforms(n) for s in seeds]) if n else np.empty((len(seeds), 0))
    return backward_from_uniforms(k, x, U)


def simulate_forward_batch(k: MonotoneKernel, x, n: int, seeds) -> np.ndarray:
    """X_n(x) for each seed (single initial state)."""
    return simulate_coupled_batch(k, [x], n, seeds)[:, 0, -1]


def backward_from_uniforms(k: MonotoneKernel, x, U) -> np.ndarray:
    """Backward composition for each row of U (rows are independent streams)."""
    U = np.asarray(U, dtype=float)
    y = np.full(U.shape[0], x, dtype=_state_dtype(k))
    for t in range(U.shape[1] - 1, -1, -1):
        y = k.inverse_cdf(y, U[:, t])
    return y


def backward_iterates(k: MonotoneKernel, xs, U) -> np.ndarray:
    """All backward iterates X~_j(x), j = 0..n, sharing one set of maps.

    ``U`` has shape (paths, n); the result has shape (paths, len(xs), n + 1).
    Costs O(n^2) map evaluations since every X~_j is a fresh composition.
    """
    xs = np.asarray(xs, dtype=float)
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    out = np.empty((m, xs.size, n + 1), dtype=_state_dtype(k))
    out[:, :, 0] = xs
    for j in range(1, n + 1):
        y = np.broadcast_to(xs, (m, xs.size)).astype(out.dtype)
        for t in range(j - 1, -1, -1):
            y = k.inverse_cdf(y, U[:, t, None])
        out[:, :, j] = y
    return out


def check_order_preservation(paths, slack: float = MONOTONE_SLACK) -> OrderReport:
    """Count states where a path started lower sits above the next path.

    Accepts CoupledPaths or a raw array whose last two axes are (path, step).
    """
    arr = paths.paths if isinstance(paths, CoupledPaths) else np.asarray(paths)
    if arr.shape[-2] < 2:
        return OrderReport(0, None, 0.0)
    excess = arr[..., :-1, :].astype(float) - arr[..., 1:, :].astype(float)
    bad = excess > slack
    count = int(bad.sum())
    if not count:
        return OrderReport(0, None, float(max(excess.max(), 0.0)))
    first = tuple(int(i) for i in np.argwhere(bad)[0])
    return OrderReport(count, first, float(excess.max()))
