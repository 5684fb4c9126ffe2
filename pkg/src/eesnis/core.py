"""Targets, integrands, weighted samples and reproducible random streams.

Batches of points are numpy arrays of shape ``(n,)`` when the dimension is 1
and ``(n, d)`` otherwise.  Every callable in this package is vectorized over
the leading axis.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, NonFiniteWeight, SupportViolation

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _label_to_int(label) -> int:
    if isinstance(label, (bool, np.bool_)):
        return int(label)
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream_key(*parts) -> int:
    """Fold integers and strings into one 64-bit stream identifier.

    ``stream_key(3, "plus")`` is the identifier used for the plus-side
    sample of replication 3.
    """
    h = 0x6A09E667F3BCC909
    for part in parts:
        h = splitmix64(h ^ _label_to_int(part))
    return h


class RandomStream:
    """A single-owner pseudo-random stream fixed by ``(master_seed, stream_id)``.

    The bit generator is Philox, a counter-based generator, keyed by a
    SplitMix64 mix of the seed and the stream id.  The key is injective in
    the pair, so distinct ids never share a keystream.
    """

    def __init__(self, master_seed: int, stream_id: int):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array(
            [splitmix64(self.master_seed), splitmix64(self.stream_id ^ splitmix64(self.master_seed))],
            dtype=np.uint64,
        )
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, *labels) -> "RandomStream":
        """Derive a child stream; does not consume any state of this stream."""
        return RandomStream(self.master_seed, stream_key(self.stream_id, *labels))

    def __repr__(self) -> str:
        return f"RandomStream(master_seed={self.master_seed}, stream_id={self.stream_id:#x})"


def derive_stream(master_seed: int, stream_id: int) -> RandomStream:
    return RandomStream(master_seed, stream_id)


def as_stream(stream) -> RandomStream:
    """Accept a RandomStream or a bare integer seed (stream id 0)."""
    if isinstance(stream, RandomStream):
        return stream
    if isinstance(stream, (int, np.integer)):
        return RandomStream(int(stream), 0)
    raise TypeError(f"expected RandomStream or int seed, got {type(stream).__name__}")


def as_points(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dimension == 1:
        if x.ndim == 2 and x.shape[1] == 1:
            x = x[:, 0]
        if x.ndim == 0:
            x = x.reshape(1)
        if x.ndim != 1:
            raise DimensionMismatch(f"expected shape (n,) for 1-d points, got {x.shape}")
    else:
        if x.ndim == 1 and x.shape[0] == dimension:
            x = x.reshape(1, dimension)
        if x.ndim != 2 or x.shape[1] != dimension:
            raise DimensionMismatch(f"expected shape (n, {dimension}), got {x.shape}")
    return x


def check_dimensions(*objects) -> int:
    dims = {obj.dimension for obj in objects}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True)
class UnnormalizedTarget:
    """Nonnegative target p_u(x) = exp(log_kernel(x) + log_scale).

    The constant factor is held apart from the kernel so that rescaling the
    target (``scaled``) changes every weight by exactly the same factor.
    Estimators never see the normalizing constant c_p.
    """

    log_kernel: Callable[[np.ndarray], np.ndarray]
    dimension: int = 1
    log_scale: float = 0.0
    label: str = "target"

    @classmethod
    def from_density(cls, density, dimension: int = 1, label: str = "target"):
        def log_kernel(x):
            with np.errstate(divide="ignore"):
                return np.log(density(x))

        return cls(log_kernel, dimension, 0.0, label)

    def log_eval(self, x) -> np.ndarray:
        return np.asarray(self.log_kernel(as_points(x, self.dimension)), dtype=float) + self.log_scale

    def eval(self, x) -> np.ndarray:
        return np.exp(self.log_eval(x))

    __call__ = eval

    def scaled(self, factor: float) -> "UnnormalizedTarget":
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return UnnormalizedTarget(self.log_kernel, self.dimension, self.log_scale + math.log(factor), self.label)


@dataclass(frozen=True)
class Integrand:
    """Real-valued integrand.  ``affine`` records (a, b) when f(x) = a x + b in 1-d."""

    func: Callable[[np.ndarray], np.ndarray]
    dimension: int = 1
    label: str = "f"
    affine: Optional[tuple] = None

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.dimension)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape[:1]).copy()

    def __sub__(self, other: "Integrand") -> "Integrand":
        check_dimensions(self, other)
        affine = None
        if self.affine is not None and other.affine is not None:
            affine = (self.affine[0] - other.affine[0], self.affine[1] - other.affine[1])
        return Integrand(lambda x: self(x) - other(x), self.dimension, f"({self.label})-({other.label})", affine)


def as_integrand(f, dimension: int = 1) -> Integrand:
    if isinstance(f, Integrand):
        return f
    return Integrand(f, dimension, getattr(f, "__name__", "f"))


def affine_integrand(a: float, b: float = 0.0, label: Optional[str] = None) -> Integrand:
    a, b = float(a), float(b)
    return Integrand(lambda x: a * x + b, 1, label or f"{a:g}*x+{b:g}", (a, b))


def constant_integrand(c: float, dimension: int = 1) -> Integrand:
    c = float(c)
    affine = (0.0, c) if dimension == 1 else None
    return Integrand(lambda x: np.full(x.shape[0], c), dimension, f"{c:g}", affine)


@dataclass(frozen=True)
class WeightedSample:
    """Draws x_i from one proposal with y_i = f(x_i) and weights p_u(x_i)/q(x_i).

    ``w_rel`` excludes the target's constant factor ``exp(log_scale)``; the
    full weights are ``w``.  Ratio estimators work with ``w_rel`` because the
    constant cancels.
    """

    x: np.ndarray
    y: np.ndarray
    w_rel: np.ndarray
    log_scale: float = 0.0
    source_seed: int = 0
    stream_id: int = 0
    proposal_id: str = ""

    @property
    def w(self) -> np.ndarray:
        return self.w_rel * math.exp(self.log_scale)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def observations(self):
        return list(zip(self.y.tolist(), self.w.tolist()))

    def ess(self) -> float:
        return effective_sample_size(self.w_rel)


def effective_sample_size(w) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2; 0 when all weights vanish."""
    w = np.asarray(w, dtype=float)
    s2 = float(np.dot(w, w))
    if s2 == 0.0:
        return 0.0
    return float(w.sum()) ** 2 / s2


def weights_from_logs(log_num: np.ndarray, log_den: np.ndarray) -> np.ndarray:
    """exp(log_num - log_den), raising when the ratio is not finite."""
    if np.any(log_den == -np.inf):
        raise SupportViolation("drawn point has zero proposal density")
    with np.errstate(invalid="ignore", over="ignore"):
        w = np.exp(log_num - log_den)
    if not np.all(np.isfinite(w)):
        raise NonFiniteWeight("non-finite importance weight; proposal and target do not match")
    return w


def draw_weighted_sample(target: UnnormalizedTarget, f, q, n: int, stream) -> WeightedSample:
    """Draw ``n`` points from ``q`` and attach y = f(x) and w = p_u(x)/q(x)."""
    f = as_integrand(f, target.dimension)
    check_dimensions(target, f, q)
    if n < 1:
        raise ValueError("n must be at least 1")
    stream = as_stream(stream)
    x = q.sample(stream.generator, int(n))
    w_rel = weights_from_logs(np.asarray(target.log_kernel(x), dtype=float), q.logpdf(x))
    y = f(x)
    bad = ~np.isfinite(y)
    if np.any(bad & (w_rel > 0)):
        raise ValueError("integrand is not finite at a point with positive weight")
    if np.any(bad):
        y = np.where(bad, 0.0, y)
    return WeightedSample(x, y, w_rel, target.log_scale, stream.master_seed, stream.stream_id, q.label)
