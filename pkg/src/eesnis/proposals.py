"""Sampling distributions with point evaluation, support test and sampler.

All densities are evaluated in log space.  One-dimensional proposals also
expose ``cdf``/``ppf`` so they can be coupled through a shared uniform.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .core import RandomStream, as_points, as_stream

_LOG_2PI = math.log(2.0 * math.pi)


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniforms strictly inside (0, 1)."""
    return (np.floor(rng.random(n) * 2.0**53) + 0.5) / 2.0**53


class Proposal:
    """Normalized sampling density q."""

    dimension: int = 1
    label: str = "q"

    def logpdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def in_support(self, x) -> np.ndarray:
        return self.logpdf(x) > -np.inf

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def draw(self, stream, n: int = 1) -> np.ndarray:
        return self.sample(as_stream(stream).generator, n)

    def cdf(self, x) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no cdf")

    def ppf(self, u) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no ppf")

    def breakpoints(self) -> np.ndarray:
        """Points where the density may be non-smooth (1-d only)."""
        return np.empty(0)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label!r})"


class GaussianProposal(Proposal):
    """N(mean, sd^2) in 1-d.  With ``normalized=False`` the 1/(sd sqrt(2 pi)) factor is dropped."""

    def __init__(self, mean: float = 0.0, sd: float = 1.0, normalized: bool = True, label: Optional[str] = None):
        if not sd > 0:
            raise ValueError("sd must be positive")
        self.mean, self.sd, self.normalized = float(mean), float(sd), normalized
        self.label = label or f"N({self.mean:g},{self.sd:g}^2)"
        self._log_norm = -math.log(self.sd) - 0.5 * _LOG_2PI if normalized else 0.0

    def logpdf(self, x):
        z = (as_points(x, 1) - self.mean) / self.sd
        return -0.5 * z * z + self._log_norm

    def sample(self, rng, n):
        return self.mean + self.sd * rng.standard_normal(n)

    def cdf(self, x):
        return special.ndtr((as_points(x, 1) - self.mean) / self.sd)

    def ppf(self, u):
        return self.mean + self.sd * special.ndtri(np.asarray(u, dtype=float))


class GaussianRampProposal(Proposal):
    """Density proportional to (+-(x - mean))_+ exp(-(x - mean)^2 / (2 sd^2)).

    A Rayleigh distribution reflected to the requested side of ``mean``.
    With ``side=+1`` it is exactly proportional to (x - mean)_+ times a
    N(mean, sd^2) density.
    """

    def __init__(self, mean: float, sd: float, side: int, label: Optional[str] = None):
        if side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        self.mean, self.sd, self.side = float(mean), float(sd), side
        self.label = label or f"ramp{'+' if side > 0 else '-'}({self.mean:g},{self.sd:g})"

    def _u(self, x):
        return self.side * (as_points(x, 1) - self.mean)

    def logpdf(self, x):
        u = self._u(x)
        out = np.full(u.shape, -np.inf)
        pos = u > 0
        up = u[pos]
        out[pos] = np.log(up) - 2.0 * math.log(self.sd) - 0.5 * (up / self.sd) ** 2
        return out

    def sample(self, rng, n):
        return self.ppf(open_uniform(rng, n))

    def cdf(self, x):
        u = np.maximum(self._u(x), 0.0)
        tail = np.exp(-0.5 * (u / self.sd) ** 2)
        return 1.0 - tail if self.side > 0 else tail

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.side > 0:
            return self.mean + self.sd * np.sqrt(-2.0 * np.log1p(-u))
        return self.mean - self.sd * np.sqrt(-2.0 * np.log(u))

    def breakpoints(self):
        return np.array([self.mean])


class UniformProposal(Proposal):
    def __init__(self, lo: float, hi: float, label: Optional[str] = None):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lo, self.hi = float(lo), float(hi)
        self.label = label or f"U({self.lo:g},{self.hi:g})"
        self._logd = -math.log(self.hi - self.lo)

    def logpdf(self, x):
        x = as_points(x, 1)
        return np.where((x >= self.lo) & (x <= self.hi), self._logd, -np.inf)

    def sample(self, rng, n):
        return self.lo + (self.hi - self.lo) * open_uniform(rng, n)

    def cdf(self, x):
        return np.clip((as_points(x, 1) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def ppf(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def breakpoints(self):
        return np.array([self.lo, self.hi])


class GridProposal(Proposal):
    """Piecewise-constant density on a grid of cells, sampled by inverse CDF.

    The CDF is linear inside each cell, which is exactly the density that
    ``pdf`` reports, so weights computed with ``pdf`` are unbiased.
    """

    def __init__(self, edges, masses, label: str = "grid"):
        edges = np.asarray(edges, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if edges.ndim != 1 or masses.shape != (edges.size - 1,):
            raise ValueError("need len(edges) == len(masses) + 1")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        if np.any(masses < 0) or not masses.sum() > 0:
            raise ValueError("masses must be nonnegative with positive total")
        self.edges = edges
        self.masses = masses / masses.sum()
        self.density = self.masses / np.diff(edges)
        self.cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        self.cum[-1] = 1.0
        self.label = label
        with np.errstate(divide="ignore"):
            self._logdens = np.log(self.density)

    @classmethod
    def from_shape(cls, shape, edges, nodes: int = 8, label: str = "grid"):
        """Cell masses from Gauss-Legendre integration of ``shape`` over each cell."""
        edges = np.asarray(edges, dtype=float)
        t, wts = np.polynomial.legendre.leggauss(nodes)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * np.diff(edges)
        pts = mid[:, None] + half[:, None] * t[None, :]
        vals = np.asarray(shape(pts.ravel()), dtype=float).reshape(pts.shape)
        masses = half * (vals @ wts)
        return cls(edges, np.maximum(masses, 0.0), label)

    def _cells(self, x):
        x = as_points(x, 1)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        idx = np.where(x == self.edges[-1], self.edges.size - 2, idx)
        inside = (idx >= 0) & (idx < self.masses.size)
        return x, np.clip(idx, 0, self.masses.size - 1), inside

    def logpdf(self, x):
        x, idx, inside = self._cells(x)
        out = np.where(inside, self._logdens[idx], -np.inf)
        # a point exactly on an interior edge belongs to whichever neighbour has mass
        on_edge = inside & (idx > 0) & (x == self.edges[idx])
        if np.any(on_edge):
            left = self._logdens[idx[on_edge] - 1]
            out[on_edge] = np.maximum(out[on_edge], left)
        return out

    def cdf(self, x):
        x, idx, inside = self._cells(x)
        frac = (x - self.edges[idx]) / (self.edges[idx + 1] - self.edges[idx])
        val = self.cum[idx] + self.masses[idx] * frac
        return np.where(x < self.edges[0], 0.0, np.where(x >= self.edges[-1], 1.0, val))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        # cum[k] < u <= cum[k+1] picks a cell with positive mass
        k = np.clip(np.searchsorted(self.cum, u, side="left") - 1, 0, self.masses.size - 1)
        m = self.masses[k]
        frac = np.divide(u - self.cum[k], m, out=np.zeros_like(u), where=m > 0)
        x = self.edges[k] + np.clip(frac, 0.0, 1.0) * (self.edges[k + 1] - self.edges[k])
        return x

    def sample(self, rng, n):
        return self.ppf(open_uniform(rng, n))

    def breakpoints(self):
        return self.edges


class _AtomIndex:
    """Exact lookup of atom positions."""

    def __init__(self, points: np.ndarray, dimension: int):
        self.dimension = dimension
        self.points = points
        if dimension == 1:
            self._order = np.argsort(points, kind="stable")
            self._sorted = points[self._order]
            if np.any(np.diff(self._sorted) == 0):
                raise ValueError("duplicate atom positions")
        else:
            self._table = {tuple(p): i for i, p in enumerate(points.tolist())}
            if len(self._table) != len(points):
                raise ValueError("duplicate atom positions")

    def find(self, x) -> np.ndarray:
        """Atom index of each point, or -1 when the point is not an atom."""
        x = as_points(x, self.dimension)
        if self.dimension == 1:
            pos = np.clip(np.searchsorted(self._sorted, x), 0, self._sorted.size - 1)
            hit = self._sorted[pos] == x
            return np.where(hit, self._order[pos], -1)
        return np.array([self._table.get(tuple(p), -1) for p in x.tolist()], dtype=int)


def atom_points(points, dimension: Optional[int] = None) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if dimension is None:
        dimension = 1 if pts.ndim == 1 else pts.shape[1]
    return as_points(pts, dimension), dimension


class CategoricalProposal(Proposal):
    """Probability mass function on a finite set of atoms."""

    def __init__(self, points, probs, label: str = "categorical", dimension: Optional[int] = None):
        pts, dim = atom_points(points, dimension)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (pts.shape[0],) or np.any(probs < 0) or not probs.sum() > 0:
            raise ValueError("probs must be nonnegative, one per atom, with positive total")
        self.points = pts
        self.dimension = dim
        self.probs = probs / probs.sum()
        self.label = label
        self.index = _AtomIndex(pts, dim)
        with np.errstate(divide="ignore"):
            self._logp = np.log(self.probs)
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0
        if dim == 1:
            order = np.argsort(pts, kind="stable")
            self._sorted_pts = pts[order]
            self._sorted_cum = np.cumsum(self.probs[order])
            self._sorted_cum[-1] = 1.0

    def logpdf(self, x):
        k = self.index.find(x)
        return np.where(k >= 0, self._logp[np.maximum(k, 0)], -np.inf)

    def sample(self, rng, n):
        k = np.searchsorted(self.cum, open_uniform(rng, n), side="left")
        return self.points[np.minimum(k, self.probs.size - 1)]

    def cdf(self, x):
        if self.dimension != 1:
            raise NotImplementedError("cdf needs 1-d atoms")
        x = as_points(x, 1)
        k = np.searchsorted(self._sorted_pts, x, side="right")
        return np.where(k > 0, self._sorted_cum[np.maximum(k - 1, 0)], 0.0)

    def ppf(self, u):
        if self.dimension != 1:
            raise NotImplementedError("ppf needs 1-d atoms")
        k = np.searchsorted(self._sorted_cum, np.asarray(u, dtype=float), side="left")
        return self._sorted_pts[np.minimum(k, self._sorted_pts.size - 1)]


class MixtureProposal(Proposal):
    """Finite mixture; components with zero weight are never evaluated or sampled."""

    def __init__(self, components: Sequence[Proposal], weights, label: Optional[str] = None):
        weights = np.asarray(weights, dtype=float)
        if len(components) != weights.size or np.any(weights < 0) or not weights.sum() > 0:
            raise ValueError("one nonnegative weight per component, positive total")
        dims = {c.dimension for c in components}
        if len(dims) != 1:
            raise ValueError("components must share a dimension")
        self.components = list(components)
        self.weights = weights / weights.sum()
        self.dimension = dims.pop()
        self.label = label or "mix(" + ",".join(c.label for c in components) + ")"
        self._active = [i for i, w in enumerate(self.weights) if w > 0]

    def logpdf(self, x):
        if len(self._active) == 1:
            return self.components[self._active[0]].logpdf(x)
        terms = [math.log(self.weights[i]) + self.components[i].logpdf(x) for i in self._active]
        return special.logsumexp(np.vstack(terms), axis=0)

    def sample(self, rng, n):
        if len(self._active) == 1:
            return self.components[self._active[0]].sample(rng, n)
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        labels = np.minimum(np.searchsorted(cum, open_uniform(rng, n), side="left"), len(cum) - 1)
        shape = (n,) if self.dimension == 1 else (n, self.dimension)
        out = np.empty(shape)
        for i in self._active:
            sel = labels == i
            m = int(sel.sum())
            if m:
                out[sel] = self.components[i].sample(rng, m)
        return out

    def cdf(self, x):
        return sum(self.weights[i] * self.components[i].cdf(x) for i in self._active)

    def ppf(self, u, iterations: int = 100):
        u = np.asarray(u, dtype=float)
        if len(self._active) == 1:
            return self.components[self._active[0]].ppf(u)
        # the mixture quantile lies between the component quantiles at the same level
        qs = np.vstack([self.components[i].ppf(u) for i in self._active])
        lo, hi = qs.min(axis=0), qs.max(axis=0)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
                break
        return hi

    def breakpoints(self):
        pts = [self.components[i].breakpoints() for i in self._active]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)


COUPLINGS = ("identity", "independent", "comonotone", "antithetic")


class CoupledProposal:
    """Joint sampler for pairs (x, z) with marginals ``q1`` and ``q2``.

    ``identity`` sets z = x (needs q1 and q2 to be the same distribution),
    ``independent`` draws them from separate streams, and ``comonotone`` /
    ``antithetic`` push one shared uniform u through ``q1.ppf(u)`` and
    ``q2.ppf(u)`` or ``q2.ppf(1 - u)``.
    """

    def __init__(self, q1: Proposal, q2: Proposal, coupling: str = "independent"):
        if coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if q1.dimension != q2.dimension:
            raise ValueError("marginals must share a dimension")
        if coupling == "identity" and q1 is not q2:
            raise ValueError("identity coupling needs q1 is q2")
        if coupling in ("comonotone", "antithetic") and q1.dimension != 1:
            raise ValueError("quantile couplings are 1-d only")
        self.q1, self.q2, self.coupling = q1, q2, coupling
        self.dimension = q1.dimension

    def sample(self, stream: RandomStream, n: int):
        stream = as_stream(stream)
        if self.coupling == "identity":
            x = self.q1.sample(stream.spawn("q1").generator, n)
            return x, x
        if self.coupling == "independent":
            return (self.q1.sample(stream.spawn("q1").generator, n),
                    self.q2.sample(stream.spawn("q2").generator, n))
        u = open_uniform(stream.spawn("coupling").generator, n)
        v = u if self.coupling == "comonotone" else 1.0 - u
        return self.q1.ppf(u), self.q2.ppf(v)
