"""Adaptive Simpson quadrature, vectorized over the active subintervals."""

from __future__ import annotations

import numpy as np

from .errors import QuadratureFailure


def adaptive_simpson(f, a: float, b: float, breakpoints=(), rtol: float = 1e-10,
                     atol: float = 0.0, max_intervals: int = 2**20) -> float:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson with interval bisection.

    ``f`` is called on 1-d arrays.  Each subinterval is accepted once the
    Simpson/half-Simpson gap is within its width-proportional share of
    ``max(atol, rtol * sum |I_k|)``; accepted pieces get the Richardson
    correction.  ``breakpoints`` inside ``(a, b)`` start the partition so that
    kinks and jumps land on interval ends.

    Raises
    ------
    QuadratureFailure
        If more than ``max_intervals`` subintervals would be needed.
    """
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, breakpoints, rtol, atol, max_intervals)
    bp = np.asarray(breakpoints, dtype=float).ravel()
    bp = bp[(bp > a) & (bp < b)]
    nodes = np.unique(np.concatenate([[a, b], bp]))

    def F(x):
        return np.asarray(f(x), dtype=float)

    lo, hi = nodes[:-1], nodes[1:]
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = F(lo), F(mid), F(hi)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    total_width = b - a

    done = 0.0
    done_abs = 0.0
    used = lo.size
    while lo.size:
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = F(lm), F(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        halves = left + right
        if not np.all(np.isfinite(halves)):
            raise QuadratureFailure("integrand is not finite on the interval")
        gap = halves - whole
        scale = done_abs + np.abs(halves).sum()
        tol = max(atol, rtol * scale) * (hi - lo) / total_width
        ok = (np.abs(gap) <= 15.0 * tol) | (hi - lo <= 1e-13 * np.maximum(1.0, np.abs(mid)))
        acc = halves[ok] + gap[ok] / 15.0
        done += acc.sum()
        done_abs += np.abs(acc).sum()
        keep = ~ok
        if not np.any(keep):
            break
        used += 2 * int(keep.sum())
        if used > max_intervals:
            raise QuadratureFailure(f"refinement exceeded {max_intervals} subintervals")
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        flo = np.concatenate([flo[keep], fmid[keep]])
        fhi = np.concatenate([fmid[keep], fhi[keep]])
        fmid = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        mid = 0.5 * (lo + hi)
    return float(done)
