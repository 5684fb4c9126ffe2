"""Estimating-equation self-normalized importance sampling.

The estimate is the root in mu of

    Psi(mu) = mean_i (y_i+ - mu)_+ w_i+  -  r * mean_i (y_i- - mu)_- w_i-

where the plus sample comes from q_+, the minus sample from q_-, w = p_u / q
and r = c_{q-}/c_{q+} (1 for normalized proposals).  Psi is continuous,
nonincreasing and piecewise linear with kinks at the sampled y values, so it
is stored as sorted breakpoints with running sums and its root is found
exactly by scanning the linear pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    Integrand,
    UnnormalizedTarget,
    WeightedSample,
    as_integrand,
    as_stream,
    check_dimensions,
    draw_weighted_sample,
    weights_from_logs,
)
from .errors import AtBreakpoint, NonExistence
from .proposals import CoupledProposal, Proposal


class PsiFunction:
    """Sample estimating function built from a plus-side and a minus-side sample.

    Only observations with positive weight become breakpoints; zero-weight
    observations still count towards ``n_plus``/``n_minus`` and the variance.
    Values are computed from the weights without the target's constant factor
    and multiplied by ``exp(log_scale)`` on output, so rescaling p_u leaves the
    root untouched.
    """

    def __init__(self, plus_y, plus_w, minus_y, minus_w, ratio: float = 1.0, log_scale: float = 0.0):
        self.plus_y = np.asarray(plus_y, dtype=float)
        self.plus_w = np.asarray(plus_w, dtype=float)
        self.minus_y = np.asarray(minus_y, dtype=float)
        self.minus_w = np.asarray(minus_w, dtype=float)
        if self.plus_y.size == 0 or self.minus_y.size == 0:
            raise ValueError("both samples must be non-empty")
        if self.plus_y.shape != self.plus_w.shape or self.minus_y.shape != self.minus_w.shape:
            raise ValueError("y and w must have matching shapes")
        if np.any(self.plus_w < 0) or np.any(self.minus_w < 0):
            raise ValueError("weights must be nonnegative")
        if not ratio > 0:
            raise ValueError("ratio must be positive")
        self.n_plus = self.plus_y.size
        self.n_minus = self.minus_y.size
        self.ratio = float(ratio)
        self.log_scale = float(log_scale)
        self._scale = math.exp(self.log_scale)

        keep = self.plus_w > 0
        order = np.argsort(self.plus_y[keep], kind="stable")
        self.py = self.plus_y[keep][order]
        pw = self.plus_w[keep][order]
        # suffix sums over y_i+ at or above a position; the empty tail is an exact 0
        self._suf_w = np.append(np.cumsum(pw[::-1])[::-1], 0.0)
        self._suf_wy = np.append(np.cumsum((pw * self.py)[::-1])[::-1], 0.0)

        keep = self.minus_w > 0
        order = np.argsort(self.minus_y[keep], kind="stable")
        self.my = self.minus_y[keep][order]
        mw = self.minus_w[keep][order]
        self._pre_w = np.insert(np.cumsum(mw), 0, 0.0)
        self._pre_wy = np.insert(np.cumsum(mw * self.my), 0, 0.0)

        self.breakpoints = np.unique(np.concatenate([self.py, self.my]))

    @classmethod
    def from_samples(cls, sample_plus: WeightedSample, sample_minus: WeightedSample, ratio: float = 1.0):
        if sample_plus.log_scale != sample_minus.log_scale:
            raise ValueError("both samples must use the same target")
        return cls(sample_plus.y, sample_plus.w_rel, sample_minus.y, sample_minus.w_rel, ratio,
                   sample_plus.log_scale)

    @property
    def f_bar(self) -> Optional[float]:
        return float(self.py[-1]) if self.py.size else None

    @property
    def f_underbar(self) -> Optional[float]:
        return float(self.my[0]) if self.my.size else None

    def _coef(self, k_plus, k_minus):
        a = self._suf_wy[k_plus] / self.n_plus + self.ratio * self._pre_wy[k_minus] / self.n_minus
        b = self._suf_w[k_plus] / self.n_plus + self.ratio * self._pre_w[k_minus] / self.n_minus
        return a, b

    def _eval_rel(self, mu):
        kp = np.searchsorted(self.py, mu, side="right")   # plus terms with y > mu
        km = np.searchsorted(self.my, mu, side="left")    # minus terms with y < mu
        plus = (self._suf_wy[kp] - mu * self._suf_w[kp]) / self.n_plus
        minus = (mu * self._pre_w[km] - self._pre_wy[km]) / self.n_minus
        return plus - self.ratio * minus

    def __call__(self, mu):
        mu_arr = np.asarray(mu, dtype=float)
        out = self._eval_rel(mu_arr) * self._scale
        return float(out) if out.ndim == 0 else out

    def eval_naive(self, mu):
        """Direct O(n) summation; reference for the running-sum evaluation."""
        mu = np.asarray(mu, dtype=float)[..., None]
        plus = np.mean(np.maximum(self.plus_y - mu, 0.0) * self.plus_w, axis=-1)
        minus = np.mean(np.maximum(mu - self.minus_y, 0.0) * self.minus_w, axis=-1)
        out = (plus - self.ratio * minus) * self._scale
        return float(out) if out.ndim == 0 else out

    def slope(self, mu: float, side: Optional[str] = None) -> float:
        """Derivative of Psi at ``mu``; ``side`` in {None, "left", "right"}.

        Raises ``AtBreakpoint`` when ``mu`` is a kink and no side is given.
        """
        mu = float(mu)
        is_break = self.breakpoints.size and mu == self.breakpoints[
            min(np.searchsorted(self.breakpoints, mu), self.breakpoints.size - 1)]
        if is_break and side is None:
            raise AtBreakpoint(f"Psi is not differentiable at breakpoint {mu!r}")
        if side == "left":
            kp = np.searchsorted(self.py, mu, side="left")
            km = np.searchsorted(self.my, mu, side="left")
        else:
            kp = np.searchsorted(self.py, mu, side="right")
            km = np.searchsorted(self.my, mu, side="right")
        _, b = self._coef(kp, km)
        return -float(b) * self._scale

    def summands(self, mu: float):
        """Per-observation plus and minus terms of Psi at ``mu`` (full weights)."""
        plus = np.maximum(self.plus_y - mu, 0.0) * self.plus_w * self._scale
        minus = np.maximum(mu - self.minus_y, 0.0) * self.minus_w * self._scale
        return plus, minus

    def std_error(self, mu: float) -> float:
        """Standard error of Psi(mu) from independent plus and minus samples."""
        plus, minus = self.summands(mu)
        vp = np.var(plus, ddof=1) if plus.size > 1 else 0.0
        vm = np.var(minus, ddof=1) if minus.size > 1 else 0.0
        return float(math.sqrt(vp / self.n_plus + self.ratio**2 * vm / self.n_minus))


def build_psi(sample_plus: WeightedSample, sample_minus: WeightedSample, ratio: float = 1.0) -> PsiFunction:
    return PsiFunction.from_samples(sample_plus, sample_minus, ratio)


def psi_eval(psi: PsiFunction, mu):
    return psi(mu)


def psi_derivative(psi: PsiFunction, mu: float, side: Optional[str] = None) -> float:
    return psi.slope(mu, side)


@dataclass
class EeSnisReport:
    mu_hat: float
    psi_at_root: float
    f_bar: Optional[float]
    f_underbar: Optional[float]
    unique: bool
    root_interval: Optional[tuple]
    psi_dot_at_root: float
    n_plus: int
    n_minus: int
    sigma_plus_hat: float = math.nan
    sigma_minus_hat: float = math.nan
    std_error: float = math.nan
    theta_star: float = math.nan
    covariance: Optional[float] = None
    degenerate_variance: bool = False
    # running-sum coefficients of the piece hosting the root, Psi = scale * (A - B mu)
    segment: Optional[tuple] = None

    @property
    def estimate(self) -> float:
        return self.mu_hat

    @property
    def n_total(self) -> int:
        return self.n_plus + self.n_minus


def solve_root(psi: PsiFunction) -> EeSnisReport:
    """Exact root of the piecewise-linear estimating function.

    Raises ``NonExistence`` when either side carries no positive weight.
    When the largest plus-side value does not exceed the smallest minus-side
    value, Psi vanishes on that whole interval; its midpoint is returned with
    ``unique=False``.
    """
    f_bar, f_under = psi.f_bar, psi.f_underbar
    if f_bar is None or f_under is None:
        side = "plus" if f_bar is None else "minus"
        raise NonExistence(f"no positive weight on the {side} side; Psi has no sign change")
    scale = psi._scale
    if not f_bar > f_under:
        mu = 0.5 * (f_bar + f_under)
        return EeSnisReport(mu, psi(mu), f_bar, f_under, False, (f_bar, f_under), 0.0,
                            psi.n_plus, psi.n_minus)

    b = psi.breakpoints
    v = psi._eval_rel(b)
    nonpos = np.flatnonzero(v <= 0.0)
    if nonpos.size and v[nonpos[0]] == 0.0:
        k = nonpos[0]
        mu = float(b[k])
        # slope of the piece to the left of the breakpoint root
        a, bb = psi._coef(np.searchsorted(psi.py, mu, side="left"), np.searchsorted(psi.my, mu, side="left"))
    else:
        if nonpos.size:
            k = nonpos[0]
            lo = b[k - 1] if k > 0 else -np.inf
            hi = b[k]
            kp = np.searchsorted(psi.py, hi, side="left")
            km = np.searchsorted(psi.my, hi, side="left")
        else:
            lo, hi = b[-1], np.inf
            kp = psi.py.size
            km = psi.my.size
        a, bb = psi._coef(kp, km)
        mu = float(np.clip(a / bb, lo, hi))
    return EeSnisReport(mu, psi(mu), f_bar, f_under, True, None, -float(bb) * scale,
                        psi.n_plus, psi.n_minus, segment=(float(a), float(bb)))


def sandwich_variance(psi: PsiFunction, mu_hat: float, psi_dot: Optional[float] = None):
    """Plug-in sandwich standard error of the root.

    Returns ``(sigma_plus_hat, sigma_minus_hat, std_error, theta_star)``.  The
    sigma hats are sample sds of the plus and minus summands of Psi at the
    root; the denominator is |Psi'| at the root, which stands in for c_p.  When
    both sigma hats vanish the standard error is 0 and theta_star is 0.5.
    """
    if psi_dot is None:
        psi_dot = psi.slope(mu_hat, side="left")
    plus, minus = psi.summands(mu_hat)
    sp = float(np.std(plus, ddof=1)) if plus.size > 1 else 0.0
    sm = float(np.std(minus, ddof=1)) if minus.size > 1 else 0.0
    sm_eff = psi.ratio * sm
    num = math.sqrt(sp**2 / psi.n_plus + sm_eff**2 / psi.n_minus)
    if sp + sm_eff == 0.0:
        return sp, sm, 0.0, 0.5
    se = num / abs(psi_dot) if psi_dot != 0.0 else math.inf
    return sp, sm, se, sp / (sp + sm_eff)


def _with_variance(report: EeSnisReport, psi: PsiFunction) -> EeSnisReport:
    if not report.unique:
        return report
    sp, sm, se, theta = sandwich_variance(psi, report.mu_hat, report.psi_dot_at_root)
    return replace(report, sigma_plus_hat=sp, sigma_minus_hat=sm, std_error=se, theta_star=theta,
                   degenerate_variance=(sp == 0.0 and sm == 0.0))


def ee_snis_estimate(f, target: UnnormalizedTarget, q_plus: Proposal, q_minus: Proposal,
                     n_plus: int, n_minus: int, stream, ratio: float = 1.0) -> EeSnisReport:
    """EE-SNIS estimate of E_p f from independent samples of q_plus and q_minus.

    The caller is responsible for the support condition: q_+ must be positive
    wherever (f - mu)_+ p_u > 0 and q_- wherever (f - mu)_- p_u > 0, for all
    mu near the true mean.  Defensive mixtures from ``problems`` provide it.
    ``ratio`` is c_{q-}/c_{q+} for unnormalized proposals.
    """
    f = as_integrand(f, target.dimension)
    check_dimensions(f, target, q_plus, q_minus)
    stream = as_stream(stream)
    s_plus = draw_weighted_sample(target, f, q_plus, n_plus, stream.spawn("plus"))
    s_minus = draw_weighted_sample(target, f, q_minus, n_minus, stream.spawn("minus"))
    psi = build_psi(s_plus, s_minus, ratio)
    return _with_variance(solve_root(psi), psi)


def coupled_ee_snis_estimate(f, target: UnnormalizedTarget, joint: CoupledProposal, n: int, stream,
                             ratio: float = 1.0) -> EeSnisReport:
    """EE-SNIS with n jointly drawn pairs (x_i+, x_i-); marginals are joint.q1, joint.q2.

    The standard error uses the paired variance
    sigma_+^2 + r^2 sigma_-^2 - 2 r cov(plus term, minus term).
    """
    f = as_integrand(f, target.dimension)
    check_dimensions(f, target, joint)
    xp, xm = joint.sample(as_stream(stream), int(n))
    wp = weights_from_logs(np.asarray(target.log_kernel(xp), dtype=float), joint.q1.logpdf(xp))
    wm = weights_from_logs(np.asarray(target.log_kernel(xm), dtype=float), joint.q2.logpdf(xm))
    psi = PsiFunction(f(xp), wp, f(xm), wm, ratio, target.log_scale)
    report = solve_root(psi)
    if not report.unique:
        return report
    plus, minus = psi.summands(report.mu_hat)
    r = psi.ratio
    if n > 1:
        vp, vm = np.var(plus, ddof=1), np.var(minus, ddof=1)
        cov = float(np.cov(plus, minus, ddof=1)[0, 1])
    else:
        vp = vm = cov = 0.0
    paired = max(vp + r * r * vm - 2.0 * r * cov, 0.0)
    sp, sm = math.sqrt(vp), math.sqrt(vm)
    se = math.sqrt(paired / n) / abs(report.psi_dot_at_root)
    theta = sp / (sp + r * sm) if sp + r * sm > 0 else 0.5
    return replace(report, sigma_plus_hat=sp, sigma_minus_hat=sm, std_error=se, theta_star=theta,
                   covariance=cov, degenerate_variance=(paired == 0.0))


def recenter(f, g0) -> Integrand:
    """The integrand f - g0 for a g0 with known mean zero under p."""
    f = as_integrand(f)
    g0 = as_integrand(g0, f.dimension)
    return f - g0
