"""Reference estimators of E_p f: plain MC, OIS, SNIS and their split variants.

Every estimator takes one parent ``RandomStream`` and draws each constituent
sample from a child stream named after its role (``"q1"`` ... ``"q4"``,
``"plus"``, ``"minus"``).  Two estimators that share a role therefore see the
same draws, which is what makes e.g. identity-coupled SNIS and plain SNIS
agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    Integrand,
    RandomStream,
    UnnormalizedTarget,
    as_integrand,
    as_stream,
    check_dimensions,
    draw_weighted_sample,
    effective_sample_size,
    weights_from_logs,
)
from .errors import ZeroWeightSum
from .proposals import CoupledProposal, Proposal

BOOTSTRAP_RESAMPLES = 200


@dataclass
class EstimatorReport:
    estimate: float
    std_error: Optional[float]
    n_total: int
    diagnostics: dict = field(default_factory=dict)
    label: str = ""


@dataclass(frozen=True)
class CenteringFunction:
    """A function g with known mean ``theta`` = E_p g(x)."""

    g: Integrand
    theta: float


def split_budget(n: int) -> tuple[int, int]:
    """n_plus = floor(n/2), n_minus = ceil(n/2)."""
    return n // 2, n - n // 2


def _mean_se(values: np.ndarray):
    n = values.size
    mean = float(np.mean(values))
    if n < 2:
        return mean, None
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        raise ZeroWeightSum("denominator average is zero")
    return num / den


def _finish(estimate, se, n_total, label, diagnostics):
    if se is None:
        diagnostics["std_error_undefined"] = 1.0
    return EstimatorReport(float(estimate), se, int(n_total), diagnostics, label)


def mc_estimate(f, p_sampler: Proposal, n: int, stream) -> EstimatorReport:
    """Average of f over ``n`` draws from a sampleable, normalized p."""
    f = as_integrand(f, p_sampler.dimension)
    x = p_sampler.sample(as_stream(stream).spawn("q1").generator, int(n))
    est, se = _mean_se(f(x))
    return _finish(est, se, n, "mc", {})


def _ois_terms(h: Integrand, p: Proposal, q: Proposal, n: int, stream: RandomStream):
    x = q.sample(stream.generator, int(n))
    w = weights_from_logs(p.logpdf(x), q.logpdf(x))
    return h(x) * w, w


def ois_estimate(f, p: Proposal, q: Proposal, n: int, stream) -> EstimatorReport:
    """Ordinary importance sampling with a normalized target density ``p``.

    The standard error is the plug-in sd of the summands f p / q over sqrt(n).
    """
    f = as_integrand(f, p.dimension)
    check_dimensions(f, p, q)
    terms, w = _ois_terms(f, p, q, n, as_stream(stream).spawn("q1"))
    est, se = _mean_se(terms)
    return _finish(est, se, n, "ois", {"ess": effective_sample_size(w)})


def _positive(h: Integrand) -> Integrand:
    return Integrand(lambda x: np.maximum(h(x), 0.0), h.dimension, f"({h.label})+")


def _negative(h: Integrand) -> Integrand:
    return Integrand(lambda x: np.maximum(-h(x), 0.0), h.dimension, f"({h.label})-")


def _resolve_split(n_plus, n_minus, n):
    if n is not None:
        if n_plus is not None or n_minus is not None:
            raise ValueError("give either n or (n_plus, n_minus)")
        return split_budget(int(n))
    if n_plus is None or n_minus is None:
        raise ValueError("need n_plus and n_minus (or a single n)")
    return int(n_plus), int(n_minus)


def _pois_core(h: Integrand, p, q_plus, q_minus, n_plus, n_minus, stream, label, shift=0.0):
    stream = as_stream(stream)
    tp, wp = _ois_terms(_positive(h), p, q_plus, n_plus, stream.spawn("plus"))
    tm, wm = _ois_terms(_negative(h), p, q_minus, n_minus, stream.spawn("minus"))
    mp, sp = _mean_se(tp)
    mm, sm = _mean_se(tm)
    se = None if sp is None or sm is None else math.hypot(sp, sm)
    diag = {"ess_plus": effective_sample_size(wp), "ess_minus": effective_sample_size(wm),
            "mean_plus": mp, "mean_minus": mm}
    return _finish(mp - mm + shift, se, n_plus + n_minus, label, diag)


def pois_estimate(f, p: Proposal, q_plus: Proposal, q_minus: Proposal,
                  n_plus: Optional[int] = None, n_minus: Optional[int] = None,
                  stream=0, *, n: Optional[int] = None) -> EstimatorReport:
    """Positivised OIS: OIS of f_+ under q_plus minus OIS of f_- under q_minus."""
    f = as_integrand(f, p.dimension)
    check_dimensions(f, p, q_plus, q_minus)
    n_plus, n_minus = _resolve_split(n_plus, n_minus, n)
    return _pois_core(f, p, q_plus, q_minus, n_plus, n_minus, stream, "pois")


def gpois_estimate(f, p: Proposal, g: CenteringFunction, q_plus: Proposal, q_minus: Proposal,
                   n_plus: Optional[int] = None, n_minus: Optional[int] = None,
                   stream=0, *, n: Optional[int] = None) -> EstimatorReport:
    """POIS applied to f - g, plus the known mean of g."""
    f = as_integrand(f, p.dimension)
    check_dimensions(f, g.g, p, q_plus, q_minus)
    n_plus, n_minus = _resolve_split(n_plus, n_minus, n)
    return _pois_core(f - g.g, p, q_plus, q_minus, n_plus, n_minus, stream, "gpois", g.theta)


def snis_estimate(f, target: UnnormalizedTarget, q: Proposal, n: int, stream) -> EstimatorReport:
    """Self-normalized IS with the delta-method standard error."""
    s = draw_weighted_sample(target, f, q, n, as_stream(stream).spawn("q1"))
    est = _ratio(np.mean(s.y * s.w_rel), np.mean(s.w_rel))
    sw = s.w_rel.sum()
    se = float(math.sqrt(np.sum((s.w_rel * (s.y - est)) ** 2)) / sw) if s.n >= 2 else None
    diag = {"ess": s.ess(), "mean_weight": float(np.mean(s.w))}
    return _finish(est, se, n, "snis", diag)


def _bootstrap_se(groups: Sequence[Sequence[np.ndarray]], statistic: Callable, stream: RandomStream,
                  resamples: int = BOOTSTRAP_RESAMPLES) -> Optional[float]:
    """Nonparametric bootstrap sd of ``statistic(means)``.

    ``groups`` holds one entry per independent constituent sample; each entry
    is a list of equal-length term vectors resampled with shared indices.
    ``statistic`` maps the flat list of resampled means to an estimate.
    """
    if resamples < 2:
        return None
    rng = stream.generator
    means = []
    for terms in groups:
        n = terms[0].size
        chunk = max(1, 2_000_000 // max(n, 1))
        cols = [np.empty(resamples) for _ in terms]
        for start in range(0, resamples, chunk):
            stop = min(resamples, start + chunk)
            idx = rng.integers(0, n, size=(stop - start, n))
            for c, t in zip(cols, terms):
                c[start:stop] = t[idx].mean(axis=1)
        means.extend(cols)
    with np.errstate(divide="ignore", invalid="ignore"):
        stats = statistic(means)
    stats = stats[np.isfinite(stats)]
    if stats.size < 2:
        return None
    return float(np.std(stats, ddof=1))


def dpis_estimate(f, target: UnnormalizedTarget, q1: Proposal, q2: Proposal, n1: int, n2: int,
                  stream, *, bootstrap: int = BOOTSTRAP_RESAMPLES) -> EstimatorReport:
    """Double-proposal ratio: mean f p_u / q1 over S1 divided by mean p_u / q2 over S2."""
    stream = as_stream(stream)
    s1 = draw_weighted_sample(target, f, q1, n1, stream.spawn("q1"))
    s2 = draw_weighted_sample(target, f, q2, n2, stream.spawn("q2"))
    num_terms = s1.y * s1.w_rel
    den = float(np.mean(s2.w_rel))
    est = _ratio(float(np.mean(num_terms)), den)
    se = _bootstrap_se([[num_terms], [s2.w_rel]], lambda m: m[0] / m[1], stream.spawn("bootstrap"), bootstrap)
    diag = {"ess_q1": s1.ess(), "ess_q2": s2.ess(), "denominator": den * math.exp(s2.log_scale)}
    return _finish(est, se, n1 + n2, "dpis", diag)


def _tabi_parts(h: Integrand, target, q1, q2, n1, n2, stream):
    s1 = draw_weighted_sample(target, h, q1, n1, stream.spawn("q1"))
    s2 = draw_weighted_sample(target, h, q2, n2, stream.spawn("q2"))
    return np.maximum(s1.y, 0.0) * s1.w_rel, np.maximum(-s2.y, 0.0) * s2.w_rel, s1, s2


def tabi_estimate(f, target: UnnormalizedTarget, q1: Proposal, q2: Proposal, q3: Proposal,
                  n1: int, n2: int, n3: int, stream, *,
                  bootstrap: int = BOOTSTRAP_RESAMPLES) -> EstimatorReport:
    """Positivised numerator (f_+ under q1, f_- under q2) over a q3 denominator."""
    f = as_integrand(f, target.dimension)
    return _tabi_core(f, target, q1, q2, q3, n1, n2, n3, stream, bootstrap, 0.0, "tabi")


def _tabi_core(h, target, q1, q2, q3, n1, n2, n3, stream, bootstrap, shift, label):
    stream = as_stream(stream)
    tp, tm, s1, s2 = _tabi_parts(h, target, q1, q2, n1, n2, stream)
    s3 = draw_weighted_sample(target, h, q3, n3, stream.spawn("q3"))
    den = float(np.mean(s3.w_rel))
    # P/D - N/D rather than (P - N)/D so that a shared denominator in the
    # four-proposal form reproduces this value exactly
    est = _ratio(float(np.mean(tp)), den) - _ratio(float(np.mean(tm)), den) + shift
    se = _bootstrap_se([[tp], [tm], [s3.w_rel]], lambda m: m[0] / m[2] - m[1] / m[2],
                       stream.spawn("bootstrap"), bootstrap)
    diag = {"ess_q1": s1.ess(), "ess_q2": s2.ess(), "ess_q3": s3.ess(),
            "denominator": den * math.exp(s3.log_scale)}
    return _finish(est, se, n1 + n2 + n3, label, diag)


def tabi4_estimate(f, target: UnnormalizedTarget, q1: Proposal, q2: Proposal, q3: Proposal, q4: Proposal,
                   sizes: Sequence[int], stream, *, share_denominator: bool = False,
                   bootstrap: int = BOOTSTRAP_RESAMPLES) -> EstimatorReport:
    """f_+ part over its own q3 denominator minus f_- part over a q4 denominator.

    With ``share_denominator`` the q3 sample serves both denominators (q4
    must be q3 and n4 equal n3).
    """
    f = as_integrand(f, target.dimension)
    n1, n2, n3, n4 = (int(s) for s in sizes)
    stream = as_stream(stream)
    tp, tm, s1, s2 = _tabi_parts(f, target, q1, q2, n1, n2, stream)
    s3 = draw_weighted_sample(target, f, q3, n3, stream.spawn("q3"))
    if share_denominator:
        if q4 is not q3 or n4 != n3:
            raise ValueError("a shared denominator needs q4 is q3 and n4 == n3")
        s4 = s3
        groups = [[tp], [tm], [s3.w_rel]]
        stat = lambda m: m[0] / m[2] - m[1] / m[2]
        n_total = n1 + n2 + n3
    else:
        s4 = draw_weighted_sample(target, f, q4, n4, stream.spawn("q4"))
        groups = [[tp], [tm], [s3.w_rel], [s4.w_rel]]
        stat = lambda m: m[0] / m[2] - m[1] / m[3]
        n_total = n1 + n2 + n3 + n4
    d3, d4 = float(np.mean(s3.w_rel)), float(np.mean(s4.w_rel))
    est = _ratio(float(np.mean(tp)), d3) - _ratio(float(np.mean(tm)), d4)
    se = _bootstrap_se(groups, stat, stream.spawn("bootstrap"), bootstrap)
    diag = {"ess_q1": s1.ess(), "ess_q2": s2.ess(), "ess_q3": s3.ess(), "ess_q4": s4.ess()}
    return _finish(est, se, n_total, "tabi4", diag)


def gtabi_estimate(f, target: UnnormalizedTarget, g: CenteringFunction, q1: Proposal, q2: Proposal,
                   q3: Proposal, sizes: Sequence[int], stream, *,
                   bootstrap: int = BOOTSTRAP_RESAMPLES) -> EstimatorReport:
    """TABI applied to f - g, plus the known mean of g."""
    f = as_integrand(f, target.dimension)
    check_dimensions(f, g.g, target)
    n1, n2, n3 = (int(s) for s in sizes)
    h = f - g.g
    return _tabi_core(h, target, q1, q2, q3, n1, n2, n3, stream, bootstrap, g.theta, "gtabi")


def _coupled_weights(target, f, joint: CoupledProposal, n, stream):
    x, z = joint.sample(stream, int(n))
    w1 = weights_from_logs(np.asarray(target.log_kernel(x), dtype=float), joint.q1.logpdf(x))
    if joint.coupling == "identity":
        w2 = w1
    else:
        w2 = weights_from_logs(np.asarray(target.log_kernel(z), dtype=float), joint.q2.logpdf(z))
    return x, z, f(x), w1, w2


def coupled_snis_estimate(f, target: UnnormalizedTarget, joint: CoupledProposal, n: int, stream, *,
                          bootstrap: int = BOOTSTRAP_RESAMPLES) -> EstimatorReport:
    """Ratio estimator with numerator draws x_i and denominator draws z_i paired by ``joint``."""
    f = as_integrand(f, target.dimension)
    check_dimensions(f, target, joint)
    stream = as_stream(stream)
    _, _, y, w1, w2 = _coupled_weights(target, f, joint, n, stream)
    num_terms = y * w1
    est = _ratio(float(np.mean(num_terms)), float(np.mean(w2)))
    se = _bootstrap_se([[num_terms, w2]], lambda m: m[0] / m[1], stream.spawn("bootstrap"), bootstrap)
    diag = {"ess_q1": effective_sample_size(w1), "ess_q2": effective_sample_size(w2)}
    if n >= 2 and np.std(num_terms) > 0 and np.std(w2) > 0:
        diag["corr_num_den"] = float(np.corrcoef(num_terms, w2)[0, 1])
    return _finish(est, se, n, f"coupled_snis[{joint.coupling}]", diag)


def coupling_objective(joint: CoupledProposal, q1_star: Proposal, q2_star: Proposal, n: int, stream,
                       *, with_se: bool = False):
    """Monte Carlo estimate of E_q[q1*(x) q2*(z) / (q1(x) q2(z))] under the joint sampler.

    Reported for comparison between couplings only; nothing here optimizes it.
    """
    x, z = joint.sample(as_stream(stream), int(n))
    log_terms = q1_star.logpdf(x) + q2_star.logpdf(z) - joint.q1.logpdf(x) - joint.q2.logpdf(z)
    terms = np.exp(log_terms)
    mean, se = _mean_se(terms)
    return (mean, se) if with_se else mean
