"""Replication statistics: stable moments, coverage, RMSE rates and normality checks."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .core import RandomStream, derive_stream, stream_key
from .errors import AllReplicationsFailed, EstimationError
from .problems import oracle_values

Z95 = float(sps.norm.ppf(0.975))
EXACT_RTOL = 1e-10


@dataclass
class RunningMoments:
    """Count, mean and sum of squared deviations, updated by Welford and merged by Chan."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> "RunningMoments":
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        return self

    def extend(self, values) -> "RunningMoments":
        for v in np.asarray(values, dtype=float).ravel():
            self.push(float(v))
        return self

    @classmethod
    def from_values(cls, values) -> "RunningMoments":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            return cls()
        mean = float(v.mean())
        return cls(int(v.size), mean, float(np.sum((v - mean) ** 2)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        n = self.count + other.count
        if n == 0:
            return RunningMoments()
        if self.count == 0:
            return RunningMoments(other.count, other.mean, other.m2)
        if other.count == 0:
            return RunningMoments(self.count, self.mean, self.m2)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count >= 2 else math.nan

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance) if self.count >= 2 else math.nan


@dataclass
class ReplicationRecord:
    index: int
    stream_id: int
    report: object = None
    failure_code: str = ""

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass
class ReplicationSummary:
    estimator_label: str
    n_config: dict
    replications: int
    mean_estimate: float
    empirical_sd: float
    mean_reported_se: float
    coverage_95: float
    failures: int
    ks_statistic: float
    truth: float
    master_seed: int
    records: list = field(default_factory=list, repr=False)

    @property
    def successes(self) -> int:
        return self.replications - self.failures

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.report.estimate for r in self.records if r.ok])

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([_se(r.report) for r in self.records if r.ok])

    @property
    def rmse(self) -> float:
        e = self.estimates - self.truth
        return float(np.sqrt(np.mean(e * e)))

    @property
    def variance_se(self) -> float:
        """Monte Carlo standard error of the empirical variance.

        Uses the fourth central moment, var(s^2) ~ (m4 - s^4) / R.
        """
        e = self.estimates
        c = e - e.mean()
        m4 = float(np.mean(c**4))
        s2 = self.empirical_sd**2
        return math.sqrt(max(m4 - s2 * s2, 0.0) / e.size)

    @property
    def coverage_band(self) -> tuple:
        """Normal-approximation binomial band for nominal 95% at this replication count."""
        half = Z95 * math.sqrt(0.95 * 0.05 / max(self.successes, 1))
        return 0.95 - half, 0.95 + half


def _se(report) -> float:
    se = getattr(report, "std_error", None)
    return math.nan if se is None else float(se)


def covers(estimate: float, std_error: float, truth: float) -> bool:
    """95% Wald interval check; a zero-width interval covers when it hits the truth.

    The exact-hit tolerance is 1e-10 relative to ``max(1, |truth|)``.
    """
    if not math.isfinite(std_error):
        return False
    if std_error == 0.0:
        return abs(estimate - truth) <= EXACT_RTOL * max(1.0, abs(truth))
    return abs(estimate - truth) <= Z95 * std_error


def ks_normality(standardized: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and the standard normal.

    Intended for at least 100 values; all must be finite.
    """
    z = np.asarray(standardized, dtype=float).ravel()
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise ValueError("ks_normality needs a nonempty array of finite values")
    return float(sps.kstest(z, "norm").statistic)


def default_workers() -> int:
    env = os.environ.get("EE_SNIS_WORKERS")
    if env:
        k = int(env)
        if k < 1:
            raise ValueError("EE_SNIS_WORKERS must be a positive integer")
        return k
    return os.cpu_count() or 1


def replication_stream(master_seed: int, index: int, salt: tuple = ()) -> RandomStream:
    return derive_stream(master_seed, stream_key(*salt, index))


def _run_one(estimator, problem, master_seed, index, salt) -> ReplicationRecord:
    stream = replication_stream(master_seed, index, salt)
    try:
        report = estimator(problem, stream)
    except EstimationError as exc:
        return ReplicationRecord(index, stream.stream_id, None, exc.code)
    return ReplicationRecord(index, stream.stream_id, report, "")


def run_replications(problem, estimator: Callable, replications: int, master_seed: int, *,
                     label: str = "", n_config: Optional[dict] = None, truth: Optional[float] = None,
                     workers: Optional[int] = None, salt: tuple = (), start: int = 0) -> ReplicationSummary:
    """Run ``estimator(problem, stream)`` on independent derived streams and summarize.

    Replication ``i`` uses ``derive_stream(master_seed, stream_key(*salt, i))``
    for ``i`` in ``start, ..., start + replications - 1``.  Estimation failures
    (non-existence, zero weight sums) are recorded with their code and left
    out of the moments.  ``truth`` defaults to the oracle mean.

    Raises
    ------
    AllReplicationsFailed
        If no replication produced an estimate.
    """
    if replications < 2:
        raise ValueError("replications must be at least 2")
    if truth is None:
        truth = oracle_values(problem).mu0
    records = collect_replications(problem, estimator, master_seed, start, replications, salt, workers)
    return summarize(records, truth, label=label, n_config=n_config or {}, master_seed=master_seed)


def collect_replications(problem, estimator: Callable, master_seed: int, start: int, count: int,
                         salt: tuple = (), workers: Optional[int] = None) -> list:
    """Per-replication records in index order, failures included."""
    workers = workers or default_workers()
    idx = range(start, start + count)
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda i: _run_one(estimator, problem, master_seed, i, salt), idx))
    return [_run_one(estimator, problem, master_seed, i, salt) for i in idx]


def summarize(records: list, truth: float, *, label: str = "", n_config: Optional[dict] = None,
              master_seed: int = 0) -> ReplicationSummary:
    ok = [r for r in records if r.ok]
    if not ok:
        codes = sorted({r.failure_code for r in records})
        raise AllReplicationsFailed(f"all {len(records)} replications failed ({', '.join(codes)})")
    est = np.array([r.report.estimate for r in ok], dtype=float)
    se = np.array([_se(r.report) for r in ok])
    moments = RunningMoments.from_values(est)
    known = np.isfinite(se)
    coverage = float(np.mean([covers(e, s, truth) for e, s in zip(est[known], se[known])])) if known.any() else math.nan
    positive = known & (se > 0)
    ks = ks_normality((est[positive] - truth) / se[positive]) if positive.any() else math.nan
    return ReplicationSummary(
        estimator_label=label,
        n_config=dict(n_config or {}),
        replications=len(records),
        mean_estimate=moments.mean,
        empirical_sd=moments.sd if moments.count >= 2 else 0.0,
        mean_reported_se=float(se[known].mean()) if known.any() else math.nan,
        coverage_95=coverage,
        failures=len(records) - len(ok),
        ks_statistic=ks,
        truth=float(truth),
        master_seed=master_seed,
        records=list(records),
    )


def rmse_curve(problem, estimator_for_n: Callable, n_grid: Sequence[int], replications: int,
               master_seed: int, truth: Optional[float] = None, workers: Optional[int] = None) -> np.ndarray:
    """RMSE about the truth at each size; ``estimator_for_n(n)`` returns an estimator callable."""
    if truth is None:
        truth = oracle_values(problem).mu0
    out = []
    for n in n_grid:
        summary = run_replications(problem, estimator_for_n(int(n)), replications, master_seed,
                                   truth=truth, workers=workers, salt=("rmse", int(n)))
        out.append(summary.rmse)
    return np.array(out)


def fit_slope(n_grid: Sequence[int], rmse: Sequence[float], truth_scale: float = 1.0) -> float:
    """Least-squares slope of log RMSE on log n; nan when every RMSE is an exact recovery."""
    n = np.asarray(n_grid, dtype=float)
    r = np.asarray(rmse, dtype=float)
    if np.all(r <= EXACT_RTOL * max(1.0, abs(truth_scale))):
        return math.nan
    if np.unique(n).size < 3 or n.max() / n.min() < 100:
        raise ValueError("n_grid needs at least 3 distinct sizes spanning two decades")
    if np.any(r <= 0):
        raise ValueError("cannot take the log of a zero RMSE in a mixed curve")
    return float(np.polyfit(np.log(n), np.log(r), 1)[0])


def rmse_slope(problem, estimator_for_n: Callable, n_grid: Sequence[int], replications: int,
               master_seed: int, truth: Optional[float] = None, workers: Optional[int] = None) -> float:
    """Log-log RMSE rate; about -0.5 for a root-n consistent estimator, nan if exact."""
    if truth is None:
        truth = oracle_values(problem).mu0
    r = rmse_curve(problem, estimator_for_n, n_grid, replications, master_seed, truth, workers)
    return fit_slope(n_grid, r, truth)
