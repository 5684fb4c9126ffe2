"""Command-line front end: configs, estimator/problem registry, CSV output, self-test.

Subcommands::

    eesnis run      --config FILE [--set key=value ...] [--output PATH]
    eesnis compare  --config FILE [--set ...] [--output PATH]
    eesnis sweep    --config FILE --axis {n,epsilon,theta} --grid v1,v2,... [--output PATH]
    eesnis selftest

Exit codes: 0 success, 1 configuration error, 2 experiment failure,
3 self-test failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import derive_stream
from .ee_snis import EeSnisReport, PsiFunction, coupled_ee_snis_estimate, ee_snis_estimate, solve_root
from .errors import AllReplicationsFailed, EmptySide
from .estimators import (
    coupled_snis_estimate,
    dpis_estimate,
    gpois_estimate,
    gtabi_estimate,
    mc_estimate,
    ois_estimate,
    pois_estimate,
    snis_estimate,
    tabi4_estimate,
    tabi_estimate,
)
from .problems import (
    PROBLEMS,
    DefensiveMixtureProposal,
    ProblemSpec,
    default_centering,
    get_problem,
    level_crossings,
    optimal_proposal,
    oracle_values,
    p_mixture,
    p_u_values,
    shaped_mixture,
    snis_optimal_proposal,
)
from .proposals import COUPLINGS, CoupledProposal
from .stats import collect_replications, default_workers, summarize

ESTIMATORS = ("mc", "ois", "snis", "pois", "gpois", "dpis", "tabi", "tabi4", "gtabi",
              "ee_snis", "coupled_ee_snis", "coupled_snis")

# proposal targets per estimator, in the notation of the comparison table
TABLE1 = {
    "mc": "p",
    "ois": "|f|p",
    "snis": "|f-mu0|p",
    "pois": "f_+p;f_-p",
    "gpois": "(f-g)_+p;(f-g)_-p",
    "dpis": "|f|p;p",
    "tabi": "f_+p;f_-p;p",
    "tabi4": "f_+p;f_-p;p;p",
    "gtabi": "(f-g)_+p;(f-g)_-p;p",
    "ee_snis": "(f-mu0)_+p;(f-mu0)_-p",
    "coupled_ee_snis": "(f-mu0)_+p;(f-mu0)_-p(coupled)",
    "coupled_snis": "|f|p;p(coupled)",
}

SIZE_KEYS = ("n", "n_plus", "n_minus", "n1", "n2", "n3", "n4")
SPLIT = ("pois", "gpois", "ee_snis")
SINGLE = ("mc", "ois", "snis", "coupled_ee_snis", "coupled_snis")
MULTI = {"dpis": 2, "tabi": 3, "gtabi": 3, "tabi4": 4}
OPTION_KEYS = {
    "epsilon": tuple(e for e in ESTIMATORS if e != "mc"),
    "theta": ("ee_snis",),
    "coupling": ("coupled_ee_snis", "coupled_snis"),
    "delta": ("ee_snis", "coupled_ee_snis"),
    "share_denominator": ("tabi4",),
}
KNOWN_KEYS = ("problem", "estimator", "estimators", "replications", "seed", "output") + SIZE_KEYS + tuple(OPTION_KEYS)

COLUMNS = ("replication_index", "estimator", "n_plus", "n_minus", "epsilon", "theta", "estimate",
           "std_error", "sigma_plus_hat", "sigma_minus_hat", "theta_star", "f_bar", "f_underbar",
           "unique", "failure_code", "seed")
SUMMARY_COLUMNS = ("axis", "value", "estimator", "n_total", "replications", "failures", "mean_estimate",
                   "empirical_sd", "n_variance", "n_variance_se", "mean_reported_se", "coverage_95",
                   "ks_statistic", "truth")
PILOT_FRACTION = 0.1
THETA_CLIP = (0.05, 0.95)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem_label: str
    estimator: str
    sizes: dict
    replications: int
    master_seed: int
    epsilon: float = 0.05
    theta: object = "auto"
    output_path: str = ""
    coupling: str = "independent"
    delta: float = 0.0
    share_denominator: bool = False
    estimators: tuple = ()
    explicit: frozenset = field(default_factory=frozenset, repr=False)

    def echo(self) -> list:
        """Fully resolved ``key = value`` lines, in a fixed order."""
        lines = [f"problem = {self.problem_label}"]
        if self.estimators:
            lines.append(f"estimators = {','.join(self.estimators)}")
        else:
            lines.append(f"estimator = {self.estimator}")
        lines += [f"{k} = {v}" for k, v in self.sizes.items()]
        lines += [f"replications = {self.replications}", f"seed = {self.master_seed}"]
        names = self.estimators or (self.estimator,)
        if any(e in OPTION_KEYS["epsilon"] for e in names):
            lines.append(f"epsilon = {self.epsilon!r}")
        if any(e in OPTION_KEYS["theta"] for e in names):
            lines.append(f"theta = {self.theta if self.theta == 'auto' else repr(self.theta)}")
        if any(e in OPTION_KEYS["coupling"] for e in names):
            lines.append(f"coupling = {self.coupling}")
        if any(e in OPTION_KEYS["delta"] for e in names):
            lines.append(f"delta = {self.delta!r}")
        if "tabi4" in names:
            lines.append(f"share_denominator = {str(self.share_denominator).lower()}")
        if self.output_path:
            lines.append(f"output = {self.output_path}")
        return lines


def _parse_pairs(text: str) -> dict:
    pairs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {pairs[key][1]})")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        pairs[key] = (value, lineno)
    return pairs


def _typed(pairs, key, kind, check=None, message=""):
    value, lineno = pairs[key]
    try:
        out = kind(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: key {key!r}: cannot parse {value!r} as {kind.__name__}") from None
    if check is not None and not check(out):
        raise ConfigError(f"line {lineno}: key {key!r}: {message} (got {value!r})")
    return out


def _bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(value)


def _size_keys_for(estimator: str, present: set) -> tuple:
    if estimator in SINGLE:
        return ("n",)
    if estimator in SPLIT:
        return ("n",) if "n" in present else ("n_plus", "n_minus")
    return tuple(f"n{i}" for i in range(1, MULTI[estimator] + 1))


def parse_config(text: str, *, compare: bool = False) -> ExperimentConfig:
    """Parse a flat ``key = value`` document (``#`` starts a comment).

    Required keys are problem, estimator, replications, seed and the sizes
    the estimator uses: ``n`` for mc/ois/snis/coupled samplers, ``n`` or
    ``n_plus``+``n_minus`` for pois/gpois/ee_snis, and ``n1``... for
    dpis/tabi/gtabi/tabi4.  Defaults are epsilon = 0.05 and theta = auto.
    With ``compare`` the key ``estimators`` lists several estimators
    and ``n`` is the total budget shared out among each one's samples.

    Raises
    ------
    ConfigError
        Naming the offending key and line.
    """
    pairs = _parse_pairs(text)
    main_key = "estimators" if compare else "estimator"
    other = "estimator" if compare else "estimators"
    if other in pairs:
        raise ConfigError(f"line {pairs[other][1]}: key {other!r} is not valid here; use {main_key!r}")
    for key in ("problem", main_key, "replications", "seed"):
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r}")
    problem = pairs["problem"][0]
    if problem not in PROBLEMS:
        raise ConfigError(f"line {pairs['problem'][1]}: key 'problem': unknown problem {problem!r}; "
                          f"valid: {', '.join(sorted(PROBLEMS))}")
    names = tuple(s.strip() for s in pairs[main_key][0].split(","))
    for name in names:
        if name not in ESTIMATORS:
            raise ConfigError(f"line {pairs[main_key][1]}: key {main_key!r}: unknown estimator {name!r}; "
                              f"valid: {', '.join(ESTIMATORS)}")
    if not compare and len(names) != 1:
        raise ConfigError(f"line {pairs[main_key][1]}: key 'estimator' takes one name")
    present = {k for k in SIZE_KEYS if k in pairs}
    needed = ("n",) if compare else _size_keys_for(names[0], present)
    for key in needed:
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r} for estimator {names[0]!r}")
    for key in present - set(needed):
        raise ConfigError(f"line {pairs[key][1]}: key {key!r} is not used by {'/'.join(names)}")
    sizes = {k: _typed(pairs, k, int, lambda v: v >= 1, "sizes must be positive integers") for k in needed}
    for key, allowed in OPTION_KEYS.items():
        if key in pairs and not any(n in allowed for n in names):
            raise ConfigError(f"line {pairs[key][1]}: key {key!r} is not used by {'/'.join(names)}")
    cfg = ExperimentConfig(
        problem_label=problem,
        estimator=names[0],
        sizes=sizes,
        replications=_typed(pairs, "replications", int, lambda v: v >= 2, "need at least 2 replications"),
        master_seed=_typed(pairs, "seed", int, lambda v: 0 <= v < 2**64, "seed must be a 64-bit unsigned integer"),
        estimators=names if compare else (),
        explicit=frozenset(pairs),
    )
    if "epsilon" in pairs:
        cfg.epsilon = _typed(pairs, "epsilon", float, lambda v: 0.0 <= v < 1.0, "need 0 <= epsilon < 1")
    if "theta" in pairs:
        if "n" not in sizes:
            raise ConfigError(f"line {pairs['theta'][1]}: key 'theta' conflicts with explicit n_plus/n_minus")
        if pairs["theta"][0] != "auto":
            cfg.theta = _typed(pairs, "theta", float, lambda v: 0.0 < v < 1.0, "need 0 < theta < 1 or 'auto'")
    if "coupling" in pairs:
        cfg.coupling = pairs["coupling"][0]
        if cfg.coupling not in COUPLINGS:
            raise ConfigError(f"line {pairs['coupling'][1]}: key 'coupling': unknown {cfg.coupling!r}; "
                              f"valid: {', '.join(COUPLINGS)}")
    if "delta" in pairs:
        cfg.delta = _typed(pairs, "delta", float, math.isfinite, "delta must be finite")
    if "share_denominator" in pairs:
        cfg.share_denominator = _typed(pairs, "share_denominator", _bool)
    if "output" in pairs:
        cfg.output_path = pairs["output"][0]
    return cfg


# ---------------------------------------------------------------- registry

def _side(problem, shape_sign, level, epsilon, label):
    """Defensive mixture around (sign (f - level))_+ p_u; the defensive part alone if that is empty."""
    try:
        return optimal_proposal(problem, "plus" if shape_sign > 0 else "minus", level, epsilon)
    except EmptySide:
        return DefensiveMixtureProposal(problem.defensive, problem.defensive, 1.0, label=f"defensive({label})")


def _centered_side(problem, g, sign, epsilon):
    f = problem.f

    def shape(x):
        return np.maximum(sign * (f(x) - g.g(x)), 0.0) * p_u_values(problem, x)

    try:
        return shaped_mixture(problem, shape, epsilon, label=f"(f-g)_{'+' if sign > 0 else '-'}p")
    except EmptySide:
        return DefensiveMixtureProposal(problem.defensive, problem.defensive, 1.0)


def _abs_f(problem, level, epsilon, label):
    f = problem.f

    def shape(x):
        return np.abs(f(x) - level) * p_u_values(problem, x)

    return shaped_mixture(problem, shape, epsilon, level_crossings(problem, level), label)


@dataclass
class EstimatorSetup:
    """A ready-to-run estimator plus the metadata written to each CSV row."""

    name: str
    run: Callable
    n_plus: Optional[int]
    n_minus: Optional[int]
    epsilon: Optional[float]
    theta: Optional[float]
    n_total: int

    def __call__(self, problem, stream):
        return self.run(problem, stream)


def _shares(n: int, k: int) -> list:
    base = [n // k] * k
    for i in range(n % k):
        base[i] += 1
    return base


def build_estimator(problem: ProblemSpec, name: str, sizes: dict, *, epsilon: float = 0.05,
                    theta: Optional[float] = None, coupling: str = "independent", delta: float = 0.0,
                    share_denominator: bool = False) -> EstimatorSetup:
    """Construct the proposals for ``name`` as epsilon-defensive mixtures and bind the sizes.

    Proposal targets follow ``TABLE1``.  ``sizes`` holds ``n`` or the
    per-sample sizes; for split estimators ``theta`` apportions ``n``.
    """
    f, target, p = problem.f, problem.target, problem.p_sampler
    eps = epsilon
    mu0 = oracle_values(problem).mu0
    n = sizes.get("n")
    n_plus = n_minus = None
    th = None
    if name in SPLIT:
        if n is not None:
            th = 0.5 if theta is None else float(theta)
            n_plus = min(max(int(round(th * n)), 1), n - 1) if n >= 2 else 1
            n_minus = max(n - n_plus, 1)
        else:
            n_plus, n_minus = int(sizes["n_plus"]), int(sizes["n_minus"])
        th = n_plus / (n_plus + n_minus)
    if name in MULTI:
        k = MULTI[name]
        parts = [int(sizes[f"n{i}"]) for i in range(1, k + 1)] if n is None else _shares(n, k)

    if name == "mc":
        run = lambda prob, s: mc_estimate(f, p, n, s)
        eps = None
    elif name == "ois":
        q = _abs_f(problem, 0.0, epsilon, "|f|p")
        run = lambda prob, s: ois_estimate(f, p, q, n, s)
    elif name == "snis":
        q = DefensiveMixtureProposal(snis_optimal_proposal(problem), problem.defensive, epsilon)
        run = lambda prob, s: snis_estimate(f, target, q, n, s)
    elif name == "pois":
        qp, qm = _side(problem, 1, 0.0, epsilon, "f_+p"), _side(problem, -1, 0.0, epsilon, "f_-p")
        run = lambda prob, s: pois_estimate(f, p, qp, qm, n_plus, n_minus, s)
    elif name == "gpois":
        g = default_centering(problem)
        qp, qm = _centered_side(problem, g, 1, epsilon), _centered_side(problem, g, -1, epsilon)
        run = lambda prob, s: gpois_estimate(f, p, g, qp, qm, n_plus, n_minus, s)
    elif name == "dpis":
        q1, q2 = _abs_f(problem, 0.0, epsilon, "|f|p"), p_mixture(problem, epsilon)
        run = lambda prob, s: dpis_estimate(f, target, q1, q2, parts[0], parts[1], s)
    elif name in ("tabi", "tabi4"):
        q1, q2 = _side(problem, 1, 0.0, epsilon, "f_+p"), _side(problem, -1, 0.0, epsilon, "f_-p")
        q3 = p_mixture(problem, epsilon)
        if name == "tabi":
            run = lambda prob, s: tabi_estimate(f, target, q1, q2, q3, *parts, s)
        else:
            q4 = q3 if share_denominator else p_mixture(problem, epsilon)
            if share_denominator:
                parts[3] = parts[2]
            run = lambda prob, s: tabi4_estimate(f, target, q1, q2, q3, q4, parts, s,
                                                 share_denominator=share_denominator)
        n_plus, n_minus = parts[0], parts[1]
    elif name == "gtabi":
        g = default_centering(problem)
        q1, q2 = _centered_side(problem, g, 1, epsilon), _centered_side(problem, g, -1, epsilon)
        q3 = p_mixture(problem, epsilon)
        run = lambda prob, s: gtabi_estimate(f, target, g, q1, q2, q3, parts, s)
        n_plus, n_minus = parts[0], parts[1]
    elif name == "ee_snis":
        qp = _side(problem, 1, mu0 + delta, epsilon, "(f-mu)_+p")
        qm = _side(problem, -1, mu0 + delta, epsilon, "(f-mu)_-p")
        run = lambda prob, s: ee_snis_estimate(f, target, qp, qm, n_plus, n_minus, s)
    elif name == "coupled_ee_snis":
        qp = _side(problem, 1, mu0 + delta, epsilon, "(f-mu)_+p")
        qm = _side(problem, -1, mu0 + delta, epsilon, "(f-mu)_-p")
        joint = CoupledProposal(qp, qm, coupling)
        run = lambda prob, s: coupled_ee_snis_estimate(f, target, joint, n, s)
        n_plus = n_minus = n
    elif name == "coupled_snis":
        q1 = _abs_f(problem, 0.0, epsilon, "|f|p")
        joint = CoupledProposal(q1, p_mixture(problem, epsilon), coupling)
        run = lambda prob, s: coupled_snis_estimate(f, target, joint, n, s)
    else:
        raise ValueError(f"unknown estimator {name!r}; valid: {', '.join(ESTIMATORS)}")
    if n is not None:
        n_total = n
    elif name in SPLIT:
        n_total = n_plus + n_minus
    else:
        n_total = sum(parts)
    return EstimatorSetup(name, run, n_plus, n_minus, eps, th, n_total)


# ---------------------------------------------------------------- running

@dataclass
class RunResult:
    rows: list
    summary: object
    setups: list


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v if v else "none"
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def replication_rows(records, setup: EstimatorSetup, extra: Optional[dict] = None) -> list:
    rows = []
    for rec in records:
        rep = rec.report
        ee = isinstance(rep, EeSnisReport)
        row = {
            "replication_index": rec.index,
            "estimator": setup.name,
            "n_plus": setup.n_plus,
            "n_minus": setup.n_minus,
            "epsilon": setup.epsilon,
            "theta": setup.theta,
            "estimate": rep.estimate if rep is not None else math.nan,
            "std_error": (rep.std_error if rep.std_error is not None else math.nan) if rep is not None else math.nan,
            "sigma_plus_hat": rep.sigma_plus_hat if ee else None,
            "sigma_minus_hat": rep.sigma_minus_hat if ee else None,
            "theta_star": rep.theta_star if ee else None,
            "f_bar": rep.f_bar if ee else None,
            "f_underbar": rep.f_underbar if ee else None,
            "unique": rep.unique if ee else None,
            "failure_code": rec.failure_code,
            "seed": rec.stream_id,
        }
        if extra:
            row.update(extra)
        rows.append(row)
    return rows


def _pilot_theta(records) -> float:
    sp = [r.report.sigma_plus_hat for r in records if r.ok and r.report.sigma_plus_hat is not None]
    sm = [r.report.sigma_minus_hat for r in records if r.ok and r.report.sigma_minus_hat is not None]
    if not sp or not sm:
        return 0.5
    a, b = float(np.mean(sp)), float(np.mean(sm))
    if not a + b > 0:
        return 0.5
    return float(np.clip(a / (a + b), *THETA_CLIP))


def run_experiment(cfg: ExperimentConfig, *, name: Optional[str] = None, sizes: Optional[dict] = None,
                   workers: Optional[int] = None, salt: tuple = ()) -> RunResult:
    """Run one estimator for ``cfg.replications`` replications.

    For EE-SNIS with ``theta = auto`` the first 10% of replications use
    theta = 0.5; the mean pilot sigma-hats then fix theta* (clipped to
    [0.05, 0.95]) for the rest.
    """
    problem = get_problem(cfg.problem_label)
    name = name or cfg.estimator
    sizes = sizes or cfg.sizes
    truth = oracle_values(problem).mu0
    workers = workers or default_workers()
    kwargs = dict(epsilon=cfg.epsilon, coupling=cfg.coupling, delta=cfg.delta,
                  share_denominator=cfg.share_denominator)
    auto = name == "ee_snis" and "n" in sizes and cfg.theta == "auto"
    if auto:
        pilot_reps = max(1, int(math.ceil(PILOT_FRACTION * cfg.replications)))
        pilot_setup = build_estimator(problem, name, sizes, theta=0.5, **kwargs)
        pilot = _collect(problem, pilot_setup, cfg, 0, pilot_reps, workers, salt)
        theta = _pilot_theta(pilot)
        main_setup = build_estimator(problem, name, sizes, theta=theta, **kwargs)
        rest = _collect(problem, main_setup, cfg, pilot_reps, cfg.replications - pilot_reps, workers, salt)
        records = pilot + rest
        rows = replication_rows(pilot, pilot_setup) + replication_rows(rest, main_setup)
        setups = [pilot_setup, main_setup]
    else:
        theta = None if cfg.theta == "auto" or name != "ee_snis" else cfg.theta
        setup = build_estimator(problem, name, sizes, theta=theta, **kwargs)
        records = _collect(problem, setup, cfg, 0, cfg.replications, workers, salt)
        rows = replication_rows(records, setup)
        setups = [setup]
    summary = summarize(records, truth, label=name, n_config=dict(sizes), master_seed=cfg.master_seed)
    return RunResult(rows, summary, setups)


def _collect(problem, setup, cfg, start, count, workers, salt):
    return collect_replications(problem, setup, cfg.master_seed, start, count, salt, workers)


# ---------------------------------------------------------------- output

def emit_csv(rows: Sequence[dict], path, config: Optional[ExperimentConfig] = None,
             columns: Sequence[str] = COLUMNS) -> None:
    """Write ``# key = value`` config echo lines, the header row and one line per row.

    Floats use 17 significant digits, absent values are ``NA`` and the line
    terminator is a single newline.
    """
    lines = []
    if config is not None:
        lines += [f"# {line}" for line in config.echo()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path!s}: {exc.strerror or exc}") from exc


def read_csv(path) -> list:
    """Rows of an emitted CSV as dicts of strings (comment lines skipped)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:] if ln]


def summary_row(summary, n_total: int, axis: str = "", value="", estimator: str = "") -> dict:
    var = summary.empirical_sd**2
    return {
        "axis": axis or "none",
        "value": value,
        "estimator": estimator or summary.estimator_label,
        "n_total": n_total,
        "replications": summary.replications,
        "failures": summary.failures,
        "mean_estimate": summary.mean_estimate,
        "empirical_sd": summary.empirical_sd,
        "n_variance": n_total * var,
        "n_variance_se": n_total * summary.variance_se,
        "mean_reported_se": summary.mean_reported_se,
        "coverage_95": summary.coverage_95,
        "ks_statistic": summary.ks_statistic,
        "truth": summary.truth,
    }


# ---------------------------------------------------------------- subcommands

def _budget_sizes(name: str, n: int) -> dict:
    if name in MULTI:
        return {f"n{i + 1}": s for i, s in enumerate(_shares(n, MULTI[name]))}
    return {"n": n}


def cmd_run(cfg: ExperimentConfig, output: str) -> int:
    result = run_experiment(cfg)
    emit_csv(result.rows, output, cfg)
    s = result.summary
    print(f"{cfg.estimator}: mean={s.mean_estimate:.10g} sd={s.empirical_sd:.4g} "
          f"coverage={s.coverage_95:.3f} failures={s.failures}/{s.replications} -> {output}")
    return 0


def cmd_compare(cfg: ExperimentConfig, output: str) -> int:
    rows = []
    for name in cfg.estimators:
        result = run_experiment(cfg, name=name, sizes=_budget_sizes(name, cfg.sizes["n"]), salt=(name,))
        for row in result.rows:
            row["table1_targets"] = TABLE1[name]
        rows += result.rows
        s = result.summary
        print(f"{name:16s} mean={s.mean_estimate:.10g} sd={s.empirical_sd:.4g} failures={s.failures}")
    emit_csv(rows, output, cfg, COLUMNS + ("table1_targets",))
    return 0


def _sweep_cfg(cfg: ExperimentConfig, axis: str, value: str) -> tuple:
    sizes = dict(cfg.sizes)
    new = ExperimentConfig(**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__})
    if axis == "n":
        if "n" not in sizes:
            raise ConfigError("sweep over n needs a config with key 'n'")
        sizes["n"] = int(value)
        if sizes["n"] < 1:
            raise ConfigError("sweep grid: n must be positive")
    elif axis == "epsilon":
        new.epsilon = float(value)
        if not 0.0 <= new.epsilon < 1.0:
            raise ConfigError("sweep grid: need 0 <= epsilon < 1")
    elif axis == "theta":
        if cfg.estimator != "ee_snis" or "n" not in sizes:
            raise ConfigError("sweep over theta needs estimator ee_snis with key 'n'")
        new.theta = float(value)
        if not 0.0 < new.theta < 1.0:
            raise ConfigError("sweep grid: need 0 < theta < 1")
    new.sizes = sizes
    return new, sizes


def cmd_sweep(cfg: ExperimentConfig, axis: str, grid: Sequence[str], output: str) -> int:
    rows = []
    for value in grid:
        new, sizes = _sweep_cfg(cfg, axis, value)
        result = run_experiment(new, salt=(axis, value))
        n_total = result.setups[-1].n_total
        rows.append(summary_row(result.summary, n_total, axis, float(value), cfg.estimator))
        print(f"{axis}={value}: n*var={rows[-1]['n_variance']:.6g} +- {rows[-1]['n_variance_se']:.2g}")
    emit_csv(rows, output, cfg, SUMMARY_COLUMNS)
    return 0


def selftest(verbose: bool = True) -> bool:
    """Oracle-equivalence and zero-variance checks; True when every case passes."""
    from scipy import optimize

    suites = {}
    rng = derive_stream(2024, 1).generator
    passed = total = 0
    for _ in range(200):
        n1, n2 = rng.integers(1, 30, 2)
        yp, ym = rng.normal(size=n1), rng.normal(size=n2)
        wp = rng.exponential(size=n1) * (rng.random(n1) > 0.2)
        wm = rng.exponential(size=n2) * (rng.random(n2) > 0.2)
        if not (wp.sum() > 0 and wm.sum() > 0):
            continue
        psi = PsiFunction(yp, wp, ym, wm)
        rep = solve_root(psi)
        total += 1
        ok = rep.unique == (psi.f_bar > psi.f_underbar)
        if rep.unique:
            lo, hi = min(yp.min(), ym.min()) - 1, max(yp.max(), ym.max()) + 1
            ref = optimize.bisect(psi.eval_naive, lo, hi, xtol=1e-13, maxiter=200)
            ok = ok and abs(ref - rep.mu_hat) <= 1e-10
        passed += bool(ok)
    suites["root-vs-bisection"] = (passed, total)
    passed = total = 0
    for label in ("discrete-20", "gaussian-x"):
        problem = get_problem(label)
        ov = oracle_values(problem)
        qp = optimal_proposal(problem, "plus", ov.mu0, 0.0)
        qm = optimal_proposal(problem, "minus", ov.mu0, 0.0)
        for i in range(20):
            rep = ee_snis_estimate(problem.f, problem.target, qp, qm, 100, 100, derive_stream(7, i))
            total += 1
            passed += abs(rep.mu_hat - ov.mu0) <= 1e-10 * max(1.0, abs(ov.mu0))
    suites["zero-variance"] = (passed, total)
    passed = total = 0
    for label in sorted(PROBLEMS):
        ov = oracle_values(get_problem(label))
        total += 1
        passed += abs(ov.mu_plus - ov.mu_minus) <= 1e-9 * max(ov.mu_plus, 1e-300)
    suites["oracle-balance"] = (passed, total)
    ok = True
    for name, (p, t) in suites.items():
        if verbose:
            print(f"{name}: {p}/{t} passed")
        ok = ok and p == t
    return ok


def _config_text(args) -> str:
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
    for item in args.set or ():
        text += "\n" + item
    return text


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eesnis", description="EE-SNIS experiment harness")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="extra config line (repeatable)")
        sp.add_argument("--output", help="CSV path (overrides the config key 'output')")
        if name == "sweep":
            sp.add_argument("--axis", required=True, choices=("n", "epsilon", "theta"))
            sp.add_argument("--grid", required=True, help="comma-separated axis values")
    sub.add_parser("selftest")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if selftest() else 3
    try:
        cfg = parse_config(_config_text(args), compare=args.command == "compare")
        output = args.output or cfg.output_path
        if not output:
            raise ConfigError("missing output path (key 'output' or --output)")
        if args.command == "sweep":
            grid = [g.strip() for g in args.grid.split(",") if g.strip()]
            for g in grid:
                try:
                    float(g)
                except ValueError:
                    raise ConfigError(f"--grid: cannot parse {g!r}") from None
            return cmd_sweep(cfg, args.axis, grid, output)
        if args.command == "compare":
            return cmd_compare(cfg, output)
        return cmd_run(cfg, output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except AllReplicationsFailed as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
