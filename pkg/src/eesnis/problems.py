"""Test problems with exact oracles, and optimal / defensive proposals for them.

Discrete problems put p_u on finitely many atoms, so every oracle is an exact
sum.  Continuous problems are 1-d Gaussian targets whose oracles come from
adaptive Simpson quadrature over ``mean +- 10 sd``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .core import (
    Integrand,
    RandomStream,
    UnnormalizedTarget,
    affine_integrand,
    as_integrand,
)
from .errors import DegenerateProblem, EmptySide
from .estimators import CenteringFunction
from .proposals import (
    CategoricalProposal,
    GaussianProposal,
    GaussianRampProposal,
    GridProposal,
    MixtureProposal,
    Proposal,
    _AtomIndex,
    atom_points,
)
from .quadrature import adaptive_simpson

GRID_POINTS = 4096
QUAD_RTOL = 1e-10
GAUSS_HALF_WIDTH = 10.0  # in sd units; mass outside is below 2e-23
DEFENSIVE_SD_FACTOR = 3.0


@dataclass(frozen=True)
class Atoms:
    points: np.ndarray
    masses: np.ndarray
    values: np.ndarray
    index: _AtomIndex = field(repr=False, compare=False)


@dataclass
class ProblemSpec:
    target: UnnormalizedTarget
    f: Integrand
    p_sampler: Optional[Proposal]
    kind: str  # "discrete" or "continuous-1d"
    label: str
    defensive: Proposal
    atoms: Optional[Atoms] = None
    interval: Optional[tuple] = None
    gaussian: Optional[tuple] = None
    degenerate: bool = False

    @property
    def dimension(self) -> int:
        return self.target.dimension

    @property
    def p(self) -> Proposal:
        """The normalized target as a density (oracle problems only)."""
        return self.p_sampler


@dataclass(frozen=True)
class OracleValues:
    mu0: float
    c_p: float
    mu_plus: float
    mu_minus: float
    sigma2: float
    sigma2_plus: Optional[float] = None
    sigma2_minus: Optional[float] = None
    tau2_q: Optional[float] = None

    def ee_snis_variance(self, theta: float) -> float:
        """Asymptotic n var of the root for plus share ``theta`` of a total budget n.

        (sigma2_plus/theta + sigma2_minus/(1-theta)) / c_p^2 with the sigma
        terms in p_u units, as the estimating-equation linearization gives.
        """
        return (self.sigma2_plus / theta + self.sigma2_minus / (1.0 - theta)) / self.c_p**2

    @property
    def theta_star(self) -> float:
        sp, sm = math.sqrt(self.sigma2_plus), math.sqrt(self.sigma2_minus)
        return sp / (sp + sm)


# ---------------------------------------------------------------- constructors

def discrete_problem(atoms: Sequence, label: str = "discrete", allow_degenerate: bool = False,
                     dimension: Optional[int] = None) -> ProblemSpec:
    """Problem on atoms given as ``(point, p_u_mass, f_value)`` triples.

    Points off the atoms have p_u = 0 and f = 0.  The default defensive
    proposal is uniform over the atoms.
    """
    atoms = list(atoms)
    if len(atoms) < 2:
        raise ValueError("need at least 2 atoms")
    pts, dim = atom_points([a[0] for a in atoms], dimension)
    masses = np.array([float(a[1]) for a in atoms])
    values = np.array([float(a[2]) for a in atoms])
    if np.any(masses < 0) or not masses.sum() > 0:
        raise ValueError("masses must be nonnegative with positive total")
    if not np.all(np.isfinite(values)):
        raise ValueError("f values must be finite")
    index = _AtomIndex(pts, dim)
    data = Atoms(pts, masses, values, index)
    with np.errstate(divide="ignore"):
        log_masses = np.log(masses)

    def log_kernel(x):
        k = index.find(x)
        return np.where(k >= 0, log_masses[np.maximum(k, 0)], -np.inf)

    def fvals(x):
        k = index.find(x)
        return np.where(k >= 0, values[np.maximum(k, 0)], 0.0)

    pos = masses > 0
    mu0 = float(np.dot(masses, values) / masses.sum())
    var = float(np.dot(masses[pos], (values[pos] - mu0) ** 2) / masses.sum())
    degenerate = np.unique(values[pos]).size < 2
    if degenerate and not allow_degenerate:
        raise DegenerateProblem("f is constant on the positive-mass atoms")
    target = UnnormalizedTarget(log_kernel, dim, 0.0, label)
    f = Integrand(fvals, dim, "f")
    return ProblemSpec(
        target=target,
        f=f,
        p_sampler=CategoricalProposal(pts, masses, f"p[{label}]", dim),
        kind="discrete",
        label=label,
        defensive=CategoricalProposal(pts, np.ones(len(atoms)), "uniform-atoms", dim),
        atoms=data,
        degenerate=bool(degenerate or var == 0.0),
    )


def gaussian_problem(mean: float, sd: float, f, label: Optional[str] = None) -> ProblemSpec:
    """p_u(x) = exp(-(x - mean)^2 / (2 sd^2)), so c_p = sd sqrt(2 pi)."""
    mean, sd = float(mean), float(sd)
    if not sd > 0:
        raise ValueError("sd must be positive")
    f = as_integrand(f, 1)

    def log_kernel(x):
        z = (x - mean) / sd
        return -0.5 * z * z

    label = label or f"gaussian({mean:g},{sd:g})/{f.label}"
    return ProblemSpec(
        target=UnnormalizedTarget(log_kernel, 1, 0.0, label),
        f=f,
        p_sampler=GaussianProposal(mean, sd),
        kind="continuous-1d",
        label=label,
        defensive=GaussianProposal(mean, DEFENSIVE_SD_FACTOR * sd, label="defensive"),
        interval=(mean - GAUSS_HALF_WIDTH * sd, mean + GAUSS_HALF_WIDTH * sd),
        gaussian=(mean, sd),
    )


def random_discrete_problem(n_atoms: int = 20, seed: int = 20240611, label: Optional[str] = None) -> ProblemSpec:
    """Randomized fixture: atoms at 0..n-1, masses in [0.2, 2], signed f values."""
    rng = RandomStream(seed, 0).generator
    masses = rng.uniform(0.2, 2.0, n_atoms)
    values = np.round(rng.normal(0.5, 2.0, n_atoms), 3)
    atoms = [(float(i), m, v) for i, (m, v) in enumerate(zip(masses, values))]
    return discrete_problem(atoms, label or f"discrete-{n_atoms}")


def two_atom_problem() -> ProblemSpec:
    return discrete_problem([(0.0, 1.0, 1.0), (1.0, 1.0, -1.0)], "discrete-2")


def hole_problem() -> ProblemSpec:
    """Ten atoms, three of them with zero target mass (holes)."""
    masses = [1.0, 0.0, 2.0, 0.5, 0.0, 1.5, 1.0, 0.0, 0.7, 1.2]
    values = [-2.0, 5.0, 1.0, 3.0, -7.0, -0.5, 2.5, 9.0, -1.5, 0.8]
    return discrete_problem([(float(i), m, v) for i, (m, v) in enumerate(zip(masses, values))], "holes")


INTEGRANDS: dict = {
    "x": lambda: affine_integrand(1.0, 0.0, "x"),
    "x2": lambda: Integrand(lambda x: x * x, 1, "x2"),
    "x3m2x": lambda: Integrand(lambda x: x**3 - 2.0 * x, 1, "x3m2x"),
}


def named_gaussian(mean: float, sd: float, integrand: str, label: Optional[str] = None) -> ProblemSpec:
    if integrand not in INTEGRANDS:
        raise KeyError(f"unknown integrand {integrand!r}; known: {sorted(INTEGRANDS)}")
    prob = gaussian_problem(mean, sd, INTEGRANDS[integrand](), label or f"gaussian-{integrand}")
    prob.f = Integrand(prob.f.func, 1, integrand, prob.f.affine)
    return prob


PROBLEMS: dict = {
    "gaussian-x": lambda: named_gaussian(0.0, 1.0, "x", "gaussian-x"),
    "gaussian-x2": lambda: named_gaussian(0.0, 1.0, "x2", "gaussian-x2"),
    "gaussian-x3m2x": lambda: named_gaussian(0.0, 1.0, "x3m2x", "gaussian-x3m2x"),
    "discrete-2": two_atom_problem,
    "discrete-20": random_discrete_problem,
    "holes": hole_problem,
}


def get_problem(label: str) -> ProblemSpec:
    if label not in PROBLEMS:
        raise KeyError(f"unknown problem {label!r}; known: {sorted(PROBLEMS)}")
    return PROBLEMS[label]()


# ---------------------------------------------------------------- oracles

def level_crossings(problem: ProblemSpec, center: float):
    """Points where f - center changes sign, when f is affine (else none known)."""
    aff = problem.f.affine
    if aff is not None and aff[0] != 0.0:
        return [(center - aff[1]) / aff[0]]
    return []


def _integrate(problem: ProblemSpec, fn, breaks=(), atol: float = 0.0) -> float:
    lo, hi = problem.interval
    return adaptive_simpson(fn, lo, hi, breakpoints=breaks, rtol=QUAD_RTOL, atol=atol)


def p_u_values(problem: ProblemSpec, x):
    """The unnormalized target density at ``x``."""
    return np.exp(np.asarray(problem.target.log_kernel(x), dtype=float))


def _basic(problem: ProblemSpec):
    if problem.kind == "discrete":
        a = problem.atoms
        c_p = float(a.masses.sum())
        mu0 = float(np.dot(a.masses, a.values) / c_p)
        return c_p, mu0
    f = problem.f
    c_p = _integrate(problem, lambda x: p_u_values(problem, x))
    if problem.gaussian is not None:
        c_p_exact = problem.gaussian[1] * math.sqrt(2.0 * math.pi)
        c_p = c_p_exact if abs(c_p / c_p_exact - 1.0) < 1e-9 else c_p
    mu0 = _integrate(problem, lambda x: f(x) * p_u_values(problem, x)) / c_p
    return c_p, mu0


def _side_integral(problem: ProblemSpec, q: Proposal, side: int, mu0: float, mu_side: float) -> float:
    """Integral of [(f - mu0)_side p_u - mu_side q]^2 / q; inf on a support violation."""
    if problem.kind == "discrete":
        a = problem.atoms
        num = np.maximum(side * (a.values - mu0), 0.0) * a.masses
        qq = q.pdf(a.points)
        if np.any((qq == 0) & (num > 0)):
            return math.inf
        pos = qq > 0
        return float(np.sum((num[pos] - mu_side * qq[pos]) ** 2 / qq[pos]))
    violated = []

    def integrand(x):
        num = np.maximum(side * (problem.f(x) - mu0), 0.0) * p_u_values(problem, x)
        qq = q.pdf(x)
        bad = (qq == 0) & (num > 0)
        if np.any(bad):
            violated.append(True)
        safe = np.where(qq > 0, qq, 1.0)
        return np.where(qq > 0, (num - mu_side * qq) ** 2 / safe, 0.0)

    breaks = np.concatenate([q.breakpoints(), level_crossings(problem, mu0)])
    # the value is 0 for an exactly optimal q, so a relative tolerance alone cannot terminate
    val = _integrate(problem, integrand, breaks, atol=1e-14 * mu_side**2)
    # outside the oracle interval p_u is negligible and the integrand is mu_side^2 q
    lo, hi = problem.interval
    outside = float(q.cdf(np.array([lo]))[0] + (1.0 - q.cdf(np.array([hi]))[0]))
    return math.inf if violated else val + mu_side**2 * max(outside, 0.0)


def _tau2(problem: ProblemSpec, q: Proposal, c_p: float, mu0: float) -> float:
    """E_q[(p/q)^2 (f - mu0)^2] with the normalized p."""
    if problem.kind == "discrete":
        a = problem.atoms
        p = a.masses / c_p
        num = p * (a.values - mu0)
        qq = q.pdf(a.points)
        if np.any((qq == 0) & (num != 0)):
            return math.inf
        pos = qq > 0
        return float(np.sum(num[pos] ** 2 / qq[pos]))
    violated = []

    def integrand(x):
        num = p_u_values(problem, x) / c_p * (problem.f(x) - mu0)
        qq = q.pdf(x)
        if np.any((qq == 0) & (num != 0)):
            violated.append(True)
        safe = np.where(qq > 0, qq, 1.0)
        return np.where(qq > 0, num * num / safe, 0.0)

    val = _integrate(problem, integrand, np.concatenate([q.breakpoints(), level_crossings(problem, mu0)]))
    return math.inf if violated else val


def oracle_values(problem: ProblemSpec, q_plus: Optional[Proposal] = None, q_minus: Optional[Proposal] = None,
                  q: Optional[Proposal] = None) -> OracleValues:
    """Exact (discrete) or quadrature (continuous) values of the problem constants.

    mu_plus/mu_minus and the sigma^2 terms are in p_u units; tau2_q uses the
    normalized p, so it is the limit of n times the SNIS variance.
    """
    c_p, mu0 = _basic(problem)
    if problem.kind == "discrete":
        a = problem.atoms
        d = a.values - mu0
        mu_plus = float(np.dot(np.maximum(d, 0.0), a.masses))
        mu_minus = float(np.dot(np.maximum(-d, 0.0), a.masses))
        sigma2 = float(np.dot(d * d, a.masses) / c_p)
    else:
        f = problem.f
        kinks = level_crossings(problem, mu0)
        mu_plus = _integrate(problem, lambda x: np.maximum(f(x) - mu0, 0.0) * p_u_values(problem, x), kinks)
        mu_minus = _integrate(problem, lambda x: np.maximum(mu0 - f(x), 0.0) * p_u_values(problem, x), kinks)
        sigma2 = _integrate(problem, lambda x: (f(x) - mu0) ** 2 * p_u_values(problem, x)) / c_p
    s2p = _side_integral(problem, q_plus, +1, mu0, mu_plus) if q_plus is not None else None
    s2m = _side_integral(problem, q_minus, -1, mu0, mu_minus) if q_minus is not None else None
    tau2 = _tau2(problem, q, c_p, mu0) if q is not None else None
    return OracleValues(mu0, c_p, mu_plus, mu_minus, sigma2, s2p, s2m, tau2)


def population_psi(problem: ProblemSpec, mu: float, q_plus: Optional[Proposal] = None,
                   q_minus: Optional[Proposal] = None) -> float:
    """Expected value of the sample estimating function at ``mu``.

    Each side integrates only over the support of its proposal, so with
    proposals that miss part of the target the zero can move away from mu0.
    Without proposals the result is c_p (mu0 - mu).
    """
    mu = float(mu)
    if problem.kind == "discrete":
        a = problem.atoms
        inp = np.ones(a.masses.size, bool) if q_plus is None else q_plus.pdf(a.points) > 0
        inm = np.ones(a.masses.size, bool) if q_minus is None else q_minus.pdf(a.points) > 0
        plus = np.sum(np.maximum(a.values - mu, 0.0) * a.masses * inp)
        minus = np.sum(np.maximum(mu - a.values, 0.0) * a.masses * inm)
        return float(plus - minus)
    f = problem.f

    def support(q, x):
        return 1.0 if q is None else (q.pdf(x) > 0).astype(float)

    breaks = list(level_crossings(problem, mu))
    for q in (q_plus, q_minus):
        if q is not None:
            breaks.extend(q.breakpoints())
    plus = _integrate(problem, lambda x: np.maximum(f(x) - mu, 0.0) * p_u_values(problem, x) * support(q_plus, x), breaks)
    minus = _integrate(problem, lambda x: np.maximum(mu - f(x), 0.0) * p_u_values(problem, x) * support(q_minus, x), breaks)
    return plus - minus


def population_root(problem: ProblemSpec, q_plus: Optional[Proposal] = None,
                    q_minus: Optional[Proposal] = None, bracket: float = 5.0) -> float:
    """Zero of ``population_psi``; equals mu0 when both supports are complete."""
    mu0 = _basic(problem)[1]
    g = lambda m: population_psi(problem, m, q_plus, q_minus)
    return optimize.brentq(g, mu0 - bracket, mu0 + bracket, xtol=1e-12)


def default_centering(problem: ProblemSpec):
    """A centering function with exactly known mean: g(x) = x (first coordinate).

    The mean is E_p x, in closed form for Gaussian problems and an exact
    sum for discrete ones.
    """
    if problem.kind == "discrete":
        a = problem.atoms
        first = a.points if a.points.ndim == 1 else a.points[:, 0]
        theta = float(np.dot(a.masses, first) / a.masses.sum())
        if problem.dimension == 1:
            return CenteringFunction(Integrand(lambda x: np.asarray(x, dtype=float), 1, "x"), theta)
        return CenteringFunction(Integrand(lambda x: np.asarray(x, dtype=float)[..., 0], problem.dimension, "x1"), theta)
    return CenteringFunction(affine_integrand(1.0, 0.0, "x"), problem.gaussian[0])


# ---------------------------------------------------------------- proposals

def proposal_from_shape(problem: ProblemSpec, shape: Callable, kinks=(), label: str = "shaped") -> Proposal:
    """Normalized proposal proportional to the nonnegative function ``shape``.

    Discrete problems get a categorical on the atoms.  Continuous problems
    get a piecewise-constant density on a 4096-point grid fitted to where
    ``shape`` is positive, with ``kinks`` inserted as cell edges.
    """
    if problem.kind == "discrete":
        a = problem.atoms
        vals = np.asarray(shape(a.points), dtype=float)
        if not np.any(vals > 0):
            raise EmptySide(f"{label}: shape is zero on every atom")
        return CategoricalProposal(a.points, vals, label, problem.dimension)
    lo, hi = problem.interval
    scan = np.linspace(lo, hi, GRID_POINTS)
    positive = np.flatnonzero(np.asarray(shape(scan)) > 0)
    if positive.size == 0:
        raise EmptySide(f"{label}: shape vanishes on the oracle interval")
    a = scan[max(positive[0] - 1, 0)]
    b = scan[min(positive[-1] + 1, GRID_POINTS - 1)]
    edges = np.linspace(a, b, GRID_POINTS)
    inner = [k for k in kinks if a < k < b]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    return GridProposal.from_shape(shape, edges, label=label)


class DefensiveMixtureProposal(MixtureProposal):
    """(1 - epsilon) * optimal part + epsilon * defensive part."""

    def __init__(self, optimal_part: Proposal, defensive_part: Proposal, epsilon: float,
                 center: float = math.nan, side: int = 0, label: Optional[str] = None):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.optimal_part = optimal_part
        self.defensive_part = defensive_part
        self.epsilon = float(epsilon)
        self.center = center
        self.side = side
        super().__init__([optimal_part, defensive_part], [1.0 - epsilon, epsilon],
                         label or f"defmix({optimal_part.label},eps={epsilon:g})")


def _exact_ramp(problem: ProblemSpec, sign: int, center: float) -> Optional[Proposal]:
    """Closed-form optimal part for an affine f on a Gaussian centered at f(mean)."""
    if problem.gaussian is None or problem.f.affine is None:
        return None
    a, b = problem.f.affine
    mean, sd = problem.gaussian
    if a == 0.0 or abs(center - (a * mean + b)) > 1e-12 * (1.0 + abs(center)):
        return None
    return GaussianRampProposal(mean, sd, sign if a > 0 else -sign)


def optimal_proposal(problem: ProblemSpec, side: str, center: float, epsilon: float = 0.0,
                     defensive: Optional[Proposal] = None) -> DefensiveMixtureProposal:
    """Defensive mixture around the density proportional to (f - center)_side p_u.

    ``side`` is "plus" or "minus".  With ``epsilon = 0`` the proposal may
    miss part of the target for mu other than ``center``.  For an affine f on
    a Gaussian target centered at its mean the optimal part is exact;
    otherwise it is built on a grid.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    sign = 1 if side == "plus" else -1
    center = float(center)
    part = _exact_ramp(problem, sign, center) if problem.kind != "discrete" else None
    if part is None:
        f = problem.f

        def shape(x):
            return np.maximum(sign * (f(x) - center), 0.0) * p_u_values(problem, x)

        part = proposal_from_shape(problem, shape, level_crossings(problem, center), f"opt{side}({center:g})")
    return DefensiveMixtureProposal(part, defensive or problem.defensive, epsilon, center, sign)


def optimal_pair(problem: ProblemSpec, epsilon: float, center: Optional[float] = None,
                 defensive: Optional[Proposal] = None):
    """(q_plus, q_minus) defensive mixtures centered at ``center`` (default: oracle mu0)."""
    if center is None:
        center = _basic(problem)[1]
    return (optimal_proposal(problem, "plus", center, epsilon, defensive),
            optimal_proposal(problem, "minus", center, epsilon, defensive))


def asymmetric_pair(problem: ProblemSpec, sigma_ratio: float = 3.0, epsilon_minus: float = 0.05,
                    center: Optional[float] = None):
    """Defensive pair whose oracle sigma_plus / sigma_minus equals ``sigma_ratio``.

    The minus side keeps ``epsilon_minus``; the plus-side epsilon is found by
    root finding on the oracle ratio (it grows with epsilon).
    Returns ``(q_plus, q_minus, epsilon_plus)``.
    """
    if center is None:
        center = _basic(problem)[1]
    q_minus = optimal_proposal(problem, "minus", center, epsilon_minus)
    s_minus = math.sqrt(oracle_values(problem, q_minus=q_minus).sigma2_minus)

    def gap(eps):
        q = optimal_proposal(problem, "plus", center, eps)
        return math.sqrt(oracle_values(problem, q_plus=q).sigma2_plus) / s_minus - sigma_ratio

    eps_plus = optimize.brentq(gap, 1e-4, 0.999, xtol=1e-6)
    return optimal_proposal(problem, "plus", center, eps_plus), q_minus, eps_plus


def snis_optimal_proposal(problem: ProblemSpec) -> Proposal:
    """Density proportional to |f - mu0| p, the best single SNIS proposal."""
    _, mu0 = _basic(problem)
    plus = _exact_ramp(problem, 1, mu0) if problem.kind != "discrete" else None
    minus = _exact_ramp(problem, -1, mu0) if problem.kind != "discrete" else None
    if plus is not None and minus is not None:
        # |x - m| phi is symmetric, so each half carries mass 1/2
        return MixtureProposal([plus, minus], [0.5, 0.5], "snis-opt")
    f = problem.f

    def shape(x):
        return np.abs(f(x) - mu0) * p_u_values(problem, x)

    try:
        return proposal_from_shape(problem, shape, level_crossings(problem, mu0), "snis-opt")
    except EmptySide:
        raise DegenerateProblem("f equals its mean with probability one") from None


def shaped_mixture(problem: ProblemSpec, shape: Callable, epsilon: float, kinks=(), label: str = "q",
                   defensive: Optional[Proposal] = None) -> DefensiveMixtureProposal:
    """Defensive mixture around an arbitrary nonnegative target shape."""
    part = proposal_from_shape(problem, shape, kinks, label)
    return DefensiveMixtureProposal(part, defensive or problem.defensive, epsilon, label=f"defmix({label},eps={epsilon:g})")


def p_mixture(problem: ProblemSpec, epsilon: float) -> DefensiveMixtureProposal:
    """Defensive mixture around the normalized target itself."""
    return DefensiveMixtureProposal(problem.p_sampler, problem.defensive, epsilon, label=f"defmix(p,eps={epsilon:g})")


# ---------------------------------------------------------------- text format

def problem_to_text(problem: ProblemSpec) -> str:
    """Key-value serialization (``key = value`` per line) of registry-style problems."""
    lines = [f"label = {problem.label}"]
    if problem.kind == "discrete":
        lines.append("kind = discrete")
        a = problem.atoms
        for pt, m, v in zip(a.points, a.masses, a.values):
            coords = " ".join(repr(float(c)) for c in np.atleast_1d(pt))
            lines.append(f"atom = {coords}, {float(m)!r}, {float(v)!r}")
    else:
        if problem.gaussian is None or problem.f.label not in INTEGRANDS:
            raise ValueError("only Gaussian problems with a named integrand are serializable")
        mean, sd = problem.gaussian
        lines += ["kind = gaussian", f"mean = {mean!r}", f"sd = {sd!r}", f"integrand = {problem.f.label}"]
    return "\n".join(lines) + "\n"


def problem_from_text(text: str) -> ProblemSpec:
    fields: dict = {}
    atoms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "atom":
            parts = [s.strip() for s in value.split(",")]
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: atom needs 'point, mass, f'")
            coords = [float(c) for c in parts[0].split()]
            atoms.append((coords[0] if len(coords) == 1 else coords, float(parts[1]), float(parts[2])))
            continue
        if key in fields:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value
    kind = fields.get("kind")
    label = fields.get("label", kind or "problem")
    if kind == "discrete":
        return discrete_problem(atoms, label)
    if kind == "gaussian":
        return named_gaussian(float(fields["mean"]), float(fields["sd"]), fields["integrand"], label)
    raise ValueError(f"unknown problem kind {kind!r}")
