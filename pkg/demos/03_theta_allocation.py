"""
Splitting the budget between the two sides
===========================================

When one side is noisier, sending it the larger share of draws lowers the
variance. The plug-in share theta* = sigma+ / (sigma+ + sigma-) is compared
with an even split.
"""

from eesnis import derive_stream, ee_snis_estimate, get_problem, oracle_values
from eesnis.problems import asymmetric_pair
from eesnis.stats import RunningMoments

problem = get_problem("gaussian-x")
q_plus, q_minus, eps_plus = asymmetric_pair(problem, sigma_ratio=3.0)
oracle = oracle_values(problem, q_plus, q_minus)
s_plus, s_minus = oracle.sigma2_plus**0.5, oracle.sigma2_minus**0.5
theta_star = s_plus / (s_plus + s_minus)
print(f"plus-side epsilon {eps_plus:.4f}, sigma+/sigma- {s_plus / s_minus:.3f}, theta* {theta_star:.3f}")

n, reps = 4000, 400
for theta in (0.5, theta_star):
    n_plus = round(theta * n)
    m = RunningMoments()
    for i in range(reps):
        r = ee_snis_estimate(problem.f, problem.target, q_plus, q_minus, n_plus, n - n_plus, derive_stream(4, i))
        m.push(r.estimate)
    print(f"theta {theta:.3f}: n*var {n * m.variance:.4f} (oracle {oracle.ee_snis_variance(theta):.4f})")
