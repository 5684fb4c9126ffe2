"""
How the defensive weight controls the variance
==============================================

With near-optimal proposals the scaled variance n * var(mu_hat) shrinks as
the defensive weight epsilon goes to zero. The oracle prediction comes from
quadrature of the side variances.
"""

from eesnis import derive_stream, ee_snis_estimate, get_problem, optimal_pair, oracle_values
from eesnis.stats import RunningMoments

problem = get_problem("gaussian-x")
n, reps = 2000, 300

print(f"{'epsilon':>8} {'n*var (MC)':>12} {'n*var (oracle)':>15}")
for eps in (0.5, 0.2, 0.05, 0.01):
    q_plus, q_minus = optimal_pair(problem, eps)
    oracle = oracle_values(problem, q_plus, q_minus)
    m = RunningMoments()
    for i in range(reps):
        m.push(ee_snis_estimate(problem.f, problem.target, q_plus, q_minus, n // 2, n // 2,
                                derive_stream(3, i)).estimate)
    print(f"{eps:8.2f} {n * m.variance:12.5f} {oracle.ee_snis_variance(0.5):15.5f}")
