"""
Condition numbers without a preconditioner
==========================================

With the step size tied to the level (tau = T 4**-k) the Crank-Nicolson
matrix of the orthonormal wavelet discretisation stays well conditioned as
the level and the dimension grow.  CG iteration counts stay flat as a
consequence.
"""

from orthowave import cli, model

print(" d  k      N     cond   gamma  bound")
for d, levels in ((1, range(2, 7)), (2, range(2, 6)), (3, range(1, 4))):
    problem = model.table_problem(d)
    for k, N, tau, cond, lo, hi, gamma, bound, _ in cli.condition_study(d, levels, problem):
        print(f"{d:2d} {k:2d} {N:6d}  {cond:7.4f}  {gamma:5.3f}  {bound:6.2f}")

# The iteration counts of the pricing runs follow the same pattern.
for k in range(1, 5):
    row = cli.run_price(cli.ExperimentSpec(d=2, level=k))
    print(f"d=2 table level {k}: max CG iterations per step {row.it_max}, mean {row.it_mean:.1f}")
