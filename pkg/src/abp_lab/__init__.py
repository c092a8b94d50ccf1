"""Numerical laboratory for maximum-principle (ABP-type) estimates.

Grid domains, closed-form test functions, rearrangement norms, potential
kernels, a Dirichlet solver, Brownian-motion Monte Carlo and verifiers that
report the empirical constants of several sup-norm inequalities.
"""

__version__ = "0.1.0"
