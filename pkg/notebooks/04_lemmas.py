"""
The three supporting inequalities, numerically
==============================================

Growth bound for the matrix exponential, the path correspondence with the
jump system, and the expected exponential integral over a random sojourn.
"""

import math

import numpy as np

from switchstab import load_fixture
from switchstab.lemmas import exp_integral_expectation, exp_integral_monte_carlo, growth_constant
from switchstab.matlib import expm
from switchstab.sim import check_path_correspondence, transform_paired_paths

# Growth bound: ||e^{At} x||^2 >= e^{c t} ||x||^2 with c the smallest eigenvalue of A + A'.
A = np.array([[-0.5, 2.0], [0.0, -1.0]])
c = growth_constant(A)
x = np.array([0.0, 1.0])
for t in (0.5, 1.0, 2.0):
    print(t, np.sum((expm(A, t) @ x) ** 2), ">=", math.exp(c * t))

# Removing the fixed dwells and applying e^{A d} on entry reproduces the state.
sys = load_fixture("case2", [1.3, 0.7])
path, jpath = transform_paired_paths(sys, 0, 30.0, np.random.default_rng(0))
print("max deviation", check_path_correspondence(sys, (path, jpath), [1.0, -0.5]))

# E[ int_b^{b+eta} e^{a t} dt ] with eta ~ Exp(lam) equals e^{ab}/(lam - a).
for lam, a, b in [(1.0, 0.0, 2.0), (2.0, 1.0, 1.0), (0.5, -1.0, 2.0)]:
    mean, se = exp_integral_monte_carlo(lam, a, b, 10**6, seed=1)
    print(lam, a, b, exp_integral_expectation(lam, a, b), mean, se)

# With a = 0 the integral is just the sojourn, so the answer has to be 1/lam
# whatever b is. A factor e^{lam b} would give 7.39 at lam = 1, b = 2.
