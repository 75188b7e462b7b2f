"""
Two small analytic facts used when relating the switched system to its jump
system, packaged as executable checks.

``growth_constant`` gives a lower exponential rate for ``||e^{At}x||^2`` and
``exp_integral_expectation`` the mean of ``int_b^{b+X} e^{a t} dt`` for an
exponential ``X``.
"""

import math

import numpy as np

from .matlib import min_eig_sym

__all__ = [
    "growth_constant",
    "exp_integral_expectation",
    "exp_integral_sample",
    "exp_integral_monte_carlo",
]


def growth_constant(A):
    """``lambda_min(A + A^T)``: ``||e^{At}x||^2 >= e^{c t}||x||^2`` for all ``t >= 0``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    return min_eig_sym(A + A.T)


def exp_integral_expectation(lam, a, b):
    """``E int_b^{b+X} e^{a t} dt`` for ``X ~ Exponential(lam)``, ``a < lam``.

    Swapping the order of integration gives ``int_b^inf e^{-lam(t-b)} e^{at} dt
    = e^{ab} / (lam - a)``. At ``a = 0`` this is ``E X = 1/lam`` for every
    ``b``, as it must be.
    """
    if not lam > 0:
        raise ValueError("rate must be positive")
    if not a < lam:
        raise ValueError(f"need a < lam, got a={a}, lam={lam}")
    return math.exp(a * b) / (lam - a)


def exp_integral_sample(x, a, b):
    """``int_b^{b+x} e^{a t} dt`` evaluated in closed form for an array ``x``."""
    x = np.asarray(x, dtype=float)
    if a == 0:
        return x.copy()
    return math.exp(a * b) * np.expm1(a * x) / a


def exp_integral_monte_carlo(lam, a, b, samples, seed):
    """Sample mean and standard error of ``int_b^{b+X} e^{a t} dt``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.exponential(1.0 / lam, size=samples)
    v = exp_integral_sample(x, a, b)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(samples))
