"""
Monte Carlo cross-check of the verdict
======================================

Simulate many switching paths and compare the accumulated cost at T and 2T.
A stable setting levels off, an unstable one keeps growing.
"""

import numpy as np

from switchstab import load_fixture
from switchstab.sim import estimate_cost, propagate, replica_path
from switchstab.stability import check_stochastic_stability

x0 = np.array([1.0, 0.0])

for d in ([2.0, 0.7], [5.0, 5.0]):
    sys = load_fixture("case3", d)
    v = check_stochastic_stability(sys)
    est = estimate_cost(sys, x0, r0=0, runs=10_000, horizon=200.0, seed=2024, workers=4)
    print(d, "stable" if v.stable else "unstable")
    print("  J(T)  =", est.half_horizon_mean, "+/-", est.half_horizon_std_error)
    print("  J(2T) =", est.mean, "+/-", est.std_error)
    print("  ratio =", est.tail_ratio)

# One path in detail. Replica k of seed s is always the same path.
sys = load_fixture("case3", [2.0, 0.7])
path = replica_path(sys, 0, 20.0, seed=2024, replica=0)
for seg in path.segments[:5]:
    print(seg.mode, round(seg.start, 3), "fixed", seg.fixed, "random", round(seg.random, 3))

traj = propagate(sys, path, x0, sample_dt=0.5)
print(traj.t[:8])
print(np.linalg.norm(traj.x, axis=1)[:8])
