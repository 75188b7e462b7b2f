"""
Deciding stochastic stability for one dwell-time setting
========================================================

Load a bundled two-mode system, fix the deterministic dwell times, and ask
whether the expected quadratic cost stays finite.
"""

import numpy as np

from switchstab import load_fixture
from switchstab.stability import check_stochastic_stability, verify_certificate

# Case 1: both modes are Hurwitz on their own.
sys = load_fixture("case1", d=[3.0, 3.0])
print(sys.A[0])
print(sys.A[1])

v = check_stochastic_stability(sys)
print(v.stable, v.margin, v.relative_margin)

# The certificate is a list of positive definite matrices, one per mode.
for p in v.certificate.P:
    print(np.round(p, 4), np.linalg.eigvalsh(p))

# Anyone holding the certificate can re-check it independently.
print("re-verified margin", verify_certificate(sys, v.certificate))

# Very fast switching breaks it even though each mode is stable alone.
fast = sys.with_dwell([0.1, 0.5])
w = check_stochastic_stability(fast)
print(w.stable, w.reason, w.mode, w.min_eigs)
