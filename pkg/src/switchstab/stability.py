"""
Stochastic stability test for dwell-time switched systems.

The system is stochastically stable iff there are positive definite
``P_1..P_m`` with

    R_i = A_i^T P_i + P_i A_i + pi_ii P_i + sum_{j != i} pi_ij E_j^T P_j E_j < 0

for every mode, where ``E_j = e^{A_j d_j}``. Setting ``R_i = -Q_i`` with
``Q_i = I`` turns the inequalities into one linear system of order ``m n^2``;
the system is stable iff that solution exists and every ``P_i`` is positive
definite.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matlib import (
    ABS_FLOOR,
    SingularMatrixError,
    asymmetry,
    kron,
    min_eig_sym,
    solve_linear,
    symmetrize,
    unvec,
    vec,
)
from .model import validate

__all__ = [
    "SingularOperatorError",
    "CoupledOperator",
    "StabilityCertificate",
    "StabilityVerdict",
    "assemble_coupled_operator",
    "coupled_lhs",
    "solve_coupled_lyapunov",
    "check_stochastic_stability",
    "verify_certificate",
    "pd_tolerance",
    "operator_abscissa",
    "save_certificate",
    "load_certificate",
]

PD_REL_TOL = 1e-9
PD_ABS_TOL = 1e-12
ASYMMETRY_TOL = 1e-8
MARGINAL_FACTOR = 10.0


class SingularOperatorError(SingularMatrixError):
    """The coupled operator cannot be inverted reliably."""


@dataclass(frozen=True)
class CoupledOperator:
    """Vectorized coupled Lyapunov operator.

    Unknowns are ordered ``vec(P_1), ..., vec(P_m)`` with column-major
    ``vec``. Block ``(i, i)`` is ``I (x) A_i^T + A_i^T (x) I + pi_ii I`` and
    block ``(i, j)`` is ``pi_ij E_j^T (x) E_j^T``.
    """

    L: np.ndarray
    n: int
    m: int

    def block(self, i, j):
        k = self.n * self.n
        return self.L[i * k : (i + 1) * k, j * k : (j + 1) * k]

    def apply(self, P):
        """Apply to a list of ``n x n`` matrices, returning matrices."""
        x = np.concatenate([vec(p) for p in P])
        y = self.L @ x
        k = self.n * self.n
        return [unvec(y[i * k : (i + 1) * k], self.n) for i in range(self.m)]


@dataclass(frozen=True)
class StabilityCertificate:
    P: tuple
    Q: tuple
    margin: float
    marginal: bool = False

    def to_dict(self):
        return {
            "P": [np.asarray(p).tolist() for p in self.P],
            "Q": [np.asarray(q).tolist() for q in self.Q],
            "margin": float(self.margin),
            "marginal": bool(self.marginal),
        }

    @classmethod
    def from_dict(cls, obj):
        P = tuple(np.array(p, dtype=float) for p in obj["P"])
        Q = tuple(np.array(q, dtype=float) for q in obj.get("Q") or [np.eye(P[0].shape[0])] * len(P))
        return cls(P=P, Q=Q, margin=float(obj.get("margin", np.nan)), marginal=bool(obj.get("marginal", False)))


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of :func:`check_stochastic_stability`.

    ``stable`` selects the variant. A stable verdict carries ``certificate``;
    an unstable one carries ``reason`` (``"NonPositiveDefinite"`` with the
    offending ``mode``, or ``"SingularOperator"``). ``min_eigs`` holds the
    smallest eigenvalue of each ``P_i`` when the solve succeeded.

    ``relative_margin`` is a scale-free signed distance indicator: for a
    stable verdict the certificate margin after normalizing ``max ||P_i||_2``
    to one (negative, shrinking to zero at the stability boundary where the
    solution blows up); for an unstable verdict ``-min_i lambda_min(P_i)``
    under the same normalization (positive). It is 0 for a singular operator.
    """

    stable: bool
    certificate: StabilityCertificate | None = None
    reason: str | None = None
    mode: int | None = None
    min_eigs: tuple = ()
    relative_margin: float = 0.0
    marginal: bool = False
    rcond: float = float("nan")
    P: tuple | None = field(default=None, repr=False)

    @property
    def margin(self):
        return self.certificate.margin if self.certificate is not None else float("nan")

    @property
    def witness(self):
        if self.stable:
            return None
        return {"reason": self.reason, "mode": self.mode, "min_eigs": list(self.min_eigs)}

    def __str__(self):
        if self.stable:
            return f"Stable (margin {self.margin:.6g}, relative {self.relative_margin:.6g})"
        where = f" in mode {self.mode}" if self.mode is not None else ""
        return f"Unstable: {self.reason}{where}"


def _validated(sys):
    return sys if sys.is_validated else validate(sys)


def assemble_coupled_operator(sys):
    sys = _validated(sys)
    n, m = sys.n, sys.m
    k = n * n
    I_n = np.eye(n)
    L = np.zeros((m * k, m * k))
    for i in range(m):
        At = sys.A[i].T
        for j in range(m):
            if i == j:
                blk = kron(I_n, At) + kron(At, I_n) + sys.Pi[i, i] * np.eye(k)
            elif sys.Pi[i, j] != 0.0:
                Et = sys.derived.E[j].T
                blk = sys.Pi[i, j] * kron(Et, Et)
            else:
                continue
            L[i * k : (i + 1) * k, j * k : (j + 1) * k] = blk
    return CoupledOperator(L=L, n=n, m=m)


def coupled_lhs(sys, P):
    """Evaluate ``R_i`` directly from matrices, without the vectorized operator."""
    sys = _validated(sys)
    P = [np.asarray(p, dtype=float) for p in P]
    if len(P) != sys.m or any(p.shape != (sys.n, sys.n) for p in P):
        raise ValueError(f"expected {sys.m} matrices of shape ({sys.n}, {sys.n})")
    jumped = [E.T @ p @ E for E, p in zip(sys.derived.E, P)]
    R = []
    for i in range(sys.m):
        Ri = sys.A[i].T @ P[i] + P[i] @ sys.A[i] + sys.Pi[i, i] * P[i]
        for j in range(sys.m):
            if j != i:
                Ri = Ri + sys.Pi[i, j] * jumped[j]
        R.append(Ri)
    return R


def solve_coupled_lyapunov(sys, Q=None, operator=None):
    """Solve ``R_i = -Q_i`` for ``P_1..P_m``.

    Returns a list of symmetrized matrices. Raises
    :class:`SingularOperatorError` when the operator is singular to working
    precision or the raw solution is too asymmetric to trust.
    """
    sys = _validated(sys)
    n, m = sys.n, sys.m
    if Q is None:
        Q = [np.eye(n)] * m
    Q = [np.asarray(q, dtype=float) for q in Q]
    if len(Q) != m or any(q.shape != (n, n) for q in Q):
        raise ValueError(f"expected {m} right-hand sides of shape ({n}, {n})")
    op = operator if operator is not None else assemble_coupled_operator(sys)
    b = -np.concatenate([vec(q) for q in Q])
    try:
        x = solve_linear(op.L, b)
    except SingularMatrixError as exc:
        raise SingularOperatorError(str(exc), exc.rcond) from exc
    k = n * n
    P = []
    for i in range(m):
        Pi = unvec(x[i * k : (i + 1) * k], n)
        skew = asymmetry(Pi)
        if skew > ASYMMETRY_TOL:
            raise SingularOperatorError(f"solution for mode {i} is asymmetric (relative {skew:.2e})")
        P.append(symmetrize(Pi))
    return P


def pd_tolerance(P):
    return max(PD_REL_TOL * float(np.linalg.norm(P)), PD_ABS_TOL)


def verify_certificate(sys, cert):
    """Largest eigenvalue over all ``R_i``; negative iff the inequalities hold.

    ``cert`` is a :class:`StabilityCertificate` or a sequence of matrices.
    Positive definiteness of the ``P_i`` is not part of the returned number.
    """
    P = cert.P if isinstance(cert, StabilityCertificate) else cert
    R = coupled_lhs(sys, P)
    return max(-min_eig_sym(-r) for r in R)


def check_stochastic_stability(sys, Q=None, tol_scale=1.0):
    """Decide stochastic stability.

    ``tol_scale`` multiplies the positive-definiteness tolerance; it exists
    for sensitivity checks of near-boundary verdicts.
    """
    sys = _validated(sys)
    n, m = sys.n, sys.m
    if Q is None:
        Q = [np.eye(n)] * m
    try:
        P = solve_coupled_lyapunov(sys, Q)
    except SingularOperatorError as exc:
        return StabilityVerdict(stable=False, reason="SingularOperator", marginal=True, rcond=exc.rcond)

    min_eigs = tuple(min_eig_sym(p) for p in P)
    tols = [tol_scale * pd_tolerance(p) for p in P]
    marginal = any(abs(lam) <= MARGINAL_FACTOR * t for lam, t in zip(min_eigs, tols))
    scale = max(max(abs(np.linalg.eigvalsh(p)).max() for p in P), ABS_FLOOR)
    bad = [i for i in range(m) if not min_eigs[i] > tols[i]]
    if bad:
        rel = max(-lam for lam in min_eigs) / scale
        return StabilityVerdict(
            stable=False,
            reason="NonPositiveDefinite",
            mode=bad[0],
            min_eigs=min_eigs,
            relative_margin=rel,
            marginal=marginal,
            P=tuple(P),
        )

    margin = verify_certificate(sys, P)
    marginal = marginal or abs(margin) <= MARGINAL_FACTOR * max(tols)
    cert = StabilityCertificate(P=tuple(P), Q=tuple(Q), margin=margin, marginal=marginal)
    return StabilityVerdict(
        stable=True,
        certificate=cert,
        min_eigs=min_eigs,
        relative_margin=margin / scale,
        marginal=marginal,
        P=tuple(P),
    )


def operator_abscissa(sys):
    """Largest real part in the spectrum of the coupled operator.

    Diagnostic only. For zero dwell times a negative value is equivalent to
    stability; for positive dwell times the correspondence is unproven and
    this number must not be used as a verdict.
    """
    L = assemble_coupled_operator(sys).L
    return float(np.linalg.eigvals(L).real.max())


def save_certificate(cert, path):
    Path(path).write_text(json.dumps(cert.to_dict(), indent=2) + "\n")


def load_certificate(path):
    return StabilityCertificate.from_dict(json.loads(Path(path).read_text()))
