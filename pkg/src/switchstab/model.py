"""
Switched linear systems with a fixed dwell time followed by an exponential
random dwell time in every mode.

A system is the tuple ``(A_1..A_m, d_1..d_m, Pi)``. ``Pi`` is a generator
matrix: off-diagonal rates are non-negative and rows sum to zero. Modes are
indexed from 0 throughout the package.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .matlib import expm

__all__ = [
    "Issue",
    "ModelError",
    "SwitchedLinearSystem",
    "ModeDerived",
    "validate",
    "load_system",
    "save_system",
    "system_from_dict",
    "system_to_dict",
    "fixture_path",
    "load_fixture",
    "FIXTURES",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
ROW_SUM_TOL = 1e-12
FIXTURES = ("case1", "case2", "case3")


@dataclass(frozen=True)
class Issue:
    """One violated model invariant.

    ``kind`` is one of ``AbsorbingMode``, ``NegativeDwell``,
    ``BadGeneratorRow``, ``DimensionMismatch``, ``NonFinite``,
    ``TooFewModes``, ``ParseError`` or ``SchemaVersion``.
    """

    kind: str
    mode: int | None = None
    detail: str = ""

    def __str__(self):
        where = f"({self.mode})" if self.mode is not None else ""
        return f"{self.kind}{where}: {self.detail}" if self.detail else f"{self.kind}{where}"


class ModelError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    def kinds(self):
        return [(i.kind, i.mode) for i in self.issues]


@dataclass(frozen=True)
class ModeDerived:
    """Per-mode quantities every consumer needs: jump maps and exit rates."""

    E: tuple  # E[i] = expm(A[i], d[i])
    nu: np.ndarray  # nu[i] = -Pi[i, i]
    jump_probs: np.ndarray  # embedded chain, row i = Pi[i, j] / nu[i] off the diagonal


@dataclass(frozen=True, eq=False)
class SwitchedLinearSystem:
    A: tuple
    d: np.ndarray
    Pi: np.ndarray
    derived: ModeDerived | None = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, A, d, Pi):
        A = tuple(np.array(a, dtype=float) for a in A)
        return cls(A=A, d=np.array(d, dtype=float).reshape(-1), Pi=np.array(Pi, dtype=float))

    @property
    def n(self):
        return self.A[0].shape[0] if self.A and self.A[0].ndim == 2 else 0

    @property
    def m(self):
        return len(self.A)

    @property
    def is_validated(self):
        return self.derived is not None

    def with_dwell(self, d):
        """Same modes and generator with new fixed dwell times, re-validated."""
        return validate(SwitchedLinearSystem(A=self.A, d=np.array(d, dtype=float), Pi=self.Pi))

    def __eq__(self, other):
        if not isinstance(other, SwitchedLinearSystem) or self.m != other.m:
            return NotImplemented
        return (
            all(np.array_equal(a, b) for a, b in zip(self.A, other.A))
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.Pi, other.Pi)
        )

    __hash__ = None


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def validate(sys):
    """Check every model invariant and attach :class:`ModeDerived`.

    Returns a new, read-only system. Raises :class:`ModelError` listing all
    violations found. Generator rows whose sum is within 1e-12 of zero are
    re-balanced by adjusting the diagonal entry.
    """
    issues = []
    A = [np.asarray(a, dtype=float) for a in sys.A]
    d = np.asarray(sys.d, dtype=float).reshape(-1)
    Pi = np.asarray(sys.Pi, dtype=float)
    m = len(A)

    if m < 2:
        issues.append(Issue("TooFewModes", None, f"need at least 2 modes, got {m}"))
    n = A[0].shape[0] if m and A[0].ndim == 2 else 0
    for i, a in enumerate(A):
        if a.ndim != 2 or a.shape != (n, n) or n == 0:
            issues.append(Issue("DimensionMismatch", i, f"A has shape {a.shape}, expected ({n}, {n})"))
        elif not np.all(np.isfinite(a)):
            issues.append(Issue("NonFinite", i, "A has non-finite entries"))
    if d.shape != (m,):
        issues.append(Issue("DimensionMismatch", None, f"{d.size} dwell times for {m} modes"))
    if Pi.shape != (m, m):
        issues.append(Issue("DimensionMismatch", None, f"Pi has shape {Pi.shape}, expected ({m}, {m})"))
    if issues:
        raise ModelError(issues)

    for i in range(m):
        if not math.isfinite(d[i]):
            issues.append(Issue("NonFinite", i, "dwell time is not finite"))
        elif d[i] < 0:
            issues.append(Issue("NegativeDwell", i, f"d = {d[i]!r}"))
    if not np.all(np.isfinite(Pi)):
        raise ModelError(issues + [Issue("NonFinite", None, "Pi has non-finite entries")])

    Pi = Pi.copy()
    for i in range(m):
        off = np.delete(Pi[i], i)
        if np.any(off < 0):
            issues.append(Issue("BadGeneratorRow", i, "negative off-diagonal rate"))
            continue
        resid = Pi[i].sum()
        if abs(resid) > ROW_SUM_TOL:
            issues.append(Issue("BadGeneratorRow", i, f"row sums to {resid!r}"))
            continue
        if resid != 0.0:
            Pi[i, i] = -off.sum()
        if Pi[i, i] == 0.0:
            issues.append(Issue("AbsorbingMode", i, "pi_ii = 0"))
    if issues:
        raise ModelError(issues)

    A = tuple(_frozen(a) for a in A)
    d = _frozen(d)
    nu = _frozen(-np.diag(Pi))
    jp = Pi / nu[:, None]
    np.fill_diagonal(jp, 0.0)
    E = tuple(np.eye(n) if d[i] == 0 else expm(A[i], d[i]) for i in range(m))
    derived = ModeDerived(E=tuple(_frozen(e) for e in E), nu=nu, jump_probs=_frozen(jp))
    return SwitchedLinearSystem(A=A, d=d, Pi=_frozen(Pi), derived=derived)


# -- serialization ---------------------------------------------------------


def system_to_dict(sys):
    return {
        "version": SCHEMA_VERSION,
        "n": sys.n,
        "m": sys.m,
        "modes": [{"A": np.asarray(a).tolist(), "d": float(di)} for a, di in zip(sys.A, sys.d)],
        "Pi": np.asarray(sys.Pi).tolist(),
    }


def _real(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError([Issue("ParseError", None, f"{where}: expected a number, got {value!r}")])
    return float(value)


def _matrix(rows, nrows, ncols, where, mode=None):
    if not isinstance(rows, list) or len(rows) != nrows:
        got = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise ModelError([Issue("DimensionMismatch", mode, f"{where}: expected {nrows} rows, got {got}")])
    out = np.empty((nrows, ncols))
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != ncols:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise ModelError(
                [Issue("DimensionMismatch", mode, f"{where}[{r}]: expected {ncols} entries, got {got}")]
            )
        for c, v in enumerate(row):
            out[r, c] = _real(v, f"{where}[{r}][{c}]")
    return out


def system_from_dict(obj):
    """Build (unvalidated) system from the JSON object layout."""
    if not isinstance(obj, dict):
        raise ModelError([Issue("ParseError", None, "top level must be an object")])
    version = obj.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ModelError([Issue("SchemaVersion", None, f"unsupported version {version!r}")])
    for key in ("n", "m", "modes", "Pi"):
        if key not in obj:
            raise ModelError([Issue("ParseError", None, f"missing field {key!r}")])
    n, m = obj["n"], obj["m"]
    if not (isinstance(n, int) and isinstance(m, int)) or n < 1 or m < 1:
        raise ModelError([Issue("ParseError", None, "n and m must be positive integers")])
    modes = obj["modes"]
    if not isinstance(modes, list) or len(modes) != m:
        raise ModelError([Issue("DimensionMismatch", None, f"modes: expected {m} entries")])
    A, d = [], []
    for i, mode in enumerate(modes):
        if not isinstance(mode, dict) or "A" not in mode or "d" not in mode:
            raise ModelError([Issue("ParseError", i, f"modes[{i}] needs fields 'A' and 'd'")])
        A.append(_matrix(mode["A"], n, n, f"modes[{i}].A", mode=i))
        d.append(_real(mode["d"], f"modes[{i}].d"))
    Pi = _matrix(obj["Pi"], m, m, "Pi")
    return SwitchedLinearSystem(A=tuple(A), d=np.array(d), Pi=Pi)


def load_system(path, validated=True):
    """Read a model file. Returns a validated system unless ``validated=False``."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError([Issue("ParseError", None, f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")]) from exc
    sys = system_from_dict(obj)
    return validate(sys) if validated else sys


def save_system(sys, path):
    # json writes floats with repr(), so the round trip is bit-exact.
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n")


def fixture_path(name):
    """Path of a bundled model file (``case1``, ``case2`` or ``case3``)."""
    name = name[:-5] if name.endswith(".json") else name
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return resources.files("switchstab") / "data" / f"{name}.json"


def load_fixture(name, d=None):
    sys = load_system(fixture_path(name))
    return sys if d is None else sys.with_dwell(d)
