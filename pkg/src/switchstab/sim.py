"""
Sample paths of the dwell-time switching signal, exact state propagation and
Monte Carlo estimation of the expected quadratic cost.

Random streams
--------------
Every replica ``r`` of a run seeded with ``seed`` draws from its own PCG64
generator, seeded by ``SeedSequence(seed, spawn_key=(r,))``. Segment ``k`` of
a path consumes exactly two uniforms ``(u_sojourn, u_jump)``, whatever the
number of modes, so a path can be regenerated from ``(seed, r)`` alone and
the estimator output does not depend on how replicas are split across
workers.
"""

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .matlib import expm, gramian_and_expm
from .model import validate

__all__ = [
    "Segment",
    "SwitchingSignalPath",
    "JumpSegment",
    "JumpSystemPath",
    "Trajectory",
    "CostEstimate",
    "replica_rng",
    "sample_switching_signal",
    "replica_path",
    "propagate",
    "path_cost",
    "estimate_cost",
    "estimate_costs",
    "replica_costs",
    "transform_paired_paths",
    "check_path_correspondence",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "default_workers",
]

BLOCK = 1024
_CHUNK = 64
TAIL_FRACTION = 0.01


@dataclass(frozen=True)
class Segment:
    mode: int
    start: float
    fixed: float
    random: float

    @property
    def end(self):
        return self.start + (self.fixed + self.random)


@dataclass(frozen=True)
class SwitchingSignalPath:
    """Realized switching signal on ``[0, horizon]``.

    The last segment keeps its full drawn sojourn; consumers clip it at
    ``horizon``.
    """

    segments: tuple
    horizon: float

    @property
    def modes(self):
        return [s.mode for s in self.segments]

    @property
    def switch_times(self):
        return [s.start for s in self.segments]


@dataclass(frozen=True)
class JumpSegment:
    mode: int
    start: float
    sojourn: float

    @property
    def end(self):
        return self.start + self.sojourn


@dataclass(frozen=True)
class JumpSystemPath:
    """Mode path of the equivalent jump system: fixed dwells squeezed to points."""

    segments: tuple


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    mode: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    runs: int
    horizon: float
    half_horizon_mean: float
    half_horizon_std_error: float
    truncated_fraction: float
    seed: int

    @property
    def tail_ratio(self):
        """``mean / half_horizon_mean``; close to 1 when the cost has converged."""
        return self.mean / self.half_horizon_mean if self.half_horizon_mean > 0 else math.inf

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def default_workers():
    try:
        return max(1, int(os.environ.get("SWITCHSTAB_THREADS", "1")))
    except ValueError:
        return 1


def replica_rng(seed, replica):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replica,))))


# The scalar sampler and the vectorized engine share these two helpers so that
# both turn the same uniforms into bit-identical sojourns and targets.
def _sojourn(u, nu):
    # u in [0, 1), so 1 - u lies in (0, 1] and the log never sees zero.
    return -np.log1p(-u) / nu


def _jump_tables(sys):
    cum = np.cumsum(sys.derived.jump_probs, axis=1)
    last = np.array([np.nonzero(row > 0)[0][-1] for row in sys.derived.jump_probs])
    return cum, last


def _next_mode(u, mode, cum, last):
    idx = (u[:, None] >= cum[mode]).sum(axis=1)
    return np.minimum(idx, last[mode])


def _validated(sys):
    return sys if sys.is_validated else validate(sys)


def sample_switching_signal(sys, r0, horizon, rng):
    """Draw one switching signal on ``[0, horizon]``.

    On entering mode ``i`` the signal stays exactly ``d_i``, then an
    exponential time with rate ``nu_i``, then jumps to ``j != i`` with
    probability ``pi_ij / nu_i``.
    """
    sys = _validated(sys)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 0 <= r0 < sys.m:
        raise ValueError(f"r0 must be a mode index in [0, {sys.m})")
    nu, d = sys.derived.nu, sys.d
    cum, last = _jump_tables(sys)
    segments = []
    t, mode = 0.0, int(r0)
    while t < horizon:
        u = rng.random(2)
        eta = float(_sojourn(u[0], nu[mode]))
        segments.append(Segment(mode, t, float(d[mode]), eta))
        t = float(t + (d[mode] + eta))
        mode = int(_next_mode(u[1:], np.array([mode]), cum, last)[0])
    return SwitchingSignalPath(tuple(segments), float(horizon))


def replica_path(sys, r0, horizon, seed, replica):
    """The exact path :func:`estimate_cost` uses for replica ``replica``."""
    return sample_switching_signal(sys, r0, horizon, replica_rng(seed, replica))


def _clipped(seg, until):
    return max(0.0, min(seg.end, until) - seg.start)


def propagate(sys, path, x0, sample_dt):
    """Exact piecewise-exponential state trajectory along ``path``.

    Returns states at every multiple of ``sample_dt`` up to the horizon, at
    every switch instant and at the horizon itself. At a switch instant the
    recorded mode is the one being entered.
    """
    sys = _validated(sys)
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise ValueError(f"x0 has length {x.size}, expected {sys.n}")
    H = path.horizon
    ts, modes, xs = [], [], []
    for seg in path.segments:
        length = _clipped(seg, H)
        kmin = math.ceil(seg.start / sample_dt)
        grid = np.arange(kmin, math.floor((seg.start + length) / sample_dt) + 1) * sample_dt
        grid = grid[(grid > seg.start) & (grid < seg.start + length)]
        offsets = grid - seg.start
        ts.append(seg.start)
        xs.append(x)
        if offsets.size:
            ts.extend(seg.start + offsets)
            xs.extend(expm(sys.A[seg.mode], offsets) @ x)
        modes.extend([seg.mode] * (offsets.size + 1))
        x = expm(sys.A[seg.mode], length) @ x
    ts.append(H)
    modes.append(path.segments[-1].mode)
    xs.append(x)
    return Trajectory(np.array(ts), np.array(modes), np.array(xs))


def path_cost(sys, path, x0, until=None):
    """Integral of ``||x(t)||^2`` over ``[0, until]`` (default: the horizon).

    Each segment contributes ``x_k^T W(tau_k) x_k``. A segment is split into
    its fixed part and its random part so the fixed-dwell Gramian, which
    recurs on every visit, is computed once per mode.
    """
    sys = _validated(sys)
    until = path.horizon if until is None else float(until)
    x = np.asarray(x0, dtype=float).reshape(-1)
    memo = {}

    def gram(mode, length):
        key = (mode, length)
        if key not in memo:
            memo[key] = gramian_and_expm(sys.A[mode], length)
        return memo[key]

    total = 0.0
    for seg in path.segments:
        if seg.start >= until:
            break
        fixed = min(seg.fixed, until - seg.start)
        W, E = gram(seg.mode, fixed)
        total += float(x @ W @ x)
        x = E @ x
        rest = _clipped(seg, until) - fixed
        if rest > 0:
            W, E = gramian_and_expm(sys.A[seg.mode], rest)
            total += float(x @ W @ x)
            x = E @ x
    return total


def _quad(x, W):
    return np.einsum("rip,rij,rjp->rp", x, W, x)


def _block_costs(sys, X0, r0, horizon, seed, replicas):
    """Costs over ``[0, horizon/2]`` and ``[0, horizon]`` for a block of replicas.

    ``X0`` has shape ``(n, p)``: ``p`` initial states pushed along the same
    paths. Returns an array of shape ``(R, p, 2)``.
    """
    R = len(replicas)
    nu, d = sys.derived.nu, sys.d
    cum, last = _jump_tables(sys)
    gens = [replica_rng(seed, r) for r in replicas]
    U = np.stack([g.random((_CHUNK, 2)) for g in gens])
    H = float(horizon)
    half = 0.5 * H

    x = np.tile(X0, (R, 1, 1))
    mode = np.full(R, int(r0))
    t = np.zeros(R)
    cost = np.zeros((R, X0.shape[1], 2))
    alive = np.ones(R, dtype=bool)
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while alive.any():
            if k == U.shape[1]:
                U = np.concatenate([U, np.stack([g.random((_CHUNK, 2)) for g in gens])], axis=1)
            idx = np.nonzero(alive)[0]
            u = U[idx, k]
            mo = mode[idx]
            tau = d[mo] + _sojourn(u[:, 0], nu[mo])
            ts = t[idx]
            length = np.minimum(tau, H - ts)
            crosses = (ts < half) & (ts + tau > half)
            before = ts + tau <= half
            for i in range(sys.m):
                sel = mo == i
                if not sel.any():
                    continue
                rows = idx[sel]
                xi = x[rows]
                W, E = gramian_and_expm(sys.A[i], length[sel])
                seg_cost = _quad(xi, W)
                cost[rows, :, 1] += seg_cost
                b = before[sel]
                cost[rows[b], :, 0] += seg_cost[b]
                c = crosses[sel]
                if c.any():
                    Wh, _ = gramian_and_expm(sys.A[i], half - ts[sel][c])
                    cost[rows[c], :, 0] += _quad(xi[c], Wh)
                x[rows] = E @ xi
            t[idx] = ts + tau
            mode[idx] = _next_mode(u[:, 1], mo, cum, last)
            alive[idx] = t[idx] < H
            k += 1
    return cost


def replica_costs(sys, x0, r0, horizon, seed, runs, workers=None):
    """Per-replica costs over half and full horizon.

    ``x0`` is one initial state (result shape ``(runs, 2)``) or a list of
    ``p`` states sharing the same paths (result shape ``(runs, p, 2)``). The
    last axis holds the half-horizon and full-horizon cost. Replicas are
    processed in fixed blocks of :data:`BLOCK`, so the result is the same
    for any worker count.
    """
    sys = _validated(sys)
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    X0 = np.atleast_2d(x0).T
    if X0.shape[0] != sys.n:
        raise ValueError(f"initial states have length {X0.shape[0]}, expected {sys.n}")
    if not 0 <= r0 < sys.m:
        raise ValueError(f"r0 must be a mode index in [0, {sys.m})")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    workers = default_workers() if workers is None else max(1, int(workers))
    blocks = [range(s, min(s + BLOCK, runs)) for s in range(0, runs, BLOCK)]

    def job(block):
        return _block_costs(sys, X0, r0, horizon, seed, block)

    if workers == 1 or len(blocks) == 1:
        parts = [job(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, blocks))
    costs = np.concatenate(parts, axis=0)
    return costs[:, 0, :] if single else costs


def _summarize(half, full, runs, horizon, seed):
    with np.errstate(over="ignore", invalid="ignore"):
        se_full = float(np.std(full, ddof=1) / math.sqrt(runs))
        se_half = float(np.std(half, ddof=1) / math.sqrt(runs))
        tail = np.where(full > 0, (full - half) > TAIL_FRACTION * full, False)
        return CostEstimate(
            mean=float(np.mean(full)),
            std_error=se_full,
            runs=int(runs),
            horizon=float(horizon),
            half_horizon_mean=float(np.mean(half)),
            half_horizon_std_error=se_half,
            truncated_fraction=float(np.mean(tail)),
            seed=int(seed),
        )


def estimate_cost(sys, x0, r0, runs, horizon, seed, workers=None):
    """Monte Carlo estimate of ``E int_0^horizon ||x(t)||^2 dt``.

    The infinite-horizon cost is never extrapolated. The same paths are also
    scored over ``[0, horizon/2]``; compare ``half_horizon_mean`` with
    ``mean`` to judge convergence.
    """
    if runs < 2:
        raise ValueError("runs must be at least 2")
    costs = replica_costs(sys, np.asarray(x0, dtype=float).reshape(-1), r0, horizon, seed, runs, workers)
    return _summarize(costs[:, 0], costs[:, 1], runs, horizon, seed)


def estimate_costs(sys, x0s, r0, runs, horizon, seed, workers=None):
    """:func:`estimate_cost` for several initial states on common paths."""
    if runs < 2:
        raise ValueError("runs must be at least 2")
    costs = replica_costs(sys, np.atleast_2d(x0s), r0, horizon, seed, runs, workers)
    return [_summarize(costs[:, j, 0], costs[:, j, 1], runs, horizon, seed) for j in range(costs.shape[1])]


def transform_paired_paths(sys, r0, horizon, rng):
    """A switching-signal path and its jump-system twin from the same draws.

    The twin visits the same modes with the same exponential sojourns; only
    the fixed dwells are removed, so ``t_{k+1} = t~_{k+1} + sum_{l<=k} d``.
    """
    path = sample_switching_signal(sys, r0, horizon, rng)
    jumps = []
    s = 0.0
    for seg in path.segments:
        jumps.append(JumpSegment(seg.mode, s, seg.random))
        s = s + seg.random
    return path, JumpSystemPath(tuple(jumps))


def check_path_correspondence(sys, paths, x0, n_tau=8):
    """Largest gap between the two systems along matched sample points.

    The jump system applies ``e^{A d}`` on entry to each mode and then flows
    for the sojourn; the original system flows for ``d + tau``. For each
    segment the states are compared at ``n_tau`` offsets in ``[0, eta)``.
    Gaps are measured relative to ``max(1, ||x||)`` so growing trajectories
    are compared at working precision.
    """
    sys = _validated(sys)
    path, jpath = paths
    x = np.asarray(x0, dtype=float).reshape(-1)
    xi = x.copy()
    worst = 0.0
    for seg, jseg in zip(path.segments, jpath.segments):
        A = sys.A[seg.mode]
        xi = sys.derived.E[jseg.mode] @ xi
        taus = np.linspace(0.0, jseg.sojourn, n_tau, endpoint=False)
        xs = expm(A, seg.fixed + taus) @ x
        xis = expm(A, taus) @ xi
        gap = np.linalg.norm(xis - xs, axis=1) / np.maximum(1.0, np.linalg.norm(xs, axis=1))
        worst = max(worst, float(gap.max()))
        x = expm(A, seg.fixed + seg.random) @ x
        xi = expm(A, jseg.sojourn) @ xi
    return worst


def write_trajectory_csv(traj, path):
    n = traj.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mode"] + [f"x_{i + 1}" for i in range(n)])
        for t, mode, x in zip(traj.t, traj.mode, traj.x):
            w.writerow([f"{t:.17g}", int(mode)] + [f"{v:.17g}" for v in x])


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    return Trajectory(
        t=np.array([float(r[0]) for r in body]),
        mode=np.array([int(r[1]) for r in body]),
        x=np.array([[float(v) for v in r[2:]] for r in body]),
    )


def save_estimate(est, path):
    Path(path).write_text(est.to_json() + "\n")
