"""Cycle estimates of Lyapunov exponent sums and a Birkhoff oracle.

For a fixed point ``p`` of ``f^n`` set
``phi_n(p) = (1/n) log |Lambda^s d_p f^n|`` (the product of the ``s``
largest singular values).  The cycle estimate averages ``phi_n`` over the
repelling fixed points ``R_n`` (or the primitive ones ``R_n^*``) with weight
``d_t^{-n}``; it converges to ``chi_{k-s+1} + ... + chi_k``, the sum of the
``s`` largest Lyapunov exponents of the equilibrium measure.

The oracle estimates the same quantity by a Monte Carlo Birkhoff average:
points are sampled from the equilibrium measure by backward random walks
(uniformly chosen preimages) and ``(1/n) log |Lambda^s d f^n|`` is averaged
along the forward orbit of the endpoint, which retraces the walk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .endomorphism import (
    DynamicsError,
    ProjectiveEndomorphism,
    _batched_frames,
    fs_tangent_map,
    normalize_point,
)
from .periodic import PeriodicPointRecord, PeriodicPointSet, find_periodic_points, preimages

__all__ = [
    "exterior_norm",
    "phi_n",
    "gamma_bound",
    "CycleEstimate",
    "cycle_lyapunov_estimate",
    "OracleResult",
    "birkhoff_lyapunov_oracle",
    "DensityReport",
    "repelling_density_check",
    "sample_points",
]


def exterior_norm(M, s: int) -> np.ndarray:
    """``|Lambda^s M|``: product of the ``s`` largest singular values (batched)."""
    M = np.asarray(M)
    k = M.shape[-1]
    if not 1 <= s <= k:
        raise ValueError(f"s must be in 1..{k}")
    sv = np.linalg.svd(M, compute_uv=False)
    return np.prod(sv[..., :s], axis=-1)


def _log_exterior(M, s: int) -> np.ndarray:
    sv = np.linalg.svd(np.asarray(M), compute_uv=False)
    with np.errstate(divide="ignore"):
        return np.sum(np.log(sv[..., :s]), axis=-1)


def phi_n(record: PeriodicPointRecord, s: int) -> float:
    """``(1/n) log |Lambda^s d_p f^n|`` for a verified fixed point of ``f^n``."""
    return float(_log_exterior(record.multiplier, s) / record.n)


def sample_points(dim: int, n: int = 2000, seed: int = 0) -> np.ndarray:
    """Deterministic probe set on ``P^k``: coordinate points, a modulus/angle grid and seeded random points."""
    rng = np.random.default_rng(seed)
    pts = [np.eye(dim + 1, dtype=complex)]
    radii = np.concatenate([np.geomspace(1e-2, 1e2, 41), [1.0]])
    angles = np.exp(2j * np.pi * np.arange(24) / 24)
    if dim == 1:
        z = (radii[:, None] * angles[None, :]).ravel()
        pts.append(np.column_stack([np.ones_like(z), z]))
    else:
        r = np.geomspace(1e-1, 1e1, 9)
        a = np.exp(2j * np.pi * np.arange(8) / 8)
        zz = (r[:, None] * a[None, :]).ravel()
        Z1, Z2 = np.meshgrid(zz, zz, indexing="ij")
        pts.append(np.column_stack([np.ones(Z1.size), Z1.ravel(), Z2.ravel()]))
    Z = rng.standard_normal((n, dim + 1)) + 1j * rng.standard_normal((n, dim + 1))
    pts.append(Z)
    return normalize_point(np.vstack(pts))


def gamma_bound(f: ProjectiveEndomorphism, extra_points=None, n_samples: int = 2000, seed: int = 0) -> float:
    """``k * max log+ |d_z f|`` (Fubini-Study operator norm) over the probe set and ``extra_points``."""
    P = sample_points(f.dim, n_samples, seed)
    if extra_points is not None and len(extra_points):
        P = np.vstack([P, normalize_point(np.asarray(extra_points))])
    norms = []
    for s in range(0, len(P), 4096):
        M = fs_tangent_map(f, P[s : s + 4096])
        norms.append(np.linalg.norm(M, ord=2, axis=(-2, -1)))
    top = float(np.max(np.concatenate(norms)))
    return f.dim * max(0.0, math.log(top))


@dataclass(frozen=True)
class CycleEstimate:
    """Cycle estimates at one ``n``.

    ``estimates[s]`` averages over ``R_n`` and ``estimates_primitive[s]`` over
    ``R_n^*``, both with weight ``d_t^{-n}``.  ``jacobian_average`` is
    ``d_t^{-n} sum_{p in R_n} log |Jac d_p f|`` (one step of ``f``).
    ``phi_range[s]`` is the range of ``phi_n`` over ``R_n``.
    """

    n: int
    card_Rn: int
    card_Rn_star: int
    topological_degree: int
    estimates: Dict[int, float]
    estimates_primitive: Dict[int, float]
    jacobian_average: float
    gamma: float
    phi_range: Dict[int, Tuple[float, float]]
    complete: bool
    heuristic: bool
    bounds_ok: bool


def cycle_lyapunov_estimate(
    f: ProjectiveEndomorphism,
    n: int,
    s: Optional[Sequence[int] | int] = None,
    points: Optional[PeriodicPointSet] = None,
) -> CycleEstimate:
    """Cycle estimates ``d_t^{-n} sum_{p in R_n} phi_n(p)`` for each requested ``s``.

    Sums use exactly rounded summation (``math.fsum``).  ``bounds_ok``
    checks that every ``phi_n`` lies in ``[0, Gamma]`` and that
    ``Card R_n - Card R_n^* <= n (k+1) d_t^{n/2}``.
    """
    pts = find_periodic_points(f, n) if points is None else points
    if pts.n != n:
        raise DynamicsError("periodic point set was computed for another n")
    svals = list(range(1, f.dim + 1)) if s is None else ([s] if isinstance(s, int) else list(s))
    dt = f.topological_degree
    Rn = pts.repulsive
    Rs = pts.repulsive_primitive
    weight = float(dt) ** (-n)
    est, est_p, rng_ = {}, {}, {}
    gam = gamma_bound(f, extra_points=[r.point for r in Rn] if Rn else None)
    ok = True
    if Rn:
        M = np.array([r.multiplier for r in Rn])
        prim = np.array([r.primitive for r in Rn])
        for sv in svals:
            phi = _log_exterior(M, sv) / n
            est[sv] = math.fsum(phi.tolist()) * weight
            est_p[sv] = math.fsum(phi[prim].tolist()) * weight
            rng_[sv] = (float(phi.min()), float(phi.max()))
            ok = ok and bool(phi.min() >= -1e-12 and phi.max() <= gam + 1e-9)
        J = fs_tangent_map(f, np.array([r.point for r in Rn]))
        logjac = np.log(np.abs(np.linalg.det(J)))
        jac = math.fsum(logjac.tolist()) * weight
    else:
        for sv in svals:
            est[sv] = est_p[sv] = 0.0
            rng_[sv] = (math.nan, math.nan)
        jac = 0.0
    ok = ok and (len(Rn) - len(Rs) <= n * (f.dim + 1) * dt ** (n / 2))
    return CycleEstimate(n, len(Rn), len(Rs), dt, est, est_p, jac, gam, rng_, pts.complete, pts.heuristic, ok)


# --------------------------------------------------------------------------
# Birkhoff oracle
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class OracleResult:
    value: float
    stderr: float
    n_samples: int
    n_transient: int
    n_average: int
    s: int
    seed: int
    resampled: int
    values: np.ndarray = field(repr=False)


def _walk(f: ProjectiveEndomorphism, start: np.ndarray, steps: int, rng: np.random.Generator, crit_tol: float):
    """Backward random walks; returns the path (steps+1, N, k+1) and a mask of walks that hit a critical value."""
    path = [start]
    cur = start
    hit = np.zeros(len(start), dtype=bool)
    nb = f.topological_degree
    for _ in range(steps):
        cand = preimages(f, cur)  # (N, nb, k+1)
        # coincident preimages mean the current point is (numerically) a critical value
        G = np.abs(np.einsum("nai,nbi->nab", np.conj(cand), cand))
        G[:, np.arange(nb), np.arange(nb)] = 0
        hit |= np.max(G, axis=(1, 2)) > 1 - crit_tol
        choice = rng.integers(nb, size=len(cur))
        cur = cand[np.arange(len(cur)), choice]
        path.append(cur)
    return np.array(path), hit


def _orbit_log_exterior(f: ProjectiveEndomorphism, orbit: np.ndarray, s: int) -> np.ndarray:
    """``log |Lambda^s d f^m|`` at ``orbit[0]`` for orbits given as (m+1, N, k+1), consistent frames."""
    m = orbit.shape[0] - 1
    N = orbit.shape[1]
    k = f.dim
    frames = [_batched_frames(orbit[t]) for t in range(m + 1)]
    P = np.broadcast_to(np.eye(k, dtype=complex), (N, k, k)).copy()
    logscale = np.zeros(N)
    for t in range(m):
        D = fs_tangent_map(f, orbit[t], frames_in=frames[t], frames_out=frames[t + 1], lifts_out=orbit[t + 1])
        P = D @ P
        nrm = np.linalg.norm(P, ord=2, axis=(-2, -1))
        P = P / nrm[:, None, None]
        logscale += np.log(nrm)
    return s * logscale + _log_exterior(P, s)


def birkhoff_lyapunov_oracle(
    f: ProjectiveEndomorphism,
    s: int = 1,
    n_transient: int = 60,
    n_average: int = 20,
    n_samples: int = 10000,
    seed: int = 0,
    crit_tol: float = 1e-12,
    max_rounds: int = 20,
) -> OracleResult:
    """Monte Carlo estimate of the sum of the ``s`` largest Lyapunov exponents.

    Each sample runs a backward walk of ``n_transient + n_average`` uniformly
    chosen preimages from a seeded random point; the value is
    ``(1/n_average) log |Lambda^s d f^{n_average}|`` at the deepest point,
    whose forward orbit is the tail of the walk.  Walks through a critical
    value (coincident preimages) are discarded and resampled; their number is
    reported.  ``stderr`` is the sample standard deviation over ``sqrt(N)``.
    """
    if not 1 <= s <= f.dim:
        raise ValueError(f"s must be in 1..{f.dim}")
    if n_average < 1 or n_samples < 2:
        raise ValueError("need n_average >= 1 and n_samples >= 2")
    rng = np.random.default_rng(seed)
    values: List[np.ndarray] = []
    need = n_samples
    resampled = 0
    for _ in range(max_rounds):
        if need <= 0:
            break
        Z = rng.standard_normal((need, f.dim + 1)) + 1j * rng.standard_normal((need, f.dim + 1))
        path, hit = _walk(f, normalize_point(Z), n_transient + n_average, rng, crit_tol)
        orbit = path[::-1][: n_average + 1]  # forward orbit of the deepest point
        vals = _orbit_log_exterior(f, orbit, s) / n_average
        good = ~hit & np.isfinite(vals)
        resampled += int((~good).sum())
        values.append(vals[good])
        need -= int(good.sum())
    if need > 0:
        raise DynamicsError("too many walks hit critical values")
    v = np.concatenate(values)[:n_samples]
    mean = math.fsum(v.tolist()) / len(v)
    se = float(np.std(v, ddof=1) / math.sqrt(len(v)))
    return OracleResult(mean, se, len(v), n_transient, n_average, s, seed, resampled, v)


# --------------------------------------------------------------------------
# density of repelling cycles
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class DensityReport:
    """Counts of repelling fixed points of ``f^n`` whose ``phi_n`` is ``2 eps``-close to ``sigma_ref``.

    ``fraction`` is ``Card R_n^eps / Card R_n``; ``normalized`` is
    ``Card R_n^eps / d_t^n``, compared with ``(1 - eps)^3`` (lower bound) while
    ``Card R_n`` is compared with ``d_t^n (1 + eps)`` (upper bound).
    """

    n: int
    s: int
    eps: float
    sigma_ref: float
    card_Rn: int
    card_Rn_eps: int
    topological_degree: int
    fraction: float
    normalized: float
    lower_bound_ok: bool
    upper_bound_ok: bool


def repelling_density_check(
    f: ProjectiveEndomorphism,
    n: int,
    eps: float,
    sigma_ref: float,
    s: int = 1,
    points: Optional[PeriodicPointSet] = None,
) -> DensityReport:
    pts = find_periodic_points(f, n) if points is None else points
    Rn = pts.repulsive
    dtn = float(f.topological_degree) ** n
    if Rn:
        phi = _log_exterior(np.array([r.multiplier for r in Rn]), s) / n
        close = int(np.sum(np.abs(phi - sigma_ref) <= 2 * eps))
    else:
        close = 0
    frac = close / len(Rn) if Rn else 0.0
    norm = close / dtn
    return DensityReport(
        n, s, eps, sigma_ref, len(Rn), close, f.topological_degree, frac, norm,
        norm >= (1 - eps) ** 3, len(Rn) <= dtn * (1 + eps),
    )
