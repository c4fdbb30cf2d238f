"""Periodic points of endomorphisms of ``P^1`` and ``P^2``.

On ``P^1`` the fixed points of ``f^n`` are the zeros of the binary form
``Z_0 F^n_1(Z) - Z_1 F^n_0(Z)`` of degree ``d^n + 1``.  Its coefficients are
far out of floating-point range for the sizes of interest, so the zeros are
found by simultaneous Aberth-Ehrlich iteration on the affine coordinate,
evaluating ``F^n`` by iteration (renormalised at every step, which leaves the
Newton ratio unchanged).  Starting values are the ``d^n`` preimages of a
repelling fixed point under ``f^n``, each of which lies exponentially close to
a repelling periodic point.

On ``P^2`` split maps ``(p(z), q(w))`` are enumerated exactly by factorising;
other maps fall back to a Newton search from seed grids in the three affine
charts, which is heuristic and flagged as such.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .endomorphism import (
    DynamicsError,
    ProjectiveEndomorphism,
    chart_coords,
    chart_data,
    chart_point,
    fs_distance,
    fs_multiplier,
    normalize_point,
)

__all__ = [
    "PeriodicPointRecord",
    "PeriodicPointSet",
    "find_periodic_points",
    "preimages",
    "MAX_ROOTS",
]

MAX_ROOTS = 2 ** 14
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicPointRecord:
    """A fixed point of ``f^n``.

    ``multiplier`` is the ``k x k`` derivative of ``f^n`` at the point in the
    unitary affine chart adapted to it; ``moduli`` are its eigenvalue moduli in
    increasing order.  ``period`` is the minimal period (a divisor of ``n``).
    """

    point: np.ndarray
    n: int
    period: int
    multiplier: np.ndarray
    moduli: Tuple[float, ...]
    repulsive: bool
    borderline: bool
    residual: float
    multiplicity: int = 1

    @property
    def primitive(self) -> bool:
        return self.period == self.n

    @property
    def affine(self) -> Optional[np.ndarray]:
        """Coordinates in the chart ``Z_0 = 1`` (``None`` on the hyperplane at infinity)."""
        if abs(self.point[0]) < 1e-300:
            return None
        return self.point[1:] / self.point[0]


@dataclass
class PeriodicPointSet:
    """All fixed points of ``f^n`` found, with bookkeeping.

    ``expected`` is the number of fixed points counted with multiplicity
    (``1 + d^n + ... + d^{kn}``); ``complete`` says whether the multiplicities
    found add up to it.
    """

    n: int
    records: List[PeriodicPointRecord]
    expected: int
    complete: bool
    heuristic: bool
    failures: int = 0
    method: str = ""

    def __iter__(self) -> Iterator[PeriodicPointRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def repulsive(self) -> List[PeriodicPointRecord]:
        return [r for r in self.records if r.repulsive]

    @property
    def repulsive_primitive(self) -> List[PeriodicPointRecord]:
        return [r for r in self.records if r.repulsive and r.primitive]


# --------------------------------------------------------------------------
# preimages on P^1
# --------------------------------------------------------------------------
def _binary_coefficients(comp: dict, d: int) -> np.ndarray:
    """Coefficients ``c_e`` of ``sum c_e Z_0^{d-e} Z_1^e``."""
    out = np.zeros(d + 1, dtype=complex)
    for e, c in comp.items():
        out[e[1]] += c
    return out


def _roots_binary(g: np.ndarray) -> np.ndarray:
    """Zeros ``[Z_0 : Z_1]`` of binary forms ``sum g[..., e] Z_0^{d-e} Z_1^e`` (batched).

    Each form is solved in the chart where it is better conditioned, using the
    eigenvalues of a companion matrix.  Returns unit vectors of shape ``(N, d, 2)``.
    """
    g = np.atleast_2d(g)
    N, d1 = g.shape
    d = d1 - 1
    lead, tail = np.abs(g[:, d]), np.abs(g[:, 0])
    use_z = lead >= tail
    out = np.empty((N, d, 2), dtype=complex)
    for flag in (True, False):
        idx = np.nonzero(use_z == flag)[0]
        if idx.size == 0:
            continue
        # in the chosen chart the monic polynomial has coefficients c[0..d-1] / c[d]
        c = g[idx] if flag else g[idx, ::-1]
        comp = np.zeros((idx.size, d, d), dtype=complex)
        comp[:, 0, :] = -c[:, d - 1 :: -1] / c[:, d : d + 1]
        if d > 1:
            comp[:, 1:, :-1] = np.eye(d - 1)
        r = np.linalg.eigvals(comp)
        if flag:
            pts = np.stack([np.ones_like(r), r], axis=-1)
        else:
            pts = np.stack([r, np.ones_like(r)], axis=-1)
        out[idx] = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    return out


def preimages(f: ProjectiveEndomorphism, W) -> np.ndarray:
    """All ``d^k`` preimages of the points ``W`` (shape ``(N, k+1)``), shape ``(N, d^k, k+1)``.

    Exact (companion matrices) on ``P^1`` and for split maps of ``P^2``.
    """
    W = normalize_point(np.atleast_2d(W))
    d = f.degree
    if f.dim == 1:
        a = _binary_coefficients(f.components[0], d)
        b = _binary_coefficients(f.components[1], d)
        g = W[:, 1:2] * a[None, :] - W[:, 0:1] * b[None, :]
        return _roots_binary(g)
    factors = f.product_factors()
    if factors is None:
        return np.array([_preimages_newton(f, w) for w in W])
    f1, f2, _ = factors
    A = preimages(f1, W[:, [0, 1]])
    B = preimages(f2, W[:, [0, 2]])
    # combine [a0:a1] and [b0:b2] into (a0 b0, a1 b0, a0 b2)
    Z0 = A[:, :, None, 0] * B[:, None, :, 0]
    Z1 = A[:, :, None, 1] * B[:, None, :, 0]
    Z2 = A[:, :, None, 0] * B[:, None, :, 1]
    Z = np.stack([Z0, Z1, Z2], axis=-1).reshape(W.shape[0], d * d, 3)
    return normalize_point(Z)


def _newton_chart(f: ProjectiveEndomorphism, n: int, ch, z0: np.ndarray, target=None, iters: int = 60):
    """Newton for ``phi(F^n(psi(z))) = z`` (or ``= target``) in one chart, vectorised over seeds."""
    z = z0.copy()
    k = f.dim
    ok = np.zeros(z.shape[0], dtype=bool)
    for _ in range(iters):
        Z = chart_point(ch, z)
        V = Z.copy()
        Mh = np.broadcast_to(np.eye(k + 1, dtype=complex), (z.shape[0], k + 1, k + 1)).copy()
        for _ in range(n):
            J = f.jacobian(V)
            V = f.apply(V)
            Mh = J @ Mh
            s = np.linalg.norm(V, axis=-1)
            V = V / s[:, None]
            Mh = Mh / s[:, None, None]
        a = ch.patch
        others = [i for i in range(k + 1) if i != a]
        Va = V[:, a]
        with np.errstate(all="ignore"):
            img = V[:, others] / Va[:, None] - ch.center
            # derivative of the chart reading: (dV_i Va - V_i dVa) / Va^2, and dZ/dz selects columns
            dV = Mh[:, :, others]
            dimg = (dV[:, others, :] * Va[:, None, None] - V[:, others, None] * dV[:, a : a + 1, :]) / (Va ** 2)[:, None, None]
            rhs = img - (z if target is None else target)
            jac = dimg - (np.eye(k) if target is None else 0)
            step = np.linalg.solve(jac, rhs[..., None])[..., 0]
        bad = ~np.all(np.isfinite(step), axis=-1)
        step[bad] = 0
        z = z - step
        big = np.linalg.norm(z, axis=-1) > 1e3
        z[big] = np.nan
        ok = (np.linalg.norm(step, axis=-1) < 1e-13 * np.maximum(1, np.linalg.norm(z, axis=-1))) & ~bad
        if np.all(ok | ~np.isfinite(z).all(axis=-1)):
            break
    good = ok & np.isfinite(z).all(axis=-1)
    return z[good]


def _dedup(points: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``tol`` (Fubini-Study); return representatives and cluster sizes.

    Lines are embedded by their projectors ``u u^*``, where
    ``|uu^* - vv^*|_F = sqrt(2) sin(d/2)``, so a KD-tree on the real
    coordinates finds all close pairs without a quadratic scan.
    """
    if len(points) == 0:
        return points, np.zeros(0, dtype=int)
    P = normalize_point(points)
    proj = (P[:, :, None] * np.conj(P[:, None, :])).reshape(len(P), -1)
    emb = np.concatenate([proj.real, proj.imag], axis=1)
    tree = cKDTree(emb)
    pairs = tree.query_pairs(math.sqrt(2) * math.sin(tol / 2), output_type="ndarray")
    n = len(P)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    ncomp, labels = connected_components(graph, directed=False)
    first = np.full(ncomp, -1)
    for i in range(n):
        if first[labels[i]] < 0:
            first[labels[i]] = i
    counts = np.bincount(labels, minlength=ncomp)
    return P[first], counts


def _preimages_newton(f: ProjectiveEndomorphism, w: np.ndarray, grid: int = 7) -> np.ndarray:
    found = []
    ch_target = None
    for a in range(f.dim + 1):
        if abs(w[a]) < 1e-12:
            continue
        ch_target = chart_data(np.eye(f.dim + 1)[a])
        tgt = chart_coords(ch_target, w)
        for s in range(f.dim + 1):
            ch = chart_data(np.eye(f.dim + 1)[s])
            seeds = _grid_seeds(f.dim, grid)
            # Newton for phi_a(F(psi_s(z))) = tgt by reading the image in chart a
            z = _newton_preimage(f, ch, ch_target, seeds, tgt)
            if len(z):
                found.append(normalize_point(chart_point(ch, z)))
        break
    if not found:
        raise DynamicsError("Newton preimage search found nothing")
    reps, _ = _dedup(np.vstack(found), 1e-7)
    return reps


def _newton_preimage(f, ch, ch_t, z0, tgt, iters=80):
    z = z0.copy()
    k = f.dim
    for _ in range(iters):
        Z = chart_point(ch, z)
        V = f.apply(Z)
        J = f.jacobian(Z)
        a = ch_t.patch
        others = [i for i in range(k + 1) if i != a]
        Va = V[:, a]
        cols = [i for i in range(k + 1) if i != ch.patch]
        dV = J[:, :, cols]
        with np.errstate(all="ignore"):
            img = V[:, others] / Va[:, None] - ch_t.center
            dimg = (dV[:, others, :] * Va[:, None, None] - V[:, others, None] * dV[:, a : a + 1, :]) / (Va ** 2)[:, None, None]
            step = np.linalg.solve(dimg, (img - tgt)[..., None])[..., 0]
        step[~np.isfinite(step)] = np.nan
        z = z - step
        z[np.linalg.norm(z, axis=-1) > 1e3] = np.nan
    ok = np.isfinite(z).all(axis=-1)
    return z[ok]


def _grid_seeds(k: int, g: int) -> np.ndarray:
    r = np.linspace(-1.2, 1.2, g)
    axes = [r] * (2 * k)
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=-1)
    return flat[:, 0::2] + 1j * flat[:, 1::2]


# --------------------------------------------------------------------------
# fixed points on P^1
# --------------------------------------------------------------------------
def _scaled_iterate(f: ProjectiveEndomorphism, z: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """``(V, W) ~ (F^n(1, z), d/dz F^n(1, z))`` up to a common positive factor."""
    V = np.stack([np.ones_like(z), z], axis=-1)
    W = np.zeros_like(V)
    W[:, 1] = 1.0
    for _ in range(n):
        J = f.jacobian(V)
        V = f.apply(V)
        W = np.einsum("nij,nj->ni", J, W)
        s = np.linalg.norm(V, axis=-1)
        V = V / s[:, None]
        W = W / s[:, None]
    return V, W


def _newton_ratio(f: ProjectiveEndomorphism, z: np.ndarray, n: int) -> np.ndarray:
    """``h / h'`` for ``h(z) = b(z) - z a(z)`` with ``(a, b) = F^n(1, z)``."""
    V, W = _scaled_iterate(f, z, n)
    h = V[:, 1] - z * V[:, 0]
    dh = W[:, 1] - V[:, 0] - z * W[:, 0]
    with np.errstate(all="ignore"):
        r = h / dh
    return r


def _aberth(
    f: ProjectiveEndomorphism, n: int, z: np.ndarray, active=None, max_iter: int = 500, chunk: int = 384, trace=None
) -> np.ndarray:
    """Aberth-Ehrlich sweeps; only ``active`` entries move, all enter the repulsion sums."""
    z = z.astype(complex).copy()
    N = len(z)
    active = np.ones(N, dtype=bool) if active is None else active.copy()
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        r = _newton_ratio(f, z[idx], n)
        corr = np.empty(idx.size, dtype=complex)
        for s in range(0, idx.size, chunk):
            sub = idx[s : s + chunk]
            diff = z[sub, None] - z[None, :]
            diff[np.arange(sub.size), sub] = 1.0  # excluded below
            inv = 1.0 / diff
            inv[np.arange(sub.size), sub] = 0.0
            sigma = inv.sum(axis=1)
            rr = r[s : s + chunk]
            with np.errstate(all="ignore"):
                corr[s : s + chunk] = rr / (1.0 - rr * sigma)
        bad = ~np.isfinite(corr)
        corr[bad] = 0.0
        z[idx] -= corr
        done = (np.abs(corr) <= 1e-14 * np.maximum(1.0, np.abs(z[idx]))) & ~bad
        active[idx[done]] = False
        if trace is not None:
            trace.append(int(active.sum()))
    return z


def _fixed_points_p1(f: ProjectiveEndomorphism, n: int) -> np.ndarray:
    """Unit vectors of the fixed points of ``f^n`` (with repetition for multiple roots)."""
    d = f.degree
    inf = np.array([[0.0, 1.0]], dtype=complex)
    inf_fixed = bool(fs_distance(f.iterate(inf, n), inf)[0] < 1e-12)
    if inf_fixed:
        M, _ = fs_multiplier(f, inf, n)
        if abs(M[0, 0, 0] - 1) < 1e-6:
            raise DynamicsError("point at infinity is a multiple fixed point")
    n_affine = d ** n + (0 if inf_fixed else 1)

    # starting values: preimages of a repelling fixed point under f^n
    fixed = _fixed_points_small(f)
    mult1, _ = fs_multiplier(f, fixed, 1)
    mods = np.abs(mult1[:, 0, 0])
    seed = fixed[int(np.argmax(mods))]
    pts = _branch_seeds(f, seed, n)
    with np.errstate(all="ignore"):
        z0 = pts[:, 1] / pts[:, 0]
    finite = np.isfinite(z0) & (np.abs(z0) < 1e8)
    z0 = z0[finite]
    # pad / trim to the number of affine roots with points on a circle
    if len(z0) < n_affine:
        extra = n_affine - len(z0)
        ang = 2 * np.pi * (np.arange(extra) + 0.5) / extra
        R = 1.0 + float(np.median(np.abs(z0))) if len(z0) else 1.0
        z0 = np.concatenate([z0, R * np.exp(1j * ang)])
    z0 = z0[:n_affine]
    # symmetric or repeated starting values stall Aberth; a small seeded jitter,
    # well below the typical root spacing, breaks the symmetry
    rng = np.random.default_rng(len(z0))
    jitter = rng.standard_normal(len(z0)) + 1j * rng.standard_normal(len(z0))
    z0 = z0 + (0.05 / len(z0)) * jitter * np.maximum(1, np.abs(z0))
    # Newton first: most starting values converge quadratically to distinct roots
    z = z0.copy()
    conv = np.zeros(len(z), dtype=bool)
    for _ in range(12):
        r = _newton_ratio(f, z, n)
        ok = np.isfinite(r)
        z[ok] -= r[ok]
        conv = ok & (np.abs(r) <= 1e-14 * np.maximum(1.0, np.abs(z)))
    keep = np.zeros(len(z), dtype=bool)
    idx = np.nonzero(conv)[0]
    if idx.size:
        _, first = np.unique(np.round(z[idx] / 1e-9), return_index=True)
        keep[idx[first]] = True
    # non-converged or duplicated entries restart from their jittered seeds
    z = np.where(keep, z, z0)
    z = _aberth(f, n, z, active=~keep)
    for _ in range(3):
        r = _newton_ratio(f, z, n)
        r[~np.isfinite(r)] = 0
        z = z - r
    P = normalize_point(np.stack([np.ones_like(z), z], axis=-1))
    if inf_fixed:
        P = np.vstack([P, inf])
    return P


def _branch_seeds(f: ProjectiveEndomorphism, seed: np.ndarray, n: int, passes: int = 2) -> np.ndarray:
    """Approximate fixed points of the ``d^n`` inverse branches of ``f^n``.

    The preimage tree of ``seed`` gives one leaf per branch.  Each leaf is then
    pulled back again along its own path (choosing at every level the preimage
    closest to the path), which applies the same branch once more and shrinks
    the distance to the branch's fixed point by its contraction factor.
    """
    d = f.degree
    levels = [seed[None, :]]
    for _ in range(n):
        levels.append(preimages(f, levels[-1]).reshape(-1, 2))
    leaves = np.arange(d ** n)
    u = levels[-1]
    for _ in range(passes):
        for t in range(n):
            cand = preimages(f, u)  # (d^n, d, 2)
            target = levels[t + 1][leaves // d ** (n - t - 1)]
            dist = fs_distance(cand, target[:, None, :])
            u = cand[np.arange(len(u)), np.argmin(dist, axis=1)]
    return u


def _fixed_points_small(f: ProjectiveEndomorphism) -> np.ndarray:
    """Fixed points of ``f`` itself from the degree ``d+1`` binary form."""
    d = f.degree
    a = _binary_coefficients(f.components[0], d)
    b = _binary_coefficients(f.components[1], d)
    # Z_0 F_1 - Z_1 F_0 = sum (b_e Z_0^{d+1-e} Z_1^e) - sum (a_e Z_0^{d-e} Z_1^{e+1})
    g = np.zeros(d + 2, dtype=complex)
    g[: d + 1] += b
    g[1:] -= a
    # drop vanishing leading terms (fixed point at infinity)
    pts = []
    top = d + 1
    while top > 0 and abs(g[top]) < 1e-14 * np.abs(g).max():
        top -= 1
    if top < d + 1:
        pts.append(np.array([0.0, 1.0], dtype=complex))
    if top > 0:
        r = _roots_binary(g[None, : top + 1])[0]
        pts.extend(r)
    return np.array(pts)


# --------------------------------------------------------------------------
# public entry point
# --------------------------------------------------------------------------
def _records(f: ProjectiveEndomorphism, n: int, P: np.ndarray, counts: np.ndarray, delta_rep: float) -> Tuple[List[PeriodicPointRecord], int]:
    if len(P) == 0:
        return [], 0
    M, V = fs_multiplier(f, P, n)
    resid = fs_distance(V, P)
    # minimal periods
    period = np.full(len(P), n)
    for m in sorted(m for m in range(1, n) if n % m == 0):
        back = fs_distance(f.iterate(P, m), P)
        hit = (back < 1e-7) & (period == n)
        period[hit] = m
    records = []
    failures = 0
    allmods = np.sort(np.abs(np.linalg.eigvals(M)), axis=-1)
    for t in range(len(P)):
        if not resid[t] < RESIDUAL_TOL:
            failures += 1
            continue
        mods = tuple(float(x) for x in allmods[t])
        rep = mods[0] > 1 + delta_rep
        border = abs(mods[0] - 1) <= delta_rep
        records.append(
            PeriodicPointRecord(P[t].copy(), n, int(period[t]), M[t].copy(), mods, rep, border, float(resid[t]), int(counts[t]))
        )
    return records, failures


def find_periodic_points(
    f: ProjectiveEndomorphism,
    n: int,
    delta_dup: float = 1e-7,
    delta_rep: float = 1e-6,
    grid: int = 6,
) -> PeriodicPointSet:
    """Fixed points of ``f^n`` with multipliers, minimal periods and repulsivity.

    Parameters
    ----------
    f : ProjectiveEndomorphism
    n : int
        Iterate; on ``P^1`` requires ``d^n <= MAX_ROOTS``.
    delta_dup : float
        Points closer than this (Fubini-Study) are merged; the cluster size
        is recorded as the multiplicity.
    delta_rep : float
        A point is repulsive when every multiplier modulus exceeds ``1 + delta_rep``.
    grid : int
        Seeds per real axis for the heuristic search on non-split maps of ``P^2``.
    """
    if n < 1:
        raise DynamicsError("n must be at least 1")
    d, k = f.degree, f.dim
    expected = sum(d ** (t * n) for t in range(k + 1))
    if k == 1:
        if d ** n > MAX_ROOTS:
            raise DynamicsError(f"d^n = {d ** n} exceeds the root cap {MAX_ROOTS}")
        P = _fixed_points_p1(f, n)
        reps, counts = _dedup(P, delta_dup)
        recs, fails = _records(f, n, reps, counts, delta_rep)
        total = sum(r.multiplicity for r in recs)
        return PeriodicPointSet(n, recs, expected, total == expected and fails == 0, False, fails, "aberth")
    factors = f.product_factors()
    if factors is not None:
        f1, f2, g = factors
        if d ** n > MAX_ROOTS:
            raise DynamicsError(f"d^n = {d ** n} exceeds the root cap {MAX_ROOTS}")
        A = _fixed_points_p1(f1, n)
        B = _fixed_points_p1(f2, n)
        A = A[np.abs(A[:, 0]) > 1e-12]
        B = B[np.abs(B[:, 0]) > 1e-12]
        za, zb = A[:, 1] / A[:, 0], B[:, 1] / B[:, 0]
        aff = np.stack(np.broadcast_arrays(np.ones((len(za), len(zb))), za[:, None], zb[None, :]), axis=-1).reshape(-1, 3)
        L = _fixed_points_p1(g, n)
        line = np.column_stack([np.zeros(len(L)), L])
        P = normalize_point(np.vstack([aff, line]))
        reps, counts = _dedup(P, delta_dup)
        recs, fails = _records(f, n, reps, counts, delta_rep)
        total = sum(r.multiplicity for r in recs)
        return PeriodicPointSet(n, recs, expected, total == expected and fails == 0, False, fails, "product")
    found = []
    seeds = _grid_seeds(k, grid)
    for a in range(k + 1):
        ch = chart_data(np.eye(k + 1)[a])
        z = _newton_chart(f, n, ch, seeds)
        if len(z):
            found.append(normalize_point(chart_point(ch, z)))
    P = np.vstack(found) if found else np.zeros((0, k + 1), dtype=complex)
    reps, _ = _dedup(P, delta_dup)
    counts = np.ones(len(reps), dtype=int)
    recs, fails = _records(f, n, reps, counts, delta_rep)
    return PeriodicPointSet(n, recs, expected, len(recs) == expected, True, fails, "newton-grid")
