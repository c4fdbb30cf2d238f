"""Inverse branches along repelling periodic orbits and a desk-scale check of the
non-uniform hyperbolicity statements.

Along a periodic orbit ``x_0, x_{-1}, ...`` (``f(x_{-j-1}) = x_{-j}``) the
local inverses of ``f`` read in the standard affine charts form a contracting
periodic germ cocycle (fiber ``j`` is the chart at ``x_{-j}``).  Its
polynomial normal form provides the coordinate changes ``S``; the harness
then measures, for ``n = 1..n_max``:

1. containment of ``f^{-n}[B_{x_0}(r)]`` in the chart ball ``B_{x_{-n}}(M_0)``;
2. ``Lip f^{-n} <= L e^{-n chi_1 + n eps}``;
3. bi-Lipschitz bounds for ``S`` on the branch balls;
4. ``|(1/n) log |Lambda^s d_p f^n| - Sigma_s| <= (1/n) log T + eps`` on the
   pulled-back balls.

On a periodic orbit the tempered functions of the asymptotic statements are
constants; ``L`` and ``T`` are fitted on ``n <= n_max / 2`` and the bound is
then checked for every ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..cocycle import PeriodicGermCocycle
from ..jets import PolyMapJet, compose, evaluate, formal_inverse
from ..normalform import NormalForm, full_normal_form
from .endomorphism import (
    ChartData,
    DynamicsError,
    ProjectiveEndomorphism,
    chart_coords,
    chart_data,
    chart_map,
    chart_point,
    chart_radius,
    fs_multiplier,
    fs_tangent_map,
    normalize_point,
)
from .lyapunov import _log_exterior
from .periodic import PeriodicPointRecord

__all__ = ["BackwardOrbit", "inverse_branch", "NTReport", "verify_nt", "orbit_exponents", "chart_jacobian"]

DELTA_CRIT = 1e-8
BRANCH_TOL = 1e-8


def _ball_samples(k: int, n: int, seed: int) -> np.ndarray:
    """Seeded points of the closed unit ball of ``C^k``: center, boundary directions and interior points."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    half = n // 2
    radii = np.ones(n)
    radii[half:] = rng.uniform(0, 1, n - half) ** (1.0 / (2 * k))
    return np.vstack([np.zeros((1, k)), v * radii[:, None]])


def _chart_image(f: ProjectiveEndomorphism, src: ChartData, dst: ChartData, y: np.ndarray) -> np.ndarray:
    return chart_coords(dst, f.apply(chart_point(src, y)))


def chart_jacobian(f: ProjectiveEndomorphism, src: ChartData, dst: ChartData, y) -> np.ndarray:
    """Derivative of ``f`` from the chart ``src`` to the chart ``dst`` at chart points ``y`` (shape ``(N, k, k)``)."""
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    k = y.shape[-1]
    Z = chart_point(src, y)
    W = f.apply(Z)
    J = f.jacobian(Z)
    s_oth = [i for i in range(k + 1) if i != src.patch]
    d_oth = [i for i in range(k + 1) if i != dst.patch]
    dW = J[:, :, s_oth]  # (N, k+1, k)
    wp = W[:, dst.patch][:, None, None]
    return dW[:, d_oth, :] / wp - W[:, d_oth][:, :, None] * dW[:, dst.patch : dst.patch + 1, :] / wp**2


@dataclass(frozen=True)
class BackwardOrbit:
    """Inverse branch of ``f^n`` along a periodic orbit, sending ``x_0`` to ``x_{-n}``.

    ``centers[j]`` is ``x_{-j}`` for ``j = 0..n``; ``step_germs[j]`` is the
    local inverse of ``f`` from the chart at ``x_{-j}`` to the chart at
    ``x_{-j-1}`` (a truncated jet) and ``composite`` their composition.
    ``radius`` is a ball on which every step germ inverts ``f`` to
    ``1e-8``; ``chart_radius`` is the chart distortion radius ``M_0``.
    """

    f: ProjectiveEndomorphism = field(repr=False)
    record: PeriodicPointRecord
    n: int
    centers: np.ndarray
    charts: Tuple[ChartData, ...] = field(repr=False)
    chart_radius: float
    radius: float
    step_germs: Tuple[PolyMapJet, ...] = field(repr=False)
    composite: PolyMapJet = field(repr=False)

    def step(self, j: int, y, newton: int = 8) -> np.ndarray:
        """Exact local inverse at step ``j``: the jet value polished by Newton on the chart expression of ``f``."""
        src, dst = self.charts[j + 1], self.charts[j]
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        x = evaluate(self.step_germs[j], y)
        for _ in range(newton):
            r = _chart_image(self.f, src, dst, x) - y
            J = chart_jacobian(self.f, src, dst, x)
            x = x - np.linalg.solve(J, r[..., None])[..., 0]
        return x

    def pullback(self, y, newton: int = 8) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Pull chart points at ``x_0`` back along the orbit.

        Returns the points ``y_j`` (chart at ``x_{-j}``) and the derivatives
        ``D f^{-j}`` at ``y_0`` for ``j = 0..n``.
        """
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        k = y.shape[-1]
        pts = [y]
        A = np.broadcast_to(np.eye(k, dtype=complex), (len(y), k, k)).copy()
        ders = [A]
        for j in range(self.n):
            x = self.step(j, pts[-1], newton)
            J = chart_jacobian(self.f, self.charts[j + 1], self.charts[j], x)
            A = np.linalg.solve(J, A)
            pts.append(x)
            ders.append(A)
        return pts, ders

    def lipschitz(self, samples: int = 64, seed: int = 0) -> float:
        """Sampled ``sup |D f^{-n}|`` over the ball of radius ``radius`` at ``x_0``."""
        y = self.radius * _ball_samples(self.f.dim, samples, seed)
        _, ders = self.pullback(y)
        return float(np.max(np.linalg.norm(ders[-1], ord=2, axis=(-2, -1))))


def _orbit(f: ProjectiveEndomorphism, record: PeriodicPointRecord) -> np.ndarray:
    """The primitive cycle ``p, f(p), ...`` of the record."""
    P = record.period
    pts = [normalize_point(record.point)]
    for _ in range(P - 1):
        pts.append(f(pts[-1]))
    return np.array(pts)


def _step_jets(f: ProjectiveEndomorphism, cycle: np.ndarray, degree: int) -> Tuple[List[np.ndarray], List[PolyMapJet]]:
    """Backward centers ``x_{-j}`` (one period) and the inverse germs ``x_{-j} -> x_{-j-1}``."""
    P = len(cycle)
    back = [cycle[(-j) % P] for j in range(P + 1)]
    jets = []
    for j in range(P):
        fwd = chart_map(f, back[j + 1], degree=degree, image=back[j])
        jets.append(formal_inverse(fwd))
    return back, jets


def _branch_radius(f, charts, jets, start: float, seed: int = 0, floor: float = 1e-12) -> float:
    k = f.dim
    unit = _ball_samples(k, 64, seed)
    r = start
    while r >= floor:
        ok = True
        for j, g in enumerate(jets):
            y = r * unit
            x = evaluate(g, y)
            err = np.max(np.linalg.norm(_chart_image(f, charts[j + 1], charts[j], x) - y, axis=-1))
            if not np.isfinite(err) or err > BRANCH_TOL:
                ok = False
                break
        if ok:
            return r
        r /= 2
    raise DynamicsError("inverse branch radius collapsed below 1e-12")


def _check_orbit(f: ProjectiveEndomorphism, cycle: np.ndarray) -> None:
    if f.degree < 2:
        raise DynamicsError("inverse branches need algebraic degree >= 2")
    jac = np.abs(np.linalg.det(fs_tangent_map(f, cycle)))
    if np.min(jac) <= DELTA_CRIT:
        raise DynamicsError(f"periodic orbit meets the critical set (|Jac| = {np.min(jac):.3e})")


def inverse_branch(
    f: ProjectiveEndomorphism,
    record: PeriodicPointRecord,
    n: Optional[int] = None,
    radius: Optional[float] = None,
    degree: int = 8,
) -> BackwardOrbit:
    """Inverse branch of ``f^n`` sending the periodic point ``x_0`` to ``x_{-n}``.

    ``n`` defaults to the primitive period.  The branch radius starts at
    ``min(radius, M_0)`` and is halved until every step germ composed with
    ``f`` is the identity to ``1e-8`` on sampled points of its ball.
    """
    cycle = _orbit(f, record)
    _check_orbit(f, cycle)
    P = len(cycle)
    n = P if n is None else int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    back, jets = _step_jets(f, cycle, degree)
    M0 = min(chart_radius(c) for c in cycle)
    charts_cycle = [chart_data(c) for c in back]
    r = _branch_radius(f, charts_cycle, jets, M0 if radius is None else min(radius, M0))
    centers = np.array([back[j % P] for j in range(n + 1)])
    charts = tuple(chart_data(c) for c in centers)
    steps = tuple(jets[j % P] for j in range(n))
    comp = steps[0]
    for g in steps[1:]:
        comp = compose(g, comp)
    return BackwardOrbit(f, record, n, centers, charts, M0, r, steps, comp)


# --------------------------------------------------------------------------
# harness
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class NTReport:
    """Outcome of :func:`verify_nt`.  Arrays are indexed by ``n = 1..n_max``."""

    chi: Tuple[float, ...]
    chi1: float
    eps: float
    sigma: Dict[int, float]
    radius: float
    chart_radius: float
    containment: np.ndarray
    containment_ok: bool
    bilipschitz: np.ndarray  # (n_max, 2): min and max ratio
    bilipschitz_bounds: Tuple[float, float]
    bilipschitz_ok: bool
    lipschitz: np.ndarray
    L_fit: float
    lipschitz_ok: bool
    deviation: Dict[int, np.ndarray]
    logT_fit: Dict[int, float]
    exterior_ok: bool
    normal_form: NormalForm = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.containment_ok and self.bilipschitz_ok and self.lipschitz_ok and self.exterior_ok

    def rows(self) -> List[Dict[str, float]]:
        out = []
        for i in range(len(self.lipschitz)):
            row = {
                "n": i + 1,
                "containment_radius": float(self.containment[i]),
                "bilip_min": float(self.bilipschitz[i, 0]),
                "bilip_max": float(self.bilipschitz[i, 1]),
                "lipschitz": float(self.lipschitz[i]),
                "lipschitz_bound": self.L_fit * math.exp(-(i + 1) * (self.chi1 - self.eps)),
            }
            for s, dev in self.deviation.items():
                row[f"deviation_s{s}"] = float(dev[i])
                row[f"deviation_bound_s{s}"] = self.logT_fit[s] / (i + 1) + self.eps
            out.append(row)
        return out


def orbit_exponents(f: ProjectiveEndomorphism, record: PeriodicPointRecord) -> Tuple[float, ...]:
    """Exponents ``(1/P) log |eigenvalues|`` of the cycle's monodromy, ascending."""
    P = record.period
    M, _ = fs_multiplier(f, record.point, P)
    ev = np.abs(np.linalg.eigvals(M[0]))
    return tuple(sorted(float(np.log(v) / P) for v in ev))


def verify_nt(
    f: ProjectiveEndomorphism,
    record: PeriodicPointRecord,
    n_max: int = 20,
    eps: Optional[float] = None,
    samples: int = 64,
    seed: int = 0,
    degree: int = 8,
) -> NTReport:
    """Run the four checks for ``n = 1..n_max`` along the cycle of ``record``.

    ``chi_1`` is the smallest exponent of the cycle and ``eps`` defaults to
    ``chi_1 / 20`` (it must stay below ``chi_1 / 10``).
    """
    chi = orbit_exponents(f, record)
    chi1 = chi[0]
    if chi1 <= 0:
        raise DynamicsError("the periodic orbit is not repelling")
    eps = chi1 / 20 if eps is None else float(eps)
    if not 0 < eps < chi1 / 10:
        raise DynamicsError(f"eps must lie in (0, chi_1/10) = (0, {chi1 / 10:.6g})")
    k = f.dim
    sigma = {s: math.fsum(sorted(chi)[::-1][:s]) for s in range(1, k + 1)}
    br = inverse_branch(f, record, n_max, degree=degree)
    P = record.period

    # normal form of the inverse-branch germ cocycle: S_j = V_{j mod P}
    G = PeriodicGermCocycle(br.step_germs[:P])
    nf = full_normal_form(G, eps=eps)
    h = nf.reduction.h_bound
    lo_b, hi_b = 0.5, 1.5 * h

    unit = _ball_samples(k, samples, seed)
    pts, ders = br.pullback(br.radius * unit)
    rng = np.random.default_rng(seed + 1)
    pair_a = br.radius * unit[rng.integers(len(unit), size=4 * samples)]
    pair_b = br.radius * unit[rng.integers(len(unit), size=4 * samples)]
    keep = np.linalg.norm(pair_a - pair_b, axis=-1) > 1e-3 * br.radius
    pair_a, pair_b = pair_a[keep], pair_b[keep]

    cont, lip, bil = [], [], []
    dev = {s: [] for s in sigma}
    bil_fiber = {}
    for j in range(P):
        Va, Vb = evaluate(nf.V[j], pair_a), evaluate(nf.V[j], pair_b)
        ratio = np.linalg.norm(Va - Vb, axis=-1) / np.linalg.norm(pair_a - pair_b, axis=-1)
        bil_fiber[j] = (float(ratio.min()), float(ratio.max()))
    for n in range(1, n_max + 1):
        cont.append(float(np.max(np.linalg.norm(pts[n], axis=-1))))
        A = ders[n]
        lip.append(float(np.max(np.linalg.norm(A, ord=2, axis=(-2, -1)))))
        fwd = np.linalg.inv(A)  # d f^n at the pulled-back points
        for s in sigma:
            dev[s].append(float(np.max(np.abs(_log_exterior(fwd, s) / n - sigma[s]))))
        bil.append(bil_fiber[n % P])
    cont = np.array(cont)
    lip = np.array(lip)
    bil = np.array(bil)
    dev = {s: np.array(v) for s, v in dev.items()}
    ns = np.arange(1, n_max + 1)
    half = max(1, n_max // 2)

    L_n = lip * np.exp(ns * (chi1 - eps))
    L_fit = float(np.max(L_n[:half]))
    lip_ok = bool(np.all(L_n <= L_fit * (1 + 1e-9)))
    logT, ext_ok = {}, True
    for s, d in dev.items():
        need = ns * (d - eps)
        logT[s] = max(0.0, float(np.max(need[:half])))
        ext_ok = ext_ok and bool(np.all(need <= logT[s] + 1e-9))
    return NTReport(
        chi=chi,
        chi1=chi1,
        eps=eps,
        sigma=sigma,
        radius=br.radius,
        chart_radius=br.chart_radius,
        containment=cont,
        containment_ok=bool(np.all(cont <= br.chart_radius)),
        bilipschitz=bil,
        bilipschitz_bounds=(lo_b, hi_b),
        bilipschitz_ok=bool(np.all(bil[:, 0] >= lo_b) and np.all(bil[:, 1] <= hi_b)),
        lipschitz=lip,
        L_fit=L_fit,
        lipschitz_ok=lip_ok,
        deviation=dev,
        logT_fit=logT,
        exterior_ok=ext_ok,
        normal_form=nf,
    )
