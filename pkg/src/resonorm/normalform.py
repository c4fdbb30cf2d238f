"""Polynomial normal forms of contracting germ cocycles.

The pipeline

1. reduces the linear part to block diagonal form (:func:`oseledec_reduce`),
2. removes non-resonant terms degree by degree by solving the homological
   equation ``H_i + Q_{i+1} o A_i - A_i o Q_i = R(H_i)``
   (:func:`solve_homological`, :func:`normalize_step`, :func:`normalize`),
3. kills the remaining high-order sub-resonant tail with the renormalisation
   limit ``T_i = lim N_i^{-1} o ... o N_{i+n-1}^{-1} o F_{i+n-1} o ... o F_i``
   (:func:`renormalize_limit`),

and returns conjugacies ``V_i`` with ``V_{i+1} o G_i = R_i o V_i`` where every
``R_i`` is a polynomial made of linear and resonant monomials only.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _series as ser
from .cocycle import (
    CocycleError,
    OrbitFunction,
    PeriodicGermCocycle,
    PeriodicLinearCocycle,
    ReductionResult,
    conjugate,
    iterate,
    oseledec_reduce,
    slow_function,
)
from .jets import (
    MultiIndex,
    PolyMapJet,
    _apply_linear,
    compose,
    derivative_at,
    evaluate,
    formal_inverse,
    lipschitz_bound_on_ball,
    multi_indices,
)
from .spectrum import (
    ContractionSpectrum,
    Part,
    ResonanceClass,
    ResonanceTable,
    SpectrumError,
    build_table,
    project,
)

__all__ = [
    "NormalFormError",
    "IllConditionedWarning",
    "HomologicalSolution",
    "ConjugationChain",
    "RenormReport",
    "NormalForm",
    "GrowthSeries",
    "solve_homological",
    "homological_series",
    "normalize_step",
    "normalize",
    "renormalize_limit",
    "full_normal_form",
    "iterate_resonant",
    "resonant_norm_growth",
    "resonant_derivative_growth",
    "growth_theta",
]

CONDITIONING_WARN = 1e8


class NormalFormError(ValueError):
    """A normal-form stage failed its checks."""


class IllConditionedWarning(UserWarning):
    """The homological solve is badly conditioned (near resonance)."""


# --------------------------------------------------------------------------
# homological equation
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class HomologicalSolution:
    """Solution of the homological equation at one degree.

    ``Q`` has no resonant terms, ``R`` is the resonant part of ``H``;
    ``residual`` is the largest coefficient of
    ``H_i + Q_{i+1} o A_i - A_i o Q_i - R_i`` and ``conditioning`` the ratio
    ``max|Q| / max|H|``.  ``series_agreement`` compares ``Q`` with the
    independently summed series (``nan`` when not checked).
    """

    degree: int
    Q: Tuple[PolyMapJet, ...]
    R: Tuple[PolyMapJet, ...]
    residual: float
    conditioning: float
    series_agreement: float = math.nan


def _linear_forms(A: np.ndarray) -> List[ser.Series]:
    k = A.shape[0]
    forms = []
    for t in range(k):
        forms.append({tuple(int(s == u) for u in range(k)): complex(A[t, s]) for s in range(k) if A[t, s] != 0})
    return forms


def _substitution_matrix(A: np.ndarray, mons: Sequence[MultiIndex]) -> np.ndarray:
    """``P[a', a]`` = coefficient of ``z**a'`` in ``(A z)**a`` (all of one degree)."""
    k = A.shape[0]
    m = sum(mons[0])
    forms = _linear_forms(A)
    index = {a: n for n, a in enumerate(mons)}
    P = np.zeros((len(mons), len(mons)), dtype=complex)
    cache: Dict[Tuple[int, int], ser.Series] = {}
    for col, alpha in enumerate(mons):
        acc = ser.constant(1.0, k)
        for t, e in enumerate(alpha):
            if e:
                pw = cache.get((t, e))
                if pw is None:
                    pw = ser.power(forms[t], e, m, k)
                    cache[(t, e)] = pw
                acc = ser.mul(acc, pw, m)
        for b, v in acc.items():
            row = index.get(b)
            if row is None:
                if abs(v) > 1e-12:
                    raise NormalFormError("linear part mixes blocks; reduce it to block diagonal form first")
                continue
            P[row, col] += v
    return P


def _check_block_diagonal(A: PeriodicLinearCocycle, spec: ContractionSpectrum) -> None:
    if A.dim != spec.dim:
        raise NormalFormError(f"linear part has dimension {A.dim}, spectrum has {spec.dim}")
    for i, M in enumerate(A):
        scale = max(float(np.abs(M).max()), 1e-300)
        for j in range(spec.n_blocks):
            sl = spec.block_slice(j)
            mask = np.ones(spec.dim, dtype=bool)
            mask[sl] = False
            off = max(float(np.abs(M[sl][:, mask]).max(initial=0.0)), float(np.abs(M[mask][:, sl]).max(initial=0.0)))
            if off > 1e-12 * scale:
                raise NormalFormError(f"A_{i} is not block diagonal for the given spectrum (coupling {off:.3e})")


def _units(spec: ContractionSpectrum, m: int) -> Dict[Tuple[int, Tuple[int, ...]], List[MultiIndex]]:
    """Monomials of degree ``m`` grouped by (output block, block-degree profile)."""
    groups: Dict[Tuple[int, ...], List[MultiIndex]] = {}
    for alpha in multi_indices(spec.dim, m):
        groups.setdefault(spec.profile(alpha), []).append(alpha)
    return {(j, prof): mons for j in range(spec.n_blocks) for prof, mons in groups.items()}


def _as_linear(A) -> PeriodicLinearCocycle:
    if isinstance(A, PeriodicLinearCocycle):
        return A
    if isinstance(A, ReductionResult):
        return A.linear_cocycle()
    return PeriodicLinearCocycle(tuple(A))


def _homological_residual(A: PeriodicLinearCocycle, H, Q, R) -> float:
    p = A.period
    worst = 0.0
    for i in range(p):
        D = H[i].degree
        lhs = H[i] + compose(Q[(i + 1) % p], PolyMapJet.linear(A[i], D)) - _apply_linear(A[i], Q[i]) - R[i]
        worst = max(worst, lhs.max_abs())
    return worst


def solve_homological(
    A,
    H: Sequence[PolyMapJet],
    spec: ContractionSpectrum,
    table: Optional[ResonanceTable] = None,
    check_series: bool = True,
    series_tol: float = 1e-8,
) -> HomologicalSolution:
    """Solve ``H_i + Q_{i+1} o A_i - A_i o Q_i = R(H_i)`` around the orbit.

    Parameters
    ----------
    A : PeriodicLinearCocycle or sequence of matrices
        Block-diagonal linear parts, blocks ordered as in ``spec``.
    H : sequence of PolyMapJet
        Homogeneous jets of a common degree ``m >= 2``, one per orbit point.
    spec, table
        Contraction spectrum and (optionally) a prebuilt resonance table.
    check_series : bool
        Also sum the convergent series for ``Q`` and require agreement with
        the direct solve to ``series_tol``.

    Returns
    -------
    HomologicalSolution

    Notes
    -----
    Each (output block, block-degree profile) pair is an independent cyclic
    linear system because block-diagonal maps preserve profiles.  Resonant
    units are left in ``R`` with ``Q = 0``.
    """
    A = _as_linear(A)
    table = build_table(spec) if table is None else table
    p = A.period
    if len(H) != p:
        raise NormalFormError(f"need {p} homogeneous jets, got {len(H)}")
    degrees = {sum(a) for h in H for _, a in h.coeffs}
    if len(degrees) > 1:
        raise NormalFormError(f"H must be homogeneous of one degree, found degrees {sorted(degrees)}")
    m = degrees.pop() if degrees else 2
    if m < 2:
        raise NormalFormError("homological equation is posed at degree >= 2")
    _check_block_diagonal(A, spec)
    k, D = spec.dim, H[0].degree
    Q = [dict() for _ in range(p)]
    R = [dict() for _ in range(p)]

    for (j, prof), mons in _units(spec, m).items():
        sl = spec.block_slice(j)
        comps = list(range(sl.start, sl.stop))
        rhs_blocks = [np.array([H[i][(c, a)] for c in comps for a in mons]) for i in range(p)]
        if not any(np.any(b != 0) for b in rhs_blocks):
            continue
        cls = table.classify(j, mons[0])
        if cls is ResonanceClass.RESONANT:
            for i in range(p):
                for (c, a), v in zip(((c, a) for c in comps for a in mons), rhs_blocks[i]):
                    if v != 0:
                        R[i][(c, a)] = v
            continue
        nm, kj = len(mons), len(comps)
        size = nm * kj
        system = np.zeros((p * size, p * size), dtype=complex)
        for i in range(p):
            Pi = _substitution_matrix(A[i], mons)
            sub = np.kron(np.eye(kj), Pi)
            mul = np.kron(A[i][sl, sl], np.eye(nm))
            r0, c_here, c_next = i * size, i * size, ((i + 1) % p) * size
            system[r0 : r0 + size, c_next : c_next + size] += sub
            system[r0 : r0 + size, c_here : c_here + size] -= mul
        x = np.linalg.solve(system, -np.concatenate(rhs_blocks))
        for i in range(p):
            for (c, a), v in zip(((c, a) for c in comps for a in mons), x[i * size : (i + 1) * size]):
                if v != 0:
                    Q[i][(c, a)] = v

    Qj = tuple(PolyMapJet(k, D, q) for q in Q)
    Rj = tuple(PolyMapJet(k, D, r) for r in R)
    hmax = max(h.max_abs() for h in H)
    cond = max(q.max_abs() for q in Qj) / hmax if hmax > 0 else 0.0
    if cond > CONDITIONING_WARN:
        warnings.warn(f"homological solve at degree {m} has conditioning {cond:.3e}", IllConditionedWarning, stacklevel=2)
    resid = _homological_residual(A, H, Qj, Rj)
    agreement = math.nan
    if check_series:
        Qs = homological_series(A, H, spec, table)
        agreement = max(a.distance(b) for a, b in zip(Qj, Qs))
        if agreement > series_tol * max(1.0, max(q.max_abs() for q in Qj)):
            raise NormalFormError(f"direct solve and series disagree by {agreement:.3e} at degree {m}")
    return HomologicalSolution(m, Qj, Rj, resid, cond, agreement)


def homological_series(
    A,
    H: Sequence[PolyMapJet],
    spec: ContractionSpectrum,
    table: Optional[ResonanceTable] = None,
    tol: float = 1e-15,
    max_sweeps: int = 100000,
) -> Tuple[PolyMapJet, ...]:
    """Sum the convergent series for the non-resonant solution.

    Sub-resonant terms satisfy ``Q_i = A_i^{-1} o (M_i + Q_{i+1} o A_i)`` and
    super-resonant ones ``Q_{i+1} = (A_i o Q_i - M_i) o A_i^{-1}``; both maps
    are contractions, and ``n`` simultaneous sweeps give exactly the ``n``-term
    partial sums.  Sweeping stops when an update changes no coefficient by
    more than ``tol`` relative to the size of the data and of the iterate
    (rounding keeps the change near machine precision of the largest
    coefficient, so a bound relative to the data alone may never be met).
    """
    A = _as_linear(A)
    table = build_table(spec) if table is None else table
    p, k = A.period, spec.dim
    D = H[0].degree

    def part(h: PolyMapJet, cls: Part) -> PolyMapJet:
        return project(h, table, cls)

    Msub = [part(h, Part.SUB) for h in H]
    Msup = [part(h, Part.SUPER) for h in H]
    Ainv = [np.linalg.inv(A[i]) for i in range(p)]
    Lin = [PolyMapJet.linear(A[i], D) for i in range(p)]
    Linv = [PolyMapJet.linear(Ainv[i], D) for i in range(p)]
    scale = max(1.0, max(h.max_abs() for h in H))

    sub = [PolyMapJet.zero(k, D) for _ in range(p)]
    if any(not x.is_zero() for x in Msub):
        for _ in range(max_sweeps):
            new = [_apply_linear(Ainv[i], Msub[i] + compose(sub[(i + 1) % p], Lin[i])) for i in range(p)]
            change = max(a.distance(b) for a, b in zip(new, sub))
            sub = new
            if change <= tol * max(scale, max(g.max_abs() for g in sub)):
                break
    sup = [PolyMapJet.zero(k, D) for _ in range(p)]
    if any(not x.is_zero() for x in Msup):
        for _ in range(max_sweeps):
            new = [None] * p
            for i in range(p):
                new[(i + 1) % p] = compose(_apply_linear(A[i], sup[i]) - Msup[i], Linv[i])
            change = max(a.distance(b) for a, b in zip(new, sup))
            sup = new
            if change <= tol * max(scale, max(g.max_abs() for g in sup)):
                break
    return tuple(a + b for a, b in zip(sub, sup))


# --------------------------------------------------------------------------
# degree-by-degree normalisation
# --------------------------------------------------------------------------
def _identity_plus(Q: PolyMapJet) -> PolyMapJet:
    return PolyMapJet.identity(Q.dim, Q.degree) + Q


def normalize_step(
    K: PeriodicGermCocycle,
    m: int,
    spec: ContractionSpectrum,
    table: Optional[ResonanceTable] = None,
    tol: float = 1e-10,
) -> Tuple[PeriodicGermCocycle, PeriodicGermCocycle, HomologicalSolution]:
    """One normalisation step at degree ``m``.

    Returns ``(S, K_hat, solution)`` where ``S_i = I + Q_i`` and
    ``K_hat_i = S_{i+1} o K_i o S_i^{-1}``.  The degree-``m`` part of
    ``K_hat`` equals the resonant part of ``K^(m)`` and lower degrees are
    untouched (both checked to ``tol`` relative to the coefficient scale).
    """
    table = build_table(spec) if table is None else table
    A = K.linear_part()
    H = [g.homogeneous_part(m) for g in K]
    sol = solve_homological(A, H, spec, table)
    S = [_identity_plus(q) for q in sol.Q]
    Sinv = [formal_inverse(s) for s in S]
    Khat = conjugate(K, S, Sinv)
    scale = max(1.0, max(g.max_abs() for g in K))
    for i in range(K.period):
        low_old = K[i].filter(lambda c, a: sum(a) < m)
        low_new = Khat[i].filter(lambda c, a: sum(a) < m)
        if low_old.distance(low_new) > tol * scale:
            raise NormalFormError(f"normalisation at degree {m} altered lower degrees")
        if Khat[i].homogeneous_part(m).distance(sol.R[i]) > tol * scale:
            raise NormalFormError(f"degree-{m} part after normalisation is not the resonant part")
    return PeriodicGermCocycle(tuple(S)), Khat, sol


@dataclass(frozen=True)
class ConjugationChain:
    """Result of :func:`normalize`.

    ``U_i`` is the accumulated conjugacy: ``U_{i+1} o G_i o U_i^{-1} = F_i``.
    ``radii[s]`` is a slow orbit function of radii on which step ``s`` is
    ``e^gamma``-bi-Lipschitz.
    """

    steps: Tuple[Tuple[int, PeriodicGermCocycle], ...]
    U: Tuple[PolyMapJet, ...]
    F: PeriodicGermCocycle
    radii: Tuple[OrbitFunction, ...]
    gamma: float
    solutions: Tuple[HomologicalSolution, ...] = field(repr=False, default=())


def _step_gamma(spec: ContractionSpectrum, order: int) -> float:
    c = math.exp(spec.exponents[0] + 2 * spec.epsilon)
    if order < 2:
        return math.log(2)
    return min(math.log(0.9 / c) / (2 * (order - 1)), math.log(2) / (order - 1))


def _bilipschitz_radius(Q: PolyMapJet, gamma: float, floor_exp: int = 60) -> float:
    """Largest dyadic ``r`` with ``Lip(Q) <= 1 - e^{-gamma}`` on the ball of radius ``r e^gamma``."""
    if Q.is_zero():
        return 1.0
    target = 1 - math.exp(-gamma)
    for e in range(floor_exp + 1):
        r = 2.0 ** (-e)
        if lipschitz_bound_on_ball(Q, r * math.exp(gamma)) <= target:
            return r
    return 2.0 ** (-floor_exp)


def normalize(
    G: PeriodicGermCocycle,
    spec: ContractionSpectrum,
    table: Optional[ResonanceTable] = None,
    order: Optional[int] = None,
) -> ConjugationChain:
    """Normalise degrees ``2..order`` (default ``q~``) of a block-diagonal cocycle."""
    table = build_table(spec) if table is None else table
    order = spec.q_tilde if order is None else int(order)
    if order > G.degree:
        raise NormalFormError(f"order {order} exceeds the jet degree {G.degree}")
    gamma = _step_gamma(spec, max(order, 2))
    U = [PolyMapJet.identity(G.dim, G.degree) for _ in range(G.period)]
    steps, radii, sols = [], [], []
    F = G
    for m in range(2, order + 1):
        S, F, sol = normalize_step(F, m, spec, table)
        U = [compose(S[i], U[i]) for i in range(G.period)]
        steps.append((m, S))
        sols.append(sol)
        raw = [_bilipschitz_radius(q, gamma) for q in sol.Q]
        radii.append(slow_function(raw, spec.epsilon))
    return ConjugationChain(tuple(steps), tuple(U), F, tuple(radii), gamma, tuple(sols))


# --------------------------------------------------------------------------
# renormalisation
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class RenormReport:
    """Diagnostics of :func:`renormalize_limit`.

    ``deltas[n]`` is the largest coefficient change between consecutive
    iterates; ``fitted_ratio`` is ``exp`` of the least-squares slope of
    ``log deltas`` above the noise floor and ``theta``/``theta_min`` the
    contraction constants ``theta`` and ``M^{q+1}/m``.  ``tangency`` is the
    largest coefficient of degree ``<= q`` that rounding put into ``T - I``
    and that was projected out.
    """

    T: Tuple[PolyMapJet, ...]
    deltas: Tuple[float, ...]
    converged: bool
    iterations: int
    fitted_ratio: float
    theta: float
    theta_min: float
    m: float
    M: float
    residual: float
    tangency: float
    error_law: Tuple[float, ...] = ()


def _fit_ratio(deltas: Sequence[float], floor: float = 1e-13) -> float:
    d = np.asarray(deltas, dtype=float)
    idx = np.nonzero(d > floor)[0]
    if len(idx) < 3:
        return math.nan
    idx = idx[len(idx) // 3 :] if len(idx) >= 6 else idx
    slope = np.polyfit(idx.astype(float), np.log(d[idx]), 1)[0]
    return float(math.exp(slope))


def renormalize_limit(
    F: PeriodicGermCocycle,
    N: PeriodicGermCocycle,
    q: int,
    radius: float = 0.05,
    n_max: int = 200,
    tol: float = 1e-12,
    theta: Optional[float] = None,
    require_convergence: bool = True,
) -> RenormReport:
    """Limit ``T`` of ``T_{i,n+1} = N_i^{-1} o T_{i+1,n} o F_i`` with ``T_{i+1} o F_i = N_i o T_i``.

    ``F`` and ``N`` must agree through degree ``q`` and satisfy
    ``M^{q+1} < m`` for the extreme singular values ``m, M`` of their linear
    parts.  Iteration stops once two consecutive coefficient changes fall
    below ``tol``.  ``error_law`` samples ``sup_{|v|=radius} |N^n T v - F^n v| / radius^{q+1}``,
    which decays like ``(m theta)^n``.
    """
    p = F.period
    if N.period != p or N.dim != F.dim:
        raise NormalFormError("F and N must share period and dimension")
    D = min(F.degree, N.degree)
    tang = max(F[i].filter(lambda c, a: sum(a) <= q).distance(N[i].filter(lambda c, a: sum(a) <= q)) for i in range(p))
    if tang > 1e-10 * max(1.0, max(g.max_abs() for g in F)):
        raise NormalFormError(f"F and N are not tangent through degree {q} (difference {tang:.3e})")
    sv = [np.linalg.svd(F[i].linear_part(), compute_uv=False) for i in range(p)]
    m_ = float(min(s.min() for s in sv))
    M_ = float(max(s.max() for s in sv))
    theta_min = M_ ** (q + 1) / m_
    if not (M_ < 1 and theta_min < 1):
        raise NormalFormError(f"contraction condition fails: M^(q+1)/m = {theta_min:.6g}")
    th = (theta_min + 1) / 2 if theta is None else float(theta)
    if not theta_min < th < 1:
        raise NormalFormError(f"theta={th} must lie in ({theta_min:.6g}, 1)")

    Ninv = [formal_inverse(N[i].truncate(D)) for i in range(p)]
    Ft = [F[i].truncate(D) for i in range(p)]
    ident = PolyMapJet.identity(F.dim, D)
    T = [ident for _ in range(p)]
    deltas: List[float] = []
    converged = False
    tangency = 0.0
    for _ in range(n_max):
        new = [compose(Ninv[i], compose(T[(i + 1) % p], Ft[i])) for i in range(p)]
        # The limit is tangent to the identity through degree q.  Rounding
        # leaves ~1e-16 there, and super-resonant monomials of degree <= q
        # amplify it every step, so the low-degree part is projected out.
        low = [(t - ident).filter(lambda c, a: sum(a) <= q) for t in new]
        tangency = max(tangency, max(x.max_abs() for x in low))
        new = [t - x for t, x in zip(new, low)]
        deltas.append(max(a.distance(b) for a, b in zip(new, T)))
        T = new
        if len(deltas) >= 2 and deltas[-1] < tol and deltas[-2] < tol:
            converged = True
            break
    if require_convergence and not converged:
        raise NormalFormError(f"renormalisation did not converge in {n_max} iterations (last change {deltas[-1]:.3e})")
    resid = max(compose(T[(i + 1) % p], Ft[i]).distance(compose(N[i].truncate(D), T[i])) for i in range(p))
    if require_convergence and resid >= 10 * tol * max(1.0, max(g.max_abs() for g in F)):
        raise NormalFormError(f"limit does not conjugate F to N (residual {resid:.3e})")
    if tangency > 1e-10:
        raise NormalFormError(f"iterates drift from the identity through degree {q} ({tangency:.3e})")
    law = _error_law(F, N, T, q, radius, n_steps=min(12, 3 * p + 6))
    return RenormReport(tuple(T), tuple(deltas), converged, len(deltas), _fit_ratio(deltas), th, theta_min, m_, M_, resid, tangency, law)


def _error_law(F, N, T, q, radius, n_steps, samples=16, seed=0):
    rng = np.random.default_rng(seed)
    k = F.dim
    v = rng.standard_normal((samples, k)) + 1j * rng.standard_normal((samples, k))
    v = radius * v / np.linalg.norm(v, axis=1, keepdims=True)
    a = evaluate(T[0], v)
    b = v.copy()
    out = []
    for n in range(n_steps):
        a = evaluate(N[n], a)
        b = evaluate(F[n], b)
        out.append(float(np.max(np.linalg.norm(a - b, axis=1))) / radius ** (q + 1))
    return tuple(out)


# --------------------------------------------------------------------------
# full pipeline
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class NormalForm:
    """Conjugacy ``V`` and polynomial normal form ``R`` with ``V_{i+1} o G_i = R_i o V_i``.

    ``V_i = T_i o U_i o C_i`` collects the block reduction ``C``, the
    degree-by-degree normalisation ``U`` and the renormalisation limit ``T``.
    """

    V: Tuple[PolyMapJet, ...]
    R: PeriodicGermCocycle
    reduction: ReductionResult
    spectrum: ContractionSpectrum
    table: ResonanceTable
    chain: ConjugationChain
    renorm: RenormReport
    residual: float


def _resonant_projection(F: PeriodicGermCocycle, table: ResonanceTable) -> PeriodicGermCocycle:
    R = []
    for g in F:
        R.append(project(g, table, Part.LINEAR) + project(g, table, Part.RESONANT))
    return PeriodicGermCocycle(tuple(R))


def full_normal_form(
    G: PeriodicGermCocycle,
    spec: Optional[ContractionSpectrum] = None,
    eps: float = 0.05,
    tol: float = 1e-12,
    n_max: int = 400,
) -> NormalForm:
    """Polynomial normal form of a contracting periodic germ cocycle.

    Parameters
    ----------
    G : PeriodicGermCocycle
    spec : ContractionSpectrum, optional
        Expected spectrum.  If given, its precision is used and the recovered
        exponents must match it.
    eps : float
        Precision used when ``spec`` is omitted.
    """
    e = spec.epsilon if spec is not None else eps
    red = oseledec_reduce(G.linear_part(), e)
    found = red.spectrum
    if spec is not None:
        if spec.multiplicities != found.multiplicities or np.max(np.abs(np.subtract(spec.exponents, found.exponents))) > 1e-8:
            raise NormalFormError(f"recovered spectrum {found.exponents}/{found.multiplicities} does not match the given one")
        found = spec
    table = build_table(found)
    D = G.degree
    Cj = [PolyMapJet.linear(C, D) for C in red.change_of_basis]
    Cinv = [PolyMapJet.linear(np.linalg.inv(C), D) for C in red.change_of_basis]
    Gb = conjugate(G, Cj, Cinv)
    # make the linear part exactly block diagonal (it agrees with A to rounding)
    Gb = PeriodicGermCocycle(
        tuple(g.filter(lambda c, a: sum(a) >= 2) + PolyMapJet.linear(A, D) for g, A in zip(Gb, red.conjugated))
    )
    q = found.q_tilde
    chain = normalize(Gb, found, table, order=min(max(q, 1), D))
    F = chain.F
    R = _resonant_projection(F, table)
    ren = renormalize_limit(F, R, q, tol=tol, n_max=n_max)
    V = tuple(compose(ren.T[i], compose(chain.U[i], Cj[i])) for i in range(G.period))
    p = G.period
    resid = max(compose(V[(i + 1) % p], G[i]).distance(compose(R[i], V[i])) for i in range(p))
    if resid >= 1e-8:
        raise NormalFormError(f"normal form conjugacy residual {resid:.3e} >= 1e-8")
    for g in R:
        if not (project(g, table, Part.SUB).is_zero() and project(g, table, Part.SUPER).is_zero()):
            raise NormalFormError("normal form contains non-resonant terms")
    return NormalForm(V, R, red, found, table, chain, ren, resid)


# --------------------------------------------------------------------------
# resonant maps
# --------------------------------------------------------------------------
def _check_resonant(R: PeriodicGermCocycle, table: ResonanceTable) -> None:
    for i, g in enumerate(R):
        if not (project(g, table, Part.SUB).is_zero() and project(g, table, Part.SUPER).is_zero()):
            raise NormalFormError(f"R_{i} has non-resonant terms")
    _check_block_diagonal(R.linear_part(), table.spectrum)


def iterate_resonant(R: PeriodicGermCocycle, table: ResonanceTable, n: int, start: int = 0) -> PolyMapJet:
    """Exact iterate ``R^n`` at orbit point ``start``; stays resonant of degree ``<= q~``."""
    _check_resonant(R, table)
    if R.degree < table.q_tilde:
        raise NormalFormError(f"jet degree {R.degree} is below q~={table.q_tilde}")
    out = iterate(R, start, n)
    if out.poly_degree > max(table.q_tilde, 1):
        raise NormalFormError("iterate left the resonant degree range")
    if not (project(out, table, Part.SUB).is_zero() and project(out, table, Part.SUPER).is_zero()):
        raise NormalFormError("iterate left the resonant class")
    return out


def growth_theta(q_tilde: int, k: int) -> int:
    """``max(q + q^2 + ... + q^{k-1}, q^{2k})`` for the resonant growth laws."""
    return max(sum(q_tilde ** t for t in range(1, k)), q_tilde ** (2 * k))


@dataclass(frozen=True)
class GrowthSeries:
    """A sequence indexed by ``n`` with fitted asymptotics.

    For norm growth, ``slope`` is the exponential rate from a fit of
    ``log value_n = a + slope * n + c * log n``; the ``log n`` term absorbs
    the polynomial prefactor that resonant iterates carry.  ``raw_slope`` is
    the plain least-squares slope of ``log value_n`` against ``n``.
    ``bound_ok`` records whether the fitted quantity respects the growth law.
    """

    n: Tuple[int, ...]
    values: Tuple[float, ...]
    target: float
    slope: float = math.nan
    raw_slope: float = math.nan
    prefactor_power: float = math.nan
    band: float = math.nan
    constant: float = math.nan
    bound_ok: bool = False


def resonant_norm_growth(
    R: PeriodicGermCocycle, table: ResonanceTable, j: int, n_range: Sequence[int], start: int = 0
) -> GrowthSeries:
    """``|pi_j(R^n)|`` (largest coefficient on block ``j``) and its exponential rate.

    The rate is compared with ``Lambda_j`` inside the band
    ``theta * eps + 2 / n_max``.
    """
    _check_resonant(R, table)
    ns = sorted(set(int(n) for n in n_range))
    if ns[0] < 1:
        raise ValueError("n must start at 1")
    spec = table.spectrum
    sl = spec.block_slice(j)
    vals = []
    cur = PolyMapJet.identity(R.dim, R.degree)
    done = 0
    for n in ns:
        for t in range(done, n):
            cur = compose(R[start + t], cur)
        done = n
        vals.append(max((abs(c) for (i, _), c in cur.items() if sl.start <= i < sl.stop), default=0.0))
    nn = np.array(ns, dtype=float)
    y = np.log(np.array(vals))
    raw = float(np.polyfit(nn, y, 1)[0])
    X = np.column_stack([np.ones_like(nn), nn, np.log(nn)])
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    slope, c_pow = float(coef[1]), float(coef[2])
    th = growth_theta(spec.q_tilde, spec.dim)
    band = th * spec.epsilon + 2.0 / ns[-1]
    target = spec.exponents[j]
    return GrowthSeries(tuple(ns), tuple(vals), target, slope, raw, c_pow, band, math.nan, abs(slope - target) <= band)


def _ext_norm(M: np.ndarray, s: int) -> float:
    sv = np.linalg.svd(M, compute_uv=False)
    return float(np.prod(sv[:s]))


def resonant_derivative_growth(
    R: PeriodicGermCocycle, table: ResonanceTable, w, s: int, n_range: Sequence[int], start: int = 0
) -> GrowthSeries:
    """``(1/n) log |Lambda^s d_w R^n|`` against the sum of the ``s`` largest exponents.

    A constant ``C`` is fitted on the first half of ``n_range`` as the
    smallest value with ``|value_n - target| <= C/n + eta*eps``
    (``eta = k * theta``); ``bound_ok`` says whether the same bound holds on
    the second half.
    """
    _check_resonant(R, table)
    spec = table.spectrum
    if not 1 <= s <= spec.dim:
        raise ValueError(f"s must be in 1..{spec.dim}")
    ns = sorted(set(int(n) for n in n_range))
    w = np.asarray(w, dtype=complex)
    target = float(np.sum(np.sort(spec.lam)[::-1][:s]))
    eta = spec.dim * growth_theta(spec.q_tilde, spec.dim)
    vals = []
    point = w.copy()
    Mat = np.eye(spec.dim, dtype=complex)
    logscale = 0.0
    done = 0
    for n in ns:
        for t in range(done, n):
            J = derivative_at(R[start + t], point)
            point = evaluate(R[start + t], point)
            Mat = J @ Mat
            nrm = np.linalg.norm(Mat, 2)
            Mat = Mat / nrm
            logscale += math.log(nrm)
        done = n
        vals.append((s * logscale + math.log(_ext_norm(Mat, s))) / n)
    dev = np.abs(np.array(vals) - target)
    half = max(1, len(ns) // 2)
    nn = np.array(ns, dtype=float)
    C = float(np.max(nn[:half] * np.maximum(dev[:half] - eta * spec.epsilon, 0.0)))
    ok = bool(np.all(dev[half:] <= C / nn[half:] + eta * spec.epsilon + 1e-12))
    return GrowthSeries(tuple(ns), tuple(vals), target, constant=C, band=eta * spec.epsilon, bound_ok=ok)
