"""Periodic germ cocycles, their linear parts and block reduction.

A periodic cocycle of period ``p`` is a list ``K_0, ..., K_{p-1}`` where
``K_i`` maps the fiber over orbit point ``i`` to the fiber over ``i + 1``
(indices mod ``p``).  Iterates compose left to right along the orbit::

    K^n_i = K_{i+n-1} o ... o K_{i+1} o K_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .jets import JetError, PolyMapJet, compose, formal_inverse, from_text, to_text, _format_jet_lines, _parse_header, _parse_terms
from .spectrum import ContractionSpectrum, ResonanceError, SpectrumError, zeta_margin

__all__ = [
    "CocycleError",
    "ReductionError",
    "PeriodicGermCocycle",
    "PeriodicLinearCocycle",
    "ReductionResult",
    "RegularityReport",
    "OrbitFunction",
    "iterate",
    "monodromy",
    "conjugate",
    "oseledec_reduce",
    "regular_contracting_check",
    "slow_function",
    "fast_function",
    "cocycle_to_text",
    "cocycle_from_text",
]


class CocycleError(ValueError):
    """Malformed cocycle."""


class ReductionError(ValueError):
    """Block reduction of a linear cocycle failed."""


def _check_invertible(L: np.ndarray, delta_inv: float, where: str) -> None:
    smin = np.linalg.svd(L, compute_uv=False).min()
    if smin <= delta_inv:
        raise CocycleError(f"{where}: linear part is singular (smallest singular value {smin:.3e})")


@dataclass(frozen=True)
class PeriodicGermCocycle:
    """Jets ``K_0..K_{p-1}`` over a periodic orbit, with invertible linear parts."""

    germs: Tuple[PolyMapJet, ...]
    delta_inv: float = 1e-12

    def __post_init__(self):
        germs = tuple(self.germs)
        object.__setattr__(self, "germs", germs)
        if not germs:
            raise CocycleError("cocycle needs at least one germ")
        k, D = germs[0].dim, germs[0].degree
        for i, g in enumerate(germs):
            if not isinstance(g, PolyMapJet):
                raise CocycleError(f"germ {i} is not a PolyMapJet")
            if g.dim != k or g.degree != D:
                raise CocycleError(f"germ {i} has (dim, degree)=({g.dim}, {g.degree}), expected ({k}, {D})")
            _check_invertible(g.linear_part(), self.delta_inv, f"germ {i}")

    @property
    def period(self) -> int:
        return len(self.germs)

    @property
    def dim(self) -> int:
        return self.germs[0].dim

    @property
    def degree(self) -> int:
        return self.germs[0].degree

    def __getitem__(self, i: int) -> PolyMapJet:
        return self.germs[i % self.period]

    def __len__(self) -> int:
        return self.period

    def __iter__(self):
        return iter(self.germs)

    def linear_part(self) -> "PeriodicLinearCocycle":
        return PeriodicLinearCocycle(tuple(g.linear_part() for g in self.germs))

    def truncate(self, degree: int) -> "PeriodicGermCocycle":
        return PeriodicGermCocycle(tuple(g.truncate(degree) for g in self.germs), self.delta_inv)

    def distance(self, other: "PeriodicGermCocycle") -> float:
        if other.period != self.period:
            raise CocycleError("period mismatch")
        return max(a.distance(b) for a, b in zip(self.germs, other.germs))


@dataclass(frozen=True)
class PeriodicLinearCocycle:
    """Invertible matrices ``D_0..D_{p-1}`` over a periodic orbit."""

    matrices: Tuple[np.ndarray, ...]
    delta_inv: float = 1e-12

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=complex) for m in self.matrices)
        if not mats:
            raise CocycleError("cocycle needs at least one matrix")
        k = mats[0].shape[0]
        for i, m in enumerate(mats):
            if m.shape != (k, k):
                raise CocycleError(f"matrix {i} has shape {m.shape}, expected {(k, k)}")
            m.setflags(write=False)
            _check_invertible(m, self.delta_inv, f"matrix {i}")
        object.__setattr__(self, "matrices", mats)

    @property
    def period(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i % self.period]

    def __len__(self) -> int:
        return self.period

    def __iter__(self):
        return iter(self.matrices)

    def as_jets(self, degree: int) -> PeriodicGermCocycle:
        return PeriodicGermCocycle(tuple(PolyMapJet.linear(m, degree) for m in self.matrices))


def iterate(c, start: int, n: int):
    """``c^n`` at orbit point ``start``; works for germ and linear cocycles."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if isinstance(c, PeriodicLinearCocycle):
        out = np.eye(c.dim, dtype=complex)
        for t in range(n):
            out = c[start + t] @ out
        return out
    out = PolyMapJet.identity(c.dim, c.degree)
    for t in range(n):
        out = compose(c[start + t], out)
    return out


def monodromy(c: PeriodicLinearCocycle, start: int = 0) -> np.ndarray:
    """Product ``D_{start+p-1} ... D_start`` over one period."""
    return iterate(c, start, c.period)


def conjugate(c: PeriodicGermCocycle, h: Sequence[PolyMapJet], h_inv: Optional[Sequence[PolyMapJet]] = None) -> PeriodicGermCocycle:
    """Cocycle ``h_{i+1} o K_i o h_i^{-1}`` for fiber maps ``h_i`` over the identity."""
    p = c.period
    if len(h) != p:
        raise CocycleError("need one conjugating jet per orbit point")
    hinv = list(h_inv) if h_inv is not None else [formal_inverse(x) for x in h]
    return PeriodicGermCocycle(tuple(compose(h[(i + 1) % p], compose(c[i], hinv[i])) for i in range(p)), c.delta_inv)


# --------------------------------------------------------------------------
# block reduction
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ReductionResult:
    """Outcome of :func:`oseledec_reduce`.

    Attributes
    ----------
    change_of_basis : tuple of ndarray
        ``C_0..C_{p-1}`` with ``|v| <= |C_i v| <= h_bound |v|``.
    conjugated : tuple of ndarray
        ``A_i = C_{i+1} D_i C_i^{-1}``, block diagonal, blocks ordered by
        decreasing exponent.
    spectrum : ContractionSpectrum
    h_bound : float
    achieved_eps : float
        Smallest ``e`` with ``e^{Lambda_j - e}|v| <= |A_i v| <= e^{Lambda_j + e}|v|`` on block ``j``.
    delta_J : float
        Scaling used inside non-diagonal blocks.
    conjugation_residual : float
        ``max_i ||C_{i+1} D_i C_i^{-1} - A_i||``.
    """

    change_of_basis: Tuple[np.ndarray, ...]
    conjugated: Tuple[np.ndarray, ...]
    spectrum: ContractionSpectrum
    h_bound: float
    achieved_eps: float
    delta_J: float
    conjugation_residual: float
    source: PeriodicLinearCocycle = field(repr=False)

    def linear_cocycle(self) -> PeriodicLinearCocycle:
        return PeriodicLinearCocycle(self.conjugated)

    def check(self) -> "RegularityReport":
        return regular_contracting_check(self.conjugated, self.spectrum)


def _group_moduli(moduli: np.ndarray, delta_grp: float) -> List[List[float]]:
    ordered = sorted(moduli, reverse=True)
    groups: List[List[float]] = [[ordered[0]]]
    for m in ordered[1:]:
        ref = groups[-1][-1]
        if abs(ref - m) <= delta_grp * max(ref, 1e-300):
            groups[-1].append(m)
        else:
            groups.append([m])
    return groups


def _split_blocks(P: np.ndarray, thresholds: Sequence[float]) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Basis ``B`` with ``B^{-1} P B = blockdiag(T_0, T_1, ...)``, each ``T_j`` upper triangular.

    ``thresholds[j]`` separates the moduli of class ``j`` from the smaller ones.
    """
    k = P.shape[0]
    if not thresholds:
        T, Z = sla.schur(P.astype(complex), output="complex")
        return Z, [T]
    thr = thresholds[0]
    T, Z, s = sla.schur(P.astype(complex), output="complex", sort=lambda x: abs(x) > thr)
    T11, T12, T22 = T[:s, :s], T[:s, s:], T[s:, s:]
    X = sla.solve_sylvester(T11, -T22, -T12)
    Y = np.eye(k, dtype=complex)
    Y[:s, s:] = X
    B2, rest = _split_blocks(T22, thresholds[1:])
    W = np.eye(k, dtype=complex)
    W[s:, s:] = B2
    return Z @ Y @ W, [T11] + rest


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return sla.block_diag(*blocks).astype(complex)


def _log_singular_spread(A: np.ndarray, spec: ContractionSpectrum) -> float:
    worst = 0.0
    for j, L in enumerate(spec.exponents):
        sl = spec.block_slice(j)
        sv = np.linalg.svd(A[sl, sl], compute_uv=False)
        worst = max(worst, float(np.max(np.abs(np.log(sv) - L))))
    return worst


def oseledec_reduce(
    c: PeriodicLinearCocycle,
    eps: float,
    delta_grp: float = 1e-8,
    delta_res: Optional[float] = None,
) -> ReductionResult:
    """Change of basis making a contracting periodic linear cocycle block diagonal.

    The monodromy is split into invariant subspaces by eigenvalue modulus
    (Schur ordering plus a Sylvester decoupling), each block is triangularised
    and rescaled by ``diag(delta_J**r)`` to shrink its nilpotent part, and the
    cocycle is conjugated to the constant cocycle given by the principal
    ``p``-th root of the reduced monodromy.

    Raises
    ------
    ReductionError
        If the monodromy is not contracting, two moduli classes are closer than
        ``10 * delta_grp`` (relative), no scaling achieves precision ``eps``,
        or the margin constant of the recovered spectrum is not positive.
    """
    p, k = c.period, c.dim
    P = monodromy(c)
    mu = np.linalg.eigvals(P)
    moduli = np.abs(mu)
    if np.any(moduli >= 1):
        raise ReductionError(f"monodromy is not contracting: eigenvalue moduli {np.sort(moduli)[::-1]}")
    if np.any(moduli <= 0):
        raise ReductionError("monodromy is singular")
    groups = _group_moduli(moduli, delta_grp)
    for a, b in zip(groups, groups[1:]):
        if (a[-1] - b[0]) <= 10 * delta_grp * a[-1]:
            raise ReductionError("eigenvalue moduli classes are not separated")
    exponents = tuple(float(np.mean(np.log(g))) / p for g in groups)
    mults = tuple(len(g) for g in groups)
    try:
        spec = ContractionSpectrum(exponents, mults, eps)
    except SpectrumError as exc:
        raise ReductionError(str(exc)) from exc
    zeta = zeta_margin(spec, delta_res)
    if not zeta > 0:
        raise ReductionError(f"margin constant {zeta:.6g} <= 0 for the recovered spectrum at eps={eps}")

    thresholds = [math.sqrt(a[-1] * b[0]) for a, b in zip(groups, groups[1:])]
    B, blocks = _split_blocks(P, thresholds)
    best = None
    for delta_J in [10.0 ** (-e) for e in range(2, 13)]:
        scales = [np.diag(delta_J ** np.arange(b.shape[0])) for b in blocks]
        S = _block_diag(scales)
        roots = [np.linalg.inv(s) @ b @ s for s, b in zip(scales, blocks)]
        roots = [sla.fractional_matrix_power(r, 1.0 / p) if p > 1 else r for r in roots]
        A = _block_diag(roots)
        ae = _log_singular_spread(A, spec)
        if best is None or ae < best[0]:
            best = (ae, delta_J, S, A)
        if ae <= eps:
            break
    ae, delta_J, S, A = best
    if ae > eps:
        raise ReductionError(f"block precision {ae:.6g} exceeds eps={eps} for every scaling")

    C0 = np.linalg.inv(B @ S)
    Cs = [C0]
    prod = np.eye(k, dtype=complex)
    Ap = np.eye(k, dtype=complex)
    for i in range(1, p):
        prod = c[i - 1] @ prod
        Ap = A @ Ap
        Cs.append(Ap @ C0 @ np.linalg.inv(prod))
    smin = min(np.linalg.svd(C, compute_uv=False).min() for C in Cs)
    Cs = [C / smin for C in Cs]
    h = max(float(np.linalg.svd(C, compute_uv=False).max()) for C in Cs)
    resid = max(float(np.abs(Cs[(i + 1) % p] @ c[i] @ np.linalg.inv(Cs[i]) - A).max()) for i in range(p))
    for C in Cs:
        C.setflags(write=False)
    A.setflags(write=False)
    return ReductionResult(tuple(Cs), (A,) * p, spec, h, ae, delta_J, resid, c)


@dataclass(frozen=True)
class RegularityReport:
    passed: bool
    achieved_eps: float
    violations: Tuple[str, ...]


def regular_contracting_check(
    matrices: Sequence[np.ndarray], spectrum: ContractionSpectrum, eps: Optional[float] = None
) -> RegularityReport:
    """Check that each ``A_i`` is block diagonal with block growth in ``[e^{Lambda_j - eps}, e^{Lambda_j + eps}]``."""
    e = spectrum.epsilon if eps is None else float(eps)
    violations: List[str] = []
    worst = 0.0
    for i, A in enumerate(matrices):
        A = np.asarray(A, dtype=complex)
        if A.shape != (spectrum.dim, spectrum.dim):
            violations.append(f"A_{i} has shape {A.shape}")
            continue
        scale = max(float(np.abs(A).max()), 1e-300)
        for j in range(spectrum.n_blocks):
            sl = spectrum.block_slice(j)
            mask = np.ones(spectrum.dim, dtype=bool)
            mask[sl] = False
            off = max(float(np.abs(A[sl][:, mask]).max(initial=0.0)), float(np.abs(A[mask][:, sl]).max(initial=0.0)))
            if off > 1e-12 * scale:
                violations.append(f"A_{i} couples block {j} to other blocks ({off:.3e})")
        ae = _log_singular_spread(A, spectrum)
        worst = max(worst, ae)
        if ae > e * (1 + 1e-12):
            violations.append(f"A_{i} block growth deviates by {ae:.3e} > eps={e}")
    return RegularityReport(not violations, worst, tuple(violations))


# --------------------------------------------------------------------------
# slow and fast functions along an orbit
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class OrbitFunction:
    """Values ``u_0..u_{p-1}`` of a positive function on a periodic orbit."""

    values: Tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals or not all(v > 0 and math.isfinite(v) for v in vals):
            raise ValueError("orbit function values must be finite and positive")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, i: int) -> float:
        return self.values[i % len(self.values)]

    def __len__(self) -> int:
        return len(self.values)


def _orbit_hull(u: OrbitFunction, eps: float, sign: int) -> OrbitFunction:
    p = len(u)
    out = []
    for i in range(p):
        best = u[i]
        # distances on a cycle are at most p//2, so one sweep in each direction suffices
        for n in range(-p, p + 1):
            val = u[i + n] * math.exp(sign * abs(n) * eps)
            best = min(best, val) if sign > 0 else max(best, val)
        out.append(best)
    return OrbitFunction(tuple(out))


def slow_function(u: OrbitFunction | Sequence[float], eps: float) -> OrbitFunction:
    """``u_eps(i) = inf_n u(i+n) e^{|n| eps}``: below ``u`` and ``e^{eps}``-slow along the orbit."""
    if not isinstance(u, OrbitFunction):
        u = OrbitFunction(tuple(u))
    if any(not v > 0 for v in u.values):
        raise ValueError("slow functions need positive values")
    return _orbit_hull(u, eps, +1)


def fast_function(v: OrbitFunction | Sequence[float], eps: float) -> OrbitFunction:
    """``v^eps(i) = sup_n v(i+n) e^{-|n| eps}``: above ``v`` and ``e^{eps}``-slow along the orbit."""
    if not isinstance(v, OrbitFunction):
        v = OrbitFunction(tuple(v))
    if any(not x > 0 for x in v.values):
        raise ValueError("fast functions need positive values")
    return _orbit_hull(v, eps, -1)


# --------------------------------------------------------------------------
# text serialisation
# --------------------------------------------------------------------------
def cocycle_to_text(c: PeriodicGermCocycle) -> str:
    lines = [f"# cocycle period={c.period} dim={c.dim} degree={c.degree}"]
    for i, g in enumerate(c.germs):
        lines.append(f"# germ index={i}")
        lines.extend(_format_jet_lines(g))
    return "\n".join(lines) + "\n"


def cocycle_from_text(text: str) -> PeriodicGermCocycle:
    header = None
    blocks: List[List[str]] = []
    for raw in text.splitlines():
        ln = raw.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            if header is None:
                header = _parse_header(ln)
            elif ln.lstrip("# ").startswith("germ"):
                blocks.append([])
            continue
        if not blocks:
            raise CocycleError("jet line before the first '# germ' marker")
        blocks[-1].append(ln)
    if not header or not {"period", "dim", "degree"} <= set(header):
        raise CocycleError("missing '# cocycle period=.. dim=.. degree=..' header")
    if len(blocks) != header["period"]:
        raise CocycleError(f"header announces period {header['period']} but {len(blocks)} germs follow")
    k, D = header["dim"], header["degree"]
    return PeriodicGermCocycle(tuple(PolyMapJet(k, D, _parse_terms(b, k)) for b in blocks))
