"""Truncated polynomial maps (jets) of ``C^k`` fixing the origin.

A jet of dimension ``k`` and truncation degree ``D`` is stored sparsely as a
mapping ``(i, alpha) -> c`` meaning that component ``i`` (0-based) contains the
monomial ``c * z**alpha`` with ``1 <= |alpha| <= D``.  Jets are immutable; every
operation returns a new jet.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _series as ser

MultiIndex = Tuple[int, ...]
Key = Tuple[int, MultiIndex]

__all__ = [
    "JetError",
    "SingularJetError",
    "PolyMapJet",
    "HomogNormEstimate",
    "multi_indices",
    "compose",
    "formal_inverse",
    "evaluate",
    "derivative_at",
    "homogeneous_norm",
    "lipschitz_bound_on_ball",
    "to_text",
    "from_text",
]


class JetError(ValueError):
    """Malformed jet or incompatible jet operands."""


class SingularJetError(JetError):
    """The linear part of a jet is not invertible."""


def multi_indices(k: int, m: int) -> List[MultiIndex]:
    """All multi-indices of length ``k`` and total degree ``m`` (lexicographically decreasing)."""
    if k == 1:
        return [(m,)]
    out = []
    for first in range(m, -1, -1):
        for rest in multi_indices(k - 1, m - first):
            out.append((first,) + rest)
    return out


def _unit(k: int, j: int) -> MultiIndex:
    e = [0] * k
    e[j] = 1
    return tuple(e)


class PolyMapJet:
    """Sparse truncated polynomial map ``C^k -> C^k`` with ``K(0) = 0``.

    Parameters
    ----------
    dim : int
        Dimension ``k``.
    degree : int
        Truncation degree ``D >= 1``.
    coeffs : mapping, optional
        ``{(i, alpha): c}`` with ``0 <= i < k``, ``len(alpha) == k`` and
        ``1 <= |alpha| <= D``.  Exact zeros are dropped.
    """

    __slots__ = ("_dim", "_degree", "_coeffs", "_cache")

    def __init__(self, dim: int, degree: int, coeffs: Optional[Mapping[Key, complex]] = None):
        if int(dim) < 1:
            raise JetError(f"dimension must be >= 1, got {dim}")
        if int(degree) < 1:
            raise JetError(f"truncation degree must be >= 1, got {degree}")
        self._dim = int(dim)
        self._degree = int(degree)
        store: Dict[Key, complex] = {}
        for key, c in (coeffs or {}).items():
            i, alpha = key
            alpha = tuple(int(a) for a in alpha)
            if not 0 <= int(i) < self._dim:
                raise JetError(f"component index {i} out of range for dimension {dim}")
            if len(alpha) != self._dim or any(a < 0 for a in alpha):
                raise JetError(f"bad multi-index {alpha} for dimension {dim}")
            m = sum(alpha)
            if m < 1:
                raise JetError("jets have no constant term")
            if m > self._degree:
                raise JetError(f"monomial {alpha} exceeds truncation degree {degree}")
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise JetError(f"non-finite coefficient at {key}")
            if c != 0:
                store[(int(i), alpha)] = c
        self._coeffs = store
        self._cache: dict = {}

    # ------------------------------------------------------------------ basics
    @property
    def dim(self) -> int:
        return self._dim

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def coeffs(self) -> Mapping[Key, complex]:
        return MappingProxyType(self._coeffs)

    def __getitem__(self, key: Key) -> complex:
        i, alpha = key
        return self._coeffs.get((i, tuple(alpha)), 0j)

    def items(self) -> Iterator[Tuple[Key, complex]]:
        return iter(self._coeffs.items())

    def __len__(self) -> int:
        return len(self._coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyMapJet):
            return NotImplemented
        return (self._dim, self._degree, self._coeffs) == (other._dim, other._degree, other._coeffs)

    def __hash__(self) -> int:
        return hash((self._dim, self._degree, tuple(sorted(self._coeffs.items(), key=lambda t: t[0]))))

    def __repr__(self) -> str:
        return f"PolyMapJet(dim={self._dim}, degree={self._degree}, terms={len(self._coeffs)})"

    # ----------------------------------------------------------- constructors
    @classmethod
    def zero(cls, dim: int, degree: int) -> "PolyMapJet":
        return cls(dim, degree)

    @classmethod
    def identity(cls, dim: int, degree: int) -> "PolyMapJet":
        return cls(dim, degree, {(i, _unit(dim, i)): 1.0 for i in range(dim)})

    @classmethod
    def linear(cls, matrix, degree: int) -> "PolyMapJet":
        a = np.asarray(matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise JetError("linear part must be a square matrix")
        k = a.shape[0]
        return cls(k, degree, {(i, _unit(k, j)): a[i, j] for i in range(k) for j in range(k)})

    @classmethod
    def from_components(cls, components: Sequence[Mapping[MultiIndex, complex]], degree: int) -> "PolyMapJet":
        k = len(components)
        return cls(k, degree, {(i, a): c for i, comp in enumerate(components) for a, c in comp.items()})

    # ------------------------------------------------------------- structure
    def component(self, i: int) -> Dict[MultiIndex, complex]:
        comps = self._cache.get("components")
        if comps is None:
            comps = [dict() for _ in range(self._dim)]
            for (j, a), c in self._coeffs.items():
                comps[j][a] = c
            self._cache["components"] = comps
        return dict(comps[i])

    def components(self) -> List[Dict[MultiIndex, complex]]:
        return [self.component(i) for i in range(self._dim)]

    def linear_part(self) -> np.ndarray:
        """Matrix ``L`` with ``L[i, j]`` the coefficient of ``z_j`` in component ``i``."""
        L = np.zeros((self._dim, self._dim), dtype=complex)
        for (i, a), c in self._coeffs.items():
            if sum(a) == 1:
                L[i, a.index(1)] = c
        return L

    def homogeneous_part(self, m: int) -> "PolyMapJet":
        return PolyMapJet(self._dim, self._degree, {key: c for key, c in self._coeffs.items() if sum(key[1]) == m})

    def truncate(self, degree: int) -> "PolyMapJet":
        """Drop all monomials of degree above ``degree`` (which becomes the new truncation)."""
        return PolyMapJet(self._dim, degree, {key: c for key, c in self._coeffs.items() if sum(key[1]) <= degree})

    def with_degree(self, degree: int) -> "PolyMapJet":
        """Same coefficients viewed at truncation ``degree`` (truncating if smaller)."""
        return self.truncate(degree)

    def filter(self, predicate) -> "PolyMapJet":
        """Keep the terms for which ``predicate(i, alpha)`` is true."""
        return PolyMapJet(self._dim, self._degree, {key: c for key, c in self._coeffs.items() if predicate(*key)})

    @property
    def poly_degree(self) -> int:
        """Largest degree actually present (0 for the zero jet)."""
        return max((sum(a) for _, a in self._coeffs), default=0)

    def is_zero(self) -> bool:
        return not self._coeffs

    def max_abs(self) -> float:
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    # ------------------------------------------------------------ arithmetic
    def _check_compatible(self, other: "PolyMapJet") -> None:
        if not isinstance(other, PolyMapJet):
            raise TypeError("expected a PolyMapJet")
        if other._dim != self._dim:
            raise JetError(f"dimension mismatch: {self._dim} vs {other._dim}")

    def __add__(self, other: "PolyMapJet") -> "PolyMapJet":
        self._check_compatible(other)
        D = min(self._degree, other._degree)
        out = {k: c for k, c in self._coeffs.items() if sum(k[1]) <= D}
        for key, c in other._coeffs.items():
            if sum(key[1]) <= D:
                out[key] = out.get(key, 0j) + c
        return PolyMapJet(self._dim, D, out)

    def __neg__(self) -> "PolyMapJet":
        return PolyMapJet(self._dim, self._degree, {k: -c for k, c in self._coeffs.items()})

    def __sub__(self, other: "PolyMapJet") -> "PolyMapJet":
        return self + (-other)

    def __mul__(self, s: complex) -> "PolyMapJet":
        return PolyMapJet(self._dim, self._degree, {k: s * c for k, c in self._coeffs.items()})

    __rmul__ = __mul__

    def distance(self, other: "PolyMapJet") -> float:
        """Largest coefficient modulus of ``self - other``."""
        return (self - other).max_abs()

    # ----------------------------------------------------- numeric backends
    def _arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        arr = self._cache.get("arrays")
        if arr is None:
            monos = sorted({a for _, a in self._coeffs})
            index = {a: n for n, a in enumerate(monos)}
            exps = np.array(monos, dtype=int).reshape(len(monos), self._dim)
            C = np.zeros((self._dim, len(monos)), dtype=complex)
            for (i, a), c in self._coeffs.items():
                C[i, index[a]] = c
            arr = (exps, C)
            self._cache["arrays"] = arr
        return arr


@dataclass(frozen=True)
class HomogNormEstimate:
    """Two-sided estimate of the sup of ``|K^(m)(v)|`` over the unit sphere."""

    degree: int
    lower: float
    upper: float


# --------------------------------------------------------------------------
# composition and inversion
# --------------------------------------------------------------------------
def _apply_linear(M: np.ndarray, jet: PolyMapJet) -> PolyMapJet:
    """``M o jet`` for a matrix ``M``."""
    comps = jet.components()
    out: Dict[Key, complex] = {}
    k = jet.dim
    for i in range(k):
        for j in range(k):
            mij = M[i, j]
            if mij == 0:
                continue
            for a, c in comps[j].items():
                out[(i, a)] = out.get((i, a), 0j) + mij * c
    return PolyMapJet(k, jet.degree, out)


def compose(outer: PolyMapJet, inner: PolyMapJet) -> PolyMapJet:
    """Truncated composition ``outer o inner`` at degree ``min(D_outer, D_inner)``.

    Monomials of the inner components are built recursively and memoised, so
    each distinct ``inner**alpha`` is expanded once.
    """
    if outer.dim != inner.dim:
        raise JetError(f"dimension mismatch: {outer.dim} vs {inner.dim}")
    k = outer.dim
    D = min(outer.degree, inner.degree)
    comps = inner.components()
    zero = (0,) * k
    cache: Dict[MultiIndex, ser.Series] = {zero: {zero: 1.0 + 0j}}

    def mono(alpha: MultiIndex) -> ser.Series:
        got = cache.get(alpha)
        if got is not None:
            return got
        j = next(t for t, a in enumerate(alpha) if a > 0)
        prev = list(alpha)
        prev[j] -= 1
        val = ser.mul(mono(tuple(prev)), comps[j], D)
        cache[alpha] = val
        return val

    out: Dict[Key, complex] = {}
    for (i, alpha), c in outer.items():
        if sum(alpha) > D:
            continue
        for b, v in mono(alpha).items():
            key = (i, b)
            out[key] = out.get(key, 0j) + c * v
    return PolyMapJet(k, D, out)


def formal_inverse(f: PolyMapJet, delta_inv: float = 1e-12) -> PolyMapJet:
    """Compositional inverse ``g`` with ``f o g = g o f = I`` through degree ``D``.

    Uses the fixed-point reversion ``g <- L^{-1}(z - N(g))`` where ``L`` and
    ``N`` are the linear and nonlinear parts of ``f``; each sweep fixes one
    more degree.

    Raises
    ------
    SingularJetError
        If the smallest singular value of the linear part is ``<= delta_inv``.
    """
    L = f.linear_part()
    smin = np.linalg.svd(L, compute_uv=False).min()
    if smin <= delta_inv:
        raise SingularJetError(f"linear part is singular (smallest singular value {smin:.3e})")
    Linv = np.linalg.inv(L)
    k, D = f.dim, f.degree
    N = f.filter(lambda i, a: sum(a) >= 2)
    ident = PolyMapJet.identity(k, D)
    g = PolyMapJet.linear(Linv, D)
    for _ in range(D - 1):
        g = _apply_linear(Linv, ident - compose(N, g))
    return g


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------
def evaluate(f: PolyMapJet, v) -> np.ndarray:
    """Evaluate the polynomial ``f`` at ``v`` (shape ``(k,)`` or ``(..., k)``)."""
    v = np.asarray(v, dtype=complex)
    if v.shape[-1] != f.dim:
        raise JetError(f"point has dimension {v.shape[-1]}, jet has {f.dim}")
    exps, C = f._arrays()
    if exps.shape[0] == 0:
        return np.zeros(v.shape, dtype=complex)
    mons = np.prod(v[..., None, :] ** exps, axis=-1)
    return mons @ C.T


def derivative_at(f: PolyMapJet, v) -> np.ndarray:
    """Jacobian matrix ``d_v f`` (shape ``(..., k, k)``), rows indexed by component."""
    v = np.asarray(v, dtype=complex)
    k = f.dim
    exps, C = f._arrays()
    J = np.zeros(v.shape[:-1] + (k, k), dtype=complex)
    if exps.shape[0] == 0:
        return J
    for j in range(k):
        aj = exps[:, j]
        lowered = exps.copy()
        lowered[:, j] = np.maximum(aj - 1, 0)
        mons = np.prod(v[..., None, :] ** lowered, axis=-1) * aj
        J[..., :, j] = mons @ C.T
    return J


def homogeneous_norm(f: PolyMapJet, m: int, samples: int = 256, seed: int = 0) -> HomogNormEstimate:
    """Bracket ``sup_{|v|=1} |K^(m)(v)|``.

    ``upper`` is the Euclidean combination of the per-component coefficient
    l1-norms, which dominates the sup by the triangle inequality.  ``lower``
    is the largest value found on the coordinate axes, the normalised
    diagonal and ``samples`` seeded random unit vectors.
    """
    hm = f.homogeneous_part(m)
    if hm.is_zero():
        return HomogNormEstimate(m, 0.0, 0.0)
    l1 = np.zeros(f.dim)
    for (i, _), c in hm.items():
        l1[i] += abs(c)
    upper = float(np.sqrt(np.sum(l1 ** 2)))
    k = f.dim
    probes = [np.eye(k, dtype=complex), np.ones((1, k), dtype=complex) / math.sqrt(k)]
    if samples > 0:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((samples, k)) + 1j * rng.standard_normal((samples, k))
        probes.append(z / np.linalg.norm(z, axis=1, keepdims=True))
    pts = np.vstack(probes)
    lower = float(np.max(np.linalg.norm(evaluate(hm, pts), axis=1)))
    return HomogNormEstimate(m, min(lower, upper), upper)


def lipschitz_bound_on_ball(f: PolyMapJet, r: float) -> float:
    """Upper bound ``sum_m m * upper_m * r**(m-1)`` for ``Lip(f)`` on the ball of radius ``r``."""
    total = 0.0
    for m in range(1, f.degree + 1):
        est = homogeneous_norm(f, m, samples=0)
        if est.upper:
            total += m * est.upper * r ** (m - 1)
    return total


# --------------------------------------------------------------------------
# text serialisation
# --------------------------------------------------------------------------
def _format_jet_lines(f: PolyMapJet) -> List[str]:
    lines = []
    for (i, a), c in sorted(f.items(), key=lambda t: (t[0][0], sum(t[0][1]), tuple(-x for x in t[0][1]))):
        lines.append(" ".join([str(i)] + [str(x) for x in a] + [repr(c.real), repr(c.imag)]))
    return lines


def to_text(f: PolyMapJet) -> str:
    """Serialise as ``# jet dim=k degree=D`` followed by ``i a_1 .. a_k re im`` lines.

    Floats use ``repr`` so the round trip is bit-exact.
    """
    return "\n".join([f"# jet dim={f.dim} degree={f.degree}"] + _format_jet_lines(f)) + "\n"


def _parse_header(line: str) -> Dict[str, int]:
    out = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = int(val)
    return out


def _parse_terms(lines: Iterable[str], dim: int) -> Dict[Key, complex]:
    coeffs: Dict[Key, complex] = {}
    for ln in lines:
        parts = ln.split()
        if len(parts) != dim + 3:
            raise JetError(f"malformed jet line: {ln!r}")
        try:
            i = int(parts[0])
            alpha = tuple(int(x) for x in parts[1 : 1 + dim])
            coeffs[(i, alpha)] = complex(float(parts[-2]), float(parts[-1]))
        except ValueError:
            raise JetError(f"malformed jet line: {ln!r}") from None
    return coeffs


def from_text(text: str) -> PolyMapJet:
    header = None
    body = []
    for raw in text.splitlines():
        ln = raw.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            if header is None:
                header = _parse_header(ln)
            continue
        body.append(ln)
    if not header or "dim" not in header or "degree" not in header:
        raise JetError("missing '# jet dim=.. degree=..' header")
    return PolyMapJet(header["dim"], header["degree"], _parse_terms(body, header["dim"]))


def monomials_upto(k: int, lo: int, hi: int) -> List[MultiIndex]:
    return list(itertools.chain.from_iterable(multi_indices(k, m) for m in range(lo, hi + 1)))
