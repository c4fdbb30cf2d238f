"""Contraction spectra, resonance classification and the margin constant.

A *contraction spectrum* lists block exponents ``Lambda_1 > ... > Lambda_l``
(all negative) with multiplicities ``k_1, ..., k_l`` and a precision ``eps``.
Expanding the blocks gives the coordinate exponent vector ``lam`` of length
``k = sum k_j``.  For an output block ``j`` and multi-index ``alpha`` the
monomial ``z**alpha`` in a component of block ``j`` is

* resonant        if ``alpha . lam == Lambda_j``
* sub-resonant    if ``alpha . lam <  Lambda_j``
* super-resonant  if ``alpha . lam >  Lambda_j``

up to a dead band ``delta_res``.  Block indices are 0-based throughout.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .jets import MultiIndex, PolyMapJet, multi_indices

__all__ = [
    "SpectrumError",
    "ResonanceError",
    "NearResonanceWarning",
    "ResonanceClass",
    "Part",
    "ContractionSpectrum",
    "ResonanceTable",
    "classify_degree",
    "build_table",
    "zeta_margin",
    "project",
]


class SpectrumError(ValueError):
    """Invalid contraction spectrum."""


class ResonanceError(ValueError):
    """The margin constant is not positive for the requested precision."""


class NearResonanceWarning(UserWarning):
    """A monomial sits within ten dead-bands of a resonance."""


class ResonanceClass(str, enum.Enum):
    RESONANT = "resonant"
    SUB = "sub"
    SUPER = "super"


class Part(str, enum.Enum):
    LINEAR = "linear"
    RESONANT = "resonant"
    SUB = "sub"
    SUPER = "super"


@dataclass(frozen=True)
class ContractionSpectrum:
    """Block exponents, multiplicities and precision of a regular contraction.

    Raises
    ------
    SpectrumError
        Unless exponents are strictly decreasing and negative, multiplicities
        are positive and ``0 < eps <= |Lambda_1| / 10``.
    """

    exponents: Tuple[float, ...]
    multiplicities: Tuple[int, ...]
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(x) for x in self.exponents))
        object.__setattr__(self, "multiplicities", tuple(int(x) for x in self.multiplicities))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        ex, mu = self.exponents, self.multiplicities
        if not ex:
            raise SpectrumError("spectrum needs at least one block")
        if len(ex) != len(mu):
            raise SpectrumError("exponents and multiplicities differ in length")
        if any(not math.isfinite(x) or x >= 0 for x in ex):
            raise SpectrumError(f"exponents must be finite and negative, got {ex}")
        if any(a <= b for a, b in zip(ex, ex[1:])):
            raise SpectrumError(f"exponents must be strictly decreasing, got {ex}")
        if any(m < 1 for m in mu):
            raise SpectrumError(f"multiplicities must be positive, got {mu}")
        if not (0 < self.epsilon <= abs(ex[0]) / 10 * (1 + 1e-12)):
            raise SpectrumError(
                f"epsilon must satisfy 0 < eps <= |Lambda_1|/10 = {abs(ex[0]) / 10:.6g}, got {self.epsilon}"
            )

    @classmethod
    def from_blocks(cls, blocks: Sequence[Tuple[float, int]], epsilon: float) -> "ContractionSpectrum":
        return cls(tuple(b[0] for b in blocks), tuple(b[1] for b in blocks), epsilon)

    @property
    def n_blocks(self) -> int:
        return len(self.exponents)

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    @property
    def lam(self) -> np.ndarray:
        return np.repeat(np.array(self.exponents), self.multiplicities)

    @property
    def q_tilde(self) -> int:
        """``floor(Lambda_l / Lambda_1)``, robust to rounding of exact ratios."""
        return int(math.floor(self.exponents[-1] / self.exponents[0] + 1e-9))

    def block_of(self, i: int) -> int:
        return int(np.searchsorted(np.cumsum(self.multiplicities), i, side="right"))

    def block_slice(self, j: int) -> slice:
        start = sum(self.multiplicities[:j])
        return slice(start, start + self.multiplicities[j])

    def dot(self, alpha: Sequence[int]) -> float:
        return float(math.fsum(a * l for a, l in zip(alpha, self.lam)))

    def profile(self, alpha: Sequence[int]) -> Tuple[int, ...]:
        """Block-degree profile: total degree of ``alpha`` on each block."""
        return tuple(sum(alpha[self.block_slice(j)]) for j in range(self.n_blocks))

    def scaled(self, factor: float) -> "ContractionSpectrum":
        return ContractionSpectrum(tuple(factor * x for x in self.exponents), self.multiplicities, factor * self.epsilon)

    def default_delta_res(self) -> float:
        return 1e-9 * abs(self.exponents[0])


def classify_degree(
    spec: ContractionSpectrum, j: int, alpha: Sequence[int], delta_res: Optional[float] = None
) -> ResonanceClass:
    """Classify ``z**alpha`` in a component of output block ``j``."""
    if len(alpha) != spec.dim:
        raise SpectrumError(f"multi-index length {len(alpha)} does not match dimension {spec.dim}")
    if sum(alpha) < 2:
        raise SpectrumError("classification applies to monomials of degree >= 2")
    d = spec.default_delta_res() if delta_res is None else float(delta_res)
    gap = spec.dot(alpha) - spec.exponents[j]
    if 0 < abs(gap) < 10 * d:
        warnings.warn(
            f"monomial {tuple(alpha)} in block {j} is within {abs(gap):.3e} of resonance",
            NearResonanceWarning,
            stacklevel=2,
        )
    if abs(gap) <= d:
        return ResonanceClass.RESONANT
    return ResonanceClass.SUB if gap < 0 else ResonanceClass.SUPER


def zeta_margin(spec: ContractionSpectrum, delta_res: Optional[float] = None, eps: Optional[float] = None) -> float:
    """Margin constant over all non-resonant pairs ``(j, alpha)`` with ``2 <= |alpha| <= q~ + 1``.

    Sub-resonant pairs contribute ``-(alpha.lam - Lambda_j + (|alpha|+2) eps)``
    and super-resonant pairs ``alpha.lam - Lambda_j - (|alpha|+2) eps``.  The
    minimum is returned as is, so a value ``<= 0`` signals that the
    precision ``eps`` is too coarse.  ``eps`` defaults to ``spec.epsilon``.
    """
    e = spec.epsilon if eps is None else float(eps)
    d = spec.default_delta_res() if delta_res is None else float(delta_res)
    lam = spec.lam
    best = math.inf
    for m in range(2, spec.q_tilde + 2):
        for alpha in multi_indices(spec.dim, m):
            dot = float(np.dot(alpha, lam))
            for j, Lj in enumerate(spec.exponents):
                gap = dot - Lj
                if abs(gap) <= d:
                    continue
                val = -(gap + (m + 2) * e) if gap < 0 else gap - (m + 2) * e
                best = min(best, val)
    return best


@dataclass(frozen=True)
class ResonanceTable:
    """Classification of every ``(block, alpha)`` with ``2 <= |alpha| <= q~``.

    Monomials of degree above ``q~`` are all sub-resonant and are classified
    on the fly.
    """

    spectrum: ContractionSpectrum
    delta_res: float
    zeta: float
    classes: Dict[Tuple[int, MultiIndex], ResonanceClass] = field(repr=False)

    @property
    def q_tilde(self) -> int:
        return self.spectrum.q_tilde

    def classify(self, j: int, alpha: Sequence[int]) -> ResonanceClass:
        alpha = tuple(alpha)
        got = self.classes.get((j, alpha))
        if got is not None:
            return got
        if sum(alpha) > self.q_tilde:
            return ResonanceClass.SUB
        return classify_degree(self.spectrum, j, alpha, self.delta_res)

    def part_of(self, i: int, alpha: Sequence[int]) -> Part:
        """Part (linear / resonant / sub / super) of monomial ``alpha`` in component ``i``."""
        if sum(alpha) == 1:
            return Part.LINEAR
        return Part(self.classify(self.spectrum.block_of(i), alpha).value)

    def resonant(self, j: Optional[int] = None) -> List[Tuple[int, MultiIndex]]:
        return sorted(
            (key for key, c in self.classes.items() if c is ResonanceClass.RESONANT and (j is None or key[0] == j)),
            key=lambda t: (t[0], sum(t[1]), tuple(-a for a in t[1])),
        )

    def rows(self) -> List[Tuple[int, MultiIndex, ResonanceClass, float]]:
        out = []
        for (j, alpha), c in sorted(self.classes.items(), key=lambda t: (t[0][0], sum(t[0][1]), tuple(-a for a in t[0][1]))):
            out.append((j, alpha, c, self.spectrum.dot(alpha) - self.spectrum.exponents[j]))
        return out


def build_table(spec: ContractionSpectrum, delta_res: Optional[float] = None) -> ResonanceTable:
    """Enumerate classes for ``2 <= |alpha| <= q~`` and compute the margin constant.

    Raises
    ------
    ResonanceError
        If the margin constant is not positive at ``spec.epsilon``.
    """
    d = spec.default_delta_res() if delta_res is None else float(delta_res)
    zeta = zeta_margin(spec, d)
    if not zeta > 0:
        raise ResonanceError(f"margin constant is {zeta:.6g} <= 0 at eps={spec.epsilon}")
    classes: Dict[Tuple[int, MultiIndex], ResonanceClass] = {}
    for m in range(2, spec.q_tilde + 1):
        for alpha in multi_indices(spec.dim, m):
            for j in range(spec.n_blocks):
                classes[(j, alpha)] = classify_degree(spec, j, alpha, d)
    return ResonanceTable(spec, d, zeta, classes)


def project(f: PolyMapJet, table: ResonanceTable, part: Part | str) -> PolyMapJet:
    """Keep exactly the terms of ``f`` belonging to ``part``; others are absent (hence exactly 0)."""
    part = Part(part)
    if f.dim != table.spectrum.dim:
        raise SpectrumError(f"jet dimension {f.dim} does not match spectrum dimension {table.spectrum.dim}")
    return f.filter(lambda i, a: table.part_of(i, a) is part)
