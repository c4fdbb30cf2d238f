"""Scalar truncated multivariate power series stored as ``{exponent: coefficient}``.

These helpers back the jet arithmetic and the chart expansions.  Unlike
:class:`~resonorm.jets.PolyMapJet` they allow a constant term.
"""
from __future__ import annotations

from typing import Dict, Tuple

Exponent = Tuple[int, ...]
Series = Dict[Exponent, complex]


def degree_of(alpha: Exponent) -> int:
    return sum(alpha)


def constant(value: complex, nvars: int) -> Series:
    return {(0,) * nvars: complex(value)} if value != 0 else {}


def variable(j: int, nvars: int, shift: complex = 0.0) -> Series:
    e = [0] * nvars
    e[j] = 1
    out: Series = {tuple(e): 1.0 + 0j}
    if shift != 0:
        out[(0,) * nvars] = complex(shift)
    return out


def add(p: Series, q: Series, scale: complex = 1.0) -> Series:
    """Return ``p + scale * q``."""
    out = dict(p)
    for a, c in q.items():
        out[a] = out.get(a, 0j) + scale * c
    return out


def scale(p: Series, s: complex) -> Series:
    return {a: s * c for a, c in p.items()}


def mul(p: Series, q: Series, max_degree: int) -> Series:
    """Product of two series truncated above ``max_degree``."""
    if not p or not q:
        return {}
    qd = sorted(((degree_of(b), b, c) for b, c in q.items()), key=lambda t: t[0])
    out: Series = {}
    for a, ca in p.items():
        room = max_degree - degree_of(a)
        if room < 0:
            continue
        for db, b, cb in qd:
            if db > room:
                break
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = out.get(key, 0j) + ca * cb
    return out


def power(p: Series, e: int, max_degree: int, nvars: int) -> Series:
    out = constant(1.0, nvars)
    base = p
    while e > 0:
        if e & 1:
            out = mul(out, base, max_degree)
        e >>= 1
        if e:
            base = mul(base, base, max_degree)
    return out


def reciprocal(p: Series, max_degree: int, nvars: int) -> Series:
    """``1/p`` for a series with nonzero constant term."""
    zero = (0,) * nvars
    c0 = p.get(zero, 0j)
    if c0 == 0:
        raise ZeroDivisionError("series has vanishing constant term")
    u = {a: c / c0 for a, c in p.items() if a != zero}
    # 1/(1+u) = sum (-u)^j, and u has no constant term so j <= max_degree suffices
    out = constant(1.0, nvars)
    term = constant(1.0, nvars)
    for _ in range(max_degree):
        term = scale(mul(term, u, max_degree), -1.0)
        if not term:
            break
        out = add(out, term)
    return scale(out, 1.0 / c0)


def truncate(p: Series, max_degree: int) -> Series:
    return {a: c for a, c in p.items() if degree_of(a) <= max_degree}
