"""Holomorphic endomorphisms of ``P^k`` (``k = 1, 2``) in homogeneous coordinates.

Points are unit vectors in ``C^{k+1}`` (any representative is accepted and
normalised).  The Fubini-Study distance is normalised so that ``P^1`` is the
round sphere of radius 1, i.e. ``d([u], [v]) = 2 * angle(u, v)``; with this
normalisation the standard affine charts are 2-bi-Lipschitz on small balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .. import _series as ser
from ..jets import PolyMapJet

__all__ = [
    "DynamicsError",
    "ProjectiveEndomorphism",
    "normalize_point",
    "point_from_affine",
    "fs_distance",
    "unitary_frame",
    "fs_tangent_map",
    "fs_multiplier",
    "chart_data",
    "chart_point",
    "chart_coords",
    "chart_map",
    "chart_radius",
]

Exps = Tuple[int, ...]


class DynamicsError(ValueError):
    """Invalid map or failed dynamical computation."""


class ProjectiveEndomorphism:
    """Endomorphism ``[Z] -> [F_0(Z) : ... : F_k(Z)]`` of ``P^k``.

    Parameters
    ----------
    components : sequence of mappings
        ``k + 1`` homogeneous polynomials of a common degree ``d >= 2``, each a
        mapping from exponent tuples (length ``k + 1``) to coefficients.
    """

    def __init__(self, components: Sequence[Mapping[Exps, complex]], check: bool = True):
        comps = [{tuple(int(x) for x in e): complex(c) for e, c in comp.items() if c != 0} for comp in components]
        if len(comps) not in (2, 3):
            raise DynamicsError(f"need 2 or 3 homogeneous components, got {len(comps)}")
        n = len(comps)
        degrees = {sum(e) for comp in comps for e in comp}
        if any(len(e) != n for comp in comps for e in comp):
            raise DynamicsError("exponent tuples must have one entry per homogeneous coordinate")
        if len(degrees) != 1:
            raise DynamicsError(f"components must be homogeneous of one degree, found {sorted(degrees)}")
        if any(not comp for comp in comps):
            raise DynamicsError("a component vanishes identically")
        self.components: Tuple[Dict[Exps, complex], ...] = tuple(comps)
        self.dim = n - 1
        self.degree = degrees.pop()
        if self.degree < 2:
            raise DynamicsError("degree must be at least 2")
        self._exps = [np.array(list(c.keys()), dtype=int) for c in comps]
        self._coefs = [np.array(list(c.values()), dtype=complex) for c in comps]
        if check:
            self._check_nondegenerate()

    # ----------------------------------------------------------- constructors
    @classmethod
    def from_polynomial(cls, coeffs: Sequence[complex]) -> "ProjectiveEndomorphism":
        """Polynomial ``p(z) = sum coeffs[j] z^j`` (lowest degree first) on ``P^1``."""
        c = list(coeffs)
        while c and c[-1] == 0:
            c.pop()
        d = len(c) - 1
        if d < 2:
            raise DynamicsError("polynomial degree must be at least 2")
        F0 = {(d, 0): 1.0}
        F1 = {(d - j, j): cj for j, cj in enumerate(c) if cj != 0}
        return cls([F0, F1])

    @classmethod
    def product(cls, p: Sequence[complex], q: Sequence[complex]) -> "ProjectiveEndomorphism":
        """Product ``(z, w) -> (p(z), q(w))`` of two polynomials of equal degree on ``P^2``."""
        p, q = list(p), list(q)
        while p and p[-1] == 0:
            p.pop()
        while q and q[-1] == 0:
            q.pop()
        d = len(p) - 1
        if d != len(q) - 1 or d < 2:
            raise DynamicsError("factors must be polynomials of the same degree >= 2")
        F0 = {(d, 0, 0): 1.0}
        F1 = {(d - j, j, 0): c for j, c in enumerate(p) if c != 0}
        F2 = {(d - j, 0, j): c for j, c in enumerate(q) if c != 0}
        return cls([F0, F1, F2])

    # --------------------------------------------------------------- basics
    @property
    def topological_degree(self) -> int:
        return self.degree ** self.dim

    def __repr__(self) -> str:
        return f"ProjectiveEndomorphism(dim={self.dim}, degree={self.degree})"

    def apply(self, Z) -> np.ndarray:
        """Homogeneous image ``F(Z)`` (not normalised); ``Z`` has shape ``(..., k+1)``."""
        Z = np.asarray(Z, dtype=complex)
        out = np.empty(Z.shape, dtype=complex)
        for i, (E, C) in enumerate(zip(self._exps, self._coefs)):
            out[..., i] = np.prod(Z[..., None, :] ** E, axis=-1) @ C
        return out

    def jacobian(self, Z) -> np.ndarray:
        """Homogeneous Jacobian ``dF(Z)``, shape ``(..., k+1, k+1)``."""
        Z = np.asarray(Z, dtype=complex)
        n = self.dim + 1
        J = np.empty(Z.shape[:-1] + (n, n), dtype=complex)
        for i, (E, C) in enumerate(zip(self._exps, self._coefs)):
            for j in range(n):
                ej = E[:, j]
                low = E.copy()
                low[:, j] = np.maximum(ej - 1, 0)
                J[..., i, j] = (np.prod(Z[..., None, :] ** low, axis=-1) * ej) @ C
        return J

    def __call__(self, Z) -> np.ndarray:
        return normalize_point(self.apply(Z))

    def iterate(self, Z, n: int) -> np.ndarray:
        out = normalize_point(Z)
        for _ in range(n):
            out = normalize_point(self.apply(out))
        return out

    def forward_orbit(self, Z, n: int) -> np.ndarray:
        pts = [normalize_point(Z)]
        for _ in range(n):
            pts.append(normalize_point(self.apply(pts[-1])))
        return np.array(pts)

    def product_factors(self) -> Optional[Tuple["ProjectiveEndomorphism", "ProjectiveEndomorphism", "ProjectiveEndomorphism"]]:
        """For a split map of ``P^2`` return the two factor maps and the map on the line ``Z_0 = 0``."""
        if self.dim != 2:
            return None
        F0, F1, F2 = self.components
        d = self.degree
        if set(F0) != {(d, 0, 0)}:
            return None
        if any(e[2] for e in F1) or any(e[1] for e in F2):
            return None
        a = F1.get((0, d, 0), 0)
        b = F2.get((0, 0, d), 0)
        if a == 0 or b == 0:
            return None
        c0 = F0[(d, 0, 0)]
        f1 = ProjectiveEndomorphism([{(d, 0): c0}, {(e[0], e[1]): c for e, c in F1.items()}])
        f2 = ProjectiveEndomorphism([{(d, 0): c0}, {(e[0], e[2]): c for e, c in F2.items()}])
        g = ProjectiveEndomorphism([{(d, 0): a}, {(0, d): b}])
        return f1, f2, g

    # --------------------------------------------------------- validation
    def _check_nondegenerate(self) -> None:
        if self.dim == 1:
            d = self.degree

            def coeffs(comp):
                return np.array([comp.get((d - e, e), 0j) for e in range(d + 1)])

            a, b = coeffs(self.components[0]), coeffs(self.components[1])
            S = np.zeros((2 * d, 2 * d), dtype=complex)
            for r in range(d):
                S[r, r : r + d + 1] = a
                S[d + r, r : r + d + 1] = b
            sv = np.linalg.svd(S, compute_uv=False)
            if sv.min() <= 1e-12 * sv.max():
                raise DynamicsError("components have a common zero (resultant vanishes)")
        else:
            rng = np.random.default_rng(12345)
            Z = rng.standard_normal((4000, 3)) + 1j * rng.standard_normal((4000, 3))
            Z = np.vstack([np.eye(3), Z])
            Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)
            vals = np.linalg.norm(self.apply(Z), axis=1)
            scale = max(float(np.max(np.abs(c))) for c in self._coefs)
            if vals.min() < 1e-6 * scale:
                raise DynamicsError("components appear to have a common zero (sampled minimum modulus too small)")


# --------------------------------------------------------------------------
# Fubini-Study geometry
# --------------------------------------------------------------------------
def normalize_point(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=complex)
    n = np.linalg.norm(Z, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise DynamicsError("the zero vector is not a projective point")
    return Z / n


def point_from_affine(z) -> np.ndarray:
    """Unit representative of the affine point ``z`` in the chart ``Z_0 = 1``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return normalize_point(np.concatenate([[1.0], z]))


def fs_distance(u, v) -> np.ndarray:
    """Fubini-Study distance ``2 * angle`` between lines (broadcasts over leading axes)."""
    u = normalize_point(u)
    v = normalize_point(v)
    ip = np.sum(np.conj(v) * u, axis=-1)
    perp = np.linalg.norm(u - ip[..., None] * v, axis=-1)
    return 2 * np.arctan2(perp, np.abs(ip))


def _householder_frames(U: np.ndarray) -> np.ndarray:
    """Unitary matrices with first column ``U[t]`` (rows of ``U`` are unit vectors)."""
    n = U.shape[-1]
    u0 = U[..., 0]
    mag = np.abs(u0)
    phi = np.where(mag > 1e-300, u0 / np.where(mag > 1e-300, mag, 1.0), 1.0)
    w = -U.copy()
    w[..., 0] += phi
    nw2 = np.sum(np.abs(w) ** 2, axis=-1)
    safe = nw2 > 1e-30
    coef = np.where(safe, 2.0 / np.where(safe, nw2, 1.0), 0.0)
    H = np.eye(n, dtype=complex) - coef[..., None, None] * w[..., :, None] * np.conj(w[..., None, :])
    # H maps phi*e_0 to u, so the first column of H diag(phi, 1, ..) is u
    H[..., :, 0] = U
    return H


def unitary_frame(u) -> np.ndarray:
    """Unitary matrix whose first column is the unit vector ``u``."""
    return _householder_frames(normalize_point(u)[None, :])[0]


def _batched_frames(U: np.ndarray) -> np.ndarray:
    """Orthonormal bases of ``u^perp`` for each row of ``U``: shape ``(N, k+1, k)``."""
    return _householder_frames(U)[..., :, 1:]


def fs_tangent_map(f: ProjectiveEndomorphism, U, frames_in=None, frames_out=None, lifts_out=None) -> np.ndarray:
    """Matrix of ``d_u f`` between Fubini-Study orthonormal frames.

    ``U`` has shape ``(N, k+1)`` (unit vectors).  Without explicit frames the
    output frame is built at ``F(u)/|F(u)|``; operator norms and determinant
    moduli are then intrinsic.  With ``frames_out``/``lifts_out`` the image
    is expressed relative to the given lift, so products along an orbit are
    consistent.
    """
    U = normalize_point(np.atleast_2d(U))
    FU = f.apply(U)
    J = f.jacobian(U)
    Ein = _batched_frames(U) if frames_in is None else frames_in
    if lifts_out is None:
        lam = np.linalg.norm(FU, axis=-1)
        W = FU / lam[:, None]
        Eout = _batched_frames(W) if frames_out is None else frames_out
    else:
        lam = np.sum(np.conj(lifts_out) * FU, axis=-1)
        Eout = frames_out
    M = np.conj(np.swapaxes(Eout, -1, -2)) @ J @ Ein
    return M / lam[:, None, None]


def fs_multiplier(f: ProjectiveEndomorphism, u, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Derivative of ``f^n`` at ``u`` in the unitary affine chart adapted to ``u``.

    Returns ``(M, V)`` with ``M`` of shape ``(N, k, k)`` and ``V`` the
    normalised image ``f^n(u)``.  For a fixed point of ``f^n`` this is the
    multiplier matrix, whose eigenvalues are the usual multipliers and whose
    singular values are measured in the Fubini-Study metric.
    """
    U = normalize_point(np.atleast_2d(u))
    V = U.copy()
    Mh = np.broadcast_to(np.eye(f.dim + 1, dtype=complex), U.shape[:-1] + (f.dim + 1, f.dim + 1)).copy()
    for _ in range(n):
        J = f.jacobian(V)
        V = f.apply(V)
        Mh = J @ Mh
        s = np.linalg.norm(V, axis=-1)
        V = V / s[:, None]
        Mh = Mh / s[:, None, None]
    lam = np.sum(np.conj(U) * V, axis=-1)
    E = _batched_frames(U)
    M = np.conj(np.swapaxes(E, -1, -2)) @ Mh @ E
    return M / lam[:, None, None], V


# --------------------------------------------------------------------------
# standard affine charts
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ChartData:
    """Chart ``psi(z) = [c + z]`` in the affine patch ``Z_patch = 1`` (coordinates of the other entries)."""

    patch: int
    center: np.ndarray  # affine coordinates of the base point in the patch


def chart_data(point) -> ChartData:
    """Patch maximising the modulus of the coordinate set to 1 (first index on ties)."""
    u = normalize_point(point)
    mags = np.abs(u)
    a = int(np.argmax(mags >= mags.max() * (1 - 1e-12)))
    others = [i for i in range(len(u)) if i != a]
    return ChartData(a, u[others] / u[a])


def chart_point(ch: ChartData, z) -> np.ndarray:
    """Homogeneous vector of the chart point ``z`` (shape ``(..., k)``)."""
    z = np.asarray(z, dtype=complex)
    k = ch.center.shape[0]
    out = np.empty(z.shape[:-1] + (k + 1,), dtype=complex)
    others = [i for i in range(k + 1) if i != ch.patch]
    out[..., ch.patch] = 1.0
    out[..., others] = ch.center + z
    return out


def chart_coords(ch: ChartData, Z) -> np.ndarray:
    """Chart coordinates (relative to the chart center) of the homogeneous point ``Z``."""
    Z = np.asarray(Z, dtype=complex)
    k = Z.shape[-1] - 1
    others = [i for i in range(k + 1) if i != ch.patch]
    return Z[..., others] / Z[..., ch.patch : ch.patch + 1] - ch.center


def chart_map(
    f: ProjectiveEndomorphism, center, degree: int = 8, image=None
) -> PolyMapJet:
    """Taylor jet at 0 of ``f`` read in the charts at ``center`` and at ``f(center)``.

    ``image`` overrides the point whose chart is used on the target side; it
    must represent ``f(center)`` (useful to keep charts consistent along an
    orbit).
    """
    src = chart_data(center)
    img = normalize_point(f.apply(normalize_point(center))) if image is None else normalize_point(image)
    if fs_distance(img, f(normalize_point(center))) > 1e-8:
        raise DynamicsError("image point does not represent f(center)")
    dst = chart_data(img)
    k = f.dim
    D = degree
    others = [i for i in range(k + 1) if i != src.patch]
    Zs: List[ser.Series] = [None] * (k + 1)
    Zs[src.patch] = ser.constant(1.0, k)
    for t, i in enumerate(others):
        Zs[i] = ser.variable(t, k, src.center[t])
    # powers of each homogeneous coordinate, then every component as a series
    pw: Dict[Tuple[int, int], ser.Series] = {}

    def power(i: int, e: int) -> ser.Series:
        key = (i, e)
        if key not in pw:
            pw[key] = ser.power(Zs[i], e, D, k)
        return pw[key]

    comps = []
    for comp in f.components:
        acc: ser.Series = {}
        for e, c in comp.items():
            term = ser.constant(c, k)
            for i, ei in enumerate(e):
                if ei:
                    term = ser.mul(term, power(i, ei), D)
            acc = ser.add(acc, term)
        comps.append(acc)
    inv = ser.reciprocal(comps[dst.patch], D, k)
    zero = (0,) * k
    coeffs = {}
    out_others = [i for i in range(k + 1) if i != dst.patch]
    for t, i in enumerate(out_others):
        q = ser.mul(comps[i], inv, D)
        for a, c in q.items():
            if a != zero and c != 0:
                coeffs[(t, a)] = c
    return PolyMapJet(k, D, coeffs)


def chart_radius(point, start: float = 0.5, samples: int = 400, seed: int = 0, floor: float = 1e-6) -> float:
    """Largest radius (halving from ``start``) on which the chart at ``point`` is 2-bi-Lipschitz.

    Checked by sampling pairs in the ball: ``|z1 - z2| / 2 <= d(psi z1, psi z2) <= 2 |z1 - z2|``.
    """
    ch = chart_data(point)
    k = ch.center.shape[0]
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((samples, 2, k)) + 1j * rng.standard_normal((samples, 2, k))
    base /= np.linalg.norm(base, axis=-1, keepdims=True)
    radii = rng.uniform(0, 1, (samples, 2, 1)) ** (1.0 / (2 * k))
    unit_ball = base * radii
    r = start
    while r >= floor:
        z = r * unit_ball
        d_chart = np.linalg.norm(z[:, 0] - z[:, 1], axis=-1)
        d_fs = fs_distance(chart_point(ch, z[:, 0]), chart_point(ch, z[:, 1]))
        ratio = d_fs / np.maximum(d_chart, 1e-300)
        if ratio.min() >= 0.5 and ratio.max() <= 2.0:
            return r
        r /= 2
    raise DynamicsError("no chart radius passed the distortion check")
