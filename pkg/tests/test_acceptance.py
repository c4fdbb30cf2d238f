"""Acceptance criteria.  Each test carries ``@pytest.mark.criterion(n, title)``;
the conftest prints one PASS/FAIL line per criterion after the run."""
import math
import time

import numpy as np
import pytest

from resonorm.cocycle import PeriodicGermCocycle, PeriodicLinearCocycle, oseledec_reduce
from resonorm.jets import PolyMapJet, compose, derivative_at, multi_indices
from resonorm.normalform import (
    full_normal_form,
    homological_series,
    iterate_resonant,
    renormalize_limit,
    resonant_derivative_growth,
    resonant_norm_growth,
    solve_homological,
)
from resonorm.spectrum import ContractionSpectrum, Part, build_table, project, zeta_margin
from resonorm.dynamics import (
    ProjectiveEndomorphism,
    birkhoff_lyapunov_oracle,
    cycle_lyapunov_estimate,
    find_periodic_points,
    fs_distance,
    point_from_affine,
    repelling_density_check,
    verify_nt,
)

LOG2 = math.log(2.0)
L = math.log


def power_map(d):
    return ProjectiveEndomorphism.from_polynomial([0] * d + [1])


def record_at(points, z):
    target = point_from_affine(np.atleast_1d(z))
    return min(points, key=lambda r: float(fs_distance(r.point, target)))


# --------------------------------------------------------------------- 1
@pytest.mark.criterion(1, "power-map exactness")
def test_c1_power_map_exactness():
    t0 = time.perf_counter()
    for d in (2, 3):
        devs = []
        for n in range(1, 9):
            est = cycle_lyapunov_estimate(power_map(d), n, 1)
            exact = (d ** n - 1) / d ** n * math.log(d)
            assert abs(est.estimates[1] - exact) <= 1e-9, (d, n)
            devs.append(math.log(d) - est.estimates[1])
        ratios = np.array(devs[:-1]) / np.array(devs[1:])
        assert np.allclose(ratios, d, rtol=1e-6)
    elapsed = time.perf_counter() - t0
    print(f"criterion 1 runtime {elapsed:.2f} s")
    assert elapsed < 5.0


# --------------------------------------------------------------------- 2
@pytest.mark.criterion(2, "product-map exactness")
def test_c2_product_map_exactness():
    f = ProjectiveEndomorphism.product([0, 0, 1], [0, 0, 1])
    for n in range(1, 6):
        est = cycle_lyapunov_estimate(f, n, 2)
        assert est.complete
        exact = (2 ** n - 1) ** 2 / 4 ** n * 2 * LOG2
        assert abs(est.estimates[2] - exact) <= 1e-8, n


@pytest.mark.criterion(2, "product-map exactness")
def test_c2_jacobian_average_trend():
    # The Jacobian average carries the same (1 - 2^-n)^2 factor as the cycle
    # estimate, so at n = 5 it sits at (31/32)^2 * 2 log 2.
    f = ProjectiveEndomorphism.product([0, 0, 1], [0, 0, 1])
    vals = [cycle_lyapunov_estimate(f, n, 2).jacobian_average for n in range(1, 6)]
    for n, v in enumerate(vals, start=1):
        assert v == pytest.approx((1 - 2.0 ** -n) ** 2 * 2 * LOG2, abs=1e-10)
    assert all(b > a for a, b in zip(vals, vals[1:]))
    print(f"criterion 2 jacobian average at n=5: {vals[-1]:.6f} (target {2 * LOG2:.6f})")
    assert abs(vals[-1] - 2 * LOG2) <= 0.02


# --------------------------------------------------------------------- 3
@pytest.mark.criterion(3, "cross-validation")
def test_c3_cycle_estimate_vs_oracle():
    t0 = time.perf_counter()
    f = ProjectiveEndomorphism.from_polynomial([-1, 0, 1])
    est = cycle_lyapunov_estimate(f, 12, 1)
    orc = birkhoff_lyapunov_oracle(f, s=1, n_samples=10000, seed=2024)
    elapsed = time.perf_counter() - t0
    print(f"criterion 3: cycle {est.estimates[1]:.6f}, oracle {orc.value:.6f} +- {orc.stderr:.6f}, {elapsed:.1f} s")
    assert orc.n_samples >= 10 ** 4
    assert abs(est.estimates[1] - orc.value) <= max(0.05, 3 * orc.stderr)
    assert elapsed < 60.0


# --------------------------------------------------------------------- 4
KOENIGS_F = PeriodicGermCocycle((PolyMapJet(1, 6, {(0, (1,)): 0.5, (0, (2,)): 1.0}),))
KOENIGS_N = PeriodicGermCocycle((PolyMapJet(1, 6, {(0, (1,)): 0.5}),))


@pytest.mark.criterion(4, "renormalisation limit")
def test_c4_koenigs_coefficients_by_30_iterations():
    # T_n = N^-n F^n; the error of t_m after n steps is about c_m 2^-n with
    # c_2 = 4 and c_3 = 32, so t_3 reaches 1e-8 only at n = 32.
    rep = renormalize_limit(KOENIGS_F, KOENIGS_N, 1, theta=0.6, n_max=30, require_convergence=False)
    assert rep.iterations <= 30
    T = rep.T[0]
    err2, err3 = abs(T[(0, (2,))] - 4.0), abs(T[(0, (3,))] - 32 / 3)
    print(f"criterion 4 after {rep.iterations} iterations: |t2 - 4| = {err2:.2e}, |t3 - 32/3| = {err3:.2e}")
    assert err2 < 1e-8
    assert err3 < 1e-8


@pytest.mark.criterion(4, "renormalisation limit")
def test_c4_koenigs_limit_rate_and_conjugacy():
    rep = renormalize_limit(KOENIGS_F, KOENIGS_N, 1, theta=0.6)
    assert rep.converged
    T = rep.T[0]
    assert abs(T[(0, (2,))] - 4.0) < 1e-8 and abs(T[(0, (3,))] - 32 / 3) < 1e-8
    assert rep.theta_min == pytest.approx(0.5)
    assert rep.fitted_ratio <= 0.6 + 0.05
    assert rep.residual < 1e-8


# --------------------------------------------------------------------- 5
def _nonresonant_instance(rng, p):
    while True:
        m1, m2 = np.sort(rng.uniform(0.1, 0.6, 2))[::-1]
        s = ContractionSpectrum((L(m1), L(m2)), (1, 1), 0.02)
        if zeta_margin(s) <= 0:
            continue
        table = build_table(s)
        if not table.resonant():
            break
    A = [np.diag(np.exp(np.array(s.exponents) + rng.uniform(-0.01, 0.01, 2)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 2)))
         for _ in range(p)]
    m = int(rng.integers(2, 4))
    H = [PolyMapJet(2, m, {(i, a): complex(*rng.standard_normal(2)) for i in range(2) for a in multi_indices(2, m)})
         for _ in range(p)]
    return A, H, s, table


@pytest.mark.criterion(5, "homological solver")
def test_c5_homological_random_instances():
    rng = np.random.default_rng(5)
    worst_res = worst_agree = 0.0
    for t in range(200):
        p = (1, 2, 3)[t % 3]
        A, H, s, table = _nonresonant_instance(rng, p)
        sol = solve_homological(A, H, s, table)
        series = homological_series(A, H, s, table)
        agree = max(q1.distance(q2) for q1, q2 in zip(sol.Q, series))
        worst_res = max(worst_res, sol.residual)
        worst_agree = max(worst_agree, agree)
    print(f"criterion 5: worst residual {worst_res:.2e}, worst series agreement {worst_agree:.2e}")
    assert worst_res < 1e-10
    assert worst_agree < 1e-8


@pytest.mark.criterion(5, "homological solver")
def test_c5_worked_examples():
    s = ContractionSpectrum((L(0.5), L(0.3)), (1, 1), 0.02)
    sol = solve_homological([np.diag([0.5, 0.3])], [PolyMapJet(2, 2, {(1, (2, 0)): 1.0})], s)
    assert abs(sol.Q[0][(1, (2, 0))] - 20.0) <= 1e-12
    s1 = ContractionSpectrum((0.5 * (L(0.5) + L(0.4)),), (1,), 0.02)
    H = [PolyMapJet(1, 2, {(0, (2,)): 1.0})] * 2
    sol = solve_homological([[[0.5]], [[0.4]]], H, s1)
    assert abs(sol.Q[0][(0, (2,))] - 4.0625) <= 1e-12
    assert abs(sol.Q[1][(0, (2,))] - 4.125) <= 1e-12


# --------------------------------------------------------------------- 6
RESONANT_SPECTRA = [
    ((1, 2), (1, 1)),
    ((1, 3), (1, 1)),
    ((1, 2, 3), (1, 1, 1)),
    ((1, 2), (2, 1)),
    ((1, 2), (1, 2)),
]


def _resonant_cocycle(rng):
    ratios, mult = RESONANT_SPECTRA[int(rng.integers(len(RESONANT_SPECTRA)))]
    a = rng.uniform(0.3, 1.2)
    spec = ContractionSpectrum(tuple(-a * r for r in ratios), mult, 0.01)
    table = build_table(spec)
    k, D = spec.dim, spec.q_tilde
    p = int(rng.integers(1, 4))
    germs = []
    for _ in range(p):
        coeffs = {}
        for j in range(spec.n_blocks):
            sl = spec.block_slice(j)
            kj = sl.stop - sl.start
            Q, _ = np.linalg.qr(rng.standard_normal((kj, kj)) + 1j * rng.standard_normal((kj, kj)))
            B = math.exp(spec.exponents[j]) * Q
            for r in range(kj):
                for c in range(kj):
                    e = [0] * k
                    e[sl.start + c] = 1
                    coeffs[(sl.start + r, tuple(e))] = B[r, c]
        for i in range(k):
            for m in range(2, D + 1):
                for alpha in multi_indices(k, m):
                    if table.part_of(i, alpha) is Part.RESONANT:
                        coeffs[(i, alpha)] = complex(*rng.standard_normal(2))
        germs.append(PolyMapJet(k, D, coeffs))
    return PeriodicGermCocycle(tuple(germs)), spec, table


@pytest.mark.criterion(6, "resonant closure")
def test_c6_resonant_closure():
    rng = np.random.default_rng(6)
    for _ in range(100):
        R, spec, table = _resonant_cocycle(rng)
        p = R.period
        w = 0.3 * (rng.standard_normal(spec.dim) + 1j * rng.standard_normal(spec.dim))
        An = np.eye(spec.dim, dtype=complex)
        for n in range(1, 21):
            An = R[(n - 1) % p].linear_part() @ An
            Rn = iterate_resonant(R, table, n)
            assert project(Rn, table, Part.SUB).is_zero() and project(Rn, table, Part.SUPER).is_zero()
            assert Rn.poly_degree <= max(spec.q_tilde, 1)
            J = derivative_at(Rn, w)
            for j in range(spec.n_blocks):
                sl = spec.block_slice(j)
                assert np.all(J[sl, sl.stop:] == 0)  # no dependence on faster blocks
                assert np.allclose(J[sl, sl], An[sl, sl], rtol=1e-12, atol=1e-14 * np.abs(An[sl, sl]).max())


# --------------------------------------------------------------------- 7
@pytest.mark.criterion(7, "growth laws")
def test_c7_growth_laws():
    spec = ContractionSpectrum((L(0.5), L(0.25)), (1, 1), 0.01)
    table = build_table(spec)
    R = PeriodicGermCocycle((PolyMapJet(2, 4, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.25, (1, (2, 0)): 1.0}),))
    ns = range(1, 61)
    g = resonant_norm_growth(R, table, 1, ns)
    print(f"criterion 7: fitted slope {g.slope:.6f} (raw slope {g.raw_slope:.6f}), log 0.25 = {L(0.25):.6f}")
    assert L(0.25) - 0.02 <= g.slope <= L(0.25) + 0.02
    d = resonant_derivative_growth(R, table, [0.2, 0.1], 2, ns)
    for n, v in zip(d.n, d.values):
        assert abs(v - L(0.125)) <= 0.5 / n


# --------------------------------------------------------------------- 8
def _random_linear_cocycle(rng, p, k, eps=0.05):
    while True:
        mods = np.sort(rng.uniform(0.05, 0.6, k))[::-1]
        if k > 1 and np.min(-np.diff(np.log(mods))) < 0.05:
            continue
        if zeta_margin(ContractionSpectrum(tuple(np.log(mods)), (1,) * k, eps)) > 0:
            break
    P = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    M = P @ np.diag(mods ** p * np.exp(2j * np.pi * rng.random(k))) @ np.linalg.inv(P)
    mats = [rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)) + 2 * np.eye(k) for _ in range(p - 1)]
    prod = np.eye(k)
    for m in mats:
        prod = m @ prod
    return PeriodicLinearCocycle(tuple(mats + [M @ np.linalg.inv(prod)]))


@pytest.mark.criterion(8, "Oseledec-Pesin reduction")
def test_c8_linear_reduction():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        c = _random_linear_cocycle(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        red = oseledec_reduce(c, 0.05)
        worst = max(worst, red.conjugation_residual)
        assert red.conjugation_residual < 1e-10
        assert red.achieved_eps <= 0.05
        chk = red.check()
        assert chk.passed, chk.violations
        for C in red.change_of_basis:
            sv = np.linalg.svd(C, compute_uv=False)
            assert sv.min() >= 1 - 1e-12 and sv.max() <= red.h_bound * (1 + 1e-12)
    print(f"criterion 8: worst conjugation residual {worst:.2e}")


# --------------------------------------------------------------------- 9
def nf_corpus():
    D = 8
    return {
        "resonant model": [PolyMapJet(2, D, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.25, (1, (2, 0)): 1.0})],
        "mixed quadratic": [PolyMapJet(2, D, {(0, (1, 0)): 0.5, (0, (0, 2)): 1.0, (1, (0, 1)): 0.25,
                                              (1, (2, 0)): 1.0, (1, (0, 2)): 1.0})],
        "non-resonant": [PolyMapJet(2, D, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.3, (0, (1, 1)): 0.7,
                                           (1, (2, 0)): -0.4, (0, (3, 0)): 0.2, (1, (0, 3)): 0.5})],
        "triangular linear part": [PolyMapJet(2, D, {(0, (1, 0)): 0.5, (0, (0, 1)): 0.2, (1, (0, 1)): 0.3,
                                                     (0, (2, 0)): 0.3, (1, (1, 1)): 1.0})],
        "rotating period 2": [
            PolyMapJet(2, D, {(0, (1, 0)): 0.5j, (1, (0, 1)): 0.25, (1, (2, 0)): 0.5, (0, (0, 2)): 0.1}),
            PolyMapJet(2, D, {(0, (1, 0)): 0.5, (1, (0, 1)): -0.25j, (1, (2, 0)): 1.0, (0, (1, 1)): 0.3}),
        ],
        "general period 3": [
            PolyMapJet(2, D, {(0, (1, 0)): 0.6, (0, (0, 1)): 0.1, (1, (1, 0)): 0.05, (1, (0, 1)): 0.2, (1, (2, 0)): 0.4}),
            PolyMapJet(2, D, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.3, (0, (1, 1)): 0.2, (1, (0, 3)): 0.1}),
            PolyMapJet(2, D, {(0, (1, 0)): 0.55, (0, (0, 1)): -0.1j, (1, (0, 1)): 0.25, (0, (2, 0)): 0.2}),
        ],
    }


@pytest.mark.criterion(9, "full pipeline")
def test_c9_full_normal_form_corpus():
    for name, germs in nf_corpus().items():
        G = PeriodicGermCocycle(tuple(germs))
        nf = full_normal_form(G, eps=0.02)
        p = G.period
        resid = max(compose(nf.V[(i + 1) % p], G[i]).distance(compose(nf.R[i], nf.V[i])) for i in range(p))
        assert resid < 1e-8, name
        for g in nf.R:
            assert project(g, nf.table, Part.SUB).is_zero(), name
            assert project(g, nf.table, Part.SUPER).is_zero(), name


# -------------------------------------------------------------------- 10
@pytest.mark.criterion(10, "inverse-branch harness")
@pytest.mark.parametrize("coeffs,z", [([0, 0, 1], 1.0), ([-1, 0, 1], (1 + math.sqrt(5)) / 2)])
def test_c10_verify_nt(coeffs, z):
    f = ProjectiveEndomorphism.from_polynomial(coeffs)
    rec = record_at(find_periodic_points(f, 1), z)
    rep = verify_nt(f, rec, n_max=20)
    assert rep.eps == pytest.approx(rep.chi1 / 20)
    assert rep.chi1 == pytest.approx(math.log(abs(2 * z)), abs=1e-12)
    assert rep.containment_ok
    assert rep.lipschitz_ok
    assert rep.bilipschitz_ok
    assert rep.exterior_ok


# -------------------------------------------------------------------- 11
COUNT_MAPS = [
    ("z^2", power_map(2), range(1, 11)),
    ("z^3", power_map(3), range(1, 7)),
    ("z^2-1", ProjectiveEndomorphism.from_polynomial([-1, 0, 1]), range(1, 11)),
    ("rabbit", ProjectiveEndomorphism.from_polynomial([-0.1226 + 0.7449j, 0, 1]), range(1, 10)),
    ("z^2+1/4+i/10", ProjectiveEndomorphism.from_polynomial([0.25 + 0.1j, 0, 1]), range(1, 10)),
    ("(z^2,w^2)", ProjectiveEndomorphism.product([0, 0, 1], [0, 0, 1]), range(1, 5)),
    ("(z^2-1,w^2)", ProjectiveEndomorphism.product([-1, 0, 1], [0, 0, 1]), range(1, 5)),
]


@pytest.mark.criterion(11, "cycle-count bounds")
def test_c11_phi_bounds_and_counts():
    eps = 0.1
    for name, f, ns in COUNT_MAPS:
        for n in ns:
            est = cycle_lyapunov_estimate(f, n)
            assert est.bounds_ok, (name, n)
            for lo, hi in est.phi_range.values():
                assert 0 <= lo and hi <= est.gamma + 1e-9, (name, n)
            assert est.card_Rn <= f.topological_degree ** n * (1 + eps), (name, n)


@pytest.mark.criterion(11, "cycle-count bounds")
def test_c11_density_power_maps():
    for d in (2, 3):
        for n in range(1, 8 if d == 2 else 6):
            rep = repelling_density_check(power_map(d), n, 0.1, math.log(d))
            assert rep.fraction == 1.0 and rep.card_Rn_eps == rep.card_Rn == d ** n - 1


@pytest.mark.criterion(11, "cycle-count bounds")
def test_c11_density_z2_minus_1_diagnostic():
    f = ProjectiveEndomorphism.from_polynomial([-1, 0, 1])
    sigma = birkhoff_lyapunov_oracle(f, n_samples=10000, seed=2024).value
    fr = []
    for n in range(6, 13):
        rep = repelling_density_check(f, n, 0.2, sigma)
        fr.append(rep.fraction)
        print(f"z^2-1 density n={n}: fraction {rep.fraction:.6f}, normalized {rep.normalized:.6f}")
    monotone = all(b >= a for a, b in zip(fr, fr[1:]))
    print(f"z^2-1 density fractions non-decreasing over n=6..12: {monotone}")
    # diagnostic only: the report must be well formed
    assert all(0 <= x <= 1 for x in fr)
