import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonorm.dynamics import (
    DynamicsError,
    ProjectiveEndomorphism,
    birkhoff_lyapunov_oracle,
    chart_map,
    chart_radius,
    cycle_lyapunov_estimate,
    exterior_norm,
    find_periodic_points,
    fs_distance,
    inverse_branch,
    normalize_point,
    phi_n,
    point_from_affine,
    preimages,
    repelling_density_check,
    verify_nt,
)
from resonorm.dynamics.endomorphism import chart_coords, chart_data, chart_point

LOG2 = math.log(2.0)
GOLDEN = (1 + math.sqrt(5)) / 2


def power_map(d):
    return ProjectiveEndomorphism.from_polynomial([0] * d + [1])


def z2_minus_1():
    return ProjectiveEndomorphism.from_polynomial([-1, 0, 1])


def square_product():
    return ProjectiveEndomorphism.product([0, 0, 1], [0, 0, 1])


def record_at(points, z):
    target = point_from_affine(np.atleast_1d(z))
    return min(points, key=lambda r: float(fs_distance(r.point, target)))


# ------------------------------------------------------------------ maps
def test_endomorphism_validation():
    with pytest.raises(DynamicsError):
        ProjectiveEndomorphism.from_polynomial([0, 1])  # degree 1
    with pytest.raises(DynamicsError):
        ProjectiveEndomorphism([{(2, 0): 1.0}, {(1, 0): 1.0}])  # mixed degrees
    with pytest.raises(DynamicsError):
        ProjectiveEndomorphism([{(2, 0): 1.0}, {(1, 1): 1.0}])  # common zero [0:1]
    with pytest.raises(DynamicsError):
        ProjectiveEndomorphism.product([0, 0, 1], [0, 0, 0, 1])
    f = square_product()
    assert f.dim == 2 and f.degree == 2 and f.topological_degree == 4


def test_chart_map_examples():
    f = power_map(2)
    g = chart_map(f, point_from_affine([1.0]), degree=4)
    assert g.coeffs == {(0, (1,)): 2.0, (0, (2,)): 1.0}
    g0 = chart_map(f, point_from_affine([0.0]), degree=4)
    assert g0.coeffs == {(0, (2,)): 1.0}
    P = chart_map(square_product(), point_from_affine([1.0, 1.0]), degree=3)
    assert np.allclose(P.linear_part(), np.diag([2.0, 2.0]), atol=1e-14)


def test_chart_map_rejects_wrong_image():
    f = power_map(2)
    with pytest.raises(DynamicsError):
        chart_map(f, point_from_affine([1.0]), image=point_from_affine([2.0]))


def test_chart_distortion_sampled():
    rng = np.random.default_rng(3)
    for p in [point_from_affine([0.3 + 0.2j]), point_from_affine([1.0, -2.0j]), np.array([0, 1, 1e-3])]:
        u = normalize_point(p)
        r = chart_radius(u)
        ch = chart_data(u)
        k = len(u) - 1
        z = rng.standard_normal((200, 2, k)) + 1j * rng.standard_normal((200, 2, k))
        z *= r / np.linalg.norm(z, axis=-1, keepdims=True) * rng.uniform(0, 1, (200, 2, 1))
        d = fs_distance(chart_point(ch, z[:, 0]), chart_point(ch, z[:, 1]))
        e = np.linalg.norm(z[:, 0] - z[:, 1], axis=-1)
        assert np.all(d >= 0.5 * e - 1e-12) and np.all(d <= 2 * e + 1e-12)
        assert np.allclose(chart_coords(ch, chart_point(ch, z[:, 0])), z[:, 0])


# ------------------------------------------------------- periodic points
def test_power_map_period_three():
    S = find_periodic_points(power_map(2), 3)
    assert len(S) == 9 and S.complete and not S.heuristic
    rep = S.repulsive
    assert len(rep) == 7
    for r in rep:
        z = r.affine[0]
        assert abs(abs(z) - 1) < 1e-12 and abs(z ** 7 - 1) < 1e-10
        assert r.moduli[0] == pytest.approx(8.0, rel=1e-12)
    assert sum(r.primitive for r in rep) == 6


def test_z2_minus_1_fixed_and_two_cycle():
    f = z2_minus_1()
    S1 = find_periodic_points(f, 1)
    rep = sorted(S1.repulsive, key=lambda r: r.affine[0].real)
    assert len(rep) == 2
    assert rep[0].affine[0] == pytest.approx((1 - math.sqrt(5)) / 2, abs=1e-12)
    assert rep[1].affine[0] == pytest.approx(GOLDEN, abs=1e-12)
    assert rep[0].moduli[0] == pytest.approx(math.sqrt(5) - 1, rel=1e-12)
    assert rep[1].moduli[0] == pytest.approx(1 + math.sqrt(5), rel=1e-12)

    S2 = find_periodic_points(f, 2)
    assert S2.complete and len(S2) == 5
    assert len(S2.repulsive) == 2 and S2.repulsive_primitive == []
    cyc = [r for r in S2 if r.period == 2]
    assert sorted(round(r.affine[0].real, 10) for r in cyc) == [-1.0, 0.0]
    assert all(not r.repulsive for r in cyc)


def test_period_residual_and_counts():
    for f, n in [(z2_minus_1(), 7), (power_map(3), 4), (square_product(), 3),
                 (ProjectiveEndomorphism.from_polynomial([0.3 + 0.1j, 0, 1]), 6)]:
        S = find_periodic_points(f, n)
        assert S.complete
        assert sum(r.multiplicity for r in S) == S.expected
        for r in S:
            assert float(fs_distance(f.iterate(r.point, n), r.point)) < 1e-9
            assert n % r.period == 0
        # R_n is the union over divisors m of n of repulsive primitive m-cycles
        primitive_by_m = {}
        for m in range(1, n + 1):
            if n % m == 0:
                Sm = find_periodic_points(f, m)
                primitive_by_m[m] = sum(1 for r in Sm.repulsive if r.period == m)
        assert len(S.repulsive) == sum(primitive_by_m.values())
        dt = f.topological_degree
        assert len(S.repulsive) - len(S.repulsive_primitive) <= n * (f.dim + 1) * dt ** (n / 2)


def test_find_periodic_points_input_errors():
    with pytest.raises(DynamicsError):
        find_periodic_points(power_map(2), 0)
    with pytest.raises(DynamicsError):
        find_periodic_points(power_map(2), 15)


def test_preimages_map_back():
    f = ProjectiveEndomorphism.from_polynomial([0.2 - 0.5j, 0, 1])
    rng = np.random.default_rng(0)
    W = normalize_point(rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2)))
    pre = preimages(f, W)
    assert pre.shape == (50, 2, 2)
    assert np.max(fs_distance(f(pre), W[:, None, :])) < 1e-10


# -------------------------------------------------------- exterior norms
def test_exterior_norm_examples():
    assert exterior_norm(np.diag([3.0, 2.0, 1.0]), 2) == pytest.approx(6.0, rel=1e-14)
    M = np.array([[0, 2], [1, 0]], dtype=float)
    assert exterior_norm(M, 1) == pytest.approx(2.0, rel=1e-14)
    assert exterior_norm(M, 2) == pytest.approx(2.0, rel=1e-14)
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)) + 1j)
    for s in (1, 2, 3):
        assert exterior_norm(Q, s) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        exterior_norm(M, 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
def test_exterior_norm_properties(seed, k):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    assert exterior_norm(M, k) == pytest.approx(abs(np.linalg.det(M)), rel=1e-10)
    a = rng.uniform(0.1, 3, k) * np.exp(1j * rng.uniform(0, 6, k))
    b = rng.uniform(0.1, 3, k)
    for s in range(1, k + 1):
        # multiplicative on products of diagonal matrices sharing the ordering of moduli
        A, B = np.diag(np.sort(np.abs(a))), np.diag(np.sort(b))
        assert exterior_norm(A @ B, s) == pytest.approx(exterior_norm(A, s) * exterior_norm(B, s), rel=1e-12)
        assert exterior_norm(M, s) <= np.linalg.norm(M, 2) ** s * (1 + 1e-12)


# ----------------------------------------------------------------- phi_n
def test_phi_n_examples():
    f = power_map(2)
    for n in (1, 3, 5):
        for r in find_periodic_points(f, n).repulsive:
            assert phi_n(r, 1) == pytest.approx(LOG2, abs=1e-12)
    S = find_periodic_points(f, 2)
    zero = record_at(S, 0.0)
    assert not zero.repulsive and zero.moduli[0] == 0.0
    g = z2_minus_1()
    r = record_at(find_periodic_points(g, 1), GOLDEN)
    # |2p| = 1 + sqrt 5 at the golden fixed point
    assert phi_n(r, 1) == pytest.approx(math.log(1 + math.sqrt(5)), abs=1e-12)


# ------------------------------------------------------- cycle estimates
def test_cycle_estimate_examples():
    est = cycle_lyapunov_estimate(power_map(2), 5, 1)
    assert est.estimates[1] == pytest.approx(31 / 32 * LOG2, abs=1e-12)
    assert est.estimates[1] == pytest.approx(0.671486331, abs=1e-9)
    e4 = cycle_lyapunov_estimate(power_map(2), 4, 1)
    assert e4.card_Rn == 15 and e4.card_Rn_star == 12
    assert e4.estimates_primitive[1] == pytest.approx(0.5198604, abs=1e-7)
    assert e4.estimates_primitive[1] == pytest.approx(12 / 16 * LOG2, abs=1e-12)
    p3 = cycle_lyapunov_estimate(square_product(), 3, 2)
    assert p3.estimates[2] == pytest.approx(49 / 64 * 2 * LOG2, abs=1e-12)
    assert p3.complete and p3.bounds_ok


def test_cycle_estimate_rejects_mismatched_points():
    S = find_periodic_points(power_map(2), 3)
    with pytest.raises(DynamicsError):
        cycle_lyapunov_estimate(power_map(2), 4, points=S)


@pytest.mark.parametrize(
    "f,nmax",
    [(power_map(2), 8), (power_map(3), 5), (z2_minus_1(), 9), (square_product(), 3),
     (ProjectiveEndomorphism.from_polynomial([-0.12 + 0.75j, 0, 1]), 8)],
)
def test_phi_bounds_and_count_bound(f, nmax):
    for n in range(1, nmax + 1):
        est = cycle_lyapunov_estimate(f, n)
        assert est.bounds_ok
        for s, (lo, hi) in est.phi_range.items():
            assert 0 <= lo <= hi <= est.gamma + 1e-9
        assert est.card_Rn <= f.topological_degree ** n * (1 + 0.1)


def test_lower_bound_sanity_asymptotic():
    # the estimates approach their limits from below like (1 - d_t^{-n}); the
    # log sqrt(d) lower bound is checked once that factor is negligible
    for f, n in [(power_map(2), 10), (z2_minus_1(), 10), (power_map(3), 6), (square_product(), 5)]:
        est = cycle_lyapunov_estimate(f, n)
        for s, v in est.estimates.items():
            assert v >= s * math.log(math.sqrt(f.degree)) - 0.05


# ---------------------------------------------------------------- oracle
def test_oracle_power_map():
    for d in (2, 3):
        res = birkhoff_lyapunov_oracle(power_map(d), n_samples=1000, n_transient=20, n_average=10, seed=5)
        assert abs(res.value - math.log(d)) <= max(3 * res.stderr, 1e-9)
    res = birkhoff_lyapunov_oracle(square_product(), s=2, n_samples=500, n_transient=20, n_average=10, seed=2)
    assert res.value == pytest.approx(2 * LOG2, abs=1e-9)


def test_oracle_reproducible_and_validated():
    f = z2_minus_1()
    a = birkhoff_lyapunov_oracle(f, n_samples=300, n_transient=20, n_average=10, seed=11)
    b = birkhoff_lyapunov_oracle(f, n_samples=300, n_transient=20, n_average=10, seed=11)
    assert a.value == b.value and np.array_equal(a.values, b.values)
    c = birkhoff_lyapunov_oracle(f, n_samples=300, n_transient=20, n_average=10, seed=12)
    assert c.value != a.value
    with pytest.raises(ValueError):
        birkhoff_lyapunov_oracle(f, s=2)
    with pytest.raises(ValueError):
        birkhoff_lyapunov_oracle(f, n_samples=1)


# -------------------------------------------------------- inverse branches
def test_inverse_branch_binomial_series():
    f = power_map(2)
    rec = record_at(find_periodic_points(f, 1), 1.0)
    br = inverse_branch(f, rec)
    g = br.step_germs[0]
    # sqrt(1 + w) - 1 in the chart at 1, read in the adapted patch
    expected = [0.5, -0.125, 0.0625, -0.0390625, 0.02734375]
    for m, c in enumerate(expected, start=1):
        assert g.coeffs[(0, (m,))] == pytest.approx(c, abs=1e-12)
    y = br.radius * np.array([[0.7], [-0.5j], [0.3 + 0.3j]])
    pts, _ = br.pullback(y)
    assert np.allclose(pts[1], np.sqrt(1 + y) - 1, atol=1e-12)


def test_inverse_branch_three_cycle_lipschitz():
    f = power_map(2)
    S = find_periodic_points(f, 3)
    rec = next(r for r in S.repulsive if r.period == 3)
    for n in (1, 3, 6):
        br = inverse_branch(f, rec, n=n)
        L = br.lipschitz()
        assert 2.0 ** -n * 0.8 <= L <= 2.0 ** -n * 1.3


def test_inverse_branch_composes_to_identity():
    f = z2_minus_1()
    rec = record_at(find_periodic_points(f, 1), GOLDEN)
    br = inverse_branch(f, rec, n=5)
    rng = np.random.default_rng(4)
    y = br.radius * (rng.uniform(-0.7, 0.7, (30, 1)) + 1j * rng.uniform(-0.7, 0.7, (30, 1)))
    pts, _ = br.pullback(y)
    start = chart_point(br.charts[0], y)
    back = chart_point(br.charts[5], pts[5])
    assert np.max(fs_distance(f.iterate(back, 5), start)) < 1e-8


def test_inverse_branch_rejects_critical_orbit():
    f = power_map(2)
    rec = record_at(find_periodic_points(f, 1), 0.0)
    with pytest.raises(DynamicsError):
        inverse_branch(f, rec)


# ------------------------------------------------------------ verify_nt
def test_verify_nt_power_map():
    f = power_map(2)
    rep = verify_nt(f, record_at(find_periodic_points(f, 1), 1.0), n_max=20)
    assert rep.chi1 == pytest.approx(LOG2, abs=1e-12)
    assert rep.passed
    assert rep.L_fit == pytest.approx(1.0, abs=0.1)
    assert len(rep.rows()) == 20


def test_verify_nt_product_map():
    f = square_product()
    rep = verify_nt(f, record_at(find_periodic_points(f, 1), [1.0, 1.0]), n_max=12)
    assert rep.chi == pytest.approx((LOG2, LOG2), abs=1e-12)
    assert rep.passed
    ns = np.arange(1, 13)
    assert np.all(rep.deviation[2] <= rep.logT_fit[2] / ns + rep.eps + 1e-9)


def test_verify_nt_rejects_bad_eps_and_attracting():
    f = z2_minus_1()
    S = find_periodic_points(f, 1)
    with pytest.raises(DynamicsError):
        verify_nt(f, record_at(S, GOLDEN), eps=0.5)
    g = ProjectiveEndomorphism.from_polynomial([0, 0.5, 1])  # z^2 + z/2 attracts at 0
    with pytest.raises(DynamicsError):
        verify_nt(g, record_at(find_periodic_points(g, 1), 0.0))


# -------------------------------------------------------------- density
def test_density_power_map():
    f = power_map(2)
    for n in (3, 6, 9):
        rep = repelling_density_check(f, n, 0.1, LOG2)
        assert rep.fraction == 1.0
        assert rep.card_Rn == 2 ** n - 1
        assert rep.upper_bound_ok
    # the normalized (1 - eps)^3 bound holds once 1 - 2^-n >= 0.729
    assert repelling_density_check(f, 4, 0.1, LOG2).lower_bound_ok


def test_density_z2_minus_1_reports():
    f = z2_minus_1()
    rep = repelling_density_check(f, 8, 0.2, 0.6916)
    assert 0 < rep.fraction <= 1 and rep.card_Rn_eps <= rep.card_Rn
    assert rep.normalized == pytest.approx(rep.card_Rn_eps / 2 ** 8)
