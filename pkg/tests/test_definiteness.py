import mpmath
import numpy as np
import pytest

from fracindex import definiteness as D
from fracindex import spaces as S
from fracindex.configurations import antipodal_quadruple
from fracindex.definiteness import Configuration
from fracindex.errors import BudgetExhausted, InvalidConfiguration

PI = np.pi


def _quadruple_closed_form(H):
    # four antipodal points a quarter apart: 8 ordered pairs at pi/2 with c_i c_j = -1,
    # 4 ordered pairs at pi with c_i c_j = +1
    mpmath.mp.dps = 40
    H = mpmath.mpf(H)
    return float(-8 * (mpmath.pi / 2) ** (2 * H) + 4 * mpmath.pi ** (2 * H))


def _random_config(space, n, rng):
    pts = space.sample_points(n, rng)
    c = rng.standard_normal(n)
    c -= c.mean()
    return Configuration(pts, c)


SPACES = [S.Circle(), S.Sphere(2), S.Hyperbolic(2), S.Euclidean(2), S.Cylinder(), S.FlatTorus()]


def test_configuration_invariants():
    with pytest.raises(InvalidConfiguration):
        Configuration([[0.0], [1.0]], [1.0, -0.5])
    with pytest.raises(InvalidConfiguration):
        Configuration([[0.0], [1.0], [2.0]], [1.0, -1.0, 0.0])
    with pytest.raises(InvalidConfiguration):
        D.quadratic_form(S.Euclidean(1), Configuration([[0.0], [0.0]], [1, -1]), 0.5)


def test_quadruple_form_zero_at_half():
    q = antipodal_quadruple(S.Circle(), 0.0, PI / 2)
    assert abs(D.quadratic_form(S.Circle(), q, 0.5)) < 1e-12


def test_quadruple_form_at_06_matches_closed_form():
    oracle = _quadruple_closed_form(0.6)
    assert oracle == pytest.approx(4 * PI**1.2 * (1 - 2**-0.2), rel=1e-14)
    assert oracle == pytest.approx(2.045, abs=1e-3)
    q = antipodal_quadruple(S.Circle(), 0.0, PI / 2)
    assert D.quadratic_form(S.Circle(), q, 0.6) == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_two_point_form(space):
    rng = np.random.default_rng(2)
    p, q = space.sample_points(2, rng)
    for H in (0.25, 0.5, 0.9):
        form = D.quadratic_form(space, Configuration([p, q], [1, -1]), H)
        assert form == pytest.approx(-2 * space.distance(p, q) ** (2 * H), rel=1e-14)


def test_centered_gram_line():
    rep = D.centered_gram(S.Euclidean(1), [[0.0], [1.0], [2.0]], 0.5)
    assert rep.verdict == "no-violation"
    # 2 * (c1 c2 |0-1| + c1 c3 |0-2| + c2 c3 |1-2|) = 2 * (-2 + 2 - 2)
    form = D.quadratic_form(S.Euclidean(1), Configuration([[0.0], [1.0], [2.0]], [1, -2, 1]), 0.5)
    assert form == pytest.approx(-4.0, abs=1e-14)


def test_centered_gram_circle():
    pts = S.Circle().structured_points(50)
    assert D.centered_gram(S.Circle(), pts, 0.5).verdict == "no-violation"
    rep = D.centered_gram(S.Circle(), pts, 0.6)
    assert rep.verdict == "violation"
    assert rep.certified
    assert abs(rep.witness.sum()) < 1e-12
    A = rep.power_matrix
    assert rep.witness @ A @ rep.witness > 0
    assert np.allclose(A, A.T) and np.all(np.diag(A) == 0)


def test_centered_gram_needs_two_points():
    with pytest.raises(ValueError):
        D.centered_gram(S.Circle(), [[0.0]], 0.5)


def test_covariance_examples():
    sp = S.Sphere(2)
    north, eq = np.array([0, 0, 1.0]), np.array([1.0, 0, 0])
    cov = D.covariance_matrix(sp, north, [eq, north, [0, 1.0, 0]], 0.5)
    assert cov.entries[0, 0] == pytest.approx(PI / 2)
    np.testing.assert_array_equal(cov.entries[1], 0.0)
    np.testing.assert_array_equal(cov.entries[:, 1], 0.0)
    assert cov.psd


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_schoenberg_consistency(space):
    rng = np.random.default_rng(5)
    for _ in range(100):
        config = _random_config(space, 6, rng)
        origin = space.sample_points(1, rng)[0]
        H = rng.uniform(0.1, 1.0)
        C = D.covariance_entries(space, origin, config.points, H)
        c = config.coefficients
        form = D.quadratic_form(space, config, H)
        assert form == pytest.approx(-2 * c @ C @ c, rel=1e-9, abs=1e-12)


def test_circle_scaling_covariance():
    rng = np.random.default_rng(8)
    for _ in range(20):
        config = _random_config(S.Circle(), 7, rng)
        H, lam = rng.uniform(0.2, 1.0), rng.uniform(0.1, 10)
        f1 = D.quadratic_form(S.Circle(), config, H)
        f2 = D.quadratic_form(S.Circle(lam * 2 * PI), config, H)
        assert f2 == pytest.approx(lam ** (2 * H) * f1, rel=1e-10)
    pts = S.Circle().structured_points(40)
    for H in (0.4, 0.6):
        a = D.centered_gram(S.Circle(), pts, H)
        b = D.centered_gram(S.Circle(3.7), pts, H)
        assert a.verdict == b.verdict


def test_coefficient_scaling_and_permutation():
    rng = np.random.default_rng(9)
    sp = S.Hyperbolic(2)
    config = _random_config(sp, 8, rng)
    f = D.quadratic_form(sp, config, 0.4)
    scaled = Configuration(config.points, 3.5 * config.coefficients)
    assert D.quadratic_form(sp, scaled, 0.4) == pytest.approx(3.5**2 * f, rel=1e-12)
    perm = rng.permutation(8)
    shuffled = Configuration([config.points[k] for k in perm], config.coefficients[perm])
    assert D.quadratic_form(sp, shuffled, 0.4) == pytest.approx(f, rel=1e-12)
    s1 = D.centered_gram(sp, config.points, 0.4).spectrum
    s2 = D.centered_gram(sp, shuffled.points, 0.4).spectrum
    np.testing.assert_allclose(s1, s2, atol=1e-12 * np.abs(s1).max())


def test_quadruple_violation_monotone_in_H():
    q = antipodal_quadruple(S.Circle(), 0.3, PI / 2)
    grid = D.h_grid(0.3, 1.0, 0.05)
    forms = [D.quadratic_form(S.Circle(), q, H) for H in grid]
    positive = [H for H, f in zip(grid, forms) if f > 1e-12]
    assert positive == [H for H in grid if H > 0.5]
    for H, f in zip(grid, forms):
        assert f == pytest.approx(_quadruple_closed_form(H), rel=1e-9, abs=1e-12)


def test_nondegeneracy():
    rng = np.random.default_rng(1)
    sp = S.Hyperbolic(2)
    pts = sp.sample_points(5, rng)
    assert D.nondegeneracy_min_eigenvalue(sp, [0, 0], pts, 0.5) > 0
    # points at mutual hyperbolic distance >= 1
    sep = [np.array([np.tanh(1.0) * np.cos(t), np.tanh(1.0) * np.sin(t)])
           for t in np.linspace(0, 2 * PI, 6, endpoint=False)]
    assert min(sp.distance(a, b) for k, a in enumerate(sep) for b in sep[k + 1:]) >= 1
    assert D.nondegeneracy_min_eigenvalue(sp, [0, 0], sep, 0.5) > 1e-6
    x = np.array([0.3, -0.2])
    assert D.nondegeneracy_min_eigenvalue(sp, [0, 0], [x], 0.5) == pytest.approx(sp.distance([0, 0], x))
    with pytest.raises(ValueError):
        D.nondegeneracy_min_eigenvalue(sp, [0, 0], [x], 0.6)
    with pytest.raises(InvalidConfiguration):
        D.nondegeneracy_min_eigenvalue(sp, [0, 0], [[0.0, 0.0]], 0.5)


def test_stationary_kernel_circulant():
    q = np.exp(-2 * PI / 3)
    assert q == pytest.approx(0.1231, abs=1e-4)
    K, lam_min = D.stationary_kernel_matrix(S.Circle(), S.Circle().structured_points(3), 0.5, 1.0)
    np.testing.assert_allclose(np.linalg.eigvalsh(K), sorted([1 + 2 * q, 1 - q, 1 - q]), atol=1e-14)
    assert lam_min == pytest.approx(1 - q)
    K, lam_min = D.stationary_kernel_matrix(S.Circle(), [[0.0]], 0.5, 1.0)
    assert K.tolist() == [[1.0]] and lam_min == 1.0
    K, lam_min = D.stationary_kernel_matrix(S.Circle(), S.Circle().structured_points(5), 0.5, 0.0)
    assert np.all(K == 1.0) and lam_min == pytest.approx(0.0, abs=1e-14)


def test_stationary_kernel_psd_on_sphere():
    pts = S.Sphere(2).structured_points(60)
    for lam in (0.3, 1.0, 5.0):
        _, lam_min = D.stationary_kernel_matrix(S.Sphere(2), pts, 0.5, lam)
        assert lam_min > -1e-12


def test_index_circle():
    b = D.estimate_fractional_index(S.Circle(), H_start=0.3, H_stop=1.0, step=0.05, seed=0)
    assert (b.evidence_H, b.violation_H) == (0.5, 0.55)
    assert b.beta_bracket == pytest.approx((1.0, 1.1))
    assert b.witness["form"] > 0


def test_index_euclidean_no_violation():
    b = D.estimate_fractional_index(S.Euclidean(2), H_start=0.3, H_stop=1.0, step=0.05, seed=0)
    assert b.violation_H is None and b.evidence_H == 1.0


def test_index_cylinder_witness_at_half():
    sampler = D.PointSampler(n_points=12, structured=False, random_sets=1)
    b = D.estimate_fractional_index(S.Cylinder(), sampler, H_start=0.5, H_stop=0.5, step=0.05,
                                    budget=1, seed=0)
    assert b.violation_H == 0.5


def test_index_threads_agree():
    a = D.estimate_fractional_index(S.Circle(), H_start=0.3, H_stop=0.7, step=0.05, seed=4)
    b = D.estimate_fractional_index(S.Circle(), H_start=0.3, H_stop=0.7, step=0.05, seed=4, threads=3)
    assert (a.evidence_H, a.violation_H) == (b.evidence_H, b.violation_H)


def test_index_preconditions():
    with pytest.raises(ValueError):
        D.h_grid(0.3, 1.0, 1e-4)
    with pytest.raises(BudgetExhausted):
        D.estimate_fractional_index(S.Circle(), budget=0)


def test_index_inconclusive_cells():
    sp, H = S.Hyperbolic(2), 0.9
    pts = sp.structured_points(24)
    ratio = D.centered_gram(sp, pts, H).max_eigenvalue / D.centered_gram(sp, pts, H).tolerance
    assert ratio > D.CERTIFY_FACTOR
    # shrink the margin so the top eigenvalue clears the tolerance but not the certification bar
    tol_scale = D.DEFAULT_TOL_SCALE * ratio / 3
    cell = D._probe_cell(sp, H, D.PointSampler(24, True), 0, np.random.SeedSequence(0), tol_scale)
    assert cell["status"] == "boundary-inconclusive" and cell["witness"] is None
    cell = D._probe_cell(sp, 0.3, D.PointSampler(24, True), 0, np.random.SeedSequence(0), 1e-9)
    assert cell["status"] == "no-violation"
