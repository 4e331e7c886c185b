"""Acceptance suite: each test exercises one criterion at its stated tolerance and time budget."""
import mpmath
import numpy as np

from fracindex import configurations as C
from fracindex import definiteness as D
from fracindex import discrete_geodesics as dg
from fracindex import sampler as smp
from fracindex import spaces as S

PI = np.pi


def test_01_circle_quadruple_half(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        q = C.antipodal_quadruple(S.Circle(), rng.uniform(0, 2 * PI), rng.uniform(1e-3, PI - 1e-3))
        worst = max(worst, abs(D.quadratic_form(S.Circle(), q, 0.5)))
    acceptance.check(1, "circle quadruple H=1/2 vanishes", worst <= 1e-12, limit=1.0, max_abs_form=f"{worst:.2e}")


def test_02_circle_quadruple_06(acceptance):
    mpmath.mp.dps = 40
    oracle = float(4 * mpmath.pi ** mpmath.mpf("1.2") * (1 - mpmath.mpf(2) ** mpmath.mpf("-0.2")))
    form = D.quadratic_form(S.Circle(), C.antipodal_quadruple(S.Circle(), 0.0, PI / 2), 0.6)
    rel = abs(form - oracle) / oracle
    acceptance.check(2, "circle quadruple H=0.6 closed form", rel <= 1e-10 and abs(oracle - 2.045) < 1e-3,
                     limit=1.0, form=f"{form:.15g}", oracle=f"{oracle:.15g}", rel_err=f"{rel:.1e}")


def test_03_sphere_no_violation(acceptance):
    pts = S.fibonacci_sphere(200)
    rep = D.centered_gram(S.Sphere(2), pts, 0.5)
    ok = rep.max_eigenvalue <= rep.tolerance and rep.verdict == "no-violation"
    acceptance.check(3, "sphere H=1/2 centred Gram", ok, limit=5.0,
                     max_eig=f"{rep.max_eigenvalue:.2e}", tol=f"{rep.tolerance:.2e}")


def _cylinder_pair_sum(points, coeffs, H):
    total = 0.0
    for (t1, z1), a in zip(points, coeffs):
        for (t2, z2), b in zip(points, coeffs):
            arc = abs(t1 - t2) % (2 * PI)
            arc = min(arc, 2 * PI - arc)
            total += a * b * (arc * arc + (z1 - z2) ** 2) ** H
    return total


def test_04_cylinder_witness(acceptance):
    cert = C.witness_pipeline(S.Cylinder(2 * PI), 0.5, eps_schedule=(1e-2, 1e-3))
    f2, f3 = cert.forms
    cfg = cert.configurations[0]
    oracle = _cylinder_pair_sum(cfg.points, cfg.coefficients, 0.5)
    slope = f3 / 1e-3
    ok = (len(cfg) == 5 and f2 > 0 and abs(f2 - oracle) <= 0.05 * abs(oracle)
          and abs(slope - 0.5) <= 0.05 * 0.5)
    acceptance.check(4, "cylinder perturbation witness", ok, limit=1.0,
                     form_1e2=f"{f2:.6g}", oracle=f"{oracle:.6g}", slope_1e3=f"{slope:.5f}")


def test_05_condition_g(acceptance):
    cyl = C.check_condition_g(S.Cylinder(), D.Configuration([[0.0, 0.0], [PI, 0.0]], [1, -1]))
    sph = C.check_condition_g(S.Sphere(2), D.Configuration([[0, 0, 1.0], [0, 0, -1.0]], [1, -1]))
    ok = cyl.span_dims == [1, 1] and not cyl.passed and sph.span_dims == [2, 2] and sph.passed
    acceptance.check(5, "condition (G) cylinder fails, sphere holds", ok, limit=1.0,
                     cylinder=cyl.span_dims, sphere=sph.span_dims)


def test_06_hyperbolic_nondegeneracy(acceptance):
    sp = S.Hyperbolic(2)
    origin = np.zeros(2)
    worst = np.inf
    for seed in range(20):
        pts = sp.sample_points(20, np.random.default_rng(seed))
        lam = D.nondegeneracy_min_eigenvalue(sp, origin, pts, 0.5)
        trace = np.trace(D.covariance_entries(sp, origin, pts, 0.5))
        worst = min(worst, lam / trace)
    acceptance.check(6, "hyperbolic covariance nondegenerate", worst > 1e-12, limit=5.0,
                     min_eig_over_trace=f"{worst:.3e}")


def test_07_immersion_isometry(acceptance):
    rng = np.random.default_rng(7)
    h2, h3 = S.Hyperbolic(2), S.Hyperbolic(3)
    worst = 0.0
    for _ in range(100):
        p, q = h2.sample_points(2, rng)
        worst = max(worst, abs(h2.distance(p, q) - h3.distance(S.embed_hyperbolic(p), S.embed_hyperbolic(q))))
    acceptance.check(7, "H2 -> H3 embedding isometric", worst <= 1e-12, limit=1.0, max_err=f"{worst:.1e}")


def test_08_index_brackets(acceptance):
    circ = D.estimate_fractional_index(S.Circle(), step=0.05, seed=0)
    eucl = D.estimate_fractional_index(S.Euclidean(2), step=0.05, seed=0)
    lo, hi = circ.beta_bracket
    ok = (abs(lo - 1.0) < 1e-9 and abs(hi - 1.1) < 1e-9
          and eucl.violation_H is None and eucl.evidence_H == 1.0)
    acceptance.check(8, "index brackets circle and plane", ok, limit=60.0,
                     circle=f"[{lo:g}, {hi:g}]", plane_violation=eucl.violation_H)


def test_09_discrete_geodesics(acceptance):
    flat = dg.build_graph(dg.flat_chart(0.0, 1.0), 64, 9, 3)
    d_flat, _ = dg.graph_distance(flat, flat.vertex(0.0, 0.5), flat.vertex(PI, 0.5))

    warped = dg.build_graph(dg.warped_chart(S.Warp.quadratic(1.0)), 64, 33, 3)
    d_w, path_w = dg.graph_distance(warped, warped.vertex(0.0, 0.0), warped.vertex(PI, 0.0))
    dev_w = dg.path_deviation(warped.params(path_w), 0.0)

    hyp = dg.build_graph(dg.hyperboloid_chart(-1.0, 1.0), 64, 33, 3)
    d_h, path_h = dg.graph_distance(hyp, hyp.vertex(0.0, 0.0), hyp.vertex(PI, 0.0))
    dev_h = dg.path_deviation(hyp.params(path_h), 0.0)

    ok = (abs(d_flat - PI) <= 0.01 * PI and abs(d_w - PI) <= 0.01 * PI and dev_w <= warped.dz
          and abs(d_h - PI) <= 0.015 * PI and dev_h <= hyp.dz)
    acceptance.check(9, "graph geodesics flat, warped, hyperboloid", ok, limit=30.0,
                     flat=f"{d_flat:.5f}", warped=f"{d_w:.5f}", hyperboloid=f"{d_h:.5f}",
                     deviations=f"{dev_w:g},{dev_h:g}")


def test_10_torus_witness(acceptance):
    cert = C.witness_pipeline(S.FlatTorus(), 0.5)
    k = cert.eps_values.index(cert.certified_eps) if cert.certified else 0
    ok = cert.certified and cert.forms[k] > 0
    acceptance.check(10, "flat torus witness", ok, limit=1.0,
                     eps=cert.certified_eps, form=f"{cert.forms[k]:.4g}")


def test_11_sampler(acceptance):
    north = np.array([0.0, 0.0, 1.0])
    others = S.fibonacci_sphere(5)
    pts = [north, *others]
    a = smp.sample_fbm(S.Sphere(2), north, pts, 0.5, 20000, seed=11)
    b = smp.sample_fbm(S.Sphere(2), north, pts, 0.5, 20000, seed=11)
    pairs = [(i, j) for i in range(1, 6) for j in range(i + 1, 6)]
    rows = smp.variogram_check(a, pairs)
    worst = max(abs(r.z) for r in rows)
    ok = (len(rows) == 10 and worst < 4 and np.all(a.values[:, 0] == 0.0)
          and a.values.tobytes() == b.values.tobytes())
    acceptance.check(11, "sphere fBm variograms and reproducibility", ok, limit=30.0,
                     pairs=len(rows), max_abs_z=f"{worst:.2f}")


def _fit_and_validate(space, p_i, p_n, v):
    out = S.first_variation_probe(space, p_i, p_n, v, [1e-2, 1e-3, 1e-4])
    q = [(lhs - rhs) / e for (lhs, rhs), e in zip(out, [1e-2, 1e-3, 1e-4])]
    # (lhs - rhs)/eps = kappa + beta*eps; bound it on (0, 1e-2] from the two fitted points
    beta = (q[0] - q[1]) / (1e-2 - 1e-3)
    kappa = q[1] - beta * 1e-3
    K = abs(kappa) + abs(beta) * 1e-2
    resid = abs(out[2][0] - out[2][1])
    return resid <= K * 1e-4 + 1e-10, K, resid


def test_12_first_variation(acceptance):
    rng = np.random.default_rng(12)
    results = []
    for space in (S.Sphere(2), S.Hyperbolic(2)):
        for _ in range(5):
            p_i, p_n = space.sample_points(2, rng)
            raw = rng.standard_normal(p_n.shape)
            if isinstance(space, S.Sphere):
                raw -= raw.dot(p_n) * p_n
            v = raw / np.sqrt(space.inner(p_n, raw, raw))
            results.append(_fit_and_validate(space, p_i, p_n, v))
    ok = all(r[0] for r in results)
    worst = max(r[2] / (r[1] * 1e-4 + 1e-10) for r in results)
    acceptance.check(12, "first variation O(eps) on sphere and H2", ok, limit=1.0,
                     cases=len(results), worst_ratio=f"{worst:.3f}")
