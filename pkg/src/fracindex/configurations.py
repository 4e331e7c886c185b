"""Critical configurations, condition (G) and perturbation witnesses of nonexistence."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import definiteness, spaces
from .definiteness import CERTIFY_FACTOR, Configuration
from .errors import (AnalyticUnavailable, BudgetExhausted, DegenerateOffset,
                     DirectionNotPerpendicular, GNotFailing, NoCircleFactor,
                     NoPositivityFound, NotCritical, WaistNotMinimal)
from .spaces import TWO_PI, Space, TangentVector

log = logging.getLogger(__name__)

CRITICAL_RTOL = 1e-8
DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4)


def _circle_point(space: Space, angle: float, factor: int | None) -> np.ndarray:
    if isinstance(space, spaces._FlatProduct):
        k = space._circle_index(factor)
        x = np.zeros(space.dim)
        x[k] = angle
        return space.point(x)
    if isinstance(space, spaces.WarpedCircleProduct):
        return space.point([angle, space.warp.z0])
    if isinstance(space, spaces.Sphere):
        x = np.zeros(space.dimension + 1)
        x[0], x[1] = np.cos(angle), np.sin(angle)
        return x
    raise NoCircleFactor(f"{space.kind} has no minimal closed geodesic to place points on")


def antipodal_quadruple(space: Space, base_angle: float = 0.0, offset: float = np.pi / 2,
                        factor: int | None = None) -> Configuration:
    """Two antipodal pairs on the designated circle, coefficients (1, -1, 1, -1).

    The circle is the waist ``z = 0`` (``z0`` for warped products), the chosen
    factor of a torus, or the equator of a sphere.
    """
    if not 1e-12 < offset < np.pi - 1e-12:
        raise DegenerateOffset(f"offset must lie strictly between 0 and pi, got {offset}")
    angles = [base_angle, base_angle + offset, base_angle + np.pi, base_angle + np.pi + offset]
    pts = [_circle_point(space, a, factor) for a in angles]
    return Configuration(pts, [1.0, -1.0, 1.0, -1.0])


def _waist_configuration(space: Space, config: Configuration) -> bool:
    return (isinstance(space, spaces.WarpedCircleProduct)
            and all(space.on_waist(p) for p in config.points))


def _span_vectors(space: Space, config: Configuration, i: int) -> list[np.ndarray]:
    p = config.points[i]
    if _waist_configuration(space, config):
        # the waist is a minimal closed geodesic: every minimal direction is tangent to it
        return [np.array([1.0 / np.sqrt(space.warp.minimum), 0.0])]
    others = [q for j, q in enumerate(config.points) if j != i]
    return [v for q in others for v in space.minimal_directions(space.point(p), space.point(q))]


def _rank(vectors: Sequence[np.ndarray]) -> int:
    s = np.linalg.svd(np.vstack(vectors), compute_uv=False)
    return int(np.sum(s > spaces.RANK_RTOL * s[0]))


@dataclass
class ConditionGReport:
    span_dims: list[int]
    dim: int

    @property
    def passed(self) -> bool:
        return all(s == self.dim for s in self.span_dims)

    @property
    def failing(self) -> list[int]:
        return [i for i, s in enumerate(self.span_dims) if s < self.dim]


def check_condition_g(space: Space, config: Configuration) -> ConditionGReport:
    """Span dimension of the shortest directions from each point to the others."""
    if isinstance(space, spaces.WarpedCircleProduct) and not _waist_configuration(space, config):
        raise AnalyticUnavailable("condition (G) on warped products is only known on the waist")
    dims = [_rank(_span_vectors(space, config, i)) for i in range(len(config))]
    return ConditionGReport(dims, space.dim)


def criticality_tolerance(space: Space, config: Configuration, H: float) -> float:
    pts = config.points
    dmax = max(space.distance_bounds(space.point(p), space.point(q))[1]
               for k, p in enumerate(pts) for q in pts[k + 1:])
    return CRITICAL_RTOL * len(pts) * dmax ** (2 * H)


def form_interval(space: Space, config: Configuration, H: float) -> tuple[float, float]:
    if isinstance(space, spaces.WarpedCircleProduct):
        return definiteness.quadratic_form_bounds(space, config, H)
    f = definiteness.quadratic_form(space, config, H)
    return f, f


@dataclass
class WitnessCertificate:
    space: dict
    H: float
    base: Configuration
    base_form: float
    index: int
    direction: np.ndarray
    span_dims: list[int] | None
    eps_values: list[float]
    configurations: list[Configuration]
    forms: list[float]
    tolerance: float
    expected_slope: float
    certified_eps: float | None = None
    form_upper: list[float] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.certified_eps is not None

    @property
    def slope_estimates(self) -> list[float]:
        return [f / e ** (2 * self.H) for f, e in zip(self.forms, self.eps_values)]

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "H": self.H,
            "base_config": dict(self.base.to_json(), form=self.base_form),
            "index": self.index,
            "span_dims": self.span_dims,
            "direction": np.asarray(self.direction).tolist(),
            "eps_values": list(self.eps_values),
            "forms": list(self.forms),
            "tolerance": self.tolerance,
            "certified": self.certified,
            "certified_eps": self.certified_eps,
            "slope_estimates": self.slope_estimates,
            "expected_slope": self.expected_slope,
        }


def perturb_witness(space: Space, config: Configuration, i: int, direction, H: float,
                    eps_schedule: Sequence[float] = DEFAULT_EPS) -> WitnessCertificate:
    """Split ``c_i`` between ``P_i`` and a point pushed ``eps`` off ``P_i``.

    The new point moves along a geodesic perpendicular to every minimal direction
    from ``P_i`` to the others, so each distance to it changes only at second
    order while the new self-pair contributes ``c_i^2/2 eps^{2H}``.
    """
    if not 0.0 < H < 1.0:
        raise ValueError("perturbation witnesses need H in (0, 1)")
    n = len(config)
    if not 0 <= i < n:
        raise IndexError(i)
    p_i = space.point(config.points[i])
    v = direction.components if isinstance(direction, TangentVector) else np.asarray(direction, float)
    norm = np.sqrt(space.inner(p_i, v, v))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"direction must be unit norm, got {norm}")
    for s in _span_vectors(space, config, i):
        if abs(space.inner(p_i, v, s)) > 1e-8:
            raise DirectionNotPerpendicular("direction has a component along a shortest direction")

    tol = criticality_tolerance(space, config, H)
    lo, hi = form_interval(space, config, H)
    if lo > tol or hi < -tol:
        raise NotCritical(f"form {lo:.3e}..{hi:.3e} exceeds criticality tolerance {tol:.3e}")
    base_form = 0.5 * (lo + hi)

    c = config.coefficients
    half = c[i] / 2.0
    coeffs = np.append(c, half)
    coeffs[i] = half
    cert = WitnessCertificate(space.to_json(), H, config, base_form, i, v, None, [], [], [],
                              tol, c[i] ** 2 / 2.0)
    for eps in eps_schedule:
        moved = space.exp(p_i, eps * v)
        perturbed = Configuration([*config.points, moved], coeffs)
        f_lo, f_hi = form_interval(space, perturbed, H)
        cert.eps_values.append(float(eps))
        cert.configurations.append(perturbed)
        cert.forms.append(f_lo)
        cert.form_upper.append(f_hi)
        if cert.certified_eps is None and f_lo > CERTIFY_FACTOR * tol:
            cert.certified_eps = float(eps)
        log.debug("eps=%g form=%.6e", eps, f_lo)
    if not cert.certified:
        raise NoPositivityFound(f"no form above {CERTIFY_FACTOR * tol:.3e} on the schedule")
    return cert


# -- search ---------------------------------------------------------------------

@dataclass
class CriticalSearch:
    configuration: Configuration | None
    form: float
    scale: float
    critical: bool
    starts: int


def _best_zero_sum(A: np.ndarray) -> tuple[float, np.ndarray]:
    Q = definiteness.zero_sum_basis(len(A))
    w, V = np.linalg.eigh(Q.T @ A @ Q)
    c = Q @ V[:, -1]
    return float(w[-1]), c


def _move(space: Space, p: np.ndarray, k: int, t: float) -> np.ndarray | None:
    x = p.copy()
    x[k] += t
    if isinstance(space, spaces.Sphere):
        return x / np.linalg.norm(x)
    if isinstance(space, spaces.Hyperbolic) and np.dot(x, x) >= 0.98:
        return None
    return space.point(x)


def search_critical(space: Space, n: int, H: float, budget: int = 8, seed: int = 0,
                    separation: float = 0.05, max_sweeps: int = 300) -> CriticalSearch:
    """Multistart search for configurations whose best form is as close to zero as possible.

    For fixed points the zero-sum unit vector maximising the form is the top
    eigenvector of the power matrix compressed to the zero-sum hyperplane. Points
    then move by coordinate-wise quadratic probes on that top eigenvalue, divided
    by ``max d^{2H}`` to make it scale free. Point sets whose closest pair is
    nearer than ``separation * diameter`` are rejected, otherwise clustering two
    points makes every form look relatively small.
    """
    if n < 3:
        raise ValueError("critical configurations need at least 3 points")
    if budget < 1:
        raise BudgetExhausted("no starts allowed")
    definiteness._check_H(H)

    def objective(pts):
        D = spaces.distance_matrix(space, pts)
        off = D[~np.eye(n, dtype=bool)]
        if off.min() < separation * off.max():
            return -np.inf
        A = D ** (2 * H)
        return _best_zero_sum(A)[0] / A.max()

    best = None
    for seq in np.random.SeedSequence(seed).spawn(budget):
        rng = np.random.default_rng(seq)
        pts = space.sample_points(n, rng)
        val = objective(pts)
        for _ in range(50):
            if np.isfinite(val):
                break
            pts = space.sample_points(n, rng)
            val = objective(pts)
        h = 0.25
        for _ in range(max_sweeps):
            improved = False
            for a in range(n):
                for k in range(len(pts[a])):
                    trial = {}
                    for t in (-h, h):
                        q = _move(space, pts[a], k, t)
                        if q is not None:
                            trial[t] = (objective([*pts[:a], q, *pts[a + 1:]]), q)
                    if len(trial) == 2:
                        fm, f0, fp = trial[-h][0], val, trial[h][0]
                        curv = fp - 2 * f0 + fm
                        if np.isfinite(curv) and curv < 0:
                            t = float(np.clip(0.5 * h * (fm - fp) / curv, -2 * h, 2 * h))
                            q = _move(space, pts[a], k, t)
                            if q is not None:
                                trial[t] = (objective([*pts[:a], q, *pts[a + 1:]]), q)
                    t_best = max(trial, key=lambda t: trial[t][0], default=None)
                    if t_best is not None and trial[t_best][0] > val:
                        val, pts[a] = trial[t_best][0], trial[t_best][1]
                        improved = True
            if not improved:
                h *= 0.5
                if h < 1e-13:
                    break
        if best is None or val > best[0]:
            best = (val, pts)

    val, pts = best
    if not np.isfinite(val):
        raise BudgetExhausted("no admissible point set found")
    A = definiteness.power_matrix(space, pts, H)
    form, c = _best_zero_sum(A)
    scale = n * float(A.max())
    critical = abs(form) < CRITICAL_RTOL * scale
    c = c - c.mean()
    config = None
    if np.all(np.abs(c) > 1e-14):
        config = Configuration(pts, c)
    return CriticalSearch(config, form, scale, critical, budget)


# -- pipelines -------------------------------------------------------------------

def _complement_direction(space: Space, p: np.ndarray) -> np.ndarray:
    if isinstance(space, spaces.Cylinder) or isinstance(space, spaces.WarpedCircleProduct):
        return np.array([0.0, 1.0])
    if isinstance(space, spaces.FlatTorus):
        if space.dim < 2:
            raise GNotFailing("a one-factor torus is a circle")
        v = np.zeros(space.dim)
        v[1] = TWO_PI / space.lengths[1]
        return v
    raise GNotFailing(f"no complementary factor on {space.kind}")


def verify_waist_minimality(space: spaces.WarpedCircleProduct, n_theta: int = 64,
                            n_z: int = 33, half_height: float = 1.0) -> float:
    """Shortest-path check that the waist carries the minimal geodesics; returns the deviation."""
    from . import discrete_geodesics as dg

    z0 = space.warp.z0
    chart = dg.warped_chart(space.warp, z0 - half_height, z0 + half_height)
    graph = dg.build_graph(chart, n_theta, n_z, 3)
    u = graph.vertex(0.0, z0)
    v = graph.vertex(np.pi, z0)
    length, path = dg.graph_distance(graph, u, v)
    dev = dg.path_deviation(graph.params(path), z0)
    if dev > graph.dz + 1e-12 or abs(length - np.pi * np.sqrt(space.warp.minimum)) > 0.01 * length:
        raise WaistNotMinimal(f"waist path deviates by {dev:.3g}")
    return dev


def witness_pipeline(space: Space, H: float = 0.5,
                     eps_schedule: Sequence[float] = DEFAULT_EPS) -> WitnessCertificate:
    """Antipodal quadruple on a minimal closed geodesic, condition (G), then perturbation."""
    if H != 0.5:
        raise ValueError("the circle witness is specific to H = 1/2")
    if isinstance(space, spaces.WarpedCircleProduct):
        verify_waist_minimality(space)
    config = antipodal_quadruple(space)
    report = check_condition_g(space, config)
    if report.passed:
        raise GNotFailing(f"condition (G) holds with spans {report.span_dims}")
    i = report.failing[-1]
    direction = _complement_direction(space, config.points[i])
    cert = perturb_witness(space, config, i, direction, H, eps_schedule)
    cert.span_dims = report.span_dims
    return cert


def circle_witness(space: Space, H: float) -> dict | None:
    """Certified positive configuration built on a minimal closed geodesic, if any."""
    try:
        config = antipodal_quadruple(space)
    except NoCircleFactor:
        return None
    if H > 0.5:
        lo, _ = form_interval(space, config, H)
        if lo > CERTIFY_FACTOR * criticality_tolerance(space, config, H):
            return dict(config.to_json(), form=lo)
        return None
    if H == 0.5:
        try:
            cert = witness_pipeline(space, H)
        except (GNotFailing, NoPositivityFound):
            return None
        k = cert.eps_values.index(cert.certified_eps)
        return dict(cert.configurations[k].to_json(), form=cert.forms[k])
    return None
