"""Model metric spaces: distances, exponential maps and minimal-geodesic directions.

Points are plain float arrays in the chart of their space:

* flat products (``Circle``, ``Cylinder``, ``FlatTorus``, ``Euclidean``): one
  coordinate per factor, angles wrapped into ``[0, 2*pi)``;
* ``Sphere``: a unit vector of the ambient ``R^(d+1)``, the radius is applied
  by the space;
* ``Hyperbolic``: a vector of the Poincare ball, norm strictly below one;
* ``WarpedCircleProduct``: ``(theta, z)``.

Tangent vectors use the same chart (ambient vectors for the sphere).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, interpolate, linalg

from .errors import AnalyticUnavailable, CoincidentPoints, NoCircleFactor, OutOfChart

TWO_PI = 2.0 * np.pi

# relative distance to the cut value that switches to the "every direction" branch
ANTIPODE_RTOL = 1e-9
# relative numeric-rank cut for spans of direction sets
RANK_RTOL = 1e-8


def wrap_angle(theta):
    t = np.remainder(theta, TWO_PI)
    return np.where(t >= TWO_PI, 0.0, t)


def angle_diff(a, b):
    """Signed shortest rotation from ``a`` to ``b``, in ``(-pi, pi]``."""
    d = np.remainder(np.asarray(b, dtype=float) - a, TWO_PI)
    return np.where(d > np.pi, d - TWO_PI, d)


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    components: np.ndarray
    norm: float


class Space:
    """Common interface of the model spaces."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def point(self, coords) -> np.ndarray:
        raise NotImplementedError

    def distance(self, p, q) -> float:
        raise NotImplementedError

    def distance_bounds(self, p, q) -> tuple[float, float]:
        d = self.distance(p, q)
        return d, d

    def inner(self, p, u, v) -> float:
        raise NotImplementedError

    def exp(self, p, v) -> np.ndarray:
        raise NotImplementedError

    def minimal_directions(self, p, q) -> list[np.ndarray]:
        raise NotImplementedError

    def antipode(self, p, factor: int | None = None) -> np.ndarray:
        raise NoCircleFactor(f"{self.kind} has no designated circle factor")

    def sample_points(self, n: int, rng: np.random.Generator) -> list[np.ndarray]:
        raise NotImplementedError

    def structured_points(self, n: int) -> list[np.ndarray]:
        return self.sample_points(n, np.random.default_rng(0))

    def to_json(self) -> dict:
        raise NotImplementedError


def _as_vector(coords, size: int, name: str) -> np.ndarray:
    x = np.atleast_1d(np.asarray(coords, dtype=float)).reshape(-1)
    if x.shape != (size,):
        raise OutOfChart(f"{name} point needs {size} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise OutOfChart(f"non-finite coordinates {x}")
    return x


class _FlatProduct(Space):
    """Product of circles and lines with the product (flat) metric."""

    @property
    def factors(self) -> tuple[float | None, ...]:
        # circumference of each circle factor, None for a line factor
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def _circle_mask(self) -> np.ndarray:
        return np.array([f is not None for f in self.factors])

    @property
    def _scales(self) -> np.ndarray:
        return np.array([1.0 if f is None else f / TWO_PI for f in self.factors])

    def point(self, coords) -> np.ndarray:
        x = _as_vector(coords, self.dim, self.kind)
        mask = self._circle_mask
        x[mask] = wrap_angle(x[mask])
        return x

    def _displacement(self, p, q) -> np.ndarray:
        mask = self._circle_mask
        delta = np.asarray(q, dtype=float) - p
        delta[mask] = angle_diff(p[mask], q[mask])
        return delta

    def distance(self, p, q) -> float:
        mask = self._circle_mask
        delta = np.abs(np.asarray(q, dtype=float) - p)
        # built from |q - p| only, so exactly symmetric in p and q
        wrapped = np.remainder(delta[mask], TWO_PI)
        delta[mask] = np.minimum(wrapped, TWO_PI - wrapped)
        return float(np.linalg.norm(self._scales * delta))

    def inner(self, p, u, v) -> float:
        return float(np.sum(self._scales**2 * np.asarray(u) * np.asarray(v)))

    def exp(self, p, v) -> np.ndarray:
        return self.point(np.asarray(p, dtype=float) + v)

    def minimal_directions(self, p, q) -> list[np.ndarray]:
        delta = self._displacement(p, q)
        dist = float(np.linalg.norm(self._scales * delta))
        if dist == 0.0:
            raise CoincidentPoints("minimal directions need distinct points")
        # each antipodal circle factor doubles the set of minimal lifts
        choices = []
        for k, f in enumerate(self.factors):
            if f is not None and abs(delta[k]) >= np.pi * (1.0 - ANTIPODE_RTOL):
                choices.append((np.pi, -np.pi))
            else:
                choices.append((delta[k],))
        return [np.array(c) / dist for c in itertools.product(*choices)]

    def _circle_index(self, factor: int | None) -> int:
        circles = [k for k, f in enumerate(self.factors) if f is not None]
        if not circles:
            raise NoCircleFactor(f"{self.kind} has no circle factor")
        if factor is None:
            return circles[0]
        if factor not in circles:
            raise NoCircleFactor(f"factor {factor} of {self.kind} is not a circle")
        return factor

    def antipode(self, p, factor: int | None = None) -> np.ndarray:
        k = self._circle_index(factor)
        q = np.array(p, dtype=float)
        q[k] = q[k] + np.pi
        return self.point(q)

    def sample_points(self, n, rng):
        out = []
        for _ in range(n):
            x = np.array([rng.uniform(0.0, TWO_PI) if f is not None else rng.uniform(-1.0, 1.0)
                          for f in self.factors])
            out.append(self.point(x))
        return out


@dataclass(frozen=True)
class Circle(_FlatProduct):
    L: float = TWO_PI
    kind = "circle"

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("circumference must be positive")

    @property
    def factors(self):
        return (self.L,)

    def structured_points(self, n):
        return [self.point(TWO_PI * k / n) for k in range(n)]

    def to_json(self):
        return {"space": "circle", "L": self.L}


@dataclass(frozen=True)
class Cylinder(_FlatProduct):
    L: float = TWO_PI
    kind = "cylinder"

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("circumference must be positive")

    @property
    def factors(self):
        return (self.L, None)

    def to_json(self):
        return {"space": "cylinder", "L": self.L}


@dataclass(frozen=True)
class FlatTorus(_FlatProduct):
    lengths: tuple[float, ...] = (TWO_PI, TWO_PI)
    kind = "flat_torus"

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        if not self.lengths or min(self.lengths) <= 0:
            raise ValueError("torus needs positive circumferences")

    @property
    def factors(self):
        return self.lengths

    def to_json(self):
        return {"space": "flat_torus", "lengths": list(self.lengths)}


@dataclass(frozen=True)
class Euclidean(_FlatProduct):
    dimension: int = 2
    kind = "euclidean"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def factors(self):
        return (None,) * self.dimension

    def sample_points(self, n, rng):
        return [self.point(x) for x in rng.standard_normal((n, self.dimension))]

    def to_json(self):
        return {"space": "euclidean", "dim": self.dimension}


@dataclass(frozen=True)
class Sphere(Space):
    dimension: int = 2
    radius: float = 1.0
    kind = "sphere"

    def __post_init__(self):
        if self.dimension < 1 or not self.radius > 0:
            raise ValueError("sphere needs dimension >= 1 and positive radius")

    @property
    def dim(self):
        return self.dimension

    def point(self, coords):
        x = _as_vector(coords, self.dimension + 1, "sphere")
        if abs(np.linalg.norm(x) - 1.0) > 1e-12:
            raise OutOfChart(f"sphere coordinates must have unit norm, got {np.linalg.norm(x)}")
        return x

    def distance(self, p, q):
        # same value as r*arccos(<p,q>) but accurate at 0 and pi
        return float(self.radius * 2.0 * np.arctan2(np.linalg.norm(p - q), np.linalg.norm(p + q)))

    def inner(self, p, u, v):
        return float(np.dot(u, v))

    def exp(self, p, v):
        v = np.asarray(v, dtype=float)
        speed = np.linalg.norm(v)
        if speed == 0.0:
            return np.array(p, dtype=float)
        angle = speed / self.radius
        x = np.cos(angle) * p + np.sin(angle) * v / speed
        return x / np.linalg.norm(x)

    def _tangent_basis(self, p):
        return linalg.null_space(np.asarray(p, dtype=float)[None, :]).T

    def minimal_directions(self, p, q):
        d = self.distance(p, q)
        if d == 0.0:
            raise CoincidentPoints("minimal directions need distinct points")
        if d >= np.pi * self.radius * (1.0 - ANTIPODE_RTOL):
            return list(self._tangent_basis(p))
        w = q - np.dot(p, q) * p
        return [w / np.linalg.norm(w)]

    def antipode(self, p, factor=None):
        # every great circle through p is a minimal closed geodesic ending at -p
        return -np.asarray(p, dtype=float)

    def sample_points(self, n, rng):
        x = rng.standard_normal((n, self.dimension + 1))
        return [r / np.linalg.norm(r) for r in x]

    def structured_points(self, n):
        if self.dimension != 2:
            return super().structured_points(n)
        return list(fibonacci_sphere(n))

    def to_json(self):
        return {"space": "sphere", "dim": self.dimension, "radius": self.radius}


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform points on the unit 2-sphere (golden-angle spiral)."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z**2)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _mobius_add(x, y):
    xy, xx, yy = np.dot(x, y), np.dot(x, x), np.dot(y, y)
    num = (1.0 + 2.0 * xy + yy) * x + (1.0 - xx) * y
    return num / (1.0 + 2.0 * xy + xx * yy)


@dataclass(frozen=True)
class Hyperbolic(Space):
    """Poincare ball model of curvature -1."""

    dimension: int = 2
    kind = "hyperbolic"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def dim(self):
        return self.dimension

    def point(self, coords):
        x = _as_vector(coords, self.dimension, "hyperbolic")
        if not np.dot(x, x) < 1.0:
            raise OutOfChart(f"hyperbolic coordinates must lie in the open unit ball, got {x}")
        return x

    @staticmethod
    def conformal_factor(p) -> float:
        return 2.0 / (1.0 - float(np.dot(p, p)))

    def distance(self, p, q):
        diff = np.asarray(p) - q
        x = 2.0 * np.dot(diff, diff) / ((1.0 - np.dot(p, p)) * (1.0 - np.dot(q, q)))
        # arccosh(1 + x) == 2 asinh(sqrt(x/2)), without the cancellation near 0
        return float(2.0 * np.arcsinh(np.sqrt(max(x, 0.0) / 2.0)))

    def inner(self, p, u, v):
        return float(self.conformal_factor(p) ** 2 * np.dot(u, v))

    def exp(self, p, v):
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            return np.array(p, dtype=float)
        step = np.tanh(self.conformal_factor(p) * n / 2.0) * v / n
        return _mobius_add(np.asarray(p, dtype=float), step)

    def minimal_directions(self, p, q):
        w = _mobius_add(-np.asarray(p, dtype=float), q)
        n = np.linalg.norm(w)
        if n == 0.0:
            raise CoincidentPoints("minimal directions need distinct points")
        return [w / n / self.conformal_factor(p)]

    def sample_points(self, n, rng, max_radius: float = 0.9):
        out = []
        while len(out) < n:
            x = rng.uniform(-max_radius, max_radius, self.dimension)
            if np.linalg.norm(x) < max_radius:
                out.append(x)
        return out

    def to_json(self):
        return {"space": "hyperbolic", "dim": self.dimension}


@dataclass(frozen=True)
class Warp:
    """Positive warping function ``f`` with its declared global minimiser ``z0``."""

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    z0: float = 0.0
    spec: dict = field(default_factory=dict, compare=False)

    def __call__(self, z):
        return self.func(z)

    @property
    def minimum(self) -> float:
        return float(self.func(self.z0))

    def check(self, z) -> None:
        fz = np.asarray(self.func(np.asarray(z, dtype=float)))
        if np.any(fz <= 0) or np.any(fz < self.minimum * (1.0 - 1e-12)):
            raise OutOfChart("warp must stay positive and above its value at z0")

    @classmethod
    def quadratic(cls, a: float) -> "Warp":
        """``f(z) = 1 + a z^2``."""
        if a < 0:
            raise ValueError("quadratic warp needs a >= 0 to keep its minimum at 0")
        return cls(lambda z: 1.0 + a * np.square(z), 0.0, {"kind": "quadratic", "a": a})

    @classmethod
    def from_table(cls, z: Sequence[float], f: Sequence[float]) -> "Warp":
        z, f = np.asarray(z, dtype=float), np.asarray(f, dtype=float)
        spline = interpolate.CubicSpline(z, f)
        return cls(spline, float(z[np.argmin(f)]),
                   {"kind": "table", "z": z.tolist(), "f": f.tolist()})


@dataclass(frozen=True)
class WarpedCircleProduct(Space):
    """``S^1 x R`` with metric ``f(z) dtheta^2 + dz^2``."""

    warp: Warp = field(default_factory=lambda: Warp.quadratic(1.0))
    kind = "warped"

    @property
    def dim(self):
        return 2

    @property
    def waist_circumference(self) -> float:
        return TWO_PI * np.sqrt(self.warp.minimum)

    def point(self, coords):
        x = _as_vector(coords, 2, "warped")
        x[0] = wrap_angle(x[0])
        return x

    def on_waist(self, p, atol: float = 1e-12) -> bool:
        return abs(p[1] - self.warp.z0) <= atol

    def distance(self, p, q):
        raise AnalyticUnavailable("warped product distances come from discrete_geodesics")

    def distance_bounds(self, p, q):
        """Lower bound from ``f >= f(z0)``; upper bound from the straight chart segment."""
        dth = float(angle_diff(p[0], q[0]))
        dz = float(q[1] - p[1])
        f0 = self.warp.minimum
        lower = float(np.hypot(np.sqrt(f0) * dth, dz))
        if self.on_waist(p) and self.on_waist(q):
            return lower, lower
        zs = np.linspace(p[1], q[1], 17)
        self.warp.check(zs)

        def speed(t):
            return np.sqrt(self.warp(p[1] + t * dz) * dth**2 + dz**2)

        upper, _ = integrate.quad(speed, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
        return lower, max(float(upper), lower)

    def inner(self, p, u, v):
        return float(self.warp(p[1]) * u[0] * v[0] + u[1] * v[1])

    def exp(self, p, v):
        v = np.asarray(v, dtype=float)
        if v[0] == 0.0:
            # meridians theta = const are geodesics
            return self.point([p[0], p[1] + v[1]])
        if v[1] == 0.0 and self.on_waist(p):
            return self.point([p[0] + v[0], p[1]])
        raise AnalyticUnavailable("warped exp only along meridians or the waist")

    def minimal_directions(self, p, q):
        raise AnalyticUnavailable("warped product geodesics come from discrete_geodesics")

    def antipode(self, p, factor=None):
        if not self.on_waist(p, atol=1e-9):
            raise NoCircleFactor("antipodes are only defined on the waist circle z = z0")
        return self.point([p[0] + np.pi, self.warp.z0])

    def sample_points(self, n, rng):
        return [self.point([rng.uniform(0, TWO_PI), self.warp.z0 + rng.uniform(-1, 1)])
                for _ in range(n)]

    def to_json(self):
        return {"space": "warped", "warp": dict(self.warp.spec)}


def space_from_json(obj: dict) -> Space:
    kind = obj.get("space")
    if kind == "circle":
        return Circle(float(obj.get("L", TWO_PI)))
    if kind == "sphere":
        return Sphere(int(obj.get("dim", 2)), float(obj.get("radius", 1.0)))
    if kind == "hyperbolic":
        return Hyperbolic(int(obj.get("dim", 2)))
    if kind == "euclidean":
        return Euclidean(int(obj.get("dim", 2)))
    if kind == "cylinder":
        return Cylinder(float(obj.get("L", TWO_PI)))
    if kind == "flat_torus":
        return FlatTorus(tuple(obj.get("lengths", (TWO_PI, TWO_PI))))
    if kind == "warped":
        warp = obj.get("warp", {"kind": "quadratic", "a": 1.0})
        if warp.get("kind") == "quadratic":
            return WarpedCircleProduct(Warp.quadratic(float(warp["a"])))
        if warp.get("kind") == "table":
            return WarpedCircleProduct(Warp.from_table(warp["z"], warp["f"]))
        raise ValueError(f"unknown warp {warp!r}")
    raise ValueError(f"unknown space {kind!r}")


# -- module-level operations -------------------------------------------------

def distance(space: Space, p, q) -> float:
    return space.distance(space.point(p), space.point(q))


def distance_matrix(space: Space, points: Sequence) -> np.ndarray:
    pts = [space.point(p) for p in points]
    n = len(pts)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = space.distance(pts[i], pts[j])
    return D


def tangent(space: Space, p, components) -> TangentVector:
    p = space.point(p)
    v = np.asarray(components, dtype=float)
    return TangentVector(p, v, float(np.sqrt(max(space.inner(p, v, v), 0.0))))


def exp_map(space: Space, p, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        v = v.components
    return space.exp(space.point(p), np.asarray(v, dtype=float))


def antipode(space: Space, p, factor: int | None = None) -> np.ndarray:
    return space.antipode(space.point(p), factor)


def minimal_direction_set(space: Space, p, q) -> list[TangentVector]:
    """Unit initial velocities of the minimal geodesics from ``p`` to ``q``.

    When infinitely many minimal geodesics leave ``p`` (antipodes on a sphere)
    an orthonormal basis of the directions they span is returned instead.
    """
    p, q = space.point(p), space.point(q)
    return [tangent(space, p, v) for v in space.minimal_directions(p, q)]


def shortest_direction_span_dim(space: Space, p, targets: Sequence) -> int:
    if len(targets) == 0:
        raise ValueError("need at least one target")
    vecs = [v.components for t in targets for v in minimal_direction_set(space, p, t)]
    s = np.linalg.svd(np.vstack(vecs), compute_uv=False)
    return int(np.sum(s > RANK_RTOL * s[0]))


def first_variation_probe(space: Space, p_i, p_n, direction, epsilons) -> list[tuple[float, float]]:
    """Difference quotients of ``d(p_i, exp_{p_n}(eps v))`` against the first-variation slope.

    The slope is ``<v, g'(d)>`` with ``g`` a minimal geodesic from ``p_i`` arriving at
    ``p_n``; if several exist the one-sided derivative picks the largest decrease.
    """
    p_i, p_n = space.point(p_i), space.point(p_n)
    v = direction.components if isinstance(direction, TangentVector) else np.asarray(direction, float)
    norm = np.sqrt(space.inner(p_n, v, v))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"direction must be unit norm, got {norm}")
    # arrival velocity of p_i -> p_n is minus the departure velocity of p_n -> p_i
    rhs = min(-space.inner(p_n, v, u) for u in space.minimal_directions(p_n, p_i))
    d0 = space.distance(p_i, p_n)
    out = []
    for eps in epsilons:
        if not eps > 0:
            raise ValueError("epsilons must be positive")
        moved = space.exp(p_n, eps * v)
        out.append(((space.distance(p_i, moved) - d0) / eps, rhs))
    return out


def embed_hyperbolic(p) -> np.ndarray:
    """Totally geodesic inclusion of the d-ball into the (d+1)-ball."""
    p = np.asarray(p, dtype=float).reshape(-1)
    return np.append(p, 0.0)
