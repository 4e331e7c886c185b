"""Shortest paths on grid graphs over ``[0, 2pi) x [z_min, z_max]`` charts.

Used where no closed-form distance exists: the hyperboloid outside the unit
sphere and warped products ``f(z) dtheta^2 + dz^2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import DegenerateChart, Disconnected, NoConvergence
from .spaces import TWO_PI, Warp


@dataclass(frozen=True)
class ParametricChart:
    """Periodic strip with a metric ``g_tt dtheta^2 + 2 g_tz dtheta dz + g_zz dz^2``."""

    metric: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    z_min: float
    z_max: float
    name: str = "chart"
    params: tuple = ()

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise DegenerateChart("need z_max > z_min")

    def to_json(self) -> dict:
        return {"chart": self.name, "z_min": self.z_min, "z_max": self.z_max, **dict(self.params)}


def embedded_chart(embedding, z_min, z_max, name="embedded", params=(), h=1e-6) -> ParametricChart:
    """Chart whose metric is pulled back from ``embedding(theta, z) -> (x, y, z)``."""

    def metric(theta, z):
        e_t = (embedding(theta + h, z) - embedding(theta - h, z)) / (2 * h)
        e_z = (embedding(theta, z + h) - embedding(theta, z - h)) / (2 * h)
        return (np.sum(e_t * e_t, axis=0), np.sum(e_t * e_z, axis=0), np.sum(e_z * e_z, axis=0))

    return ParametricChart(metric, z_min, z_max, name, params)


def hyperboloid_embedding(theta, z):
    r = np.sqrt(1.0 + np.square(z))
    return np.stack([r * np.cos(theta), r * np.sin(theta), np.broadcast_to(z, np.shape(r))])


def hyperboloid_chart(z_min: float = -1.0, z_max: float = 1.0) -> ParametricChart:
    """One-sheet hyperboloid; it meets the closed unit ball exactly in the circle ``z = 0``."""
    return embedded_chart(hyperboloid_embedding, z_min, z_max, "hyperboloid")


def warped_chart(warp: Warp, z_min: float = -1.0, z_max: float = 1.0) -> ParametricChart:
    def metric(theta, z):
        f = np.asarray(warp(z), dtype=float)
        return f, np.zeros_like(f), np.ones_like(f)

    return ParametricChart(metric, z_min, z_max, "warped", (("warp", dict(warp.spec)),))


def flat_chart(z_min: float = 0.0, z_max: float = 1.0) -> ParametricChart:
    def metric(theta, z):
        one = np.ones_like(np.asarray(z, dtype=float))
        return one, np.zeros_like(one), one

    return ParametricChart(metric, z_min, z_max, "flat")


def chart_from_json(obj: dict) -> ParametricChart:
    z_min, z_max = float(obj.get("z_min", -1.0)), float(obj.get("z_max", 1.0))
    kind = obj.get("chart")
    if kind == "hyperboloid":
        return hyperboloid_chart(z_min, z_max)
    if kind == "warped":
        warp = obj.get("warp", {"kind": "quadratic", "a": float(obj.get("a", 1.0))})
        if warp.get("kind") == "table":
            return warped_chart(Warp.from_table(warp["z"], warp["f"]), z_min, z_max)
        return warped_chart(Warp.quadratic(float(warp.get("a", 1.0))), z_min, z_max)
    if kind == "flat":
        return flat_chart(z_min, z_max)
    raise ValueError(f"unknown chart {kind!r}")


def stencil_offsets(radius: int) -> list[tuple[int, int]]:
    """Half of the coprime offsets within Chebyshev ``radius`` (one per undirected edge)."""
    out = []
    for dk in range(0, radius + 1):
        for dj in range(-radius, radius + 1):
            if (dk, dj) == (0, 0) or (dk == 0 and dj < 0):
                continue
            if math.gcd(dk, abs(dj)) == 1:
                out.append((dk, dj))
    return out


@dataclass
class GeodesicGraph:
    chart: ParametricChart
    n_theta: int
    n_z: int
    stencil_radius: int
    adjacency: object  # scipy csr matrix

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def dz(self) -> float:
        return (self.chart.z_max - self.chart.z_min) / (self.n_z - 1)

    @property
    def n_vertices(self) -> int:
        return self.n_theta * self.n_z

    def index(self, k: int, j: int) -> int:
        return j * self.n_theta + (k % self.n_theta)

    def vertex(self, theta: float, z: float) -> int:
        """Nearest grid vertex to the parameters ``(theta, z)``."""
        k = int(round((theta % TWO_PI) / self.dtheta)) % self.n_theta
        j = int(round((z - self.chart.z_min) / self.dz))
        if not 0 <= j < self.n_z:
            raise ValueError(f"z = {z} outside the chart")
        return self.index(k, j)

    def params(self, vertices) -> np.ndarray:
        v = np.atleast_1d(np.asarray(vertices, dtype=int))
        k, j = v % self.n_theta, v // self.n_theta
        return np.column_stack([k * self.dtheta, self.chart.z_min + j * self.dz])


def build_graph(chart: ParametricChart, n_theta: int, n_z: int,
                stencil_radius: int = 3) -> GeodesicGraph:
    """Grid graph with edges weighted by the midpoint-rule length of straight chart segments."""
    if n_theta < 8 or n_z < 2 or stencil_radius not in (1, 2, 3):
        raise ValueError("need n_theta >= 8, n_z >= 2 and stencil radius in {1, 2, 3}")
    ht, hz = TWO_PI / n_theta, (chart.z_max - chart.z_min) / (n_z - 1)
    k, j = np.meshgrid(np.arange(n_theta), np.arange(n_z))
    k, j = k.ravel(), j.ravel()
    rows, cols, wts = [], [], []
    for dk, dj in stencil_offsets(stencil_radius):
        ok = (j + dj >= 0) & (j + dj < n_z)
        k0, j0 = k[ok], j[ok]
        theta_mid = (k0 + 0.5 * dk) * ht
        z_mid = chart.z_min + (j0 + 0.5 * dj) * hz
        gtt, gtz, gzz = chart.metric(theta_mid, z_mid)
        if np.any(gtt <= 0) or np.any(gzz <= 0) or np.any(gtt * gzz - gtz**2 <= 0):
            raise DegenerateChart("metric is not positive definite on the grid")
        a, b = dk * ht, dj * hz
        w = np.sqrt(gtt * a * a + 2 * gtz * a * b + gzz * b * b)
        rows.append(j0 * n_theta + k0)
        cols.append((j0 + dj) * n_theta + (k0 + dk) % n_theta)
        wts.append(w)
    rows, cols, wts = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    if not np.all(np.isfinite(wts)) or np.any(wts <= 0):
        raise DegenerateChart("edge weights must be positive and finite")
    n = n_theta * n_z
    adj = coo_matrix((np.concatenate([wts, wts]), (np.concatenate([rows, cols]),
                                                  np.concatenate([cols, rows]))), shape=(n, n)).tocsr()
    return GeodesicGraph(chart, n_theta, n_z, stencil_radius, adj)


def is_connected(graph: GeodesicGraph) -> bool:
    return connected_components(graph.adjacency, directed=False)[0] == 1


def distances_from(graph: GeodesicGraph, source: int) -> np.ndarray:
    return dijkstra(graph.adjacency, directed=False, indices=source)


def graph_distance(graph: GeodesicGraph, u: int, v: int) -> tuple[float, list[int]]:
    """Shortest-path length from ``u`` to ``v`` and one optimal vertex path."""
    for x in (u, v):
        if not 0 <= x < graph.n_vertices:
            raise IndexError(x)
    if u == v:
        return 0.0, [u]
    dist, pred = dijkstra(graph.adjacency, directed=False, indices=u, return_predecessors=True)
    if not np.isfinite(dist[v]):
        raise Disconnected(f"vertex {v} unreachable from {u}")
    path = [v]
    while path[-1] != u:
        path.append(int(pred[path[-1]]))
    return float(dist[v]), path[::-1]


def path_deviation(path, waist_z: float) -> float:
    """Largest ``|z - waist_z|`` along a path of ``(theta, z)`` parameters."""
    pts = np.atleast_2d(np.asarray(path, dtype=float))
    if pts.size == 0:
        raise ValueError("empty path")
    return float(np.max(np.abs(pts[:, 1] - waist_z)))


def refine_distance(chart: ParametricChart, u_param, v_param, rel_tol: float = 1e-3,
                    n_theta: int = 32, n_z: int = 9, stencil_radius: int = 3,
                    max_doublings: int = 6) -> float:
    """Double the grid until two successive distances agree to ``rel_tol``.

    Grids stay nested (``n_z - 1`` doubles), so grid vertices persist; the
    endpoints are snapped to the nearest vertex at every level.
    """
    if not 0.0 < rel_tol <= 0.1:
        raise ValueError("rel_tol must lie in (0, 0.1]")
    prev = None
    for _ in range(max_doublings + 1):
        g = build_graph(chart, n_theta, n_z, stencil_radius)
        d, _ = graph_distance(g, g.vertex(*u_param), g.vertex(*v_param))
        if prev is not None and abs(d - prev) <= rel_tol * max(d, 1e-300):
            return d
        prev = d
        n_theta, n_z = 2 * n_theta, 2 * (n_z - 1) + 1
    raise NoConvergence(f"no convergence to {rel_tol} after {max_doublings} doublings")


def export_distances_csv(graph: GeodesicGraph, source: int, path) -> None:
    dist = distances_from(graph, source)
    prm = graph.params(np.arange(graph.n_vertices))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "z", "distance"])
        for (t, z), d in zip(prm, dist):
            w.writerow([repr(float(t)), repr(float(z)), repr(float(d))])
