"""Gaussian fields on point sets: pinned fractional Brownian fields and stationary fields."""
from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import spaces
from .definiteness import covariance_entries
from .errors import ExcessClipping, TooFewSamples
from .spaces import Space

CLIP_RTOL = 1e-6
CHUNK = 1024
FFLD_MAGIC = b"FFLD"
FFLD_VERSION = 1


@dataclass
class FieldSample:
    space: Space
    origin: np.ndarray | None
    points: list
    H: float
    values: np.ndarray  # n_samples x n_points
    seed: int
    clipped_mass: float
    trace: float
    lam: float | None = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def point_set_hash(points: Sequence[np.ndarray]) -> int:
    h = hashlib.sha256()
    for p in points:
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        h.update(b"|")
    return int.from_bytes(h.digest()[:8], "little")


def _canonical_order(points: Sequence[np.ndarray]) -> np.ndarray:
    # lexicographic on coordinates, so that a permuted input yields the same problem
    coords = np.vstack([np.asarray(p, dtype=float) for p in points])
    return np.lexsort(coords.T[::-1])


def _factor(C: np.ndarray) -> tuple[np.ndarray, float, float]:
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    clipped = float(-w[w < 0].sum())
    trace = float(np.trace(C))
    if clipped > CLIP_RTOL * trace:
        raise ExcessClipping(clipped, trace)
    return V * np.sqrt(np.clip(w, 0.0, None)), clipped, trace


def _normals(seed: int, key_hash: int, n_samples: int, dim: int) -> np.ndarray:
    """Standard normals; chunk ``b`` of rows comes from its own Philox stream."""
    key = np.random.SeedSequence([seed, key_hash & 0xFFFFFFFF, key_hash >> 32]).generate_state(2, np.uint64)
    out = np.empty((n_samples, dim))
    for b, start in enumerate(range(0, n_samples, CHUNK)):
        stop = min(start + CHUNK, n_samples)
        bitgen = np.random.Philox(key=key, counter=[0, 0, b, 0])
        out[start:stop] = np.random.Generator(bitgen).standard_normal((stop - start, dim))
    return out


def _draw(C: np.ndarray, points: list, seed: int, n_samples: int):
    order = _canonical_order(points)
    Cs = C[np.ix_(order, order)]
    L, clipped, trace = _factor(Cs)
    Z = _normals(seed, point_set_hash([points[k] for k in order]), n_samples, len(points))
    X = np.empty((n_samples, len(points)))
    X[:, order] = Z @ L.T
    return X, clipped, trace


def sample_fbm(space: Space, origin, points: Sequence, H: float, n_samples: int,
               seed: int) -> FieldSample:
    """Realisations of the H-fractional field pinned at ``origin`` (``X_O = 0``)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    o = space.point(origin)
    pts = [space.point(p) for p in points]
    pinned = np.array([space.distance(o, p) == 0.0 for p in pts], dtype=bool)
    X = np.zeros((n_samples, len(pts)))
    clipped = trace = 0.0
    free = [p for p, z in zip(pts, pinned) if not z]
    if free:
        C = covariance_entries(space, o, free, H)
        X[:, ~pinned], clipped, trace = _draw(C, free, seed, n_samples)
    return FieldSample(space, o, pts, H, X, seed, clipped, trace)


def sample_stationary(space: Space, points: Sequence, H: float, lam: float, n_samples: int,
                      seed: int) -> FieldSample:
    """Realisations of the stationary field with covariance ``exp(-lam d^{2H})``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    pts = [space.point(p) for p in points]
    K = np.exp(-lam * spaces.distance_matrix(space, pts) ** (2.0 * H))
    X, clipped, trace = _draw(K, pts, seed, n_samples)
    return FieldSample(space, None, pts, H, X, seed, clipped, trace, lam)


@dataclass
class VariogramRow:
    i: int
    j: int
    empirical: float
    target: float
    z: float


def variogram_check(sample: FieldSample, pairs: Sequence[tuple[int, int]] | None = None) -> list[VariogramRow]:
    """Mean squared increments against ``d^{2H}``.

    Each increment is ``N(0, d^{2H})`` so its square has variance ``2 d^{4H}``;
    the z-score uses that standard error.
    """
    n = sample.n_samples
    if n < 1000:
        raise TooFewSamples(f"need at least 1000 samples, got {n}")
    if pairs is None:
        m = len(sample.points)
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    space = sample.space
    rows = []
    for i, j in pairs:
        inc = sample.values[:, i] - sample.values[:, j]
        emp = float(np.mean(inc * inc))
        target = space.distance(sample.points[i], sample.points[j]) ** (2 * sample.H)
        if target == 0.0:
            z = 0.0 if emp == 0.0 else np.inf
        else:
            z = (emp - target) / (np.sqrt(2.0 / n) * target)
        rows.append(VariogramRow(i, j, emp, target, float(z)))
    return rows


def write_csv(values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(values):
            w.writerow([repr(float(x)) for x in row])


def write_ffld(values: np.ndarray, path) -> None:
    """Columnar binary: magic, u32 version, u64 rows, u64 cols, little-endian f8 data."""
    values = np.atleast_2d(np.asarray(values, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(FFLD_MAGIC)
        fh.write(struct.pack("<IQQ", FFLD_VERSION, *values.shape))
        fh.write(np.ascontiguousarray(values).tobytes())


def read_ffld(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != FFLD_MAGIC:
            raise ValueError("not an FFLD file")
        version, rows, cols = struct.unpack("<IQQ", fh.read(20))
        if version != FFLD_VERSION:
            raise ValueError(f"unsupported FFLD version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(rows, cols).astype(float)
