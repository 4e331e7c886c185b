"""Negative definiteness of ``d^{2H}``: quadratic forms, centred spectra, covariances."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spaces
from .errors import BudgetExhausted, EigenFailure, InvalidConfiguration
from .spaces import Space

log = logging.getLogger(__name__)

DEFAULT_TOL_SCALE = 1e-9
# certified forms must clear the evaluation tolerance by this factor
CERTIFY_FACTOR = 10.0


@dataclass
class Configuration:
    """Distinct points with nonzero coefficients summing to zero."""

    points: list
    coefficients: np.ndarray

    def __post_init__(self):
        self.points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in self.points]
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        c = self.coefficients
        if len(self.points) != c.size:
            raise InvalidConfiguration("one coefficient per point is required")
        if c.size < 2:
            raise InvalidConfiguration("a configuration has at least two points")
        if np.any(c == 0.0):
            raise InvalidConfiguration("coefficients must be nonzero")
        if abs(c.sum()) >= 1e-12 * max(1.0, np.abs(c).max()):
            raise InvalidConfiguration(f"coefficients must sum to zero, got {c.sum():.3e}")

    def __len__(self):
        return len(self.points)

    def to_json(self) -> dict:
        return {"points": [p.tolist() for p in self.points],
                "coeffs": self.coefficients.tolist()}


def power_matrix(space: Space, points: Sequence, H: float) -> np.ndarray:
    D = spaces.distance_matrix(space, points)
    off = D[~np.eye(len(D), dtype=bool)]
    if off.size and off.min() <= 1e-12:
        raise InvalidConfiguration("points must be pairwise distinct")
    return D ** (2.0 * H)


def _check_H(H: float, upper: float = 1.0) -> None:
    if not 0.0 < H <= upper:
        raise ValueError(f"H must lie in (0, {upper}], got {H}")


def quadratic_form(space: Space, config: Configuration, H: float) -> float:
    """``sum_ij c_i c_j d^{2H}(P_i, P_j)`` over both orderings."""
    _check_H(H)
    A = power_matrix(space, config.points, H)
    c = config.coefficients
    return float(c @ A @ c)


def quadratic_form_bounds(space: Space, config: Configuration, H: float) -> tuple[float, float]:
    """Interval enclosing the form when only distance bounds are available."""
    _check_H(H)
    pts = [space.point(p) for p in config.points]
    c = config.coefficients
    lo = hi = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dlo, dhi = space.distance_bounds(pts[i], pts[j])
            if dlo <= 1e-12:
                raise InvalidConfiguration("points must be pairwise distinct")
            w = 2.0 * c[i] * c[j]
            a, b = w * dlo ** (2 * H), w * dhi ** (2 * H)
            lo += min(a, b)
            hi += max(a, b)
    return lo, hi


def zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of the zero-sum hyperplane."""
    u, _, _ = np.linalg.svd(centering(n))
    return u[:, : n - 1]


def centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


@dataclass
class CenteredGramReport:
    H: float
    power_matrix: np.ndarray
    spectrum: np.ndarray
    max_eigenvalue: float
    tolerance: float
    verdict: str
    witness: np.ndarray | None = None
    witness_form: float | None = None

    @property
    def violation(self) -> bool:
        return self.verdict == "violation"

    @property
    def certified(self) -> bool:
        return self.witness_form is not None and self.witness_form > CERTIFY_FACTOR * self.tolerance


def centered_gram(space: Space, points: Sequence, H: float,
                  tol_scale: float = DEFAULT_TOL_SCALE) -> CenteredGramReport:
    """Spectral test of ``d^{2H}`` on the zero-sum vectors supported by ``points``.

    ``J A J`` has the constant vector in its kernel and otherwise agrees with the
    form on zero-sum vectors, so the form is nonpositive there iff its largest
    eigenvalue is nonpositive.
    """
    _check_H(H)
    if len(points) < 2:
        raise ValueError("need at least two points")
    A = power_matrix(space, points, H)
    n = len(A)
    J = centering(n)
    B = J @ A @ J
    B = 0.5 * (B + B.T)
    try:
        w, V = np.linalg.eigh(B)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise EigenFailure("non-finite eigenvalues")
    tol = tol_scale * n * float(np.abs(A).max())
    top = float(w[-1])
    report = CenteredGramReport(H, A, w, top, tol, "violation" if top > tol else "no-violation")
    if report.violation:
        c = V[:, -1] - V[:, -1].mean()
        c /= np.linalg.norm(c)
        report.witness = c
        report.witness_form = float(c @ A @ c)
    return report


@dataclass
class CovarianceMatrix:
    origin: np.ndarray
    points: list
    entries: np.ndarray
    min_eigenvalue: float
    psd: bool


def covariance_entries(space: Space, origin, points: Sequence, H: float) -> np.ndarray:
    o = space.point(origin)
    pts = [space.point(p) for p in points]
    a_o = np.array([space.distance(o, p) for p in pts]) ** (2.0 * H)
    A = spaces.distance_matrix(space, pts) ** (2.0 * H)
    return 0.5 * (a_o[:, None] + a_o[None, :] - A)


def covariance_matrix(space: Space, origin, points: Sequence, H: float,
                      tol_scale: float = DEFAULT_TOL_SCALE) -> CovarianceMatrix:
    """Covariance of the H-fractional field pinned at ``origin``."""
    _check_H(H)
    C = covariance_entries(space, origin, points, H)
    lam = float(np.linalg.eigvalsh(C)[0]) if len(C) else 0.0
    tol = tol_scale * max(1, len(C)) * float(np.abs(C).max(initial=0.0))
    return CovarianceMatrix(space.point(origin), [space.point(p) for p in points], C, lam, lam >= -tol)


def nondegeneracy_min_eigenvalue(space: Space, origin, points: Sequence, H: float) -> float:
    """Smallest covariance eigenvalue; strictly positive on hyperbolic spaces for H <= 1/2."""
    if not isinstance(space, spaces.Hyperbolic):
        raise TypeError("nondegeneracy check is defined for hyperbolic spaces")
    _check_H(H, 0.5)
    o = space.point(origin)
    pts = [space.point(p) for p in points]
    power_matrix(space, [o, *pts], H)  # distinctness, origin included
    C = covariance_entries(space, o, pts, H)
    try:
        return float(np.linalg.eigvalsh(C)[0])
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def stationary_kernel_matrix(space: Space, points: Sequence, H: float,
                             lam: float) -> tuple[np.ndarray, float]:
    """``exp(-lam d^{2H})`` and its smallest eigenvalue."""
    _check_H(H)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    A = spaces.distance_matrix(space, points) ** (2.0 * H)
    K = np.exp(-lam * A)
    return K, float(np.linalg.eigvalsh(K)[0])


# -- fractional index bracketing ----------------------------------------------

@dataclass
class PointSampler:
    """How point sets are drawn for the spectral tests at each H."""

    n_points: int = 24
    structured: bool = True
    random_sets: int = 4


@dataclass
class IndexBracket:
    evidence_H: float | None
    violation_H: float | None
    step: float
    witness: dict | None = None
    cells: list = field(default_factory=list)

    @property
    def beta_bracket(self) -> tuple[float | None, float | None]:
        return (None if self.evidence_H is None else 2 * self.evidence_H,
                None if self.violation_H is None else 2 * self.violation_H)

    def to_json(self) -> dict:
        lo, hi = self.beta_bracket
        return {
            "evidence_H": self.evidence_H,
            "violation_H": self.violation_H,
            "step": self.step,
            "beta_bracket": [lo, hi],
            "caveat": "evidence_H is one-sided: no violation found is not a proof of negative definiteness",
            "witness": self.witness,
            "cells": self.cells,
        }


def h_grid(start: float, stop: float, step: float) -> list[float]:
    if step < 1e-3:
        raise ValueError("grid step must be >= 1e-3")
    n = int(np.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 10) for k in range(n + 1)]


def _probe_cell(space: Space, H: float, sampler: PointSampler, budget: int,
                seed_seq: np.random.SeedSequence, tol_scale: float) -> dict:
    # local import: configurations depends on this module
    from . import configurations

    rng = np.random.default_rng(seed_seq)
    cell = {"H": H, "max_ratio": -np.inf, "witness": None, "source": None}

    def consider(points, source):
        rep = centered_gram(space, points, H, tol_scale)
        ratio = rep.max_eigenvalue / rep.tolerance
        cell["max_ratio"] = max(cell["max_ratio"], ratio)
        if rep.certified and cell["witness"] is None:
            cell["witness"] = {"points": [np.asarray(p).tolist() for p in points],
                               "coeffs": rep.witness.tolist(), "form": rep.witness_form}
            cell["source"] = source

    if sampler.structured:
        consider(space.structured_points(sampler.n_points), "structured")
    for _ in range(budget):
        if cell["witness"] is not None:
            break
        consider(space.sample_points(sampler.n_points, rng), "random")
    if cell["witness"] is None:
        found = configurations.circle_witness(space, H)
        if found is not None:
            cell["witness"], cell["source"] = found, "circle-witness"
    cell["max_ratio"] = float(cell["max_ratio"])
    if cell["witness"] is not None:
        cell["status"] = "violation"
    elif cell["max_ratio"] > 1.0:
        # above tolerance but not by the certification margin
        cell["status"] = "boundary-inconclusive"
    else:
        cell["status"] = "no-violation"
    return cell


def estimate_fractional_index(space: Space, sampler: PointSampler | None = None,
                              H_start: float = 0.05, H_stop: float = 1.0, step: float = 0.05,
                              budget: int = 4, seed: int = 0,
                              tol_scale: float = DEFAULT_TOL_SCALE,
                              threads: int = 1) -> IndexBracket:
    """Scan an ascending H grid for certified violations of negative definiteness.

    ``evidence_H`` is the last grid value below the first violation at which
    nothing was found; it is evidence only. Cells whose top eigenvalue exceeds
    the tolerance without a certified witness are marked boundary-inconclusive
    and do not count as evidence.
    """
    if budget < 1:
        raise BudgetExhausted("per-H budget must allow at least one point set")
    sampler = sampler or PointSampler()
    grid = [H for H in h_grid(H_start, H_stop, step) if 0 < H <= 1]
    if not grid:
        raise BudgetExhausted("empty H grid")
    seeds = np.random.SeedSequence(seed).spawn(len(grid))

    def run(k):
        return _probe_cell(space, grid[k], sampler, budget, seeds[k], tol_scale)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cells = list(pool.map(run, range(len(grid))))
    else:
        cells = []
        for k in range(len(grid)):
            cells.append(run(k))
            # ascending scan stops at the first certified violation
            if cells[-1]["witness"] is not None:
                break

    violation_H = evidence_H = witness = None
    for cell in cells:
        log.debug("H=%.4f max_ratio=%.3g source=%s", cell["H"], cell["max_ratio"], cell["source"])
        if cell["witness"] is not None:
            violation_H, witness = cell["H"], dict(cell["witness"], source=cell["source"])
            break
        if cell["status"] == "no-violation":
            evidence_H = cell["H"]
    if violation_H is not None:
        cells = [c for c in cells if c["H"] <= violation_H]
    return IndexBracket(evidence_H, violation_H, step, witness, cells)
