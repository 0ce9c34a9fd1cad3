"""Finite lattices with a metric, and the kernel-decay constants entering the bounds.

All constants are minimal over the finite lattice and computed by direct
summation over the dense distance matrix; they are reported at full double
precision. Callers that certify inequalities against them should apply a tiny
multiplicative safety factor to absorb summation rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

METRICS = ("graph", "manhattan", "euclidean")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Finite site set 0..N-1 with a precomputed symmetric distance matrix."""

    sides: tuple[int, ...]
    metric: str
    dist: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.dist.shape[0]

    @property
    def ndim(self) -> int:
        return len(self.sides)


def build_lattice(sides, metric: str = "graph") -> Lattice:
    """Build a chain (single side length) or a D-dimensional grid.

    Sites are indexed in row-major order over the grid coordinates. On these
    grids the graph metric (shortest path over nearest-neighbour edges)
    coincides with the Manhattan metric; ``euclidean`` uses unit spacing.
    """
    if isinstance(sides, (int, np.integer)):
        sides = (int(sides),)
    sides = tuple(int(s) for s in sides)
    if not sides or any(s < 1 for s in sides):
        raise ValueError(f"all side lengths must be >= 1, got {sides!r}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    coords = np.array(list(itertools.product(*(range(s) for s in sides))), dtype=float)
    delta = np.abs(coords[:, None, :] - coords[None, :, :])
    if metric == "euclidean":
        dist = np.sqrt((delta**2).sum(axis=2))
    else:
        dist = delta.sum(axis=2)
    return Lattice(sides=sides, metric=metric, dist=dist)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not eta > 0:
        raise ValueError(f"decay exponent eta must be positive, got {eta}")
    return eta


def decay_kernel(lattice: Lattice, eta: float) -> np.ndarray:
    """Entrywise power-law kernel 1 / [1 + d(x, y)]^eta."""
    eta = _check_eta(eta)
    return (1.0 + lattice.dist) ** (-eta)


def p0_constant(lattice: Lattice, eta: float) -> float:
    """Minimal p0 with  sum_z k(x,z) k(z,y) <= p0 * k(x,y)  for all x, y.

    Here k is the power-law kernel; the maximisation runs over all pairs
    including x = y (the safest reading, which only tightens the constant).
    """
    k = decay_kernel(lattice, eta)
    return float(((k @ k) / k).max())


def extensivity_sup(lattice: Lattice, eta: float) -> float:
    """sup_x sum_y 1/[1+d(x,y)]^eta; the y = x term contributes 1."""
    k = decay_kernel(lattice, eta)
    return float(k.sum(axis=1).max())


def n_lambda(lattice: Lattice, eta: float) -> float:
    """Rescaling factor 1 / sup_x sum_{y != x} 1/[1+d(x,y)]^eta.

    Undefined on a single-site lattice (the off-site sum is empty).
    """
    eta = _check_eta(eta)
    if lattice.n_sites < 2:
        raise ValueError("n_lambda requires at least two sites")
    k = decay_kernel(lattice, eta)
    off_site = k.sum(axis=1) - 1.0  # diagonal entries of k are exactly 1
    return float(1.0 / off_site.max())


def p1_constant(lattice: Lattice, eta: float) -> float:
    """Minimal p1 of the rescaled kernel inequality; equals n_lambda * p0."""
    return n_lambda(lattice, eta) * p0_constant(lattice, eta)


@dataclass(frozen=True)
class AssumptionConstants:
    """Decay-assumption constants of a lattice at a fixed exponent.

    ``n_lambda`` and ``p1`` are None on single-site lattices, where the
    off-site supremum is an empty sum.
    """

    eta: float
    p0: float
    extensivity_sup: float
    n_lambda: float | None
    p1: float | None


def assumption_constants(lattice: Lattice, eta: float) -> AssumptionConstants:
    """Compute all assumption constants for a lattice in one pass."""
    eta = _check_eta(eta)
    p0 = p0_constant(lattice, eta)
    ext = extensivity_sup(lattice, eta)
    if lattice.n_sites >= 2:
        nl = n_lambda(lattice, eta)
        p1 = nl * p0
    else:
        nl = None
        p1 = None
    return AssumptionConstants(eta=eta, p0=p0, extensivity_sup=ext, n_lambda=nl, p1=p1)
