"""Exact Gaussian dynamics of open harmonic lattices and their locality bound.

The Heisenberg equations of motion of the canonical coordinate vector
R = (Q_1..Q_n, P_1..P_n) close on a 2n x 2n kernel matrix S, so all
coordinate commutators follow from a single matrix exponential:
[R_k(s), R_l] is the scalar i (e^{S dt} sigma)_{k,l} times the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .bounds import matrix_exp
from .lattice import Lattice, _check_eta

SYMMETRY_TOL = 1e-12

# Above this kernel size the full exponential is skipped and only its action
# on the columns of sigma is computed.
DENSE_EXP_CUTOFF = 1024


def symplectic_form(n_sites: int) -> np.ndarray:
    """sigma with [Q_x, P_y] = i delta_{xy} under (Q..., P...) ordering."""
    n = n_sites
    sigma = np.zeros((2 * n, 2 * n))
    sigma[:n, n:] = np.eye(n)
    sigma[n:, :n] = -np.eye(n)
    return sigma


@dataclass(frozen=True, eq=False)
class HarmonicModel:
    """Quadratic Hamiltonian blocks (A, B) and linear Lindblad coefficients M.

    A couples positions, B momenta; row v of the n x 2n matrix M holds the
    coefficients of the single Lindblad operator attached to site v,
    L_v = sum_j M[v, j] R_j. Time-independent only.
    """

    lattice: Lattice
    a: np.ndarray
    b: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        n = self.lattice.n_sites
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "m", np.asarray(self.m, dtype=complex))
        if self.a.shape != (n, n) or self.b.shape != (n, n):
            raise ValueError(f"A and B must be {n}x{n}")
        if self.m.shape != (n, 2 * n):
            raise ValueError(f"M must be {n}x{2 * n}")
        if np.abs(self.a - self.a.T).max() > SYMMETRY_TOL:
            raise ValueError("A must be symmetric")
        if np.abs(self.b - self.b.T).max() > SYMMETRY_TOL:
            raise ValueError("B must be symmetric")

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """The 2n x 2n generator S of the coordinate equations of motion."""

    s: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray
    sigma: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.s.shape[0] // 2


def build_kernel(model: HarmonicModel) -> KernelMatrix:
    """Assemble S from the Hamiltonian blocks and the dissipative matrices.

    D, E, F, G are the defining bilinears of M; the upper and lower block
    rows of each dissipative part are negatives of each other, and F = -D
    identically.
    """
    n = model.n_sites
    mq = model.m[:, :n]
    mp = model.m[:, n:]
    d = -0.5j * (mq.conj().T @ mq).T
    e = -0.5j * (mp.conj().T @ mq).T
    f = 0.5j * (mq.conj().T @ mq).T
    g = 0.5j * (mq.conj().T @ mp)
    s = np.zeros((2 * n, 2 * n), dtype=complex)
    s[:n, n:] = -model.b
    s[n:, :n] = model.a
    upper = np.hstack([d + f, e + g])
    s[:n, :] += upper
    s[n:, :] -= upper
    return KernelMatrix(s=s, d=d, e=e, f=f, g=g, sigma=symplectic_form(n))


@dataclass(frozen=True, eq=False)
class CommutatorMatrix:
    """Entry (k, l) is ||[R_k(s), R_l]|| at dt = t - s."""

    dt: float
    values: np.ndarray


def harmonic_commutator_norms(kernel: KernelMatrix, dt: float,
                              dense_cutoff: int = DENSE_EXP_CUTOFF) -> CommutatorMatrix:
    """All coordinate commutator norms at once: |e^{S dt} sigma| entrywise.

    [R_k(s), R_l] = sum_m [e^{S dt}]_{k,m} i sigma_{m,l} 1, a scalar multiple
    of the identity, so its operator norm is the absolute value of that
    scalar.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if kernel.s.shape[0] <= dense_cutoff:
        product = matrix_exp(kernel.s * dt) @ kernel.sigma
    else:
        product = expm_multiply(kernel.s * dt, kernel.sigma.astype(complex))
    if not np.all(np.isfinite(product)):
        raise OverflowError("e^{S dt} overflowed for this dt and kernel norm")
    return CommutatorMatrix(dt=float(dt), values=np.abs(product))


def symplectic_defect(kernel: KernelMatrix, dt: float,
                      dense_cutoff: int = DENSE_EXP_CUTOFF) -> float:
    """max |e^{S dt} sigma e^{S dt}^T - sigma|; zero for closed systems.

    Hamiltonian kernels generate symplectic flows, so this is a consistency
    check for M = 0 models.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    sigma = kernel.sigma.astype(complex)
    if kernel.s.shape[0] <= dense_cutoff:
        e = matrix_exp(kernel.s * dt)
        product = e @ sigma @ e.T
    else:
        # two exponential actions: E (sigma E^T) with sigma E^T = -(E sigma)^T
        half = expm_multiply(kernel.s * dt, sigma)
        product = expm_multiply(kernel.s * dt, -half.T)
    return float(np.abs(product - kernel.sigma).max())


def c0_fit(model: HarmonicModel, eta: float) -> float:
    """Minimal c0 with every |A|, |B|, |M| entry below c0 / [1 + d]^eta.

    Both halves of M are measured against the distance between the Lindblad
    site (its row) and the coordinate site (its column mod n).
    """
    eta = _check_eta(eta)
    n = model.n_sites
    weight = (1.0 + model.lattice.dist) ** eta
    c0 = max(
        (np.abs(model.a) * weight).max(),
        (np.abs(model.b) * weight).max(),
        (np.abs(model.m[:, :n]) * weight).max(),
        (np.abs(model.m[:, n:]) * weight).max(),
    )
    return float(c0)


def theorem4_bound(c0: float, p0: float, eta: float, dt: float, d_xy: float) -> float:
    """e^{2 p0 (c0 + p0 c0^2) dt} / (2 p0 [1 + d]^eta), for distinct sites."""
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if d_xy <= 0:
        raise ValueError("the harmonic bound requires distinct sites (d > 0)")
    rate = 2.0 * p0 * (c0 + p0 * c0 * c0)
    return math.exp(rate * dt) / (2.0 * p0 * (1.0 + d_xy) ** eta)
