"""Operator algebra on spin lattices.

Tensor embedding by support, Schatten and operator norms, and two-sided
estimates of induced super-operator norms. The vectorization convention used
throughout the package is column stacking,

    vec(X Y Z) = (Z^T kron X) vec(Y),

with tensor factors of embedded operators ordered by ascending global site
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals

from .lattice import Lattice


class ConvergenceError(RuntimeError):
    """Iterative routine failed to reach its tolerance within the budget."""


PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
RAISING = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |1><0|
LOWERING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|

NAMED_OPERATORS = {
    "pauli_x": PAULI_X,
    "pauli_y": PAULI_Y,
    "pauli_z": PAULI_Z,
    "raising": RAISING,
    "lowering": LOWERING,
    "identity": np.eye(2, dtype=complex),
}


def named_operator(name: str) -> np.ndarray:
    """Look up a single-site generator matrix by name (qubit dimension)."""
    try:
        return NAMED_OPERATORS[name].copy()
    except KeyError:
        raise ValueError(
            f"unknown operator name {name!r}; expected one of {sorted(NAMED_OPERATORS)}"
        ) from None


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    vector = np.asarray(vector)
    if dim is None:
        dim = math.isqrt(vector.size)
        if dim * dim != vector.size:
            raise ValueError(f"vector of size {vector.size} is not a square matrix")
    return vector.reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class Operator:
    """A matrix together with its lattice support.

    ``matrix`` has dimension dim_per_site^|support| while local, and
    dim_per_site^N once embedded into the full lattice Hilbert space.
    """

    matrix: np.ndarray
    support: tuple[int, ...]
    dim_per_site: int = 2
    embedded: bool = False


def local_operator(matrix, support, dim_per_site: int = 2) -> Operator:
    """Wrap a local matrix acting on the listed support sites."""
    matrix = np.asarray(matrix, dtype=complex)
    support = tuple(int(s) for s in support)
    if len(set(support)) != len(support):
        raise ValueError(f"support sites must be distinct, got {support}")
    expected = dim_per_site ** len(support)
    if matrix.shape != (expected, expected):
        raise ValueError(
            f"matrix shape {matrix.shape} does not match dim_per_site^{len(support)}"
            f" = {expected}"
        )
    return Operator(matrix=matrix, support=support, dim_per_site=dim_per_site)


def _matrix(a) -> np.ndarray:
    return np.asarray(a.matrix if isinstance(a, Operator) else a, dtype=complex)


def embed(local, support, lattice: Lattice, dim_per_site: int | None = None) -> Operator:
    """Extend a local operator by identity off its support.

    Tensor factors of ``local`` correspond to the support sites in the order
    listed; the embedded operator's factors follow ascending global site
    index, the single ordering convention shared by all modules.
    """
    if isinstance(local, Operator):
        if local.embedded:
            raise ValueError("operator is already embedded")
        if dim_per_site is None:
            dim_per_site = local.dim_per_site
        if support is None:
            support = local.support
    if dim_per_site is None:
        dim_per_site = 2
    mat = _matrix(local)
    support = tuple(int(s) for s in support)
    n = lattice.n_sites
    d = dim_per_site
    if not support:
        raise ValueError("support must be nonempty")
    if len(set(support)) != len(support):
        raise ValueError(f"support sites must be distinct, got {support}")
    if any(s < 0 or s >= n for s in support):
        raise ValueError(f"support {support} out of range for {n} sites")
    k = len(support)
    if mat.shape != (d**k, d**k):
        raise ValueError(
            f"matrix shape {mat.shape} does not match dim_per_site^{k} = {d ** k}"
        )
    rest = [s for s in range(n) if s not in support]
    full = np.kron(mat, np.eye(d ** len(rest), dtype=complex))
    axis_sites = list(support) + rest
    order = np.argsort(axis_sites)  # order[j] = current axis of site j
    perm = list(order) + [n + a for a in order]
    full = full.reshape([d] * (2 * n)).transpose(perm).reshape(d**n, d**n)
    return Operator(
        matrix=full, support=tuple(sorted(support)), dim_per_site=d, embedded=True
    )


def schatten_norm(a, p) -> float:
    """Schatten p-norm [Tr (A^dag A)^{p/2}]^{1/p}; p = inf is the operator norm."""
    m = _matrix(a)
    if not (p == np.inf or math.isinf(p)):
        p = float(p)
        if p < 1:
            raise ValueError(f"Schatten norms require p >= 1, got {p}")
    s = svdvals(m)
    if s.size == 0:
        return 0.0
    if p == np.inf or math.isinf(p):
        return float(s[0])
    return float((s**p).sum() ** (1.0 / p))


def operator_norm(a, dense_cutoff: int = 256, tol: float = 1e-10,
                  max_iter: int = 10_000) -> float:
    """Largest singular value.

    Dense SVD up to ``dense_cutoff``; beyond that, power iteration on A^dag A
    with relative tolerance ``tol``. Non-convergence raises
    :class:`ConvergenceError`.
    """
    m = _matrix(a)
    if m.shape[0] <= dense_cutoff:
        s = svdvals(m)
        return float(s[0]) if s.size else 0.0
    h = m.conj().T @ m
    rng = np.random.default_rng(0x1D)
    v = rng.standard_normal(h.shape[0]) + 1j * rng.standard_normal(h.shape[0])
    v /= np.linalg.norm(v)
    prev = np.inf
    for _ in range(max_iter):
        w = h @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam = float(np.real(np.vdot(v, h @ v)))
        if abs(lam - prev) <= tol * max(abs(lam), 1e-300):
            return math.sqrt(max(lam, 0.0))
        prev = lam
    raise ConvergenceError(
        f"power iteration did not converge to rel. tol {tol} in {max_iter} iterations"
    )


def support_distance(x_sites, y_sites, lattice: Lattice) -> float:
    """min over x in X, y in Y of d(x, y); zero iff the supports meet."""
    x_sites = tuple(x_sites)
    y_sites = tuple(y_sites)
    if not x_sites or not y_sites:
        raise ValueError("support sets must be nonempty")
    return float(min(lattice.dist[x, y] for x in x_sites for y in y_sites))


def adjoint_term_norm_upper(h_matrix, lindblad_terms=()) -> float:
    """Certified upper bound on the inf->inf norm of a local adjoint-generator term.

    Triangle inequality gives  2 ||H|| + 2 sum_v gamma_v ||L_v||^2  for the
    term  i[H, .] + sum_v gamma_v (L^dag . L - {L^dag L, .}/2).
    """
    total = 0.0
    if h_matrix is not None:
        total += 2.0 * operator_norm(h_matrix)
    for l_matrix, gamma in lindblad_terms:
        gamma = float(gamma)
        if gamma < 0:
            raise ValueError(f"dissipation rates must be nonnegative, got {gamma}")
        total += 2.0 * gamma * operator_norm(l_matrix) ** 2
    return total


@dataclass(frozen=True)
class SuperoperatorNormBound:
    """Two-sided sandwich for an induced super-operator norm."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def superop_norm_1to1_estimate(t_matrix, restarts: int = 16, seed: int = 0,
                               tol: float = 1e-3, max_iter: int = 200,
                               ) -> SuperoperatorNormBound:
    """Estimate the induced 1->1 norm of a super-operator matrix.

    The lower estimate maximizes ||T(|psi><phi|)||_1 over rank-one inputs
    (the extreme points of the trace-norm unit ball) with random restarts and
    alternating vector updates; each update maximizes the current dual
    linearization, so the ascent is monotone. The upper bound is the norm
    relaxation sqrt(dim) * ||T||_{2->2}. Estimation only; never used for
    bound constants.
    """
    t = np.asarray(t_matrix.matrix if hasattr(t_matrix, "matrix") else t_matrix,
                   dtype=complex)
    d = math.isqrt(t.shape[0])
    if d * d != t.shape[0] or t.shape[0] != t.shape[1]:
        raise ValueError(f"super-operator matrix must be d^2 x d^2, got {t.shape}")
    if d > 16:
        raise ValueError(f"norm estimation supported only up to dimension 16, got {d}")
    upper = float(math.sqrt(d) * svdvals(t)[0])
    t_adj = t.conj().T
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(max(1, restarts)):
        psi = _random_unit(rng, d)
        phi = _random_unit(rng, d)
        val_prev = -np.inf
        for _ in range(max_iter):
            y = unvec(t @ vec(np.outer(psi, phi.conj())), d)
            u, s, vh = np.linalg.svd(y)
            w = u @ vh
            z = unvec(t_adj @ vec(w), d)
            zphi = z @ phi
            if np.linalg.norm(zphi) > 0:
                psi = zphi / np.linalg.norm(zphi)
            y = unvec(t @ vec(np.outer(psi, phi.conj())), d)
            u, s, vh = np.linalg.svd(y)
            val = float(s.sum())
            w = u @ vh
            z = unvec(t_adj @ vec(w), d)
            zpsi = z.conj().T @ psi
            if np.linalg.norm(zpsi) > 0:
                phi = zpsi / np.linalg.norm(zpsi)
            if val - val_prev <= tol * max(1.0, abs(val)):
                val_prev = val
                break
            val_prev = val
        best = max(best, val_prev)
    return SuperoperatorNormBound(lower=min(best, upper), upper=upper)


def superop_norm_inf_estimate(t_matrix, **kwargs) -> SuperoperatorNormBound:
    """Estimate the inf->inf norm via duality with the 1->1 norm of the adjoint."""
    t = np.asarray(t_matrix.matrix if hasattr(t_matrix, "matrix") else t_matrix,
                   dtype=complex)
    return superop_norm_1to1_estimate(t.conj().T, **kwargs)
