"""Discrete Sturm-Liouville eigenbasis on a uniform grid.

The self-adjoint operator -(p u')' + q u with Dirichlet ends is discretized
with the conservative flux stencil (p at half-nodes), giving a symmetric
tridiagonal matrix. Its lowest eigenpairs, orthonormalized in the discrete
trapezoid inner product, form the expansion basis for the diffusion solvers.
Projections and the energy functional int p(Y')^2 + q Y^2 live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import HypothesisError, NumericsError

__all__ = [
    "SpaceGrid",
    "TridiagonalOperator",
    "SpectralBasis",
    "ModeCoefficients",
    "GridMismatchError",
    "EigensolverError",
    "assemble_operator",
    "solve_eigs",
    "project",
    "energy_form",
    "solve_tridiagonal",
    "choose_mode_count",
]


class GridMismatchError(ValueError):
    pass


class EigensolverError(NumericsError):
    pass


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid on [0, l] with M interior nodes: x_i = i*l/(M+1)."""

    l: float
    M: int

    def __post_init__(self):
        if not (self.l > 0):
            raise ValueError(f"interval length must be positive, got {self.l}")
        if self.M < 3:
            raise ValueError(f"need at least 3 interior points, got {self.M}")

    @property
    def dx(self) -> float:
        return self.l / (self.M + 1)

    @property
    def nodes(self) -> np.ndarray:
        """All M+2 nodes including both boundaries."""
        return np.linspace(0.0, self.l, self.M + 2)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def half_nodes(self) -> np.ndarray:
        """Midpoints x_{i+1/2}, one per cell (M+1 of them)."""
        return (np.arange(self.M + 1) + 0.5) * self.dx

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Trapezoid inner product of node samples (length M+2)."""
        w = np.ones(self.M + 2)
        w[0] = w[-1] = 0.5
        return float(self.dx * np.sum(w * u * v))


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal discretization of -(p u')' + q u on the interior."""

    grid: SpaceGrid
    diagonal: np.ndarray       # length M
    off_diagonal: np.ndarray   # length M-1

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diagonal * u
        out[:-1] += self.off_diagonal * u[1:]
        out[1:] += self.off_diagonal * u[:-1]
        return out


def assemble_operator(p_half: np.ndarray, q_interior: np.ndarray, grid: SpaceGrid,
                      check: bool = True) -> TridiagonalOperator:
    """Build the flux-form stencil from p sampled at half-nodes, q at interior nodes.

    Row i (node x_{i+1}) has diagonal (p_{i+1/2} + p_{i+3/2})/dx^2 + q and
    off-diagonal -p_{i+3/2}/dx^2 coupling it to the next node.
    """
    p_half = np.asarray(p_half, dtype=float)
    q_interior = np.asarray(q_interior, dtype=float)
    M = grid.M
    if p_half.shape != (M + 1,):
        raise GridMismatchError(f"p must be sampled at the {M + 1} half-nodes, got shape {p_half.shape}")
    if q_interior.shape != (M,):
        raise GridMismatchError(f"q must be sampled at the {M} interior nodes, got shape {q_interior.shape}")
    if check:
        bad = np.nonzero(~(p_half > 0.0))[0]
        if len(bad):
            i = int(bad[0])
            raise HypothesisError("p > 0", measured=float(p_half[i]),
                                  detail=f"p non-positive at half-node x={grid.half_nodes[i]:.6g}")
        bad = np.nonzero(q_interior < 0.0)[0]
        if len(bad):
            i = int(bad[0])
            raise HypothesisError("q >= 0", measured=float(q_interior[i]),
                                  detail=f"q negative at node x={grid.interior[i]:.6g}")
    dx2 = grid.dx ** 2
    diag = (p_half[:-1] + p_half[1:]) / dx2 + q_interior
    off = -p_half[1:-1] / dx2
    return TridiagonalOperator(grid, diag, off)


@dataclass(frozen=True)
class SpectralBasis:
    """Lowest N eigenpairs, trapezoid-orthonormal, boundary values zero.

    ``vectors`` has shape (N, M): row n holds X_n at the interior nodes.
    The sign convention makes the first appreciable interior sample positive.
    """

    grid: SpaceGrid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    normalization: str = field(default="trapezoid", compare=False)

    @property
    def N(self) -> int:
        return len(self.eigenvalues)

    def sampled(self, n: int) -> np.ndarray:
        """X_n on all M+2 nodes, zero at both boundaries."""
        full = np.zeros(self.grid.M + 2)
        full[1:-1] = self.vectors[n]
        return full

    def orthonormality_defect(self) -> float:
        gram = self.grid.dx * self.vectors @ self.vectors.T
        return float(np.abs(gram - np.eye(self.N)).max())


def solve_eigs(operator: TridiagonalOperator, N: int) -> SpectralBasis:
    """Lowest N eigenpairs of the symmetric tridiagonal operator.

    Uses bisection plus inverse iteration on the tridiagonal form, then
    rescales the unit eigenvectors to the discrete trapezoid norm.
    """
    grid = operator.grid
    if not (1 <= N <= grid.M):
        raise ValueError(f"mode count must satisfy 1 <= N <= M={grid.M}, got {N}")
    try:
        lam, vec = eigh_tridiagonal(operator.diagonal, operator.off_diagonal,
                                    select="i", select_range=(0, N - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(f"tridiagonal eigensolver did not converge: {exc}") from exc
    vec = vec.T / math.sqrt(grid.dx)  # unit euclidean -> unit trapezoid norm
    scale = np.abs(vec).max(axis=1)
    for n in range(N):
        nz = np.nonzero(np.abs(vec[n]) > 1e-12 * scale[n])[0]
        if len(nz) and vec[n, nz[0]] < 0:
            vec[n] = -vec[n]
    if np.any(np.diff(lam) <= 0):
        raise EigensolverError("computed eigenvalues are not strictly increasing")
    return SpectralBasis(grid, lam, vec)


def project(samples: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Trapezoid inner products of node samples (length M+2) with each X_n."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (basis.grid.M + 2,):
        raise GridMismatchError(
            f"expected samples at all {basis.grid.M + 2} nodes, got shape {samples.shape}")
    # boundary trapezoid weights are irrelevant: every X_n vanishes there
    return basis.grid.dx * basis.vectors @ samples[1:-1]


def energy_form(samples: np.ndarray, p_nodes: np.ndarray, q_nodes: np.ndarray,
                grid: SpaceGrid) -> float:
    """Trapezoid approximation of int p (Y')^2 + q Y^2 over [0, l].

    Y' uses central differences at interior nodes and one-sided second-order
    differences at the ends. Samples must vanish at both boundaries.
    """
    y = np.asarray(samples, dtype=float)
    if y.shape != (grid.M + 2,):
        raise GridMismatchError(f"expected {grid.M + 2} node samples, got shape {y.shape}")
    if abs(y[0]) > 1e-12 or abs(y[-1]) > 1e-12:
        raise HypothesisError("boundary values vanish",
                              measured=float(max(abs(y[0]), abs(y[-1]))),
                              detail="energy functional requires Y(0)=Y(l)=0")
    dx = grid.dx
    dy = np.empty_like(y)
    dy[1:-1] = (y[2:] - y[:-2]) / (2 * dx)
    dy[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dx)
    dy[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * dx)
    integrand = np.asarray(p_nodes, dtype=float) * dy ** 2 + np.asarray(q_nodes, dtype=float) * y ** 2
    w = np.ones_like(y)
    w[0] = w[-1] = 0.5
    return float(dx * np.sum(w * integrand))


def solve_tridiagonal(operator: TridiagonalOperator, rhs: np.ndarray,
                      shift: float = 0.0) -> np.ndarray:
    """Solve (A + shift*I) u = rhs for the symmetric positive operator."""
    from scipy.linalg import solveh_banded

    M = operator.grid.M
    ab = np.zeros((2, M))
    ab[0, 1:] = operator.off_diagonal
    ab[1, :] = operator.diagonal + shift
    return solveh_banded(ab, np.asarray(rhs, dtype=float), lower=False)


@dataclass(frozen=True)
class ModeCoefficients:
    """Projections of the initial state and the source profile onto the basis."""

    phi: np.ndarray   # phi_n, length N
    h: np.ndarray     # h_n, length N
    eigenvalues: np.ndarray

    @property
    def N(self) -> int:
        return len(self.phi)

    @property
    def H(self) -> float:
        """Sum of h_n^2; positive whenever the profile is not identically zero."""
        return float(self.h @ self.h)

    @property
    def W(self) -> float:
        """Sum of lambda_n h_n^2 (energy-weighted profile mass)."""
        return float(self.eigenvalues @ (self.h * self.h))

    @classmethod
    def from_samples(cls, phi_samples, h_samples, basis: SpectralBasis) -> "ModeCoefficients":
        return cls(project(phi_samples, basis), project(h_samples, basis), basis.eigenvalues)


def choose_mode_count(basis: SpectralBasis, phi_samples, h_samples,
                      tail_tol: float = 1e-12, n_cap: int = 64) -> int:
    """Smallest N whose tail indicators lambda_N phi_N^2, lambda_N h_N^2 drop
    below ``tail_tol``, capped at ``n_cap`` (and at the basis size)."""
    phin = project(phi_samples, basis)
    hn = project(h_samples, basis)
    cap = min(n_cap, basis.N)
    ind = basis.eigenvalues[:cap] * np.maximum(phin[:cap] ** 2, hn[:cap] ** 2)
    # a single small coefficient (parity zeros) must not truncate the series,
    # so require the indicator to stay below the tolerance from N onward
    below = np.maximum.accumulate(ind[::-1])[::-1] < tail_tol
    hits = np.nonzero(below)[0]
    return int(hits[0]) + 1 if len(hits) else cap
