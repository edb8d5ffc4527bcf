"""Shared instances for the test suite.

Two families are used throughout:

* ``variable_instance`` -- a smooth variable-coefficient direct problem used
  for solver cross-validation.
* ``balanced_inverse_instance`` -- an inverse problem whose initial state is
  the elliptic equilibrium f(0) * A^{-1} h (supplied as a sampled table), so
  the observation has no t^alpha startup layer and every node of the
  recovered factor is meaningful.
"""

import numpy as np
import pytest

from fracsource import Expression, ProblemSpec, TabulatedFunction
from fracsource.direct_solver import build_workspace, sample_function
from fracsource.sturm_liouville import SpaceGrid, assemble_operator, solve_tridiagonal


def expr(src: str, var: str) -> Expression:
    return Expression(src, var)


def variable_instance(alpha=0.5, M=200, K=200, N=32, T=1.0, f="1 + t^2"):
    """l=1, p=1+x/2, q=x, phi=sin(pi x)(1+x), h=4x(1-x)."""
    return ProblemSpec(
        alpha=alpha, l=1.0, T=T,
        p=expr("1 + x/2", "x"), q=expr("x", "x"),
        phi=expr("sin(pi*x)*(1+x)", "x"), h=expr("4*x*(1-x)", "x"),
        f=expr(f, "t"), M=M, K=K, N=N)


def equilibrium_phi(spec_like_kwargs=None, *, l=1.0, M=300, p_src="1 + x/2",
                    q_src="x", h_src="sin(pi*x)", f0=1.0) -> TabulatedFunction:
    """phi = f0 * A^{-1} h sampled on the grid nodes, as a table function."""
    grid = SpaceGrid(l, M)
    p = expr(p_src, "x")
    q = expr(q_src, "x")
    h = expr(h_src, "x")
    op = assemble_operator(sample_function(p, grid.half_nodes),
                           sample_function(q, grid.interior), grid)
    phi_int = f0 * solve_tridiagonal(op, sample_function(h, grid.interior))
    vals = np.zeros(M + 2)
    vals[1:-1] = phi_int
    return TabulatedFunction(grid.nodes, vals, label="phi_equilibrium")


def balanced_inverse_instance(f_src="1 + t^2", alpha=0.5, M=300, K=2000,
                              N=24, T=1.0, eps=0.0, seed=0):
    """Direct-mode instance for round trips: phi balances the source at t=0."""
    f = expr(f_src, "t")
    phi = equilibrium_phi(l=1.0, M=M, f0=float(f(0.0)))
    return ProblemSpec(
        alpha=alpha, l=1.0, T=T,
        p=expr("1 + x/2", "x"), q=expr("x", "x"),
        phi=phi, h=expr("sin(pi*x)", "x"),
        f=f, M=M, K=K, N=N, eps=eps, seed=seed)


def to_inverse(spec: ProblemSpec, g_series) -> ProblemSpec:
    """Clone a direct-mode spec into inverse mode with a tabulated observation."""
    from dataclasses import replace

    g_fun = TabulatedFunction(g_series.grid.nodes, g_series.values, label="g_synth")
    return replace(spec, f=None, g=g_fun)


@pytest.fixture(scope="session")
def laplace_basis():
    """p=1, q=0 on [0, pi]: eigenpairs are n^2, sqrt(2/pi) sin(n x)."""
    from fracsource.sturm_liouville import solve_eigs

    grid = SpaceGrid(np.pi, 2000)
    op = assemble_operator(np.ones(grid.M + 1), np.zeros(grid.M), grid)
    return grid, solve_eigs(op, 10)


@pytest.fixture(scope="session")
def variable_workspace():
    """Workspace of the standard variable-coefficient instance (M=200, N=32)."""
    spec = variable_instance()
    return spec, build_workspace(spec)
