"""Synthetic data, an independent fully discrete oracle, and invariant checks.

The oracle discretizes the PDE directly (L1 stepping in time, conservative
second-order differences in space, implicit elliptic part) and deliberately
shares no solver code with the spectral path: its stencil assembly and
tridiagonal solve are written out here so the two routes only agree if both
are right. Noise is multiplicative uniform, drawn from numpy's seeded PCG64
generator (``default_rng(seed)``, one ``uniform(-1, 1, K+1)`` array), so a
dataset is reproducible from the (seed, generator) pair alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .direct_solver import ProblemSpec, observe, sample_function, solve
from .frac_calc import TimeGrid, TimeSeries, caputo_l1
from .mittag_leffler import ml_array
from .sturm_liouville import energy_form
from .inverse_solver import compatibility_tolerance

__all__ = [
    "SynthDataset",
    "ErrorReport",
    "InvariantCheck",
    "InvariantReport",
    "synthesize",
    "oracle_l1_fd",
    "compare",
    "rel_linf",
    "verify_invariants",
]


@dataclass(frozen=True)
class SynthDataset:
    spec: ProblemSpec
    g_exact: TimeSeries
    g_noisy: TimeSeries
    f_true: TimeSeries
    eps: float
    seed: int


def synthesize(spec: ProblemSpec, eps: Optional[float] = None,
               seed: Optional[int] = None, strict: bool = True) -> SynthDataset:
    """Forward map: g = observe(solve_direct(spec)), then multiplicative noise
    g_noisy = g * (1 + eps * xi) with xi ~ U[-1, 1] i.i.d. from the seeded
    generator. eps = 0 reproduces g bit for bit."""
    if eps is None:
        eps = spec.eps
    if seed is None:
        seed = spec.seed
    ws, sol, g = solve(spec, strict=strict)
    xi = np.random.default_rng(seed).uniform(-1.0, 1.0, spec.K + 1)
    noisy = g.values * (1.0 + eps * xi)
    f_true = TimeSeries.sample(spec.f, spec.time_grid)
    return SynthDataset(spec, g, TimeSeries(g.grid, noisy), f_true, eps, seed)


def oracle_l1_fd(spec: ProblemSpec, M: Optional[int] = None,
                 K: Optional[int] = None) -> np.ndarray:
    """Fully discrete reference solution, shape (K+1, M+2).

    L1 Caputo stepping with an implicit elliptic part: every step solves
    (mu I + A) u^k = mu * history + f(t_k) h, where A is the flux-form
    stencil assembled locally and the tridiagonal solve is a plain Thomas
    sweep. Unconditionally stable for p > 0, q >= 0.
    """
    if spec.f is None:
        raise ValueError("oracle needs a direct-mode spec (f present)")
    M = spec.M if M is None else M
    K = spec.K if K is None else K
    alpha = spec.alpha
    dx = spec.l / (M + 1)
    tau = spec.T / K
    x = np.linspace(0.0, spec.l, M + 2)
    xh = (np.arange(M + 1) + 0.5) * dx
    p_half = sample_function(spec.p, xh)
    q_int = sample_function(spec.q, x[1:-1])
    assert np.all(p_half > 0) and np.all(q_int >= 0), "oracle requires p>0, q>=0"
    diag = (p_half[:-1] + p_half[1:]) / dx ** 2 + q_int
    lower = -p_half[1:-1] / dx ** 2
    h_int = sample_function(spec.h, x[1:-1])
    t = np.linspace(0.0, spec.T, K + 1)
    f_t = sample_function(spec.f, t)
    mu = 1.0 / (tau ** alpha * math.gamma(2.0 - alpha))
    j = np.arange(K + 1, dtype=float)
    b = j[1:] ** (1.0 - alpha) - j[:-1] ** (1.0 - alpha)

    U = np.zeros((K + 1, M + 2))
    U[0] = sample_function(spec.phi, x)
    # Thomas factorization of (mu I + A), reused every step
    a_diag = diag + mu
    cp = np.empty(M - 1)
    dp_diag = np.empty(M)
    dp_diag[0] = a_diag[0]
    for i in range(1, M):
        cp[i - 1] = lower[i - 1] / dp_diag[i - 1]
        dp_diag[i] = a_diag[i] - cp[i - 1] * lower[i - 1]

    for k in range(1, K + 1):
        hist = b[k - 1] * U[0, 1:-1]
        if k >= 2:
            w = b[: k - 1] - b[1:k]
            hist = hist + w @ U[k - 1:0:-1, 1:-1]
        rhs = mu * hist + f_t[k] * h_int
        # forward elimination / back substitution
        y = rhs.copy()
        for i in range(1, M):
            y[i] -= cp[i - 1] * y[i - 1]
        u = np.empty(M)
        u[-1] = y[-1] / dp_diag[-1]
        for i in range(M - 2, -1, -1):
            u[i] = (y[i] - lower[i] * u[i + 1]) / dp_diag[i]
        U[k, 1:-1] = u
    return U


@dataclass(frozen=True)
class ErrorReport:
    linf_abs: float
    linf_rel: float
    l2_rel: float
    per_node: np.ndarray

    def __str__(self):
        return (f"Linf abs {self.linf_abs:.3e}, Linf rel {self.linf_rel:.3e}, "
                f"L2 rel {self.l2_rel:.3e}")


def compare(truth: TimeSeries, estimate: TimeSeries) -> ErrorReport:
    """Error metrics between two series on the same grid.

    Pointwise relative errors use max(|truth|, 1e-12) denominators.
    """
    if truth.grid != estimate.grid:
        raise ValueError("series live on different grids")
    d = estimate.values - truth.values
    denom = np.maximum(np.abs(truth.values), 1e-12)
    per_node = np.abs(d) / denom
    l2_rel = float(np.linalg.norm(d) / max(np.linalg.norm(truth.values), 1e-12))
    return ErrorReport(float(np.abs(d).max()), float(per_node.max()), l2_rel, per_node)


def rel_linf(truth: np.ndarray, estimate: np.ndarray) -> float:
    """Global relative sup-norm: max|diff| / max|truth| (fields and series)."""
    truth = np.asarray(truth, float)
    denom = max(float(np.abs(truth).max()), 1e-12)
    return float(np.abs(np.asarray(estimate, float) - truth).max()) / denom


# ---------------------------------------------------------------------------
# invariant suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantCheck:
    name: str
    measured: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class InvariantReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> InvariantCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _dirichlet_laplacian_eigenvalues(grid, n_modes):
    """Exact eigenvalues of the discrete second-difference operator."""
    n = np.arange(1, n_modes + 1)
    return (4.0 / grid.dx ** 2) * np.sin(n * math.pi * grid.dx / (2.0 * grid.l)) ** 2


def verify_invariants(spec: ProblemSpec, ml_alphas=(0.25, 0.5, 0.75)) -> InvariantReport:
    """Run the full invariant checklist; failures are report rows, not errors.

    Covers: data hypotheses, orthonormality, eigenvalue positivity and
    quadratic growth (sandwiched by the constant-coefficient extremes of p
    and q), the energy identity, the energy-bounded partial sums, Parseval
    positivity and convergence, Mittag-Leffler bounds and monotonicity, the
    Caputo-of-convolution identity, and (when data permit) the t=0
    compatibility defect.
    """
    checks = []

    def add(name, measured, bound, ok):
        checks.append(InvariantCheck(name, float(measured), float(bound), bool(ok)))

    grid = spec.space_grid
    p_half = sample_function(spec.p, grid.half_nodes)
    p_nodes = sample_function(spec.p, grid.nodes)
    q_nodes = sample_function(spec.q, grid.nodes)
    q_int = sample_function(spec.q, grid.interior)
    phi_s = sample_function(spec.phi, grid.nodes)
    h_s = sample_function(spec.h, grid.nodes)

    pmin = float(min(p_half.min(), p_nodes.min()))
    add("coefficient_p_positive", pmin, 0.0, pmin > 0.0)
    qmin = float(min(q_int.min(), q_nodes.min()))
    add("coefficient_q_nonnegative", qmin, 0.0, qmin >= 0.0)
    bphi = max(abs(float(spec.phi(0.0))), abs(float(spec.phi(spec.l))))
    add("phi_vanishes_at_boundary", bphi, 1e-10, bphi <= 1e-10)
    bh = max(abs(float(spec.h(0.0))), abs(float(spec.h(spec.l))))
    add("h_vanishes_at_boundary", bh, 1e-10, bh <= 1e-10)
    phi_ok = bphi <= 1e-10
    h_ok = bh <= 1e-10

    spectral_ok = pmin > 0.0
    if spectral_ok:
        from .sturm_liouville import assemble_operator, solve_eigs, project

        operator = assemble_operator(p_half, q_int, grid, check=False)
        N = spec.N if spec.N is not None else min(32, grid.M)
        basis = solve_eigs(operator, min(N, grid.M))
        lam = basis.eigenvalues

        add("eigenvalues_positive", float(lam.min()), 0.0, float(lam.min()) > 0.0)
        gaps = float(np.diff(lam).min()) if len(lam) > 1 else 1.0
        add("eigenvalues_increasing", gaps, 0.0, gaps > 0.0)
        add("orthonormality_defect", basis.orthonormality_defect(), 1e-10,
            basis.orthonormality_defect() <= 1e-10)

        # quadratic growth, sandwiched by constant-coefficient comparisons:
        # the discrete quadratic form is monotone in p and q, so
        # p_min mu_n + q_min <= lam_n <= p_max mu_n + q_max exactly
        mu = _dirichlet_laplacian_eigenvalues(grid, basis.N)
        lo = p_half.min() * mu + q_int.min()
        hi = p_half.max() * mu + q_int.max()
        sandwich = float(np.max(np.maximum(lo - lam, lam - hi) / np.maximum(lam, 1.0)))
        add("eigenvalue_growth_sandwich", sandwich, 1e-10, sandwich <= 1e-10)
        ratios = lam / (np.arange(1, basis.N + 1) ** 2)
        add("eigenvalue_growth_ratio_positive", float(ratios.min()), 0.0,
            float(ratios.min()) > 0.0)

        # energy identity for every computed mode; the central-difference
        # quadrature recovers lam_n at O((n dx)^2), so normalize per mode
        rq = np.asarray([energy_form(basis.sampled(n), p_nodes, q_nodes, grid)
                         for n in range(basis.N)])
        mode_tol = 1e-3 + 2.0 * (np.arange(1, basis.N + 1) * math.pi * grid.dx
                                 / (2.0 * grid.l)) ** 2
        rq_err = float((np.abs(rq - lam) / lam / mode_tol).max())
        add("energy_identity", rq_err, 1.0, rq_err <= 1.0)

        # energy-bounded, monotone partial sums for both data functions
        # (the energy functional requires vanishing boundary samples, so
        # these rows only run for data that passed the boundary check)
        admissible = []
        if phi_ok:
            admissible.append(("phi", phi_s))
        if h_ok:
            admissible.append(("h", h_s))
        for name, s in admissible:
            cn = project(s, basis)
            terms = lam * cn ** 2
            partial = np.cumsum(terms)
            energy = energy_form(s, p_nodes, q_nodes, grid)
            # slack for the O(dx^2) central-vs-flux quadrature gap
            slack = 1e-3 * max(energy, 1.0)
            add(f"energy_bound_{name}", float(partial[-1]), energy,
                float(partial[-1]) <= energy + slack)
            mono = float(terms.min())
            add(f"partial_sums_monotone_{name}", mono, 0.0, mono >= 0.0)

        hn = project(h_s, basis)
        H = float(hn @ hn)
        add("profile_mass_positive", H, 0.0, H > 0.0)
        if h_ok:
            norm_sq = grid.inner(h_s, h_s)
            e_h = energy_form(h_s, p_nodes, q_nodes, grid)
            tail = max(e_h - float(lam @ hn ** 2), 0.0)
            # the energy residual carries an O(dx^2) quadrature bias, so pad
            # the tail estimate before bounding the plain sum with it
            tail_bound = (tail + 1e-3 * max(e_h, 1.0)) / float(lam[-1]) \
                + 1e-10 * max(norm_sq, 1.0)
            add("parseval_convergence", abs(norm_sq - H), tail_bound,
                abs(norm_sq - H) <= tail_bound)

    # Mittag-Leffler bounds and monotonicity on a log-spaced grid
    ts = np.logspace(-2, 2, 60)
    for a in ml_alphas:
        e1 = ml_array(a, 1.0, -ts)
        inside = float(min(e1.min(), 1.0 - e1.max()))
        add(f"ml_relax_in_unit_interval_a{a}", inside, 0.0, inside > 0.0)
        slopes = np.diff(e1) / np.diff(ts)
        add(f"ml_relax_decreasing_a{a}", float(slopes.max()), 0.0,
            float(slopes.max()) <= 0.0)
        convex = float(np.diff(slopes).min())
        add(f"ml_relax_convex_a{a}", convex, 0.0, convex >= -1e-12)
        eaa = ml_array(a, a, -ts)
        top = 1.0 / math.gamma(a)
        ok = float(min(eaa.min(), top - eaa.max()))
        add(f"ml_kernel_bounds_a{a}", ok, 0.0, ok >= -1e-12)
        add(f"ml_kernel_decreasing_a{a}", float(np.diff(eaa).max()), 0.0,
            float(np.diff(eaa).max()) <= 0.0)

    # Caputo of the convolution: D^a conv[eta] = eta - lam * conv[eta]
    ident = _convolution_identity_error(spec.alpha)
    add("caputo_convolution_identity", ident, 1e-2, ident <= 1e-2)

    # compatibility defect when both phi/h projections and g(0) are available
    if spectral_ok and phi_ok and h_ok and (spec.g is not None or spec.f is not None):
        if spec.g is not None:
            g0 = float(spec.g(0.0))
        else:
            import warnings as _warnings

            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore")
                ds = synthesize(spec, eps=0.0, strict=False)
            g0 = float(ds.g_exact.values[0])
        phin = project(phi_s, basis)
        defect = abs(float(hn @ phin) - g0)
        tol = compatibility_tolerance(spec.eps, g0)
        add("compatibility_defect", defect, tol, defect <= tol)

    return InvariantReport(checks)


def _convolution_identity_error(alpha: float, lams=(0.0, 1.0, 10.0),
                                K: int = 2000, T: float = 1.0) -> float:
    """Discrete check that the Caputo derivative undoes the singular
    convolution: D^a int eta(s) (t-s)^(a-1) E_{a,a}(-lam (t-s)^a) ds
    = eta - lam * conv. Measured for t >= 0.1 T: the L1 scheme carries an
    O(1) startup error on the t^a layer that the identity itself creates.
    """
    from .direct_solver import convolution_weights, _convolve_panels, _panel_averages

    grid = TimeGrid(T, K)
    t = grid.nodes
    eta = 1.0 + t
    worst = 0.0
    cut = int(0.1 * K)
    for lam in lams:
        w = convolution_weights(lam, alpha, grid)
        conv = _convolve_panels(w, _panel_averages(eta))
        lhs = caputo_l1(TimeSeries(grid, conv), alpha).values
        rhs = eta - lam * conv
        worst = max(worst, float(np.abs(lhs - rhs)[cut:].max()))
    return worst
