"""Lowest eigenpairs, spectral gaps, and per-lemma diagnostics.

The eigensolver is a hand-rolled Lanczos iteration with full
reorthogonalization (DGKS-refined), a min-diagonal shift, and explicit
final residuals; a dense-eigendecomposition oracle is provided for
cross-checks on small instances. On top of it sit the diagnostics that
exercise the localization machinery: the discrete IMS identity, Gaussian
concentration, Dikin-ball form sandwiches, ground-state overlaps, and the
spectral-gap sweep against the harmonic reference bounds.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import eigh_tridiagonal

from .barrier import Barrier, quadratic_potential
from .errors import (
    DegenerateGapError,
    NonConvergenceError,
    PreconditionError,
)
from .operator import (
    DEFAULT_NODE_CAP,
    KINETIC_MULTIPLIER,
    BumpPair,
    DiscreteOperator,
    Grid,
    bump_pair,
    build_euclidean,
    build_riemannian,
    default_grid,
    gaussian_ground_state,
    _riemannian_kinetic,
)

MAX_KRYLOV_DIM = 5000
MAX_PAIRS = 8
_BASIS_BUDGET = 125_000_000  # floats; caps Krylov basis memory at ~1 GB


@dataclass
class SpectrumResult:
    """Converged lowest eigenpairs of a symmetric operator.

    ground_state is the first column of vectors: unit norm in l2, which is
    the weighted norm of the physical state for similarity-symmetrized
    operators; its largest-magnitude entry is made positive.
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    ground_state: np.ndarray
    degeneracy_tol: float
    vectors: np.ndarray
    iterations: int
    converged: bool


def _as_matrix(op):
    if isinstance(op, DiscreteOperator):
        return op.matrix
    if sparse.issparse(op):
        return op.tocsr()
    return sparse.csr_matrix(np.atleast_2d(np.asarray(op, dtype=float)))


def _sign_fix(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _ritz(alphas, betas, k):
    if len(alphas) == 1:
        return np.array([alphas[0]]), np.ones((1, 1))
    kk = min(k, len(alphas))
    return eigh_tridiagonal(np.asarray(alphas), np.asarray(betas),
                            select="i", select_range=(0, kk - 1))


def lowest_eigenpairs(op, k: int = 2, tol: float = 1e-8,
                      max_dim: int = MAX_KRYLOV_DIM, seed: int = 0,
                      v0: Optional[np.ndarray] = None,
                      check_every: int = 8) -> SpectrumResult:
    """Lanczos with full reorthogonalization for the k lowest eigenpairs.

    The iteration runs on A - shift*I with shift = min diagonal and stops
    when every Ritz residual estimate is at or below tol * |lambda| and the
    explicitly recomputed residuals confirm it. Exhausting the space (m = n)
    is exact and accepted; hitting max_dim first raises NonConvergenceError
    carrying the best residuals.
    """
    A = _as_matrix(op)
    n = A.shape[0]
    if not 1 <= k <= MAX_PAIRS:
        raise PreconditionError(f"k={k} outside 1..{MAX_PAIRS}")
    k = min(k, n)
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    shift = float(A.diagonal().min())
    mmax = min(max_dim, n, max(_BASIS_BUDGET // max(n, 1), k + 2))

    rng = np.random.default_rng(seed)
    if v0 is not None:
        v = np.asarray(v0, dtype=float).copy()
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            raise PreconditionError("v0 has zero norm")
        v /= nv
    else:
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)

    V = np.zeros((min(mmax, 128), n))
    V[0] = v
    alphas: list = []
    betas: list = []
    theta = S = None
    scale = 1.0
    cooldown = 0  # acceptance freeze after a breakdown restart
    j = 0
    while True:
        w = A @ V[j] - shift * V[j]
        a = float(V[j] @ w)
        alphas.append(a)
        w -= a * V[j]
        if j > 0:
            w -= betas[-1] * V[j - 1]
        # full reorthogonalization with DGKS refinement
        before = np.linalg.norm(w)
        w -= V[: j + 1].T @ (V[: j + 1] @ w)
        after = np.linalg.norm(w)
        if after < 0.5 * before:
            w -= V[: j + 1].T @ (V[: j + 1] @ w)
            after = np.linalg.norm(w)
        beta = after
        m = j + 1
        scale = max(scale, abs(a), beta)

        exhausted = m == n
        at_cap = m == mmax
        # a vanishing beta means the Krylov space hit an invariant subspace;
        # a second eigenvalue copy may be hiding in the orthogonal complement
        breakdown = beta <= 1e-13 * scale
        check = (m >= k and (m % check_every == 0 or exhausted or at_cap
                             or breakdown))
        done = False
        if check:
            theta, S = _ritz(alphas, betas, k)
            lam = theta + shift
            floor = np.maximum(np.abs(lam), 1e-12)
            est = beta * np.abs(S[-1, :])
            may_accept = (cooldown == 0 and not breakdown
                          and np.all(est <= 0.5 * tol * floor))
            if may_accept or exhausted:
                X = V[:m].T @ S
                res = np.linalg.norm(A @ X - X * lam[None, :], axis=0)
                done = bool(np.all(res <= tol * floor)) or exhausted
        if done:
            break
        if at_cap:
            theta, S = _ritz(alphas, betas, k)
            X = V[:m].T @ S
            lam = theta + shift
            res = np.linalg.norm(A @ X - X * lam[None, :], axis=0)
            raise NonConvergenceError(
                f"Lanczos hit max dimension {mmax} with residuals {res}",
                residuals=res)
        if breakdown:
            w = rng.standard_normal(n)
            w -= V[:m].T @ (V[:m] @ w)
            w /= np.linalg.norm(w)
            t_entry = 0.0  # no true coupling into the new Krylov block
            cooldown = check_every
        else:
            w = w / beta
            t_entry = beta
            cooldown = max(cooldown - 1, 0)
        if m == V.shape[0]:
            V = np.vstack([V, np.zeros((min(mmax, 2 * m) - m, n))])
        V[m] = w
        betas.append(t_entry)
        j += 1

    lam = theta + shift
    X = V[: len(alphas)].T @ S
    # re-normalize and sign-fix deterministically
    X /= np.linalg.norm(X, axis=0, keepdims=True)
    for col in range(X.shape[1]):
        X[:, col] = _sign_fix(X[:, col])
    res = np.linalg.norm(A @ X - X * lam[None, :], axis=0)
    order = np.argsort(lam)
    lam = lam[order]
    X = X[:, order]
    res = res[order]
    dtol = 1e-8 * max(1.0, abs(float(lam[0])))
    return SpectrumResult(eigenvalues=lam, residuals=res,
                          ground_state=X[:, 0].copy(), degeneracy_tol=dtol,
                          vectors=X, iterations=len(alphas), converged=True)


def dense_lowest_eigenpairs(op, k: int = 2) -> SpectrumResult:
    """Dense-eigendecomposition oracle for small instances (<= a few
    thousand nodes); used to cross-check the Lanczos path."""
    A = _as_matrix(op).toarray()
    lam, U = np.linalg.eigh(A)
    k = min(k, A.shape[0])
    X = U[:, :k].copy()
    for col in range(k):
        X[:, col] = _sign_fix(X[:, col])
    res = np.linalg.norm(A @ X - X * lam[None, :k], axis=0)
    dtol = 1e-8 * max(1.0, abs(float(lam[0])))
    return SpectrumResult(eigenvalues=lam[:k].copy(), residuals=res,
                          ground_state=X[:, 0].copy(), degeneracy_tol=dtol,
                          vectors=X, iterations=A.shape[0], converged=True)


def spectral_gap(s: SpectrumResult) -> float:
    if s.eigenvalues.size < 2:
        raise PreconditionError("need at least two converged eigenvalues")
    gap = float(s.eigenvalues[1] - s.eigenvalues[0])
    if gap <= s.degeneracy_tol:
        raise DegenerateGapError(
            f"gap {gap:.3e} is below the degeneracy tolerance "
            f"{s.degeneracy_tol:.3e}; the ground state looks degenerate")
    return gap


def harmonic_reference(A, gamma: float):
    """Analytic (lambda0, lambda1, gap) of mult*(-Delta) + gamma^2 q, q the
    quadratic form of SPD A, with the 1/2 kinetic convention."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    if np.min(ev) <= 0:
        raise PreconditionError("harmonic reference needs SPD A")
    w = np.sqrt(ev)
    gamma = float(gamma)
    lam0 = 0.5 * gamma * float(np.sum(w))
    gap = gamma * float(np.min(w))
    return lam0, lam0 + gap, gap


# ---------------------------------------------------------------------------
# IMS identity
# ---------------------------------------------------------------------------

def _double_commutator(diag_vals: np.ndarray, M: sparse.csr_matrix):
    """[D,[D,M]] for diagonal D: entrywise (d_i - d_j)^2 M_ij."""
    C = M.tocoo()
    d = diag_vals[C.row] - diag_vals[C.col]
    return sparse.coo_matrix((C.data * d * d, (C.row, C.col)),
                             shape=M.shape).tocsr()


@dataclass
class IMSReport:
    exact_residual: float
    continuum_discrepancy: float
    refined_discrepancy: Optional[float]
    decay_factor: Optional[float]
    passed_exact: bool


def _default_probes(grid: Grid):
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    z = grid.center()
    widths = grid.hi - grid.lo
    r2 = sum(((m - z[d]) / (0.25 * widths[d])) ** 2
             for d, m in enumerate(mesh))
    gauss = np.exp(-0.5 * r2).ravel()
    sine = np.ones(grid.npts)
    for d, m in enumerate(mesh):
        sine = sine * np.sin(np.pi * (m - grid.lo[d]) / widths[d])
    return [np.ones(grid.size), gauss, sine.ravel()]


def _grad_square_dual(op: DiscreteOperator, bump: BumpPair):
    """|grad J|^2 + |grad Jbar|^2 per node, in the metric dual norm for
    Riemannian operators and the Euclidean norm otherwise."""
    if op.kind == "riemannian":
        b = op.meta.get("barrier_obj")
        if b is None:
            raise PreconditionError(
                "Riemannian operator lacks its barrier; cannot form the "
                "dual-metric gradient norms")
        X = op.grid.nodes()
        H = b.hessian_many(X) if b.hessian_many is not None else \
            np.stack([b.hessian(x) for x in X])
        Hinv = np.linalg.inv(H)
        gj = np.einsum("ki,kij,kj->k", bump.grad_J, Hinv, bump.grad_J)
        gjb = np.einsum("ki,kij,kj->k", bump.grad_Jbar, Hinv, bump.grad_Jbar)
        return gj + gjb
    return (np.sum(bump.grad_J**2, axis=1)
            + np.sum(bump.grad_Jbar**2, axis=1))


def ims_identity_check(op: DiscreteOperator, bump: BumpPair,
                       refined: Optional[tuple] = None,
                       probes: Optional[Sequence[np.ndarray]] = None) -> IMSReport:
    """Two-tier IMS localization check.

    Tier (a), exact: J H J + Jbar H Jbar - H = -1/2([J,[J,H]] + [Jb,[Jb,H]])
    holds to 1e-12 as sparse matrices whenever J^2 + Jbar^2 = 1 (diagonal
    localizers). Tier (b), continuum: that correction approaches the
    diagonal mult*(|grad J|^2 + |grad Jbar|^2); the discrepancy is measured
    by the worst action error on smooth probe vectors (the difference does
    not vanish in plain matrix norm on the highest grid modes), and halving
    h should shrink it by about 4. Pass refined=(op2, bump2) on the doubled
    grid to get the decay factor.
    """
    J, Jb = bump.J, bump.Jbar
    if np.max(np.abs(J * J + Jb * Jb - 1.0)) > 1e-12:
        raise PreconditionError("bump pair violates J^2 + Jbar^2 = 1")
    H = op.matrix
    DJ = sparse.diags(J)
    DJb = sparse.diags(Jb)
    lhs = DJ @ H @ DJ + DJb @ H @ DJb - H
    rhs = -0.5 * (_double_commutator(J, H) + _double_commutator(Jb, H))
    diff = (lhs - rhs).tocoo()
    scale = max(1.0, float(np.max(np.abs(H.data))))
    exact_residual = 0.0 if diff.nnz == 0 else float(np.max(np.abs(diff.data))) / scale

    mult = float(op.meta.get("kinetic_multiplier", KINETIC_MULTIPLIER))
    target = mult * _grad_square_dual(op, bump)
    if probes is None:
        probes = _default_probes(op.grid)
    disc = 0.0
    for u in probes:
        err = lhs @ u - target * u
        disc = max(disc, float(np.max(np.abs(err)) / max(np.max(np.abs(u)), 1e-300)))

    refined_disc = decay = None
    if refined is not None:
        op2, bump2 = refined
        sub = ims_identity_check(op2, bump2)
        refined_disc = sub.continuum_discrepancy
        decay = disc / refined_disc if refined_disc > 0 else np.inf
    return IMSReport(exact_residual=exact_residual,
                     continuum_discrepancy=disc,
                     refined_discrepancy=refined_disc,
                     decay_factor=decay,
                     passed_exact=exact_residual <= 1e-12)


# ---------------------------------------------------------------------------
# concentration and Dikin sandwiches
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    mass: float
    bound: float
    t: float
    c0: float
    sigma_max: float
    truncated: bool
    passed: bool


def concentration_check(A, z, gamma: float, bump: BumpPair, grid: Grid,
                        t: Optional[float] = None, c0: float = 0.125,
                        weight: Optional[np.ndarray] = None) -> ConcentrationReport:
    """Mass of the reference Gaussian outside the bump plateau.

    Computes |Jbar psi0|^2 and compares against 2 exp(-c0 t n) with the
    concentration exponent c0 as a knob. Default t saturates the
    precondition gamma >= (t n sqrt(|A|))^5.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    gamma = float(gamma)
    n = A.shape[0]
    anorm = float(np.linalg.norm(A, 2))
    if t is None:
        t = gamma ** 0.2 / (n * np.sqrt(anorm))
    if gamma < (t * n * np.sqrt(anorm)) ** 5 - 1e-9:
        raise PreconditionError(
            f"gamma={gamma} below (t n sqrt|A|)^5 = {(t*n*np.sqrt(anorm))**5:.4g}")
    psi0 = gaussian_ground_state(A, z, gamma, grid, weight=weight)
    w = np.ones(grid.size) if weight is None else np.asarray(weight, dtype=float)
    mass = float(np.sum((bump.Jbar * psi0) ** 2 * w) * grid.cell_volume)
    bound = 2.0 * np.exp(-c0 * t * n)

    lam_min_sqrtA = float(np.min(np.sqrt(np.linalg.eigvalsh(A))))
    sigma_max = (2.0 * gamma * lam_min_sqrtA) ** -0.5
    z = np.atleast_1d(np.asarray(z, dtype=float))
    margin = np.minimum(z - grid.lo, grid.hi - z)
    truncated = bool(np.any(margin < 8.0 * sigma_max))
    if truncated:
        warnings.warn("grid does not contain the 8-sigma ball; the reported "
                      "mass may be truncation-limited", stacklevel=2)
    return ConcentrationReport(mass=mass, bound=bound, t=float(t), c0=c0,
                               sigma_max=sigma_max, truncated=truncated,
                               passed=mass <= bound)


@dataclass
class DikinFormRow:
    mass_flat: float
    mass_riem: float
    energy_flat: float
    energy_riem: float
    mass_inside: bool
    energy_inside: bool


@dataclass
class DikinFormReport:
    radius: float
    bracket_radius: float
    rows: list
    passed: bool


def _dilate_mask(mask: np.ndarray, shape) -> np.ndarray:
    M = mask.reshape(shape)
    out = M.copy()
    for d in range(M.ndim):
        sl_lo = [slice(None)] * M.ndim
        sl_hi = [slice(None)] * M.ndim
        sl_lo[d] = slice(0, -1)
        sl_hi[d] = slice(1, None)
        out[tuple(sl_lo)] |= M[tuple(sl_hi)]
        out[tuple(sl_hi)] |= M[tuple(sl_lo)]
    return out.ravel()


def dikin_form_comparison(b: Barrier, z, r: float, test_functions,
                          grid: Optional[Grid] = None, npts: int = 121,
                          slack: float = 1e-7) -> DikinFormReport:
    """Mass and Dirichlet-form sandwiches over a Dikin ball of radius r.

    For functions supported in {|x - z|_{g_z} <= r}, the Riemannian forms
    (metric g = Hess f) must sit inside the (1-r)^{+-n} bracket around the
    frozen-metric forms at z, with exponent n+2 for the energy form. The
    bracket is evaluated at the covering radius of the support plus its
    one-cell fringe, which is the honest discrete analogue.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not 0 < r < 1:
        raise PreconditionError(f"radius r={r} outside (0, 1)")
    gz = b.hessian(z)
    lam_min = float(np.min(np.linalg.eigvalsh(gz)))
    if grid is None:
        half = 1.05 * r / np.sqrt(lam_min)
        lo, hi = z - half, z + half
        if b.sample_box is not None and b.facets is not None:
            dlo, dhi = (np.asarray(a, float) for a in b.sample_box)
            m = 1e-6 * (dhi - dlo)
            lo = np.maximum(lo, dlo + m)
            hi = np.minimum(hi, dhi - m)
        grid = Grid(lo=lo, hi=hi, npts=(npts,) * b.dim)
    nodes = grid.nodes()
    Y = nodes - z[None, :]
    rz = np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", Y, gz, Y), 0.0))

    K_riem, w_riem = _riemannian_kinetic(b, grid)
    flat = quadratic_potential(gz, center=z)
    K_flat, w_flat = _riemannian_kinetic(flat, grid)
    n = b.dim
    vol = grid.cell_volume

    rows = []
    all_pass = True
    bracket_r_used = r
    for psi in test_functions:
        v = psi(nodes) if callable(psi) else np.asarray(psi, dtype=float)
        v = v.ravel()
        supp = np.abs(v) > 1e-14 * max(np.max(np.abs(v)), 1e-300)
        if np.any(supp & (rz > r)):
            raise PreconditionError(
                "test function support leaks outside the Dikin ball "
                f"(max radius {np.max(rz[supp]):.4f} > r = {r})")
        fringe = _dilate_mask(supp, grid.npts)
        rb = max(r, float(np.max(rz[fringe], initial=0.0)))
        if rb >= 1.0:
            raise PreconditionError(
                "support fringe reaches the unit Dikin sphere; shrink r")
        bracket_r_used = max(bracket_r_used, rb)

        m_flat = float(np.sum(v * v * w_flat) * vol)
        m_riem = float(np.sum(v * v * w_riem) * vol)
        e_flat = float(v @ (K_flat @ v)) * vol
        e_riem = float(v @ (K_riem @ v)) * vol

        lo_m = ((1 - rb) ** n - 1.0) * m_flat
        hi_m = ((1 - rb) ** -n - 1.0) * m_flat
        s_m = slack * max(m_flat, 1.0)
        mass_ok = lo_m - s_m <= m_riem - m_flat <= hi_m + s_m

        lo_e = ((1 - rb) ** (n + 2) - 1.0) * e_flat
        hi_e = ((1 - rb) ** -(n + 2) - 1.0) * e_flat
        s_e = slack * max(e_flat, 1.0)
        energy_ok = lo_e - s_e <= e_riem - e_flat <= hi_e + s_e

        rows.append(DikinFormRow(mass_flat=m_flat, mass_riem=m_riem,
                                 energy_flat=e_flat, energy_riem=e_riem,
                                 mass_inside=bool(mass_ok),
                                 energy_inside=bool(energy_ok)))
        all_pass &= bool(mass_ok and energy_ok)
    return DikinFormReport(radius=r, bracket_radius=bracket_r_used,
                           rows=rows, passed=all_pass)


# ---------------------------------------------------------------------------
# ground-state overlap
# ---------------------------------------------------------------------------

def physical_state(op: DiscreteOperator, v: np.ndarray) -> np.ndarray:
    """Convert a matrix eigenvector to function values on the nodes."""
    w = np.ones(op.grid.size) if op.weight is None else op.weight
    return v / np.sqrt(w * op.grid.cell_volume)


def weighted_overlap(op: DiscreteOperator, v_matrix: np.ndarray,
                     func_vals: np.ndarray) -> float:
    """|<v, u>| where v is a unit matrix eigenvector and u are function
    values, compared in the operator's (weighted) inner product."""
    w = np.ones(op.grid.size) if op.weight is None else op.weight
    u = func_vals * np.sqrt(w * op.grid.cell_volume)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise PreconditionError("zero comparison state")
    return float(abs(v_matrix @ u) / nu)


@dataclass
class OverlapReport:
    overlap: float
    lambda0: float
    lambda0_ref: float
    mode: str


def ground_overlap_check(opH: DiscreteOperator, opH0: DiscreteOperator,
                         bump: Optional[BumpPair] = None,
                         mode: str = "euclidean", tol: float = 1e-8,
                         seed: int = 0) -> OverlapReport:
    """|<psi, psi0>| (Euclidean) or |<psi, J psi0 / |J psi0|>|_R (Riemannian).

    psi is the computed ground state of opH and psi0 that of the reference
    opH0; both eigensolves run at the given tolerance and failures
    propagate. Grids must coincide.
    """
    if opH.grid.npts != opH0.grid.npts or \
            not np.allclose(opH.grid.lo, opH0.grid.lo) or \
            not np.allclose(opH.grid.hi, opH0.grid.hi):
        raise PreconditionError("operators live on different grids")
    sH = lowest_eigenpairs(opH, k=1, tol=tol, seed=seed)
    sH0 = lowest_eigenpairs(opH0, k=1, tol=tol, seed=seed)
    psi0_vals = physical_state(opH0, sH0.ground_state)
    if mode == "riemannian":
        if bump is None:
            raise PreconditionError("Riemannian overlap needs the bump pair")
        cmp_vals = bump.J * psi0_vals
    elif mode == "euclidean":
        cmp_vals = psi0_vals
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    ov = weighted_overlap(opH, sH.ground_state, cmp_vals)
    return OverlapReport(overlap=ov, lambda0=float(sH.eigenvalues[0]),
                         lambda0_ref=float(sH0.eigenvalues[0]), mode=mode)


# ---------------------------------------------------------------------------
# gap experiment
# ---------------------------------------------------------------------------

@dataclass
class GridPolicy:
    npts: int = 1000
    pad_sigma: float = 8.0
    pad_bump: float = 2.5
    node_cap: int = DEFAULT_NODE_CAP
    tol: float = 1e-8
    max_dim: int = MAX_KRYLOV_DIM
    kinetic_multiplier: float = KINETIC_MULTIPLIER


@dataclass
class GapRow:
    gamma: float
    lambda0: float
    lambda1: float
    gap: float
    lambda0_ref: float
    gap_ref: float
    bound: float
    bound_satisfied: bool
    error: Optional[str] = None

    FIELDS = ("gamma", "lambda0", "lambda1", "gap", "lambda0_ref",
              "gap_ref", "bound", "bound_satisfied", "error")


@dataclass
class GapTable:
    instance: str
    mode: str
    rows: list
    constants: dict = field(default_factory=dict)

    def summary(self) -> dict:
        ok_rows = [r for r in self.rows if r.error is None]
        threshold = None
        for i, row in enumerate(ok_rows):
            if all(r.bound_satisfied for r in ok_rows[i:]):
                threshold = row.gamma
                break
        margins = [r.gap / r.bound for r in ok_rows
                   if r.bound_satisfied and r.bound > 0]
        return {
            "instance": self.instance,
            "mode": self.mode,
            "gamma_threshold_observed": threshold,
            "min_margin": min(margins) if margins else None,
            "constants": self.constants,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(GapRow.FIELDS)
            for r in self.rows:
                wr.writerow([_fmt(getattr(r, f)) for f in GapRow.FIELDS])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def plot_svg(self, path) -> None:
        from matplotlib.figure import Figure

        ok = [r for r in self.rows if r.error is None]
        fig = Figure(figsize=(5.5, 4.0))
        ax = fig.add_subplot(111)
        ax.loglog([r.gamma for r in ok], [r.gap for r in ok], "o-",
                  label="measured gap")
        ax.loglog([r.gamma for r in ok], [r.bound for r in ok], "--",
                  label="bound")
        ax.loglog([r.gamma for r in ok], [r.gap_ref for r in ok], ":",
                  label="harmonic reference")
        ax.set_xlabel("gamma")
        ax.set_ylabel("spectral gap")
        ax.set_title(f"{self.instance} [{self.mode}]")
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return "" if v is None else str(v)


def minimizer_of_potential(b: Barrier, c, eta: float,
                           x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Interior minimizer of eta c.x + f via the central-path Newton solver."""
    from .centralpath import center

    if x0 is None:
        if b.sample_box is not None:
            x0 = 0.5 * (np.asarray(b.sample_box[0], float)
                        + np.asarray(b.sample_box[1], float))
        else:
            x0 = np.zeros(b.dim)
    cc = np.zeros(b.dim) if c is None else np.asarray(c, dtype=float)
    p = center(b, cc, float(eta), x0=x0, tol=1e-10)
    return p.x


def gap_experiment(b: Barrier, c, eta: float, mode: str,
                   gammas: Sequence[float],
                   policy: Optional[GridPolicy] = None,
                   seed: int = 0) -> GapTable:
    """Sweep gamma, eigensolve, and compare gaps against the reference bound.

    Euclidean: bound = gamma lambda_min(sqrt(A))/2 with A the potential's
    Hessian at its minimizer; Riemannian: bound = gamma/2. Per-row solver
    failures are recorded in the row, not raised.
    """
    policy = policy or GridPolicy()
    if mode not in ("euclidean", "riemannian"):
        raise PreconditionError(f"unknown mode {mode!r}")
    z = minimizer_of_potential(b, c, eta)
    A = b.hessian(z)
    n = b.dim
    rows = []
    for gamma in sorted(float(g) for g in gammas):
        try:
            grid = default_grid(b, z, gamma, mode, policy.npts,
                                pad_sigma=policy.pad_sigma,
                                pad_bump=policy.pad_bump,
                                node_cap=policy.node_cap)
            if mode == "euclidean":
                op = build_euclidean(b, c, eta, grid, gamma,
                                     kinetic_multiplier=policy.kinetic_multiplier)
                lam0_ref, _, gap_ref = harmonic_reference(A, gamma)
            else:
                op = build_riemannian(b, c, eta, grid, gamma,
                                      kinetic_multiplier=policy.kinetic_multiplier)
                lam0_ref, gap_ref = 0.5 * gamma * n, gamma
            bound = 0.5 * gap_ref
            s = lowest_eigenpairs(op, k=2, tol=policy.tol,
                                  max_dim=policy.max_dim, seed=seed)
            gap = spectral_gap(s)
            rows.append(GapRow(gamma=gamma, lambda0=float(s.eigenvalues[0]),
                               lambda1=float(s.eigenvalues[1]), gap=gap,
                               lambda0_ref=lam0_ref, gap_ref=gap_ref,
                               bound=bound,
                               bound_satisfied=bool(gap >= bound)))
        except (NonConvergenceError, DegenerateGapError, PreconditionError) as exc:
            rows.append(GapRow(gamma=gamma, lambda0=np.nan, lambda1=np.nan,
                               gap=np.nan, lambda0_ref=np.nan, gap_ref=np.nan,
                               bound=np.nan, bound_satisfied=False,
                               error=f"{type(exc).__name__}: {exc}"))
    constants = {"kinetic_multiplier": policy.kinetic_multiplier,
                 "pad_sigma": policy.pad_sigma, "pad_bump": policy.pad_bump,
                 "npts": policy.npts, "tol": policy.tol, "eta": float(eta)}
    return GapTable(instance=b.name, mode=mode, rows=rows, constants=constants)


def rayleigh_quotient(op: DiscreteOperator, v: np.ndarray) -> float:
    num = float(v @ (op.matrix @ v))
    den = float(v @ v)
    return num / den


def localized_gaussian_rayleigh(op: DiscreteOperator, A, z,
                                bump: Optional[BumpPair] = None) -> float:
    """Rayleigh quotient of the (optionally bump-localized) reference
    Gaussian in the operator's matrix coordinates: an upper bound on
    lambda0 by the variational principle."""
    psi0 = gaussian_ground_state(A, z, op.gamma, op.grid, weight=op.weight)
    vals = psi0 if bump is None else bump.J * psi0
    w = np.ones(op.grid.size) if op.weight is None else op.weight
    v = vals * np.sqrt(w * op.grid.cell_volume)
    return rayleigh_quotient(op, v)
