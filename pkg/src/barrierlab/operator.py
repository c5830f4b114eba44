"""Grid discretization of barrier Schrodinger operators.

Builds three operator families on truncated Dirichlet grids:

* Euclidean:   kinetic_multiplier * (-Delta_h) + gamma^2 (eta c.x + f(x))
* Riemannian:  kinetic_multiplier * (-L_h)     + gamma^2 (eta c.x + f(x)),
  where L is the Laplace-Beltrami operator of the Hessian metric g = Hess f,
  discretized in flux (divergence) form with face-averaged coefficients
  D = g^{-1} sqrt(det g) and similarity-symmetrized by W^{1/2} . W^{-1/2},
  W = diag(sqrt(det g)).
* Harmonic:    the quadratic reference with potential (x-z).A(x-z)/2.

Also provides the smooth bump pair (J, Jbar) used for localization, Gaussian
reference ground states, the grid truncation policy, and a text dump format
for external cross-checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sparse

from .barrier import Barrier, min_slack, require_interior
from .errors import ConstructionError, PreconditionError

DEFAULT_NODE_CAP = 1_500_000
KINETIC_MULTIPLIER = 0.5


def sqrtm_spd(A) -> np.ndarray:
    """Symmetric square root of an SPD matrix via eigendecomposition."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    if np.min(lam) <= 0:
        raise PreconditionError(f"matrix is not SPD (min eigenvalue {np.min(lam):.3e})")
    return (U * np.sqrt(lam)) @ U.T


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid of interior nodes with Dirichlet boundary.

    Interior nodes along axis d sit at lo[d] + (i+1) h[d], i = 0..npts[d]-1,
    with spacing h[d] = (hi[d] - lo[d]) / (npts[d] + 1). The boundary points
    lo[d] and hi[d] carry the (implicit, zero) Dirichlet values.
    """

    lo: np.ndarray
    hi: np.ndarray
    npts: tuple
    node_cap: int = DEFAULT_NODE_CAP

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        npts = tuple(int(n) for n in np.atleast_1d(self.npts))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "npts", npts)
        if not 1 <= lo.size <= 3:
            raise ConstructionError(f"grid dim {lo.size} outside 1..3")
        if lo.shape != hi.shape or len(npts) != lo.size:
            raise ConstructionError("lo, hi, npts dimension mismatch")
        if np.any(hi <= lo):
            raise ConstructionError("grid needs hi > lo on every axis")
        if any(n < 1 for n in npts):
            raise ConstructionError("grid needs at least one interior point per axis")
        if int(np.prod(npts)) > self.node_cap:
            raise ConstructionError(
                f"grid with {int(np.prod(npts))} nodes exceeds the memory cap "
                f"of {self.node_cap}")

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def size(self) -> int:
        return int(np.prod(self.npts))

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.asarray(self.npts, dtype=float) + 1.0)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self):
        h = self.spacing
        return [self.lo[d] + h[d] * np.arange(1, self.npts[d] + 1)
                for d in range(self.dim)]

    def extended_axes(self):
        """Axes including the Dirichlet boundary coordinates lo and hi."""
        h = self.spacing
        return [self.lo[d] + h[d] * np.arange(0, self.npts[d] + 2)
                for d in range(self.dim)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse symmetric discretization of a barrier Schrodinger operator.

    matrix is the similarity-symmetrized operator; for Riemannian operators
    weight holds sqrt(det g) per node and physical eigenfunctions are
    weight^{-1/2} times the matrix eigenvectors.
    """

    matrix: sparse.csr_matrix
    weight: Optional[np.ndarray]
    gamma: float
    kind: str
    grid: Grid
    potential: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ v


@dataclass(frozen=True)
class BumpPair:
    """Smooth localizer pair with J^2 + Jbar^2 = 1 on the nodes.

    J equals 1 inside metric radius gamma^{-2/5} around the center and 0
    beyond 2 gamma^{-2/5}; the gradients are the analytic chain derivatives
    (not finite differences).
    """

    J: np.ndarray
    Jbar: np.ndarray
    radius_inner: float
    radius_outer: float
    center: np.ndarray
    metric: np.ndarray
    r: np.ndarray
    grad_J: np.ndarray
    grad_Jbar: np.ndarray


# ---------------------------------------------------------------------------
# grid truncation policy
# ---------------------------------------------------------------------------

def default_grid(b: Barrier, z, gamma: float, mode: str, npts,
                 pad_sigma: float = 8.0, pad_bump: float = 2.5,
                 node_cap: int = DEFAULT_NODE_CAP) -> Grid:
    """Truncation policy: half-width max(pad_sigma * sigma_max, pad_bump *
    gamma^{-2/5} Dikin radius) per axis around z, clipped into the domain.

    sigma_max is the largest standard deviation of the harmonic-reference
    ground state: (2 gamma lambda_min(sqrt(A)))^{-1/2} in the Euclidean mode
    and (2 gamma)^{-1/2} in metric units for the Riemannian mode; metric
    radii convert to coordinates through lambda_min(A)^{-1/2}.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    require_interior(b, z, "grid center")
    A0 = b.hessian(z)
    lam_min = float(np.min(np.linalg.eigvalsh(A0)))
    if lam_min <= 0:
        raise ConstructionError(f"metric at z={z} is not SPD")
    if mode == "euclidean":
        sigma = (2.0 * gamma * np.sqrt(lam_min)) ** -0.5
    elif mode == "riemannian":
        sigma = (2.0 * gamma) ** -0.5 / np.sqrt(lam_min)
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    bump_halfwidth = pad_bump * gamma ** -0.4 / np.sqrt(lam_min)
    half = max(pad_sigma * sigma, bump_halfwidth)
    lo = z - half
    hi = z + half

    clipped = False
    if b.sample_box is not None and b.facets is not None:
        dlo, dhi = (np.asarray(a, dtype=float) for a in b.sample_box)
        margin = 1e-6 * (dhi - dlo)
        new_lo = np.maximum(lo, dlo + margin)
        new_hi = np.minimum(hi, dhi - margin)
        clipped = bool(np.any(new_lo > lo) or np.any(new_hi < hi))
        lo, hi = new_lo, new_hi
        if np.any(hi <= lo):
            raise ConstructionError(
                f"policy grid around z={z} collapsed after domain clipping")
        # General polytopes: the clipped box can still poke out of a slanted
        # facet, so shrink toward z until every corner is strictly inside.
        for _ in range(200):
            corners = _box_corners(lo, hi)
            if all(min_slack(b, x) > 0 for x in corners):
                break
            lo = z + 0.97 * (lo - z)
            hi = z + 0.97 * (hi - z)
            clipped = True
        else:
            raise ConstructionError(
                f"could not fit a policy grid around z={z} into the domain")
    if clipped:
        warnings.warn(
            f"policy grid around z={np.round(z, 6)} was clipped to the domain; "
            "truncation is domain-limited, not Gaussian-limited",
            stacklevel=2)
    if np.isscalar(npts):
        npts = (int(npts),) * b.dim
    return Grid(lo=lo, hi=hi, npts=tuple(npts), node_cap=node_cap)


def _box_corners(lo, hi):
    n = lo.size
    out = []
    for mask in range(1 << n):
        out.append(np.where([(mask >> d) & 1 for d in range(n)], hi, lo))
    return out


# ---------------------------------------------------------------------------
# kinetic assembly
# ---------------------------------------------------------------------------

def _axis_flux_terms(grid: Grid, face_values):
    """Weighted graph Laplacian sum_d  d^T diag(F_d) d  in COO pieces.

    face_values[d] has the grid's interior shape except axis d, where it
    holds npts[d] + 1 face coefficients (including both boundary faces).
    Returns (rows, cols, vals) lists.
    """
    shape = grid.npts
    h = grid.spacing
    idx = np.arange(grid.size).reshape(shape)
    rows, cols, vals = [], [], []
    for d in range(grid.dim):
        F = face_values[d]
        hd2 = h[d] * h[d]
        low = tuple(slice(None) if k != d else slice(0, -1) for k in range(grid.dim))
        highs = tuple(slice(None) if k != d else slice(1, None) for k in range(grid.dim))
        # diagonal: both adjacent faces
        diag = (F[low] + F[highs]) / hd2
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(diag.ravel())
        # off-diagonal: faces strictly between interior nodes
        inner = tuple(slice(None) if k != d else slice(1, -1) for k in range(grid.dim))
        Fin = F[inner]
        a = idx[low].ravel()
        bnb = idx[highs].ravel()
        off = -(Fin / hd2).ravel()
        rows.extend([a, bnb])
        cols.extend([bnb, a])
        vals.extend([off, off])
    return rows, cols, vals


def _central_difference(grid: Grid, d) -> sparse.csr_matrix:
    """Central difference along axis d with Dirichlet boundary."""
    shape = grid.npts
    idx = np.arange(grid.size).reshape(shape)
    c = 1.0 / (2.0 * grid.spacing[d])
    low = tuple(slice(None) if k != d else slice(0, -1) for k in range(grid.dim))
    highs = tuple(slice(None) if k != d else slice(1, None) for k in range(grid.dim))
    rows = np.concatenate([idx[low].ravel(), idx[highs].ravel()])
    cols = np.concatenate([idx[highs].ravel(), idx[low].ravel()])
    vals = np.concatenate([np.full(idx[low].size, c), np.full(idx[highs].size, -c)])
    return sparse.coo_matrix((vals, (rows, cols)),
                             shape=(grid.size, grid.size)).tocsr()


def _flat_kinetic(grid: Grid) -> sparse.csr_matrix:
    """-Delta_h with the standard 2*dim+1 point Dirichlet stencil."""
    faces = []
    for d in range(grid.dim):
        shp = tuple(grid.npts[k] if k != d else grid.npts[k] + 1
                    for k in range(grid.dim))
        faces.append(np.ones(shp))
    rows, cols, vals = _axis_flux_terms(grid, faces)
    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size))
    return K.tocsr()


def _metric_fields(b: Barrier, grid: Grid):
    """Hessian metric data on the extended grid (interior + boundary ring).

    Returns (D, w, ext_shape) where D has shape ext_shape + (dim, dim) with
    D = g^{-1} sqrt(det g), and w is sqrt(det g) on the same layout.
    """
    ext_axes = grid.extended_axes()
    mesh = np.meshgrid(*ext_axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    if b.hessian_many is not None:
        H = b.hessian_many(X)
    else:
        H = np.stack([b.hessian(x) for x in X])
    lam = np.linalg.eigvalsh(H)
    bad = np.where(lam[:, 0] <= 0)[0]
    if bad.size:
        k = int(bad[0])
        raise ConstructionError(
            f"Hessian metric is not SPD at node {np.unravel_index(k, tuple(n + 2 for n in grid.npts))} "
            f"x={X[k]} (min eigenvalue {lam[k, 0]:.3e})")
    det = np.prod(lam, axis=1)
    w = np.sqrt(det)
    D = np.linalg.inv(H) * w[:, None, None]
    ext_shape = tuple(n + 2 for n in grid.npts)
    return D.reshape(ext_shape + (b.dim, b.dim)), w.reshape(ext_shape)


def _riemannian_kinetic(b: Barrier, grid: Grid):
    """Flux-form -L_h (weighted graph Laplacian + corner cross terms).

    Returns (K, w_interior) with K the stiffness matrix of the quadratic
    form integral of dpsi . D dpsi, so -L = (1/w) K.
    """
    D, w_ext = _metric_fields(b, grid)
    dim = grid.dim
    interior = tuple(slice(1, -1) for _ in range(dim))
    w = w_ext[interior].ravel()

    faces = []
    for d in range(dim):
        sl = tuple(slice(1, -1) if k != d else slice(None) for k in range(dim))
        Dd = D[sl + (d, d)]
        lowf = tuple(slice(None) if k != d else slice(0, -1) for k in range(dim))
        highf = tuple(slice(None) if k != d else slice(1, None) for k in range(dim))
        faces.append(0.5 * (Dd[lowf] + Dd[highf]))
    rows, cols, vals = _axis_flux_terms(grid, faces)
    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size)).tocsr()

    for d in range(dim):
        for e in range(d + 1, dim):
            Dde = D[interior + (d, e)].ravel()
            if np.max(np.abs(Dde)) == 0.0:
                continue
            Pd = _central_difference(grid, d)
            Pe = _central_difference(grid, e)
            M = sparse.diags(Dde)
            K = K + Pd.T @ M @ Pe + Pe.T @ M @ Pd
    return K.tocsr(), w


def _potential_on_nodes(b: Barrier, c, eta: float, grid: Grid):
    """eta c.x + f(x) on the nodes, shifted by its grid-center value."""
    c = np.zeros(b.dim) if c is None else np.asarray(c, dtype=float).ravel()
    eta = float(eta)
    nodes = grid.nodes()
    _check_grid_inside(b, grid)
    if b.value_many is not None:
        fvals = b.value_many(nodes)
    else:
        fvals = np.array([b.value(x) for x in nodes])
    p = fvals + eta * (nodes @ c)
    center = grid.center()
    shift = float(b.value(center) + eta * (c @ center))
    return p - shift, shift


def _check_grid_inside(b: Barrier, grid: Grid):
    if b.facets is None:
        return
    eps = 1e-6 * float(np.min(grid.spacing))
    for x in _box_corners(grid.lo, grid.hi):
        s = min_slack(b, x)
        if s <= eps:
            raise ConstructionError(
                f"grid corner {x} touches the domain boundary "
                f"(facet slack {s:.3e})")


def build_euclidean(b: Barrier, c, eta, grid: Grid, gamma: float,
                    kinetic_multiplier: float = KINETIC_MULTIPLIER) -> DiscreteOperator:
    """kinetic_multiplier * (-Delta_h) + gamma^2 diag(eta c.x + f - shift)."""
    gamma = float(gamma)
    p, shift = _potential_on_nodes(b, c, eta, grid)
    K = _flat_kinetic(grid)
    M = kinetic_multiplier * K + sparse.diags(gamma**2 * p)
    M = ((M + M.T) * 0.5).tocsr()
    return DiscreteOperator(matrix=M, weight=None, gamma=gamma, kind="euclidean",
                            grid=grid, potential=p,
                            meta={"barrier": b.name, "eta": float(eta),
                                  "potential_shift": shift,
                                  "kinetic_multiplier": kinetic_multiplier,
                                  "metric_at_center": b.hessian(grid.center()),
                                  "barrier_obj": b})


def build_riemannian(b: Barrier, c, eta, grid: Grid, gamma: float,
                     kinetic_multiplier: float = KINETIC_MULTIPLIER) -> DiscreteOperator:
    """Similarity-symmetrized kinetic_multiplier * (-L_h) + gamma^2 diag(p).

    The returned matrix is W^{1/2} H_phys W^{-1/2} with W = diag(sqrt det g);
    its eigenvalues are those of the weighted problem and physical
    eigenfunctions are w^{-1/2} times matrix eigenvectors.
    """
    gamma = float(gamma)
    p, shift = _potential_on_nodes(b, c, eta, grid)
    K, w = _riemannian_kinetic(b, grid)
    winv_sqrt = sparse.diags(1.0 / np.sqrt(w))
    M = kinetic_multiplier * (winv_sqrt @ K @ winv_sqrt) + sparse.diags(gamma**2 * p)
    M = ((M + M.T) * 0.5).tocsr()
    return DiscreteOperator(matrix=M, weight=w, gamma=gamma, kind="riemannian",
                            grid=grid, potential=p,
                            meta={"barrier": b.name, "eta": float(eta),
                                  "potential_shift": shift,
                                  "kinetic_multiplier": kinetic_multiplier,
                                  "metric_at_center": b.hessian(grid.center()),
                                  "barrier_obj": b})


def build_harmonic(A, z, grid: Grid, gamma: float,
                   kinetic_multiplier: float = KINETIC_MULTIPLIER) -> DiscreteOperator:
    """Quadratic reference kinetic_multiplier * (-Delta_h) + gamma^2 (x-z).A(x-z)/2."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    gamma = float(gamma)
    if np.min(np.linalg.eigvalsh(A)) <= 0:
        raise PreconditionError("harmonic reference needs SPD A")
    nodes = grid.nodes()
    Y = nodes - z[None, :]
    p = 0.5 * np.einsum("ki,ij,kj->k", Y, A, Y)
    K = _flat_kinetic(grid)
    M = kinetic_multiplier * K + sparse.diags(gamma**2 * p)
    M = ((M + M.T) * 0.5).tocsr()
    return DiscreteOperator(matrix=M, weight=None, gamma=gamma, kind="harmonic",
                            grid=grid, potential=p,
                            meta={"A": A, "center": z,
                                  "kinetic_multiplier": kinetic_multiplier})


# ---------------------------------------------------------------------------
# reference states and bump localizers
# ---------------------------------------------------------------------------

def gaussian_ground_state(A, z, gamma: float, grid: Grid,
                          weight: Optional[np.ndarray] = None) -> np.ndarray:
    """exp(-gamma/2 (x-z).sqrt(A)(x-z)) at nodes, unit (weighted) L2 norm."""
    B = sqrtm_spd(A)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    Y = grid.nodes() - z[None, :]
    q = np.einsum("ki,ij,kj->k", Y, B, Y)
    psi = np.exp(-0.5 * float(gamma) * q)
    w = np.ones(grid.size) if weight is None else np.asarray(weight, dtype=float)
    nrm2 = float(np.sum(psi * psi * w) * grid.cell_volume)
    return psi / np.sqrt(nrm2)


def _bump_a(x):
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def _bump_a_prime(x):
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / x[pos]) / (x[pos] * x[pos])
    return out


def _bump_b(x):
    num = _bump_a(x)
    return num / (num + _bump_a(1.0 - x))


def _bump_b_prime(x):
    ax, a1 = _bump_a(x), _bump_a(1.0 - x)
    s = ax + a1
    return (_bump_a_prime(x) * a1 + ax * _bump_a_prime(1.0 - x)) / (s * s)


def _bump_chain(u):
    """j, jbar and their derivatives at scaled radius u >= 0.

    j(u) = sin(pi/2 c(u)) with c(u) = b(2+u) b(2-u); for u >= 0 the factor
    b(2+u) is identically 1, so c(u) = b(2-u) there.
    """
    u = np.asarray(u, dtype=float)
    c = _bump_b(2.0 + u) * _bump_b(2.0 - u)
    cp = _bump_b_prime(2.0 + u) * _bump_b(2.0 - u) \
        - _bump_b(2.0 + u) * _bump_b_prime(2.0 - u)
    arg = 0.5 * np.pi * c
    j = np.sin(arg)
    jbar = np.cos(arg)
    jp = 0.5 * np.pi * cp * jbar
    jbarp = -0.5 * np.pi * cp * j
    # Pin the plateaus exactly: float cos(pi/2) is 6e-17, not 0, and the
    # derivative chain is identically zero wherever c is flat.
    lowp = c == 0.0
    highp = c == 1.0
    for arr, lo_val, hi_val in ((j, 0.0, 1.0), (jbar, 1.0, 0.0),
                                (jp, 0.0, 0.0), (jbarp, 0.0, 0.0)):
        arr[lowp] = lo_val
        arr[highp] = hi_val
    return j, jbar, jp, jbarp


def bump_pair(z, A, gamma: float, grid: Grid) -> BumpPair:
    """Evaluate the localizer pair at metric radii r_z(x) = |x - z|_A.

    J = 1 for r_z <= gamma^{-2/5}, J = 0 for r_z >= 2 gamma^{-2/5}, and
    J^2 + Jbar^2 = 1 everywhere. Gradients are analytic.
    """
    gamma = float(gamma)
    r_outer = 2.0 * gamma ** -0.4
    if not r_outer < 1.0:
        raise PreconditionError(
            f"bump support 2 gamma^(-2/5) = {r_outer:.4f} does not fit a unit "
            f"Dikin ball; need gamma > 2^(5/2)")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    Y = grid.nodes() - z[None, :]
    AY = Y @ A.T
    r = np.sqrt(np.maximum(np.einsum("ki,ki->k", Y, AY), 0.0))
    scale = gamma ** 0.4
    j, jbar, jp, jbarp = _bump_chain(scale * r)
    with np.errstate(invalid="ignore", divide="ignore"):
        grad_r = np.where(r[:, None] > 0, AY / r[:, None], 0.0)
    grad_J = scale * jp[:, None] * grad_r
    grad_Jbar = scale * jbarp[:, None] * grad_r
    return BumpPair(J=j, Jbar=jbar, radius_inner=gamma ** -0.4,
                    radius_outer=r_outer, center=z, metric=A, r=r,
                    grad_J=grad_J, grad_Jbar=grad_Jbar)


# ---------------------------------------------------------------------------
# scalar helper lemma
# ---------------------------------------------------------------------------

def _round_up_sig(x: float, digits: int = 3) -> float:
    if x == 0:
        return 0.0
    mag = np.floor(np.log10(abs(x)))
    q = 10.0 ** (mag - digits + 1)
    return float(np.ceil(x / q) * q)


def _smallest_helper_c(alpha: float) -> float:
    ok = lambda c: c >= (np.log(c) + 1.0 + alpha) ** alpha
    cs = np.geomspace(1.0 + 1e-9, 1e9, 4000)
    hit = None
    for c in cs:
        if ok(c):
            hit = c
            break
    if hit is None:
        raise ConstructionError(f"no helper constant found for alpha={alpha}")
    lo = 1.0 + 1e-9
    hi = hit
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def log_helper_threshold(y: float, alpha: float = 1.0) -> float:
    """Smallest x0 (3 significant digits) with x >= y log^alpha(x) for x >= x0.

    Also checks the scan result against the closed-form sufficient bound
    c y log^alpha(y), where c is the smallest constant satisfying
    c >= (log c + 1 + alpha)^alpha.
    """
    y = float(y)
    alpha = float(alpha)
    if y < np.e ** np.e:
        raise PreconditionError(f"need y >= e^e = {np.e**np.e:.4f}, got {y}")
    if alpha < 1.0:
        raise PreconditionError(f"need alpha >= 1, got {alpha}")
    c = _smallest_helper_c(alpha)
    bound = c * y * np.log(y) ** alpha
    phi = lambda x: x - y * np.log(x) ** alpha
    xs = np.geomspace(np.e, 2.0 * bound, 20001)
    vals = phi(xs)
    failing = np.where(vals < 0)[0]
    if failing.size == 0:
        x0 = float(xs[0])
    else:
        i = int(failing[-1])
        if i + 1 >= xs.size:
            raise ConstructionError(
                f"inequality still failing at 2x the lemma bound (y={y}, alpha={alpha})")
        lo, hi = xs[i], xs[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if phi(mid) >= 0:
                hi = mid
            else:
                lo = mid
        x0 = _round_up_sig(hi, 3)
        tail = xs[xs >= x0]
        if np.any(phi(tail) < 0):
            raise ConstructionError("scan tail violates the threshold property")
    if x0 > bound * (1.0 + 1e-12):
        raise ConstructionError(
            f"scanned threshold {x0} exceeds the lemma bound {bound}")
    return x0


# ---------------------------------------------------------------------------
# text dump
# ---------------------------------------------------------------------------

def dump_operator(op: DiscreteOperator, path) -> None:
    """Write the sparse matrix as 'dim, shape, nnz' header + 'i j value' rows."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# barrierlab sparse operator kind={op.kind} gamma={float(op.gamma)!r}\n")
        fh.write(f"dim {op.grid.dim} shape {' '.join(str(n) for n in op.grid.npts)} "
                 f"nnz {coo.nnz}\n")
        for k in order:
            fh.write(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}\n")


def load_operator_matrix(path) -> sparse.csr_matrix:
    """Read back a matrix written by dump_operator."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    head = lines[0].split()
    npts = [int(v) for v in head[head.index("shape") + 1: head.index("nnz")]]
    n = int(np.prod(npts))
    rows, cols, vals = [], [], []
    for ln in lines[1:]:
        i, j, v = ln.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def operator_for_barrier(b: Barrier, c, eta, grid: Grid, gamma: float,
                         mode: str, **kw) -> DiscreteOperator:
    if mode == "euclidean":
        return build_euclidean(b, c, eta, grid, gamma, **kw)
    if mode == "riemannian":
        return build_riemannian(b, c, eta, grid, gamma, **kw)
    raise PreconditionError(f"unknown mode {mode!r}")
