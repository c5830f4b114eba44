"""Self-concordant barriers: construction, local geometry, and checks.

A barrier is bundled as callables plus metadata (dimension, complexity
parameter theta, domain membership test). Everything downstream (central
path, operators, spectra) consumes this interface and nothing else.

The built-in constructors cover the logarithmic barrier family on
intervals, boxes and general polytopes {x : A x <= b}, plus a smooth
quadratic "potential" used by tests and by flat-metric comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConstructionError, DomainError, PreconditionError

# Sampling operations reject interior points closer to a facet than this.
SLACK_REJECT = 1e-9
# Base finite-difference step scale for derivative checks.
FD_STEP_SCALE = 1e-4


@dataclass(frozen=True)
class Barrier:
    """A self-concordant barrier on an open convex domain.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    value, gradient, hessian : callables
        f(x) -> float, grad f(x) -> (dim,), Hess f(x) -> (dim, dim).
    theta : float
        Complexity parameter (facet count for log barriers).
    domain_test : callable
        x -> bool, strict interior membership.
    name : str
        Short identifier used in reports.
    facets : (A, b) or None
        Half-space description when available; used for slack-aware
        sampling and grid clipping.
    sample_box : (lo, hi) or None
        Axis-aligned box containing the domain (or a reasonable window
        for unbounded domains), used by samplers.
    hessian_many : callable or None
        Optional vectorized Hessian, (N, dim) -> (N, dim, dim).
    value_many, gradient_many : callables or None
        Optional vectorized value / gradient.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    theta: float
    domain_test: Callable[[np.ndarray], bool]
    name: str = "custom"
    facets: Optional[tuple] = None
    sample_box: Optional[tuple] = None
    hessian_many: Optional[Callable] = None
    value_many: Optional[Callable] = None
    gradient_many: Optional[Callable] = None
    descriptor: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LocalGeometry:
    """Dikin ellipsoid data at a point: center, metric and radius."""

    center: np.ndarray
    metric: np.ndarray
    radius: float = 1.0


def require_interior(b: Barrier, x: np.ndarray, what: str = "point") -> None:
    x = np.asarray(x, dtype=float)
    if x.shape != (b.dim,):
        raise PreconditionError(
            f"{what} has shape {x.shape}, expected ({b.dim},)")
    if not b.domain_test(x):
        raise DomainError(f"{what} {x} lies outside the domain of '{b.name}'")


def min_slack(b: Barrier, x: np.ndarray) -> float:
    """Smallest facet slack at x, or +inf if no facet description exists."""
    if b.facets is None:
        return float("inf") if b.domain_test(np.asarray(x, float)) else -1.0
    A, bv = b.facets
    return float(np.min(bv - A @ np.asarray(x, float)))


def local_geometry(b: Barrier, x: np.ndarray, radius: float = 1.0) -> LocalGeometry:
    require_interior(b, x)
    return LocalGeometry(center=np.asarray(x, float).copy(),
                         metric=b.hessian(np.asarray(x, float)),
                         radius=float(radius))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def polytope_barrier(A, bvec, name: str = "polytope") -> Barrier:
    """Logarithmic barrier -sum_i log(b_i - a_i.x) on {x : A x < b}."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    bvec = np.atleast_1d(np.asarray(bvec, dtype=float)).ravel()
    m, n = A.shape
    if bvec.shape != (m,):
        raise ConstructionError(
            f"facet mismatch: A has {m} rows but b has {bvec.shape[0]} entries")
    if m < 1:
        raise ConstructionError("a polytope barrier needs at least one facet")
    row_norms = np.linalg.norm(A, axis=1)
    if np.any(row_norms == 0.0):
        raise ConstructionError("zero row in facet matrix A")

    def slacks(x):
        return bvec - A @ x

    def value(x):
        s = slacks(x)
        if np.any(s <= 0):
            raise DomainError(f"point {x} outside polytope '{name}'")
        return float(-np.sum(np.log(s)))

    def gradient(x):
        s = slacks(x)
        if np.any(s <= 0):
            raise DomainError(f"point {x} outside polytope '{name}'")
        return A.T @ (1.0 / s)

    def hessian(x):
        s = slacks(x)
        if np.any(s <= 0):
            raise DomainError(f"point {x} outside polytope '{name}'")
        W = A / s[:, None]
        return W.T @ W

    def domain_test(x):
        return bool(np.all(slacks(np.asarray(x, float)) > 0.0))

    def value_many(X):
        S = bvec[None, :] - X @ A.T
        if np.any(S <= 0):
            bad = int(np.argmax(np.any(S <= 0, axis=1)))
            raise DomainError(f"node {bad} at {X[bad]} outside polytope '{name}'")
        return -np.sum(np.log(S), axis=1)

    def gradient_many(X):
        S = bvec[None, :] - X @ A.T
        return (1.0 / S) @ A

    def hessian_many(X):
        S = bvec[None, :] - X @ A.T
        return np.einsum("km,mi,mj->kij", 1.0 / S**2, A, A, optimize=True)

    box = _polytope_bounding_box(A, bvec)
    return Barrier(dim=n, value=value, gradient=gradient, hessian=hessian,
                   theta=float(m), domain_test=domain_test, name=name,
                   facets=(A, bvec), sample_box=box,
                   hessian_many=hessian_many, value_many=value_many,
                   gradient_many=gradient_many,
                   descriptor={"kind": "polytope", "A": A.tolist(),
                               "b": bvec.tolist()})


def _polytope_bounding_box(A, bvec):
    """Axis-aligned bounding box of {Ax <= b} via linear programs.

    Unbounded directions fall back to +-1e3 so samplers still work.
    """
    from scipy.optimize import linprog

    n = A.shape[1]
    lo = np.full(n, -1e3)
    hi = np.full(n, 1e3)
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        for sign, out in ((1.0, lo), (-1.0, hi)):
            res = linprog(sign * e, A_ub=A, b_ub=bvec,
                          bounds=[(None, None)] * n, method="highs")
            if res.status == 0:
                out[d] = sign * res.fun if sign > 0 else -res.fun
    # linprog minimizes: for sign=+1 we get min x_d, for sign=-1, -max x_d.
    return lo, hi


def interval_barrier(lo: float = -1.0, hi: float = 1.0) -> Barrier:
    if not hi > lo:
        raise ConstructionError(f"empty interval ({lo}, {hi})")
    b = polytope_barrier(np.array([[1.0], [-1.0]]), np.array([hi, -lo]),
                         name=f"interval({lo},{hi})")
    return replace(b, descriptor={"kind": "interval", "lo": lo, "hi": hi})


def box_barrier(bounds: Sequence[Sequence[float]]) -> Barrier:
    """Product of intervals; bounds is a sequence of (lo, hi) pairs."""
    bounds = [(float(l), float(h)) for l, h in bounds]
    n = len(bounds)
    A = np.zeros((2 * n, n))
    bv = np.zeros(2 * n)
    for d, (l, h) in enumerate(bounds):
        if not h > l:
            raise ConstructionError(f"empty interval ({l}, {h}) on axis {d}")
        A[2 * d, d] = 1.0
        bv[2 * d] = h
        A[2 * d + 1, d] = -1.0
        bv[2 * d + 1] = -l
    b = polytope_barrier(A, bv, name=f"box{n}d")
    return replace(b, descriptor={"kind": "box", "bounds": bounds})


def halfline_barrier() -> Barrier:
    """-log(x) on (0, inf); the simplest one-facet instance."""
    b = polytope_barrier(np.array([[-1.0]]), np.array([0.0]), name="halfline")
    return replace(b, sample_box=(np.array([SLACK_REJECT]), np.array([50.0])),
                   descriptor={"kind": "halfline"})


def quadratic_potential(Q, center=None, name: str = "quadratic") -> Barrier:
    """Smooth potential f(x) = (x-z).Q(x-z)/2 on all of R^n.

    Not a barrier in the strict sense (no boundary, theta = inf); used for
    flat-metric comparisons, Riemannian reference operators, and as a
    counterexample source in tests.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    Qs = 0.5 * (Q + Q.T)
    z = np.zeros(n) if center is None else np.asarray(center, dtype=float).ravel()

    def hessian_many(X):
        return np.broadcast_to(Qs, (X.shape[0], n, n)).copy()

    return Barrier(
        dim=n,
        value=lambda x: float(0.5 * (x - z) @ Qs @ (x - z)),
        gradient=lambda x: Qs @ (x - z),
        hessian=lambda x: Qs.copy(),
        theta=float("inf"),
        domain_test=lambda x: True,
        name=name,
        sample_box=(z - 3.0, z + 3.0),
        hessian_many=hessian_many,
        value_many=lambda X: 0.5 * np.einsum(
            "ki,ij,kj->k", X - z[None, :], Qs, X - z[None, :]),
        gradient_many=lambda X: (X - z[None, :]) @ Qs,
        descriptor={"kind": "quadratic", "Q": Qs.tolist(), "center": z.tolist()},
    )


def with_linear_objective(b: Barrier, c, eta: float) -> Barrier:
    """Augment f to eta * c.x + f(x). Hessian and theta are untouched."""
    c = np.asarray(c, dtype=float).ravel()
    if c.shape != (b.dim,):
        raise PreconditionError(f"objective c has shape {c.shape}, "
                                f"expected ({b.dim},)")
    eta = float(eta)
    base_v, base_g = b.value, b.gradient
    base_vm, base_gm = b.value_many, b.gradient_many
    vm = None if base_vm is None else (lambda X: base_vm(X) + eta * (X @ c))
    gm = None if base_gm is None else (lambda X: base_gm(X) + eta * c[None, :])
    return replace(
        b,
        value=lambda x: float(base_v(x) + eta * (c @ x)),
        gradient=lambda x: base_g(x) + eta * c,
        value_many=vm,
        gradient_many=gm,
        name=b.name + "+linear",
    )


def from_descriptor(desc: dict) -> Barrier:
    """Rebuild a barrier from its config descriptor (kind + parameters)."""
    kind = desc.get("kind")
    if kind == "interval":
        return interval_barrier(float(desc.get("lo", -1.0)),
                                float(desc.get("hi", 1.0)))
    if kind == "box":
        return box_barrier(desc["bounds"])
    if kind == "polytope":
        return polytope_barrier(desc["A"], desc["b"])
    if kind == "halfline":
        return halfline_barrier()
    if kind == "quadratic":
        return quadratic_potential(desc["Q"], center=desc.get("center"))
    raise ConstructionError(f"unknown barrier kind {kind!r}")


# ---------------------------------------------------------------------------
# local geometry operations
# ---------------------------------------------------------------------------

def local_norm(b: Barrier, x, v) -> float:
    """Hessian norm ||v||_x = sqrt(v . Hess f(x) v)."""
    require_interior(b, x)
    v = np.asarray(v, dtype=float)
    H = b.hessian(np.asarray(x, dtype=float))
    q = float(v @ H @ v)
    if q < 0:
        q = 0.0  # roundoff guard; Hessians here are PSD
    return float(np.sqrt(q))


def dikin_contains(b: Barrier, x, y) -> bool:
    """Whether y lies in the open unit Dikin ellipsoid centred at x."""
    require_interior(b, x)
    y = np.asarray(y, dtype=float)
    return local_norm(b, x, y - np.asarray(x, dtype=float)) < 1.0


@dataclass
class SelfConcordanceReport:
    max_ratio: float
    worst_case: tuple  # (x, direction, ratio)
    checked: int
    unverifiable: list
    passed: bool


def check_self_concordance(b: Barrier, sample_points, directions_per_point: int = 4,
                           seed: int = 0, tol: float = 5e-3) -> SelfConcordanceReport:
    """Finite-difference audit of |D^3 f[u,u,u]| <= 2 (u.Hess f u)^{3/2}.

    The third derivative along u is a central difference of s -> u.H(x+su)u
    with step h = FD_STEP_SCALE * max(1, ||x||). Each estimate is validated
    against a half-step estimate; on disagreement the step shrinks by 4 and
    the pair is retried, and points that never validate are reported as
    unverifiable rather than counted.
    """
    rng = np.random.default_rng(seed)
    max_ratio = -np.inf
    worst = None
    unverifiable = []
    checked = 0
    for x in np.atleast_2d(np.asarray(sample_points, dtype=float)):
        if not b.domain_test(x):
            unverifiable.append((x.copy(), None, "outside domain"))
            continue
        dirs = [np.eye(b.dim)[d] for d in range(min(b.dim, 2))]
        while len(dirs) < directions_per_point:
            u = rng.standard_normal(b.dim)
            dirs.append(u / np.linalg.norm(u))
        for u in dirs:
            est = _third_derivative_fd(b, x, u)
            if est is None:
                unverifiable.append((x.copy(), u.copy(), "fd unstable"))
                continue
            quad = float(u @ b.hessian(x) @ u)
            if quad < 1e-14:
                unverifiable.append((x.copy(), u.copy(), "degenerate direction"))
                continue
            ratio = abs(est) / (2.0 * quad ** 1.5)
            checked += 1
            if ratio > max_ratio:
                max_ratio = ratio
                worst = (x.copy(), u.copy(), ratio)
    return SelfConcordanceReport(
        max_ratio=float(max_ratio) if worst is not None else float("nan"),
        worst_case=worst if worst is not None else (None, None, float("nan")),
        checked=checked,
        unverifiable=unverifiable,
        passed=(worst is not None and max_ratio <= 1.0 + tol),
    )


def _third_derivative_fd(b: Barrier, x, u, rel_agree: float = 0.05,
                         max_shrinks: int = 3):
    """Central-difference estimate of D^3 f(x)[u,u,u], or None if unstable."""
    h = FD_STEP_SCALE * max(1.0, float(np.linalg.norm(x)))
    for _ in range(max_shrinks + 1):
        try:
            if not (b.domain_test(x + h * u) and b.domain_test(x - h * u)
                    and b.domain_test(x + 0.5 * h * u)
                    and b.domain_test(x - 0.5 * h * u)):
                h *= 0.25
                continue
            q = lambda s: float(u @ b.hessian(x + s * u) @ u)
            full = (q(h) - q(-h)) / (2.0 * h)
            half = (q(0.5 * h) - q(-0.5 * h)) / h
        except DomainError:
            h *= 0.25
            continue
        scale = max(abs(full), abs(half), 1e-12)
        if abs(full - half) <= rel_agree * scale:
            # Richardson extrapolation of the two central differences.
            return (4.0 * half - full) / 3.0
        h *= 0.25
    return None


@dataclass
class HessianStabilityReport:
    r: float
    ratios: np.ndarray
    lower: float
    upper: float
    worst_margin: float
    passed: bool


def check_hessian_stability(b: Barrier, x, y, probes=8,
                            seed: int = 0) -> HessianStabilityReport:
    """Check (1 - r) <= ||v||_y / ||v||_x <= 1/(1 - r) for r = ||y - x||_x < 1.

    probes may be an integer (that many random directions) or an explicit
    array of direction vectors.
    """
    require_interior(b, x)
    require_interior(b, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = local_norm(b, x, y - x)
    if r >= 1.0:
        raise PreconditionError(
            f"y is not inside the Dikin ellipsoid of x (r = {r:.6g} >= 1)")
    if np.isscalar(probes):
        rng = np.random.default_rng(seed)
        V = rng.standard_normal((int(probes), b.dim))
    else:
        V = np.atleast_2d(np.asarray(probes, dtype=float))
    Hx = b.hessian(x)
    Hy = b.hessian(y)
    nx = np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", V, Hx, V), 0.0))
    ny = np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", V, Hy, V), 0.0))
    good = nx > 1e-14
    ratios = ny[good] / nx[good]
    lower, upper = 1.0 - r, 1.0 / (1.0 - r)
    slack = 1e-9
    margin = float(np.min(np.minimum(ratios - lower, upper - ratios),
                          initial=np.inf))
    return HessianStabilityReport(
        r=float(r), ratios=ratios, lower=lower, upper=upper,
        worst_margin=margin,
        passed=bool(np.all((ratios >= lower - slack) & (ratios <= upper + slack))),
    )


def sobol_interior_samples(b: Barrier, n: int, seed: int = 0) -> np.ndarray:
    """Sobol points in the barrier's sample box, keeping strict-interior
    points with facet slack >= SLACK_REJECT."""
    from scipy.stats import qmc

    if b.sample_box is None:
        raise PreconditionError(f"barrier '{b.name}' has no sample box")
    lo, hi = (np.asarray(a, dtype=float) for a in b.sample_box)
    eng = qmc.Sobol(d=b.dim, scramble=True, seed=seed)
    out = []
    need = n
    for _ in range(8):
        draw = 1 << int(np.ceil(np.log2(max(need * 2, 64))))
        pts = lo + (hi - lo) * eng.random(draw)
        for x in pts:
            if b.domain_test(x) and min_slack(b, x) >= SLACK_REJECT:
                out.append(x)
                if len(out) == n:
                    return np.array(out)
        need = n - len(out)
    if not out:
        raise ConstructionError(
            f"could not draw interior samples for '{b.name}'")
    return np.array(out)


def barrier_parameter_estimate(b: Barrier, samples=10_000, seed: int = 0) -> float:
    """Sampled sup of ||H^{-1} g||_x^2 = g . H^{-1} g over interior points.

    samples may be an integer (Sobol count) or an explicit point array.
    A lower estimate of theta; the estimate never legitimately exceeds it.
    """
    if np.isscalar(samples):
        pts = sobol_interior_samples(b, int(samples), seed=seed)
    else:
        pts = np.atleast_2d(np.asarray(samples, dtype=float))
        for x in pts:
            require_interior(b, x)
            if min_slack(b, x) < SLACK_REJECT:
                raise PreconditionError(
                    f"sample {x} has facet slack < {SLACK_REJECT}")
    best = 0.0
    if b.hessian_many is not None and b.gradient_many is not None:
        H = b.hessian_many(pts)
        g = b.gradient_many(pts)
        sol = np.linalg.solve(H, g[..., None])[..., 0]
        vals = np.einsum("ki,ki->k", g, sol)
        best = float(np.max(vals))
    else:
        for x in pts:
            g = b.gradient(x)
            H = b.hessian(x)
            try:
                s = np.linalg.solve(H, g)
            except np.linalg.LinAlgError as exc:
                raise ConstructionError(
                    f"singular Hessian at {x} in '{b.name}'") from exc
            best = max(best, float(g @ s))
    return best
