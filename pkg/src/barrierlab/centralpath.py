"""Newton central-path following, eta schedules, and Gaussian overlap bounds.

The classical side of the pipeline: damped-Newton centering of
eta c.x + f(x), stability and duality-gap checks along the path, the
annealing eta schedule (Euclidean variant re-measures the local metric at
every step), and the total-variation / Hellinger machinery that certifies
how fast consecutive ground states can drift apart.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .barrier import Barrier, local_norm, require_interior
from .errors import (
    BarrierLabError,
    ConfigError,
    NonConvergenceError,
    NormalizationError,
    PreconditionError,
)

MAX_CENTER_STEPS = 500
DAMPED_PHASE_THRESHOLD = 0.25
STABILITY_CONSTANT = 3.0  # empirical surrogate for the O(delta) constant


@dataclass(frozen=True)
class PathPoint:
    """A centered point: eta, the minimizer x of eta c.x + f, the Newton
    decrement certifying it, and the barrier Hessian there (the local
    metric)."""

    eta: float
    x: np.ndarray
    newton_decrement: float
    hessian_at_x: np.ndarray


def _decrement_direction(b: Barrier, c: np.ndarray, eta: float,
                         x: np.ndarray):
    g = eta * c + b.gradient(x)
    H = b.hessian(x)
    d = np.linalg.solve(H, -g)
    lam2 = float(-g @ d)
    return np.sqrt(max(lam2, 0.0)), d, H


def newton_decrement(b: Barrier, c, eta: float, x) -> float:
    """sqrt(g' H^-1 g) for the potential eta c.x + f at interior x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    require_interior(b, x)
    lam, _, _ = _decrement_direction(b, c, eta, x)
    return lam


def center(b: Barrier, c, eta: float, x0, tol: float = 1e-8,
           max_steps: int = MAX_CENTER_STEPS) -> PathPoint:
    """Damped Newton minimization of eta c.x + f(x).

    Step length 1/(1+lambda) while the decrement exceeds 1/4, full Newton
    steps after; both keep iterates strictly inside the Dikin ellipsoid, so
    interiority is preserved by self-concordance (a halving safeguard covers
    float rounding at extreme conditioning).
    """
    if not 0.0 < tol <= 0.1:
        raise PreconditionError(f"tol={tol} outside (0, 0.1]")
    if eta < 0:
        raise PreconditionError(f"eta={eta} is negative")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    c = np.atleast_1d(np.asarray(c, dtype=float))
    require_interior(b, x, what="x0")
    lam = np.inf
    for _ in range(max_steps):
        lam, d, H = _decrement_direction(b, c, eta, x)
        if lam <= tol:
            return PathPoint(eta=float(eta), x=x, newton_decrement=lam,
                             hessian_at_x=H)
        step = d / (1.0 + lam) if lam > DAMPED_PHASE_THRESHOLD else d
        xn = x + step
        shrink = 0
        while not b.domain_test(xn) and shrink < 60:
            step *= 0.5
            xn = x + step
            shrink += 1
        if shrink == 60:
            raise NonConvergenceError(
                f"centering step left the domain at eta={eta}, "
                f"decrement {lam:.3e}", residuals=np.array([lam]))
        x = xn
    raise NonConvergenceError(
        f"centering did not reach tol={tol} in {max_steps} steps; "
        f"last decrement {lam:.6e}", residuals=np.array([lam]))


@dataclass
class StabilityReport:
    eta: float
    eta_prime: float
    delta: float
    distance: float
    limit: float
    passed: bool


def check_path_stability(b: Barrier, c, eta: float, eta_prime: float,
                         delta: float, x0=None, tol: float = 1e-10) -> StabilityReport:
    """Distance between consecutive centers in the local norm at x_eta.

    Requires eta <= eta' <= (1 + delta/sqrt(theta)) eta and passes when
    ||x_eta - x_eta'||_{x_eta} <= 3 delta (the constant is an empirical
    stand-in for an unspecified universal one).
    """
    if not eta <= eta_prime <= (1.0 + delta / np.sqrt(b.theta)) * eta * (1 + 1e-12):
        raise PreconditionError(
            f"eta'={eta_prime} outside [eta, (1+delta/sqrt(theta)) eta] "
            f"= [{eta}, {(1.0 + delta / np.sqrt(b.theta)) * eta}]")
    if x0 is None:
        x0 = _default_start(b)
    p = center(b, c, eta, x0, tol=tol)
    q = center(b, c, eta_prime, p.x, tol=tol)
    dist = local_norm(b, p.x, q.x - p.x)
    limit = STABILITY_CONSTANT * delta
    return StabilityReport(eta=float(eta), eta_prime=float(eta_prime),
                           delta=float(delta), distance=dist, limit=limit,
                           passed=bool(dist <= limit))


@dataclass
class GapCheckReport:
    gap: float
    bound: float
    slack: float
    passed: bool


def duality_gap_check(b: Barrier, c, p: PathPoint, val: float,
                      slack: float = 1e-6) -> GapCheckReport:
    """c.x_eta - val <= theta/eta plus a small slack for inexact centering."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    gap = float(c @ p.x) - float(val)
    bound = b.theta / p.eta if p.eta > 0 else np.inf
    return GapCheckReport(gap=gap, bound=bound, slack=slack,
                          passed=bool(gap <= bound + slack))


def _default_start(b: Barrier) -> np.ndarray:
    if b.sample_box is not None:
        lo, hi = (np.asarray(a, dtype=float) for a in b.sample_box)
        return 0.5 * (lo + hi)
    return np.zeros(b.dim)


@dataclass(frozen=True)
class EtaSchedule:
    """Annealing schedule: eta grows by 1 + kappa/sqrt((n + 2 gamma chi) theta)
    per step, chi being the spectral norm of the inverse-sqrt local metric in
    Euclidean mode and exactly 1 in Riemannian mode; runs until theta/eps."""

    etas: tuple
    mode: str
    kappa: float
    gamma: float
    theta: float
    eps: float
    chis: tuple

    @property
    def steps(self) -> int:
        return len(self.etas) - 1

    def head(self, k: int) -> "EtaSchedule":
        """The first k rungs with the same parameters (k >= 1)."""
        if not 1 <= k <= len(self.etas):
            raise PreconditionError(
                f"cannot take {k} rungs of a {len(self.etas)}-entry schedule")
        return EtaSchedule(etas=self.etas[:k], mode=self.mode,
                           kappa=self.kappa, gamma=self.gamma,
                           theta=self.theta, eps=self.eps,
                           chis=self.chis[:k])


def schedule_ratio(n: int, gamma: float, chi: float, theta: float,
                   kappa: float) -> float:
    return 1.0 + kappa / np.sqrt((n + 2.0 * gamma * chi) * theta)


def eta_schedule(b: Barrier, c, gamma: float, eps: float,
                 kappa: float = 0.1, mode: str = "riemannian",
                 eta0: float = 1.0, x0=None, tol: float = 1e-8,
                 max_entries: int = 200_000) -> EtaSchedule:
    """Generate the eta ladder from eta0 up to at least theta/eps.

    Riemannian mode is closed-form; Euclidean mode re-centers at every rung
    (warm-started) to measure chi = lambda_min(g)^{-1/2} before taking the
    step.
    """
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"eps={eps} outside (0, 1)")
    if not 0.0 < kappa <= 1.0:
        raise PreconditionError(f"kappa={kappa} outside (0, 1]")
    if mode not in ("euclidean", "riemannian"):
        raise PreconditionError(f"unknown mode {mode!r}")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = b.dim
    target = b.theta / eps
    etas = [float(eta0)]
    chis = []
    x = np.atleast_1d(np.asarray(x0, dtype=float)) if x0 is not None \
        else _default_start(b)
    while etas[-1] < target:
        if mode == "euclidean":
            p = center(b, c, etas[-1], x, tol=tol)
            x = p.x
            chi = float(np.min(np.linalg.eigvalsh(p.hessian_at_x))) ** -0.5
        else:
            chi = 1.0
        chis.append(chi)
        etas.append(etas[-1] * schedule_ratio(n, gamma, chi, b.theta, kappa))
        if len(etas) > max_entries:
            raise ConfigError(
                f"schedule exceeded {max_entries} entries before reaching "
                f"theta/eps = {target:.3g}; raise kappa or eps")
    return EtaSchedule(etas=tuple(etas), mode=mode, kappa=float(kappa),
                       gamma=float(gamma), theta=float(b.theta),
                       eps=float(eps), chis=tuple(chis))


def follow_path(b: Barrier, c, schedule: EtaSchedule, x0=None,
                tol: float = 1e-8) -> list:
    """Center at every eta of the schedule, warm-starting each rung from the
    previous center."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)) if x0 is not None \
        else _default_start(b)
    points = []
    for eta in schedule.etas:
        p = center(b, c, eta, x, tol=tol)
        points.append(p)
        x = p.x
    return points


def write_path_csv(path, b: Barrier, c, points: Sequence[PathPoint],
                   val: float) -> None:
    """CSV rows (eta, x..., decrement, gap_bound, gap_actual)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eta"] + [f"x{i}" for i in range(b.dim)]
                    + ["decrement", "gap_bound", "gap_actual"])
        for p in points:
            bound = b.theta / p.eta if p.eta > 0 else np.inf
            gap = float(c @ p.x) - float(val)
            wr.writerow([repr(p.eta)] + [repr(float(v)) for v in p.x]
                        + [repr(p.newton_decrement), repr(bound), repr(gap)])


# ---------------------------------------------------------------------------
# Gaussian TV / overlap bounds
# ---------------------------------------------------------------------------

_EIG_FLOOR = 0.5 - 1e-12


def _sqrtm_inv_spd(S: np.ndarray):
    w, U = np.linalg.eigh(S)
    if np.min(w) <= 0:
        raise PreconditionError("covariance is not SPD")
    return (U * (w ** -0.5)) @ U.T, (U * (1.0 / w)) @ U.T


def gaussian_tv_bound(mu1, S1, mu2, S2) -> float:
    """Upper bound on TV(N(mu1,S1), N(mu2,S2)):
    1/2 sqrt(|S2^{-1/2} S1 S2^{-1/2} - I|_F^2 + (mu2-mu1)' S2^{-1} (mu2-mu1)).

    Valid when every eigenvalue of the whitened ratio is >= 1/2; violating
    that hypothesis raises.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    S1 = np.atleast_2d(np.asarray(S1, dtype=float))
    S2 = np.atleast_2d(np.asarray(S2, dtype=float))
    if np.min(np.linalg.eigvalsh(S1)) <= 0:
        raise PreconditionError("S1 is not SPD")
    R, S2inv = _sqrtm_inv_spd(S2)
    M = R @ S1 @ R
    M = 0.5 * (M + M.T)
    w = np.linalg.eigvalsh(M)
    if np.min(w) < _EIG_FLOOR:
        raise PreconditionError(
            f"whitened covariance ratio has eigenvalue {np.min(w):.6f} < 1/2; "
            "the bound's hypothesis fails")
    fro2 = float(np.sum((M - np.eye(M.shape[0])) ** 2))
    d = mu2 - mu1
    mean_term = float(d @ (S2inv @ d))
    return 0.5 * np.sqrt(fro2 + mean_term)


def ground_overlap_bound(b: Barrier, x, y, gamma: float,
                         mode: str = "riemannian") -> float:
    """TV bound between the harmonic-approximation ground densities at two
    nearby points: Gaussians with covariance (2 gamma sqrt(g))^{-1}
    (Euclidean) or (2 gamma g)^{-1} (Riemannian), evaluated at x and y.

    Requires ||y - x||_x < 1/4, which keeps the whitened-ratio eigenvalues
    above 1/2 via Hessian stability. The covariance at x plays the
    conditioning role (S2), so the local metric g_x appears in the bound.
    """
    from .operator import sqrtm_spd

    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    require_interior(b, x)
    require_interior(b, y)
    r = local_norm(b, x, y - x)
    if r >= 0.25:
        raise PreconditionError(f"||y-x||_x = {r:.4f} >= 1/4")
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    gx, gy = b.hessian(x), b.hessian(y)
    if mode == "euclidean":
        Sx = np.linalg.inv(2.0 * gamma * sqrtm_spd(gx))
        Sy = np.linalg.inv(2.0 * gamma * sqrtm_spd(gy))
    elif mode == "riemannian":
        Sx = np.linalg.inv(2.0 * gamma * gx)
        Sy = np.linalg.inv(2.0 * gamma * gy)
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    return gaussian_tv_bound(y, Sy, x, Sx)


@dataclass
class HellingerBracket:
    lower: float
    upper: float
    overlap: float
    tv: float


def hellinger_overlap_bracket(u, v, cell_volume: float = 1.0) -> HellingerBracket:
    """Bracket (1 - TV, sqrt(1 - TV^2)) on the amplitude overlap
    sum(sqrt(u v)) of two densities under the grid measure; the directly
    computed overlap is checked against the bracket."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.min(u) < -1e-15 or np.min(v) < -1e-15:
        raise NormalizationError("densities must be nonnegative")
    su = float(np.sum(u) * cell_volume)
    sv = float(np.sum(v) * cell_volume)
    if abs(su - 1.0) > 1e-8 or abs(sv - 1.0) > 1e-8:
        raise NormalizationError(
            f"densities must sum to 1 under the grid measure "
            f"(got {su:.10f}, {sv:.10f})")
    tv = 0.5 * float(np.sum(np.abs(u - v)) * cell_volume)
    ov = float(np.sum(np.sqrt(np.clip(u, 0, None) * np.clip(v, 0, None)))
               * cell_volume)
    lower = 1.0 - tv
    upper = float(np.sqrt(max(1.0 - tv * tv, 0.0)))
    if not lower - 1e-9 <= ov <= upper + 1e-9:
        raise BarrierLabError(
            f"Hellinger bracket violated: {lower} <= {ov} <= {upper}")
    return HellingerBracket(lower=lower, upper=upper, overlap=ov, tv=tv)
