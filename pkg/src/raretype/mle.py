"""Hyperparameter estimation from an observed partition.

The log-likelihood of (alpha, theta) given a partition is the log
partition law, a function of the block-size multiset alone. It is
maximized in unconstrained coordinates (logit(alpha), log(theta+1)) by a
quasi-Newton search with analytic gradients, multi-started from a coarse
5x5 grid to guard against flat ridges.

The reparametrization phi = n(1-alpha)/(n+1+theta) is the posterior
quantity the plug-in likelihood ratio divides into n; the observed
information at the optimum, taken in (phi, theta) coordinates by central
finite differences, supplies the Gaussian overlay used to judge whether
the plug-in is defensible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import digamma, expit, gammaln, logit

from .partitions import IntegerPartition, SetPartition, to_integer_partition
from .pitman import PdParams

__all__ = [
    "MleFit",
    "SurfaceGrid",
    "LoglikSurface",
    "SymmetryReport",
    "fit_mle",
    "phi_of",
    "theta_alpha_of",
    "loglik_surface",
    "symmetry_diagnostic",
]

_EPS = float(np.finfo(float).eps)
_FD_STEP = _EPS ** (1.0 / 3.0)  # cube-root-of-epsilon scaling
_BOUNDARY_MARGIN = 1e-4
_GRAD_TOL = 1e-6
_THETA_DIVERGENCE = 1e8
_PENALTY = 1e12


def phi_of(params: PdParams, n: int) -> float:
    """phi = n (1 - alpha) / (n + 1 + theta) for a database of size n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * (1.0 - params.alpha) / (n + 1.0 + params.theta)


def theta_alpha_of(phi: float, theta: float, n: int) -> PdParams:
    """Invert the reparametrization at fixed n; errors if alpha leaves (0, 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = 1.0 - phi * (n + 1.0 + theta) / n
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"(phi={phi}, theta={theta}) maps to alpha={alpha} outside (0, 1)")
    return PdParams(alpha=alpha, theta=theta)


def _loglik_terms(part: IntegerPartition):
    """Precompute the arrays the likelihood kernel needs."""
    a = np.asarray(part.a, dtype=float)
    r = np.asarray(part.r, dtype=float)
    big = a > 1
    return part.n, part.k, a[big], r[big]


def _loglik_and_grad(n, k, a_big, r_big, alpha, theta):
    """Partition log-likelihood and its gradient in (alpha, theta).

    The two long rising factorials are summed directly (gamma-function
    differences cancel catastrophically once theta dwarfs the counts);
    the block-size products use gammaln, whose arguments stay small.
    Returns (-inf, 0, 0) outside the open domain.
    """
    if not (0.0 < alpha < 1.0 and theta > -alpha) or not math.isfinite(theta):
        return -math.inf, 0.0, 0.0
    val = 0.0
    g_alpha = 0.0
    g_theta = 0.0
    if k > 1:
        i = np.arange(1.0, k)
        factors = theta + alpha * i
        val += float(np.log(factors).sum())
        inv = 1.0 / factors
        g_theta += float(inv.sum())
        g_alpha += float((i * inv).sum())
    i = np.arange(1.0, n)
    factors = theta + i
    val -= float(np.log(factors).sum())
    g_theta -= float((1.0 / factors).sum())
    if a_big.size:
        val += float(r_big @ (gammaln(a_big - alpha) - gammaln(1.0 - alpha)))
        g_alpha += float(r_big @ (digamma(1.0 - alpha) - digamma(a_big - alpha)))
    return val, g_alpha, g_theta


def _to_z(alpha: float, theta: float) -> np.ndarray:
    return np.array([logit(alpha), math.log1p(theta)])


def _from_z(z) -> tuple[float, float]:
    return float(expit(z[0])), float(math.expm1(z[1]))


def _make_objective(part: IntegerPartition) -> Callable:
    n, k, a_big, r_big = _loglik_terms(part)

    def neg_loglik(z):
        alpha, theta = _from_z(z)
        alpha = min(max(alpha, 1e-12), 1.0 - 1e-12)
        if theta <= -alpha:
            # steer back toward the valid wedge theta > -alpha
            return _PENALTY * (1.0 + abs(z[1])), np.array([0.0, -_PENALTY])
        val, ga, gt = _loglik_and_grad(n, k, a_big, r_big, alpha, theta)
        if not math.isfinite(val):
            return _PENALTY, np.zeros(2)
        # chain rule to (logit alpha, log(theta+1))
        grad = np.array([ga * alpha * (1.0 - alpha), gt * (theta + 1.0)])
        return -val, -grad

    return neg_loglik


@dataclass(frozen=True)
class MleFit:
    """Fitted hyperparameters with convergence metadata.

    ``hessian`` holds the second derivatives of the log-likelihood at the
    optimum in (phi, theta) coordinates; the Gaussian approximation has
    covariance inv(-hessian) (observed information standing in for the
    Fisher information). ``n`` is the size of the fitted partition.
    """

    n: int
    alpha_hat: Optional[float]
    theta_hat: Optional[float]
    loglik_at_max: Optional[float]
    phi_hat: Optional[float]
    hessian: Optional[tuple[tuple[float, float], tuple[float, float]]]
    converged: bool
    iterations: int
    diagnosis: Optional[str] = None
    warnings: tuple[str, ...] = ()

    def params(self) -> PdParams:
        if self.alpha_hat is None or self.theta_hat is None:
            raise ValueError(f"fit did not produce estimates: {self.diagnosis}")
        return PdParams(alpha=self.alpha_hat, theta=self.theta_hat)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha_hat": self.alpha_hat,
            "theta_hat": self.theta_hat,
            "phi_hat": self.phi_hat,
            "loglik": self.loglik_at_max,
            "hessian": [list(row) for row in self.hessian] if self.hessian else None,
            "converged": self.converged,
            "iterations": self.iterations,
            "diagnosis": self.diagnosis,
            "warnings": list(self.warnings),
        }


def _degenerate_fit(part: IntegerPartition, diagnosis: str, warnings: tuple[str, ...]) -> MleFit:
    return MleFit(
        n=part.n,
        alpha_hat=None,
        theta_hat=None,
        loglik_at_max=None,
        phi_hat=None,
        hessian=None,
        converged=False,
        iterations=0,
        diagnosis=diagnosis,
        warnings=warnings,
    )


def _fd_hessian(f: Callable[[float, float], float], x0: float, x1: float) -> np.ndarray:
    h0 = _FD_STEP * max(1.0, abs(x0))
    h1 = _FD_STEP * max(1.0, abs(x1))
    f00 = f(x0, x1)
    h = np.empty((2, 2))
    h[0, 0] = (f(x0 + h0, x1) - 2.0 * f00 + f(x0 - h0, x1)) / h0**2
    h[1, 1] = (f(x0, x1 + h1) - 2.0 * f00 + f(x0, x1 - h1)) / h1**2
    h[0, 1] = h[1, 0] = (
        f(x0 + h0, x1 + h1) - f(x0 + h0, x1 - h1) - f(x0 - h0, x1 + h1) + f(x0 - h0, x1 - h1)
    ) / (4.0 * h0 * h1)
    return h


def _phi_theta_loglik(part: IntegerPartition) -> Callable[[float, float], float]:
    n, k, a_big, r_big = _loglik_terms(part)

    def f(phi, theta):
        alpha = 1.0 - phi * (n + 1.0 + theta) / n
        val, _, _ = _loglik_and_grad(n, k, a_big, r_big, alpha, theta)
        return val

    return f


_START_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
_START_THETAS = (0.0, 1.0, 10.0, 100.0, 1000.0)


def _newton_polish(objective, z0, max_iter: int = 40):
    """Newton refinement of the stationarity condition grad = 0.

    Near the optimum the objective value sits at its float noise floor, so
    steps are judged by the analytic gradient norm instead; the Hessian
    comes from central differences of that gradient. Terminates once an
    accepted step moves less than 1e-8 and changes the objective by less
    than 1e-9, or the gradient is negligible. Returns
    (z, f(z), iterations, terminated-cleanly flag).
    """
    z = np.asarray(z0, dtype=float)
    f, g = objective(z)
    stable = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-10:
            stable = True
            break
        hess = np.empty((2, 2))
        for j in range(2):
            h = math.sqrt(_EPS) * max(1.0, abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            hess[:, j] = (objective(zp)[1] - objective(zm)[1]) / (2.0 * h)
        hess = 0.5 * (hess + hess.T)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        accepted = False
        while t > 1e-8:
            z_new = z - t * step
            f_new, g_new = objective(z_new)
            # shrink the gradient without drifting uphill beyond noise
            if float(np.linalg.norm(g_new)) < gnorm and f_new <= f + 1e-6:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            stable = True  # gradient at its numerical floor
            break
        moved = float(np.max(np.abs(z_new - z)))
        drifted = abs(float(f - f_new))
        z, f, g = z_new, f_new, g_new
        if moved < 1e-8 and drifted < 1e-9:
            stable = True
            break
    return z, f, it, stable


def fit_mle(
    pi: Union[IntegerPartition, SetPartition],
    *,
    small_n_threshold: int = 500,
) -> MleFit:
    """Maximize the partition log-likelihood over the open (alpha, theta) domain.

    Degenerate partitions are reported rather than fitted: with no
    repeated type the likelihood climbs forever toward alpha -> 1 /
    theta -> inf, and a single-block sample pushes the other way. A
    converged fit requires an interior optimum with gradient norm below
    1e-6 in the search coordinates; near-boundary optima are flagged, not
    clamped. Fits on partitions smaller than ``small_n_threshold`` carry a
    warning that the Gaussian shape of the likelihood is not established
    at that scale.
    """
    part = pi if isinstance(pi, IntegerPartition) else to_integer_partition(pi)
    warnings: tuple[str, ...] = ()
    if part.n < small_n_threshold:
        warnings += (
            f"n={part.n} is below {small_n_threshold}; the Gaussian plug-in "
            "approximation is not validated at this scale",
        )
    if part.n < 2:
        return _degenerate_fit(part, "fewer than two observations", warnings)
    if part.k == 1:
        return _degenerate_fit(
            part,
            "single-block sample: likelihood increases toward the alpha -> 0 boundary",
            warnings,
        )
    if part.k == part.n:
        return _degenerate_fit(
            part,
            "no coincidences observed: likelihood diverges toward theta -> inf "
            "(equivalently alpha -> 1)",
            warnings,
        )

    objective = _make_objective(part)
    best = None
    total_iter = 0
    for a0 in _START_ALPHAS:
        for t0 in _START_THETAS:
            res = minimize(
                objective,
                _to_z(a0, t0),
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-9},
            )
            total_iter += res.nit
            if best is None or res.fun < best.fun:
                best = res
    # Newton polish on the winner: L-BFGS-B's own stopping rule leaves the
    # gradient around 1e-5; a few damped Newton steps finish the job
    z, fz, nit, stable = _newton_polish(objective, best.x)
    total_iter += nit

    alpha_hat, theta_hat = _from_z(z)
    loglik = -float(fz)
    _, grad = objective(z)
    grad_norm = float(np.linalg.norm(grad))

    diagnosis = None
    interior = True
    if theta_hat > _THETA_DIVERGENCE:
        interior = False
        diagnosis = "theta diverged: no interior optimum"
    elif alpha_hat < _BOUNDARY_MARGIN or alpha_hat > 1.0 - _BOUNDARY_MARGIN:
        interior = False
        diagnosis = f"alpha_hat={alpha_hat:.6g} within {_BOUNDARY_MARGIN} of the boundary"
    elif theta_hat + alpha_hat < _BOUNDARY_MARGIN:
        interior = False
        diagnosis = f"theta_hat={theta_hat:.6g} within {_BOUNDARY_MARGIN} of -alpha"

    converged = bool(interior and stable and grad_norm < _GRAD_TOL)
    if not converged and diagnosis is None:
        diagnosis = f"gradient norm {grad_norm:.3g} at termination (tolerance {_GRAD_TOL})"

    params = PdParams(alpha=alpha_hat, theta=theta_hat) if interior else None
    hessian = None
    phi_hat = None
    if params is not None:
        phi_hat = phi_of(params, part.n)
        if converged:
            h = _fd_hessian(_phi_theta_loglik(part), phi_hat, theta_hat)
            hessian = tuple(tuple(float(v) for v in row) for row in h)

    return MleFit(
        n=part.n,
        alpha_hat=alpha_hat,
        theta_hat=theta_hat,
        loglik_at_max=loglik,
        phi_hat=phi_hat,
        hessian=hessian,
        converged=converged,
        iterations=total_iter,
        diagnosis=diagnosis,
        warnings=warnings,
    )


@dataclass(frozen=True)
class SurfaceGrid:
    """Surface sampling plan: odd point counts keep the mode on the grid."""

    n_phi: int = 41
    n_theta: int = 41
    half_width_sd: float = 3.0

    def __post_init__(self) -> None:
        if self.n_phi < 3 or self.n_theta < 3 or self.n_phi % 2 == 0 or self.n_theta % 2 == 0:
            raise ValueError("grid sizes must be odd and >= 3")
        if self.half_width_sd <= 0:
            raise ValueError("half width must be positive")


@dataclass(frozen=True, eq=False)
class LoglikSurface:
    """Relative log-likelihood on a (phi, theta) grid centered at the mode.

    ``rel_loglik`` has its maximum at 0 by construction; ``gauss_overlay``
    is the quadratic 0.5 * d' H d sharing the mode. Points that map
    outside the parameter domain are flagged invalid, never dropped.
    """

    phi: np.ndarray
    theta: np.ndarray
    rel_loglik: np.ndarray
    gauss_overlay: np.ndarray
    valid: np.ndarray
    mode: tuple[float, float]
    hessian: np.ndarray
    covariance: np.ndarray
    metadata: dict = field(default_factory=dict)

    def iter_rows(self):
        for i, phi in enumerate(self.phi):
            for j, theta in enumerate(self.theta):
                yield (
                    float(phi),
                    float(theta),
                    float(self.rel_loglik[i, j]),
                    float(self.gauss_overlay[i, j]),
                    bool(self.valid[i, j]),
                )

    def write_csv(self, fh) -> None:
        fh.write("phi,theta,rel_loglik,gauss_overlay,valid\n")
        for phi, theta, rel, overlay, ok in self.iter_rows():
            rel_s = repr(rel) if ok else ""
            fh.write(f"{phi!r},{theta!r},{rel_s},{overlay!r},{str(ok).lower()}\n")


def loglik_surface(
    pi: Union[IntegerPartition, SetPartition],
    fit: MleFit,
    grid: SurfaceGrid = SurfaceGrid(),
) -> LoglikSurface:
    """Evaluate the relative log-likelihood around a converged fit."""
    if not fit.converged or fit.hessian is None:
        raise ValueError("surface requires a converged fit with an information matrix")
    part = pi if isinstance(pi, IntegerPartition) else to_integer_partition(pi)
    if part.n != fit.n:
        raise ValueError(f"fit was made on n={fit.n}, partition has n={part.n}")
    hess = np.asarray(fit.hessian, dtype=float)
    cov = np.linalg.inv(-hess)
    sd_phi, sd_theta = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])

    phi0, theta0 = fit.phi_hat, fit.theta_hat
    w = grid.half_width_sd
    phis = phi0 + sd_phi * np.linspace(-w, w, grid.n_phi)
    thetas = theta0 + sd_theta * np.linspace(-w, w, grid.n_theta)

    f = _phi_theta_loglik(part)
    values = np.full((grid.n_phi, grid.n_theta), np.nan)
    overlay = np.empty_like(values)
    valid = np.zeros(values.shape, dtype=bool)
    for i, phi in enumerate(phis):
        for j, theta in enumerate(thetas):
            d = np.array([phi - phi0, theta - theta0])
            overlay[i, j] = 0.5 * float(d @ hess @ d)
            v = f(phi, theta)
            if math.isfinite(v):
                values[i, j] = v
                valid[i, j] = True
    if not valid.any():
        raise ValueError("no grid point lies inside the parameter domain")
    values -= np.nanmax(values)
    return LoglikSurface(
        phi=phis,
        theta=thetas,
        rel_loglik=values,
        gauss_overlay=overlay,
        valid=valid,
        mode=(phi0, theta0),
        hessian=hess,
        covariance=cov,
        metadata={
            "information": "observed information at the optimum (finite differences, "
            "cube-root-of-epsilon steps) standing in for Fisher information",
        },
    )


@dataclass(frozen=True)
class SymmetryReport:
    """Worst relative mismatch between the surface at +d and -d offsets."""

    score: float
    worst_offset: Optional[tuple[float, float]]
    pairs_checked: int


def symmetry_diagnostic(surface: LoglikSurface) -> SymmetryReport:
    """Score the mode symmetry of a surface; diagnostic only, no pass/fail.

    Re-centers so the value at the mode is 0 (constant shifts cancel),
    then reports max over offsets d of |l(m+d) - l(m-d)| / |l(m+d)|.
    """
    ci = len(surface.phi) // 2
    cj = len(surface.theta) // 2
    l = surface.rel_loglik - surface.rel_loglik[ci, cj]
    score = 0.0
    worst = None
    pairs = 0
    for di in range(-ci, ci + 1):
        for dj in range(-cj, cj + 1):
            if di == 0 and dj == 0:
                continue
            if not (surface.valid[ci + di, cj + dj] and surface.valid[ci - di, cj - dj]):
                continue
            ref = abs(l[ci + di, cj + dj])
            if ref < 1e-12:
                continue
            pairs += 1
            s = abs(l[ci + di, cj + dj] - l[ci - di, cj - dj]) / ref
            if s > score:
                score = s
                worst = (
                    float(surface.phi[ci + di] - surface.mode[0]),
                    float(surface.theta[cj + dj] - surface.mode[1]),
                )
    return SymmetryReport(score=score, worst_offset=worst, pairs_checked=pairs)
