"""Laplacian-prior vertex regression on the extended line graph.

Vertex scores are written as ``beta = Phi[:, :tau] @ theta`` with Phi the
ascending-eigenvalue eigenvectors of the weighted Laplacian. Because Phi is
orthonormal, the Gaussian likelihood and the prior ``lam * theta_i^2 * xi_i``
decouple per coordinate, and the MAP estimate is a per-coordinate shrinkage:
``theta_i = phi_i' y / (1 + kappa * xi_i)`` with ``kappa = lam * sigma^2``.
Null directions of the Laplacian (one per connected component) carry no
penalty, so the prior is never inverted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import AdaptationWarning, DomainError, InsufficientData
from .metrics import MetricResult, RankedTable, rank_scores
from .model import AggregatedRecord, GeneralizedLineup, LineGraph, build_line_graph
from .regression import fold_ids

TARGET_ACCEPT = 0.574
SECONDS_PER_48 = 2880.0


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    nodes: tuple[GeneralizedLineup, ...]
    phi: np.ndarray
    xi: np.ndarray
    tau: int
    elbow_diagnostics: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n(self) -> int:
        return self.phi.shape[0]


@dataclass
class LapmFit:
    nodes: tuple[GeneralizedLineup, ...]
    beta_map: np.ndarray
    theta_map: np.ndarray
    kappa: float
    sigma2_hat: float
    tau: int
    cv_curve: list[tuple[float, float]] = field(default_factory=list)

    def scores(self) -> dict[GeneralizedLineup, float]:
        return {g: float(b) for g, b in zip(self.nodes, self.beta_map)}


@dataclass(frozen=True)
class MalaSchedule:
    retained: int = 1000
    thin: int = 5
    burn_in_fraction: float = 0.10

    def __post_init__(self):
        if self.retained < 1 or self.thin < 1 or not 0 <= self.burn_in_fraction < 1:
            raise ValueError(f"invalid MALA schedule {self}")

    @property
    def total_iters(self) -> int:
        return math.ceil(self.retained * self.thin / (1 - self.burn_in_fraction))

    @property
    def burn_in(self) -> int:
        return self.total_iters - self.retained * self.thin


@dataclass
class PosteriorSamples:
    theta_draws: np.ndarray
    sigma2_draws: np.ndarray
    schedule: MalaSchedule
    step_size: float
    acceptance_rate: float
    seed: int
    lam: float

    def beta_draws(self, basis: SpectralBasis) -> np.ndarray:
        return self.theta_draws @ basis.phi.T


def select_tau(xi, min_tau: int = 5) -> int:
    """Elbow rule: keep eigenvectors up to the largest forward gap in the spectrum.

    The last position attaining the maximal gap wins. The result is never
    below ``min(min_tau, len(xi))``.
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    if n < 2:
        raise ValueError("need at least two eigenvalues")
    gaps = np.diff(xi)
    top = np.flatnonzero(gaps == gaps.max())
    tau = int(top[-1]) + 1
    return max(tau, min(min_tau, n))


def spectral_basis(lg: LineGraph, tau="elbow", min_tau: int = 5) -> SpectralBasis:
    """Truncate the line graph eigenbasis: ``tau`` is 'elbow', 'full' or an int."""
    xi_all = lg.eigenvalues
    n = xi_all.size
    if tau == "full" or n < 2:
        t = n
    elif tau == "elbow":
        t = select_tau(xi_all, min_tau=min_tau)
    else:
        t = int(tau)
        if not 1 <= t <= n:
            raise ValueError(f"tau must lie in [1, {n}]")
    return SpectralBasis(
        nodes=lg.nodes,
        phi=lg.eigenvectors[:, :t].copy(),
        xi=xi_all[:t].copy(),
        tau=t,
        elbow_diagnostics=np.diff(xi_all),
    )


def vertex_response(lg: LineGraph, normalize: bool = False) -> np.ndarray:
    """Season plus-minus per vertex, optionally per 48 minutes on court."""
    if not normalize:
        return lg.y.copy()
    return lg.y / np.maximum(lg.seconds, 1e-12) * SECONDS_PER_48


def solve_theta(phi, xi, y, kappa, weights=None) -> np.ndarray:
    """Minimize sum_v w_v (y_v - (phi theta)_v)^2 + kappa sum_i xi_i theta_i^2.

    Zero weights mark unobserved vertices. With unit weights the system is
    diagonal and solved coordinate-wise.
    """
    if weights is None:
        return (phi.T @ y) / (1.0 + kappa * xi)
    A = phi.T @ (weights[:, None] * phi) + kappa * np.diag(xi)
    b = phi.T @ (weights * y)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _kappa_path(basis: SpectralBasis, y, weights, grid):
    """Vertex fits for every kappa from one generalized eigendecomposition.

    With B = Phi' D Phi and M = B + Xi, solving Xi v = mu M v gives
    V' M V = I and V' Xi V = diag(mu), hence
    (B + kappa Xi)^-1 = V diag(1 / (1 + (kappa - 1) mu)) V'.
    """
    phi, xi = basis.phi, basis.xi
    B = phi.T @ (weights[:, None] * phi)
    M = B + np.diag(xi) + 1e-12 * np.eye(basis.tau)
    mu, V = eigh(np.diag(xi), M)
    c = V.T @ (phi.T @ (weights * y))
    return [phi @ (V @ (c / (1.0 + (k - 1.0) * mu))) for k in grid]


def kappa_grid(xi, n: int = 100, lo: float = 1e-4, hi: float = 1e4) -> np.ndarray:
    """Log grid centred where kappa times the median positive eigenvalue is 1."""
    pos = np.asarray(xi)[np.asarray(xi) > 1e-10]
    scale = 1.0 / float(np.median(pos)) if pos.size else 1.0
    return np.logspace(np.log10(lo), np.log10(hi), n) * scale


def lapm_cv(lg: LineGraph, basis: SpectralBasis, grid=None, folds: int = 10, seed: int = 0,
            y=None, weights=None) -> tuple[float, list[tuple[float, float]]]:
    """Pick kappa by k-fold CV over held-out vertices; ties go to the larger kappa."""
    y = lg.y if y is None else y
    n = basis.n
    grid = kappa_grid(lg.eigenvalues) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 1:
        return float(grid[0]), [(float(grid[0]), float("nan"))]
    if n < 2:
        raise InsufficientData(f"{n} vertex cannot be cross-validated")
    folds = min(folds, n)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    ids = fold_ids(n, folds, seed)
    sse = np.zeros(grid.size)
    for f in range(folds):
        test = ids == f
        wt = np.where(test, 0.0, w)
        for g, beta in enumerate(_kappa_path(basis, y, wt, grid)):
            sse[g] += float(w[test] @ (y[test] - beta[test]) ** 2)
    err = sse / w.sum()
    best = np.flatnonzero(err <= err.min() * (1 + 1e-12) + 1e-300)
    j = best[np.argmax(grid[best])]
    return float(grid[j]), [(float(k), float(e)) for k, e in zip(grid, err)]


def lapm_map(lg: LineGraph, basis: SpectralBasis, kappa: float, y=None, weights=None) -> LapmFit:
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    y = lg.y if y is None else np.asarray(y, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)
    theta = solve_theta(basis.phi, basis.xi, y, kappa, w)
    beta = basis.phi @ theta
    resid = y - beta
    rss = float(resid @ resid) if w is None else float(w @ resid**2)
    df = float(np.sum(1.0 / (1.0 + kappa * basis.xi)))
    sigma2 = rss / max(basis.n - df, 1.0)
    return LapmFit(basis.nodes, beta, theta, float(kappa), sigma2, basis.tau)


def log_posterior(theta, sigma2, y, basis: SpectralBasis, lam: float, weights=None) -> float:
    """Log density of (theta, sigma2) up to a constant, with p(sigma2) ~ 1/sigma2."""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    n = basis.n
    resid = y - basis.phi @ theta
    rss = float(resid @ resid) if weights is None else float(weights @ resid**2)
    return (
        -0.5 * rss / sigma2
        - 0.5 * n * math.log(sigma2)
        - 0.5 * lam * float(basis.xi @ theta**2)
        - math.log(sigma2)
    )


def grad_log_posterior(theta, sigma2, lg_or_y, basis: SpectralBasis, lam: float,
                       weights=None) -> tuple[np.ndarray, float]:
    """Gradient of :func:`log_posterior` with respect to theta and sigma2."""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    y = lg_or_y.y if isinstance(lg_or_y, LineGraph) else np.asarray(lg_or_y, dtype=float)
    resid = y - basis.phi @ theta
    wr = resid if weights is None else weights * resid
    g_theta = basis.phi.T @ wr / sigma2 - lam * basis.xi * theta
    rss = float(resid @ wr)
    g_sigma2 = -0.5 * basis.n / sigma2 + 0.5 * rss / sigma2**2 - 1.0 / sigma2
    return g_theta, g_sigma2


def mala_sample(
    lg: LineGraph,
    basis: SpectralBasis,
    lam: float,
    schedule: MalaSchedule | None = None,
    seed: int = 0,
    sigma2: float | None = None,
    sigma2_update: str = "gibbs",
    y=None,
    weights=None,
    theta0=None,
    precondition: bool = True,
    step_size: float | None = None,
) -> PosteriorSamples:
    """Sample the LAPM posterior with Metropolis-adjusted Langevin steps on theta.

    ``sigma2_update`` is 'gibbs' (inverse-gamma draw between MALA steps),
    'mala' (joint Langevin move on (theta, log sigma2)) or 'fixed' (sigma2
    held at the given value). The step size adapts during burn-in towards a
    0.574 acceptance rate and is frozen afterwards. With ``precondition`` the
    Langevin drift and noise are scaled by the conditional posterior variance
    of each coordinate at the starting sigma2.
    """
    schedule = schedule or MalaSchedule()
    if sigma2_update not in ("gibbs", "mala", "fixed"):
        raise ValueError(f"unknown sigma2_update {sigma2_update!r}")
    rng = np.random.default_rng(seed)
    y = lg.y if y is None else np.asarray(y, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)
    n, tau = basis.n, basis.tau
    phi, xi = basis.phi, basis.xi

    if theta0 is None or sigma2 is None:
        kappa0 = lam * (sigma2 if sigma2 is not None else 1.0)
        start = lapm_map(lg, basis, kappa0, y=y, weights=w)
        theta = start.theta_map.copy() if theta0 is None else np.asarray(theta0, float).copy()
        s2 = sigma2 if sigma2 is not None else max(start.sigma2_hat, 1e-8)
    else:
        theta = np.asarray(theta0, dtype=float).copy()
        s2 = float(sigma2)
    if s2 <= 0:
        raise DomainError("sigma2 must be positive")

    joint = sigma2_update == "mala"
    dim = tau + (1 if joint else 0)
    if precondition:
        m_theta = 1.0 / (1.0 / s2 + lam * xi)
    else:
        m_theta = np.ones(tau)
    mass = np.append(m_theta, 2.0 / n) if joint else m_theta
    sqrt_mass = np.sqrt(mass)

    def state():
        return np.append(theta, math.log(s2)) if joint else theta.copy()

    def logp_grad(z):
        th = z[:tau]
        v = math.exp(z[tau]) if joint else s2
        lp = log_posterior(th, v, y, basis, lam, w)
        g_th, g_v = grad_log_posterior(th, v, y, basis, lam, w)
        if joint:
            # change of variables to log sigma2 adds log|d sigma2 / d s| = s
            return lp + z[tau], np.append(g_th, v * g_v + 1.0)
        return lp, g_th

    eps = step_size if step_size is not None else 1.65 * dim ** (-1 / 6)
    log_eps = math.log(eps)
    z = state()
    lp, g = logp_grad(z)
    keep_theta = np.empty((schedule.retained, tau))
    keep_s2 = np.empty(schedule.retained)
    accepted = 0
    post_burn = 0
    kept = 0
    burn = schedule.burn_in

    for it in range(schedule.total_iters):
        eps = math.exp(log_eps)
        mean_fwd = z + 0.5 * eps**2 * mass * g
        prop = mean_fwd + eps * sqrt_mass * rng.standard_normal(dim)
        lp_p, g_p = logp_grad(prop)
        mean_bwd = prop + 0.5 * eps**2 * mass * g_p
        log_q_fwd = -0.5 * np.sum((prop - mean_fwd) ** 2 / mass) / eps**2
        log_q_bwd = -0.5 * np.sum((z - mean_bwd) ** 2 / mass) / eps**2
        log_alpha = lp_p - lp + log_q_bwd - log_q_fwd
        alpha = 1.0 if log_alpha >= 0 else math.exp(log_alpha)
        if rng.uniform() < alpha:
            z, lp, g = prop, lp_p, g_p
            if it >= burn:
                accepted += 1
        if it < burn:
            log_eps += (alpha - TARGET_ACCEPT) / (it + 1) ** 0.6
        else:
            post_burn += 1

        theta = z[:tau]
        if joint:
            s2 = math.exp(z[tau])
        elif sigma2_update == "gibbs":
            resid = y - phi @ theta
            rss = float(resid @ resid) if w is None else float(w @ resid**2)
            s2 = 0.5 * rss / rng.gamma(0.5 * n)
            lp, g = logp_grad(z)

        if it >= burn and (it - burn + 1) % schedule.thin == 0:
            keep_theta[kept] = theta
            keep_s2[kept] = s2
            kept += 1

    rate = accepted / max(post_burn, 1)
    if not 0.1 <= rate <= 0.9:
        warnings.warn(f"MALA acceptance rate {rate:.3f} outside [0.1, 0.9]", AdaptationWarning)
    return PosteriorSamples(
        theta_draws=keep_theta,
        sigma2_draws=keep_s2,
        schedule=schedule,
        step_size=math.exp(log_eps),
        acceptance_rate=rate,
        seed=seed,
        lam=float(lam),
    )


def batch_means_se(draws: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Monte-Carlo standard error of the column means by non-overlapping batch means."""
    draws = np.asarray(draws, dtype=float)
    size = draws.shape[0] // n_batches
    if size < 1:
        raise ValueError("too few draws for the requested batches")
    means = draws[: size * n_batches].reshape(n_batches, size, *draws.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(n_batches)


def lapm_rank(fit_or_samples, m: int, basis: SpectralBasis | None = None) -> RankedTable:
    """Within-size ranking of MAP vertex scores or posterior-mean vertex scores."""
    if isinstance(fit_or_samples, PosteriorSamples):
        if basis is None:
            raise ValueError("ranking posterior draws needs the spectral basis")
        mean = fit_or_samples.beta_draws(basis).mean(axis=0)
        scores = dict(zip(basis.nodes, mean.tolist()))
    elif isinstance(fit_or_samples, LapmFit):
        scores = fit_or_samples.scores()
    else:
        scores = fit_or_samples.per_unit
    return rank_scores("LAPM", scores, m)


@dataclass
class LapmConfig:
    tau: object = "elbow"
    kappa: float | None = None
    folds: int = 10
    seed: int = 0
    n_grid: int = 100
    min_tau: int = 5
    normalize: bool = False
    weighted: bool = False


def lapm(records: list[AggregatedRecord], cfg: LapmConfig | None = None):
    """Fit LAPM on a team's extended records; returns (MetricResult, LapmFit, basis, graph)."""
    cfg = cfg or LapmConfig()
    lg = build_line_graph(records)
    basis = spectral_basis(lg, cfg.tau, min_tau=cfg.min_tau)
    y = vertex_response(lg, cfg.normalize)
    w = lg.seconds if cfg.weighted else None
    curve = []
    if cfg.kappa is None:
        kappa, curve = lapm_cv(lg, basis, grid=kappa_grid(lg.eigenvalues, n=cfg.n_grid),
                               folds=cfg.folds, seed=cfg.seed, y=y, weights=w)
    else:
        kappa = float(cfg.kappa)
    fit = lapm_map(lg, basis, kappa, y=y, weights=w)
    fit.cv_curve = curve
    meta = {
        "kappa": fit.kappa,
        "kappa_policy": "fixed" if cfg.kappa is not None else "cv",
        "tau": basis.tau,
        "n_vertices": basis.n,
        "components": lg.n_components(),
        "sigma2_hat": fit.sigma2_hat,
        "folds": cfg.folds,
        "seed": cfg.seed,
    }
    return MetricResult("LAPM", fit.scores(), meta), fit, basis, lg
