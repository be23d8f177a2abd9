"""Weighted least squares and weighted ridge with k-fold penalty selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, SingularSystem

SINGULAR_COND = 1e12


@dataclass
class RidgeFit:
    beta: np.ndarray
    lam: float
    fitted: np.ndarray
    cv_curve: list[tuple[float, float]] = field(default_factory=list)
    intercept: float | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.asarray(X, dtype=float) @ self.beta
        if self.intercept is not None:
            out = out + self.intercept
        return out


@dataclass
class CVConfig:
    """How to pick the ridge penalty.

    ``lam`` fixes the penalty; when it is None the penalty is chosen by
    ``folds``-fold cross-validation over ``grid`` (or the default grid).
    """

    lam: float | None = None
    grid: tuple[float, ...] | None = None
    folds: int = 10
    seed: int = 0
    intercept: bool = False
    n_grid: int = 100


def _weights(W, n):
    if W is None:
        return np.ones(n)
    W = np.asarray(W, dtype=float)
    if W.shape != (n,):
        raise ValueError(f"weight vector has shape {W.shape}, expected ({n},)")
    return W


def ols(X, Y, W=None) -> np.ndarray:
    """Minimizer of sum_i w_i (y_i - x_i b)^2 via the normal equations."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    W = _weights(W, len(Y))
    G = X.T @ (W[:, None] * X)
    cond = np.linalg.cond(G) if G.size else 1.0
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularSystem("X'WX is singular; use a ridge penalty", condition=cond)
    return np.linalg.solve(G, X.T @ (W * Y))


def _center(X, Y, W):
    sw = W.sum()
    xm = (W @ X) / sw
    ym = float(W @ Y) / sw
    return X - xm, Y - ym, xm, ym


def ridge(X, Y, W=None, lam: float = 0.0, intercept: bool = False) -> RidgeFit:
    """argmin sum_i w_i (y_i - x_i b)^2 + lam ||b||^2 (intercept unpenalized)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    W = _weights(W, len(Y))
    b0 = None
    if intercept:
        Xc, Yc, xm, ym = _center(X, Y, W)
    else:
        Xc, Yc = X, Y
    if lam == 0:
        beta = ols(Xc, Yc, W)
    else:
        G = Xc.T @ (W[:, None] * Xc) + lam * np.eye(X.shape[1])
        beta = np.linalg.solve(G, Xc.T @ (W * Yc))
    if intercept:
        b0 = ym - float(xm @ beta)
    fitted = X @ beta + (b0 or 0.0)
    return RidgeFit(beta=beta, lam=float(lam), fitted=fitted, intercept=b0)


def lambda_grid(X, Y, W=None, n: int = 100, lo: float = 1e-4, hi: float = 1e4) -> np.ndarray:
    """Log-spaced penalties over [lo, hi] scaled by max |X'WY|."""
    Y = np.asarray(Y, dtype=float)
    W = _weights(W, len(Y))
    scale = float(np.max(np.abs(np.asarray(X, dtype=float).T @ (W * Y)), initial=0.0))
    if scale == 0.0:
        scale = 1.0
    return np.logspace(np.log10(lo), np.log10(hi), n) * scale


def fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.permutation(n) % folds


def _path(G, b, lams):
    """Ridge solutions for every penalty from one eigendecomposition of G."""
    vals, vecs = np.linalg.eigh(G)
    qb = vecs.T @ b
    return [vecs @ (qb / (vals + lam)) for lam in lams]


def ridge_cv(X, Y, W=None, grid=None, folds: int = 10, seed: int = 0,
             intercept: bool = False) -> RidgeFit:
    """Ridge at the penalty with the smallest weighted k-fold CV error.

    Ties go to the larger penalty. The returned ``cv_curve`` lists
    (lambda, weighted mean squared error) for every grid point.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    W = _weights(W, n)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise InsufficientData(f"{n} rows cannot be split into {folds} folds")
    grid = lambda_grid(X, Y, W) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(grid <= 0) and grid.size > 1:
        raise ValueError("cross-validated penalties must be positive")
    if grid.size == 1:
        fit = ridge(X, Y, W, float(grid[0]), intercept=intercept)
        fit.cv_curve = [(float(grid[0]), float("nan"))]
        return fit

    ids = fold_ids(n, folds, seed)
    sse = np.zeros(grid.size)
    for f in range(folds):
        test = ids == f
        train = ~test
        Xt, Yt, Wt = X[train], Y[train], W[train]
        if intercept:
            Xt, Yt, xm, ym = _center(Xt, Yt, Wt)
        G = Xt.T @ (Wt[:, None] * Xt)
        b = Xt.T @ (Wt * Yt)
        for g, beta in enumerate(_path(G, b, grid)):
            pred = X[test] @ beta
            if intercept:
                pred = pred + (ym - xm @ beta)
            sse[g] += float(W[test] @ (Y[test] - pred) ** 2)
    err = sse / W.sum()
    best = np.flatnonzero(err <= err.min() * (1 + 1e-12) + 1e-300)
    j = best[np.argmax(grid[best])]
    fit = ridge(X, Y, W, float(grid[j]), intercept=intercept)
    fit.cv_curve = [(float(l), float(e)) for l, e in zip(grid, err)]
    return fit


def fit_ridge(X, Y, W, cfg: CVConfig) -> RidgeFit:
    if cfg.lam is not None:
        return ridge(X, Y, W, cfg.lam, intercept=cfg.intercept)
    grid = cfg.grid
    if grid is None:
        grid = lambda_grid(X, Y, W, n=cfg.n_grid)
    if len(Y) < 2:
        raise InsufficientData(f"{len(Y)} row(s) cannot be cross-validated")
    folds = min(cfg.folds, len(Y))
    return ridge_cv(X, Y, W, grid, folds=folds, seed=cfg.seed, intercept=cfg.intercept)
