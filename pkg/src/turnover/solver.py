"""Least squares and one-component REML fits.

The mixed model handled here is ``y = X b + Z u + e`` with
``u ~ N(0, s2_u I)`` and ``e ~ N(0, s2_e I)``, so that
``V = s2_e (I + gamma Z Z')``.  The residual variance is profiled out and the
REML log-likelihood is maximized over ``log(gamma)`` alone.

All solves go through QR factorizations of (weighted) design matrices.
Because ``Z Z'`` is diagonalized once, ``V`` is diagonal in the rotated
coordinates and every likelihood evaluation is a weighted least squares
problem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .dataset import Dataset
from .design import DesignMatrices, build_design
from .errors import ConvergenceError, DataError, DesignError
from .formula import ModelSpec

logger = logging.getLogger(__name__)

LOG10_GAMMA_MIN = -8.0
LOG10_GAMMA_MAX = 8.0
GRID_POINTS = 161
LOGLIK_TOL = 1e-10
MAX_ITER = 200
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class VarianceComponents:
    sigma2_residual: float
    sigma2_random: float = 0.0

    @property
    def gamma(self) -> float:
        return self.sigma2_random / self.sigma2_residual if self.sigma2_residual > 0 else 0.0


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Result of :func:`fit_ols` or :func:`fit_reml`.

    ``beta`` and ``vcov_beta`` have one entry per column of ``design.X``;
    aliased columns carry zeros.  ``df`` is the containment degrees of
    freedom, ``n - rank([X Z])``.
    """

    spec: ModelSpec
    dataset: Dataset = field(repr=False)
    design: DesignMatrices = field(repr=False)
    beta: np.ndarray = field(repr=False)
    vcov_beta: np.ndarray = field(repr=False)
    vc: VarianceComponents = field(default=None)
    df: int = 0
    method: str = "ols"
    reml_loglik: float | None = None
    converged: bool = True
    boundary: bool = False
    iterations: int = 0
    _rot: tuple | None = field(default=None, repr=False)

    @property
    def effects(self) -> list[tuple[str, float]]:
        return list(zip(self.design.x_labels, self.beta.tolist()))

    @property
    def residuals(self) -> np.ndarray:
        return self.dataset.response - self.design.X @ self.beta

    @cached_property
    def vcov_kenward_roger(self) -> np.ndarray:
        """Kenward-Roger adjusted covariance of ``beta``.

        Equal to ``vcov_beta`` for models without a fitted random term and for
        a random variance estimated on the zero boundary.
        """
        if self.method == "ols" or self.boundary:
            return self.vcov_beta
        return _kenward_roger(self)


def _qr_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Least squares via QR; returns (coef, R, residual sum of squares)."""
    Q, R = np.linalg.qr(A)
    qtb = Q.T @ b
    coef = scipy.linalg.solve_triangular(R, qtb)
    resid = b - Q @ qtb
    return coef, R, float(resid @ resid)


def _embed(design: DesignMatrices, coef: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = np.flatnonzero(design.kept)
    beta = np.zeros(design.p)
    beta[keep] = coef
    vcov = np.zeros((design.p, design.p))
    vcov[np.ix_(keep, keep)] = cov
    return beta, vcov


def _r_inverse_cov(R: np.ndarray, scale: float) -> np.ndarray:
    Rinv = scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
    cov = scale * (Rinv @ Rinv.T)
    return (cov + cov.T) / 2.0


def fit_ols(ds: Dataset, spec: ModelSpec, design: DesignMatrices | None = None) -> FittedModel:
    """Ordinary least squares for a model without a fittable random term."""
    design = design or build_design(ds, spec)
    if design.random_term is not None:
        raise DesignError(f"random term {design.random_term} needs fit_reml")
    n, r = design.n, design.rank
    if n <= r:
        raise DataError(f"no residual degrees of freedom: n={n}, rank(X)={r}")
    Xk = design.X[:, design.kept]
    coef, R, rss = _qr_solve(Xk, ds.response)
    sigma2 = rss / (n - r)
    beta, vcov = _embed(design, coef, _r_inverse_cov(R, sigma2))
    return FittedModel(
        spec=spec,
        dataset=ds,
        design=design,
        beta=beta,
        vcov_beta=vcov,
        vc=VarianceComponents(sigma2, 0.0),
        df=n - r,
        method="ols",
    )


class _RemlProblem:
    """REML objective in coordinates where ``Z Z'`` is diagonal."""

    def __init__(self, design: DesignMatrices, y: np.ndarray):
        if design.random_term is None:
            raise DesignError("model has no fittable random term")
        self.n = design.n
        self.r = design.rank
        if self.n <= self.r:
            raise DataError(f"no residual degrees of freedom: n={self.n}, rank(X)={self.r}")
        U, s, _ = np.linalg.svd(design.Z, full_matrices=True)
        lam = np.zeros(self.n)
        lam[: s.size] = s**2
        self.U = U
        self.lam = lam
        self.X = U.T @ design.X[:, design.kept]
        self.y = U.T @ y

    def evaluate(self, gamma: float) -> tuple[float, float, np.ndarray, np.ndarray]:
        """Profiled log-likelihood, residual variance, coefficients, R factor."""
        d = 1.0 + gamma * self.lam
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise DataError("covariance matrix is numerically singular")
        w = 1.0 / np.sqrt(d)
        coef, R, rss = _qr_solve(self.X * w[:, None], self.y * w)
        m = self.n - self.r
        if not rss > 0:
            raise DataError("zero residual sum of squares; variance components undefined")
        sigma2 = rss / m
        logdet_v = float(np.sum(np.log(d)))
        logdet_xvx = 2.0 * float(np.sum(np.log(np.abs(np.diag(R)))))
        ll = -0.5 * (m * math.log(2.0 * math.pi * sigma2) + logdet_v + logdet_xvx + m)
        return ll, sigma2, coef, R

    def loglik(self, log10_gamma: float) -> float:
        return self.evaluate(10.0**log10_gamma)[0]


def _maximize(problem: _RemlProblem) -> tuple[float, int, bool]:
    """Grid bracket on log10(gamma), then golden-section refinement.

    Returns ``(gamma, iterations, boundary)``.
    """
    grid = np.linspace(LOG10_GAMMA_MIN, LOG10_GAMMA_MAX, GRID_POINTS)
    values = np.array([problem.loglik(g) for g in grid])
    i = int(np.argmax(values))
    ll_zero = problem.evaluate(0.0)[0]
    if i == 0:
        if ll_zero >= values[0] - LOGLIK_TOL:
            return 0.0, 0, True
        return 10.0**grid[0], 0, False
    if i == GRID_POINTS - 1:
        logger.warning("REML maximum at the upper search bound gamma=1e8")
        return 10.0**grid[-1], 0, True

    a, b = grid[i - 1], grid[i + 1]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = problem.loglik(c), problem.loglik(d)
    prev = max(fc, fd)
    for it in range(1, MAX_ITER + 1):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = problem.loglik(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = problem.loglik(d)
        best = max(fc, fd)
        if abs(best - prev) < LOGLIK_TOL and (b - a) < 1e-6:
            x = c if fc >= fd else d
            return 10.0**x, it, False
        prev = best
    raise ConvergenceError(f"REML search did not converge in {MAX_ITER} iterations")


def fit_reml(ds: Dataset, spec: ModelSpec, design: DesignMatrices | None = None) -> FittedModel:
    """REML for one random term, then GLS for the fixed effects.

    ``vcov_beta`` is ``(X' V^-1 X)^-1`` at the estimated variances, without
    small-sample correction; see :attr:`FittedModel.vcov_kenward_roger`.
    """
    design = design or build_design(ds, spec)
    problem = _RemlProblem(design, ds.response)
    gamma, iterations, boundary = _maximize(problem)
    ll, sigma2, coef, R = problem.evaluate(gamma)
    beta, vcov = _embed(design, coef, _r_inverse_cov(R, sigma2))
    return FittedModel(
        spec=spec,
        dataset=ds,
        design=design,
        beta=beta,
        vcov_beta=vcov,
        vc=VarianceComponents(float(sigma2), float(gamma * sigma2)),
        df=design.n - design.rank_xz,
        method="reml",
        reml_loglik=ll,
        converged=True,
        boundary=boundary and gamma == 0.0,
        iterations=iterations,
        _rot=(problem.U, problem.lam),
    )


def fit(ds: Dataset, spec: ModelSpec) -> FittedModel:
    """Dispatch to :func:`fit_ols` or :func:`fit_reml` by the random part."""
    design = build_design(ds, spec)
    if design.random_term is None:
        return fit_ols(ds, spec, design)
    return fit_reml(ds, spec, design)


def loglik_reml(ds: Dataset, spec: ModelSpec, gamma: float) -> float:
    """Profiled REML log-likelihood at a fixed variance ratio ``gamma >= 0``."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return _RemlProblem(build_design(ds, spec), ds.response).evaluate(float(gamma))[0]


def _kenward_roger(fm: FittedModel) -> np.ndarray:
    # Parameters theta = (s2_random, s2_residual); dV/dtheta = (ZZ', I).  In the
    # rotated basis both derivatives and V are diagonal.  The weight matrix is
    # the inverse observed REML information.
    U, lam = fm._rot
    design = fm.design
    X = U.T @ design.X[:, design.kept]
    y = U.T @ fm.dataset.response
    v = fm.vc.sigma2_random * lam + fm.vc.sigma2_residual
    vinv = 1.0 / v
    derivs = (lam, np.ones_like(lam))

    XtVi = X.T * vinv
    Phi = np.linalg.inv(XtVi @ X)
    P = np.diag(vinv) - XtVi.T @ Phi @ XtVi
    Py = P @ y

    k = len(derivs)
    info = np.empty((k, k))
    Pterm = [XtVi * d for d in derivs]  # X' V^-1 V_i, p x n
    for i in range(k):
        PVi = P * derivs[i]
        for j in range(k):
            PVj = P * derivs[j]
            info[i, j] = -0.5 * np.trace(PVi @ PVj) + Py @ (derivs[i] * (P @ (derivs[j] * Py)))
    try:
        W = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        W = np.linalg.pinv(info)

    Pmats = [Pt @ (vinv[:, None] * X) for Pt in Pterm]
    acc = np.zeros_like(Phi)
    for i in range(k):
        for j in range(k):
            Q = Pterm[i] @ (vinv[:, None] * (derivs[j] * vinv)[:, None] * X)
            acc += W[i, j] * (Q - Pmats[i] @ Phi @ Pmats[j])
    adj = Phi + 2.0 * Phi @ acc @ Phi
    adj = (adj + adj.T) / 2.0
    return _embed(design, np.zeros(int(design.kept.sum())), adj)[1]
