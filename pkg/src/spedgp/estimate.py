"""Penalized MAP estimation of the co-kriging parameters.

The objective is the penalized negative log-posterior

    n logdet Sigma + m logdet R_theta + lambda_I ||theta||_1
      + lambda_o ||Sigma^{-1}||_1 + quadratic(beta, theta, Sigma),

minimized by blockwise coordinate descent: an exact graphical-LASSO
update of Sigma, a closed-form generalized least squares update of beta,
and a bound-constrained quasi-Newton update of the kernel weights. The
quadratic form is always evaluated through the Kronecker identity
(R (x) Sigma)^{-1} vec(E') = vec(Sigma^{-1} E' R^{-1}), two small solves
instead of one (nm) x (nm) system.

Multi-start: the driver reruns the sweep loop from `restarts` random
theta initializations and keeps the lowest final objective. Raw Exp(1)
draws put almost all mass in a region where every off-diagonal
correlation underflows and the theta gradient vanishes, so draws are
rescaled by the mean squared pairwise distance per feature coordinate;
restart 0 uses the deterministic all-ones draw under the same scaling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .cokrige import TrainedEmulator, log_stress, mean_basis, predict, unlog_stress
from .exceptions import (ConvergenceError, FitError, InvalidInputError,
                         NumericalError, SingularMatrixError)
from .spectral import FAMILIES, KernelParams, design_feature_rows

logger = logging.getLogger(__name__)


@dataclass
class FitConfig:
    """Estimation settings; lambda_I/lambda_o are the two penalty rates."""

    lambda_I: float = 0.0
    lambda_o: float = 0.1
    nugget: float = 1e-8
    family: str = "sped"
    restarts: int = 5
    max_sweeps: int = 60
    sweep_tol: float = 1e-6
    seed: int = 0
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 500
    theta_max_iter: int = 400
    theta_grad_tol: float = 1e-8
    theta_memory: int = 10
    epsilon_beta: float = 1e-6
    cv_score: str = "mare"

    def __post_init__(self):
        if self.lambda_I < 0 or self.lambda_o < 0:
            raise InvalidInputError("penalty rates must be nonnegative")
        if self.sweep_tol <= 0 or self.glasso_tol <= 0 or self.theta_grad_tol <= 0:
            raise InvalidInputError("tolerances must be positive")
        if self.restarts < 1 or self.max_sweeps < 1:
            raise InvalidInputError("restarts and max_sweeps must be at least 1")
        if self.nugget < 0:
            raise InvalidInputError("nugget must be nonnegative")
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if self.cv_score not in ("mare", "loglik"):
            raise InvalidInputError(f"unknown cv_score {self.cv_score!r}")


@dataclass
class FitTrace:
    """Per-restart diagnostics of the sweep loop."""

    seed: int
    restarts: list = field(default_factory=list)
    best_index: int = -1

    def to_dict(self) -> dict:
        return {"seed": self.seed, "best_index": self.best_index,
                "restarts": self.restarts}


@dataclass
class FitData:
    """Responses, basis and kernel features shared by all estimation steps.

    D stacks one n x n matrix of squared feature differences per kernel
    coordinate, with the squared diameter differences as the (unpenalized)
    last slice for the families that keep the diameter separate. The
    packed weight vector z follows the same layout.
    """

    designs: list
    Y: np.ndarray
    grid: np.ndarray
    P: np.ndarray
    F: np.ndarray
    dcol: np.ndarray | None
    D: np.ndarray
    nugget: float
    family: str

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def nz(self) -> int:
        return self.D.shape[2]

    @property
    def n_theta(self) -> int:
        return self.F.shape[1]

    def pack(self, theta, theta_d: float) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_theta:
            raise InvalidInputError(
                f"theta has length {theta.size}, expected {self.n_theta}")
        if self.dcol is None:
            return theta.copy()
        return np.append(theta, float(theta_d))

    def unpack(self, z: np.ndarray):
        if self.dcol is None:
            return z.copy(), 0.0
        return z[:-1].copy(), float(z[-1])

    def penalty_mask(self) -> np.ndarray:
        """1 for coordinates inside the lambda_I penalty, 0 for theta_d."""
        mask = np.ones(self.nz)
        if self.dcol is not None:
            mask[-1] = 0.0
        return mask

    def correlation(self, z: np.ndarray) -> np.ndarray:
        R = np.exp(-np.tensordot(self.D, z, axes=([2], [0])))
        np.fill_diagonal(R, 1.0 + self.nugget)
        return R

    def chol(self, z: np.ndarray):
        R = self.correlation(z)
        try:
            return R, cho_factor(R, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                "correlation matrix not factorizable during estimation") from exc


def make_fit_data(designs, Y_log, grid, family: str = "sped",
                  nugget: float = 1e-8) -> FitData:
    """Assemble the shared estimation state from log responses."""
    Y = np.asarray(Y_log, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != len(designs) or Y.shape[1] != grid.size:
        raise InvalidInputError("response matrix shape does not match designs and grid")
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("responses must be finite")
    if len(designs) < 2:
        raise InvalidInputError("need at least 2 designs to fit")
    p = designs[0].p
    probe = KernelParams(theta=np.zeros(_theta_length(family, p)), family=family,
                         nugget=nugget)
    F, dcol = design_feature_rows(designs, probe)
    _check_distinct(F, dcol)
    slices = [(F[:, k, None] - F[None, :, k]) ** 2 for k in range(F.shape[1])]
    if dcol is not None:
        slices.append((dcol[:, None] - dcol[None, :]) ** 2)
    D = np.stack(slices, axis=2)
    return FitData(designs=list(designs), Y=Y, grid=grid, P=mean_basis(grid),
                   F=F, dcol=dcol, D=D, nugget=nugget, family=family)


def _theta_length(family: str, p: int) -> int:
    if family == "sped":
        return (p - 1) // 2 + 1
    if family == "feature_based":
        return 4
    return p


def _check_distinct(F, dcol):
    # duplicate kernel features make R exactly singular without a nugget
    n = F.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            same = np.allclose(F[i], F[j], rtol=1e-12, atol=1e-12)
            if same and (dcol is None or abs(dcol[i] - dcol[j]) < 1e-12):
                raise InvalidInputError(
                    f"designs {i} and {j} are identical up to cyclic shift; "
                    "the training set must be distinct modulo shifts")


def neg_log_posterior(beta, theta, theta_d, Sigma, data: FitData,
                      lambda_I: float, lambda_o: float) -> float:
    """Penalized negative log-posterior of Eq-(19) form.

    n logdet Sigma + m logdet R + lambda_I ||theta||_1
    + lambda_o ||Sigma^{-1}||_1 + tr(R^{-1} E Sigma^{-1} E') with
    E = Y - 1 (P beta)'. Kronecker structure is exploited throughout.
    """
    beta = np.asarray(beta, dtype=float)
    z = data.pack(theta, theta_d)
    if np.any(z < 0):
        raise InvalidInputError("kernel weights must be nonnegative")
    R, choR = data.chol(z)
    try:
        choS = cho_factor(np.asarray(Sigma, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Sigma is not positive definite") from exc
    n, m = data.n, data.m
    logdet_R = 2.0 * np.sum(np.log(np.diag(choR[0])))
    logdet_S = 2.0 * np.sum(np.log(np.diag(choS[0])))
    W = cho_solve(choS, np.eye(m))
    E = data.Y - np.outer(np.ones(n), data.P @ beta)
    quad = float(np.sum(cho_solve(choR, E) * (E @ W)))
    penalty = lambda_I * float(np.sum(np.asarray(theta, dtype=float)))
    penalty += lambda_o * float(np.sum(np.abs(W)))
    return float(n * logdet_S + m * logdet_R + penalty + quad)


# ---------------------------------------------------------------------------
# graphical LASSO


def graphical_lasso(S, lam: float, tol: float = 1e-6, max_iter: int = 500,
                    precision_init=None) -> np.ndarray:
    """Sparse precision estimate by blockwise coordinate descent.

    Solves  min_W  -logdet W + tr(S W) + lam * sum_{j != k} |W_jk|
    (diagonal unpenalized). Each pass solves one lasso per column on the
    working covariance, per Friedman's blockwise algorithm; the return
    certificate is the KKT residual of :func:`glasso_kkt_residual`.

    The working covariance always starts at S itself (positive
    definiteness of the sweep depends on that); a warm precision matrix
    only seeds the per-column regression coefficients -W_12 / W_22.
    """
    S = np.asarray(S, dtype=float)
    m = S.shape[0]
    if S.ndim != 2 or S.shape[1] != m:
        raise InvalidInputError("S must be square")
    if not np.allclose(S, S.T, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise InvalidInputError("S must be symmetric")
    if np.any(np.diag(S) <= 0):
        raise InvalidInputError("S must have a positive diagonal")
    if lam < 0:
        raise InvalidInputError("penalty must be nonnegative")

    if lam == 0.0:
        try:
            cho = cho_factor(S, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                "unpenalized precision requires positive-definite S") from exc
        W = cho_solve(cho, np.eye(m))
        return 0.5 * (W + W.T)
    if m == 1:
        return np.array([[1.0 / S[0, 0]]])

    W, residual = _glasso_core(S, lam, tol, max_iter, precision_init)
    if residual > tol:
        raise ConvergenceError(
            f"graphical lasso did not reach KKT tolerance {tol:g} after "
            f"{max_iter} sweeps (residual {residual:.3e})", residual=residual)
    return W


def _glasso_core(S, lam, tol, max_iter, precision_init=None):
    """Best-effort blockwise sweep loop: returns (W, certified residual)."""
    m = S.shape[0]
    V = S.copy()
    B = np.zeros((m - 1, m))
    idx = [np.array([k for k in range(m) if k != j]) for j in range(m)]
    if precision_init is not None:
        Wp = np.asarray(precision_init, dtype=float)
        if Wp.shape == S.shape and np.all(np.diag(Wp) > 0):
            for j in range(m):
                B[:, j] = -Wp[idx[j], j] / Wp[j, j]

    best_W, best_res = None, np.inf
    for _ in range(max_iter):
        for j in range(m):
            sub = idx[j]
            V11 = V[np.ix_(sub, sub)]
            B[:, j] = _lasso_exact(V11, S[sub, j], lam, B[:, j])
            v12 = V11 @ B[:, j]
            V[sub, j] = v12
            V[j, sub] = v12
        try:
            W = _recover_precision(S, V, B, idx)
        except NumericalError:
            break  # working covariance went numerically indefinite
        residual = glasso_kkt_residual(S, W, lam)
        if residual < best_res:
            best_W, best_res = W, residual
        if residual <= tol:
            break
    if best_W is None:
        raise NumericalError("graphical lasso produced no usable iterate")
    return best_W, best_res


def _lasso_quadratic(Q, b, lam, x) -> float:
    return float(0.5 * x @ (Q @ x) - b @ x + lam * np.abs(x).sum())


def _lasso_exact(Q, b, lam, beta0, max_steps: int = 500):
    """Exact minimizer of 0.5 x'Qx - b'x + lam ||x||_1 for positive definite Q.

    Feature-sign search: each step guesses a support and sign pattern,
    resolves it with one dense solve, and takes the best point on the
    segment to the solution (endpoints plus sign-change crossings), which
    descends strictly and terminates on the exact KKT point. Much faster
    to high accuracy than coordinate descent when Q is ill-conditioned.
    """
    beta = beta0.copy()
    active = beta != 0.0
    theta = np.sign(beta)
    qb = Q @ beta
    ktol = 1e-11 * max(1.0, np.abs(b).max(), lam)
    for _ in range(max_steps):
        g = qb - b
        consistent = (not active.any()
                      or np.abs(g[active] + lam * theta[active]).max() <= ktol)
        if consistent:
            inactive = np.flatnonzero(~active)
            if inactive.size == 0:
                break
            i = inactive[np.argmax(np.abs(g[inactive]))]
            if abs(g[i]) <= lam + ktol:
                break
            active[i] = True
            theta[i] = -np.sign(g[i])
        A = np.flatnonzero(active)
        QA = Q[np.ix_(A, A)]
        target = b[A] - lam * theta[A]
        try:
            new = np.linalg.solve(QA, target)
        except np.linalg.LinAlgError:
            new = np.linalg.lstsq(QA, target, rcond=None)[0]
        cur = beta[A]
        step = new - cur
        # candidate points: the solution plus every sign-change crossing
        best_x, best_f = new, _lasso_quadratic(QA, b[A], lam, new)
        flip = (cur != 0.0) & (np.sign(new) != np.sign(cur))
        for k in np.flatnonzero(flip):
            t = cur[k] / (cur[k] - new[k])
            if not 0.0 < t <= 1.0:
                continue
            x = cur + t * step
            x[k] = 0.0
            f = _lasso_quadratic(QA, b[A], lam, x)
            if f < best_f:
                best_x, best_f = x, f
        beta = np.zeros_like(beta)
        beta[A] = best_x
        active = beta != 0.0
        theta = np.sign(beta)
        qb = Q @ beta
    return beta


def _recover_precision(S, V, B, idx):
    m = S.shape[0]
    W = np.zeros_like(V)
    for j in range(m):
        sub = idx[j]
        gap = V[j, j] - float(V[sub, j] @ B[:, j])
        if gap <= 0:
            raise NumericalError("working covariance lost positive definiteness")
        w22 = 1.0 / gap
        W[j, j] = w22
        W[sub, j] = -B[:, j] * w22
    return 0.5 * (W + W.T)


def glasso_kkt_residual(S, W, lam: float) -> float:
    """Max stationarity violation of the off-diagonal-penalized glasso."""
    try:
        cho = cho_factor(W, lower=True)
    except np.linalg.LinAlgError:
        return np.inf
    V = cho_solve(cho, np.eye(W.shape[0]))
    G = V - S
    m = S.shape[0]
    off = ~np.eye(m, dtype=bool)
    active = off & (W != 0.0)
    res = np.abs(np.diag(G)).max()
    if active.any():
        res = max(res, np.abs(G[active] - lam * np.sign(W[active])).max())
    inactive = off & (W == 0.0)
    if inactive.any():
        res = max(res, max(0.0, np.abs(G[inactive]).max() - lam))
    return float(res)


# ---------------------------------------------------------------------------
# BCD blocks


def _sigma_block_objective(S0, rho, W) -> float:
    """-logdet W + tr(S0 W) + rho ||W||_1, the Sigma block of the target."""
    try:
        cho = cho_factor(W, lower=True)
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
    return float(-logdet + np.sum(S0 * W) + rho * np.abs(W).sum())


def sigma_step(data: FitData, choR, beta, lambda_o: float, tol: float,
               max_iter: int, precision_init=None):
    """Sigma block update; returns (Sigma, W = Sigma^{-1}, warning).

    The Sigma block of the objective is, up to a factor n,
    -logdet W + tr(S0 W) + (lambda_o / n) ||W||_1 with
    S0 = (1/n) E' R^{-1} E, i.e. a graphical lasso with the elementwise
    penalty lambda_o / n. Ridging the input by that same rate and
    penalizing only off-diagonals is the identical problem (W has a
    positive diagonal), which is the ridge the reference algorithm
    prescribes; the 1/n factor keeps every sweep a block minimization of
    the monitored objective.

    Robustness over certification here: the glasso tolerance scales with
    the spectral norm of the input (near-singular correlation states
    inflate S0 by orders of magnitude), a non-certified best iterate is
    accepted with a warning, and the incoming precision is kept whenever
    it scores a lower block objective, so the monitored objective never
    increases through this step.
    """
    n = data.n
    E = data.Y - np.outer(np.ones(n), data.P @ np.asarray(beta, dtype=float))
    S0 = E.T @ cho_solve(choR, E) / n
    S0 = 0.5 * (S0 + S0.T)
    rho = lambda_o / n
    if rho == 0.0:
        W = graphical_lasso(S0, 0.0)
        return 0.5 * (S0 + S0.T), W, None
    W0 = S0 + rho * np.eye(data.m)
    scale = max(1.0, float(np.linalg.norm(W0, 2)))
    warn = None
    try:
        W, residual = _glasso_core(W0, rho, tol * scale, max_iter,
                                   precision_init=precision_init)
        if residual > tol * scale:
            warn = (f"glasso stopped at KKT residual {residual:.3e} "
                    f"(target {tol * scale:.3e})")
    except NumericalError as exc:
        W, warn = None, f"glasso failed: {exc}"
    if precision_init is not None:
        incumbent = np.asarray(precision_init, dtype=float)
        if W is None or (_sigma_block_objective(S0, rho, incumbent)
                         < _sigma_block_objective(S0, rho, W)):
            W = incumbent
    elif W is None:
        raise SingularMatrixError("glasso produced no usable precision")
    try:
        choW = cho_factor(W, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("glasso returned an indefinite precision") from exc
    Sigma = cho_solve(choW, np.eye(data.m))
    return 0.5 * (Sigma + Sigma.T), W, warn


def beta_step(data: FitData, choR, W, epsilon_beta: float = 1e-6) -> np.ndarray:
    """Generalized least squares update of the mean coefficients.

    The full GLS system ((1 (x) P)' (R^{-1} (x) W) (1 (x) P)) beta = ...
    factors into (1' R^{-1} 1) (P' W P), so beta is the basis regression
    of the R-weighted average response curve. If the slope coefficient
    beta_2 comes out nonpositive it is pinned at epsilon_beta and the
    remaining coordinates are re-solved (active-set projection).
    """
    n = data.n
    ones = np.ones(n)
    u = cho_solve(choR, ones)
    c = float(ones @ u)
    if c <= 0:
        raise SingularMatrixError("correlation matrix produced a nonpositive 1'R^{-1}1")
    ybar = data.Y.T @ u / c
    A = W @ data.P
    Sq = data.P.T @ A
    try:
        beta = np.linalg.solve(Sq, A.T @ ybar)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "GLS normal matrix is singular; mean basis columns are collinear") from exc
    q = beta.size
    if q >= 2 and beta[1] <= 0.0:
        keep = [k for k in range(q) if k != 1]
        P1 = data.P[:, keep]
        target = ybar - epsilon_beta * data.P[:, 1]
        A1 = W @ P1
        try:
            b1 = np.linalg.solve(P1.T @ A1, A1.T @ target)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                "GLS normal matrix is singular after the beta_2 projection") from exc
        beta = np.empty(q)
        beta[1] = epsilon_beta
        beta[keep] = b1
    return beta


def theta_objective(z, data: FitData, M, lambda_I: float):
    """Theta block of the objective and its analytic gradient.

    f(z) = m logdet R(z) + tr(R^{-1} M) + lambda_I * sum of penalized z,
    with M = E Sigma^{-1} E' fixed. dR/dz_k = -D_k o R gives
    df/dz_k = sum_ij D_ijk [R o (G M G - m G)]_ij with G = R^{-1}.
    """
    R = data.correlation(z)
    try:
        cho = cho_factor(R, lower=True)
    except np.linalg.LinAlgError:
        return 1e300, np.zeros_like(z)
    m = data.m
    logdet_R = 2.0 * np.sum(np.log(np.diag(cho[0])))
    G = cho_solve(cho, np.eye(data.n))
    H = G @ M @ G
    quad = float(np.sum(G * M))
    pen = data.penalty_mask() * lambda_I
    f = m * logdet_R + quad + float(pen @ z)
    C = R * (H - m * G)
    grad = np.tensordot(data.D, C, axes=([0, 1], [0, 1])) + pen
    return f, grad


def theta_step(data: FitData, beta, W, z0, lambda_I: float, config: FitConfig):
    """Bound-constrained quasi-Newton descent on the theta block.

    Returns (z, objective, warning). Weights live on the nonnegative
    orthant, where the l1 penalty is linear and hence smooth; exact
    zeros at the bound are what switches frequencies off.
    """
    n = data.n
    E = data.Y - np.outer(np.ones(n), data.P @ np.asarray(beta, dtype=float))
    M = E @ W @ E.T
    z0 = np.asarray(z0, dtype=float)
    f0, _ = theta_objective(z0, data, M, lambda_I)
    res = minimize(
        theta_objective, z0, args=(data, M, lambda_I), jac=True,
        method="L-BFGS-B", bounds=[(0.0, None)] * z0.size,
        options={"maxiter": config.theta_max_iter, "gtol": config.theta_grad_tol,
                 "ftol": 1e-13, "maxcor": config.theta_memory})
    warning = None
    if not res.success and "ROUNDING" not in str(res.message).upper():
        warning = f"theta optimizer stopped early: {res.message}"
    if res.fun > f0:
        # line search failed to improve; keep the incoming point
        return z0, f0, warning or "theta step kept incoming point"
    z, f = _truncate_inactive(res.x, float(res.fun), data, M, lambda_I)
    return z, f, warning


def _truncate_inactive(z, f, data: FitData, M, lambda_I: float):
    """Snap near-bound coordinates to exactly zero when that descends.

    The quasi-Newton iteration stops with dust on coordinates whose true
    minimizer sits at the bound; one proximal pass over the coordinates,
    smallest first, recovers the exact zeros of the l1 solution. Only
    non-increasing moves are accepted, so full-sweep monotonicity is
    unaffected.
    """
    z = np.asarray(z, dtype=float).copy()
    for k in np.argsort(z):
        if z[k] <= 0.0:
            continue
        z_try = z.copy()
        z_try[k] = 0.0
        f_try, _ = theta_objective(z_try, data, M, lambda_I)
        if f_try <= f:
            z, f = z_try, f_try
    return z, f


# ---------------------------------------------------------------------------
# driver


def _initial_z(data: FitData, u: np.ndarray) -> np.ndarray:
    """Scale raw Exp(1) draws so initial correlations are informative.

    Dividing by (active coordinate count) x (mean squared pairwise
    difference) puts the initial exponent near 1 on average instead of
    in the flat exp(-1e3) plateau where the gradient underflows.
    """
    n = data.n
    denom = data.D.sum(axis=(0, 1)) / (n * (n - 1))
    pos = denom > 0
    z = np.zeros(data.nz)
    k_eff = max(int(pos.sum()), 1)
    z[pos] = u[pos] / (k_eff * denom[pos])
    return z


def _run_restart(data: FitData, config: FitConfig, z0: np.ndarray):
    theta0, theta_d0 = data.unpack(z0)
    beta = np.zeros(data.P.shape[1])
    Sigma = np.eye(data.m)
    W = np.eye(data.m)
    z = z0.copy()
    record = {
        "init_theta_scale": float(z0.sum()),
        "objectives": [neg_log_posterior(beta, theta0, theta_d0, Sigma, data,
                                         config.lambda_I, config.lambda_o)],
        "active_theta": [int(np.count_nonzero(theta0 > 0))],
        "offdiag_nonzeros": [0],
        "warnings": [],
        "converged": False,
    }
    for sweep in range(1, config.max_sweeps + 1):
        R, choR = data.chol(z)
        Sigma, W, sigma_warn = sigma_step(data, choR, beta, config.lambda_o,
                                          config.glasso_tol,
                                          config.glasso_max_iter,
                                          precision_init=W)
        if sigma_warn:
            record["warnings"].append(f"sweep {sweep}: {sigma_warn}")
        beta = beta_step(data, choR, W, config.epsilon_beta)
        z, _, warn = theta_step(data, beta, W, z, config.lambda_I, config)
        if warn:
            record["warnings"].append(f"sweep {sweep}: {warn}")
        theta, theta_d = data.unpack(z)
        obj = neg_log_posterior(beta, theta, theta_d, Sigma, data,
                                config.lambda_I, config.lambda_o)
        record["objectives"].append(obj)
        record["active_theta"].append(int(np.count_nonzero(theta > 0)))
        off = W[~np.eye(data.m, dtype=bool)]
        record["offdiag_nonzeros"].append(int(np.count_nonzero(off)))
        prev = record["objectives"][-2]
        slack = config.sweep_tol * max(1.0, abs(prev))
        if prev - obj < -slack:
            record["warnings"].append(
                f"sweep {sweep}: objective increased by {obj - prev:.3e}")
            break
        if prev - obj <= slack:
            record["converged"] = True
            break
    record["sweeps"] = len(record["objectives"]) - 1
    return z, beta, Sigma, record


def fit(data, config: FitConfig):
    """Multi-start BCD estimation; returns (TrainedEmulator, FitTrace).

    ``data`` carries designs, a stress response matrix and the strain
    grid; responses are log-transformed here. Restarts draw independent
    theta initializations (restart 0 uses the deterministic all-ones
    draw) and the lowest final objective wins, ties to the lowest index.
    """
    fd = make_fit_data(data.designs, log_stress(data.responses), data.grid,
                       family=config.family, nugget=config.nugget)
    children = np.random.SeedSequence(config.seed).spawn(config.restarts)
    trace = FitTrace(seed=config.seed)
    results = []
    for r in range(config.restarts):
        if r == 0:
            u = np.ones(fd.nz)
        else:
            u = np.random.default_rng(children[r]).exponential(1.0, fd.nz)
        z0 = _initial_z(fd, u)
        try:
            z, beta, Sigma, record = _run_restart(fd, config, z0)
        except (SingularMatrixError, ConvergenceError, NumericalError) as exc:
            trace.restarts.append({"failed": str(exc)})
            logger.warning("restart %d failed: %s", r, exc)
            continue
        record["final_objective"] = record["objectives"][-1]
        trace.restarts.append(record)
        results.append((record["final_objective"], r, z, beta, Sigma, record))
        logger.info("restart %d: objective %.6f after %d sweeps",
                    r, record["final_objective"], record["sweeps"])
    if not results:
        raise FitError("every restart failed", traces=trace.restarts)
    best = min(results, key=lambda item: (item[0], item[1]))
    _, best_r, z, beta, Sigma, record = best
    trace.best_index = best_r
    theta, theta_d = fd.unpack(z)
    params = KernelParams(theta=theta, theta_d=theta_d, nugget=config.nugget,
                          family=config.family)
    model = TrainedEmulator(
        grid=fd.grid, designs=fd.designs, Y=fd.Y, params=params, beta=beta,
        Sigma=Sigma,
        fit_metadata={
            "lambda_I": config.lambda_I,
            "lambda_o": config.lambda_o,
            "objective": record["final_objective"],
            "iterations": record["sweeps"],
        })
    return model, trace


def select_penalties(data, lambda_I_grid, lambda_o_grid, k: int,
                     config: FitConfig):
    """k-fold cross-validated choice of (lambda_I, lambda_o).

    Scores each grid pair by the mean held-out error (back-transformed
    MARE by default, negative predictive log-likelihood with
    config.cv_score = "loglik") and returns the minimizing pair, ties
    broken toward larger penalties.
    """
    from .dataio import Dataset
    from .metrics import mare

    li_grid = sorted(set(float(v) for v in np.atleast_1d(lambda_I_grid)))
    lo_grid = sorted(set(float(v) for v in np.atleast_1d(lambda_o_grid)))
    if not li_grid or not lo_grid:
        raise InvalidInputError("penalty grids must be non-empty")
    n = len(data.designs)
    if k < 2 or n < 2 * k:
        raise InvalidInputError(f"need k >= 2 and n >= 2k folds, got n={n}, k={k}")
    perm = np.random.default_rng(config.seed).permutation(n)
    folds = np.array_split(perm, k)
    if any(f.size == 0 for f in folds):
        raise InvalidInputError("degenerate cross-validation folds")

    best = None
    for li in li_grid:
        for lo in lo_grid:
            cfg = replace(config, lambda_I=li, lambda_o=lo)
            errors = []
            for fold in folds:
                mask = np.ones(n, dtype=bool)
                mask[fold] = False
                train_idx = np.flatnonzero(mask)
                sub = Dataset(
                    designs=[data.designs[i] for i in train_idx],
                    responses=data.responses[train_idx],
                    grid=data.grid)
                model, _ = fit(sub, cfg)
                for i in fold:
                    pred = predict(model, data.designs[i])
                    if config.cv_score == "loglik":
                        errors.append(_neg_predictive_loglik(
                            pred, log_stress(data.responses[i])))
                    else:
                        errors.append(mare(data.responses[i],
                                           unlog_stress(pred.mean)))
            score = float(np.mean(errors))
            logger.info("cv lambda_I=%g lambda_o=%g score=%.6f", li, lo, score)
            if best is None or score <= best[0]:
                best = (score, li, lo)
    return best[1], best[2]


def _neg_predictive_loglik(pred, y_log) -> float:
    cov = pred.covariance()
    cho = cho_factor(cov + 1e-12 * np.eye(cov.shape[0]), lower=True)
    r = y_log - pred.mean
    quad = float(r @ cho_solve(cho, r))
    logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
    return 0.5 * (cov.shape[0] * np.log(2 * np.pi) + logdet + quad)
