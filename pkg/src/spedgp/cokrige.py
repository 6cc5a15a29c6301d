"""Separable co-kriging of log-stress curves over a fixed strain grid.

The model treats the n training responses, stacked as an (n*m)-vector of
log-stress values, as one draw of a Gaussian process with mean
1_n (x) P beta and covariance R_theta (x) Sigma. Separability makes the
conditional distribution at a new design collapse to

    mean = P beta + Yc' R^{-1} r,        cov = (1 - r' R^{-1} r) Sigma,

with Yc the row-centered training matrix and r the cross-correlation
vector, so prediction never touches an (nm) x (nm) matrix. All modeling
happens in log-stress space; stress metrics are computed after the back
transform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve
from scipy.stats import norm

from .exceptions import InvalidInputError, NumericalError
from .spectral import (KernelParams, StructureDesign, correlation_cholesky,
                       cross_correlation, design_feature_rows)

#: negative v beyond this magnitude is treated as a real inconsistency
V_TOLERANCE = 1e-8


def default_strain_grid(m: int = 41, lo: float = 0.00375, hi: float = 0.15) -> np.ndarray:
    """Uniform strain levels on [lo, hi]; s = 0 is excluded.

    Stress is identically zero at zero strain and the log bases are
    undefined there, so the boundary point is reported separately by
    consumers rather than modeled.
    """
    return np.linspace(lo, hi, m)


def as_strain_grid(levels) -> np.ndarray:
    s = np.asarray(levels, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise InvalidInputError("strain grid must be a vector of at least 2 levels")
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise InvalidInputError("strain levels must be finite and positive")
    if np.any(np.diff(s) <= 0):
        raise InvalidInputError("strain levels must be strictly increasing")
    return s


def mean_basis(grid) -> np.ndarray:
    """Basis matrix P = [1_m, log(s)] of the power-law mean in log space.

    With beta_2 > 0 the mean log(stress) = beta_1 + beta_2 log(s) is the
    log of a monotone power law a * s^b.
    """
    s = as_strain_grid(grid)
    return np.column_stack([np.ones(s.size), np.log(s)])


def log_stress(values) -> np.ndarray:
    """Elementwise log transform; stresses must be strictly positive."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InvalidInputError("stress values must be finite and positive for the log transform")
    return np.log(v)


def unlog_stress(values) -> np.ndarray:
    """Inverse of :func:`log_stress`."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("log-stress values must be finite")
    return np.exp(v)


# transform pair under the names the rest of the API documents
log_transform = log_stress
back_transform = unlog_stress


@dataclass
class TrainedEmulator:
    """Fitted co-kriging model plus cached factorizations.

    Y holds log-stress rows. The correlation factorization, feature rows
    and centered responses are derived in __post_init__ and never
    mutated; predict and downstream consumers treat instances as
    read-only.
    """

    grid: np.ndarray
    designs: list[StructureDesign]
    Y: np.ndarray
    params: KernelParams
    beta: np.ndarray
    Sigma: np.ndarray
    fit_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = as_strain_grid(self.grid)
        self.Y = np.asarray(self.Y, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.Sigma = np.asarray(self.Sigma, dtype=float)
        n, m = self.Y.shape
        if len(self.designs) != n:
            raise InvalidInputError("design count does not match response rows")
        if m != self.grid.size:
            raise InvalidInputError("response columns do not match the strain grid")
        if self.Sigma.shape != (m, m):
            raise InvalidInputError("Sigma shape does not match the strain grid")
        if not np.allclose(self.Sigma, self.Sigma.T, atol=1e-10):
            raise InvalidInputError("Sigma must be symmetric")
        self.P = mean_basis(self.grid)
        if self.beta.size != self.P.shape[1]:
            raise InvalidInputError("beta length does not match the mean basis")
        if self.beta.size >= 2 and self.beta[1] <= 0:
            raise InvalidInputError("beta_2 must be positive (monotone mean constraint)")
        self.R, self.chol_R = correlation_cholesky(self.designs, self.params)
        self.F, self.dcol = design_feature_rows(self.designs, self.params)
        self.mu = self.P @ self.beta
        self.resid = self.Y - self.mu

    @property
    def p(self) -> int:
        return self.designs[0].p

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]


@dataclass
class Prediction:
    """Predictive normal at one design: mean in log space, covariance v * Sigma."""

    mean: np.ndarray
    scale: float
    Sigma: np.ndarray

    def covariance(self) -> np.ndarray:
        return self.scale * self.Sigma


def _clamp_scale(v: float) -> float:
    if v < -V_TOLERANCE:
        raise NumericalError(f"predictive scale v = {v:.3e} is negative beyond tolerance")
    return min(max(v, 0.0), 1.0)


def predict_from_point(model: TrainedEmulator, r: np.ndarray) -> Prediction:
    """Conditional normal given a precomputed cross-correlation vector."""
    alpha = cho_solve(model.chol_R, r)
    mean = model.mu + model.resid.T @ alpha
    v = _clamp_scale(1.0 - float(r @ alpha))
    return Prediction(mean=mean, scale=v, Sigma=model.Sigma)


def predict(model: TrainedEmulator, new: StructureDesign) -> Prediction:
    """Predictive distribution of the log-stress curve at a new design."""
    if new.p != model.p:
        raise InvalidInputError(f"new design has p={new.p}, model expects {model.p}")
    r = cross_correlation(new, model.designs, model.params)
    return predict_from_point(model, r)


def hpd_interval(pred: Prediction, level: float):
    """Pointwise HPD interval endpoints (log space) at the given level.

    Gaussian marginals make the HPD interval the symmetric one:
    mean_j +/- z_(1+level)/2 sqrt(v Sigma_jj).
    """
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must be in (0,1), got {level}")
    if pred.scale < -V_TOLERANCE:
        raise NumericalError(f"negative predictive scale {pred.scale:.3e}")
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * np.sqrt(max(pred.scale, 0.0) * np.diag(pred.Sigma))
    return pred.mean - half, pred.mean + half


def save_model(model: TrainedEmulator, path) -> None:
    """Serialize the emulator to a JSON document.

    Sigma is stored densely; the correlation factorization is recomputed
    on load so the file stays self-describing and consistent.
    """
    doc = {
        "p": model.p,
        "strain_grid": model.grid.tolist(),
        "designs": [
            {
                "d": dsn.diameter,
                "curve": dsn.curve.tolist(),
                "features": None if dsn.features is None else dsn.features.tolist(),
            }
            for dsn in model.designs
        ],
        "Y": model.Y.tolist(),
        "theta": model.params.theta.tolist(),
        "theta_d": model.params.theta_d,
        "nugget": model.params.nugget,
        "beta": model.beta.tolist(),
        "Sigma": model.Sigma.tolist(),
        "family": model.params.family,
        "fit_metadata": model.fit_metadata,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path) -> TrainedEmulator:
    doc = json.loads(Path(path).read_text())
    designs = [
        StructureDesign(
            diameter=entry["d"],
            curve=np.array(entry["curve"], dtype=float),
            features=None if entry.get("features") is None else np.array(entry["features"]),
        )
        for entry in doc["designs"]
    ]
    params = KernelParams(
        theta=np.array(doc["theta"], dtype=float),
        theta_d=float(doc["theta_d"]),
        nugget=float(doc["nugget"]),
        family=doc["family"],
    )
    return TrainedEmulator(
        grid=np.array(doc["strain_grid"], dtype=float),
        designs=designs,
        Y=np.array(doc["Y"], dtype=float),
        params=params,
        beta=np.array(doc["beta"], dtype=float),
        Sigma=np.array(doc["Sigma"], dtype=float),
        fit_metadata=doc.get("fit_metadata", {}),
    )
