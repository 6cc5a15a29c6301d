"""Spectral features and correlation functions for functional inputs.

A structure is a real curve sampled on a uniform grid of p points (p odd)
plus a scalar fiber diameter. The kernel representation of the curve is
the modulus of its discrete Fourier transform over the half spectrum;
the curve is real, so bins above (p-1)/2 are redundant. Correlations are
Gaussian in weighted squared distances between these spectral features,
times a separable diameter factor. Two baseline families share the same
algebra with different feature rows: a four-feature parametric kernel
and a functional l2-distance kernel on the raw curve values.

Because the modulus spectrum is invariant under cyclic shifts of the
curve, so is the correlation: shifted copies of a structure are perfectly
correlated and the kernel is positive semi-definite but not strictly
positive definite. A small nugget on the matrix diagonal restores
factorizability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor
from scipy.spatial.distance import cdist

from .exceptions import InvalidInputError, SingularMatrixError

FAMILIES = ("sped", "feature_based", "l2_distance")

#: span of the structure grid in mm; t_k = k * span / (p - 1)
STRUCTURE_SPAN = 20.0


def half_size(p: int) -> int:
    """Number of half-spectrum bins for an odd curve length p."""
    return (p - 1) // 2 + 1


def as_structure_curve(values) -> np.ndarray:
    """Validate and return a structure curve as a float array.

    The curve must have odd length (so the half spectrum has exactly
    (p-1)/2 + 1 bins) and finite entries.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInputError("structure curve must be a 1-d vector")
    if x.size % 2 == 0:
        raise InvalidInputError(f"curve length must be odd, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("structure curve contains non-finite values")
    return x


def dft_modulus(curve) -> np.ndarray:
    """Half-spectrum DFT moduli |x_hat_k| of a structure curve.

    Uses the unnormalized forward transform
    x_hat_k = sum_l x_l exp(-2i pi l k / p) for k = 0 .. (p-1)/2,
    computed by direct summation (p is small here).
    """
    x = as_structure_curve(curve)
    p = x.size
    k = np.arange(half_size(p))
    basis = np.exp(-2j * np.pi * np.outer(k, np.arange(p)) / p)
    return np.abs(basis @ x)


def structure_times(p: int, span: float = STRUCTURE_SPAN) -> np.ndarray:
    """Uniform sampling grid t_k = k * span / (p - 1) of a structure curve."""
    if p < 2 or p % 2 == 0:
        raise InvalidInputError(f"curve length must be odd and >= 3, got {p}")
    return np.arange(p) * (span / (p - 1))


def bin_frequencies(p: int, span: float = STRUCTURE_SPAN) -> np.ndarray:
    """Frequencies (1/mm) of the half-spectrum DFT bins.

    Bin k of a p-point DFT on spacing dt corresponds to k / (p * dt);
    with the default 20 mm span and p = 81 the bins sit at k / 20.25.
    """
    dt = span / (p - 1)
    return np.arange(half_size(p)) / (p * dt)


@dataclass(frozen=True)
class StructureDesign:
    """A functional input: fiber diameter plus discretized structure curve.

    ``features`` optionally carries the [d, A, omega, phi] sinusoid
    provenance needed by the feature_based kernel family; designs read
    from bare CSV files do not have it.
    """

    diameter: float
    curve: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "curve", as_structure_curve(self.curve))
        d = float(self.diameter)
        if not np.isfinite(d) or d <= 0:
            raise InvalidInputError(f"diameter must be positive and finite, got {d}")
        object.__setattr__(self, "diameter", d)
        if self.features is not None:
            f = np.asarray(self.features, dtype=float)
            if f.shape != (4,) or not np.all(np.isfinite(f)):
                raise InvalidInputError("features must be a finite vector [d, A, omega, phi]")
            object.__setattr__(self, "features", f)

    @property
    def p(self) -> int:
        return self.curve.size


@dataclass
class KernelParams:
    """Correlation parameters: frequency weights, diameter scale, nugget, family.

    theta has one entry per feature coordinate of the chosen family:
    (p-1)/2 + 1 spectral weights for "sped", 4 weights for
    "feature_based" ([d, A, omega, phi]), p weights for "l2_distance".
    theta_d scales the separable diameter factor; it is unused by the
    feature_based family, whose first feature already is the diameter.
    ``dt`` is the curve grid spacing consumed by the l2_distance family;
    when None it defaults to the standard 20 mm span.
    """

    theta: np.ndarray
    theta_d: float = 0.0
    nugget: float = 1e-8
    family: str = "sped"
    dt: float | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 1:
            raise InvalidInputError("theta must be a 1-d vector")
        if not np.all(np.isfinite(self.theta)) or np.any(self.theta < 0):
            raise InvalidInputError("theta must be finite and nonnegative")
        if not np.isfinite(self.theta_d) or self.theta_d < 0:
            raise InvalidInputError("theta_d must be finite and nonnegative")
        if self.nugget < 0:
            raise InvalidInputError("nugget must be nonnegative")
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")

    def theta_length(self, p: int) -> int:
        """Required theta length for curves of length p."""
        if self.family == "sped":
            return half_size(p)
        if self.family == "feature_based":
            return 4
        return p

    def uses_diameter_factor(self) -> bool:
        return self.family in ("sped", "l2_distance")


def sped_correlation(a: StructureDesign, b: StructureDesign, params: KernelParams) -> float:
    """Spectral-distance correlation between two designs.

    exp(-sum_k theta_k (|a_hat_k| - |b_hat_k|)^2) * exp(-theta_d (d_a - d_b)^2)
    over the half spectrum. Returns 1 when both exponents vanish, e.g.
    for cyclically shifted copies of the same curve at equal diameter.
    """
    if a.p != b.p:
        raise InvalidInputError(f"curve lengths differ: {a.p} vs {b.p}")
    h = half_size(a.p)
    if params.theta.size != h:
        raise InvalidInputError(
            f"theta has length {params.theta.size}, expected {h} for p={a.p}")
    da = dft_modulus(a.curve)
    db = dft_modulus(b.curve)
    expo = params.theta @ (da - db) ** 2
    expo += params.theta_d * (a.diameter - b.diameter) ** 2
    return float(np.exp(-expo))


def feature_correlation(fa, fb, theta4) -> float:
    """Parametric baseline correlation on feature vectors [d, A, omega, phi]."""
    fa = np.asarray(fa, dtype=float)
    fb = np.asarray(fb, dtype=float)
    t = np.asarray(theta4, dtype=float)
    if fa.shape != (4,) or fb.shape != (4,) or t.shape != (4,):
        raise InvalidInputError("feature vectors and theta4 must have length 4")
    if np.any(t < 0):
        raise InvalidInputError("theta4 must be nonnegative")
    if not (np.all(np.isfinite(fa)) and np.all(np.isfinite(fb))):
        raise InvalidInputError("feature vectors must be finite")
    return float(np.exp(-t @ (fa - fb) ** 2))


def l2_correlation(a, b, theta_t, dt: float) -> float:
    """Functional l2-distance baseline correlation between two curves.

    exp(-sum_l theta_l (a_l - b_l)^2 dt), a Riemann sum over the curve
    grid. Including dt keeps the theta scale independent of the
    discretization.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    t = np.asarray(theta_t, dtype=float)
    if xa.shape != xb.shape or xa.shape != t.shape:
        raise InvalidInputError("curves and theta_t must share one length")
    if np.any(t < 0) or dt <= 0:
        raise InvalidInputError("theta_t must be nonnegative and dt positive")
    return float(np.exp(-dt * (t @ (xa - xb) ** 2)))


def design_feature_rows(designs: list[StructureDesign], params: KernelParams):
    """Kernel feature matrix F (n x K) and diameter column for a design list.

    Every family reduces to exp(-sum_k theta_k (F_ik - F_jk)^2), times the
    diameter factor exp(-theta_d (d_i - d_j)^2) for the families that keep
    the diameter separate. Rows are moduli spectra (sped), [d, A, omega,
    phi] provenance (feature_based), or curve values scaled by sqrt(dt)
    (l2_distance, folding the Riemann measure into the features).
    """
    if not designs:
        raise InvalidInputError("need at least one design")
    p = designs[0].p
    for i, dsn in enumerate(designs):
        if dsn.p != p:
            raise InvalidInputError(f"design {i} has p={dsn.p}, expected {p}")
    if params.theta.size != params.theta_length(p):
        raise InvalidInputError(
            f"theta has length {params.theta.size}, expected "
            f"{params.theta_length(p)} for family {params.family!r} with p={p}")
    if params.family == "sped":
        F = np.array([dft_modulus(dsn.curve) for dsn in designs])
    elif params.family == "feature_based":
        for i, dsn in enumerate(designs):
            if dsn.features is None:
                raise InvalidInputError(
                    f"design {i} lacks [d, A, omega, phi] provenance required "
                    "by the feature_based family")
        F = np.array([dsn.features for dsn in designs])
    else:
        dt = params.dt if params.dt is not None else STRUCTURE_SPAN / (p - 1)
        F = np.array([dsn.curve for dsn in designs]) * np.sqrt(dt)
    dcol = None
    if params.uses_diameter_factor():
        dcol = np.array([dsn.diameter for dsn in designs])
    return F, dcol


def correlation_from_features(F, dcol, f_new, d_new, params: KernelParams) -> np.ndarray:
    """Correlation vector between one feature point and n stored rows.

    This is the kernel evaluated directly on feature coordinates; the
    inverse-design optimizer uses it to score candidate spectra without
    materializing a curve.
    """
    diff = F - np.asarray(f_new, dtype=float)
    expo = diff ** 2 @ params.theta
    if dcol is not None:
        expo = expo + params.theta_d * (dcol - float(d_new)) ** 2
    return np.exp(-expo)


def correlation_matrix(designs: list[StructureDesign], params: KernelParams) -> np.ndarray:
    """n x n correlation matrix with ``1 + nugget`` on the diagonal."""
    F, dcol = design_feature_rows(designs, params)
    A = F * np.sqrt(params.theta)
    expo = cdist(A, A, "sqeuclidean")
    if dcol is not None and params.theta_d > 0:
        expo += params.theta_d * (dcol[:, None] - dcol[None, :]) ** 2
    R = np.exp(-expo)
    np.fill_diagonal(R, 1.0 + params.nugget)
    return R


def cross_correlation(new: StructureDesign, designs: list[StructureDesign],
                      params: KernelParams) -> np.ndarray:
    """Correlations between one new design and n stored designs (no nugget)."""
    F, dcol = design_feature_rows(designs, params)
    f_new, d_new = design_feature_rows([new], params)
    d_new = None if d_new is None else d_new[0]
    return correlation_from_features(F, dcol, f_new[0], d_new, params)


def correlation_cholesky(designs: list[StructureDesign], params: KernelParams):
    """Assemble R and its Cholesky factorization.

    Raises a singular-matrix error naming the most correlated pair of
    designs when the factorization fails even with the nugget; that pair
    is (numerically) a duplicate modulo cyclic shift.
    """
    R = correlation_matrix(designs, params)
    try:
        chol = cho_factor(R, lower=True)
    except np.linalg.LinAlgError as exc:
        n = R.shape[0]
        off = R - np.eye(n) * R[0, 0]
        i, j = np.unravel_index(np.argmax(off), off.shape)
        raise SingularMatrixError(
            f"correlation matrix not factorizable with nugget {params.nugget:g}; "
            f"designs {min(i, j)} and {max(i, j)} are near-duplicates "
            f"(correlation {R[i, j]:.12g})") from exc
    return R, chol
