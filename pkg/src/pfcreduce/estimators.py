"""Covariance-triple estimators, their closed-form expectations, and the
moment-based signal estimator for the growth-curve multivariate model.

The observed model is ``Y = J mu' + X Gamma Z' + e`` with column-centered
``X`` (``J'X = 0``) and orthonormal ``Z``.  Three sample covariance matrices
carry all the information used downstream:

* ``sigma_hat``  -- total:     Y'(I - J/n)Y / n
* ``sigma_fit``  -- fitted:    Y' P_X Y / n
* ``sigma_res``  -- residual:  Y'(I - J/n - P_X)Y / n

Centering forces the exact decomposition sigma_hat = sigma_fit + sigma_res.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError
from .matalg import (
    RANK_RTOL,
    as_matrix,
    check_symmetric,
    require_orthonormal,
    symmetrize,
)

# Column means of X beyond this trigger automatic centering.
CENTER_TOL = 1e-10


@dataclass
class DataSet:
    """Observed responses ``Y`` (n x q) and centered regressors ``X`` (n x p).

    ``X`` is centered on construction when its column means exceed
    ``CENTER_TOL``; ``was_centered`` records that this happened so reports
    can disclose it.  Saturated designs (p = n - 1, spanning the complement
    of the constant vector) are accepted; operations that need residual
    degrees of freedom enforce their own requirements.
    """

    Y: np.ndarray
    X: np.ndarray
    was_centered: bool = field(default=False)

    def __post_init__(self):
        self.Y = as_matrix(self.Y, "Y")
        self.X = as_matrix(self.X, "X")
        if self.Y.shape[0] != self.X.shape[0]:
            raise DataError(
                f"Y and X must have the same number of rows, "
                f"got {self.Y.shape[0]} and {self.X.shape[0]}"
            )
        if self.n < 2:
            raise DataError("need at least 2 observations")
        if self.q < 2:
            raise DataError("Y must have at least 2 columns")
        col_means = self.X.mean(axis=0)
        if np.max(np.abs(col_means)) > CENTER_TOL:
            self.X = self.X - col_means
            self.was_centered = True

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CovarianceTriple:
    """The three q x q covariance estimators plus the design rank."""

    sigma_hat: np.ndarray
    sigma_fit: np.ndarray
    sigma_res: np.ndarray
    r_x: int
    n: int

    @property
    def q(self) -> int:
        return self.sigma_hat.shape[0]

    @property
    def residual_df(self) -> int:
        return self.n - 1 - self.r_x


def covariance_triple(data: DataSet) -> CovarianceTriple:
    """Total, fitted, and residual covariance estimators (each divided by n).

    The fitted and residual parts are computed through an orthonormal basis
    of C(X) from a rank-revealing SVD, so the result depends on X only
    through its column space.
    """
    Y, X, n = data.Y, data.X, data.n
    Yc = Y - Y.mean(axis=0)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        raise DataError("degenerate design: X has rank 0")
    r_x = int(np.sum(s > RANK_RTOL * s[0]))
    if r_x == 0:
        raise DataError("degenerate design: X has rank 0")
    B = U[:, :r_x]

    sigma_hat = symmetrize(Yc.T @ Yc / n)
    G = B.T @ Y
    sigma_fit = symmetrize(G.T @ G / n)
    R = Yc - B @ (B.T @ Yc)
    sigma_res = symmetrize(R.T @ R / n)
    return CovarianceTriple(sigma_hat, sigma_fit, sigma_res, r_x=r_x, n=n)


def structured_covariance(Z, Z0, omega2, omega0_2) -> np.ndarray:
    """Assemble ``Z diag(omega2) Z' + Z0 diag(omega0_2) Z0'``."""
    Zm = require_orthonormal(Z, "Z")
    if np.size(Z0):
        Z0m = require_orthonormal(Z0, "Z0")
    else:
        Z0m = np.zeros((Zm.shape[0], 0))
    w = np.asarray(omega2, dtype=float).ravel()
    w0 = np.asarray(omega0_2, dtype=float).ravel()
    S = (Zm * w) @ Zm.T
    if Z0m.shape[1]:
        S = S + (Z0m * w0) @ Z0m.T
    return symmetrize(S)


def structured_precision(Z, Z0, omega2, omega0_2) -> np.ndarray:
    """Inverse of the structured covariance, using the aligned-block identity.

    When ``[Z, Z0]`` is orthonormal the inverse is the same expression with
    each diagonal block inverted entrywise.
    """
    w = 1.0 / np.asarray(omega2, dtype=float).ravel()
    w0 = 1.0 / np.asarray(omega0_2, dtype=float).ravel()
    return structured_covariance(Z, Z0, w, w0)


@dataclass
class PopulationModel:
    """True parameters for simulation and the closed-form expectations.

    ``[Z, Z0]`` must be a square orthonormal frame; the error covariance is
    ``Z diag(omega2) Z' + Z0 diag(omega0_2) Z0'`` and ``V_x`` is the marginal
    covariance of one (centered) row of X.
    """

    mu: np.ndarray
    Z: np.ndarray
    Z0: np.ndarray
    Gamma: np.ndarray
    omega2: np.ndarray
    omega0_2: np.ndarray
    V_x: np.ndarray

    def __post_init__(self):
        self.Z = require_orthonormal(self.Z, "Z")
        q, d = self.Z.shape
        self.Z0 = as_matrix(self.Z0, "Z0") if np.size(self.Z0) else np.zeros((q, 0))
        frame = np.hstack([self.Z, self.Z0])
        if frame.shape != (q, q):
            raise DataError(f"[Z, Z0] must be square, got {frame.shape}")
        require_orthonormal(frame, "[Z, Z0]")
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        if self.mu.size != q:
            raise DataError(f"mu must have length {q}")
        self.Gamma = as_matrix(self.Gamma, "Gamma")
        if self.Gamma.shape[1] != d:
            raise DataError(f"Gamma must have {d} columns")
        self.omega2 = np.asarray(self.omega2, dtype=float).ravel()
        self.omega0_2 = np.asarray(self.omega0_2, dtype=float).ravel()
        if self.omega2.size != d or self.omega0_2.size != q - d:
            raise DataError("omega2 / omega0_2 sizes must match the frame split")
        if np.any(self.omega2 <= 0.0) or (self.omega0_2.size and np.any(self.omega0_2 <= 0.0)):
            raise DataError("variance components must be positive")
        self.V_x = check_symmetric(self.V_x, "V_x")
        if self.V_x.shape[0] != self.Gamma.shape[0]:
            raise DataError("V_x must be p x p matching Gamma")

    @property
    def q(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.Gamma.shape[0]

    def sigma(self) -> np.ndarray:
        """Error covariance implied by the frame and variance components."""
        return structured_covariance(self.Z, self.Z0, self.omega2, self.omega0_2)

    def signal_second_moment(self) -> np.ndarray:
        """The rank-d signal term ``Z Gamma' V_x Gamma Z'``."""
        core = self.Gamma.T @ self.V_x @ self.Gamma
        return symmetrize(self.Z @ core @ self.Z.T)


def expected_covariances(
    pop: PopulationModel, n: int, r_x: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form expectations of (sigma_hat, sigma_fit, sigma_res).

    With Sigma the error covariance and M = Z Gamma' V_x Gamma Z':

    * E(sigma_hat) = ((n-1)/n) Sigma + ((n-1)/n) M
    * E(sigma_fit) = (r_x/n)   Sigma + ((n-1)/n) M
    * E(sigma_res) = ((n-1-r_x)/n) Sigma
    """
    if n <= r_x + 1:
        raise DataError(f"need n > r_x + 1, got n={n}, r_x={r_x}")
    sigma = pop.sigma()
    signal = pop.signal_second_moment()
    e_hat = ((n - 1) / n) * (sigma + signal)
    e_fit = (r_x / n) * sigma + ((n - 1) / n) * signal
    e_res = ((n - 1 - r_x) / n) * sigma
    return e_hat, e_fit, e_res


def moment_estimator(triple: CovarianceTriple) -> np.ndarray:
    """Signal estimator ``(n/r_x) sigma_fit - (n/(n-1)) sigma_hat``.

    Its expectation is ``((n-1-r_x)/r_x) Z Gamma' V_x Gamma Z'``, so the top
    eigenvectors estimate a basis for C(Z).  The result may be indefinite,
    and it degenerates to 0 when C(X) is the full complement of the constant
    vector.
    """
    if triple.r_x < 1:
        raise DataError("moment estimator needs rank(X) >= 1")
    if triple.n < 2:
        raise DataError("moment estimator needs n >= 2")
    n, r = triple.n, triple.r_x
    return symmetrize((n / r) * triple.sigma_fit - (n / (n - 1)) * triple.sigma_hat)


def sigma_from_res(triple: CovarianceTriple) -> np.ndarray:
    """Error-covariance estimate ``(n/(n-1-r_x)) sigma_res``.

    Unbiased in expectation since E(sigma_res) = ((n-1-r_x)/n) Sigma.
    """
    if triple.residual_df < 1:
        raise NumericalError("no residual degrees of freedom")
    return symmetrize((triple.n / triple.residual_df) * triple.sigma_res)


def expected_quadratic_form(pop: PopulationModel, X, P_A) -> np.ndarray:
    """Conditional expectation ``E(Y'P_A Y | X) = r(A) Sigma + Z G' X'P_A X G Z'``.

    ``P_A`` must be a perpendicular projection operator annihilating the
    constant vector, and ``X`` must be column-centered; both are checked.
    Serves as the oracle for the sample covariance quadratic forms.
    """
    Xm = as_matrix(X, "X")
    P = check_symmetric(P_A, "P_A", tol=1e-9)
    n = Xm.shape[0]
    if P.shape[0] != n:
        raise DataError("P_A must be n x n matching X")
    if np.max(np.abs(P @ P - P)) > 1e-8 * max(1.0, float(np.max(np.abs(P)))):
        raise DataError("P_A is not idempotent: not a projection operator")
    if np.max(np.abs(P @ np.ones(n))) > 1e-8:
        raise DataError("P_A must annihilate the constant vector (J'A = 0)")
    if np.max(np.abs(Xm.mean(axis=0))) > CENTER_TOL:
        raise DataError("X must be column-centered")
    r_a = int(round(float(np.trace(P))))
    XG = Xm @ pop.Gamma
    core = XG.T @ P @ XG
    return symmetrize(r_a * pop.sigma() + pop.Z @ core @ pop.Z.T)
