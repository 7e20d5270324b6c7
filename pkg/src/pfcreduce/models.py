"""Model fitting: principal components, isotonic principal fitted components,
and the two structured-covariance variants with likelihood-based selection of
eigenvector subsets.

Terminology used throughout:

* isotonic model   -- error covariance sigma^2 I; the signal basis is
  estimated by the top eigenvectors of the fitted covariance.
* model10 variant  -- structured covariance aligned with the signal frame,
  no regression design enters; only the total covariance appears in the
  profile likelihood.
* model13 variant  -- structured covariance with a regression design; the
  profile log-likelihood is
  -(n/2) [ logdet(Z0' sigma_hat Z0) + logdet(Z' sigma_res Z) ].

Selection works by computing candidate eigenvectors of one covariance
estimate and maximizing the profile likelihood over d-subsets of them,
either exhaustively or by best-improvement single-swap hill climbing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .estimators import CovarianceTriple, DataSet, covariance_triple, moment_estimator
from .matalg import (
    RANK_RTOL,
    apply_canonical_signs,
    as_matrix,
    check_symmetric,
    logdet_pd,
    orthonormal_complement,
    orthonormalize,
    require_orthonormal,
    sym_eig,
    symmetrize,
)

VARIANTS = ("model10", "model13")
SOURCES = ("sigma_hat", "sigma_fit", "sigma_res")

# Two subsets whose profile log-likelihoods agree within this are tied; the
# lexicographically smallest index set wins.
SUBSET_TIE_TOL = 1e-12

# Default ceiling on the number of subsets the exhaustive search will touch.
DEFAULT_SUBSET_CAP = 100_000

EIGENGAP_WARNING = (
    "eigenvalues {0} and {1} agree within tolerance; "
    "the selected subspace is not identifiable"
)


@dataclass
class SubspaceEstimate:
    """An orthonormal q x d basis for an estimated signal subspace.

    ``source`` names the covariance estimate the basis came from;
    ``selected_indices`` (1-based, in descending-eigenvalue order) is set
    whenever the basis corresponds to a subset of candidate eigenvectors.
    """

    basis: np.ndarray
    source: str
    selected_indices: tuple[int, ...] | None = None
    log_lik: float | None = None
    warning: str | None = None

    def __post_init__(self):
        self.basis = require_orthonormal(self.basis, "basis")
        if self.selected_indices is not None:
            idx = tuple(int(i) for i in self.selected_indices)
            q, d = self.basis.shape
            if len(set(idx)) != d or any(i < 1 or i > q for i in idx):
                raise DataError("selected_indices must be d distinct values in [1, q]")
            self.selected_indices = idx

    @property
    def d(self) -> int:
        return self.basis.shape[1]


@dataclass
class IsotonicFit:
    """Least-squares / maximum-likelihood fit of the isotonic model."""

    mu_hat: np.ndarray
    Z_hat: SubspaceEstimate
    Gamma_hat: np.ndarray
    sse: float
    sigma2_hat: float
    log_lik: float


@dataclass
class StructuredFit:
    """Selected eigenvector subset and variance components for a structured fit.

    ``omega_warning`` is set when a projected block whose diagonal is being
    reported was not actually diagonal.  ``search_log_liks`` records the
    accepted log-likelihood sequence of the sequential search (empty for the
    exhaustive search).
    """

    Z_hat: SubspaceEstimate
    Z0_hat: np.ndarray
    omega2_hat: np.ndarray
    omega0_2_hat: np.ndarray
    log_lik: float
    model_variant: str
    omega_warning: str | None = None
    search_log_liks: tuple[float, ...] = ()


def _total_covariance(Y: np.ndarray) -> np.ndarray:
    Yc = Y - Y.mean(axis=0)
    return symmetrize(Yc.T @ Yc / Y.shape[0])


def _eigengap_warning(values: np.ndarray, d: int) -> str | None:
    if d < values.size and abs(values[d - 1] - values[d]) <= 1e-10 * max(
        1.0, abs(values[d - 1])
    ):
        return EIGENGAP_WARNING.format(d, d + 1)
    return None


def fit_pc(Y, d: int) -> SubspaceEstimate:
    """Principal-component estimate: top-d eigenvectors of the total covariance.

    This is the saturated-design limit of the fitted-covariance estimate, so
    only ``Y`` is needed.  A warning is attached (not raised) when the
    eigengap at position d vanishes.
    """
    Ym = as_matrix(Y, "Y")
    n, q = Ym.shape
    if n < 2:
        raise DataError("need at least 2 observations")
    if not 1 <= d < q:
        raise DataError(f"need 1 <= d < q, got d={d}, q={q}")
    dec = sym_eig(_total_covariance(Ym))
    return SubspaceEstimate(
        basis=dec.vectors[:, :d],
        source="sigma_hat",
        selected_indices=tuple(range(1, d + 1)),
        warning=_eigengap_warning(dec.values, d),
    )


def sse_from_triple(triple: CovarianceTriple, Z) -> float:
    """Isotonic residual sum of squares from a precomputed covariance triple.

    Equals ``tr(n sigma_hat) - tr(Z' n sigma_fit Z)``; nonnegative in exact
    arithmetic, clamped at 0 against roundoff.
    """
    Zm = require_orthonormal(Z, "Z")
    if Zm.shape[0] != triple.q:
        raise DataError(f"Z must have {triple.q} rows")
    n = triple.n
    value = n * float(np.trace(triple.sigma_hat)) - n * float(
        np.trace(Zm.T @ triple.sigma_fit @ Zm)
    )
    return max(0.0, value)


def sse_isotonic(data: DataSet, Z) -> float:
    """Isotonic residual sum of squares at a given orthonormal basis ``Z``."""
    return sse_from_triple(covariance_triple(data), Z)


def fit_pfc_isotonic(data: DataSet, d: int) -> IsotonicFit:
    """Maximum-likelihood fit of the isotonic reduced-rank regression model.

    The signal basis is the top-d eigenvectors of the fitted covariance;
    ``mu_hat`` is the column mean of Y, and ``Gamma_hat`` uses the
    Moore-Penrose inverse of X so rank-deficient designs stay well defined.
    """
    if not 1 <= d < data.q:
        raise DataError(f"need 1 <= d < q, got d={d}, q={data.q}")
    triple = covariance_triple(data)
    if not np.any(triple.sigma_fit):
        raise DataError("no fitted variation: the fitted covariance is zero")
    dec = sym_eig(triple.sigma_fit)
    Z_hat = dec.vectors[:, :d]
    n, q = data.n, data.q
    sse = sse_from_triple(triple, Z_hat)
    sigma2 = sse / (n * q)
    if sigma2 > 0.0:
        log_lik = -(n * q / 2.0) * math.log(sigma2) - sse / (2.0 * sigma2)
    else:
        log_lik = math.inf  # exact interpolation; the likelihood is unbounded
    mu_hat = data.Y.mean(axis=0)
    Gamma_hat = np.linalg.pinv(data.X, rcond=RANK_RTOL) @ data.Y @ Z_hat
    estimate = SubspaceEstimate(
        basis=Z_hat,
        source="sigma_fit",
        selected_indices=tuple(range(1, d + 1)),
        log_lik=log_lik,
        warning=_eigengap_warning(dec.values, d),
    )
    return IsotonicFit(
        mu_hat=mu_hat,
        Z_hat=estimate,
        Gamma_hat=Gamma_hat,
        sse=sse,
        sigma2_hat=sigma2,
        log_lik=log_lik,
    )


def _block_logdet(S: np.ndarray, B: np.ndarray, label: str) -> float:
    if B.shape[1] == 0:
        return 0.0
    try:
        return logdet_pd(B.T @ S @ B)
    except NumericalError as exc:
        raise NumericalError(f"singular profile block: {label}") from exc


def profile_loglik_structured(
    triple: CovarianceTriple, Z, variant: str, Z0=None
) -> float:
    """Profile log-likelihood of a structured-covariance model at basis ``Z``.

    * model13: -(n/2) [ logdet(Z0' sigma_hat Z0) + logdet(Z' sigma_res Z) ]
    * model10: -(n/2)   logdet(Z0' sigma_hat Z0)

    ``Z0`` may be any orthonormal completion of ``Z``; when omitted one is
    computed.  The value depends only on C(Z), not on the completion chosen.
    """
    if variant not in VARIANTS:
        raise DataError(f"variant must be one of {VARIANTS}, got {variant!r}")
    Zm = require_orthonormal(Z, "Z")
    q = triple.q
    if Zm.shape[0] != q:
        raise DataError(f"Z must have {q} rows")
    d = Zm.shape[1]
    if Z0 is None:
        Z0m = orthonormal_complement(Zm)
    else:
        Z0m = require_orthonormal(Z0, "Z0") if np.size(Z0) else np.zeros((q, 0))
        if Z0m.shape != (q, q - d):
            raise DataError(f"Z0 must be {q} x {q - d}")
        if Z0m.shape[1] and np.max(np.abs(Zm.T @ Z0m)) > 1e-8:
            raise DataError("Z0 is not orthogonal to Z")
    n = triple.n
    value = -(n / 2.0) * _block_logdet(triple.sigma_hat, Z0m, "Z0' sigma_hat Z0")
    if variant == "model13":
        if triple.residual_df < q:
            raise NumericalError(
                "residual covariance cannot be positive definite: "
                f"need n - 1 - rank(X) >= q, got {triple.residual_df} < {q}"
            )
        value += -(n / 2.0) * _block_logdet(triple.sigma_res, Zm, "Z' sigma_res Z")
    return float(value)


def _resolve_structured_inputs(data_or_Y, variant: str, source: str) -> CovarianceTriple:
    if variant not in VARIANTS:
        raise DataError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if source not in SOURCES:
        raise DataError(f"source must be one of {SOURCES}, got {source!r}")
    if isinstance(data_or_Y, DataSet):
        return covariance_triple(data_or_Y)
    Y = as_matrix(data_or_Y, "Y")
    if variant != "model10" or source != "sigma_hat":
        raise DataError(
            "a DataSet with regressors is required unless "
            "variant='model10' and source='sigma_hat'"
        )
    n = Y.shape[0]
    if n < 2:
        raise DataError("need at least 2 observations")
    zero = np.zeros((Y.shape[1], Y.shape[1]))
    # Total-covariance-only carrier; the model10 likelihood reads nothing else.
    return CovarianceTriple(_total_covariance(Y), zero, zero, r_x=0, n=n)


def _candidate_frame(triple: CovarianceTriple, source: str) -> np.ndarray:
    matrix = getattr(triple, source)
    return sym_eig(matrix).vectors


def _omega_block(S: np.ndarray, B: np.ndarray, label: str):
    """Diagonal of B'SB plus a warning when that block was not diagonal."""
    if B.shape[1] == 0:
        return np.zeros(0), None
    block = B.T @ S @ B
    diag = np.diag(block).copy()
    off = block - np.diag(diag)
    warning = None
    if np.linalg.norm(off, "fro") > 1e-6 * max(1.0, np.linalg.norm(block, "fro")):
        warning = f"{label} was not diagonal; its diagonal is reported"
    return diag, warning


def _assemble_structured_fit(
    triple: CovarianceTriple,
    frame: np.ndarray,
    subset: tuple[int, ...],
    log_lik: float,
    variant: str,
    source: str,
    search_log_liks: tuple[float, ...] = (),
) -> StructuredFit:
    q = frame.shape[0]
    rest = tuple(i for i in range(q) if i not in subset)
    Z = frame[:, list(subset)]
    Z0 = frame[:, list(rest)]
    omega_source = triple.sigma_res if variant == "model13" else triple.sigma_hat
    omega2, warn_a = _omega_block(omega_source, Z, "Z' (signal block)")
    omega0_2, warn_b = _omega_block(triple.sigma_hat, Z0, "Z0' (complement block)")
    warnings = "; ".join(w for w in (warn_a, warn_b) if w) or None
    estimate = SubspaceEstimate(
        basis=Z,
        source=source,
        selected_indices=tuple(i + 1 for i in subset),
        log_lik=log_lik,
    )
    return StructuredFit(
        Z_hat=estimate,
        Z0_hat=Z0,
        omega2_hat=omega2,
        omega0_2_hat=omega0_2,
        log_lik=log_lik,
        model_variant=variant,
        omega_warning=warnings,
        search_log_liks=search_log_liks,
    )


def _subset_loglik(
    triple: CovarianceTriple, frame: np.ndarray, subset: tuple[int, ...], variant: str
) -> float:
    q = frame.shape[0]
    rest = [i for i in range(q) if i not in subset]
    return profile_loglik_structured(
        triple, frame[:, list(subset)], variant, Z0=frame[:, rest]
    )


def fit_structured_exhaustive(
    data_or_Y, d: int, variant: str, source: str, cap: int = DEFAULT_SUBSET_CAP
) -> StructuredFit:
    """Best d-subset of candidate eigenvectors by exhaustive likelihood search.

    Candidates are the eigenvectors of the covariance estimate named by
    ``source``; every one of the C(q, d) subsets is scored with the profile
    log-likelihood of ``variant``.  Ties within ``SUBSET_TIE_TOL`` go to the
    lexicographically smallest index set, independent of evaluation order.
    """
    triple = _resolve_structured_inputs(data_or_Y, variant, source)
    q = triple.q
    if not 1 <= d <= q:
        raise DataError(f"need 1 <= d <= q, got d={d}, q={q}")
    n_subsets = math.comb(q, d)
    if n_subsets > cap:
        raise DataError(
            f"{n_subsets} subsets exceed the cap of {cap}; "
            "use fit_structured_sequential instead"
        )
    frame = _candidate_frame(triple, source)
    best_subset: tuple[int, ...] | None = None
    best_value = -math.inf
    for subset in itertools.combinations(range(q), d):
        value = _subset_loglik(triple, frame, subset, variant)
        if value > best_value + SUBSET_TIE_TOL:
            best_value = value
            best_subset = subset
    assert best_subset is not None
    return _assemble_structured_fit(triple, frame, best_subset, best_value, variant, source)


def fit_structured_sequential(
    data_or_Y, d: int, variant: str, source: str
) -> StructuredFit:
    """Best-improvement single-swap hill climbing over eigenvector subsets.

    Starts from the d largest-eigenvalue candidates, repeatedly evaluates all
    d(q-d) single-swap neighbors, and moves to the best strict improvement
    until reaching a local maximum.  Deterministic: neighbor ties go to the
    lexicographically smallest index set.
    """
    triple = _resolve_structured_inputs(data_or_Y, variant, source)
    q = triple.q
    if not 1 <= d <= q:
        raise DataError(f"need 1 <= d <= q, got d={d}, q={q}")
    frame = _candidate_frame(triple, source)
    cache: dict[tuple[int, ...], float] = {}

    def score(subset: tuple[int, ...]) -> float:
        if subset not in cache:
            cache[subset] = _subset_loglik(triple, frame, subset, variant)
        return cache[subset]

    current = tuple(range(d))
    current_value = score(current)
    accepted = [current_value]
    while True:
        best_neighbor: tuple[int, ...] | None = None
        best_value = -math.inf
        outside = [j for j in range(q) if j not in current]
        for i in current:
            for j in outside:
                neighbor = tuple(sorted(set(current) - {i} | {j}))
                value = score(neighbor)
                if value > best_value + SUBSET_TIE_TOL or (
                    best_neighbor is not None
                    and abs(value - best_value) <= SUBSET_TIE_TOL
                    and neighbor < best_neighbor
                ):
                    best_value = value
                    best_neighbor = neighbor
        if best_neighbor is None or best_value <= current_value:
            break
        current, current_value = best_neighbor, best_value
        accepted.append(current_value)
    return _assemble_structured_fit(
        triple, frame, current, current_value, variant, source,
        search_log_liks=tuple(accepted),
    )


def transform_general_sigma(est: SubspaceEstimate, sigma_est) -> SubspaceEstimate:
    """Map an estimated basis B to an orthonormal basis of C(sigma_est^{-1} B).

    Under a general error covariance the relevant reduction is the
    covariance-inverse transform of the signal space; this applies it to an
    already-estimated basis using any positive definite covariance estimate.
    """
    S = check_symmetric(sigma_est, "sigma_est")
    w = np.linalg.eigvalsh(S)
    if w[-1] <= 0.0 or w[0] <= 1e-12 * w[-1]:
        raise NumericalError("sigma_est is singular")
    transformed = np.linalg.solve(S, est.basis)
    return SubspaceEstimate(basis=orthonormalize(transformed), source="transformed")


def fit_vs_res_eigen(triple: CovarianceTriple) -> tuple[np.ndarray, np.ndarray]:
    """Generalized eigenpairs of sigma_fit v = lambda sigma_res v.

    Solved by whitening with sigma_res^{-1/2}; the returned vectors are
    unit-length (not mutually orthogonal), canonically signed, and ordered
    by descending eigenvalue.
    """
    w, U = np.linalg.eigh(triple.sigma_res)
    if w[-1] <= 0.0 or w[0] <= 1e-12 * w[-1]:
        raise NumericalError("sigma_res is not positive definite")
    inv_half = (U / np.sqrt(w)) @ U.T
    dec = sym_eig(inv_half @ triple.sigma_fit @ inv_half)
    vectors = inv_half @ dec.vectors
    vectors = apply_canonical_signs(vectors / np.linalg.norm(vectors, axis=0))
    return dec.values, vectors


def fit_res_inv_fit(data: DataSet, d: int) -> SubspaceEstimate:
    """Top-d generalized eigenvectors of the fitted-versus-residual problem.

    Estimates the covariance-inverse-transformed signal space directly;
    requires the residual covariance to be positive definite
    (n - 1 - rank(X) >= q).
    """
    triple = covariance_triple(data)
    if triple.residual_df < triple.q:
        raise NumericalError(
            "residual covariance cannot be positive definite: "
            f"need n - 1 - rank(X) >= q, got {triple.residual_df} < {triple.q}"
        )
    if not 1 <= d < triple.q:
        raise DataError(f"need 1 <= d < q, got d={d}, q={triple.q}")
    _, vectors = fit_vs_res_eigen(triple)
    return SubspaceEstimate(
        basis=orthonormalize(vectors[:, :d]),
        source="transformed",
        selected_indices=tuple(range(1, d + 1)),
    )


def fit_moment(data: DataSet, d: int) -> SubspaceEstimate:
    """Top-d eigenvectors of the moment-based signal estimator."""
    triple = covariance_triple(data)
    if not 1 <= d < triple.q:
        raise DataError(f"need 1 <= d < q, got d={d}, q={triple.q}")
    dec = sym_eig(moment_estimator(triple))
    return SubspaceEstimate(
        basis=dec.vectors[:, :d],
        source="moment",
        selected_indices=tuple(range(1, d + 1)),
        warning=_eigengap_warning(dec.values, d),
    )
