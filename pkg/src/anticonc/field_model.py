"""Gaussian field specifications: validation, factorization, degeneracy reduction."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import AllDegenerate, DimensionMismatch, NotPSD, NotSymmetric, RhoOutOfRange

SYM_RTOL = 1e-12
PSD_PIVOT_RTOL = 1e-10
RECON_RTOL = 1e-10
DUP_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """Law of an n-dimensional Gaussian field.

    ``chol`` is a sampling factor with ``chol @ chol.T == sigma``. For a
    positive definite ``sigma`` it is the ordinary lower Cholesky factor;
    for a singular one it is the pivoted factor mapped back to the
    original coordinate order, with ``n - rank`` zero columns.
    """

    mu: np.ndarray
    sigma: np.ndarray
    chol: np.ndarray
    rank: int

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.sigma).copy()

    @property
    def sds(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.sigma), 0.0))

    @property
    def full_rank(self) -> bool:
        return self.rank == self.n

    def correlation(self) -> np.ndarray:
        sd = self.sds
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.sigma / np.outer(sd, sd)
        r[~np.isfinite(r)] = 0.0
        np.fill_diagonal(r, np.where(sd > 0, 1.0, 0.0))
        return r

    def spec_id(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mu).tobytes())
        h.update(np.ascontiguousarray(self.sigma).tobytes())
        return h.hexdigest()[:16]

    def subset(self, idx) -> FieldSpec:
        idx = np.asarray(idx, dtype=int)
        return validate_spec(self.mu[idx], self.sigma[np.ix_(idx, idx)])

    def affine(self, a: float, b: float) -> FieldSpec:
        """Law of ``a * X + b``."""
        return validate_spec(a * self.mu + b, a * a * self.sigma)

    def permuted(self, perm) -> FieldSpec:
        return self.subset(perm)


def pivoted_cholesky(a: np.ndarray, tol: float):
    """Diagonal-pivoted Cholesky with rank detection.

    Returns ``(L, piv, rank, residual_min)`` where ``L`` is n x n lower
    triangular in pivoted order (``L @ L.T ~= a[piv][:, piv]``) and
    ``residual_min`` is the smallest remaining Schur pivot at termination.
    """
    n = a.shape[0]
    piv = np.arange(n)
    L = np.zeros((n, n))
    d = np.diag(a).astype(np.float64).copy()
    rank = n
    for j in range(n):
        q = j + int(np.argmax(d[j:]))
        if d[q] <= tol:
            rank = j
            break
        if q != j:
            piv[[j, q]] = piv[[q, j]]
            L[[j, q], :j] = L[[q, j], :j]
            d[[j, q]] = d[[q, j]]
        L[j, j] = np.sqrt(d[j])
        if j + 1 < n:
            col = a[piv[j + 1:], piv[j]] - L[j + 1:, :j] @ L[j, :j]
            L[j + 1:, j] = col / L[j, j]
            d[j + 1:] -= L[j + 1:, j] ** 2
    residual_min = float(d[rank:].min()) if rank < n else 0.0
    return L, piv, rank, residual_min


def validate_spec(mu, sigma) -> FieldSpec:
    """Check a (mean, covariance) pair and cache its factor.

    No PSD repair is attempted; an indefinite covariance raises ``NotPSD``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if mu.ndim != 1 or sigma.shape != (mu.shape[0], mu.shape[0]):
        raise DimensionMismatch(f"mu has shape {mu.shape}, sigma has shape {sigma.shape}")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise DimensionMismatch("mu and sigma must have finite entries")
    scale = float(np.max(np.abs(sigma))) if sigma.size else 0.0
    asym = float(np.max(np.abs(sigma - sigma.T))) if sigma.size else 0.0
    if asym > SYM_RTOL * max(scale, np.finfo(float).tiny):
        raise NotSymmetric(f"max |sigma - sigma^T| = {asym:.3e}")
    sigma = 0.5 * (sigma + sigma.T)
    n = mu.shape[0]
    maxdiag = float(np.max(np.diag(sigma))) if n else 0.0
    if maxdiag < 0:
        raise NotPSD(f"negative variance {maxdiag:.3e}", most_negative_pivot=maxdiag)
    tol = PSD_PIVOT_RTOL * maxdiag
    L, piv, rank, residual_min = pivoted_cholesky(sigma, tol)
    if residual_min < -tol:
        raise NotPSD(f"most negative pivot {residual_min:.3e}", most_negative_pivot=residual_min)
    if rank == n:
        chol = np.linalg.cholesky(sigma)
    else:
        chol = np.zeros((n, n))
        chol[piv, :] = L
    fro = np.linalg.norm(sigma)
    err = np.linalg.norm(chol @ chol.T - sigma)
    if err > RECON_RTOL * max(fro, 1.0) * max(n, 1):
        raise NotPSD(f"factor does not reproduce sigma (residual {err:.3e})",
                     most_negative_pivot=residual_min)
    return FieldSpec(_frozen(mu), _frozen(sigma), _frozen(chol), int(rank))


def equicorrelated_spec(n: int, rho: float) -> FieldSpec:
    if n < 1:
        raise RhoOutOfRange("n must be positive")
    lo = -1.0 / (n - 1) if n > 1 else -np.inf
    if not (lo < rho < 1.0):
        raise RhoOutOfRange(f"rho={rho} outside ({lo}, 1) for n={n}")
    sigma = np.full((n, n), float(rho))
    np.fill_diagonal(sigma, 1.0)
    return validate_spec(np.zeros(n), sigma)


@dataclass(frozen=True)
class DegeneracyReport:
    kept: list[int]
    dropped: list[tuple[int, str]]
    reduced: FieldSpec
    # perfectly correlated pairs that differ in mean or scale; kept as-is
    unresolved: list[tuple[int, int]] = field(default_factory=list)

    @property
    def nondegenerate(self) -> bool:
        return not self.unresolved


def reduce_degenerate(spec: FieldSpec, tol: float = 1e-12) -> DegeneracyReport:
    """Delete constant coordinates and exact duplicates.

    Duplicates (correlation 1, equal mean and variance) are a.s. equal, so
    dropping the higher index leaves every symmetric function of the kept
    coordinates' maximum unchanged. Zero-variance coordinates of a centered
    field are a.s. 0; dropping them preserves ``max |X_i|``.
    """
    var = spec.variances
    dropped: list[tuple[int, str]] = []
    live = []
    for i in range(spec.n):
        if var[i] < tol:
            dropped.append((i, "zero-variance"))
        else:
            live.append(i)
    if not live:
        report = DegeneracyReport([], dropped, spec, [])
        raise AllDegenerate("every coordinate has zero variance", report=report)
    corr = spec.correlation()
    sd = spec.sds
    kept: list[int] = []
    unresolved: list[tuple[int, int]] = []
    for j in live:
        dup_of = None
        for i in kept:
            if corr[i, j] >= 1.0 - DUP_TOL:
                same_law = (abs(spec.mu[i] - spec.mu[j]) <= DUP_TOL
                            and abs(sd[i] - sd[j]) <= DUP_TOL * sd[i])
                if same_law:
                    dup_of = i
                    break
                unresolved.append((i, j))
        if dup_of is None:
            kept.append(j)
        else:
            dropped.append((j, f"duplicate-of {dup_of}"))
    dropped.sort()
    return DegeneracyReport(kept, dropped, spec.subset(kept), unresolved)


def augment_for_abs(spec: FieldSpec) -> FieldSpec:
    """2n-field (X, -X) whose maximum is ``max |X_i|``."""
    s = spec.sigma
    sigma = np.block([[s, -s], [-s, s]])
    mu = np.concatenate([spec.mu, -spec.mu])
    return validate_spec(mu, sigma)


def random_spec(rng: np.random.Generator, n: int, *, centered: bool = False,
                sd_range=(0.5, 2.0), mean_range=(-1.0, 1.0)) -> FieldSpec:
    """Random field: normalized Wishart correlation, random scales and means."""
    a = rng.standard_normal((n, n + 1))
    w = a @ a.T
    d = np.sqrt(np.diag(w))
    corr = w / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    sd = rng.uniform(*sd_range, size=n)
    mu = np.zeros(n) if centered else rng.uniform(*mean_range, size=n)
    return validate_spec(mu, corr * np.outer(sd, sd))
