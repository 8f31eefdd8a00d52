"""Canonical form of the linear model.

An orthogonal matrix ``Q = (Q1 Q2)`` with ``col(Q1) = col(X)`` rotates the
response into regression coordinates ``Z = Q1' Y`` and residual coordinates
``U = Q2' Y``.  Every estimator in this package depends on ``Y`` only through
``Z``; the residual cross-product ``S = U'U`` carries the scale information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, RankDeficient

DEFAULT_RANK_TOL = 1e-10


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be one- or two-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class RegressionData:
    """Design ``X`` (n x p), response ``Y`` (n x m) and column labels.

    A one-dimensional response is stored as an ``n x 1`` matrix.  The vector
    model needs ``n > p``; the matrix model (``m > 1``) needs
    ``n > p + m + 1`` so that ``S`` is invertible and the invariant-loss
    estimator is defined.
    """

    X: np.ndarray
    Y: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = _as_matrix(self.X, "X")
        Y = _as_matrix(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        n, p = X.shape
        m = Y.shape[1]
        if n <= p:
            raise DimensionError(f"need n > p, got n={n}, p={p}")
        if m > 1 and n <= p + m + 1:
            raise DimensionError(f"matrix model needs n > p + m + 1, got n={n}, p={p}, m={m}")
        names = tuple(self.names) if len(self.names) else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DimensionError(f"{len(names)} names given for {p} columns")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    def subset(self, columns: Sequence[int]) -> "RegressionData":
        cols = list(columns)
        return RegressionData(self.X[:, cols], self.Y, tuple(self.names[j] for j in cols))


@dataclass(frozen=True)
class CanonicalForm:
    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    S: np.ndarray

    @property
    def n(self) -> int:
        return self.Q1.shape[0]

    @property
    def p(self) -> int:
        return self.Q1.shape[1]

    @property
    def m(self) -> int:
        return self.Z.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return np.hstack([self.Q1, self.Q2])

    def rotate(self, Y) -> tuple[np.ndarray, np.ndarray]:
        """Canonical coordinates ``(Q1'Y, Q2'Y)`` of another response."""
        Y = _as_matrix(Y, "Y")
        return self.Q1.T @ Y, self.Q2.T @ Y


def positive_qr(A: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL, columns=None):
    """Complete Householder QR with a positive diagonal in ``R``.

    Returns ``(Q, R)`` with ``Q`` square orthogonal and ``R`` the leading
    ``k x k`` triangular block.  Raises :class:`RankDeficient` naming the
    first column whose diagonal falls below ``rank_tol * max|R_ii|``;
    ``columns`` maps local to caller column indices for that message.
    """
    n, k = A.shape
    Q, R = np.linalg.qr(A, mode="complete")
    R = R[:k]
    diag = np.diag(R)
    if k:
        mags = np.abs(diag)
        bad = np.flatnonzero(mags <= rank_tol * mags.max()) if mags.max() > 0 else np.arange(k)
        if bad.size:
            j = int(bad[0])
            raise RankDeficient(columns[j] if columns is not None else j)
    signs = np.where(diag < 0, -1.0, 1.0)
    Q = Q.copy()
    Q[:, :k] *= signs
    R = signs[:, None] * R
    return Q, R


def factorize(data: RegressionData, rank_tol: float = DEFAULT_RANK_TOL) -> CanonicalForm:
    """Reduce ``data`` to canonical form.

    Raises
    ------
    DimensionError
        If ``n <= p``.
    RankDeficient
        If ``X`` does not have full column rank (to ``rank_tol``).
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    X, Y = data.X, data.Y
    n, p = X.shape
    if n <= p:
        raise DimensionError(f"need n > p, got n={n}, p={p}")
    Q, R = positive_qr(X, rank_tol)
    Q1, Q2 = Q[:, :p], Q[:, p:]
    Z = Q1.T @ Y
    U = Q2.T @ Y
    S = U.T @ U
    S = 0.5 * (S + S.T)
    for a in (Q1, Q2, R, Z, U, S):
        a.setflags(write=False)
    return CanonicalForm(Q1=Q1, Q2=Q2, R=R, Z=Z, U=U, S=S)


def variance_estimate(cf: CanonicalForm, divisor: str = "n-p") -> float:
    """Residual variance ``||U||^2 / (n - p)`` from the full least-squares fit.

    ``divisor="n-p-2"`` gives the modified-Cp variant; it is never the default.
    """
    if cf.m != 1:
        raise DimensionError("variance_estimate is defined for the vector model (m = 1)")
    dof = cf.n - cf.p
    if divisor == "n-p-2":
        dof -= 2
    elif divisor != "n-p":
        raise ValueError(f"unknown divisor {divisor!r}")
    if dof <= 0:
        raise DimensionError(f"divisor {divisor} is not positive for n={cf.n}, p={cf.p}")
    return float(cf.S[0, 0]) / dof


def ls_fit(cf: CanonicalForm) -> np.ndarray:
    """Least-squares coefficients (p x m) by back-substitution ``R b = Z``."""
    return solve_triangular(cf.R, cf.Z, lower=False)
