"""Model-selection criteria as unbiased loss estimators.

For a fitted mean ``X beta_hat`` with divergence ``df`` and the full-model
variance estimate ``sigma2_hat = ||U||^2 / (n - p)``::

    Cp     = rss / sigma2_hat + 2 df - n
    AIC    = rss / sigma2_hat + 2 df
    delta0 = rss + (2 df - n) sigma2_hat  = sigma2_hat * Cp = sigma2_hat * (AIC - n)

``delta0`` estimates the quadratic loss ``||X beta_hat - X beta||^2`` without
bias for any spherically symmetric error law.  ``delta0_inv`` and
``delta0_inv_elliptical`` target the invariant (scale-free) loss.

The scalar functions accept numpy arrays elementwise, which the Monte Carlo
harness relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .canonical import CanonicalForm, RegressionData, factorize, variance_estimate
from .errors import DimensionError, SingularS, ZeroResidual, ZeroVariance
from .estimators import EstimatorSpec, fit

SPD_TOL = 1e-12


def mallows_cp(rss, sigma2_hat, df, n):
    if np.any(np.asarray(sigma2_hat) <= 0):
        raise ZeroVariance("Cp needs sigma2_hat > 0")
    return rss / sigma2_hat + 2 * df - n


def aic_gaussian(rss, sigma2_hat, df):
    """Gaussian AIC with the generalized degrees of freedom ``df``."""
    if np.any(np.asarray(sigma2_hat) <= 0):
        raise ZeroVariance("AIC needs sigma2_hat > 0")
    return rss / sigma2_hat + 2 * df


def delta0(rss, sigma2_hat, df, n):
    """Unbiased estimator of ``||X beta_hat - X beta||^2``."""
    return rss + (2 * df - n) * sigma2_hat


def delta0_inv(rss, s_norm, df, n: int, p: int):
    """Invariant-loss estimator ``(n-p-2) rss / s_norm + 2 df - n``.

    ``s_norm`` is the full-model residual sum of squares ``||U||^2``.  This
    is the closed form as usually stated; its expectation under Gaussian
    errors falls short of the invariant risk by exactly 2.  See
    :func:`delta0_inv_corrected`.
    """
    if n < 5:
        raise DimensionError(f"need n >= 5, got n={n}")
    if n - p - 2 <= 0:
        raise DimensionError(f"need n - p - 2 > 0, got n={n}, p={p}")
    if np.any(np.asarray(s_norm) <= 0):
        raise ZeroResidual("full-model residual is zero")
    return (n - p - 2) * rss / s_norm + 2 * df - n


def delta0_inv_corrected(rss, s_norm, df, n: int, p: int):
    """:func:`delta0_inv` plus 2, which makes it unbiased for the invariant loss.

    With ``rss = ||Z - theta_hat||^2 + ||U||^2`` the term
    ``(n-p-2) ||U||^2 / s_norm`` contributes ``n-p-2`` where the invariant
    risk needs ``n-p``.
    """
    return delta0_inv(rss, s_norm, df, n, p) + 2


def _spd_inverse(S: np.ndarray) -> np.ndarray:
    """Inverse of (a stack of) SPD matrices via Cholesky.

    A pivot with ``L_ii^2 <= 1e-12 * ||S||_2`` counts as singular.
    """
    S = np.asarray(S, dtype=float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularS(str(exc)) from None
    pivots = np.diagonal(L, axis1=-2, axis2=-1) ** 2
    scale = np.linalg.norm(S, ord=2, axis=(-2, -1))[..., None]
    if np.any(pivots <= SPD_TOL * scale):
        raise SingularS("S is numerically singular")
    eye = np.broadcast_to(np.eye(S.shape[-1]), S.shape)
    Linv = np.linalg.solve(L, eye)
    return np.swapaxes(Linv, -2, -1) @ Linv


def weighted_frobenius2(M, W):
    """``tr(M W M')`` for (stacks of) n x m matrices ``M`` and m x m ``W``."""
    return np.sum((M @ W) * M, axis=(-2, -1))


def delta0_inv_elliptical(residual, S, df, n: int, p: int, m: int):
    """Invariant-loss estimator for the matrix model with unknown scale matrix.

    ``(n-p-m-1) tr(R S^{-1} R') + 2 df - n m`` where ``R = Y - X beta_hat``
    and ``S = U'U``.  Accepts stacks ``residual[..., n, m]`` and
    ``S[..., m, m]``.  For ``m = 1`` the value is delegated to
    :func:`delta0_inv` so both routes agree to the last bit.
    """
    if n <= p + m + 1:
        raise DimensionError(f"need n > p + m + 1, got n={n}, p={p}, m={m}")
    residual = np.asarray(residual, dtype=float)
    S = np.asarray(S, dtype=float)
    if residual.shape[-1] != m or S.shape[-2:] != (m, m):
        raise DimensionError("residual / S shapes do not match m")
    if m == 1:
        rss = np.sum(residual * residual, axis=(-2, -1))
        s_norm = S[..., 0, 0]
        if np.any(s_norm <= 0):
            raise SingularS("S is zero")
        return delta0_inv(rss, s_norm, df, n, p)
    Sinv = _spd_inverse(S)
    return (n - p - m - 1) * weighted_frobenius2(residual, Sinv) + 2 * df - n * m


def delta0_inv_elliptical_corrected(residual, S, df, n: int, p: int, m: int):
    """:func:`delta0_inv_elliptical` plus ``m (m + 1)``; E*-unbiased for the invariant loss."""
    return delta0_inv_elliptical(residual, S, df, n, p, m) + m * (m + 1)


@dataclass(frozen=True)
class CriterionReport:
    label: str
    df: float
    rss: float
    sigma2_hat: Optional[float]
    cp: Optional[float]
    aic: Optional[float]
    delta0: Optional[float]
    delta0_inv: Optional[float]

    def value(self, criterion: str) -> float:
        v = getattr(self, criterion)
        if v is None:
            raise ValueError(f"{criterion} is not available for {self.label}")
        return v


CRITERIA = ("cp", "aic", "delta0", "delta0_inv")


def report(
    spec: EstimatorSpec,
    data: RegressionData,
    cf: CanonicalForm | None = None,
    sigma2_divisor: str = "n-p",
) -> CriterionReport:
    """Fit ``spec`` and evaluate every criterion.

    ``cf`` is the canonical form of the full design; pass it when evaluating
    many estimators on the same data.  For a matrix response (m > 1) only
    the elliptical invariant-loss estimator is defined; the Gaussian-form
    criteria are reported as ``None``.
    """
    if cf is None:
        cf = factorize(data)
    n, p, m = data.n, data.p, data.m
    res = fit(spec, cf, data)
    resid = data.Y - res.fitted
    rss = float(np.sum(resid * resid))
    if m == 1:
        s2 = variance_estimate(cf, sigma2_divisor)
        d_inv = None
        if n - p - 2 > 0 and n >= 5:
            d_inv = float(delta0_inv(rss, float(cf.S[0, 0]), res.divergence, n, p))
        return CriterionReport(
            label=spec.label,
            df=res.divergence,
            rss=rss,
            sigma2_hat=s2,
            cp=float(mallows_cp(rss, s2, res.divergence, n)),
            aic=float(aic_gaussian(rss, s2, res.divergence)),
            delta0=float(delta0(rss, s2, res.divergence, n)),
            delta0_inv=d_inv,
        )
    d_inv = float(delta0_inv_elliptical(resid, cf.S, res.divergence, n, p, m))
    return CriterionReport(spec.label, res.divergence, rss, None, None, None, None, d_inv)
