"""Monte Carlo certification of the Stein-type identities and unbiasedness results.

Each check simulates the regression model ``Y = X beta + eps`` for a fixed
design, evaluates both sides of an identity per replication and reports a
z-score.  When both sides come from the same draws the z-score uses the
paired differences; when one side is an expectation under the star law
(E*) the two sides are independent samples and the standard errors pool.

Replications are simulated in fixed-size blocks.  Block ``b`` draws from
``rng_for(seed, stream, b)``, so results do not depend on ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .canonical import positive_qr
from .criteria import (
    _spd_inverse,
    delta0,
    delta0_inv,
    delta0_inv_corrected,
    delta0_inv_elliptical,
    delta0_inv_elliptical_corrected,
    weighted_frobenius2,
)
from .distributions import NOISE_STREAM, STAR_STREAM, NoiseLaw, rng_for, sample_block, star
from .errors import DimensionError, InvalidParameter
from .estimators import CanonicalMap, EstimatorSpec, LeastSquaresSubset

Z_THRESHOLD = 4.0
DEFAULT_REPLICATIONS = 100_000
MIN_REPLICATIONS = 1000
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class MCConfig:
    """Fixed design, true coefficients and error law for one simulation.

    ``beta`` is p x m (a length-p vector means m = 1).  The error scale
    (``sigma^2`` or ``Sigma``) lives on ``law``.  ``tag`` namespaces the
    random streams so that distinct checks sharing a seed stay independent.
    """

    X: np.ndarray
    beta: np.ndarray
    law: NoiseLaw
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    tag: str = ""
    workers: int = 1

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        beta = np.array(self.beta, dtype=float)
        if beta.ndim == 1:
            beta = beta[:, None]
        if X.ndim != 2 or beta.shape[0] != X.shape[1]:
            raise DimensionError(f"X {X.shape} and beta {beta.shape} do not conform")
        if X.shape[0] <= X.shape[1]:
            raise DimensionError("need n > p")
        if self.replications < 1:
            raise InvalidParameter("replications must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.beta.shape[1]

    @cached_property
    def _qr(self):
        Q, R = positive_qr(self.X)
        return Q[:, : self.p], Q[:, self.p :], R

    @property
    def Q1(self):
        return self._qr[0]

    @property
    def Q2(self):
        return self._qr[1]

    @property
    def R(self):
        return self._qr[2]

    @property
    def mean(self) -> np.ndarray:
        return self.X @ self.beta

    @property
    def theta(self) -> np.ndarray:
        return self.R @ self.beta

    @property
    def Sigma(self) -> np.ndarray:
        return self.law.scale_matrix(self.m)

    @cached_property
    def Sigma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Sigma)

    def canonical(self):
        """Minimal stand-in for a CanonicalForm, enough for ``EstimatorSpec.canonical_map``."""
        return _DesignForm(self.Q1, self.Q2, self.R)


@dataclass(frozen=True)
class _DesignForm:
    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray

    @property
    def p(self):
        return self.R.shape[0]


@dataclass(frozen=True)
class IdentityReport:
    identity_name: str
    lhs_mean: float
    rhs_mean: float
    lhs_se: float
    rhs_se: float
    diff_se: float
    z_score: float
    replications: int
    paired: bool = True

    def passed(self, threshold: float = Z_THRESHOLD) -> bool:
        return bool(abs(self.z_score) < threshold)


def _se(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def _z(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    # both sides identical in every replication
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def paired_report(name: str, lhs: np.ndarray, rhs: np.ndarray) -> IdentityReport:
    d = lhs - rhs
    diff_se = _se(d)
    return IdentityReport(
        name, float(np.mean(lhs)), float(np.mean(rhs)), _se(lhs), _se(rhs),
        diff_se, _z(float(np.mean(d)), diff_se), int(lhs.size), True,
    )


def two_sample_report(name: str, lhs: np.ndarray, rhs: np.ndarray) -> IdentityReport:
    lm, rm = float(np.mean(lhs)), float(np.mean(rhs))
    ls, rs = _se(lhs), _se(rhs)
    diff_se = math.hypot(ls, rs)
    return IdentityReport(name, lm, rm, ls, rs, diff_se, _z(lm - rm, diff_se), int(lhs.size), False)


def simulate(cfg: MCConfig, fn: Callable, stream: str = NOISE_STREAM, law=None) -> tuple[np.ndarray, ...]:
    """Run ``fn(eps)`` on every block of error draws and concatenate its outputs.

    ``eps`` has shape ``(block, n, m)``; ``fn`` returns a tuple of
    per-replication arrays.  ``law`` defaults to ``cfg.law`` and may be a
    star law.
    """
    law = cfg.law if law is None else law
    total = cfg.replications
    nblocks = -(-total // BLOCK_SIZE)
    key = f"{cfg.tag}/{stream}" if cfg.tag else stream

    def block(b):
        size = min(BLOCK_SIZE, total - b * BLOCK_SIZE)
        eps = sample_block(law, cfg.n, cfg.m, size, rng_for(cfg.seed, key, b))
        out = fn(eps)
        return out if isinstance(out, tuple) else (out,)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(block, range(nblocks)))
    else:
        parts = [block(b) for b in range(nblocks)]
    return tuple(np.concatenate([np.broadcast_to(p[k], (p[0].shape[0],)) for p in parts]) for k in range(len(parts[0])))


def _coords(cfg: MCConfig, eps: np.ndarray):
    Y = cfg.mean + eps
    return Y, cfg.Q1.T @ Y, cfg.Q2.T @ Y


def _sigma2(cfg: MCConfig) -> float:
    if cfg.m != 1:
        raise DimensionError("this check is defined for the vector model (m = 1)")
    return float(cfg.Sigma[0, 0])


# -- vector fields g ---------------------------------------------------------


class IdentityMap(CanonicalMap):
    label = "identity"

    def __call__(self, Z):
        return np.asarray(Z, dtype=float)

    def divergence(self, Z):
        Z = np.asarray(Z)
        return np.full(Z.shape[:-2], float(Z.shape[-2] * Z.shape[-1]))


class ConstantMap(CanonicalMap):
    label = "constant"

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def __call__(self, Z):
        return np.full(np.shape(Z), self.value)

    def divergence(self, Z):
        return np.zeros(np.shape(Z)[:-2])


class LinearMap(CanonicalMap):
    """``g(x) = A x`` for a fixed square matrix ``A``."""

    label = "linear"

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)

    def __call__(self, Z):
        return self.A @ Z

    def divergence(self, Z):
        Z = np.asarray(Z)
        return np.full(Z.shape[:-2], float(np.trace(self.A)) * Z.shape[-1])


class FittedField(CanonicalMap):
    """``Y -> Q1 theta_hat(Q1'Y)``: an estimator's fitted values as a field on ``R^n``."""

    def __init__(self, cmap: CanonicalMap, Q1: np.ndarray):
        self.cmap = cmap
        self.Q1 = Q1
        self.label = f"fitted[{cmap.label}]"

    def __call__(self, Y):
        return self.Q1 @ self.cmap(self.Q1.T @ Y)

    def divergence(self, Y):
        return self.cmap.divergence(self.Q1.T @ Y)


# -- Stein-Haff functions ----------------------------------------------------


@dataclass(frozen=True)
class ScalarHaff:
    """``h(Y, S)`` with its derivative in ``S`` for the chi-square Stein-Haff identity."""

    label: str
    value: Callable
    d_dS: Callable


HAFF_CHI2 = {
    "S": ScalarHaff("S", lambda Y, S: S, lambda Y, S: np.ones_like(S)),
    "S2": ScalarHaff("S^2", lambda Y, S: S**2, lambda Y, S: 2 * S),
    "const": ScalarHaff("1", lambda Y, S: np.ones_like(S), lambda Y, S: np.zeros_like(S)),
    "inverse": ScalarHaff("1/S", lambda Y, S: 1 / S, lambda Y, S: -1 / S**2),
}


@dataclass(frozen=True)
class MatrixHaff:
    """``T(Z, S)`` (m x m) with ``D*_{1/2} T``: diagonal partials plus half the off-diagonal ones."""

    label: str
    value: Callable
    dstar: Callable


def haff_S() -> MatrixHaff:
    def dstar(Z, S):
        m = S.shape[-1]
        return np.full(S.shape[:-2], m * (m + 1) / 2)

    return MatrixHaff("S", lambda Z, S: S, dstar)


def haff_trace_identity() -> MatrixHaff:
    def value(Z, S):
        m = S.shape[-1]
        return np.trace(S, axis1=-2, axis2=-1)[..., None, None] * np.eye(m)

    return MatrixHaff("tr(S) I", value, lambda Z, S: np.full(S.shape[:-2], float(S.shape[-1])))


def haff_zero() -> MatrixHaff:
    return MatrixHaff("0", lambda Z, S: np.zeros_like(S), lambda Z, S: np.zeros(S.shape[:-2]))


def haff_residual_gram(cmap: CanonicalMap) -> MatrixHaff:
    """``(Y - X beta_hat)'(Y - X beta_hat) = (Z - theta_hat)'(Z - theta_hat) + S``."""

    def value(Z, S):
        r = Z - cmap(Z)
        return np.swapaxes(r, -2, -1) @ r + S

    def dstar(Z, S):
        m = S.shape[-1]
        return np.full(S.shape[:-2], m * (m + 1) / 2)

    return MatrixHaff(f"residual_gram[{cmap.label}]", value, dstar)


# -- checks ------------------------------------------------------------------


def check_stein(g: CanonicalMap, cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """``E[(Y - mu)' g(Y)] = sigma^2 E[div g(Y)]`` for Gaussian ``Y``."""
    if not cfg.law.is_gaussian:
        raise InvalidParameter("Stein's identity check needs a Gaussian law")
    s2 = _sigma2(cfg)
    mu = cfg.mean

    def fn(eps):
        Y = mu + eps
        lhs = np.sum(eps * g(Y), axis=(1, 2))
        return lhs, s2 * g.divergence(Y)

    lhs, rhs = simulate(cfg, fn)
    return paired_report(name or f"stein[{g.label}]", lhs, rhs)


def check_stein_haff_chi2(h: ScalarHaff, cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """``E[h / sigma^2] = E[(n-p-2) h / S + 2 dh/dS]`` with ``S = ||U||^2``."""
    if not cfg.law.is_gaussian:
        raise InvalidParameter("the chi-square Stein-Haff check needs a Gaussian law")
    s2 = _sigma2(cfg)
    k = cfg.n - cfg.p

    def fn(eps):
        Y, _, U = _coords(cfg, eps)
        S = np.sum(U * U, axis=(1, 2))
        hv = h.value(Y, S)
        return hv / s2, (k - 2) * hv / S + 2 * h.d_dS(Y, S)

    lhs, rhs = simulate(cfg, fn)
    return paired_report(name or f"stein_haff_chi2[{h.label}]", lhs, rhs)


def check_stein_spherical(g: CanonicalMap, cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """``E[(Z - theta)' g(Z)] = E[||U||^2 div g(Z) / (n - p)]``."""
    _sigma2(cfg)
    theta = cfg.theta
    k = cfg.n - cfg.p

    def fn(eps):
        _, Z, U = _coords(cfg, eps)
        lhs = np.sum((Z - theta) * g(Z), axis=(1, 2))
        rhs = np.sum(U * U, axis=(1, 2)) * g.divergence(Z) / k
        return lhs, rhs

    lhs, rhs = simulate(cfg, fn)
    return paired_report(name or f"stein_spherical[{g.label}]", lhs, rhs)


def check_stein_elliptical(g: CanonicalMap, cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """``E[tr((Z - theta) Sigma^-1 g(Z)')] = E[||U||^2_{Sigma^-1} div g(Z) / ((n-p) m)]``."""
    theta = cfg.theta
    W = cfg.Sigma_inv
    k = (cfg.n - cfg.p) * cfg.m

    def fn(eps):
        _, Z, U = _coords(cfg, eps)
        lhs = np.sum(((Z - theta) @ W) * g(Z), axis=(1, 2))
        rhs = weighted_frobenius2(U, W) * g.divergence(Z) / k
        return lhs, rhs

    lhs, rhs = simulate(cfg, fn)
    return paired_report(name or f"stein_elliptical[{g.label}]", lhs, rhs)


def check_stein_haff_elliptical(T: MatrixHaff, cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """``E[tr(T Sigma^-1)] = C E*[2 D*_{1/2} T + (n-p-m-1) tr(S^-1 T)]`` with ``C = tau2``.

    The left side is simulated under the law, the right side under its
    star law; the two samples are independent.
    """
    a = cfg.n - cfg.p - cfg.m - 1
    if a <= 0:
        raise DimensionError("need n > p + m + 1")
    star_law = star(cfg.law)
    C = star_law.normalizer
    W = cfg.Sigma_inv

    def lhs_fn(eps):
        _, Z, U = _coords(cfg, eps)
        S = np.swapaxes(U, 1, 2) @ U
        return np.trace(T.value(Z, S) @ W, axis1=1, axis2=2)

    def rhs_fn(eps):
        _, Z, U = _coords(cfg, eps)
        S = np.swapaxes(U, 1, 2) @ U
        Sinv = _spd_inverse(S)
        Tv = T.value(Z, S)
        return C * (2 * T.dstar(Z, S) + a * np.trace(Sinv @ Tv, axis1=1, axis2=2))

    (lhs,) = simulate(cfg, lhs_fn)
    (rhs,) = simulate(cfg, rhs_fn, stream=STAR_STREAM, law=star_law)
    return two_sample_report(name or f"stein_haff_elliptical[{T.label}]", lhs, rhs)


def check_star_coincidence(cfg: MCConfig, name: str | None = None) -> IdentityReport:
    """Compare ``E[tr(eps Sigma^-1 eps')]/(nm)`` under the law and under its star law.

    The star-law mean is ``E[V^2]/E[V]``, so the two agree only when the
    mixing variable is degenerate, i.e. for the Gaussian law.
    """
    W = cfg.Sigma_inv
    nm = cfg.n * cfg.m

    def fn(eps):
        return weighted_frobenius2(eps, W) / nm

    (lhs,) = simulate(cfg, fn)
    (rhs,) = simulate(cfg, fn, stream=STAR_STREAM, law=star(cfg.law))
    return two_sample_report(name or "star_coincidence", lhs, rhs)


UNBIASED_CRITERIA = (
    "delta0",
    "delta0_inv",
    "delta0_inv_corrected",
    "delta0_inv_elliptical",
    "delta0_inv_elliptical_corrected",
)


def _fitted(cfg: MCConfig, cmap: CanonicalMap, Z: np.ndarray) -> np.ndarray:
    return cfg.Q1 @ cmap(Z)


def _loss_fn(cfg: MCConfig, cmap: CanonicalMap, invariant: bool):
    mu = cfg.mean
    if invariant:
        W = cfg.Sigma_inv / cfg.law.tau2(cfg.n * cfg.m)
    else:
        W = np.eye(cfg.m)

    def fn(eps):
        _, Z, _ = _coords(cfg, eps)
        return weighted_frobenius2(_fitted(cfg, cmap, Z) - mu, W)

    return fn


def _criterion_fn(cfg: MCConfig, cmap: CanonicalMap, criterion: str):
    n, p, m = cfg.n, cfg.p, cfg.m

    def fn(eps):
        Y, Z, U = _coords(cfg, eps)
        resid = Y - _fitted(cfg, cmap, Z)
        df = cmap.divergence(Z)
        if criterion.startswith("delta0_inv_elliptical"):
            S = np.swapaxes(U, 1, 2) @ U
            f = delta0_inv_elliptical_corrected if criterion.endswith("corrected") else delta0_inv_elliptical
            return f(resid, S, df, n, p, m)
        rss = np.sum(resid * resid, axis=(1, 2))
        s_norm = np.sum(U * U, axis=(1, 2))
        if criterion == "delta0":
            return delta0(rss, s_norm / (n - p), df, n)
        f = delta0_inv_corrected if criterion == "delta0_inv_corrected" else delta0_inv
        return f(rss, s_norm, df, n, p)

    return fn


def check_unbiased(
    criterion: str, estimator: EstimatorSpec, cfg: MCConfig, name: str | None = None
) -> IdentityReport:
    """Compare the mean of a loss estimator with the mean true loss.

    ``delta0`` is checked against ``||X beta_hat - X beta||^2`` on common
    draws.  The invariant-loss criteria are checked against
    ``||X beta_hat - X beta||^2_{Sigma^-1} / tau2``; for non-Gaussian laws
    the criterion is averaged under the star law (E*-unbiasedness) and the
    loss under the law itself.
    """
    if criterion not in UNBIASED_CRITERIA:
        raise InvalidParameter(f"unknown criterion {criterion!r}")
    if not criterion.startswith("delta0_inv_elliptical") and cfg.m != 1:
        raise DimensionError(f"{criterion} is defined for the vector model (m = 1)")
    cmap = estimator.canonical_map(cfg.canonical())
    label = name or f"unbiased[{criterion},{estimator.label}]"
    crit_fn = _criterion_fn(cfg, cmap, criterion)
    if criterion == "delta0":
        loss_fn = _loss_fn(cfg, cmap, invariant=False)
        lhs, rhs = simulate(cfg, lambda eps: (crit_fn(eps), loss_fn(eps)))
        return paired_report(label, lhs, rhs)
    loss_fn = _loss_fn(cfg, cmap, invariant=True)
    if cfg.law.is_gaussian:
        lhs, rhs = simulate(cfg, lambda eps: (crit_fn(eps), loss_fn(eps)))
        return paired_report(label, lhs, rhs)
    (lhs,) = simulate(cfg, crit_fn, stream=STAR_STREAM, law=star(cfg.law))
    (rhs,) = simulate(cfg, loss_fn)
    return two_sample_report(label, lhs, rhs)


def monte_carlo_risk(estimator: EstimatorSpec, cfg: MCConfig, invariant: bool = False) -> float:
    """Mean loss over the replications of ``cfg``: the empirical risk."""
    cmap = estimator.canonical_map(cfg.canonical())
    (loss,) = simulate(cfg, _loss_fn(cfg, cmap, invariant))
    return float(np.mean(loss))


def ls_risk(subset, cfg: MCConfig) -> float:
    """Exact quadratic risk of least squares on ``subset``.

    ``tr(H) tau2 tr(Sigma) + ||(I - H) theta||^2`` with ``H`` the canonical
    projection onto the subset's columns.
    """
    H = LeastSquaresSubset(tuple(subset)).canonical_map(cfg.canonical()).H
    bias = (np.eye(cfg.p) - H) @ cfg.theta
    return float(np.trace(H) * cfg.law.tau2(cfg.n * cfg.m) * np.trace(cfg.Sigma) + np.sum(bias**2))


@dataclass
class SuiteResult:
    reports: list[IdentityReport] = field(default_factory=list)
    threshold: float = Z_THRESHOLD

    @property
    def all_passed(self) -> bool:
        return all(r.passed(self.threshold) for r in self.reports)
