"""Estimators of the regression mean and their divergences.

Every built-in estimator is a function of ``Z = Q1'Y`` alone, which is the
hypothesis under which the spherical and elliptical unbiasedness results
hold.  Each one is therefore expressed as a :class:`CanonicalMap`
``Z -> theta_hat`` with fitted values ``X beta_hat = Q1 theta_hat``; the
divergence of the fitted-value map with respect to ``Y`` equals the
divergence of ``theta_hat`` with respect to ``Z``.

Canonical maps accept stacked inputs of shape ``(..., p, m)`` so the Monte
Carlo harness can evaluate a whole block of replications at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .canonical import CanonicalForm, RegressionData, positive_qr
from .errors import DegenerateInput, DivergenceUnavailable, InvalidParameter, NonFiniteOutput


class CanonicalMap:
    """An estimator of ``theta`` written on canonical coordinates."""

    label = "map"

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LinearCanonicalMap(CanonicalMap):
    """``theta_hat = H Z`` for a fixed p x p smoother ``H``."""

    def __init__(self, H: np.ndarray, label: str = "linear"):
        self.H = np.asarray(H, dtype=float)
        self.label = label
        self._trace = float(np.trace(self.H))

    def __call__(self, Z):
        return self.H @ Z

    def divergence(self, Z):
        Z = np.asarray(Z)
        return np.full(Z.shape[:-2], self._trace * Z.shape[-1])


class ShrinkageMap(CanonicalMap):
    """James-Stein type ``theta_hat = (1 - a / ||Z||^2) Z`` on the whole p x m block.

    The map is weakly differentiable only when ``p m >= 3``; below that the
    divergence formula holds off the origin but Stein's identity does not.
    """

    def __init__(self, a: float, label: str = "shrink"):
        self.a = float(a)
        self.label = label

    def _norm2(self, Z):
        norm2 = np.sum(Z * Z, axis=(-2, -1))
        if np.any(norm2 == 0):
            raise DegenerateInput("shrinkage is undefined at Z = 0")
        return norm2

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=float)
        factor = 1.0 - self.a / self._norm2(Z)
        return factor[..., None, None] * Z

    def divergence(self, Z):
        Z = np.asarray(Z, dtype=float)
        d = Z.shape[-2] * Z.shape[-1]
        return d - self.a * (d - 2) / self._norm2(Z)


@dataclass(frozen=True)
class FitResult:
    fitted: np.ndarray
    divergence: float
    df_method: str  # "analytic" or "finite_difference"


class EstimatorSpec:
    """Base for estimator recipes; see the concrete kinds below."""

    label: str

    def canonical_map(self, cf: CanonicalForm) -> CanonicalMap:
        raise NotImplementedError

    def fitted_map(self, cf: CanonicalForm) -> Callable[[np.ndarray], np.ndarray]:
        """``Y -> X beta_hat(Y)`` for the design factorized in ``cf``."""
        cmap = self.canonical_map(cf)
        Q1 = cf.Q1
        return lambda Y: Q1 @ cmap(Q1.T @ np.asarray(Y, dtype=float))


@dataclass(frozen=True)
class LeastSquaresSubset(EstimatorSpec):
    """Least squares on the columns ``subset`` (0-based) of ``X``."""

    subset: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        subset = tuple(int(j) for j in self.subset)
        if len(set(subset)) != len(subset):
            raise InvalidParameter(f"subset has repeated indices: {subset}")
        object.__setattr__(self, "subset", subset)
        if not self.label:
            object.__setattr__(self, "label", "ls{" + ",".join(map(str, subset)) + "}")

    def canonical_map(self, cf: CanonicalForm) -> LinearCanonicalMap:
        p = cf.p
        if any(j < 0 or j >= p for j in self.subset):
            raise InvalidParameter(f"subset {self.subset} out of range for p={p}")
        if not self.subset:
            return LinearCanonicalMap(np.zeros((p, p)), self.label)
        idx = list(self.subset)
        # col(X_I) = Q1 col(R_I); project within the p-dimensional coordinates
        q, _ = positive_qr(cf.R[:, idx], columns=idx)
        q = q[:, : len(idx)]
        return LinearCanonicalMap(q @ q.T, self.label)


@dataclass(frozen=True)
class Ridge(EstimatorSpec):
    lam: float
    label: str = ""

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidParameter(f"ridge penalty must be >= 0, got {self.lam}")
        if not self.label:
            object.__setattr__(self, "label", f"ridge({self.lam:g})")

    def canonical_map(self, cf: CanonicalForm) -> LinearCanonicalMap:
        W, d, _ = np.linalg.svd(cf.R)
        shrink = d**2 / (d**2 + self.lam)
        return LinearCanonicalMap((W * shrink) @ W.T, self.label)


@dataclass(frozen=True)
class ShrinkToZero(EstimatorSpec):
    """Shrink the canonical coordinates towards the origin by a fixed constant ``a``."""

    a: float
    label: str = ""

    def __post_init__(self):
        if not self.a >= 0:
            raise InvalidParameter(f"shrinkage constant must be >= 0, got {self.a}")
        if not self.label:
            object.__setattr__(self, "label", f"shrink({self.a:g})")

    def canonical_map(self, cf: CanonicalForm) -> ShrinkageMap:
        return ShrinkageMap(self.a, self.label)


@dataclass(frozen=True)
class Custom(EstimatorSpec):
    """User-supplied fitted-value map ``Y -> X beta_hat`` with optional divergence.

    The map must depend on ``Y`` only through ``Q1'Y`` for the unbiasedness
    results to apply; this is the caller's responsibility.
    """

    fitted: Callable[[np.ndarray], np.ndarray]
    divergence: Optional[Callable[[np.ndarray], float]] = None
    label: str = "custom"

    def fitted_map(self, cf: CanonicalForm):
        return self.fitted

    def canonical_map(self, cf: CanonicalForm):
        raise NotImplementedError("custom estimators are defined on Y, not on canonical coordinates")


def default_step(Y: np.ndarray) -> float:
    return float(np.finfo(float).eps ** (1 / 3) * (1.0 + np.max(np.abs(Y), initial=0.0)))


def finite_difference_divergence(
    fitted_map: Callable[[np.ndarray], np.ndarray], Y, h: float | None = None
) -> float:
    """Central-difference estimate of ``sum_ij d fitted_ij / d Y_ij``.

    The default step is ``eps**(1/3) * (1 + max|Y|)``.  Partial derivatives
    are accumulated in index order so the result does not depend on how the
    probes are scheduled.
    """
    Y = np.array(Y, dtype=float)
    if h is None:
        h = default_step(Y)
    if h <= 0:
        raise ValueError("step must be positive")
    flat = Y.reshape(-1)
    partials = np.empty(flat.size)
    for i in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[i] += h
        dn[i] -= h
        f_up = np.asarray(fitted_map(up.reshape(Y.shape)), dtype=float).reshape(-1)
        f_dn = np.asarray(fitted_map(dn.reshape(Y.shape)), dtype=float).reshape(-1)
        if not (np.isfinite(f_up[i]) and np.isfinite(f_dn[i])):
            raise NonFiniteOutput(f"fitted map returned a non-finite value at probe {i}")
        partials[i] = (f_up[i] - f_dn[i]) / (2 * h)
    return float(np.sum(partials))


def fit(
    spec: EstimatorSpec,
    cf: CanonicalForm,
    data: RegressionData,
    finite_difference: bool = True,
) -> FitResult:
    """Fitted values and divergence of ``spec`` on ``data``.

    Built-in kinds get an analytic divergence.  A :class:`Custom` spec without
    a divergence map falls back to central differences unless
    ``finite_difference`` is False, in which case
    :class:`DivergenceUnavailable` is raised.
    """
    if isinstance(spec, Custom):
        fitted = np.asarray(spec.fitted(data.Y), dtype=float).reshape(data.Y.shape)
        if spec.divergence is not None:
            return FitResult(fitted, float(spec.divergence(data.Y)), "analytic")
        if not finite_difference:
            raise DivergenceUnavailable(f"{spec.label} has no divergence map")
        return FitResult(fitted, finite_difference_divergence(spec.fitted, data.Y), "finite_difference")
    cmap = spec.canonical_map(cf)
    theta = cmap(cf.Z)
    return FitResult(cf.Q1 @ theta, float(cmap.divergence(cf.Z)), "analytic")

