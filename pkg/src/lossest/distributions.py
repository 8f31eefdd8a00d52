"""Spherical and elliptical error laws, their star laws, and seeded sampling.

A law here is a distribution for an ``n x m`` error matrix ``eps`` whose
row-vectorization is spherically symmetric after whitening by the scale
matrix ``Sigma``: ``eps = W Sigma^{1/2}`` with ``W`` spherical on ``R^{nm}``.
Gaussian, Student-t and finite variance mixtures are Gaussian scale mixtures
``W = sqrt(V) G``, with one mixing variable ``V`` shared by the whole matrix.

The star law of a density generator ``f`` has generator proportional to the
tail integral ``F(t) = 1/2 int_t^inf f(u) du``.  For a scale mixture with
mixing law ``dG(v)`` this is again a scale mixture, with mixing law
``v dG(v) / E[V]``, and the normalizing constant is ``E[V] = tau2``.

Randomness follows a counter-style contract: every draw is a pure function
of ``(seed, stream, index)`` through :func:`rng_for`.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DimensionError, InvalidParameter, ParseError, UnsupportedStarLaw

NOISE_STREAM = "noise"
STAR_STREAM = "star"


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def rng_for(seed: int, stream: str, index: int) -> np.random.Generator:
    """Independent Philox generator keyed by ``(seed, stream, index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream_id(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def _symmetric_sqrt(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    return (V * np.sqrt(w)) @ V.T


class NoiseLaw:
    """Base class.  ``scale`` is ``None`` (identity), a scalar ``sigma^2``,
    or an ``m x m`` symmetric positive-definite matrix."""

    scale = None
    is_gaussian = False

    def scale_matrix(self, m: int) -> np.ndarray:
        if self.scale is None:
            return np.eye(m)
        S = np.asarray(self.scale, dtype=float)
        if S.ndim == 0:
            return float(S) * np.eye(m)
        if S.shape != (m, m):
            raise DimensionError(f"scale matrix has shape {S.shape}, expected ({m}, {m})")
        return S

    def scale_root(self, m: int) -> np.ndarray:
        return _symmetric_sqrt(self.scale_matrix(m))

    def tau2(self, dim: int | None = None) -> float:
        raise NotImplementedError

    def mixing(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise UnsupportedStarLaw(f"{self!r} is not a Gaussian scale mixture")

    def star_mixing(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise UnsupportedStarLaw(f"{self!r} has no star-law sampler")

    def spherical_block(self, rng: np.random.Generator, size: int, n: int, m: int) -> np.ndarray:
        V = self.mixing(rng, size)
        G = rng.standard_normal((size, n, m))
        return np.sqrt(V)[:, None, None] * G

    def density_generator(self, dim: int) -> Callable[[float], float]:
        """``f`` with density ``f(||x||^2)`` of the whitened law on ``R^dim``."""
        raise NotImplementedError

    def _validate_scale(self):
        if self.scale is None:
            return
        S = np.asarray(self.scale, dtype=float)
        if S.ndim == 0:
            if not S > 0:
                raise InvalidParameter("scalar scale must be positive")
            return
        if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T):
            raise InvalidParameter("scale matrix must be square and symmetric")
        if np.linalg.eigvalsh(S).min() <= 0:
            raise InvalidParameter("scale matrix must be positive definite")


@dataclass(frozen=True)
class Gaussian(NoiseLaw):
    scale: object = None
    is_gaussian = True

    def __post_init__(self):
        self._validate_scale()

    def tau2(self, dim=None):
        return 1.0

    def mixing(self, rng, size):
        return np.ones(size)

    def star_mixing(self, rng, size):
        return np.ones(size)

    def density_generator(self, dim):
        c = -0.5 * dim * math.log(2 * math.pi)
        return lambda t: math.exp(c - 0.5 * t)


@dataclass(frozen=True)
class StudentT(NoiseLaw):
    """Multivariate Student-t: ``V ~ InvGamma(nu/2, nu/2)``."""

    nu: float
    scale: object = None

    def __post_init__(self):
        if not self.nu > 2:
            raise InvalidParameter(f"Student-t needs nu > 2 for a finite variance, got {self.nu}")
        self._validate_scale()

    def tau2(self, dim=None):
        return self.nu / (self.nu - 2)

    def mixing(self, rng, size):
        return (self.nu / 2) / rng.gamma(self.nu / 2, size=size)

    def star_mixing(self, rng, size):
        # v * InvGamma(v; nu/2, nu/2) is proportional to InvGamma(v; nu/2 - 1, nu/2)
        return (self.nu / 2) / rng.gamma(self.nu / 2 - 1, size=size)

    def density_generator(self, dim):
        nu = self.nu
        c = gammaln((nu + dim) / 2) - gammaln(nu / 2) - 0.5 * dim * math.log(nu * math.pi)
        return lambda t: math.exp(c - 0.5 * (nu + dim) * math.log1p(t / nu))


@dataclass(frozen=True)
class VarianceMixture(NoiseLaw):
    """Finite mixture of ``N(0, v_k I)`` with weights ``w_k``."""

    weights: tuple[float, ...]
    variances: tuple[float, ...]
    scale: object = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        v = tuple(float(x) for x in self.variances)
        if len(w) != len(v) or not w:
            raise InvalidParameter("weights and variances must be non-empty and of equal length")
        if min(w) < 0 or abs(sum(w) - 1) > 1e-12:
            raise InvalidParameter(f"weights must be a probability vector, got {w}")
        if min(v) <= 0:
            raise InvalidParameter("variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "variances", v)
        self._validate_scale()

    def tau2(self, dim=None):
        return float(np.dot(self.weights, self.variances))

    @property
    def star_weights(self) -> np.ndarray:
        wv = np.multiply(self.weights, self.variances)
        return wv / wv.sum()

    def mixing(self, rng, size):
        idx = rng.choice(len(self.weights), size=size, p=self.weights)
        return np.asarray(self.variances)[idx]

    def star_mixing(self, rng, size):
        idx = rng.choice(len(self.weights), size=size, p=self.star_weights)
        return np.asarray(self.variances)[idx]

    def density_generator(self, dim):
        w = np.asarray(self.weights)
        v = np.asarray(self.variances)
        logc = np.log(w, where=w > 0, out=np.full_like(w, -np.inf)) - 0.5 * dim * np.log(2 * np.pi * v)
        return lambda t: float(np.sum(np.exp(logc - 0.5 * t / v)))


@dataclass(frozen=True)
class UniformBall(NoiseLaw):
    """Uniform on the ball of the given radius in ``R^{nm}``; no star sampler."""

    radius: float
    scale: object = None

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter("radius must be positive")
        self._validate_scale()

    def tau2(self, dim=None):
        if dim is None:
            raise InvalidParameter("tau2 of a uniform ball depends on the dimension")
        return self.radius**2 / (dim + 2)

    def spherical_block(self, rng, size, n, m):
        d = n * m
        G = rng.standard_normal((size, n, m))
        norms = np.sqrt(np.sum(G * G, axis=(1, 2)))
        radii = self.radius * rng.random(size) ** (1.0 / d)
        return (radii / norms)[:, None, None] * G

    def density_generator(self, dim):
        r2 = self.radius**2
        log_vol = 0.5 * dim * math.log(math.pi) + dim * math.log(self.radius) - gammaln(dim / 2 + 1)
        dens = math.exp(-log_vol)
        return lambda t: dens if t <= r2 else 0.0


@dataclass(frozen=True)
class StarLaw:
    """Law with density generator ``F / C``, ``F(t) = 1/2 int_t^inf f``."""

    base: NoiseLaw
    normalizer: float

    @property
    def scale(self):
        return self.base.scale

    def spherical_block(self, rng, size, n, m):
        V = self.base.star_mixing(rng, size)
        G = rng.standard_normal((size, n, m))
        return np.sqrt(V)[:, None, None] * G


def star(law: NoiseLaw) -> StarLaw:
    if isinstance(law, UniformBall):
        raise UnsupportedStarLaw("uniform-ball law has no scale-mixture representation")
    return StarLaw(law, law.tau2())


def tau2(law: NoiseLaw, dim: int | None = None) -> float:
    """``E[tr(eps Sigma^{-1} eps')] / (n m)``."""
    return law.tau2(dim)


def sample_block(law, n: int, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent ``n x m`` error draws stacked along axis 0.

    ``law`` may be a :class:`NoiseLaw` or a :class:`StarLaw`.
    """
    base = law.base if isinstance(law, StarLaw) else law
    W = law.spherical_block(rng, size, n, m)
    return W @ base.scale_root(m)


def sample(law: NoiseLaw, shape: tuple[int, int], seed: int, index: int = 0) -> np.ndarray:
    """One ``n x m`` draw determined by ``(seed, index)``."""
    n, m = shape
    return sample_block(law, n, m, 1, rng_for(seed, NOISE_STREAM, index))[0]


def sample_star(law, shape: tuple[int, int], seed: int, index: int = 0) -> np.ndarray:
    """One ``n x m`` draw from the star law of ``law`` (a law or a :class:`StarLaw`)."""
    s = law if isinstance(law, StarLaw) else star(law)
    n, m = shape
    return sample_block(s, n, m, 1, rng_for(seed, STAR_STREAM, index))[0]


_LOG_MAX = 700.0


def tail_generator(law: NoiseLaw, dim: int) -> Callable[[float], float]:
    """``F(t) = 1/2 int_t^inf f(u) du`` by adaptive quadrature."""
    f = law.density_generator(dim)
    if isinstance(law, UniformBall):
        r2 = law.radius**2
        return lambda t: 0.5 * integrate.quad(f, t, r2)[0] if t < r2 else 0.0

    def integrand(x):
        return f(math.exp(x)) * math.exp(x) if x < _LOG_MAX else 0.0

    def F(t):
        # u = e^x keeps polynomial tails integrable to full precision
        lo = math.log(t) if t > 0 else -np.inf
        return 0.5 * integrate.quad(integrand, lo, np.inf, epsabs=1e-16, epsrel=1e-10, limit=200)[0]

    return F


def star_normalizer_quadrature(law: NoiseLaw, dim: int) -> float:
    """``C = int_{R^dim} F(||x||^2) dx`` via the radial substitution.

    Independent of the closed-form :func:`tau2`; the two agree when the tail
    convention for ``F`` is used.  Intended for small ``dim``.
    """
    F = tail_generator(law, dim)
    log_surface = 0.5 * dim * math.log(math.pi) - gammaln(dim / 2)
    if isinstance(law, UniformBall):
        integral, _ = integrate.quad(lambda t: F(t) * t ** (dim / 2 - 1), 0, law.radius**2, limit=200)
    else:
        def radial(x):
            return F(math.exp(x)) * math.exp(x * dim / 2) if x * max(1.0, dim / 2) < _LOG_MAX else 0.0

        integral, _ = integrate.quad(radial, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-10, limit=200)
    return math.exp(log_surface) * integral


def parse_law(text: str, scale=None) -> NoiseLaw:
    """Parse ``gaussian``, ``student_t:NU``, ``mixture:W1,W2:V1,V2`` or ``uniform_ball:R``."""
    parts = [s.strip() for s in text.strip().split(":")]
    kind = parts[0].lower()
    try:
        if kind == "gaussian" and len(parts) == 1:
            return Gaussian(scale=scale)
        if kind in ("student_t", "t") and len(parts) == 2:
            return StudentT(float(parts[1]), scale=scale)
        if kind == "mixture" and len(parts) == 3:
            w = [float(x) for x in parts[1].split(",")]
            v = [float(x) for x in parts[2].split(",")]
            return VarianceMixture(tuple(w), tuple(v), scale=scale)
        if kind == "uniform_ball" and len(parts) == 2:
            return UniformBall(float(parts[1]), scale=scale)
    except ValueError as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise ParseError(f"bad number in law {text!r}: {exc}") from None
    raise ParseError(f"unrecognised law {text!r}")
