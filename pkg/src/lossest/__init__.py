"""Unbiased loss estimators for linear regression and a Monte Carlo harness for their identities."""

from .canonical import CanonicalForm, RegressionData, factorize, ls_fit, positive_qr, variance_estimate
from .criteria import (
    CRITERIA,
    CriterionReport,
    aic_gaussian,
    delta0,
    delta0_inv,
    delta0_inv_corrected,
    delta0_inv_elliptical,
    delta0_inv_elliptical_corrected,
    mallows_cp,
    report,
)
from .distributions import Gaussian, StudentT, UniformBall, VarianceMixture, parse_law, sample, sample_star, star, tau2
from .errors import (
    ConfigError,
    DegenerateInput,
    DimensionError,
    DivergenceUnavailable,
    InvalidParameter,
    LossEstError,
    NonFiniteOutput,
    ParseError,
    RankDeficient,
    SingularS,
    UnderpoweredRun,
    UnsupportedStarLaw,
    ZeroResidual,
    ZeroVariance,
)
from .estimators import Custom, FitResult, LeastSquaresSubset, Ridge, ShrinkToZero, finite_difference_divergence, fit

__version__ = "0.1.0"
