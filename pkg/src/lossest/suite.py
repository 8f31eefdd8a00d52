"""Verification suites described in INI files.

Grammar (``configparser`` syntax)::

    [suite]                 ; optional global settings
    seed = 1234
    replications = 100000
    z_threshold = 4

    [<check name>]          ; one section per check, run in file order
    check = stein | stein_haff_chi2 | stein_spherical | stein_elliptical
          | stein_haff_elliptical | star_coincidence | unbiased
    law = gaussian | student_t:NU | mixture:W1,W2:V1,V2 | uniform_ball:R
    sigma = 2               ; scalar noise level (vector model), or
    scale = 2,0.6;0.6,1     ; m x m scale matrix, rows separated by ';'
    n = 20
    p = 5
    design_seed = 42        ; X is standard normal from this seed
    beta = 2,-1,1.5,0,0     ; p rows separated by ';', m entries per row
    g = identity | constant | linear | ls:0,1 | ridge:1 | shrink:1
    h = S | S2 | const | inverse
    T = S | trace | zero | residual_gram:ls:0,1
    criterion = delta0 | delta0_inv | delta0_inv_corrected
              | delta0_inv_elliptical | delta0_inv_elliptical_corrected
    estimator = ls:0,1,2 | ridge:1 | shrink:1
    replications = 100000   ; per-check override

Which of ``g``/``h``/``T``/``criterion`` is required depends on ``check``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import verify as V
from .distributions import parse_law
from .errors import ConfigError, LossEstError, ParseError
from .estimators import EstimatorSpec, LeastSquaresSubset, Ridge, ShrinkToZero

CHECK_KINDS = (
    "stein",
    "stein_haff_chi2",
    "stein_spherical",
    "stein_elliptical",
    "stein_haff_elliptical",
    "star_coincidence",
    "unbiased",
)


@dataclass(frozen=True)
class CheckSpec:
    name: str
    kind: str
    params: dict

    @property
    def replications(self) -> int:
        return int(self.params["replications"])


@dataclass(frozen=True)
class Suite:
    checks: list[CheckSpec]
    seed: int
    z_threshold: float


def parse_estimator(text: str) -> EstimatorSpec:
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "ls":
            return LeastSquaresSubset(tuple(int(j) for j in arg.split(",") if j.strip()))
        if kind == "ridge":
            return Ridge(float(arg))
        if kind == "shrink":
            return ShrinkToZero(float(arg))
    except ValueError as exc:
        raise ConfigError(f"bad estimator {text!r}: {exc}") from None
    raise ConfigError(f"unknown estimator {text!r}")


def _matrix(text: str) -> np.ndarray:
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad matrix {text!r}: {exc}") from None


def load_suite(text: str) -> Suite:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(f"config syntax error: {exc.message if hasattr(exc, 'message') else exc}", line) from None
    settings = cp["suite"] if cp.has_section("suite") else {}
    try:
        seed = int(settings.get("seed", 0))
        default_reps = int(settings.get("replications", V.DEFAULT_REPLICATIONS))
        z = float(settings.get("z_threshold", V.Z_THRESHOLD))
    except ValueError as exc:
        raise ConfigError(f"bad [suite] value: {exc}") from None
    checks = []
    for name in cp.sections():
        if name == "suite":
            continue
        params = dict(cp[name])
        kind = params.get("check")
        if kind not in CHECK_KINDS:
            raise ConfigError(f"[{name}] has unknown check {kind!r}")
        params.setdefault("replications", str(default_reps))
        checks.append(CheckSpec(name, kind, params))
    if not checks:
        raise ConfigError("suite defines no checks")
    return Suite(checks, seed, z)


def default_suite() -> Suite:
    return load_suite(resources.files("lossest").joinpath("default_suite.cfg").read_text())


def build_config(spec: CheckSpec, seed: int, workers: int = 1) -> V.MCConfig:
    P = spec.params
    try:
        n, p = int(P["n"]), int(P["p"])
        if "scale" in P:
            scale = _matrix(P["scale"])
        elif "sigma" in P:
            scale = float(P["sigma"]) ** 2
        else:
            scale = None
        law = parse_law(P.get("law", "gaussian"), scale=scale)
        X = np.random.default_rng(int(P.get("design_seed", 0))).standard_normal((n, p))
        beta = _matrix(P["beta"]) if "beta" in P else np.ones((p, 1))
        if beta.shape[0] == 1 and p > 1:
            beta = beta.T
        return V.MCConfig(X, beta, law, spec.replications, seed, tag=spec.name, workers=workers)
    except KeyError as exc:
        raise ConfigError(f"[{spec.name}] missing key {exc}") from None
    except ValueError as exc:
        if isinstance(exc, LossEstError):
            raise
        raise ConfigError(f"[{spec.name}] {exc}") from None


def _g(text: str, cfg: V.MCConfig, on_y: bool):
    text = text.strip()
    if text == "identity":
        return V.IdentityMap()
    if text == "constant":
        return V.ConstantMap(1.0)
    if text == "linear":
        dim = cfg.n if on_y else cfg.p
        A = np.random.default_rng(dim).standard_normal((dim, dim)) / np.sqrt(dim)
        return V.LinearMap(A)
    cmap = parse_estimator(text).canonical_map(cfg.canonical())
    return V.FittedField(cmap, cfg.Q1) if on_y else cmap


def _T(text: str, cfg: V.MCConfig) -> V.MatrixHaff:
    text = text.strip()
    if text == "S":
        return V.haff_S()
    if text == "trace":
        return V.haff_trace_identity()
    if text == "zero":
        return V.haff_zero()
    if text.startswith("residual_gram:"):
        est = parse_estimator(text.split(":", 1)[1])
        return V.haff_residual_gram(est.canonical_map(cfg.canonical()))
    raise ConfigError(f"unknown T {text!r}")


def run_check(spec: CheckSpec, seed: int, workers: int = 1) -> V.IdentityReport:
    cfg = build_config(spec, seed, workers)
    P = spec.params
    name = spec.name
    try:
        if spec.kind == "stein":
            return V.check_stein(_g(P["g"], cfg, on_y=True), cfg, name)
        if spec.kind == "stein_haff_chi2":
            if P["h"] not in V.HAFF_CHI2:
                raise ConfigError(f"[{name}] unknown h {P['h']!r}")
            return V.check_stein_haff_chi2(V.HAFF_CHI2[P["h"]], cfg, name)
        if spec.kind == "stein_spherical":
            return V.check_stein_spherical(_g(P["g"], cfg, on_y=False), cfg, name)
        if spec.kind == "stein_elliptical":
            return V.check_stein_elliptical(_g(P["g"], cfg, on_y=False), cfg, name)
        if spec.kind == "stein_haff_elliptical":
            return V.check_stein_haff_elliptical(_T(P["T"], cfg), cfg, name)
        if spec.kind == "star_coincidence":
            return V.check_star_coincidence(cfg, name)
        return V.check_unbiased(P["criterion"], parse_estimator(P["estimator"]), cfg, name)
    except KeyError as exc:
        raise ConfigError(f"[{name}] missing key {exc}") from None
