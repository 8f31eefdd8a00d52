"""Acceptance criteria, each at its stated tolerance.

Run with pytest (a summary line per criterion is printed at the end of the
session) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from lossest import (
    Gaussian,
    LeastSquaresSubset,
    Ridge,
    ShrinkToZero,
    StudentT,
    VarianceMixture,
    delta0_inv,
    delta0_inv_elliptical,
    factorize,
    finite_difference_divergence,
    report,
)
from lossest import verify as V
from lossest.selection import SubsetEvaluator, best, exhaustive

from conftest import random_data

SEED = 1234
REPS = 100_000
Z = V.Z_THRESHOLD
SIGMA = np.array([[2.0, 0.6], [0.6, 1.0]])
RESULTS: dict[int, tuple[bool, str]] = {}


def vector_cfg(law, tag, reps=REPS):
    X = np.random.default_rng(42).standard_normal((20, 5))
    return V.MCConfig(X, np.array([2.0, -1.0, 1.5, 0.0, 0.0]), law, reps, SEED, tag)


def matrix_cfg(law, tag, reps=REPS):
    X = np.random.default_rng(7).standard_normal((20, 3))
    beta = np.array([[1.0, 0.5], [-1.0, 2.0], [0.0, 0.0]])
    return V.MCConfig(X, beta, law, reps, SEED, tag)


def _zline(reports):
    return ", ".join(f"{r.identity_name} z={r.z_score:+.2f}" for r in reports)


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def criterion_1():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        d = random_data(seed)
        cf = factorize(d)
        for spec in (LeastSquaresSubset(tuple(range(d.p))), LeastSquaresSubset((0, 1)), Ridge(2.0), ShrinkToZero(1.0)):
            r = report(spec, d, cf)
            worst = max(worst, _rel(r.delta0, r.sigma2_hat * r.cp), _rel(r.delta0, r.sigma2_hat * (r.aic - d.n)))
    elapsed = time.perf_counter() - t0
    return worst <= 1e-12 and elapsed < 1.0, f"max rel err {worst:.2e}, {elapsed:.2f}s"


def criterion_2():
    worst = 0.0
    for seed in range(100):
        d = random_data(seed)
        r = report(LeastSquaresSubset(tuple(range(d.p))), d)
        n, p = d.n, d.p
        worst = max(
            worst,
            abs(r.cp - p),
            abs(r.aic - (n + p)),
            abs(r.delta0 - p * r.sigma2_hat) / max(1.0, p * r.sigma2_hat),
            abs(r.delta0_inv - (p - 2)),
        )
    return worst <= 1e-12, f"max err {worst:.2e}"


def criterion_3():
    t0 = time.perf_counter()
    r = V.check_unbiased("delta0", LeastSquaresSubset((0, 1, 2)), vector_cfg(Gaussian(scale=4.0), "acc3"))
    elapsed = time.perf_counter() - t0
    return r.passed(Z) and elapsed < 30, f"{_zline([r])}, {elapsed:.2f}s"


def criterion_4():
    reports = []
    for tag, law in (("t5", StudentT(5, scale=4.0)), ("mix", VarianceMixture((0.5, 0.5), (1, 9), scale=4.0))):
        for est in (Ridge(1.0), ShrinkToZero(1.0)):
            cfg = vector_cfg(law, f"acc4/{tag}/{est.label}")
            reports.append(V.check_unbiased("delta0", est, cfg, f"{tag}:{est.label}"))
    return all(r.passed(Z) for r in reports), _zline(reports)


def criterion_5():
    r = V.check_unbiased("delta0_inv", LeastSquaresSubset((0, 1, 2)), vector_cfg(Gaussian(scale=4.0), "acc5"))
    return r.passed(Z), f"{_zline([r])}, mean diff {r.lhs_mean - r.rhs_mean:+.4f}"


def criterion_6():
    reports = []
    cfg6 = V.MCConfig(np.random.default_rng(1).standard_normal((6, 2)), np.array([1.0, -1.0]),
                      Gaussian(scale=1.0), REPS, SEED, "acc6/stein")
    A = np.random.default_rng(6).standard_normal((6, 6)) / np.sqrt(6)
    for g in (V.IdentityMap(), V.LinearMap(A)):
        reports.append(V.check_stein(g, cfg6))
    # shrinkage is weakly differentiable only for p >= 3
    cfg_shrink = vector_cfg(Gaussian(scale=1.0), "acc6/stein-shrink")
    shrink = ShrinkToZero(1.0).canonical_map(cfg_shrink.canonical())
    reports.append(V.check_stein(V.FittedField(shrink, cfg_shrink.Q1), cfg_shrink))
    haff = vector_cfg(Gaussian(scale=4.0), "acc6/haff")
    for key in ("S", "S2", "const"):
        reports.append(V.check_stein_haff_chi2(V.HAFF_CHI2[key], haff))
    for tag, law in (("gauss", Gaussian(4.0)), ("t5", StudentT(5, 4.0)), ("mix", VarianceMixture((0.5, 0.5), (1, 9), 4.0))):
        cfg = vector_cfg(law, f"acc6/sph/{tag}")
        for g in (V.IdentityMap(), ShrinkToZero(1.0).canonical_map(None)):
            reports.append(V.check_stein_spherical(g, cfg, f"sph[{tag},{g.label}]"))
    ok = all(r.passed(Z) for r in reports)
    analytic = abs(reports[0].rhs_mean - 6.0) <= 1e-10 and abs(reports[3].rhs_mean - 15.0) <= 1e-10
    fails = [r for r in reports if not r.passed(Z)]
    worst = max(reports, key=lambda r: abs(r.z_score))
    detail = f"{len(reports)} checks, max |z| {abs(worst.z_score):.2f} ({worst.identity_name}), analytic rhs {'exact' if analytic else 'MISMATCH'}"
    if fails:
        detail += "; failing: " + _zline(fails)
    return ok and analytic, detail


def criterion_7():
    t6 = StudentT(6, SIGMA)
    reports = [
        V.check_stein_elliptical(V.IdentityMap(), matrix_cfg(t6, "acc7/ell/id"), "ell[identity,t6]"),
        V.check_stein_elliptical(
            LeastSquaresSubset((0, 1)).canonical_map(matrix_cfg(t6, "x").canonical()),
            matrix_cfg(Gaussian(SIGMA), "acc7/ell/ls"), "ell[ls,gauss]"),
    ]
    haff = V.check_stein_haff_elliptical(V.haff_S(), matrix_cfg(t6, "acc7/haffS"), "haff[S,t6]")
    target = t6.tau2() * 2 * (20 - 3)
    symbolic = abs(haff.rhs_mean - target) <= 1e-10 and abs(haff.lhs_mean - target) < 3 * haff.lhs_se
    coin = V.check_star_coincidence(matrix_cfg(Gaussian(SIGMA), "acc7/coin"), "E*=E[gauss]")
    reports += [haff, coin]
    ok = all(r.passed(Z) for r in reports) and symbolic
    return ok, f"{_zline(reports)}; T=S target {target:g}, lhs {haff.lhs_mean:.4f} +- {haff.lhs_se:.4f}"


def criterion_8():
    t0 = time.perf_counter()
    r = V.check_unbiased("delta0_inv_elliptical", LeastSquaresSubset((0, 1)), matrix_cfg(StudentT(6, SIGMA), "acc8"))
    elapsed = time.perf_counter() - t0
    return r.passed(Z) and elapsed < 120, f"{_zline([r])}, mean diff {r.lhs_mean - r.rhs_mean:+.4f}, {elapsed:.2f}s"


def criterion_9():
    mismatches = 0
    for seed in range(100):
        d = random_data(seed)
        cf = factorize(d)
        cmap = LeastSquaresSubset(tuple(range(0, d.p, 2))).canonical_map(cf)
        resid = d.Y - cf.Q1 @ cmap(cf.Z)
        df = float(cmap.divergence(cf.Z))
        a = delta0_inv_elliptical(resid, cf.S, df, d.n, d.p, 1)
        b = delta0_inv(float(np.sum(resid * resid)), cf.S[0, 0], df, d.n, d.p)
        mismatches += a != b
    return mismatches == 0, f"{mismatches} of 100 differ"


def criterion_10():
    worst = 0.0
    for seed in range(20):
        d = random_data(seed)
        cf = factorize(d)
        for spec in (LeastSquaresSubset(tuple(range(d.p // 2 + 1))), Ridge(1.0), ShrinkToZero(1.0)):
            div_y = finite_difference_divergence(spec.fitted_map(cf), d.Y)
            div_z = finite_difference_divergence(spec.canonical_map(cf), cf.Z)
            worst = max(worst, abs(div_y - div_z))
    return worst < 1e-6, f"max |div_Y - div_Z| {worst:.2e}"


def criterion_11():
    differ = 0
    for seed in range(50):
        rows = exhaustive(SubsetEvaluator(random_data(seed)))
        differ += len({best(rows, c).subset for c in ("cp", "aic", "delta0")}) != 1
    return differ == 0, f"{differ} of 50 datasets disagree"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


@pytest.mark.parametrize("number", list(CRITERIA))
def test_acceptance_criterion(number):
    ok, detail = CRITERIA[number]()
    RESULTS[number] = (ok, detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


if __name__ == "__main__":
    import sys

    failed = 0
    for number, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
