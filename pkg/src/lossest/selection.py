"""Subset search over least-squares submodels.

All subsets share the full-model variance estimate, so Cp, AIC and delta0
order them identically.  Ties are broken by subset size, then by the
lexicographic order of the sorted column indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .canonical import CanonicalForm, RegressionData, factorize
from .criteria import CRITERIA, CriterionReport, report
from .errors import DimensionError
from .estimators import LeastSquaresSubset

MAX_EXHAUSTIVE_P = 20


@dataclass(frozen=True)
class SubsetReport:
    subset: tuple[int, ...]
    report: CriterionReport

    @property
    def size(self) -> int:
        return len(self.subset)


def _key(row: SubsetReport, criterion: str):
    return (row.report.value(criterion), row.size, row.subset)


def best(rows: list[SubsetReport], criterion: str) -> SubsetReport:
    """Row minimizing ``criterion`` with the deterministic tie-break."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    return min(rows, key=lambda r: _key(r, criterion))


class SubsetEvaluator:
    """Evaluates (and memoizes) LS submodels of one dataset."""

    def __init__(self, data: RegressionData, sigma2_divisor: str = "n-p", cf: CanonicalForm | None = None):
        if data.m != 1:
            raise DimensionError("subset selection supports a single response")
        self.data = data
        self.cf = factorize(data) if cf is None else cf
        self.sigma2_divisor = sigma2_divisor
        self._cache: dict[tuple[int, ...], SubsetReport] = {}

    def __call__(self, subset) -> SubsetReport:
        key = tuple(sorted(subset))
        if key not in self._cache:
            spec = LeastSquaresSubset(key, label=",".join(self.data.names[j] for j in key) or "-")
            self._cache[key] = SubsetReport(key, report(spec, self.data, self.cf, self.sigma2_divisor))
        return self._cache[key]

    @property
    def visited(self) -> list[SubsetReport]:
        return sorted(self._cache.values(), key=lambda r: (r.size, r.subset))


def exhaustive(ev: SubsetEvaluator) -> list[SubsetReport]:
    p = ev.data.p
    if p > MAX_EXHAUSTIVE_P:
        raise DimensionError(f"exhaustive search refused for p={p} > {MAX_EXHAUSTIVE_P}")
    for k in range(p + 1):
        for s in combinations(range(p), k):
            ev(s)
    return ev.visited


def forward(ev: SubsetEvaluator, criterion: str) -> list[SubsetReport]:
    """Greedy additions from the empty model up to the full model."""
    p = ev.data.p
    current: tuple[int, ...] = ()
    ev(current)
    while len(current) < p:
        candidates = [ev(current + (j,)) for j in range(p) if j not in current]
        current = best(candidates, criterion).subset
    return ev.visited


def backward(ev: SubsetEvaluator, criterion: str) -> list[SubsetReport]:
    """Greedy deletions from the full model down to the empty model."""
    current = tuple(range(ev.data.p))
    ev(current)
    while current:
        candidates = [ev(tuple(j for j in current if j != drop)) for drop in current]
        current = best(candidates, criterion).subset
    return ev.visited


def search(ev: SubsetEvaluator, strategy: str, criterion: str) -> list[SubsetReport]:
    if strategy == "exhaustive":
        return exhaustive(ev)
    if strategy == "forward":
        return forward(ev, criterion)
    if strategy == "backward":
        return backward(ev, criterion)
    raise ValueError(f"unknown strategy {strategy!r}")


def cp_plot(rows: list[SubsetReport]) -> list[SubsetReport]:
    """Best row by Cp at each subset size, sorted by size."""
    by_size: dict[int, list[SubsetReport]] = {}
    for r in rows:
        by_size.setdefault(r.size, []).append(r)
    return [best(by_size[k], "cp") for k in sorted(by_size)]
