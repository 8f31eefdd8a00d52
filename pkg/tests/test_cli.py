import subprocess
import sys

import numpy as np
import pytest

from lossest import UnderpoweredRun
from lossest.cli import EXIT_DIMENSION, EXIT_OK, EXIT_PARSE, EXIT_RANK, EXIT_VERIFY, main, read_csv, read_tsv
from lossest.selection import SubsetEvaluator, best, exhaustive

SMALL_SUITE = """
[suite]
seed = 5
replications = 4000

[stein.identity]
check = stein
g = identity
n = 6
p = 2
design_seed = 1
beta = 1,-1
sigma = 1

[unbiased.delta0.t5]
check = unbiased
criterion = delta0
estimator = ridge:1
law = student_t:5
n = 20
p = 5
design_seed = 42
beta = 2,-1,1.5,0,0
sigma = 2
"""


def write_csv(path, X, y, names=None):
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    lines = [",".join(names + ["y"])]
    for row, v in zip(X, y):
        lines.append(",".join(format(float(x), ".17g") for x in list(row) + [v]))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def sparse_csv(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 5))
    y = 3.0 * X[:, 0] + 3.0 * X[:, 2] + rng.standard_normal(50)
    path = tmp_path / "data.csv"
    write_csv(path, X, y)
    return path


def run(*args):
    return main([str(a) for a in args])


def test_select_exhaustive_table(sparse_csv, tmp_path):
    out = tmp_path / "report.tsv"
    assert run("select", "--input", sparse_csv, "--response", "y", "--no-intercept", "--out", out) == EXIT_OK
    rows = read_tsv(out)
    assert len(rows) == 32
    assert list(rows[0]) == ["subset", "k", "df", "rss", "sigma2_hat", "cp", "aic", "delta0", "delta0_inv", "selected"]
    chosen = [r for r in rows if r["selected"] == "1"]
    assert len(chosen) == 1 and chosen[0]["subset"] == "x1,x3"
    assert rows[0]["subset"] == "-"


def test_criteria_select_same_subset(sparse_csv, tmp_path):
    picks = set()
    for crit in ("cp", "aic", "delta0"):
        out = tmp_path / f"{crit}.tsv"
        assert run("select", "--input", sparse_csv, "--response", "y", "--criterion", crit, "--out", out) == 0
        picks.add(next(r["subset"] for r in read_tsv(out) if r["selected"] == "1"))
    assert len(picks) == 1


def test_intercept_counted_in_p(sparse_csv, tmp_path):
    out = tmp_path / "r.tsv"
    assert run("select", "--input", sparse_csv, "--response", "y", "--out", out) == 0
    rows = read_tsv(out)
    assert len(rows) == 64
    full = rows[-1]
    assert full["subset"].startswith("(intercept)")
    assert float(full["cp"]) == pytest.approx(6, abs=1e-10)


def test_golden_against_library(sparse_csv, tmp_path):
    out = tmp_path / "r.tsv"
    run("select", "--input", sparse_csv, "--response", "y", "--no-intercept", "--out", out)
    data = read_csv(sparse_csv, "y", intercept=False)
    lib = exhaustive(SubsetEvaluator(data))
    rows = read_tsv(out)
    for row, ref in zip(rows, lib):
        for col in ("df", "rss", "sigma2_hat", "cp", "aic", "delta0", "delta0_inv"):
            assert float(row[col]) == getattr(ref.report, col)  # exact round trip
    assert best(lib, "cp").subset == (0, 2)


def test_strategies(sparse_csv, tmp_path):
    for strategy in ("forward", "backward"):
        out = tmp_path / f"{strategy}.tsv"
        code = run("select", "--input", sparse_csv, "--response", "y", "--no-intercept",
                   "--strategy", strategy, "--out", out)
        assert code == 0
        rows = read_tsv(out)
        assert len(rows) == 16
        assert next(r["subset"] for r in rows if r["selected"] == "1") == "x1,x3"


def test_cp_plot(sparse_csv, tmp_path):
    out = tmp_path / "cp.tsv"
    assert run("cp-plot", "--input", sparse_csv, "--response", "y", "--no-intercept", "--out", out) == 0
    rows = read_tsv(out)
    assert [int(r["k"]) for r in rows] == list(range(6))
    assert rows[2]["subset"] == "x1,x3"


def test_columns_option(sparse_csv, tmp_path):
    out = tmp_path / "r.tsv"
    assert run("select", "--input", sparse_csv, "--response", "y", "--columns", "x1,x2", "--out", out) == 0
    assert len(read_tsv(out)) == 8


def test_rank_deficient_exit(tmp_path):
    rng = np.random.default_rng(0)
    x = np.sort(rng.standard_normal(20))
    X = np.column_stack([x, rng.standard_normal(20), x])
    path = tmp_path / "dup.csv"
    write_csv(path, X, rng.standard_normal(20))
    assert run("select", "--input", path, "--response", "y", "--out", tmp_path / "o.tsv") == EXIT_RANK
    assert run("cp-plot", "--input", path, "--response", "y", "--out", tmp_path / "o.tsv") == EXIT_RANK


def test_parse_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\n1,2\n3,abc\n")
    assert run("select", "--input", bad, "--response", "y", "--out", tmp_path / "o.tsv") == EXIT_PARSE
    assert "line 3, column 2" in capsys.readouterr().err
    assert run("select", "--input", bad, "--response", "z", "--out", tmp_path / "o.tsv") == EXIT_PARSE
    assert run("select", "--input", tmp_path / "missing.csv", "--response", "y", "--out", tmp_path / "o") == EXIT_PARSE
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("x1,y\n1,2,3\n")
    assert run("select", "--input", ragged, "--response", "y", "--out", tmp_path / "o.tsv") == EXIT_PARSE


def test_dimension_error_exit(tmp_path):
    path = tmp_path / "short.csv"
    write_csv(path, np.random.default_rng(0).standard_normal((3, 3)), np.ones(3))
    assert run("select", "--input", path, "--response", "y", "--out", tmp_path / "o.tsv") == EXIT_DIMENSION




def test_verify_small_suite_deterministic(tmp_path):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text(SMALL_SUITE)
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    assert run("verify", "--config", cfg, "--out", a) == EXIT_OK
    assert run("verify", "--config", cfg, "--out", b, "--workers", "3") == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = read_tsv(a)
    assert [r["check"] for r in rows] == ["stein.identity", "unbiased.delta0.t5"]
    assert all(r["status"] == "pass" for r in rows)
    c = tmp_path / "c.tsv"
    run("verify", "--config", cfg, "--out", c, "--seed", "6")
    assert c.read_bytes() != a.read_bytes()


def test_verify_underpowered(tmp_path):
    out = tmp_path / "v.tsv"
    with pytest.warns(UnderpoweredRun):
        code = run("verify", "--out", out, "--replications", "10", "--only", "stein.identity")
    assert code == EXIT_VERIFY
    assert read_tsv(out)[0]["status"] == "underpowered"


def test_verify_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[x]\ncheck = wat\n")
    assert run("verify", "--config", cfg, "--out", tmp_path / "o.tsv") == EXIT_PARSE
    assert run("verify", "--config", tmp_path / "none.cfg", "--out", tmp_path / "o.tsv") == EXIT_PARSE
    assert run("verify", "--out", tmp_path / "o.tsv", "--only", "no.such.check") == EXIT_PARSE


def test_verify_failure_exit(tmp_path):
    out = tmp_path / "v.tsv"
    code = run("verify", "--out", out, "--only", "unbiased.delta0_inv.gaussian.ls", "--replications", "20000")
    assert code == EXIT_VERIFY
    assert read_tsv(out)[0]["status"] == "fail"


def test_module_entry_point(sparse_csv, tmp_path):
    out = tmp_path / "r.tsv"
    proc = subprocess.run(
        [sys.executable, "-m", "lossest", "cp-plot", "--input", str(sparse_csv), "--response", "y", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
