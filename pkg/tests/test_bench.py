import csv

import numpy as np
import pytest

from lrm.bench import (
    CSV_HEADER,
    ExperimentPlan,
    PlanError,
    ResultRow,
    _mean_sq,
    _trial_noise,
    emit_csv,
    parse_plan,
    run_plan,
)
from lrm.mechanisms import derive_seed, noise_nor
from lrm.workload import WorkloadSpec, generate

SMALL = """
family = wrelated
m = 12
n = 16
s = 3
mechanisms = NOD, NOR, LRM
repetitions = 20
sweep = epsilon
values = 1, 0.1, 0.01
gamma = 1e-6
"""


def test_parse_plan_defaults():
    plan = parse_plan("family = wrange\nm = 8\nn = 16\n")
    assert plan.repetitions == 20 and plan.sweep == "epsilon" and plan.values == (1.0,)
    assert plan.mechanisms == ("NOD", "NOR", "LRM")


def test_parse_plan_desk_grid():
    plan = parse_plan("family = wrange\nm = 8\nsweep = n\n")
    assert plan.values == (128.0, 256.0, 512.0, 1024.0) and plan.n == 128
    full = parse_plan("family = wrange\nm = 8\nsweep = n\n", full=True)
    assert max(full.values) == 8192


@pytest.mark.parametrize(
    "text,match",
    [
        ("family = wrange\nm = 8\n", "missing required key 'n'"),
        ("family = wrange\nm = 8\nn = 8\nbogus = 1\n", "line 4: unknown key"),
        ("family = wrange\nm = x\nn = 8\n", "line 2: bad value"),
        ("family = wrange\nm = 8\nn = 8\nm = 9\n", "duplicate key"),
        ("family = wrange\nm = 8\nn = 8\nmechanisms = NOD, XYZ\n", "unknown mechanisms"),
        ("family = wrange\nm = 8\nn = 8\nrepetitions = 0\n", "repetitions"),
        ("family = wrange\nm = 8\nn = 8\nsweep = s\nvalues = 2\n", "fractions"),
        ("family = wrange\nm = 8\nn = 2048\n", "--full"),
        ("family = wrelated\nm = 8\nn = 8\n", "needs s"),
        ("family = wrange\nm = 8\nn = 8\nsweep = gamma\n", "needs 'values'"),
        ("just text\n", "expected 'key = value'"),
    ],
)
def test_parse_plan_errors(text, match):
    with pytest.raises(PlanError, match=match):
        parse_plan(text)


def test_plan_points():
    plan = parse_plan("family = wrelated\nm = 20\nn = 40\nsweep = s\nvalues = 0.1, 0.5\n")
    assert [plan.point(v).s for v in plan.values] == [2, 10]
    plan = parse_plan("family = wrange\nm = 8\nn = 8\nsweep = r\nvalues = 0.8, 1.2\n")
    assert plan.point(1.2).r_multiplier == 1.2


def test_epsilon_scaling():
    rows = run_plan(parse_plan(SMALL.replace("repetitions = 20", "repetitions = 20000")))
    lrm = {row.sweep: row.mse for row in rows if row.mechanism == "LRM"}
    assert lrm[0.1] / lrm[1.0] == pytest.approx(100, rel=0.10)
    assert lrm[0.01] / lrm[0.1] == pytest.approx(100, rel=0.10)


def test_nod_matches_analytic_at_20_reps():
    # full-rank Gaussian workload: about 30 effective noise dimensions per trial,
    # so the 20-trial mean has a relative spread near 6%
    text = "family = wrelated\nm = 64\nn = 64\ns = 64\nmechanisms = NOD\nrepetitions = 20\n"
    for seed in range(5):
        (row,) = run_plan(parse_plan(text + f"seed = {seed}\nworkload_seed = {seed}\n"))
        assert row.mse == pytest.approx(row.analytic, rel=0.25)


def test_rows_sorted_and_described():
    rows = run_plan(parse_plan(SMALL))
    assert [(r.sweep, r.mechanism) for r in rows] == sorted((r.sweep, r.mechanism) for r in rows)
    lrm = [r for r in rows if r.mechanism == "LRM"]
    assert all(r.r == 4 and r.residual <= 1e-6 and r.termination == "converged" for r in lrm)
    assert all(r.mse >= 0 for r in rows)


def test_first_trial_independent_of_repetitions():
    w = generate(WorkloadSpec("wrange", 6, 10, seed=1))
    point_seed = derive_seed(7, 0)
    one = _trial_noise(lambda g: noise_nor(w, 1.0, g), point_seed, 1)
    many = _trial_noise(lambda g: noise_nor(w, 1.0, g), point_seed, 20)
    np.testing.assert_array_equal(one[0], many[0])
    text = "family = wrange\nm = 6\nn = 10\nworkload_seed = 1\nmechanisms = NOR\nseed = 7\n"
    (row,) = run_plan(parse_plan(text + "repetitions = 1\n"))
    assert row.seed == point_seed
    assert row.mse == _mean_sq(many[:1])


def test_amm_rows_and_cap():
    text = "family = wrange\nm = 8\nn = 8\nmechanisms = AMM, NOD\nrepetitions = 5\n"
    rows = run_plan(parse_plan(text))
    assert [r.mechanism for r in rows] == ["AMM", "NOD"]
    big = parse_plan("family = wrange\nm = 8\nn = 512\nmechanisms = AMM, NOD\nrepetitions = 2\n")
    assert [r.mechanism for r in run_plan(big)] == ["NOD"]


def test_dataset_file(tmp_path):
    counts = tmp_path / "counts.txt"
    counts.write_text("\n".join(str(i) for i in range(32)) + "\n")
    plan = parse_plan(f"family = wrange\nm = 4\nn = 8\ndataset = {counts}\nmechanisms = LRM\nrepetitions = 2\n")
    assert len(run_plan(plan)) == 1
    missing = parse_plan("family = wrange\nm = 4\nn = 8\ndataset = /nonexistent/c.txt\nrepetitions = 2\n")
    with pytest.raises(OSError, match="/nonexistent/c.txt"):
        run_plan(missing)
    too_short = parse_plan(f"family = wrange\nm = 4\nn = 64\ndataset = {counts}\nrepetitions = 2\n")
    with pytest.raises(PlanError, match="exceeds"):
        run_plan(too_short)


def test_emit_csv_round_trip(tmp_path):
    row = ResultRow(0.1, "LRM", 1234.56789012345, 1200.0, 0.25, 5, 3.3e-7, 42)
    emit_csv([row], tmp_path / "out.csv")
    with open(tmp_path / "out.csv", newline="") as fh:
        records = list(csv.reader(fh))
    assert tuple(records[0]) == CSV_HEADER
    values = records[1]
    assert float(values[0]) == 0.1 and values[1] == "LRM"
    assert float(values[2]) == float(f"{row.mse:.10g}")
    assert int(values[5]) == 5 and float(values[6]) == 3.3e-7 and int(values[7]) == 42


def test_emit_csv_blank_fields_and_order(tmp_path):
    rows = [
        ResultRow(1.0, "NOR", 2.0, 2.0, 0.1, None, None, 1),
        ResultRow(0.1, "NOD", 3.0, None, 0.1, None, None, 2),
        ResultRow(1.0, "LRM", 1.0, 1.0, 0.1, 3, 0.0, 1),
    ]
    emit_csv(rows, tmp_path / "o.csv", stable=True)
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[1] == "0.1,NOD,3,,0,,,2"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["NOD", "LRM", "NOR"]


def test_emit_csv_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "none.csv")
    assert not (tmp_path / "none.csv").exists()


def test_emit_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        emit_csv([ResultRow(1.0, "NOD", 1.0, 1.0, 0.0, None, None, 0)], tmp_path / "no" / "dir.csv")


def test_run_is_deterministic(tmp_path):
    plan = parse_plan(SMALL)
    emit_csv(run_plan(plan), tmp_path / "a.csv", stable=True)
    emit_csv(run_plan(plan), tmp_path / "b.csv", stable=True)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    other = ExperimentPlan(**{**plan.__dict__, "seed": 1})
    emit_csv(run_plan(other), tmp_path / "c.csv", stable=True)
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()
