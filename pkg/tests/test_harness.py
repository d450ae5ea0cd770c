import csv
import io
import json

import numpy as np
import pytest

from filtered_boris import filters
from filtered_boris.errors import InsufficientData
from filtered_boris.harness import cli
from filtered_boris.harness.checks import ORDER_EPSILONS, check_filter_oracle, check_orders
from filtered_boris.harness.experiments import (
    Cell,
    ExperimentSpec,
    HRule,
    fit_slope,
    fit_slopes,
    method_label,
    paper_scan_spec,
    run_convergence,
    run_resonance_scan,
)
from filtered_boris.harness.report import (
    CELL_COLUMNS,
    gnuplot_script,
    report_csv,
    report_json,
    trajectory_csv,
)
from filtered_boris.integrators import MethodConfig, Variant
from filtered_boris.reference import ErrorMetrics

EPS = tuple(2.0**-j for j in range(4, 8))


# ---------------------------------------------------------------------------
# slopes


def test_fit_slope_exact_powers():
    eps = [2.0**-j for j in range(4, 10)]
    assert fit_slope([(e, 3 * e**2) for e in eps]) == pytest.approx(2.0, abs=1e-12)
    assert fit_slope([(e, 0.5 * e) for e in eps]) == pytest.approx(1.0, abs=1e-12)


def test_fit_slope_noisy():
    rng = np.random.default_rng(7)
    eps = [2.0**-j for j in range(4, 14)]
    pts = [(e, 2 * e**1.5 * (1 + 0.01 * rng.standard_normal())) for e in eps]
    assert fit_slope(pts) == pytest.approx(1.5, abs=0.05)


def test_fit_slope_needs_data():
    with pytest.raises(InsufficientData):
        fit_slope([(0.1, 1.0), (0.05, 0.5), (0.025, 0.25)])
    with pytest.raises(InsufficientData):
        fit_slope([(0.1, 1.0), (0.05, 0.0), (0.025, 0.25), (0.0125, 0.1)])


def _cell(eps, err, flagged=False, status="ok"):
    return Cell("imp-a", eps, eps, "h=1eps", 1, ErrorMetrics(err, err, err), flagged=flagged,
                status=status)


def test_flagged_cells_do_not_change_slopes():
    eps = [2.0**-j for j in range(4, 10)]
    clean = [_cell(e, e**2) for e in eps]
    noisy = clean + [_cell(e * 0.75, 1e3, flagged=True) for e in eps]
    noisy += [_cell(e * 0.6, 1e3, status="failed") for e in eps]
    a, b = fit_slopes(clean), fit_slopes(noisy)
    assert a == b
    assert a[("imp-a", "h=1eps", "err_x")] == pytest.approx(2.0)


def test_too_few_cells_give_no_slope():
    slopes = fit_slopes([_cell(e, e) for e in (0.1, 0.05, 0.025)])
    assert slopes[("imp-a", "h=1eps", "err_x")] is None


# ---------------------------------------------------------------------------
# specs


def test_h_rules():
    assert HRule("ratio", 4).step(0.01) == pytest.approx(0.04)
    assert HRule("reciprocal", 64).step(0.01) == 1 / 64
    assert HRule("ratio", 4).label == "h=4eps"
    assert HRule("reciprocal", 64).label == "h=1/64"
    with pytest.raises(ValueError):
        HRule("log", 2)
    with pytest.raises(ValueError):
        HRule("ratio", 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(epsilons=(0.1, 0.2))
    with pytest.raises(ValueError):
        ExperimentSpec(epsilons=())
    with pytest.raises(ValueError):
        ExperimentSpec(t_end=0.0)
    with pytest.raises(ValueError):
        ExperimentSpec(err_mode="mean")
    with pytest.raises(ValueError):
        ExperimentSpec(preset="dipole")
    d = ExperimentSpec().describe()
    assert d["h_rules"] == ["h=1eps", "h=4eps", "h=16eps"]
    json.dumps(d)


def test_method_labels():
    assert method_label(MethodConfig(Variant.IMP_A)) == "imp-a"
    assert method_label(MethodConfig(Variant.IMP_A, fp_max_iters=0)) == "imp-a[fp=0]"
    assert method_label(MethodConfig(Variant.EXP_A, fp_max_iters=0)) == "exp-a"


# ---------------------------------------------------------------------------
# sweeps and output


@pytest.fixture(scope="module")
def small_spec():
    return ExperimentSpec(epsilons=EPS, h_rules=(HRule("ratio", 1), HRule("ratio", 4)))


@pytest.fixture(scope="module")
def small_report(small_spec, cache_dir):
    return run_convergence(small_spec, cache_dir=cache_dir)


def test_sweep_shape(small_report):
    cells = small_report.cells
    assert len(cells) == 4 * 4 * 2
    assert cells == sorted(cells, key=Cell.sort_key)
    assert all(c.ok for c in cells)
    assert small_report.slopes[("imp-a", "h=1eps", "err_x")] > 1.5
    assert small_report.metadata["kind"] == "convergence"
    assert all(o["halving_residual"] <= 1e-10 for o in small_report.metadata["oracle"])


def test_sweep_deterministic_and_parallel(small_spec, small_report, cache_dir):
    again = run_convergence(small_spec, cache_dir=cache_dir, workers=2)
    assert report_csv(again) == report_csv(small_report)
    assert report_json(again) == report_json(small_report)


def test_csv_layout(small_report):
    rows = list(csv.reader(io.StringIO(report_csv(small_report))))
    assert tuple(rows[0][: len(CELL_COLUMNS)]) == CELL_COLUMNS
    assert rows[0][14] == "status"
    assert len(rows) == 1 + len(small_report.cells)
    d = json.loads(report_json(small_report))
    assert "imp-a|h=1eps|err_x" in d["slopes"]
    assert d["cells"][0]["err_mode"] == "sup"


def test_gnuplot_script(small_report):
    gp = gnuplot_script("sweep.csv", small_report)
    assert "set logscale xy" in gp and "sweep.png" in gp
    assert gp.count("'sweep.csv'") == 4


def test_scan_small_range(cache_dir):
    spec = paper_scan_spec(methods=(MethodConfig(Variant.EXP_A), MethodConfig(Variant.TWO_POINT)))
    a = run_resonance_scan(spec, range(100, 106), cache_dir=cache_dir)
    b = run_resonance_scan(spec, reversed(range(100, 106)), cache_dir=cache_dir, workers=2)
    assert report_csv(a) == report_csv(b)
    assert a.slopes == {} and len(a.cells) == 12
    assert a.metadata["k_range"] == [100, 105]
    assert all(c.errors.mode == "endpoint" for c in a.cells)
    for c in a.cells:
        assert c.flagged == (c.res_k > 0)


def test_scan_needs_one_epsilon():
    with pytest.raises(ValueError):
        run_resonance_scan(ExperimentSpec(epsilons=EPS), range(60, 62))


# ---------------------------------------------------------------------------
# command line


def test_cli_simulate(capsys):
    code = cli.main(["simulate", "--method", "twop-a", "--epsilon", "2^-4", "--h", "1/16",
                     "--t-end", "0.25"])
    assert code == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:3] == ["n", "t", "x1"] and len(rows) == 6


def test_cli_simulate_json(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["simulate", "--epsilon", "0.0625", "--h", "0.0625", "--format", "json",
                     "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["metadata"]["n_steps"] == 16


def test_trajectory_csv_header():
    from filtered_boris.fields import paper_sec8
    from filtered_boris.integrators import run_trajectory

    traj = run_trajectory((1 / 3, 1 / 4, 1 / 2), (0.4, 2 / 3, 1.0), paper_sec8(0.0625),
                          MethodConfig(), 0.0625, 0.125)
    assert trajectory_csv(traj).splitlines()[0].startswith("n,t,x1,x2,x3,v1")


@pytest.mark.parametrize("argv", [
    ["simulate", "--epsilon", "0", "--h", "0.1"],
    ["simulate", "--epsilon", "0.1", "--h", "0.3", "--t-end", "1"],
    ["simulate", "--method", "rk4", "--epsilon", "0.1", "--h", "0.1"],
    ["simulate", "--epsilon", "0.1"],
    ["converge"],
    ["converge", "--epsilons", "2^-4,2^-3"],
    ["scan", "--epsilon", "0.01", "--k-from", "10", "--k-to", "5"],
    ["converge", "--epsilons", "2^-4,2^-5,2^-6", "--gnuplot"],
    ["nonsense"],
])
def test_cli_usage_errors(argv, capsys):
    assert cli.main(argv) == 2


def test_cli_numerical_failure(capsys):
    code = cli.main(["simulate", "--epsilon", "0.1", "--h", "0.1", "--x0", "0,0,1"])
    assert code == 1
    assert "StepError" in capsys.readouterr().err


def test_cli_converge_files(tmp_path, capsys, monkeypatch, cache_dir):
    monkeypatch.setenv("BORIS_CACHE_DIR", cache_dir)
    out = tmp_path / "sweep.csv"
    code = cli.main(["converge", "--epsilons", "2^-4,2^-5,2^-6,2^-7", "--h-ratios", "1,4",
                     "--methods", "imp-a,boris", "--out", str(out), "--gnuplot"])
    assert code == 0
    assert out.exists() and (tmp_path / "sweep.gp").exists()
    assert "slope imp-a" in capsys.readouterr().err


def test_eval_number():
    assert cli.eval_number("2^-6") == 2.0**-6
    assert cli.eval_number("1/64") == 1 / 64
    assert cli.eval_number(" 0.5 ") == 0.5


# ---------------------------------------------------------------------------
# fault injection


def test_filter_oracle_passes_inside_radius():
    assert check_filter_oracle(n=30, y_max=1.5).passed


def test_corrupted_filter_is_caught(monkeypatch):
    closed = filters._closed

    def corrupt(fid, y):
        a1, a2 = closed(fid, y)
        if fid == "phi1":
            a2 *= 1 + 1e-6
        return a1, a2

    monkeypatch.setattr(filters, "_closed", corrupt)
    res = check_filter_oracle(n=30, y_max=1.5)
    assert not res.passed
    assert "phi1" in res.detail


def test_disabled_iteration_degrades_order(cache_dir):
    spec = ExperimentSpec(
        epsilons=ORDER_EPSILONS, h_rules=(HRule("ratio", 1),),
        methods=(MethodConfig(Variant.IMP_A, fp_max_iters=0),),
    )
    report = run_convergence(spec, cache_dir=cache_dir)
    label = "imp-a[fp=0]"
    assert {c.method for c in report.cells} == {label}
    res = check_orders(report, rules=("h=1eps",), second_order=(label,), first_order=())
    assert not res.passed
    assert report.slopes[(label, "h=1eps", "err_x")] < 1.3
