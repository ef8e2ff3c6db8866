import pandas as pd
import pytest
from click.testing import CliRunner

from fsa_aoi.run import cli
from fsa_aoi.utils.errors import QuadratureError
from fsa_aoi.utils.experiment import SweepResult


@pytest.fixture
def runner():
    return CliRunner()


class TestSweepCommands:

    def test_analytic_writes_csv(self, runner, test_data_dir, tmp_path):
        out = tmp_path / "fig5a.csv"
        result = runner.invoke(cli, ["analytic", str(test_data_dir / "fig5a_sweep.json"), "--output", str(out)],
                               obj={})
        assert result.exit_code == 0, result.output
        assert "80 row(s)" in result.output
        assert len(pd.read_csv(out)) == 80

    def test_analytic_override(self, runner, test_data_dir, tmp_path):
        out = tmp_path / "fig5a.json"
        result = runner.invoke(cli, ["analytic", str(test_data_dir / "fig5a_sweep.json"), "--eta", "0.4",
                                     "--output", str(out), "--format", "json"], obj={})
        assert result.exit_code == 0, result.output
        frame = pd.read_json(out)
        assert set(frame["eta"]) == {0.4}

    def test_bad_axis(self, runner, test_data_dir, tmp_path):
        result = runner.invoke(cli, ["analytic", str(test_data_dir / "bad_axis.json"),
                                     "--output", str(tmp_path / "x.csv")], obj={})
        assert result.exit_code == 2

    def test_missing_file(self, runner, tmp_path):
        result = runner.invoke(cli, ["analytic", str(tmp_path / "missing.json")], obj={})
        assert result.exit_code == 4

    def test_numerical_failure(self, runner, test_data_dir, tmp_path, mocker):
        mocker.patch("fsa_aoi.run.run_sweep", side_effect=QuadratureError("outer integral did not converge"))
        result = runner.invoke(cli, ["analytic", str(test_data_dir / "fig5a_sweep.json"),
                                     "--output", str(tmp_path / "x.csv")], obj={})
        assert result.exit_code == 3

    def test_threads_are_passed_through(self, runner, test_data_dir, tmp_path, mocker):
        sweep = mocker.patch("fsa_aoi.run.run_sweep",
                             return_value=SweepResult(pd.DataFrame({"mean_aoi_slots": [1.0]})))
        result = runner.invoke(cli, ["--threads", "3", "simulate", str(test_data_dir / "fig5a_sweep.json"),
                                     "--realizations", "2", "--output", str(tmp_path / "x.csv")], obj={})
        assert result.exit_code == 0, result.output
        assert sweep.call_args.kwargs["threads"] == 3
        assert sweep.call_args.kwargs["mode"] == "simulate"
        assert sweep.call_args.args[0].sim["num_realizations"] == 2

    def test_renewal_both(self, runner, test_data_dir, tmp_path):
        out = tmp_path / "renewal.csv"
        result = runner.invoke(cli, ["simulate", str(test_data_dir / "renewal_both.json"), "--mode", "both",
                                     "--output", str(out)], obj={})
        assert result.exit_code == 0, result.output
        assert "within 3% of the analytic mean" in result.output
        assert "rel_gap" in pd.read_csv(out).columns


class TestBipolarCommands:

    def test_optimal_f(self, runner):
        result = runner.invoke(cli, ["optimal-f", "--lam", "0.02", "--r", "10", "--eta", "0.8"], obj={})
        assert result.exit_code == 0, result.output
        assert "F* = " in result.output
        assert "y(1) = " in result.output

    def test_optimal_f_curve(self, runner, tmp_path):
        out = tmp_path / "curve.csv"
        result = runner.invoke(cli, ["optimal-f", "--curve-out", str(out)], obj={})
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(out)) == 77

    def test_optimal_f_bad_theta(self, runner):
        result = runner.invoke(cli, ["optimal-f", "--theta", "loud"], obj={})
        assert result.exit_code == 2

    def test_compare(self, runner):
        result = runner.invoke(cli, ["compare", "--eta-sa", "0.25"], obj={})
        assert result.exit_code == 0, result.output
        assert "FSA (a) eta=0.5, F=2" in result.output
        assert "FSA (b) eta=1, F=4" in result.output

    def test_compare_scheme_b_not_applicable(self, runner):
        result = runner.invoke(cli, ["compare", "--eta-sa", "0.3"], obj={})
        assert result.exit_code == 0, result.output
        assert "FSA (b): not applicable" in result.output

    def test_compare_bad_rate(self, runner):
        result = runner.invoke(cli, ["compare", "--eta-sa", "1.5"], obj={})
        assert result.exit_code == 2


class TestFigures:

    def test_figure_csv(self, runner, tmp_path):
        result = runner.invoke(cli, ["figures", "5a", "--out-dir", str(tmp_path)], obj={})
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(tmp_path / "fig5a.csv")) == 80

    def test_derivative_curve_figure(self, runner, tmp_path):
        result = runner.invoke(cli, ["figures", "3", "--out-dir", str(tmp_path)], obj={})
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "fig3.csv")
        assert len(frame) == 4 * 77
        assert {"y_per_slot", "optimal_frame"} <= set(frame.columns)

    def test_unknown_figure(self, runner, tmp_path):
        result = runner.invoke(cli, ["figures", "99z", "--out-dir", str(tmp_path)], obj={})
        assert result.exit_code == 2

    def test_no_figure_named(self, runner, tmp_path):
        result = runner.invoke(cli, ["figures", "--out-dir", str(tmp_path)], obj={})
        assert result.exit_code == 2
