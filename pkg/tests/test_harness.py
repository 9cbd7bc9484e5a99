import csv
import json

import pytest

from nasolve.core import SolverConfig
from nasolve.harness import (
    ExperimentSpec,
    compare_table,
    emit_report,
    run_experiment,
    run_registry,
    summary_records,
    with_overrides,
    write_summary,
)
from nasolve.solvers import MethodId
from nasolve import cli


class TestExperimentSpec:
    def test_empty_method_list_rejected(self):
        with pytest.raises(ValueError):
            ExperimentSpec(problem="heq", methods=())

    def test_method_strings_coerced(self):
        spec = ExperimentSpec(problem="heq", methods=("newton",))
        assert spec.methods == (MethodId.newton,)


class TestRunExperiment:
    def test_heq_singular_newton_vs_anderson(self):
        spec = ExperimentSpec(
            problem="heq", methods=(MethodId.newton, MethodId.n_anderson), n=200, omega=1.0
        )
        report = run_experiment(spec)
        by = {row.method: row for row in report.rows}
        assert by[MethodId.newton].converged
        assert by[MethodId.n_anderson].iterations < by[MethodId.newton].iterations

    def test_f_evals_law_for_anderson_methods(self):
        # plain and safeguarded variants evaluate once per iteration plus one
        spec = ExperimentSpec(
            problem="multipoly",
            methods=(MethodId.newton, MethodId.n_anderson, MethodId.gamma_n_anderson),
            n=500,
            k=3,
        )
        for row in run_experiment(spec).rows:
            assert row.f_evals == row.iterations + 1

    def test_f_evals_count_actual_residual_calls(self):
        from nasolve.harness import resolve_problem
        from nasolve.core import NonlinearProblem
        from nasolve.solvers import solve

        spec = ExperimentSpec(problem="Bullard-Biegler", methods=(MethodId.gamma_armijo_n_anderson,),
                              config=with_overrides(SolverConfig(), r=0.5))
        base = resolve_problem(spec)
        calls = {"n": 0}

        def counting(x, _inner=base.residual):
            calls["n"] += 1
            return _inner(x)

        counted = NonlinearProblem(
            name=base.name, dim=base.dim, residual=counting, jacobian=base.jacobian,
            start=base.start, bounds=base.bounds,
        )
        out = solve(counted, MethodId.gamma_armijo_n_anderson, spec.config)
        expected = out.iterations + 1 + sum(rec.ls_evals for rec in out.trace)
        assert calls["n"] == expected
        assert sum(rec.ls_evals for rec in out.trace) > 0  # searches actually ran

    def test_parallel_matches_sequential(self):
        spec = ExperimentSpec(
            problem="multipoly", methods=tuple(MethodId), n=60, k=2,
            config=with_overrides(SolverConfig(), r=0.7),
        )
        seq = run_experiment(spec, parallel=False)
        par = run_experiment(spec, parallel=True)
        assert summary_records([seq]) == summary_records([par])

    def test_method_failure_recorded_not_raised(self):
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2,
                              config=SolverConfig(max_iters=2))
        report = run_experiment(spec)
        assert not report.rows[0].converged


class TestRunRegistry:
    def test_untranscribed_reported_as_skipped(self):
        reports = run_registry((MethodId.newton,))
        by_name = {r.problem: r for r in reports}
        assert by_name["Dayton10"].rows[0].skipped
        assert not by_name["Himmelbau"].rows[0].skipped
        recs = summary_records([by_name["Dayton10"]])
        assert recs[0]["iterations"] == "F" and recs[0]["lm_ls_pg"] == "skipped"


class TestEmitReport:
    def test_csv_layout_and_roundtrip(self, tmp_path):
        spec = ExperimentSpec(problem="Himmelbau", methods=(MethodId.proj_lm,),
                              config=with_overrides(SolverConfig(), r=0.5))
        report = run_experiment(spec)
        paths = emit_report(report, "csv", tmp_path)
        summary = [p for p in paths if "summary" in p.name][0]
        with open(summary) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["problem", "algorithm", "iterations", "f_evals",
                                 "final_res", "lm_ls_pg"]
        row = rows[0]
        assert row["problem"] == "Himmelbau"
        assert row["algorithm"] == "proj_lm"
        assert row["iterations"] == "6"
        assert row["f_evals"] == "7"
        assert row["lm_ls_pg"] == "6/0/0"
        assert float(row["final_res"]) < 1e-8
        # 17-significant-digit float round-trip
        recovered = float(row["final_res"])
        assert format(recovered, ".17g") == row["final_res"]
        hist = [p for p in paths if "history" in p.name][0]
        with open(hist) as fh:
            hrows = list(csv.DictReader(fh))
        assert list(hrows[0]) == ["k", "res_norm", "step_norm", "gamma_raw", "lambda",
                                  "gamma_used", "theta", "step_kind", "ls_evals"]
        assert [int(r["k"]) for r in hrows] == list(range(len(hrows)))

    def test_json_and_csv_encode_identical_values(self, tmp_path):
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2)
        report = run_experiment(spec)
        csv_paths = emit_report(report, "csv", tmp_path / "c")
        json_paths = emit_report(report, "json", tmp_path / "j")
        csv_summary = [p for p in csv_paths if "summary" in p.name][0]
        json_summary = [p for p in json_paths if "summary" in p.name][0]
        with open(csv_summary) as fh:
            from_csv = list(csv.DictReader(fh))
        from_json = json.loads(json_summary.read_text())
        assert from_csv == from_json

    def test_failed_run_renders_f(self, tmp_path):
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2,
                              config=SolverConfig(max_iters=2))
        report = run_experiment(spec)
        recs = summary_records([report])
        assert recs[0]["iterations"] == "F"
        assert recs[0]["f_evals"] == "-" and recs[0]["final_res"] == "-"

    def test_io_error_has_path_context(self, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2)
        report = run_experiment(spec)
        with pytest.raises((OSError, NotADirectoryError, FileExistsError)):
            emit_report(report, "csv", target / "sub")


class TestCompareTable:
    def test_empty_input(self):
        assert compare_table([]) == ""

    def test_single_report_renders(self):
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2)
        text = compare_table([run_experiment(spec)])
        assert "multipoly_k2_n50" in text and "newton" in text

    def test_failed_rows_render_dashes(self):
        spec = ExperimentSpec(problem="multipoly", methods=(MethodId.newton,), n=50, k=2,
                              config=SolverConfig(max_iters=2))
        text = compare_table([run_experiment(spec)])
        line = [ln for ln in text.splitlines() if "newton" in ln][0]
        assert " F " in f" {line} " or line.split()[-1] == "-"


class TestCli:
    def test_experiment_run(self, tmp_path, capsys):
        rc = cli.main([
            "--problem", "multipoly", "--n", "80", "--k", "2",
            "--method", "newton", "--method", "gamma_n_anderson",
            "--r", "0.7", "--out", str(tmp_path), "--format", "csv",
        ])
        assert rc == 0
        assert (tmp_path / "multipoly_k2_n80_summary.csv").exists()
        assert (tmp_path / "multipoly_k2_n80_newton_history.csv").exists()
        out = capsys.readouterr().out
        assert "gamma_n_anderson" in out

    def test_registry_run_reports_skipped(self, tmp_path, capsys):
        rc = cli.main([
            "--problem", "registry", "--method", "newton",
            "--r", "0.5", "--out", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "skipped (not transcribed)" in out
        assert "Dayton10" in out
        assert (tmp_path / "registry_summary.csv").exists()

    def test_unknown_problem_is_error_exit(self, tmp_path, capsys):
        rc = cli.main(["--problem", "NoSuchProblem", "--out", str(tmp_path)])
        assert rc == 2

    def test_linesearch_flag_upgrades_methods(self, tmp_path):
        rc = cli.main([
            "--problem", "multipoly", "--n", "60", "--method", "n_anderson",
            "--linesearch", "--out", str(tmp_path),
        ])
        assert rc == 0
        assert (tmp_path / "multipoly_k2_n60_armijo_n_anderson_history.csv").exists()


def test_write_summary_combines_reports(tmp_path):
    cfg = with_overrides(SolverConfig(), r=0.5)
    reports = run_registry((MethodId.newton,), cfg, names=("Himmelbau", "Dayton10"))
    path = write_summary(reports, tmp_path / "combined.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["problem"] for r in rows] == ["Himmelbau", "Dayton10"]
