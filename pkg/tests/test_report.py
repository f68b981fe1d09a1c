import csv

import pytest

from codeauthor.config import ExperimentConfig, expand_grid, load_config, parse_config_text, parse_value
from codeauthor.errors import ConfigurationError, FormatError
from codeauthor.evaluation import RunRecord, RunResult
from codeauthor.report import compare, emit_report, read_csv, summary_text, write_csv


def context_result(model="pbrf", offset=0.0):
    recs = [RunRecord(f"depth{d}", 0.9 - 0.05 * d + offset, 100, 30, depth=d) for d in range(1, 10)]
    return RunResult("context", model, recs, {"seed": "0"})


def time_result():
    recs = [RunRecord(f"fold{i}->{j}", 1.0 / (j - i + 1), 10, 10, fold=i, eval_fold=j)
            for i in range(9) for j in range(i + 1, 10)]
    return RunResult("time", "pbrf", recs)


class TestCsv:
    def test_round_trip(self, tmp_path):
        results = [context_result(), time_result()]
        write_csv(results, tmp_path / "r.csv")
        assert read_csv(tmp_path / "r.csv") == results

    def test_bad_header(self, tmp_path):
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        with pytest.raises(FormatError):
            read_csv(tmp_path / "bad.csv")

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            write_csv([context_result()], blocker / "r.csv")
        with pytest.raises(OSError):
            emit_report([context_result()], blocker / "out")


class TestReport:
    def test_files_and_series(self, tmp_path):
        written = emit_report([context_result(), context_result("pbnn", -0.1), time_result()], tmp_path)
        with open(tmp_path / "series_0_context_pbrf.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "accuracy"] and len(rows) == 10
        with open(tmp_path / "series_2_time_pbrf.csv") as fh:
            assert [int(r[0]) for r in list(csv.reader(fh))[1:]] == list(range(1, 10))
        assert all(p.exists() for p in written.values())
        assert any(p.suffix == ".png" for p in written.values())
        assert "[compare 0 vs 1]" in (tmp_path / "summary.txt").read_text()

    def test_no_figures(self, tmp_path):
        written = emit_report([context_result()], tmp_path, figures=False)
        assert not any(p.suffix == ".png" for p in written.values())

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([], tmp_path)

    def test_paired_comparison(self):
        c = compare(context_result(), context_result("pbnn", -0.1))
        assert c.mean_difference == pytest.approx(0.1)
        assert c.test is not None and c.test.n == 9 and c.test.p_value == 2 / 2 ** 9

    def test_unpaired_comparison(self):
        assert compare(context_result(), time_result()).test is None

    def test_summary_lists_mean_and_std(self):
        text = summary_text([context_result()])
        assert "mean = " in text and "std = " in text and "depth9" in text


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.selection().resolve(1000) == 70
        assert cfg.depths == tuple(range(1, 10))
        assert cfg.split_config().test_ratio == pytest.approx(0.25)

    def test_parse_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("# comment\nmodel = pbnn\nepochs = 3  # inline\ndepths = 1-3,7\nmax_depth = none\n")
        (cfg,) = load_config(path)
        assert (cfg.model, cfg.epochs, cfg.depths, cfg.max_depth) == ("pbnn", 3, (1, 2, 3, 7), None)

    def test_grid_and_overrides(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("model = pbrf | pbnn\nseed = 1 | 2\n")
        configs = load_config(path, ["seed = 5"])
        assert [(c.model, c.seed) for c in configs] == [("pbrf", 5), ("pbnn", 5)]
        assert len(expand_grid(parse_config_text(path.read_text()))) == 4

    def test_keep_count_replaces_fraction(self):
        (cfg,) = expand_grid({"keep_count": ["12"]})
        assert cfg.keep_fraction is None and cfg.selection().resolve(1000) == 12

    def test_dumps_round_trip(self):
        cfg = ExperimentConfig(model="pbnn", depths=(2, 4), bootstrap=False, keep_fraction=0.3)
        (again,) = expand_grid(parse_config_text(cfg.dumps()))
        assert again == cfg

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            parse_config_text("nonsense = 1")
        with pytest.raises(ConfigurationError):
            parse_config_text("just words")
        with pytest.raises(ConfigurationError):
            parse_value("n_trees", "many")
        with pytest.raises(ConfigurationError):
            ExperimentConfig(model="svm")
        with pytest.raises(ConfigurationError):
            ExperimentConfig(n_trees=0)
        with pytest.raises(ConfigurationError):
            ExperimentConfig().check_files()
