import hashlib

import numpy as np
import pytest

from churnfusion import cli, pipeline
from churnfusion.errors import InvalidConfig
from churnfusion.synth import SynthConfig, generate_cohort

SMALL_CONFIG = """
# small settings for fast end-to-end runs
seed = 3
seeds = 0,1
test_fraction = 0.3
rfe_k = 4
ser_corpus_per_class = 4
synth.n_customers = 60
synth.labeled_fl_fraction = 0.3
synth.coupling = 0.9
coreg.max_iterations = 2
churn_train.epochs = 25
ser_train.epochs = 25
"""


class TestParseConfig:
    def test_round_trip_of_every_kind(self):
        cfg = pipeline.parse_config_text(SMALL_CONFIG)
        assert cfg.seed == 3
        assert cfg.seeds == (0, 1)
        assert cfg.test_fraction == 0.3
        assert cfg.rfe_k == 4
        assert cfg.synth.n_customers == 60
        assert cfg.synth.coupling == 0.9
        assert cfg.coreg.max_iterations == 2
        assert cfg.churn_train.epochs == 25

    def test_comments_and_blanks_ignored(self):
        cfg = pipeline.parse_config_text("\n# only a comment\n\n")
        assert cfg == pipeline.RunConfig()

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidConfig):
            pipeline.parse_config_text("no_such_key = 1")
        with pytest.raises(InvalidConfig):
            pipeline.parse_config_text("synth.no_such_key = 1")
        with pytest.raises(InvalidConfig):
            pipeline.parse_config_text("not a key value line")

    def test_with_seed_rederives_nested_seeds(self):
        cfg = pipeline.with_seed(pipeline.RunConfig(), 10)
        assert cfg.seed == 10
        assert cfg.synth.seed == 10
        assert cfg.smogn.seed == 11
        assert cfg.coreg.seed == 12
        assert cfg.churn_train.seed == 13
        assert cfg.ser_train.seed == 14

    def test_invalid_values_rejected(self):
        with pytest.raises(InvalidConfig):
            pipeline.parse_config_text("test_fraction = 1.5")
        with pytest.raises(InvalidConfig):
            pipeline.parse_config_text("seeds = ")


class TestSplitTable:
    def test_deterministic_partition(self):
        cohort = generate_cohort(SynthConfig(n_customers=30, seed=0))
        a_train, a_test = pipeline.split_table(cohort.table, 0.3, seed=5)
        b_train, b_test = pipeline.split_table(cohort.table, 0.3, seed=5)
        assert a_train.ids() == b_train.ids()
        assert a_test.ids() == b_test.ids()
        assert len(a_test) == round(0.3 * 30)
        assert sorted(a_train.ids() + a_test.ids()) == sorted(cohort.table.ids())

    def test_different_seed_differs(self):
        cohort = generate_cohort(SynthConfig(n_customers=30, seed=0))
        _, a = pipeline.split_table(cohort.table, 0.3, seed=1)
        _, b = pipeline.split_table(cohort.table, 0.3, seed=2)
        assert a.ids() != b.ids()

    def test_at_least_one_test_row(self):
        cohort = generate_cohort(SynthConfig(n_customers=3, seed=0))
        _, test = pipeline.split_table(cohort.table, 0.01, seed=0)
        assert len(test) == 1


@pytest.fixture(scope="module")
def small_cfg():
    return pipeline.with_seed(pipeline.parse_config_text(SMALL_CONFIG), 3)


class TestRunExperiment:
    def test_all_strategies_report(self, small_cfg):
        result = pipeline.run_experiment(small_cfg)
        assert set(result.reports) == set(pipeline.STRATEGIES)
        for rep in result.reports.values():
            assert 0.0 <= rep.map <= 1.0
            assert 0.0 <= rep.macro_f1 <= 1.0
        assert result.baseline_auc == result.reports["none"].auc
        assert result.hybrid_auc == result.reports["hybrid"].auc

    def test_assignments_cover_test_split(self, small_cfg):
        result = pipeline.run_experiment(small_cfg, strategies=("none", "late"))
        cohort = generate_cohort(small_cfg.synth)
        _, test_tbl = pipeline.split_table(cohort.table, small_cfg.test_fraction, small_cfg.seed)
        for strategy in ("none", "late"):
            assert [a.id for a in result.assignments[strategy]] == test_tbl.ids()

    def test_compare_over_seeds_shapes(self, small_cfg):
        rows = pipeline.compare_over_seeds(small_cfg, strategies=("none",))
        assert set(rows) == {"none"}
        mean, std = rows["none"]["map"]
        assert 0.0 <= mean <= 1.0 and std >= 0.0
        table = pipeline.format_comparison(rows)
        assert table.splitlines()[0] == "metric,none"


def run_cli(args, workspace, config_path):
    return cli.main(list(args) + ["--out", str(workspace), "--config", str(config_path)])


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "config.txt"
    config.write_text(SMALL_CONFIG, encoding="utf-8")
    ws = root / "ws"
    assert run_cli(["gen"], ws, config) == 0
    for modality in ("fl", "ser", "churn"):
        assert run_cli(["train", modality], ws, config) == 0
    return ws, config


def file_hashes(root):
    return {
        p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestCli:
    def test_gen_writes_cohort(self, cli_workspace):
        ws, _ = cli_workspace
        assert (ws / "data" / "table.csv").exists()
        assert (ws / "data" / "manifest.csv").exists()
        assert (ws / "data" / "ground_truth.csv").exists()
        assert list((ws / "data" / "audio").glob("*.wav"))

    def test_train_writes_models(self, cli_workspace):
        ws, _ = cli_workspace
        for name in ("fl.bin", "ser.bin", "churn.bin"):
            assert (ws / "models" / name).stat().st_size > 0

    def test_evaluate_each_strategy(self, cli_workspace, capsys):
        ws, config = cli_workspace
        for strategy in pipeline.STRATEGIES:
            assert run_cli(["evaluate", strategy], ws, config) == 0
            out = capsys.readouterr().out
            assert "map=" in out and "risk_low=" in out
            assert (ws / "reports" / f"report_{strategy}.txt").exists()
            assert (ws / "reports" / f"assignments_{strategy}.csv").exists()
        assert (ws / "models" / "churn_hybrid.bin").exists()

    def test_report_prints_stored_reports(self, cli_workspace, capsys):
        ws, config = cli_workspace
        assert run_cli(["report"], ws, config) == 0
        out = capsys.readouterr().out
        assert "# report_none.txt" in out

    def test_full_rerun_byte_identical(self, cli_workspace, tmp_path, capsys):
        ws, config = cli_workspace
        ws2 = tmp_path / "ws2"
        assert run_cli(["gen"], ws2, config) == 0
        for modality in ("fl", "ser", "churn"):
            assert run_cli(["train", modality], ws2, config) == 0
        for strategy in pipeline.STRATEGIES:
            assert run_cli(["evaluate", strategy], ws2, config) == 0
        capsys.readouterr()
        assert file_hashes(ws2) == file_hashes(ws)

    def test_train_ser_without_manifest_fails(self, tmp_path, capsys):
        config = tmp_path / "config.txt"
        config.write_text(SMALL_CONFIG, encoding="utf-8")
        ws = tmp_path / "empty_ws"
        assert run_cli(["train", "ser"], ws, config) == 1
        assert "error:" in capsys.readouterr().err

    def test_evaluate_without_models_fails(self, tmp_path, capsys):
        config = tmp_path / "config.txt"
        config.write_text(SMALL_CONFIG, encoding="utf-8")
        ws = tmp_path / "ws3"
        assert run_cli(["gen"], ws, config) == 0
        assert run_cli(["evaluate", "none"], ws, config) == 1
        assert "run 'train churn'" in capsys.readouterr().err

    def test_unwritable_output_fails(self, tmp_path, capsys):
        config = tmp_path / "config.txt"
        config.write_text(SMALL_CONFIG, encoding="utf-8")
        blocker = tmp_path / "blocked"
        blocker.write_text("a file where a directory must go", encoding="utf-8")
        assert cli.main(["gen", "--out", str(blocker / "ws"), "--config", str(config)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_threshold_flags_shift_banding(self, cli_workspace, capsys):
        ws, config = cli_workspace
        assert (
            cli.main(
                ["evaluate", "none", "--out", str(ws), "--config", str(config),
                 "--threshold-churn", "0.99"]
            )
            == 0
        )
        out = capsys.readouterr().out
        fields = dict(
            line.split("=", 1) for line in out.strip().split("\n") if "=" in line
        )
        # nearly nothing clears a 0.99 churn threshold
        assert int(fields["risk_high"]) == 0

    def test_bad_config_file_fails(self, tmp_path, capsys):
        config = tmp_path / "bad.txt"
        config.write_text("nonsense = 1", encoding="utf-8")
        assert cli.main(["gen", "--out", str(tmp_path / "ws"), "--config", str(config)]) == 1
        assert "unknown key" in capsys.readouterr().err
