import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from prunekit.data import synthetic_gaussian
from prunekit.harness import (
    ConfigError,
    ExperimentConfig,
    derive_seed,
    export_report,
    mid_epoch,
    prune,
    run_scoring,
    run_sweep,
)
from prunekit.nn import ModelSpec
from prunekit.scores import ScoreKind
from prunekit.train import TrainConfig


def small_config(out_dir, **overrides) -> ExperimentConfig:
    values = dict(
        dataset="synthetic",
        model=ModelSpec((6, 8, 3)),
        train=TrainConfig(epochs=2, batch_size=16, learning_rate=0.05, momentum=0.9, seed=0),
        score_runs=2,
        score_epochs=(0, 1),
        prune_fractions=(0.0, 0.5),
        retrain_trials=2,
        keep="highest",
        output_dir=Path(out_dir),
        master_seed=4,
        synth_classes=3,
        synth_dim=6,
        synth_per_class=20,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


class TestPrune:
    @pytest.fixture
    def ds(self):
        return synthetic_gaussian(2, 3, 5, 0)

    def test_fraction_zero_is_identity(self, ds):
        out = prune(ds, np.arange(10, dtype=float), 0.0)
        assert np.array_equal(out.xs, ds.xs)
        assert np.array_equal(out.ids, ds.ids)

    def test_tie_broken_toward_lower_id(self):
        ds = synthetic_gaussian(2, 2, 2, 1)
        out = prune(ds, np.array([0.1, 0.9, 0.5, 0.5]), 0.5, "highest")
        assert out.ids.tolist() == [1, 2]

    def test_keep_lowest(self):
        ds = synthetic_gaussian(2, 2, 2, 1)
        out = prune(ds, np.array([0.1, 0.9, 0.5, 0.5]), 0.5, "lowest")
        assert out.ids.tolist() == [0, 2]

    def test_heavy_pruning_keeps_single_argmax(self, ds):
        scores = np.array([0.2, 0.9, 0.9, 0.1, 0.0, 0.3, 0.3, 0.3, 0.8, 0.5])
        out = prune(ds, scores, 0.9, "highest")
        assert out.ids.tolist() == [1]  # tie 1 vs 2 resolved to the lower id

    def test_retained_count_matches_exact_ceil(self):
        rng = np.random.default_rng(0)
        for n in (1, 3, 10, 47):
            ds = synthetic_gaussian(1, 2, n, 0)
            scores = rng.standard_normal(n)
            for fraction in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95):
                expected = math.ceil((1 - Fraction(str(fraction))) * n)
                assert len(prune(ds, scores, fraction)) == expected

    def test_float_fraction_does_not_inflate_count(self):
        # (1 - 0.7) * 10 evaluates to 3.0000000000000004 in binary floats;
        # the retained count must still be 3.
        ds = synthetic_gaussian(2, 2, 5, 3)
        assert len(prune(ds, np.arange(10, dtype=float), 0.7)) == 3

    def test_stable_order_among_equal_scores(self, ds):
        out = prune(ds, np.zeros(10), 0.5)
        assert out.ids.tolist() == [0, 1, 2, 3, 4]

    def test_relative_order_preserved(self, ds):
        scores = np.array([5.0, 1.0, 4.0, 2.0, 3.0, 9.0, 0.5, 7.0, 6.0, 8.0])
        out = prune(ds, scores, 0.5)
        assert out.ids.tolist() == sorted(out.ids.tolist())

    def test_validation(self, ds):
        with pytest.raises(ValueError):
            prune(ds, np.zeros(9), 0.5)
        with pytest.raises(ValueError):
            prune(ds, np.zeros(10), 1.0)


class TestDeriveSeed:
    def test_stable_and_distinct(self):
        assert derive_seed(1, "retrain", 0.5, 0) == derive_seed(1, "retrain", 0.5, 0)
        assert derive_seed(1, "retrain", 0.5, 0) != derive_seed(1, "retrain", 0.5, 1)
        assert derive_seed(1, "retrain", 0.5, 0) != derive_seed(2, "retrain", 0.5, 0)

    def test_fits_in_64_bits(self):
        assert 0 <= derive_seed("x") < 2**64


class TestMidEpoch:
    def test_proportional_rule(self):
        assert mid_epoch(200) == 20
        assert mid_epoch(10) == 1
        assert mid_epoch(3) == 1  # never drops below 1
        assert mid_epoch(12) == 1


class TestConfigValidation:
    def test_fractions_must_increase(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, prune_fractions=(0.5, 0.3))

    def test_fractions_in_range(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, prune_fractions=(0.0, 1.0))

    def test_score_epochs_within_training(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, score_epochs=(0, 9))

    def test_runs_positive(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, score_runs=0)

    def test_bad_dataset(self, tmp_path):
        with pytest.raises(ConfigError):
            small_config(tmp_path, dataset="imagenet")


@pytest.fixture(scope="module")
def scoring_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("scoring")
    cfg = small_config(out)
    tables = run_scoring(cfg)
    return cfg, tables


class TestRunScoring:
    def test_table_inventory(self, scoring_run):
        cfg, tables = scoring_run
        labels = [k.label for k in tables]
        assert labels == ["grand@0", "grand@1", "el2n@0", "el2n@1", "forget@2", "input_norm", "random"]

    def test_trial_shapes(self, scoring_run):
        cfg, tables = scoring_run
        n = 60
        assert tables[ScoreKind("grand", 0)].trials.shape == (2, n)
        assert tables[ScoreKind("input_norm")].trials.shape == (1, n)
        assert tables[ScoreKind("random")].trials.shape == (2, n)

    def test_single_run_single_epoch_shape(self, tmp_path):
        cfg = small_config(tmp_path, score_runs=1, score_epochs=(0,))
        tables = run_scoring(cfg)
        assert tables[ScoreKind("grand", 0)].trials.shape[0] == 1

    def test_csvs_written(self, scoring_run):
        cfg, tables = scoring_run
        for kind in tables:
            assert (cfg.output_dir / f"scores_{kind.file_label}.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_a = small_config(tmp_path / "a")
        cfg_b = small_config(tmp_path / "b")
        run_scoring(cfg_a)
        run_scoring(cfg_b)
        for path_a in sorted((tmp_path / "a").glob("scores_*.csv")):
            path_b = tmp_path / "b" / path_a.name
            assert path_a.read_bytes() == path_b.read_bytes()

    def test_rerun_into_same_directory_regenerates(self, tmp_path):
        cfg = small_config(tmp_path)
        run_scoring(cfg)
        first = (cfg.output_dir / "scores_grand_0.csv").read_bytes()
        run_scoring(cfg)  # wipes per-run stores, retrains deterministically
        assert (cfg.output_dir / "scores_grand_0.csv").read_bytes() == first

    def test_checkpoint_layout(self, scoring_run):
        # steps {0} | score_epochs under <out>/checkpoints/<run-id>/
        cfg, _ = scoring_run
        run_dir = cfg.output_dir / "checkpoints" / "run000"
        assert sorted(p.name for p in run_dir.iterdir()) == ["ckpt_0.bin", "ckpt_1.bin"]


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = small_config(out, prune_fractions=(0.0, 0.3, 0.5, 0.7))
    tables = run_scoring(cfg)
    sweep = run_sweep(cfg, tables)
    return cfg, tables, sweep


class TestRunSweep:
    def test_row_count(self, sweep_run):
        cfg, tables, sweep = sweep_run
        assert len(sweep.rows) == len(tables) * 4 * cfg.retrain_trials

    def test_fraction_zero_identical_across_kinds(self, sweep_run):
        cfg, tables, sweep = sweep_run
        for trial in range(cfg.retrain_trials):
            accs = {
                r.test_accuracy for r in sweep.rows if r.fraction == 0.0 and r.trial == trial
            }
            assert len(accs) == 1

    def test_rows_sorted(self, sweep_run):
        _, _, sweep = sweep_run
        keys = [(r.kind, r.fraction, r.trial) for r in sweep.rows]
        assert keys == sorted(keys)

    def test_random_accuracy_non_increasing_with_slack(self, tmp_path):
        # Needs a desk-scale fixture; the 60-example micro fixture is too
        # noisy for the 2-point slack.
        from prunekit.harness import load_dataset_pair
        from prunekit.scores import compute_table

        cfg = small_config(
            tmp_path,
            model=ModelSpec((20, 32, 10)),
            train=TrainConfig(epochs=5, batch_size=64, learning_rate=0.05, momentum=0.9, seed=0),
            prune_fractions=(0.0, 0.3, 0.5, 0.7),
            retrain_trials=2,
            synth_classes=10,
            synth_dim=20,
            synth_per_class=100,
        )
        train_ds, _ = load_dataset_pair(cfg)
        table = compute_table(ScoreKind("random"), train_ds, random_trials=2, random_seed=1)
        sweep = run_sweep(cfg, {ScoreKind("random"): table})
        means = [float(np.mean(sweep.accuracies("random", f))) for f in cfg.prune_fractions]
        for earlier, later in zip(means, means[1:]):
            assert later <= earlier + 0.02

    def test_determinism(self, tmp_path, sweep_run):
        cfg_old, tables, sweep = sweep_run
        cfg = small_config(tmp_path, prune_fractions=(0.0, 0.3, 0.5, 0.7))
        again = run_sweep(cfg, run_scoring(cfg))
        assert again.rows == sweep.rows

    def test_csv_written(self, sweep_run):
        cfg, _, sweep = sweep_run
        text = (cfg.output_dir / "sweep.csv").read_text()
        lines = text.strip().split("\n")
        assert lines[0] == "kind,fraction,trial,test_accuracy"
        assert len(lines) == 1 + len(sweep.rows)


class TestExportReport:
    def test_file_set_and_determinism(self, sweep_run, tmp_path):
        cfg, tables, sweep = sweep_run
        first = export_report(tables, sweep, tmp_path / "r1")
        second = export_report(tables, sweep, tmp_path / "r2")
        names = [p.name for p in first]
        assert "sweep.csv" in names and "sweep.svg" in names
        assert "corr_matrix.csv" in names and "corr_matrix.svg" in names
        assert "sorted_curves.csv" in names and "sorted_curves.svg" in names
        assert "ratio_hist.csv" in names and "ratio_hist.svg" in names
        for kind in tables:
            assert f"scores_{kind.file_label}.csv" in names
            assert f"scores_{kind.file_label}.svg" in names
        for a, b in zip(first, second):
            assert a.name == b.name
            assert a.read_bytes() == b.read_bytes()

    def test_corr_matrix_content(self, sweep_run, tmp_path):
        cfg, tables, sweep = sweep_run
        export_report(tables, sweep, tmp_path / "r")
        lines = (tmp_path / "r" / "corr_matrix.csv").read_text().strip().split("\n")
        n_kinds = len(tables)
        assert len(lines) == n_kinds + 1
        # unit diagonal
        for i, line in enumerate(lines[1:]):
            assert line.split(",")[i + 1] == "1.0"

    def test_empty_sweep_gives_header_only_csv(self, sweep_run, tmp_path):
        from prunekit.harness import SweepResult

        cfg, tables, _ = sweep_run
        export_report(tables, SweepResult(()), tmp_path / "empty")
        assert (tmp_path / "empty" / "sweep.csv").read_text() == "kind,fraction,trial,test_accuracy\n"

    def test_sorted_curves_reference_is_ascending(self, sweep_run, tmp_path):
        cfg, tables, sweep = sweep_run
        export_report(tables, sweep, tmp_path / "s")
        lines = (tmp_path / "s" / "sorted_curves.csv").read_text().strip().split("\n")
        header = lines[0].split(",")
        ref_col = header.index("grand@0")
        values = [float(line.split(",")[ref_col]) for line in lines[1:]]
        assert values == sorted(values)

    def test_svgs_are_wellformed_xml(self, sweep_run, tmp_path):
        import xml.etree.ElementTree as ET

        cfg, tables, sweep = sweep_run
        for path in export_report(tables, sweep, tmp_path / "x"):
            if path.suffix == ".svg":
                ET.fromstring(path.read_text())
