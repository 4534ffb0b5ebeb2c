import math

import numpy as np
import pytest

from raretype.lr import MhConfig
from raretype.partitions import IntegerPartition, reduce_sample
from raretype.pitman import PopulationVector
from raretype.workbench import (
    DUTCH_FIXTURE_METADATA,
    CaseOptions,
    EmptyFileError,
    ExperimentSpec,
    MissingColumnError,
    RaggedRowError,
    dutch_fixture,
    load_profiles,
    population_from_partition,
    run_case,
    run_experiment,
)


def write(path, text):
    path.write_text(text)
    return str(path)


class TestLoadProfiles:
    def test_identical_rows_collapse(self, tmp_path):
        path = write(tmp_path / "db.tsv", "L1\tL2\n14\t30\n14\t30\n14\t30\n")
        db = load_profiles(path)
        assert db.n == 3
        assert reduce_sample(db.records).blocks == ((1, 2, 3),)

    def test_column_subset_changes_identity(self, tmp_path):
        path = write(tmp_path / "db.tsv", "L1\tL2\nA\tx\nA\ty\n")
        all_cols = load_profiles(path)
        just_l1 = load_profiles(path, columns=["L1"])
        assert len(set(all_cols.records)) == 2
        assert len(set(just_l1.records)) == 1

    def test_round_trip_preserves_equality_classes(self, tmp_path):
        rows = ["a\tb", "c\tb", "a\tb", "d\te"]
        path = write(tmp_path / "db.tsv", "L1\tL2\n" + "\n".join(rows) + "\n")
        db = load_profiles(path)
        again = load_profiles(write(tmp_path / "copy.tsv", "L1\tL2\n" + "\n".join(rows) + "\n"))
        assert db.n == again.n
        assert reduce_sample(db.records) == reduce_sample(again.records)

    def test_csv_format(self, tmp_path):
        path = write(tmp_path / "db.csv", "L1,L2\n1,2\n1,2\n")
        db = load_profiles(path, format="csv")
        assert db.n == 2
        assert db.records[0] == db.records[1]

    def test_missing_column(self, tmp_path):
        path = write(tmp_path / "db.tsv", "L1\tL2\nx\ty\n")
        with pytest.raises(MissingColumnError):
            load_profiles(path, columns=["L3"])

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path / "db.tsv", "L1\tL2\nx\ty\nonly_one\n")
        with pytest.raises(RaggedRowError):
            load_profiles(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyFileError):
            load_profiles(write(tmp_path / "empty.tsv", ""))
        with pytest.raises(EmptyFileError):
            load_profiles(write(tmp_path / "header_only.tsv", "L1\tL2\n"))

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            load_profiles(write(tmp_path / "db.tsv", "L1\nx\n"), format="xlsx")


class TestDutchFixture:
    def test_shape(self):
        pi = dutch_fixture()
        assert pi.num_size_classes == 28
        assert pi.k == 557
        assert pi.n == 2085
        assert pi.s1 == 356

    def test_metadata_records_both_sizes(self):
        assert DUTCH_FIXTURE_METADATA["reported_n"] == 2037
        assert DUTCH_FIXTURE_METADATA["vector_n"] == 2085


class TestPopulationFromPartition:
    def test_dutch(self):
        pop = population_from_partition(dutch_fixture())
        assert pop.m == 557
        assert pop.probs[0] == pytest.approx(174 / 2085)
        assert math.fsum(pop.probs) == pytest.approx(1.0, abs=1e-12)
        assert pop.pop_size == 2085

    def test_all_singletons_is_uniform(self):
        pop = population_from_partition(IntegerPartition((1,), (6,)))
        assert pop.probs == (1 / 6,) * 6

    def test_full_sample_recovers_partition(self):
        pi = IntegerPartition((1, 2, 4), (3, 2, 1))
        pop = population_from_partition(pi)
        counts = np.rint(pop.as_array() * pop.pop_size).astype(int)
        individuals = np.repeat(np.arange(1, pop.m + 1), counts)
        rng = np.random.default_rng(0)
        drawn = rng.choice(individuals, size=pi.n, replace=False)
        rebuilt = IntegerPartition.from_block_sizes(np.bincount(drawn)[np.bincount(drawn) > 0])
        assert rebuilt == pi


class TestRunCase:
    def test_singleton_database_reports_diagnosis(self):
        report = run_case(IntegerPartition((1,), (1,)))
        assert report.log10_lr_eb is None
        assert any("did not converge" in note for note in report.notes)

    def test_fixture_eb_path_matches_formula(self):
        from raretype.lr import lr_empirical_bayes
        from raretype.mle import fit_mle

        pi = dutch_fixture()
        report = run_case(pi)
        fit = fit_mle(pi.add_singleton())
        expected = math.log10(lr_empirical_bayes(pi.n, fit.params()))
        assert report.log10_lr_eb == pytest.approx(expected, abs=1e-12)

    def test_row_permutation_invariance(self, tmp_path):
        rows = ["a", "b", "a", "c", "b", "b"]
        p1 = write(tmp_path / "one.tsv", "L\n" + "\n".join(rows) + "\n")
        p2 = write(tmp_path / "two.tsv", "L\n" + "\n".join(reversed(rows)) + "\n")
        assert run_case(load_profiles(p1)) == run_case(load_profiles(p2))

    def test_full_report_with_population(self):
        pi = IntegerPartition((1, 2, 4, 8), (20, 6, 2, 1))
        pop = population_from_partition(dutch_fixture())
        options = CaseOptions(
            population=pop,
            matched_rank=300,
            mh=MhConfig(iterations=4000, burn_in=500, thinning=50, seed=5),
        )
        report = run_case(pi, options)
        assert report.log10_lr_eb is not None
        assert report.log10_lr_true is not None
        assert report.log10_lr_freq is not None
        assert report.diff1 == pytest.approx(report.log10_lr_eb - report.log10_lr_true)
        assert report.diff2 == pytest.approx(report.log10_lr_eb - report.log10_lr_freq)


def tiny_spec(replicates=2, seed=99):
    return ExperimentSpec(
        population=dutch_fixture(),
        sample_size=31,
        replicates=replicates,
        seed=seed,
        mh=MhConfig(iterations=3000, burn_in=500, thinning=50),
    )


class TestExperiment:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(population=dutch_fixture(), sample_size=1)
        with pytest.raises(ValueError):
            ExperimentSpec(population=dutch_fixture(), replicates=0)
        with pytest.raises(ValueError):
            ExperimentSpec(population=IntegerPartition((1,), (5,)), sample_size=10)
        with pytest.raises(ValueError):
            ExperimentSpec(population=PopulationVector(probs=(0.5, 0.5)), sample_size=2)

    def test_single_replicate_summary_equals_row(self, monkeypatch):
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        result = run_experiment(tiny_spec(replicates=1))
        (row,) = result.rows
        for col in ("log10_lr", "log10_lr_true", "log10_lr_freq", "diff1", "diff2"):
            stats = result.summary[col]
            value = getattr(row, col)
            assert stats.minimum == stats.maximum == stats.mean == value
            assert stats.sd == 0.0

    def test_summary_recomputable_from_rows(self, monkeypatch):
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        result = run_experiment(tiny_spec(replicates=3))
        assert result.recompute_summary() == result.summary

    def test_deterministic_and_parallel_consistent(self, monkeypatch):
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        serial = run_experiment(tiny_spec(replicates=3))
        monkeypatch.setenv("RARETYPE_THREADS", "3")
        parallel = run_experiment(tiny_spec(replicates=3))
        assert serial == parallel

    def test_rare_type_conditioning_holds(self, monkeypatch):
        # the suspect's type is by construction unseen, so every replicate
        # fits on a partition with an extra singleton: s1 >= 1
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        result = run_experiment(tiny_spec(replicates=2))
        for row in result.rows:
            assert row.log10_lr_true is not None
            assert row.log10_lr_freq is not None

    def test_conditioning_failure_raises(self, monkeypatch):
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        # single-type population: the suspect always matches the database
        spec = ExperimentSpec(
            population=IntegerPartition((50,), (1,)),
            sample_size=3,
            replicates=1,
            seed=0,
            mh=MhConfig(iterations=1000, burn_in=100, thinning=10),
            max_conditioning_attempts=50,
        )
        with pytest.raises(RuntimeError, match="too concentrated"):
            run_experiment(spec)

    def test_rows_csv_shape(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RARETYPE_THREADS", "1")
        result = run_experiment(tiny_spec(replicates=2))
        out = tmp_path / "rows.csv"
        with out.open("w") as fh:
            result.write_rows_csv(fh)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("replicate,alpha_hat,theta_hat,log10_lr")
        assert len(lines) == 3
