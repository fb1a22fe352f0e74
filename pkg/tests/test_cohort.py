import numpy as np
import pytest

from recurrisk.cohort import (
    Cohort,
    ColumnSchema,
    ConstantFeatureWarning,
    SurvivalRecord,
    SyntheticSpec,
    apply_normalization,
    generate_synthetic,
    load_cohort,
    write_cohort,
    zscore_normalize,
)
from recurrisk.errors import (
    CalibrationError,
    EmptyCohortError,
    InvalidParameterError,
    NoInformativeFeaturesError,
    RowParseError,
    SchemaError,
)
from recurrisk.metrics import c_index

from conftest import make_cohort


class TestLoadCohort:
    def test_single_row_file(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("id,t,e,x\np1,12.0,1,0.5\n")
        cohort = load_cohort(path, ColumnSchema(time_column="t", event_column="e"))
        assert len(cohort) == 1
        rec = cohort.records[0]
        assert (rec.id, rec.time, rec.event, rec.features) == ("p1", 12.0, 1, (0.5,))

    def test_bad_event_value_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,t,e,x\np1,12.0,2,0.5\n")
        with pytest.raises(RowParseError) as err:
            load_cohort(path, ColumnSchema(time_column="t", event_column="e"))
        assert err.value.row == 1
        assert err.value.column == "e"

    def test_nonpositive_time_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,time,event,x\np1,0.0,1,0.5\n")
        with pytest.raises(RowParseError) as err:
            load_cohort(path)
        assert err.value.column == "time"

    def test_non_numeric_feature_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,time,event,x\np1,3.0,1,abc\n")
        with pytest.raises(RowParseError) as err:
            load_cohort(path)
        assert err.value.column == "x"

    def test_missing_value_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,time,event,x\np1,3.0,1,\n")
        with pytest.raises(RowParseError):
            load_cohort(path)

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,when,event,x\np1,3.0,1,0.5\n")
        with pytest.raises(SchemaError):
            load_cohort(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(EmptyCohortError):
            load_cohort(path)

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("id,time,event,x\n")
        with pytest.raises(EmptyCohortError):
            load_cohort(path)

    def test_demo_cohort_has_186_records(self):
        cohort = load_cohort("data/demo_cohort.csv")
        assert len(cohort) == 186

    def test_round_trip(self, tmp_path, rng):
        cohort = make_cohort(rng.exponential(5, 20) + 0.1, rng.integers(0, 2, 20),
                             rng.standard_normal((20, 3)))
        path = tmp_path / "rt.csv"
        write_cohort(cohort, path)
        back = load_cohort(path)
        assert back.feature_names == cohort.feature_names
        assert back.ids() == cohort.ids()
        assert np.array_equal(back.times(), cohort.times())
        assert np.array_equal(back.events(), cohort.events())
        assert np.array_equal(back.matrix(), cohort.matrix())


class TestRecordInvariants:
    def test_time_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            SurvivalRecord("a", -1.0, 1, (0.0,))

    def test_event_must_be_binary(self):
        with pytest.raises(InvalidParameterError):
            SurvivalRecord("a", 1.0, 2, (0.0,))

    def test_feature_count_must_match(self):
        rec = SurvivalRecord("a", 1.0, 1, (0.0, 1.0))
        with pytest.raises(SchemaError):
            Cohort(("x0",), (rec,))

    def test_duplicate_feature_names_rejected(self):
        rec = SurvivalRecord("a", 1.0, 1, (0.0, 1.0))
        with pytest.raises(SchemaError):
            Cohort(("x0", "x0"), (rec,))


class TestZscore:
    def test_hand_case(self):
        cohort = make_cohort([1, 2, 3], [1, 1, 1], [[1.0], [2.0], [3.0]])
        out = zscore_normalize(cohort)
        assert np.allclose(out.matrix().ravel(), [-1.0, 0.0, 1.0])
        mean, std = out.normalization["x0"]
        assert mean == 2.0 and std == 1.0

    def test_constant_column_dropped_with_warning(self):
        cohort = make_cohort([1, 2, 3], [1, 1, 1],
                             np.column_stack([[5.0, 5.0, 5.0], [1.0, 2.0, 4.0]]))
        with pytest.warns(ConstantFeatureWarning):
            out = zscore_normalize(cohort)
        assert out.feature_names == ("x1",)

    def test_all_constant_fails(self):
        cohort = make_cohort([1, 2], [1, 1], [[5.0], [5.0]])
        with pytest.raises(NoInformativeFeaturesError):
            zscore_normalize(cohort)

    def test_idempotent_on_standardized_input(self, rng):
        X = rng.standard_normal((50, 2))
        X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
        cohort = make_cohort(rng.exponential(3, 50) + 0.1, rng.integers(0, 2, 50), X)
        out = zscore_normalize(cohort)
        assert np.max(np.abs(out.matrix() - X)) < 1e-12

    def test_normalized_columns_are_standard(self, rng):
        cohort = make_cohort(rng.exponential(3, 40) + 0.1, rng.integers(0, 2, 40),
                             rng.uniform(5, 30, (40, 3)))
        out = zscore_normalize(cohort)
        X = out.matrix()
        assert np.max(np.abs(X.mean(axis=0))) < 1e-9
        assert np.max(np.abs(X.std(axis=0, ddof=1) - 1)) < 1e-9

    def test_train_stats_applied_to_heldout_preserves_rank_order(self, rng):
        train = make_cohort(rng.exponential(3, 30) + 0.1, rng.integers(0, 2, 30),
                            rng.uniform(0, 10, (30, 2)))
        held = make_cohort(rng.exponential(3, 15) + 0.1, rng.integers(0, 2, 15),
                           rng.uniform(0, 10, (15, 2)))
        fitted = zscore_normalize(train)
        out = apply_normalization(held, fitted.normalization)
        # training split exactly standardized
        assert np.max(np.abs(fitted.matrix().mean(axis=0))) < 1e-9
        # held-out rank order unchanged per column
        for j in range(2):
            assert np.array_equal(np.argsort(out.matrix()[:, j]),
                                  np.argsort(held.matrix()[:, j]))


class TestSyntheticGenerator:
    def test_null_coefficients_give_chance_concordance(self):
        spec = SyntheticSpec(n=2000, true_coefficients=(0.0, 0.0), seed=11)
        cohort, eta = generate_synthetic(spec)
        assert np.all(eta == 0.0)
        # score everything by an independent random draw: chance level
        scores = np.random.default_rng(0).standard_normal(len(cohort))
        c = c_index(cohort.times(), cohort.events(), scores).c_index
        assert abs(c - 0.5) < 0.05

    def test_same_seed_identical(self):
        spec = SyntheticSpec(n=200, true_coefficients=(0.5, -0.5), seed=99)
        a, ea = generate_synthetic(spec)
        b, eb = generate_synthetic(spec)
        assert a == b
        assert np.array_equal(ea, eb)

    def test_true_scores_concordance_frozen(self, linear_cohort):
        cohort, eta = linear_cohort
        c = c_index(cohort.times(), cohort.events(), eta).c_index
        assert c >= 0.70
        assert abs(c - 0.7894413799806412) < 1e-12  # frozen regression value

    def test_censoring_calibration_hits_target(self):
        for target in (0.1, 0.4, 0.7):
            spec = SyntheticSpec(n=1000, true_coefficients=(1.0,), seed=13,
                                 censoring_rate_target=target)
            cohort, _ = generate_synthetic(spec)
            realized = 1.0 - cohort.events().mean()
            assert abs(realized - target) <= 0.05

    def test_event_fraction_monotone_in_target(self):
        fractions = []
        for target in (0.1, 0.4, 0.7):
            spec = SyntheticSpec(n=1000, true_coefficients=(1.0,), seed=13,
                                 censoring_rate_target=target)
            cohort, _ = generate_synthetic(spec)
            fractions.append(cohort.events().mean())
        assert fractions[0] > fractions[1] > fractions[2]

    def test_zero_target_means_no_censoring(self):
        spec = SyntheticSpec(n=100, true_coefficients=(1.0,), seed=3,
                             censoring_rate_target=0.0)
        cohort, _ = generate_synthetic(spec)
        assert cohort.events().sum() == 100

    def test_unreachable_target_raises(self):
        # n=5 quantizes achievable fractions to multiples of 0.2
        spec = SyntheticSpec(n=5, true_coefficients=(1.0,), seed=3,
                             censoring_rate_target=0.9)
        with pytest.raises(CalibrationError):
            generate_synthetic(spec)

    def test_spec_validation(self):
        with pytest.raises(InvalidParameterError):
            SyntheticSpec(n=1, true_coefficients=(1.0,))
        with pytest.raises(InvalidParameterError):
            SyntheticSpec(n=10, true_coefficients=(1.0,), weibull_shape=0.0)
        with pytest.raises(InvalidParameterError):
            SyntheticSpec(n=10, true_coefficients=(1.0,), censoring_rate_target=1.0)

    def test_from_json_roundtrip(self):
        doc = {"n": 50, "true_coefficients": [1.0, -1.0], "weibull_shape": 2.0,
               "weibull_scale": 12.0, "censoring_rate_target": 0.2,
               "nonlinear": True, "seed": 5}
        spec = SyntheticSpec.from_json(doc)
        assert spec.n == 50
        assert spec.true_coefficients == (1.0, -1.0)
        assert spec.nonlinear is True

    def test_nonlinear_flag_changes_scores(self):
        base = SyntheticSpec(n=100, true_coefficients=(1.0, -1.0), seed=4)
        bent = SyntheticSpec(n=100, true_coefficients=(1.0, -1.0), seed=4,
                             nonlinear=True)
        _, eta_base = generate_synthetic(base)
        _, eta_bent = generate_synthetic(bent)
        assert not np.allclose(eta_base, eta_bent)
