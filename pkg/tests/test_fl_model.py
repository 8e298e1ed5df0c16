import numpy as np
import pytest

from churnfusion import fl_model as flm
from churnfusion.errors import (
    DimensionMismatch,
    EmptyLabeledSet,
    TargetOutOfRange,
    TooFewExamples,
)
from churnfusion.synth import SynthConfig, generate_cohort


def make_labeled(rng, n=40, d=3):
    X = rng.normal(size=(n, d))
    y = np.clip(0.5 + 0.3 * X[:, 0] + 0.1 * rng.normal(size=n), 0, 1)
    return [(X[i], float(y[i])) for i in range(n)]


class TestSmogn:
    def test_no_rare_cases_identity(self):
        # all targets equal the median: every relevance score is zero
        labeled = [(np.array([float(i), 0.0]), 0.5) for i in range(10)]
        cfg = flm.SmognConfig(relevance_threshold=0.5, k_neighbors=2)
        out = flm.smogn_resample(labeled, cfg)
        assert len(out) == len(labeled)

    def test_interpolation_between_two_rare_parents(self):
        # rare pair near the origin, common-target mass far away
        labeled = [
            (np.array([0.0, 0.0]), 0.9),
            (np.array([1.0, 1.0]), 1.0),
            (np.array([10.0, 10.0]), 0.5),
            (np.array([11.0, 10.0]), 0.5),
            (np.array([10.0, 11.0]), 0.5),
        ]
        cfg = flm.SmognConfig(
            relevance_threshold=0.5, k_neighbors=2, oversample_ratio=2.0, seed=0
        )
        out = flm.smogn_resample(labeled, cfg)
        assert len(out) > 5
        for feats, target in out[5:]:
            t = feats[0]
            assert feats[1] == pytest.approx(t)  # point lies on the (0,0)-(1,1) segment
            assert 0.0 - 1e-9 <= t <= 1.0 + 1e-9
            assert 0.9 - 1e-9 <= target <= 1.0 + 1e-9

    def test_rare_region_mass_increases(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 2))
        y = np.concatenate([rng.uniform(0.45, 0.55, 80), rng.uniform(0.9, 1.0, 20)])
        labeled = [(X[i], float(y[i])) for i in range(100)]
        cfg = flm.SmognConfig(relevance_threshold=0.6, k_neighbors=5, oversample_ratio=1.0)
        out = flm.smogn_resample(labeled, cfg)
        before = np.mean([t > 0.8 for _, t in labeled])
        after = np.mean([t > 0.8 for _, t in out])
        assert after > before

    def test_originals_preserved_and_count_formula(self):
        rng = np.random.default_rng(1)
        labeled = make_labeled(rng, 30)
        cfg = flm.SmognConfig(relevance_threshold=0.7, oversample_ratio=1.5, seed=2)
        out = flm.smogn_resample(labeled, cfg)
        for (orig_f, orig_t), (out_f, out_t) in zip(labeled, out):
            assert np.array_equal(orig_f, out_f) and orig_t == out_t
        rel = flm.relevance_scores(np.array([t for _, t in labeled]))
        n_rare = int(np.sum(rel > 0.7))
        assert len(out) == 30 + int(np.ceil(1.5 * n_rare))

    def test_errors(self):
        with pytest.raises(TooFewExamples):
            flm.smogn_resample([(np.zeros(2), 0.5)], flm.SmognConfig(k_neighbors=5))
        bad = [(np.zeros(2), 1.5)] + [(np.ones(2) * i, 0.5) for i in range(6)]
        with pytest.raises(TargetOutOfRange):
            flm.smogn_resample(bad, flm.SmognConfig(k_neighbors=2))


class TestCoreg:
    def test_empty_pool_equals_plain_knn_average(self):
        rng = np.random.default_rng(2)
        labeled = make_labeled(rng, 25)
        cfg = flm.CoregConfig(seed=0)
        model = flm.coreg_train(labeled, [], smogn=None, cfg=cfg)
        X = np.array([f for f, _ in labeled])
        y = np.array([t for _, t in labeled])
        k1 = flm.KNNRegressor(X, y, cfg.k1, cfg.p1)
        k2 = flm.KNNRegressor(X, y, cfg.k2, cfg.p2)
        queries = rng.normal(size=(10, 3))
        expected = np.clip(0.5 * (k1.predict(queries) + k2.predict(queries)), 0, 1)
        got = flm.predict_fl_batch(model, queries)
        assert np.array_equal(got, expected)
        assert model.transcript == []

    def test_deterministic_transcript(self):
        rng = np.random.default_rng(3)
        labeled = make_labeled(rng, 20)
        unlabeled = [rng.normal(size=3) for _ in range(40)]
        cfg = flm.CoregConfig(max_iterations=5, pool_size=10, seed=4)
        a = flm.coreg_train(labeled, unlabeled, smogn=None, cfg=cfg)
        b = flm.coreg_train(labeled, unlabeled, smogn=None, cfg=cfg)
        assert a.transcript == b.transcript

    def test_transcript_gains_strictly_positive(self):
        rng = np.random.default_rng(4)
        labeled = make_labeled(rng, 20)
        unlabeled = [rng.normal(size=3) for _ in range(60)]
        model = flm.coreg_train(
            labeled, unlabeled, smogn=None, cfg=flm.CoregConfig(max_iterations=8, seed=5)
        )
        for _, _, _, _, gain in model.transcript:
            assert gain > 0

    def test_empty_labeled_set_rejected(self):
        with pytest.raises(EmptyLabeledSet):
            flm.coreg_train([], [np.zeros(2)])

    def test_pseudo_labels_help_on_coupled_cohort(self):
        rmse_coreg, rmse_baseline = [], []
        for seed in range(6):
            cohort = generate_cohort(
                SynthConfig(n_customers=400, coupling=0.9, labeled_fl_fraction=0.2, seed=seed)
            )
            rows = cohort.table.rows
            train, test = rows[:300], rows[300:]
            labeled = [
                (np.array(r.features), r.fl_label) for r in train if r.fl_label is not None
            ]
            unlabeled = [np.array(r.features) for r in train if r.fl_label is None]
            cfg = flm.CoregConfig(max_iterations=30, seed=seed)
            model = flm.coreg_train(labeled, unlabeled, flm.SmognConfig(seed=seed), cfg)
            baseline = flm.coreg_train(labeled, [], flm.SmognConfig(seed=seed), cfg)
            Xt = np.array([r.features for r in test])
            yt = np.array([cohort.true_fl[r.id] for r in test])
            rmse_coreg.append(np.sqrt(np.mean((flm.predict_fl_batch(model, Xt) - yt) ** 2)))
            rmse_baseline.append(
                np.sqrt(np.mean((flm.predict_fl_batch(baseline, Xt) - yt) ** 2))
            )
        assert np.mean(rmse_coreg) <= np.mean(rmse_baseline) + 1e-9


class TestPredict:
    def test_training_point_identity_with_k1(self):
        X = np.array([[0.0, 0.0], [3.0, 3.0], [6.0, 0.0]])
        y = np.array([0.2, 0.8, 0.4])
        model = flm.FLModel(
            learner1=flm.KNNRegressor(X, y, 1, 2.0), learner2=flm.KNNRegressor(X, y, 1, 5.0)
        )
        assert flm.predict_fl(model, X[1]) == 0.8

    def test_tie_break_lower_index_wins(self):
        X = np.array([[0.0], [2.0]])
        y = np.array([0.2, 0.8])
        model = flm.FLModel(
            learner1=flm.KNNRegressor(X, y, 1, 2.0), learner2=flm.KNNRegressor(X, y, 1, 5.0)
        )
        # query at 1.0 is equidistant from both training points
        assert flm.predict_fl(model, np.array([1.0])) == 0.2

    def test_output_clipped_to_unit_interval(self):
        rng = np.random.default_rng(6)
        X, y = rng.normal(size=(15, 2)), rng.uniform(0, 1, 15)
        model = flm.FLModel(
            learner1=flm.KNNRegressor(X, y, 3, 2.0), learner2=flm.KNNRegressor(X, y, 3, 5.0)
        )
        for q in rng.normal(0, 10, size=(20, 2)):
            assert 0.0 <= flm.predict_fl(model, q) <= 1.0

    def test_dimension_mismatch(self):
        model = flm.FLModel(
            learner1=flm.KNNRegressor(np.zeros((3, 2)), np.zeros(3), 1, 2.0),
            learner2=flm.KNNRegressor(np.zeros((3, 2)), np.zeros(3), 1, 5.0),
        )
        with pytest.raises(DimensionMismatch):
            flm.predict_fl(model, np.zeros(4))


def test_serialization_round_trip():
    rng = np.random.default_rng(7)
    labeled = make_labeled(rng, 15)
    model = flm.coreg_train(labeled, [], smogn=None, cfg=flm.CoregConfig())
    blob = flm.save_fl_model(model)
    assert blob[:4] == b"FLKN"
    again = flm.load_fl_model(blob)
    assert flm.save_fl_model(again) == blob
    q = rng.normal(size=3)
    assert flm.predict_fl(again, q) == flm.predict_fl(model, q)


def test_learner_diversity_enforced():
    with pytest.raises(ValueError):
        flm.CoregConfig(k1=3, k2=3, p1=2.0, p2=2.0)
