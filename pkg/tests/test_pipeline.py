import numpy as np
import pytest

from stancekit import gbdt
from stancekit.corpus import Stance
from stancekit.features import FEATURE_NAMES, FeatureVector
from stancekit.gbdt import BoostedEnsemble, TrainParams, Tree
from stancekit.pipeline import (ONE_STAGE, TWO_STAGE, GridPointResult,
                                OversampleSpec, StagePlan, TrainedPipeline,
                                _apply_oversample, grid_search_from_features,
                                load_bundle, predict_from_features,
                                predict_matrix, save_bundle,
                                train_from_features)
from stancekit.scoring import ScoreReport, class_recall

PARAMS = TrainParams(n_rounds=80, learning_rate=0.2, max_depth=3, seed=3)


def _fv(values: dict) -> FeatureVector:
    base = {name: 0 for name in FEATURE_NAMES}
    base.update(values)
    return FeatureVector(**base)


def _rows_to_truth(rows):
    return [stance for _, stance, _ in rows]


# -- plan / bundle plumbing ---------------------------------------------------


def test_stage_plan_round_trip():
    plan = StagePlan(variant=TWO_STAGE, stage1=PARAMS, stage2=PARAMS.replace(seed=9),
                     oversample=OversampleSpec())
    back = StagePlan.from_dict(plan.to_dict())
    assert back == plan
    plain = StagePlan(variant=ONE_STAGE, stage1=PARAMS, stage2=PARAMS)
    assert StagePlan.from_dict(plain.to_dict()) == plain


def test_stage_plan_rejects_unknown_variant():
    with pytest.raises(ValueError, match="unknown plan variant"):
        StagePlan(variant="3stage")


def test_stage_plan_validates_feature_masks():
    with pytest.raises(ValueError, match="unknown feature name"):
        StagePlan(stage1_features=("word_overlap", "nope"))
    with pytest.raises(ValueError, match="cannot be empty"):
        StagePlan(stage2_features=())
    plan = StagePlan(stage1_features=("word_overlap", "cosine_tfidf"),
                     stage2_features=("refute", "sentiment_body"))
    assert StagePlan.from_dict(plan.to_dict()) == plan


def test_per_stage_feature_masks_train_and_predict(small_resources):
    res, train_rows, test_rows = small_resources
    plan = StagePlan(
        variant=TWO_STAGE,
        stage1=PARAMS.replace(n_rounds=15),
        stage2=PARAMS.replace(n_rounds=15),
        stage1_features=("word_overlap", "ngram_overlap", "cosine_tfidf",
                         "wmdistance"),
        stage2_features=("refute", "refute_intro", "sentiment_body",
                         "word_overlap"),
    )
    tp = train_from_features(plan, train_rows, res.fingerprint())
    assert tp.stage1.n_features == 4
    assert tp.stage2.n_features == 4
    pred = predict_from_features(tp, test_rows)
    truth = _rows_to_truth(test_rows)
    report = ScoreReport.from_predictions(truth, pred)
    # overlap features alone still separate related from unrelated well
    assert report.relative >= 0.7


# -- oversampling at the feature-row level ------------------------------------


def test_apply_oversample_matches_to_match_count():
    labels = ([Stance.AGREE] * 5 + [Stance.DISAGREE] * 2 +
              [Stance.DISCUSS] * 3 + [Stance.UNRELATED] * 4)
    X = np.arange(len(labels), dtype=float).reshape(-1, 1)
    X2, labels2 = _apply_oversample(X, list(labels), OversampleSpec(), seed=0)
    assert labels2.count(Stance.DISAGREE) == labels2.count(Stance.AGREE) == 5
    assert labels2[: len(labels)] == labels
    # duplicated rows replicate existing disagree feature rows
    disagree_values = {X[i, 0] for i, s in enumerate(labels) if s == Stance.DISAGREE}
    for x, s in zip(X2[len(labels):], labels2[len(labels):]):
        assert s == Stance.DISAGREE
        assert x[0] in disagree_values


# -- routing ------------------------------------------------------------------


def _constant_tree(weight: float) -> Tree:
    return Tree.single_leaf(weight)


def _threshold_tree(feature: int, threshold: float, left: float, right: float) -> Tree:
    return Tree([feature, -1, -1], [threshold, 0.0, 0.0], [1, -1, -1],
                [2, -1, -1], [0.0, left, right])


def _manual_two_stage() -> TrainedPipeline:
    # stage 1: related iff feature0 < 0.5
    stage1 = BoostedEnsemble(
        n_classes=2, n_features=2, base_score=0.0, params=TrainParams(n_rounds=1),
        trees=[[_threshold_tree(0, 0.5, 2.0, -2.0),
                _threshold_tree(0, 0.5, -2.0, 2.0)]],
    )
    # stage 2: agree iff feature1 < 0.5 else discuss; disagree never wins
    stage2 = BoostedEnsemble(
        n_classes=3, n_features=2, base_score=0.0, params=TrainParams(n_rounds=1),
        trees=[[_threshold_tree(1, 0.5, 2.0, -2.0),
                _constant_tree(-3.0),
                _threshold_tree(1, 0.5, -2.0, 2.0)]],
    )
    plan = StagePlan(variant=TWO_STAGE, stage1=TrainParams(n_rounds=1),
                     stage2=TrainParams(n_rounds=1))
    return TrainedPipeline(plan=plan, fingerprint="fp", stage1=stage1, stage2=stage2)


def test_two_stage_routing():
    tp = _manual_two_stage()
    X = np.array([
        [0.0, 0.0],  # related, agree side
        [0.0, 1.0],  # related, discuss side
        [1.0, 0.0],  # unrelated, stage 2 would say agree but must not run
        [1.0, 1.0],
    ])
    pred = predict_matrix(tp, X)
    assert pred == [Stance.AGREE, Stance.DISCUSS, Stance.UNRELATED, Stance.UNRELATED]


def test_two_stage_never_mixes_partitions():
    tp = _manual_two_stage()
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (200, 2))
    stage1_says_unrelated = gbdt.predict_label(tp.stage1, X) == 1
    pred = predict_matrix(tp, X)
    for unrelated, stance in zip(stage1_says_unrelated, pred):
        assert (stance is Stance.UNRELATED) == bool(unrelated)


def test_one_stage_predicts_all_four():
    stage1 = BoostedEnsemble(
        n_classes=4, n_features=1, base_score=0.0, params=TrainParams(n_rounds=1),
        trees=[[_threshold_tree(0, 0.5, 3.0, -3.0),
                _constant_tree(0.0),
                _constant_tree(-1.0),
                _threshold_tree(0, 0.5, -3.0, 3.0)]],
    )
    plan = StagePlan(variant=ONE_STAGE, stage1=TrainParams(n_rounds=1),
                     stage2=TrainParams(n_rounds=1))
    tp = TrainedPipeline(plan=plan, fingerprint="fp", stage1=stage1)
    pred = predict_matrix(tp, np.array([[0.0], [1.0]]))
    assert pred == [Stance.AGREE, Stance.UNRELATED]


# -- training guards ----------------------------------------------------------


def test_train_requires_labels():
    rows = [(0, None, _fv({}))]
    plan = StagePlan(variant=ONE_STAGE, stage1=TrainParams(n_rounds=1),
                     stage2=TrainParams(n_rounds=1))
    with pytest.raises(ValueError, match="labeled"):
        train_from_features(plan, rows, "fp")


def test_train_two_stage_requires_related():
    rows = [(i, Stance.UNRELATED, _fv({"word_overlap": 0.1 * i})) for i in range(6)]
    plan = StagePlan(variant=TWO_STAGE, stage1=TrainParams(n_rounds=1),
                     stage2=TrainParams(n_rounds=1))
    with pytest.raises(ValueError, match="no related instances"):
        train_from_features(plan, rows, "fp")


def test_predict_fingerprint_mismatch():
    tp = _manual_two_stage()
    rows = [(0, None, _fv({}))]
    with pytest.raises(ValueError, match="fingerprint"):
        predict_from_features(tp, rows, fingerprint="other")


# -- bundles ------------------------------------------------------------------


def test_bundle_round_trip(tmp_path, small_resources):
    res, train_rows, test_rows = small_resources
    plan = StagePlan(variant=TWO_STAGE, stage1=PARAMS.replace(n_rounds=10),
                     stage2=PARAMS.replace(n_rounds=10))
    tp = train_from_features(plan, train_rows[:600], res.fingerprint())
    resources_dir = tmp_path / "resources"
    resources_dir.mkdir()
    (resources_dir / "marker.txt").write_text("x", encoding="utf-8")
    bundle = tmp_path / "bundle"
    save_bundle(tp, bundle, resources_dir=resources_dir)
    assert (bundle / "plan.json").exists()
    assert (bundle / "stage1.model.json").exists()
    assert (bundle / "stage2.model.json").exists()
    assert (bundle / "resources" / "marker.txt").exists()
    loaded = load_bundle(bundle)
    assert loaded.plan == tp.plan
    assert loaded.fingerprint == tp.fingerprint
    a = predict_from_features(tp, test_rows[:300])
    b = predict_from_features(loaded, test_rows[:300])
    assert a == b


def test_load_bundle_requires_stage2(tmp_path):
    tp = _manual_two_stage()
    bundle = tmp_path / "bundle"
    save_bundle(tp, bundle)
    (bundle / "stage2.model.json").unlink()
    with pytest.raises(ValueError, match="missing stage2"):
        load_bundle(bundle)


# -- learned behavior on the synthetic corpus ---------------------------------


@pytest.fixture(scope="module")
def trained_variants(small_resources):
    res, train_rows, test_rows = small_resources
    fp = res.fingerprint()
    truth = _rows_to_truth(test_rows)
    out = {}
    for key, variant, over in (("two", TWO_STAGE, None),
                               ("one", ONE_STAGE, None),
                               ("two_over", TWO_STAGE, OversampleSpec())):
        plan = StagePlan(variant=variant, stage1=PARAMS, stage2=PARAMS,
                         oversample=over)
        tp = train_from_features(plan, train_rows, fp)
        pred = predict_from_features(tp, test_rows)
        out[key] = ScoreReport.from_predictions(truth, pred)
    return out


def test_pipeline_learns_the_task(trained_variants):
    assert trained_variants["two"].relative >= 0.85
    assert trained_variants["one"].relative >= 0.85


def test_two_stage_not_worse_than_one_stage(trained_variants):
    assert (trained_variants["two"].relative
            >= trained_variants["one"].relative - 0.005)


def test_oversampling_raises_disagree_recall(trained_variants):
    plain = class_recall(trained_variants["two"].confusion, Stance.DISAGREE)
    resampled = class_recall(trained_variants["two_over"].confusion, Stance.DISAGREE)
    assert resampled > plain


def test_oversampling_never_touches_test_rows(small_resources):
    res, train_rows, test_rows = small_resources
    fp = res.fingerprint()
    plan = StagePlan(variant=TWO_STAGE, stage1=PARAMS.replace(n_rounds=5),
                     stage2=PARAMS.replace(n_rounds=5), oversample=OversampleSpec())
    tp = train_from_features(plan, train_rows, fp)
    assert len(predict_from_features(tp, test_rows)) == len(test_rows)


def _resources_with_other_seed(res):
    from stancekit.features import FeatureResources

    return FeatureResources(
        cfg=res.cfg, tfidf=res.tfidf, embeddings=res.embeddings, lda=res.lda,
        sentiment=res.sentiment, wmd_cap=res.wmd_cap,
        lda_infer_iters=res.lda_infer_iters, seed=res.seed + 1,
    )


def test_dataset_level_train_and_predict(small_train_test, small_resources):
    """train()/predict() on Datasets agree with the cached-feature path."""
    from stancekit import pipeline
    from stancekit.corpus import Dataset
    from stancekit.features import extract_features

    res, _, _ = small_resources
    train_ds, test_ds = small_train_test
    sub_train = Dataset(instances=train_ds.instances[:200], bodies=train_ds.bodies)
    sub_test = Dataset(instances=test_ds.instances[:80], bodies=test_ds.bodies)
    plan = StagePlan(variant=TWO_STAGE, stage1=PARAMS.replace(n_rounds=6),
                     stage2=PARAMS.replace(n_rounds=6))
    tp = pipeline.train(plan, sub_train, res)
    assert tp.fingerprint == res.fingerprint()
    via_dataset = pipeline.predict(tp, sub_test, res)
    rows, _ = extract_features(sub_test, res)
    via_rows = predict_from_features(tp, rows, res.fingerprint())
    assert via_dataset == via_rows
    with pytest.raises(ValueError, match="fingerprint"):
        pipeline.predict(tp, sub_test, _resources_with_other_seed(res))


def test_training_determinism(small_resources, tmp_path):
    res, train_rows, _ = small_resources
    plan = StagePlan(variant=TWO_STAGE, stage1=PARAMS.replace(n_rounds=8),
                     stage2=PARAMS.replace(n_rounds=8))
    a = train_from_features(plan, train_rows[:500], res.fingerprint())
    b = train_from_features(plan, train_rows[:500], res.fingerprint())
    pa = tmp_path / "a.json"
    pb = tmp_path / "b.json"
    gbdt.save_model(a.stage1, pa)
    gbdt.save_model(b.stage1, pb)
    assert pa.read_bytes() == pb.read_bytes()


# -- grid search --------------------------------------------------------------


def _parity_fold(seed: int):
    """3-bit parity over crafted feature rows: shallow trees underfit."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(240):
        bits = rng.integers(0, 2, 3)
        parity = int(bits.sum() % 2)
        fv = _fv({
            "cosine_count": float(bits[0]),
            "cosine_tfidf": float(bits[1]),
            "doc_similarity": float(bits[2]),
            "word_overlap": float(rng.uniform(0, 1)),
        })
        stance = Stance.AGREE if parity else Stance.DISCUSS
        rows.append((i, stance, fv))
    return rows


def test_grid_search_prefers_deeper_trees_on_parity():
    folds = [(_parity_fold(0), _parity_fold(1)), (_parity_fold(2), _parity_fold(3))]
    template = StagePlan(
        variant=ONE_STAGE,
        stage1=TrainParams(n_rounds=30, learning_rate=0.3, seed=0),
        stage2=TrainParams(n_rounds=30, learning_rate=0.3, seed=0),
    )
    best, results = grid_search_from_features(template, {"max_depth": [2, 6]}, folds)
    assert len(results) == 2
    assert best.stage1.max_depth == 6


def test_grid_search_singleton():
    folds = [(_parity_fold(0), _parity_fold(1))]
    template = StagePlan(variant=ONE_STAGE,
                         stage1=TrainParams(n_rounds=5, seed=0),
                         stage2=TrainParams(n_rounds=5, seed=0))
    best, results = grid_search_from_features(template, {"max_depth": [4]}, folds)
    assert len(results) == 1
    assert best.stage1.max_depth == 4


def test_grid_search_report_size_is_product():
    folds = [(_parity_fold(0), _parity_fold(1))]
    template = StagePlan(variant=ONE_STAGE,
                         stage1=TrainParams(n_rounds=3, seed=0),
                         stage2=TrainParams(n_rounds=3, seed=0))
    grid = {"max_depth": [2, 4, 6], "learning_rate": [0.1, 0.3]}
    _, results = grid_search_from_features(template, grid, folds)
    assert len(results) == 6
    assert all(isinstance(r, GridPointResult) for r in results)


def test_grid_search_tie_prefers_fewer_rounds():
    rows = [(i, Stance.AGREE if i % 2 else Stance.DISCUSS,
             _fv({"cosine_count": float(i % 2)})) for i in range(40)]
    folds = [(rows, rows)]
    template = StagePlan(variant=ONE_STAGE,
                         stage1=TrainParams(n_rounds=5, seed=0),
                         stage2=TrainParams(n_rounds=5, seed=0))
    best, results = grid_search_from_features(
        template, {"n_rounds": [20, 10]}, folds)
    assert all(r.mean_relative == results[0].mean_relative for r in results)
    assert best.stage1.n_rounds == 10


def test_grid_search_rejects_unknown_parameter(small_train_test, tiny_cfg,
                                               synth_embeddings):
    from stancekit.features import LexiconSentimentProvider
    from stancekit.pipeline import LdaSettings, ResourceSpec, grid_search

    train, _ = small_train_test
    spec = ResourceSpec(cfg=tiny_cfg, embeddings=synth_embeddings,
                        sentiment=LexiconSentimentProvider.default(tiny_cfg),
                        lda=LdaSettings(n_topics=2, train_iters=5, infer_iters=3))
    template = StagePlan(variant=ONE_STAGE, stage1=PARAMS, stage2=PARAMS)
    with pytest.raises(ValueError, match="unknown grid parameter"):
        grid_search(template, {"bogus": [1]}, train, k=2, seed=0, spec=spec)
    with pytest.raises(ValueError, match="at least one"):
        grid_search(template, {}, train, k=2, seed=0, spec=spec)
