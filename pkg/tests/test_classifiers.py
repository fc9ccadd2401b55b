import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cf_audit.classifiers import (BlackBox, CountingBlackBox, load_model, log_loss_and_grad,
                                  model_from_dict, model_to_dict, save_model, train_forest,
                                  train_knn, train_logreg, train_rbf_svm, train_tree)
from cf_audit.classifiers.io import dumps_model
from cf_audit.oracles import PocketGeometry, pocket_classifier

XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_Y = np.array([0, 1, 1, 0])


def blobs(rng, n=200, sep=4.0):
    X = np.vstack([rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + sep])
    y = np.repeat([0, 1], n)
    return X, y


def test_tree_fits_xor_exactly():
    # the first split has zero Gini gain, so it must still be allowed
    t = train_tree(XOR_X, XOR_Y)
    assert np.array_equal(t.predict(XOR_X), XOR_Y)


def test_tree_single_class_is_constant(rng):
    X = rng.normal(size=(30, 3))
    t = train_tree(X, np.full(30, 1))
    assert t.n_nodes == 1
    assert np.all(t.predict(rng.normal(size=(100, 3))) == 1)


def test_tree_paths_cover_leaves():
    t = train_tree(XOR_X, XOR_Y)
    leaves = [leaf for leaf, _ in t.paths()]
    assert sorted(leaves) == sorted(set(t.apply(XOR_X).tolist()))


def test_tree_depth_limit(moons):
    tr, _ = moons
    t = train_tree(tr.X, tr.y, max_depth=2)
    assert max(len(p) for _, p in t.paths()) <= 2


def test_forest_of_one_unbootstrapped_tree_equals_tree(moons, rng):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=1, bootstrap=False, feature_frac=None, rng=0)
    t = train_tree(tr.X, tr.y)
    probe = rng.uniform(-3, 3, size=(2000, 2))
    assert np.array_equal(f.predict(probe), t.predict(probe))


def test_rf200_accuracy_on_moons(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=200, rng=0)
    assert np.mean(f.predict(te.X) == te.y) >= 0.95


def test_forest_confidence_is_vote_share(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=7, rng=1)
    c = f.predict_confidence(te.X)
    assert np.allclose(c.sum(axis=1), 1.0)
    assert np.allclose(c * 7, np.round(c * 7))
    assert np.array_equal(f.predict(te.X), f.classes_[np.argmax(c, axis=1)])


def test_forest_rejects_zero_trees(moons):
    with pytest.raises(ValueError):
        train_forest(moons[0].X, moons[0].y, n_trees=0)


def test_forest_is_seeded(moons):
    tr, _ = moons
    a = dumps_model(train_forest(tr.X, tr.y, n_trees=5, rng=3))
    b = dumps_model(train_forest(tr.X, tr.y, n_trees=5, rng=3))
    assert a == b


def test_knn_predicts_own_label_on_training_points(moons):
    tr, _ = moons
    m = train_knn(tr.X, tr.y, k=1)
    assert np.array_equal(m.predict(tr.X), tr.y)


def test_knn_k_too_large():
    with pytest.raises(ValueError):
        train_knn(XOR_X, XOR_Y, k=5)


def test_svm_separates_blobs(rng):
    X, y = blobs(rng)
    Xt, yt = blobs(np.random.default_rng(99))
    m = train_rbf_svm(X, y)
    assert np.mean(m.predict(Xt) == yt) >= 0.99


def test_svm_tiny_gamma_is_constant(rng):
    X, y = blobs(rng, n=50)
    y = np.r_[np.zeros(70, int), np.ones(30, int)]
    m = train_rbf_svm(X, y, gamma=1e-12)
    assert len(np.unique(m.predict(rng.normal(size=(500, 2)) * 5))) == 1


def test_logreg_separates_blobs(rng):
    X, y = blobs(rng)
    m = train_logreg(X, y)
    assert np.mean(m.predict(X) == y) >= 0.99


def test_gradient_matches_central_differences(rng):
    X = rng.normal(size=(80, 3))
    y = (rng.random(80) < 0.5).astype(float)
    h = 1e-6
    for _ in range(20):
        p = rng.normal(size=4) * 2
        _, g = log_loss_and_grad(p, X, y, l2=0.1)
        fd = np.array([(log_loss_and_grad(p + h * e, X, y, 0.1)[0]
                        - log_loss_and_grad(p - h * e, X, y, 0.1)[0]) / (2 * h)
                       for e in np.eye(4)])
        assert np.max(np.abs(fd - g)) < 1e-5


def test_multiclass_rejected_where_unsupported(rng):
    X = rng.normal(size=(30, 2))
    y = np.arange(30) % 3
    with pytest.raises(ValueError):
        train_logreg(X, y)
    with pytest.raises(ValueError):
        train_rbf_svm(X, y)


def _models(tr):
    return [
        train_tree(tr.X, tr.y, max_depth=5),
        train_forest(tr.X, tr.y, n_trees=10, rng=0),
        train_knn(tr.X, tr.y, k=3),
        train_logreg(tr.X, tr.y),
        train_rbf_svm(tr.X, tr.y),
        pocket_classifier(PocketGeometry()),
    ]


def test_round_trip_reproduces_predictions(moons, tmp_path, rng):
    tr, _ = moons
    probe = rng.uniform(-3, 3, size=(1000, 2))
    for m in _models(tr):
        path = tmp_path / "m.json"
        save_model(m, path, meta={"k": 1})
        back = load_model(path)
        assert np.array_equal(back.predict(probe), m.predict(probe))
        if getattr(m, "has_confidence", False):
            assert np.array_equal(back.predict_confidence(probe), m.predict_confidence(probe))
        assert dumps_model(back, {"k": 1}) == path.read_text().strip()


def test_bad_model_files():
    with pytest.raises(ValueError):
        model_from_dict({"format": "other"})
    d = model_to_dict(pocket_classifier(PocketGeometry()))
    with pytest.raises(ValueError):
        model_from_dict({**d, "version": 99})
    with pytest.raises(ValueError):
        model_from_dict({**d, "family": "perceptron"})
    json.dumps(d)


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2), st.integers(0, 5))
def test_predictions_are_valid_labels_anywhere(point, k):
    m = _FUZZ_MODELS[k]
    lab = m.predict(np.array([point]))
    assert lab.shape == (1,) and lab[0] in m.classes_


def test_models_satisfy_black_box_protocol(moons):
    for m in _models(moons[0]):
        assert isinstance(m, BlackBox)


def test_counting_wrapper(moons):
    m = CountingBlackBox(train_knn(moons[0].X, moons[0].y))
    m.predict(np.zeros((5, 2)))
    m.predict(np.zeros((2, 2)))
    assert m.queries == 7


def _fuzz_models():
    from conftest import moons_split
    return _models(moons_split()[0])


_FUZZ_MODELS = _fuzz_models()
