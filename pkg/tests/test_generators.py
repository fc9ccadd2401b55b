import numpy as np
import pytest

from cf_audit.classifiers import train_forest
from cf_audit.generators import (GENERATORS, NoCounterfactualError, fixed_point, get_generator,
                                 growing_spheres, hcls, lore_lite, nearest_training_enemy)
from cf_audit.oracles import HalfPlaneClassifier, RadialClassifier, grid_closest_enemy


class Constant:
    classes_ = np.array([0, 1])
    has_confidence = True

    def predict(self, X):
        return np.zeros(np.atleast_2d(X).shape[0], dtype=int)

    def predict_confidence(self, X):
        return np.tile([1.0, 0.0], (np.atleast_2d(X).shape[0], 1))


RADIAL = RadialClassifier(center=(0.0, 0.0), radius=1.0)


@pytest.mark.parametrize("seed", range(5))
def test_gs_on_radial_classifier(seed):
    cf = growing_spheres(np.zeros(2), RADIAL, eta=0.1, rng=seed)
    width = cf.info["layer_width"]
    assert 1.0 <= cf.distance <= 1.0 + width
    assert RADIAL.predict(cf.point[None])[0] == 1


def test_gs_shrinks_when_first_ball_has_enemies():
    cf = growing_spheres(np.array([0.95, 0.0]), RADIAL, eta=0.5, rng=0)
    assert cf.info["layer_width"] < 0.05 + 1e-12
    assert cf.distance <= 0.05 + cf.info["layer_width"]


def test_gs_matches_grid_oracle(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=3, rng=0)
    for i in range(8):
        x = te.X[i]
        cf = growing_spheres(x, f, eta=0.05, rng=i)
        half = max(2.0 * cf.distance, 0.1)
        spacing = 2 * half / 800 * np.sqrt(2)
        best = grid_closest_enemy(x, f, half)
        assert cf.distance <= best + cf.info["layer_width"] + spacing
        assert cf.distance >= best - spacing


def test_gs_constant_classifier_fails():
    with pytest.raises(NoCounterfactualError):
        growing_spheres(np.zeros(2), Constant(), eta=1.0, max_radius=10, per_layer=50, rng=0)


def test_gs_bad_parameters():
    with pytest.raises(ValueError):
        growing_spheres(np.zeros(2), RADIAL, eta=0)


@pytest.mark.parametrize("seed", range(5))
def test_hcls_confidence_at_least_gs(seed):
    x = np.zeros(2)
    gs = growing_spheres(x, RADIAL, rng=seed)
    hc = hcls(x, RADIAL, budget=2.5, rng=seed)
    conf = lambda p: RADIAL.predict_confidence(p[None])[0, 1]
    assert conf(hc.point) >= conf(gs.point)
    assert hc.distance <= 2.5 + 1e-12


def test_hcls_errors():
    with pytest.raises(NoCounterfactualError):
        hcls(np.zeros(2), RADIAL, budget=0.5, rng=0)
    with pytest.raises(NoCounterfactualError):
        hcls(np.zeros(2), RADIAL, budget=2.0, iters=0, rng=0)
    with pytest.raises(ValueError):
        hcls(np.zeros(2), RADIAL, budget=0.0)
    with pytest.raises(ValueError):
        hcls(np.zeros(2), HalfPlaneClassifier.__new__(_NoConf), budget=1.0)


class _NoConf(HalfPlaneClassifier):
    has_confidence = False


@pytest.mark.parametrize("seed", range(5))
def test_lore_changes_only_the_boundary_feature(seed):
    f = HalfPlaneClassifier(axis=0, threshold=0.5)
    x = np.array([0.2, 0.9])
    cf = lore_lite(x, f, rng=seed)
    assert cf.point[1] == x[1]
    assert cf.point[0] > 0.5
    assert not cf.info["fallback"]


def test_lore_fidelity_on_radial_classifier():
    cf = lore_lite(np.array([0.3, 0.2]), RADIAL, rng=0)
    assert cf.info["fidelity"] >= 0.9


def test_lore_pop_errors():
    with pytest.raises(ValueError):
        lore_lite(np.zeros(2), RADIAL, pop=0)


def _outcome(g, x, f, tr, seed):
    try:
        cf = g(x, f, tr, seed)
    except NoCounterfactualError as exc:
        return str(exc)
    assert f.predict(cf.point[None])[0] != f.predict(x[None])[0]
    return cf.point.tolist(), cf.queries


def test_generators_are_seeded(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=5, rng=0)
    for name in GENERATORS:
        g = get_generator(name)
        for i in range(4):
            assert _outcome(g, te.X[i], f, tr, 7) == _outcome(g, te.X[i], f, tr, 7)


def test_nearest_enemy_is_a_correct_training_point(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=5, rng=0)
    cf = nearest_training_enemy(te.X[3], f, tr)
    k = cf.info["train_index"]
    assert np.array_equal(cf.point, tr.X[k]) and f.predict(tr.X[k:k + 1])[0] == tr.y[k]


def test_fixed_point_generator():
    g = fixed_point([2.0, 0.0])
    assert np.array_equal(g(np.zeros(2), RADIAL).point, [2.0, 0.0])
    with pytest.raises(NoCounterfactualError):
        g(np.array([3.0, 0.0]), RADIAL)


def test_unknown_generator():
    with pytest.raises(KeyError):
        get_generator("wachter")
