import numpy as np
import pytest

from cf_audit.classifiers import train_forest
from cf_audit.connect import auto_epsilon
from cf_audit.generators import fixed_point, get_generator
from cf_audit.geometry import Ball, sample_ball
from cf_audit.lra import NoAnchorError
from cf_audit.oracles import HalfPlaneClassifier, PocketGeometry, pocket_classifier
from cf_audit.ve import justification_check, ve_benchmark

G = PocketGeometry()
F = pocket_classifier(G)
TRAIN = G.training_set()
X0 = np.array(G.x)


@pytest.mark.parametrize("seed", range(10))
def test_training_point_is_justified(seed):
    X, y = TRAIN
    k = 12
    res = justification_check(X[k], F, TRAIN, n=500, rng=seed)
    assert res.J == 1 and res.witness == k and res.layers_explored == 0


@pytest.mark.parametrize("seed", range(5))
def test_pocket_center_is_unjustified(seed):
    res = justification_check(G.pocket_center_point(), F, TRAIN, n=3000, rng=seed)
    assert res.J == 0 and res.witness is None and res.exhausted


def test_point_next_to_b0_is_justified_without_layers():
    e = np.array(G.a0) + np.array([0.001, 0.0])
    res = justification_check(e, F, TRAIN, n=2000, rng=0)
    assert res.J == 1 and res.layers_explored == 0 and res.witness == 10


def test_witness_iff_justified(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=3, rng=0)
    gs = get_generator("gs")
    for i in range(10):
        res = justification_check(gs(te.X[i], f, tr, i).point, f, tr, n=1000, rng=i)
        assert (res.J == 1) == (res.witness is not None)
        if res.J:
            assert f.predict(tr.X[res.witness:res.witness + 1])[0] == tr.y[res.witness]


def test_epsilon_is_recomputed_from_the_ve_ball():
    e = np.array([0.95, 0.3])
    n, seed = 800, 3
    res = justification_check(e, F, TRAIN, n=n, rng=seed)
    r0 = np.linalg.norm(TRAIN[0][10] - e)
    ball = sample_ball(Ball(e, r0), n, np.random.default_rng(seed))
    assert res.epsilon == auto_epsilon(ball)


def test_justified_stays_justified_at_double_n():
    e = np.array([0.92, 0.35])
    flips = 0
    for seed in range(20):
        if justification_check(e, F, TRAIN, n=1000, rng=seed).J == 1:
            flips += justification_check(e, F, TRAIN, n=2000, rng=seed).J == 0
    assert flips <= 1


def test_no_anchor_error():
    f = HalfPlaneClassifier(threshold=0.5)
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(NoAnchorError):
        justification_check(np.array([2.0, 0.0]), f, (X, np.array([0, 0])))


def test_benchmark_extremes():
    gens = {"enemy": get_generator("nearest_enemy"),
            "pocket": fixed_point(G.pocket_center_point())}
    bench = ve_benchmark(X0[None], F, TRAIN, gens, n=3000, runs=3, rng=0)
    assert not bench.empty and len(bench.kept) == 3
    assert bench.row("enemy").J_bar == 1.0
    assert bench.row("pocket").J_bar == 0.0
    assert bench.row("pocket").failure_rate == 0.0


def test_benchmark_empty_marker():
    bench = ve_benchmark(X0[None], F, TRAIN, [get_generator("gs")], risk_threshold=1.0, n=500,
                         rng=0)
    assert bench.empty and bench.rows[0].instances_kept == 0
    assert np.isnan(bench.rows[0].J_bar)


def test_benchmark_filter_is_strict():
    # R on this single instance is measured, then used as the threshold itself
    bench = ve_benchmark(X0[None], F, TRAIN, [get_generator("gs")], risk_threshold=0.0, n=500,
                         rng=0)
    R = bench.risks[0][2]
    again = ve_benchmark(X0[None], F, TRAIN, [get_generator("gs")], risk_threshold=R, n=500,
                         rng=0)
    assert again.empty


def test_benchmark_needs_generators():
    with pytest.raises(ValueError):
        ve_benchmark(X0[None], F, TRAIN, {})


def test_failures_counted(moons):
    tr, te = moons
    f = train_forest(tr.X, tr.y, n_trees=3, rng=0)
    never = fixed_point(te.X[0])  # same class as instances of its own class
    bench = ve_benchmark(te.X[:20], f, tr, {"never": never}, risk_threshold=-1.0, n=300, rng=0)
    row = bench.row("never")
    assert row.instances_kept == 20
    own = f.predict(te.X[:20]) == f.predict(te.X[:1])[0]
    assert row.failure_rate == pytest.approx(own.mean())
