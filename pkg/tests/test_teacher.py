import numpy as np
import pytest

from ternnet import data
from ternnet.linalg import Rng
from ternnet.teacher import (
    DenseLayer,
    RealMlp,
    TrainConfig,
    TrainingDivergedError,
    expected_accuracy,
    init_mlp,
    load_teacher,
    loss_and_gradients,
    save_teacher,
    staggered_retrain,
    stochastic_fire,
    teacher_classes,
    ternary_probs,
    train_teacher,
    transfer,
)


def blob_fixture(seed=3, n=1200, dim=16, classes=3):
    ds = data.synth_blobs(Rng(seed), n, dim, classes)
    return data.split(ds, n - 200, 200)


def test_transfer_zero_layer():
    lay = DenseLayer(weights=np.zeros((4, 3)), bias=np.zeros(4))
    assert np.array_equal(transfer(lay, [1.0, -1.0, 1.0]), np.zeros(4))


def test_transfer_hand_arithmetic():
    lay = DenseLayer(weights=np.array([[1.0, -1.0]]), bias=np.array([0.5]))
    assert np.array_equal(transfer(lay, [1.0, 1.0]), [0.5])


def test_transfer_matches_naive_dot_oracle():
    g = np.random.default_rng(0)
    w = g.normal(size=(6, 9))
    b = g.normal(size=6)
    x = g.normal(size=9)
    lay = DenseLayer(weights=w, bias=b)
    naive = np.array([sum(w[i, k] * x[k] for k in range(9)) + b[i] for i in range(6)])
    assert np.allclose(transfer(lay, x), naive, rtol=0, atol=1e-12)


def test_transfer_dimension_mismatch():
    lay = DenseLayer(weights=np.zeros((2, 3)), bias=np.zeros(2))
    with pytest.raises(ValueError):
        transfer(lay, [1.0, 2.0])


def test_ternary_probs_zero_input():
    assert np.array_equal(ternary_probs(0.0), [0.0, 1.0, 0.0])


def test_ternary_probs_tanh_saturation():
    p = ternary_probs(3.0)
    assert p[2] == pytest.approx(np.tanh(3.0), abs=0)
    assert p[2] == pytest.approx(0.9951, abs=5e-4)


def test_ternary_probs_triples_are_distributions():
    g = np.random.default_rng(1)
    for act in ("tanh", "hard_tanh", "soft_sign"):
        p = ternary_probs(g.normal(scale=3.0, size=500), act)
        assert np.all(p >= 0.0) and np.all(p <= 1.0)
        assert np.all(p.sum(axis=-1) == 1.0)


def test_ternary_probs_match_monte_carlo():
    y = 0.5
    p = ternary_probs(y)
    draws = stochastic_fire(Rng(5), np.tile(p, (100_000, 1)))
    for value, col in ((-1, 0), (0, 1), (1, 2)):
        assert abs(np.mean(draws == value) - p[col]) < 0.01


def test_stochastic_fire_degenerate():
    always_zero = stochastic_fire(Rng(0), np.tile([0.0, 1.0, 0.0], (200, 1)))
    assert not always_zero.any()
    always_minus = stochastic_fire(Rng(0), np.tile([1.0, 0.0, 0.0], (200, 1)))
    assert (always_minus == -1).all()


def test_stochastic_fire_expectation_identity():
    g = np.random.default_rng(2)
    n = 100_000
    for y in (-1.3, -0.2, 0.4, 2.0):
        rho = float(np.tanh(y))
        p = ternary_probs(y)
        draws = stochastic_fire(Rng(int(abs(y) * 1000)), np.tile(p, (n, 1)))
        sigma = np.sqrt((abs(rho) - rho * rho) / n)
        assert abs(draws.mean() - rho) <= 3.0 * sigma + 1e-9


def test_teacher_classes_argmax_with_tie_to_zero():
    probs = np.array(
        [
            [0.0, 0.4, 0.6],
            [0.7, 0.3, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.5, 0.5],  # tie resolves to 0
        ]
    )
    assert np.array_equal(teacher_classes(probs), [1, -1, 0, 0])


def test_train_teacher_separable_blobs():
    train, val = blob_fixture()
    cfg = TrainConfig(epochs=50, batch_size=50, learning_rate=0.1, seed=11, early_stop_patience=15)
    res = train_teacher(train, [16, 12, 3], cfg, val=val)
    assert res.best_val_acc >= 0.95
    assert len(res.history) <= 50


def test_zero_learning_rate_leaves_weights_unchanged():
    train, val = blob_fixture()
    cfg = TrainConfig(epochs=1, batch_size=50, learning_rate=0.0, seed=11)
    reference = init_mlp(Rng(cfg.seed), [16, 12, 3], cfg.activation)
    res = train_teacher(train, [16, 12, 3], cfg, val=val)
    for got, ref in zip(res.model.hidden + [res.model.output], reference.hidden + [reference.output]):
        assert np.array_equal(got.weights, ref.weights)
        assert np.array_equal(got.bias, ref.bias)


def test_training_divergence_raises():
    from ternnet.teacher import _fit

    train, val = blob_fixture()
    cfg = TrainConfig(epochs=2, batch_size=50, learning_rate=0.1, seed=11)
    model = init_mlp(Rng(0), [16, 12, 3])
    model.hidden[0].weights[0, 0] = np.nan  # poisons the loss on the first batch
    with pytest.raises(TrainingDivergedError):
        _fit(model, train.inputs, train.labels, val.inputs, val.labels, cfg, Rng(1), 2)


def _flatten_params(model):
    layers = model.hidden + [model.output]
    return [(lay, name) for lay in layers for name in ("weights", "bias")]


def test_backprop_matches_finite_differences():
    # Stochastic firing replaced by its expectation makes the loss smooth.
    model = init_mlp(Rng(42), [5, 6, 4, 3])
    g = np.random.default_rng(3)
    X = g.uniform(-1, 1, size=(12, 5))
    y = g.integers(0, 3, size=12)
    _, _, grads = loss_and_gradients(model, X, y)
    analytic = []
    for (gw, gb) in grads:
        analytic.extend([gw, gb])
    h = 1e-6
    checked = 0
    for pi, (lay, name) in enumerate(_flatten_params(model)):
        arr = getattr(lay, name)
        flat = arr.ravel()
        idxs = g.choice(flat.size, size=min(10, flat.size), replace=False)
        for k in idxs:
            orig = flat[k]
            flat[k] = orig + h
            lp = loss_and_gradients(model, X, y)[0]
            flat[k] = orig - h
            lm = loss_and_gradients(model, X, y)[0]
            flat[k] = orig
            fd = (lp - lm) / (2 * h)
            an = analytic[pi].ravel()[k]
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(an - fd) / denom < 1e-4
            checked += 1
    assert checked >= 40


def test_sampled_forward_is_ternary():
    model = init_mlp(Rng(0), [8, 6, 3])
    from ternnet.teacher import _forward_train

    g = Rng(9)
    x = g.uniform(-1, 1, size=(32, 8))
    _, caches = _forward_train(model, x, g, None)
    fired_inputs = caches[-1][0]
    assert np.isin(fired_inputs, (-1.0, 0.0, 1.0)).all()


def test_staggered_retrain_empty_prefix_fine_tunes():
    train, val = blob_fixture()
    cfg = TrainConfig(epochs=10, batch_size=50, learning_rate=0.1, seed=7, early_stop_patience=5)
    res = train_teacher(train, [16, 12, 3], cfg, val=val)
    tuned = staggered_retrain(res.model, [], train, cfg, val=val)
    assert tuned.best_val_acc >= res.best_val_acc - 0.02
    assert len(tuned.model.hidden) == len(res.model.hidden)


def test_staggered_retrain_freezes_prefix():
    from ternnet.runtime import StudentLayer, pack

    train, val = blob_fixture()
    cfg = TrainConfig(epochs=8, batch_size=50, learning_rate=0.1, seed=7, early_stop_patience=4)
    res = train_teacher(train, [16, 12, 8, 3], cfg, val=val)
    g = np.random.default_rng(4)
    rows = g.integers(-1, 2, size=(12, 16)).astype(np.int8)
    prefix = [
        StudentLayer(fan_in=16, weights=[pack(r) for r in rows], b_lo=np.full(12, -2, np.int32), b_hi=np.full(12, 2, np.int32))
    ]
    before0 = res.model.hidden[0].weights.copy()
    tuned = staggered_retrain(res.model, prefix, train, cfg, val=val)
    # Frozen prefix layers come back bit-identical: no gradient ever reaches them.
    assert np.array_equal(tuned.model.hidden[0].weights, before0)
    assert len(tuned.model.hidden) == 2


def test_checkpoint_round_trip(tmp_path):
    train, val = blob_fixture()
    cfg = TrainConfig(epochs=5, batch_size=50, learning_rate=0.1, seed=7, early_stop_patience=3)
    res = train_teacher(train, [16, 12, 3], cfg, val=val)
    path = tmp_path / "teacher.tnn"
    save_teacher(res.model, path, meta={"seed": 7, "epochs_run": len(res.history)})
    back, meta = load_teacher(path)
    assert meta["seed"] == 7
    for a, b in zip(back.hidden + [back.output], res.model.hidden + [res.model.output]):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
    assert expected_accuracy(back, val.inputs, val.labels) == expected_accuracy(res.model, val.inputs, val.labels)


def test_dropout_hook_smoke():
    train, val = blob_fixture()
    cfg = TrainConfig(epochs=3, batch_size=50, learning_rate=0.05, seed=7, dropout_rate=0.2)
    res = train_teacher(train, [16, 12, 3], cfg, val=val)
    assert np.isfinite(res.history[-1]["train_loss"])


def test_realmlp_dimension_validation():
    with pytest.raises(ValueError):
        RealMlp(
            hidden=[DenseLayer(weights=np.zeros((4, 3)), bias=np.zeros(4))],
            output=DenseLayer(weights=np.zeros((2, 5)), bias=np.zeros(2)),
        )
