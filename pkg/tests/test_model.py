from pathlib import Path

import numpy as np
import pytest

from ihgnn.errors import ConfigurationError, InputError
from ihgnn.examples.fixtures import (
    path2,
    single_node,
    triangle,
    wl_g1,
    wl_g2,
    wl_pair_dataset,
)
from ihgnn.graph import Graph, one_hot
from ihgnn.model import (
    IHGNNConfig,
    IHGNNModel,
    Variant,
    aggregate_neighbors,
    combine,
    forward,
    loss_and_gradients,
    pad_and_flatten,
    predict,
    sort_nodes_by_color,
)
from ihgnn.nn import grad_check, load_checkpoint, save_checkpoint


def small_config(
    num_layers: int = 3,
    variant: Variant = Variant.FULL,
    pad_size: int = 8,
    num_features: int = 3,
    **kwargs,
) -> IHGNNConfig:
    return IHGNNConfig(
        num_layers=num_layers,
        embed_dim=8,
        classifier_hidden=16,
        pad_size=pad_size,
        num_features=num_features,
        num_classes=2,
        variant=variant,
        **kwargs,
    ).validate()


def test_config_defaults():
    c = IHGNNConfig()
    assert (c.num_layers, c.embed_dim, c.classifier_hidden) == (5, 32, 128)
    assert (c.dropout, c.batch_size, c.epochs, c.lr) == (0.5, 32, 350, 0.01)
    assert c.variant == Variant.FULL


@pytest.mark.parametrize(
    "changes",
    [{"num_layers": 0}, {"dropout": 1.0}, {"batch_size": 0}, {"num_folds": 1}],
)
def test_config_invalid(changes):
    with pytest.raises(ConfigurationError):
        IHGNNConfig().replace(**changes)


def test_config_text_roundtrip(tmp_path: Path):
    c = IHGNNConfig(variant=Variant.SUM_READOUT, seed=3, stratified=False, lr=0.005)
    path = tmp_path / "run.cfg"
    c.dump(path)
    assert IHGNNConfig.load(path) == c


def test_config_parse_comments_and_partial():
    c = IHGNNConfig.parse("# capas\nnum_layers = 3\n\nvariant=no_separation\n")
    assert c == IHGNNConfig(num_layers=3, variant=Variant.NO_SEPARATION)


@pytest.mark.parametrize(
    "text", ["layers=3", "num_layers=tres", "variant=gat", "stratified=quizás", "sin igual"]
)
def test_config_parse_errors(text):
    with pytest.raises(ConfigurationError):
        IHGNNConfig.parse(text)


def test_config_for_dataset():
    d = wl_pair_dataset()
    c = IHGNNConfig().for_dataset(d, num_features=5)
    assert (c.pad_size, c.num_features, c.num_classes) == (6, 5, 2)
    assert c.readout_dim == 6 * 5 * 32
    with pytest.raises(ConfigurationError):
        IHGNNConfig(pad_size=4).for_dataset(d, num_features=5)


def test_readout_dims():
    base = small_config(num_layers=4, pad_size=10)
    assert base.readout_dim == 10 * 4 * 8
    assert base.replace(variant=Variant.NO_INTERMEDIATE).readout_dim == 10 * 8
    assert base.replace(variant=Variant.SUM_READOUT).readout_dim == 4 * 8
    assert Variant.NO_INTEGRATION.combine_width == 2
    assert Variant.NO_SEPARATION.combine_width == 1
    assert Variant.FULL.combine_width == 3


def test_model_parameter_names():
    model = IHGNNModel.zeros(small_config(num_layers=3))
    names = list(model.parameters())
    assert names[:4] == ["embed.W1", "embed.b1", "embed.W2", "embed.b2"]
    assert "combine.1.W1" in names and "combine.2.W1" not in names
    assert names[-1] == "classifier.b2"
    assert model.parameters()["combine.0.W1"].shape == (3 * 8, 8)


def test_model_needs_features():
    with pytest.raises(ConfigurationError):
        IHGNNModel.zeros(IHGNNConfig(pad_size=4))


def test_sort_by_last_layer_first_dimension():
    H = np.array([[0.0, 3.0], [0.0, 1.0], [0.0, 2.0]])
    assert sort_nodes_by_color(H, last_width=1).tolist() == [1, 2, 0]


def test_sort_identical_rows_identity():
    assert sort_nodes_by_color(np.ones((4, 3))).tolist() == [0, 1, 2, 3]


def test_sort_ties_broken_by_first_layer():
    # el bloque de la última capa empata y decide el de la primera
    H = np.array([[5.0, 0.0, 7.0], [1.0, 0.0, 7.0]])
    assert sort_nodes_by_color(H, last_width=2).tolist() == [1, 0]


def test_pad_and_flatten():
    H = np.arange(6, dtype=float).reshape(3, 2)
    v = pad_and_flatten(H, 5)
    assert v.shape == (10,)
    assert v[:6].tolist() == [0, 1, 2, 3, 4, 5]
    assert (v[6:] == 0).all()
    assert (pad_and_flatten(H, 3) == H.reshape(-1)).all()
    assert (pad_and_flatten(np.zeros((2, 2)), 4) == 0).all()
    with pytest.raises(ConfigurationError):
        pad_and_flatten(H, 2)


def test_aggregate_neighbors():
    H = np.eye(3)
    assert (aggregate_neighbors(H, triangle.adjacency) == triangle.adjacency).all()
    H = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    expected = [[8.0, 10.0], [6.0, 8.0], [4.0, 6.0]]
    assert (aggregate_neighbors(H, triangle.adjacency, deterministic=True) == expected).all()
    assert (aggregate_neighbors(np.ones((1, 4)), single_node.adjacency) == 0).all()
    with pytest.raises(InputError):
        aggregate_neighbors(np.ones((2, 2)), triangle.adjacency)


def test_combine_variants():
    a, b = np.array([[1.0, 2.0]]), np.array([[3.0, 5.0]])
    assert combine(a, b, Variant.FULL).tolist() == [[1, 2, 3, 5, 4, 7]]
    assert combine(a, b, Variant.NO_INTEGRATION).tolist() == [[1, 2, 3, 5]]
    assert combine(a, b, Variant.NO_SEPARATION).tolist() == [[4, 7]]
    with pytest.raises(InputError):
        combine(a, np.ones((1, 3)), Variant.FULL)


def test_no_separation_collapse():
    # intercambiar el embedding propio y el de los vecinos solo se nota si
    # se conservan por separado
    a, b = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    assert (combine(a, b, Variant.NO_SEPARATION) == combine(b, a, Variant.NO_SEPARATION)).all()
    assert not (combine(a, b, Variant.FULL) == combine(b, a, Variant.FULL)).all()


def test_single_node_logits_finite():
    model = IHGNNModel.init(small_config(), np.random.default_rng(0))
    logits, _ = forward(model, single_node, one_hot(single_node, 3))
    assert logits.shape == (2,)
    assert np.isfinite(logits).all()


def test_graph_larger_than_pad_size():
    model = IHGNNModel.init(small_config(pad_size=2), np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        forward(model, triangle, one_hot(triangle, 3))


def test_sum_readout_ignores_pad_size():
    model = IHGNNModel.init(
        small_config(variant=Variant.SUM_READOUT, pad_size=1), np.random.default_rng(0)
    )
    logits, _ = forward(model, triangle, one_hot(triangle, 3))
    assert np.isfinite(logits).all()


def test_single_layer_model():
    model = IHGNNModel.init(small_config(num_layers=1), np.random.default_rng(0))
    assert model.combine_mlps == []
    assert np.isfinite(forward(model, triangle, one_hot(triangle, 3))[0]).all()


def test_permutation_invariance(random_graph: Graph):
    rng = np.random.default_rng(random_graph.num_edges)
    model = IHGNNModel.init(small_config(num_layers=5), rng)
    h = random_graph.permute(rng.permutation(random_graph.num_nodes).tolist())
    a, _ = forward(model, random_graph, one_hot(random_graph, 3))
    b, _ = forward(model, h, one_hot(h, 3))
    assert np.allclose(a, b, rtol=1e-6, atol=1e-12)


def test_permutation_invariance_deterministic(random_graph: Graph):
    rng = np.random.default_rng(random_graph.num_edges)
    model = IHGNNModel.init(small_config(num_layers=5, deterministic=True), rng)
    h = random_graph.permute(rng.permutation(random_graph.num_nodes).tolist())
    a, _ = forward(model, random_graph, one_hot(random_graph, 3))
    b, _ = forward(model, h, one_hot(h, 3))
    assert (a == b).all()


@pytest.mark.parametrize("seed", range(20))
def test_worked_example_distinct_embeddings(seed):
    config = IHGNNConfig(pad_size=6, num_features=5, num_classes=2)
    model = IHGNNModel.init(config, np.random.default_rng(seed))
    e1 = model.embed(wl_g1, one_hot(wl_g1, 5))
    e2 = model.embed(wl_g2, one_hot(wl_g2, 5))
    assert e1.vector.shape == (config.readout_dim,)
    assert np.abs(e1.vector - e2.vector).max() > 1e-6


def test_padding_rows_do_not_reach_classifier():
    config = small_config(pad_size=8)
    model = IHGNNModel.init(config, np.random.default_rng(1))
    X = one_hot(triangle, 3)
    before, cache = forward(model, triangle, X)
    D = config.node_dim
    assert (cache.embedding[3 * D :] == 0).all()
    model.classifier.W1[3 * D :] = 123.0
    after, _ = forward(model, triangle, X)
    assert (before == after).all()
    _, grads = loss_and_gradients(model, [(triangle, X, 1)], training=False)
    assert (grads["classifier.W1"][3 * D :] == 0).all()


def test_duplicated_batch_same_loss_and_gradients():
    rng = np.random.default_rng(2)
    model = IHGNNModel.init(small_config(), rng)
    batch = [(g, one_hot(g, 3), y) for g, y in [(triangle, 0), (path2, 1), (single_node, 1)]]
    loss, grads = loss_and_gradients(model, batch, training=False)
    loss2, grads2 = loss_and_gradients(model, batch + batch, training=False)
    assert loss2 == pytest.approx(loss)
    for name in grads:
        assert np.allclose(grads[name], grads2[name])


def test_saturated_prediction_zero_gradient():
    model = IHGNNModel.zeros(small_config())
    model.classifier.b2[...] = [[50.0, -50.0]]
    loss, grads = loss_and_gradients(
        model, [(triangle, one_hot(triangle, 3), 0)], training=False
    )
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert all(np.abs(g).max() < 1e-12 for g in grads.values())


def test_empty_batch():
    model = IHGNNModel.zeros(small_config())
    with pytest.raises(InputError):
        loss_and_gradients(model, [])


def random_batch(rng: np.random.Generator, size: int = 2):
    batch = []
    for _ in range(size):
        g = Graph.random(int(rng.integers(4, 9)), 0.4, 3, rng)
        batch.append((g, one_hot(g, 3), int(rng.integers(2))))
    return batch


@pytest.mark.parametrize("num_layers", [3, 5])
@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed, num_layers):
    rng = np.random.default_rng(seed)
    model = IHGNNModel.init(small_config(num_layers=num_layers), rng)
    batch = random_batch(rng)
    error = grad_check(
        lambda: loss_and_gradients(model, batch, training=False),
        model.parameters(),
        rng=rng,
    )
    assert error <= 1e-4


@pytest.mark.parametrize("variant", list(Variant))
def test_variant_gradients(variant):
    rng = np.random.default_rng(11)
    model = IHGNNModel.init(small_config(variant=variant), rng)
    batch = random_batch(rng)
    error = grad_check(
        lambda: loss_and_gradients(model, batch, training=False),
        model.parameters(),
        rng=rng,
    )
    assert error <= 1e-4


def test_training_dropout_changes_logits():
    rng = np.random.default_rng(3)
    model = IHGNNModel.init(small_config(dropout=0.5, combine_dropout=True), rng)
    X = one_hot(triangle, 3)
    a, _ = forward(model, triangle, X, training=True, rng=np.random.default_rng(0))
    b, _ = forward(model, triangle, X, training=True, rng=np.random.default_rng(1))
    c, _ = forward(model, triangle, X)
    d, _ = forward(model, triangle, X)
    assert not np.allclose(a, b)
    assert (c == d).all()


def test_predict_and_checkpoint(tmp_path: Path):
    config = small_config()
    model = IHGNNModel.init(config, np.random.default_rng(4))
    samples = [(g, one_hot(g, 3)) for g in (triangle, path2, single_node)]
    preds = predict(model, samples)
    assert preds.dtype.kind == "i"
    assert set(preds.tolist()) <= {0, 1}
    path = tmp_path / "model.ckpt"
    save_checkpoint(model.parameters(), path)
    restored = IHGNNModel.zeros(config)
    restored.load_parameters(load_checkpoint(path))
    for g, X in samples:
        assert (forward(model, g, X)[0] == forward(restored, g, X)[0]).all()


def test_load_parameters_mismatch():
    model = IHGNNModel.zeros(small_config(num_layers=3))
    other = IHGNNModel.zeros(small_config(num_layers=2))
    with pytest.raises(InputError):
        model.load_parameters(other.parameters())
