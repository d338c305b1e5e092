from collections import Counter
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from rich.panel import Panel

from ihgnn.errors import ConfigurationError, InputError, NumericError
from ihgnn.examples.fixtures import path2, triangle
from ihgnn.graph import Dataset, Graph
from ihgnn.harness import (
    CVResult,
    RunManifest,
    ablation_suite,
    cross_validate,
    layer_sweep,
    make_folds,
    prepare,
    train_fold,
    write_ablation,
    write_cv_results,
    write_summary,
    write_sweep,
)
from ihgnn.model import IHGNNConfig, IHGNNModel, Variant
from ihgnn.nn import load_checkpoint
from ihgnn.tud import load_dataset


def labeled_dataset(labels: list[int]) -> Dataset:
    graphs = [triangle if y == 0 else path2 for y in labels]
    return Dataset("SYN", graphs, labels, label_alphabet=range(3))


def separable_dataset(size: int = 20) -> Dataset:
    """La clase de cada grafo es la etiqueta común de todos sus nodos."""
    graphs, labels = [], []
    for i in range(size):
        y = i % 2
        n = 2 + i % 4
        graphs.append(Graph(n, [(v, v + 1) for v in range(n - 1)], [y] * n))
        labels.append(y)
    return Dataset("SEP", graphs, labels, label_alphabet=range(2))


def quick_config(**changes) -> IHGNNConfig:
    base = IHGNNConfig(
        num_layers=2,
        embed_dim=8,
        classifier_hidden=16,
        dropout=0.0,
        batch_size=4,
        epochs=3,
        num_folds=5,
    )
    return base.replace(**changes)


def test_folds_balanced():
    d = labeled_dataset([0, 1] * 50)
    plan = make_folds(d, seed=0)
    for fold in range(10):
        test = plan.test_indices(fold)
        assert Counter(d.graph_labels[i] for i in test) == {0: 5, 1: 5}


def test_folds_partition():
    d = labeled_dataset([0] * 125 + [1] * 63)
    plan = make_folds(d, seed=3)
    assert sorted(plan.fold_sizes()) == [18, 18] + [19] * 8
    seen = np.concatenate([plan.test_indices(f) for f in range(10)])
    assert sorted(seen.tolist()) == list(range(188))
    for f in range(10):
        assert set(plan.train_indices(f)).isdisjoint(plan.test_indices(f))
        assert len(plan.train_indices(f)) + len(plan.test_indices(f)) == 188


def test_folds_deterministic():
    d = labeled_dataset([0, 1, 1] * 10)
    assert make_folds(d, 5) == make_folds(d, 5)
    assert make_folds(d, 5, stratified=False).assignments != make_folds(d, 5).assignments


def test_folds_too_few_graphs():
    with pytest.raises(InputError):
        make_folds(labeled_dataset([0, 1] * 4), seed=0)


def test_fold_index_out_of_range():
    plan = make_folds(labeled_dataset([0, 1] * 10), seed=0)
    with pytest.raises(InputError):
        plan.test_indices(10)


def test_folds_small_classes():
    with pytest.raises(InputError):
        make_folds(labeled_dataset([0, 1] * 5), seed=0)
    plan = make_folds(labeled_dataset([0, 1] * 5), seed=0, stratified=False)
    assert plan.fold_sizes() == [1] * 10


def test_selected_epoch_is_argmax():
    grid = np.full((10, 3), 0.5)
    grid[7] = [0.9, 0.8, 1.0]
    result = CVResult.from_grid(grid)
    assert result.selected_epoch == 7
    assert result.mean_accuracy == pytest.approx(0.9)
    assert result.std_accuracy == pytest.approx(np.std([0.9, 0.8, 1.0]))


def test_identical_grid_zero_std():
    result = CVResult.from_grid(np.full((4, 10), 0.75))
    assert result.std_accuracy == 0.0
    assert result.selected_epoch == 0
    assert str(result) == "75.0±0.0"


def test_separable_dataset_reaches_full_accuracy():
    d = separable_dataset()
    config = quick_config(epochs=50)
    plan = make_folds(d, seed=0, num_folds=5)
    run = train_fold(d, plan, 0, config)
    assert run.accuracies.shape == (50,)
    assert run.accuracies.max() == 1.0


def test_constant_prediction_majority_share():
    d = labeled_dataset([0, 0, 0, 1] * 5)
    config, _ = prepare(d, quick_config(lr=0.0, epochs=2))
    plan = make_folds(d, seed=1, num_folds=5)
    run = train_fold(d, plan, 0, config, model=IHGNNModel.zeros(config))
    test = plan.test_indices(0)
    share = np.mean([d.graph_labels[i] == 0 for i in test])
    assert (run.accuracies == share).all()


def test_training_is_reproducible():
    d = separable_dataset()
    plan = make_folds(d, seed=2, num_folds=5)
    config = quick_config(dropout=0.5)
    a = train_fold(d, plan, 1, config)
    b = train_fold(d, plan, 1, config)
    assert (a.accuracies == b.accuracies).all()
    assert (a.losses == b.losses).all()


def test_test_fold_never_contributes_gradients():
    d = separable_dataset()
    plan = make_folds(d, seed=0, num_folds=5)
    config = quick_config(epochs=4)
    for fold in range(5):
        run = train_fold(d, plan, fold, config)
        assert set(run.gradient_counts).isdisjoint(plan.test_indices(fold).tolist())
        assert set(run.gradient_counts) == set(plan.train_indices(fold).tolist())
        assert set(run.gradient_counts.values()) == {4}


def test_non_finite_loss_aborts():
    d = separable_dataset()
    config, _ = prepare(d, quick_config())
    model = IHGNNModel.zeros(config)
    model.classifier.b2[...] = [[np.inf, 0.0]]
    plan = make_folds(d, seed=0, num_folds=5)
    with pytest.raises(NumericError):
        train_fold(d, plan, 0, config, model=model)


def test_cross_validate(tmp_path: Path):
    d = separable_dataset()
    config = quick_config(epochs=4, seed=9)
    result = cross_validate(d, config)
    assert result.grid.shape == (4, 5)
    means = result.grid.mean(axis=1)
    assert result.mean_accuracy == means.max()
    assert means[result.selected_epoch] == means.max()
    assert (result.variant, result.seed, result.dataset) == (Variant.FULL, 9, "SEP")
    assert isinstance(result.display(), Panel)

    write_cv_results(result, tmp_path / "cv_results.csv")
    df = pd.read_csv(tmp_path / "cv_results.csv", index_col="epoch")
    assert df.shape == (4, 5)
    assert np.allclose(df.to_numpy(), result.grid)


def test_cross_validate_saves_fold_models(tmp_path: Path):
    d = separable_dataset()
    config = quick_config(epochs=2, seed=3)
    plan = make_folds(d, config.seed, config.stratified, config.num_folds)
    cross_validate(d, config, plan, checkpoint_dir=tmp_path / "models")
    assert sorted(p.name for p in (tmp_path / "models").iterdir()) == [
        f"fold_{i}.ckpt" for i in range(5)
    ]
    saved = load_checkpoint(tmp_path / "models" / "fold_2.ckpt")
    run = train_fold(d, plan, 2, config)
    params = run.model.parameters()
    assert list(saved) == list(params)
    for name in params:
        assert (saved[name] == params[name]).all()


def test_summary_byte_identical(tmp_path: Path):
    d = separable_dataset()
    config = quick_config(epochs=2, seed=4)
    write_summary([cross_validate(d, config)], tmp_path / "a.csv")
    write_summary([cross_validate(d, config)], tmp_path / "b.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a.decode().splitlines()[0] == (
        "dataset,variant,num_layers,mean,std,selected_epoch,seed"
    )


def test_ablation_suite(tmp_path: Path):
    d = separable_dataset()
    results = ablation_suite(d, quick_config(epochs=2))
    assert list(results) == list(Variant)
    write_ablation(results, tmp_path / "ablation.csv")
    df = pd.read_csv(tmp_path / "ablation.csv")
    assert df.loc[0, "dataset"] == "SEP"
    assert "sum_readout_mean" in df.columns
    assert df.loc[0, "full_std"] == pytest.approx(results[Variant.FULL].std_accuracy)


def test_layer_sweep(tmp_path: Path):
    d = separable_dataset()
    results = layer_sweep(d, quick_config(epochs=2), [1, 2, 3])
    assert [r.num_layers for r in results.values()] == [1, 2, 3]
    write_sweep(results, tmp_path / "sweep.csv")
    df = pd.read_csv(tmp_path / "sweep.csv")
    assert df["num_layers"].tolist() == [1, 2, 3]
    with pytest.raises(InputError):
        layer_sweep(d, quick_config(), [])


def test_manifest_roundtrip(tmp_path: Path):
    config = quick_config(seed=12, variant=Variant.NO_INTEGRATION)
    manifest = RunManifest("train", config, "SEP", "0.1.0").finish(1.5)
    path = manifest.write(tmp_path / "manifest.txt")
    text = path.read_text(encoding="utf8")
    assert "dataset=SEP" in text and "wall_time=1.500" in text
    assert RunManifest.read_config(path) == config
    assert manifest.seed == 12


def test_manifest_without_config(tmp_path: Path):
    manifest = RunManifest("wl-test", None, "wl_pair", "0.1.0", options={"rounds": 3})
    path = manifest.finish(0.25).write(tmp_path / "manifest.txt")
    text = path.read_text(encoding="utf8")
    assert "rounds=3" in text and "wall_time=0.250" in text
    assert "# config" not in text
    assert manifest.seed is None
    with pytest.raises(ConfigurationError):
        RunManifest.read_config(path)


def test_sum_readout_on_par_when_labels_decide():
    # la clase depende solo del multiconjunto de etiquetas de los nodos
    d = separable_dataset()
    results = ablation_suite(
        d, quick_config(epochs=50, seed=0), [Variant.FULL, Variant.SUM_READOUT]
    )
    full = results[Variant.FULL].mean_accuracy
    summed = results[Variant.SUM_READOUT].mean_accuracy
    assert summed >= 0.85
    assert abs(full - summed) <= 0.15


@pytest.mark.slow
@pytest.mark.parametrize("name, threshold", [("MUTAG", 0.85), ("DHFR", 0.80)])
def test_benchmark_accuracy(datasets_dir: Path, name: str, threshold: float):
    if not (datasets_dir / name).is_dir():
        pytest.skip(f"{name} no disponible")
    d = load_dataset(datasets_dir / name, name)
    result = cross_validate(d, IHGNNConfig(seed=0))
    assert result.mean_accuracy >= threshold


@pytest.mark.slow
def test_sum_readout_loses_on_proteins(datasets_dir: Path):
    if not (datasets_dir / "PROTEINS").is_dir():
        pytest.skip("PROTEINS no disponible")
    d = load_dataset(datasets_dir / "PROTEINS", "PROTEINS")
    results = ablation_suite(d, IHGNNConfig(seed=0), [Variant.FULL, Variant.SUM_READOUT])
    gap = results[Variant.FULL].mean_accuracy - results[Variant.SUM_READOUT].mean_accuracy
    assert gap >= 0.05


@pytest.mark.slow
def test_layer_sensitivity_ptc_fr(datasets_dir: Path):
    if not (datasets_dir / "PTC_FR").is_dir():
        pytest.skip("PTC_FR no disponible")
    d = load_dataset(datasets_dir / "PTC_FR", "PTC_FR")
    results = layer_sweep(d, IHGNNConfig(seed=0), [2, 3, 4, 5])
    means = [r.mean_accuracy for r in results.values()]
    assert max(means) - min(means) <= 0.08
