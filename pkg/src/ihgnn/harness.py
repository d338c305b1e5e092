"""
Validación cruzada en 10 particiones, selección de la época, ablación y
barrido del número de capas.

La época se selecciona como la de mayor precisión media sobre las
particiones de test. El protocolo es optimista: la época se elige mirando
los propios datos de test, igual que en los benchmarks con los que se
compara.
"""
from __future__ import annotations

import logging
import time
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
from rich.panel import Panel
from rich.table import Table as rTable
from sklearn.model_selection import KFold, StratifiedKFold

from .errors import ConfigurationError, InputError, NumericError
from .graph import Dataset, one_hot_features
from .model import IHGNNConfig, IHGNNModel, Variant, loss_and_gradients, predict
from .nn import AdamState, adam_step, save_checkpoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldPlan:
    """
    Asignación de cada grafo a una partición.

    Attributes:
        assignments: partición de cada grafo, en `[0, num_folds)`.
        seed: semilla con la que se barajó.
        stratified: si las particiones respetan la proporción de clases.
    """

    assignments: tuple[int, ...]
    seed: int
    stratified: bool
    num_folds: int = 10

    def test_indices(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.num_folds:
            raise InputError(f"Partición {fold} fuera de [0, {self.num_folds})")
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.num_folds:
            raise InputError(f"Partición {fold} fuera de [0, {self.num_folds})")
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def fold_sizes(self) -> list[int]:
        counts = Counter(self.assignments)
        return [counts[f] for f in range(self.num_folds)]


def make_folds(
    d: Dataset, seed: int, stratified: bool = True, num_folds: int = 10
) -> FoldPlan:
    """
    Particiones barajadas con `seed`. Con `stratified`, cada partición tiene
    la misma proporción de clases que el dataset (salvo redondeo).
    """
    if len(d) < num_folds:
        raise InputError(f"{d.name}: {len(d)} grafos para {num_folds} particiones")
    y = np.asarray(d.graph_labels)
    if stratified and np.bincount(y).max() < num_folds:
        raise InputError(
            f"{d.name}: ninguna clase tiene {num_folds} grafos para estratificar"
        )
    splitter = (
        StratifiedKFold(n_splits=num_folds, shuffle=True, random_state=seed)
        if stratified
        else KFold(n_splits=num_folds, shuffle=True, random_state=seed)
    )
    assignments = np.full(len(d), -1, dtype=int)
    for fold, (_, test) in enumerate(splitter.split(np.zeros(len(d)), y)):
        assignments[test] = fold
    assert (assignments >= 0).all()
    return FoldPlan(tuple(assignments.tolist()), seed, stratified, num_folds)


def prepare(d: Dataset, config: IHGNNConfig) -> tuple[IHGNNConfig, list[np.ndarray]]:
    """Características one-hot del dataset y configuración con sus dimensiones."""
    features = one_hot_features(d)
    num_features = features[0].shape[1] if features else 0
    return config.for_dataset(d, num_features), features


@dataclass
class FoldRun:
    """
    Entrenamiento de una partición.

    `gradient_counts` cuenta cuántas veces ha contribuido cada grafo a un
    gradiente; ningún grafo de test debe aparecer.
    """

    fold: int
    accuracies: np.ndarray
    losses: np.ndarray
    gradient_counts: Counter[int] = field(default_factory=Counter)
    model: IHGNNModel | None = None


def train_fold(
    d: Dataset,
    plan: FoldPlan,
    fold: int,
    config: IHGNNConfig,
    model: IHGNNModel | None = None,
) -> FoldRun:
    """
    Entrena con las particiones distintas de `fold` y evalúa sobre `fold`
    al final de cada época, sin dropout.

    Args:
        model: modelo inicial; por defecto, uno inicializado con la semilla
            de la partición.

    Returns:
        la precisión de test y la pérdida media de entrenamiento de cada época.
    """
    config, features = prepare(d, config)
    rng = np.random.default_rng([config.seed, fold])
    if model is None:
        model = IHGNNModel.init(config, rng)
    state = AdamState(
        lr=config.lr,
        decay_every=config.lr_decay_every,
        decay_rate=config.lr_decay_rate,
    )
    params = model.parameters()
    train, test = plan.train_indices(fold), plan.test_indices(fold)
    test_samples = [(d.graphs[i], features[i]) for i in test]
    test_labels = np.asarray([d.graph_labels[i] for i in test])

    accuracies = np.zeros(config.epochs)
    losses = np.zeros(config.epochs)
    counts: Counter[int] = Counter()
    for epoch in range(config.epochs):
        state.epoch = epoch
        order = rng.permutation(train)
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            samples = [(d.graphs[i], features[i], d.graph_labels[i]) for i in batch]
            loss, grads = loss_and_gradients(model, samples, rng, training=True)
            if not np.isfinite(loss):
                raise NumericError(
                    f"{d.name}: pérdida no finita ({loss}) en la partición {fold}, "
                    f"época {epoch}, lote {start // config.batch_size}"
                )
            counts.update(batch.tolist())
            adam_step(state, params, grads)
            epoch_losses.append(loss)
        losses[epoch] = np.mean(epoch_losses) if epoch_losses else 0.0
        accuracies[epoch] = (
            float(np.mean(predict(model, test_samples) == test_labels))
            if len(test)
            else 0.0
        )
        log.debug(
            "partición %d época %d: pérdida %.4f, precisión %.4f",
            fold,
            epoch,
            losses[epoch],
            accuracies[epoch],
        )
    log.info(
        "%s partición %d: precisión final %.4f, máxima %.4f",
        d.name,
        fold,
        accuracies[-1],
        accuracies.max(),
    )
    return FoldRun(fold, accuracies, losses, counts, model)


@dataclass(frozen=True)
class CVResult:
    """
    Resultado de una validación cruzada.

    Attributes:
        grid: precisión de test por época (filas) y partición (columnas).
        selected_epoch: época (desde 0) con la mayor precisión media.
        mean_accuracy: media sobre las particiones en esa época.
        std_accuracy: desviación típica poblacional en esa época.
    """

    grid: np.ndarray
    selected_epoch: int
    mean_accuracy: float
    std_accuracy: float
    wall_time: float = 0.0
    variant: Variant = Variant.FULL
    seed: int = 0
    num_layers: int = 5
    dataset: str = ""

    @staticmethod
    def from_grid(grid: np.ndarray, **kwargs) -> CVResult:
        grid = np.asarray(grid, dtype=float)
        assert grid.ndim == 2 and grid.size > 0
        assert ((grid >= 0.0) & (grid <= 1.0)).all()
        means = grid.mean(axis=1)
        selected = int(np.argmax(means))
        return CVResult(
            grid,
            selected,
            float(means[selected]),
            float(grid[selected].std()),
            **kwargs,
        )

    def __str__(self) -> str:
        return f"{100 * self.mean_accuracy:.1f}±{100 * self.std_accuracy:.1f}"

    def summary_row(self) -> dict[str, object]:
        return {
            "dataset": self.dataset,
            "variant": str(self.variant),
            "num_layers": self.num_layers,
            "mean": self.mean_accuracy,
            "std": self.std_accuracy,
            "selected_epoch": self.selected_epoch,
            "seed": self.seed,
        }

    def display(self) -> Panel:
        t = rTable.grid(padding=(0, 2))
        t.add_row("Precisión", f"[green]{self}")
        t.add_row("Época", str(self.selected_epoch))
        t.add_row("Particiones", str(self.grid.shape[1]))
        t.add_row("Tiempo", f"{self.wall_time:.1f} s")
        return Panel(t, title=f"{self.dataset} · {self.variant} · K={self.num_layers}")


def cross_validate(
    d: Dataset,
    config: IHGNNConfig,
    plan: FoldPlan | None = None,
    checkpoint_dir: Path | str | None = None,
) -> CVResult:
    """
    Entrena las particiones una tras otra y agrega sus curvas.

    Con `checkpoint_dir`, guarda ahí el modelo final de cada partición como
    `fold_<i>.ckpt`.
    """
    if plan is None:
        plan = make_folds(d, config.seed, config.stratified, config.num_folds)
    start = time.perf_counter()
    runs = [train_fold(d, plan, fold, config) for fold in range(plan.num_folds)]
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        for run in runs:
            assert run.model is not None
            save_checkpoint(run.model.parameters(), checkpoint_dir / f"fold_{run.fold}.ckpt")
        log.debug("Modelos guardados en %s", checkpoint_dir)
    result = CVResult.from_grid(
        np.column_stack([run.accuracies for run in runs]),
        wall_time=time.perf_counter() - start,
        variant=config.variant,
        seed=config.seed,
        num_layers=config.num_layers,
        dataset=d.name,
    )
    log.info("%s %s: %s (época %d)", d.name, config.variant, result, result.selected_epoch)
    return result


def ablation_suite(
    d: Dataset,
    base_config: IHGNNConfig,
    variants: Iterable[Variant] = tuple(Variant),
    plan: FoldPlan | None = None,
) -> dict[Variant, CVResult]:
    """Una validación cruzada por variante, con las mismas particiones y semillas."""
    if plan is None:
        plan = make_folds(
            d, base_config.seed, base_config.stratified, base_config.num_folds
        )
    return {
        variant: cross_validate(d, base_config.replace(variant=variant), plan)
        for variant in variants
    }


def layer_sweep(
    d: Dataset,
    config: IHGNNConfig,
    layer_values: Sequence[int],
    plan: FoldPlan | None = None,
) -> dict[int, CVResult]:
    if not layer_values:
        raise InputError("El barrido necesita al menos un número de capas")
    if plan is None:
        plan = make_folds(d, config.seed, config.stratified, config.num_folds)
    return {k: cross_validate(d, config.replace(num_layers=k), plan) for k in layer_values}


def write_cv_results(result: CVResult, path: Path | str) -> Path:
    """Rejilla época × partición, una columna por partición."""
    df = pd.DataFrame(
        result.grid,
        columns=[f"fold_{f}" for f in range(result.grid.shape[1])],
    )
    df.index.name = "epoch"
    df.to_csv(path, float_format="%.17g")
    return Path(path)


def write_summary(results: Iterable[CVResult], path: Path | str) -> Path:
    """
    Una fila por resultado. No incluye el tiempo de ejecución, de forma que
    dos ejecuciones con la misma configuración escriben el mismo fichero.
    """
    pd.DataFrame([r.summary_row() for r in results]).to_csv(
        path, index=False, float_format="%.17g"
    )
    return Path(path)


def write_ablation(results: dict[Variant, CVResult], path: Path | str) -> Path:
    """Una fila por dataset con la media y la desviación de cada variante."""
    row: dict[str, object] = {"dataset": next(iter(results.values())).dataset}
    for variant, result in results.items():
        row[f"{variant}_mean"] = result.mean_accuracy
        row[f"{variant}_std"] = result.std_accuracy
    pd.DataFrame([row]).to_csv(path, index=False, float_format="%.17g")
    return Path(path)


def write_sweep(results: dict[int, CVResult], path: Path | str) -> Path:
    pd.DataFrame(
        [
            {
                "num_layers": k,
                "mean": r.mean_accuracy,
                "std": r.std_accuracy,
                "selected_epoch": r.selected_epoch,
            }
            for k, r in results.items()
        ]
    ).to_csv(path, index=False, float_format="%.17g")
    return Path(path)


@dataclass
class RunManifest:
    """
    Todo lo necesario para repetir una ejecución. Las órdenes que no entrenan
    (estadísticas, 1-WL) no tienen `config` y guardan sus parámetros en
    `options`.
    """

    command: str
    config: IHGNNConfig | None
    dataset: str
    version: str
    started: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    finished: datetime | None = None
    wall_time: float = 0.0
    options: dict[str, object] = field(default_factory=dict)

    @property
    def seed(self) -> int | None:
        return self.config.seed if self.config is not None else None

    def finish(self, wall_time: float) -> RunManifest:
        self.finished = datetime.now(timezone.utc)
        self.wall_time = wall_time
        return self

    def write(self, path: Path | str) -> Path:
        lines = [
            f"# {self.command}",
            f"command={self.command}",
            f"dataset={self.dataset}",
            f"version={self.version}",
            f"started={self.started.isoformat()}",
            f"finished={self.finished.isoformat() if self.finished else ''}",
            f"wall_time={self.wall_time:.3f}",
            *(f"{k}={v}" for k, v in self.options.items()),
        ]
        if self.config is not None:
            lines += ["# config", self.config.dump().rstrip("\n")]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf8")
        return Path(path)

    @staticmethod
    def read_config(path: Path | str) -> IHGNNConfig:
        """Configuración guardada en un manifiesto."""
        text = Path(path).read_text(encoding="utf8")
        _, found, config = text.partition("# config\n")
        if not found:
            raise ConfigurationError(f"{path}: el manifiesto no tiene configuración")
        return IHGNNConfig.parse(config)
