"""
Línea de comandos: `ihgnn stats|homophily|train|ablate|sweep|wl-test|gradcheck`.

Códigos de salida: 0 si todo va bien, 1 para errores de uso o de
configuración, 2 para errores en los datos y 3 si falla una comprobación
numérica.
"""
from __future__ import annotations

import logging
import sys
import time
from pathlib import Path

import click
import numpy as np
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .errors import ConfigurationError, DatasetError, InputError, NumericError
from .examples.fixtures import wl_g1, wl_g2
from .graph import (
    Graph,
    Population,
    dataset_homophily,
    dataset_stats,
    homophily_histogram,
    one_hot,
    stats_table,
)
from .harness import (
    RunManifest,
    ablation_suite,
    cross_validate,
    layer_sweep,
    make_folds,
    write_ablation,
    write_cv_results,
    write_summary,
    write_sweep,
)
from .model import IHGNNConfig, IHGNNModel, Variant, loss_and_gradients
from .nn import grad_check
from .svg import histogram_svg, line_svg
from .tud import load_dataset
from .wl import wl_test

log = logging.getLogger("ihgnn")

EXIT_USAGE = 1
EXIT_DATASET = 2
EXIT_NUMERIC = 3


class IHGNNGroup(click.Group):
    """Grupo de click que traduce las excepciones a los códigos de salida."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        code = 0
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            if isinstance(rv, int):
                code = rv
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Abortado", err=True)
            code = EXIT_USAGE
        except (ConfigurationError, InputError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_USAGE
        except DatasetError as e:
            click.echo(f"Error en los datos: {e}", err=True)
            code = EXIT_DATASET
        except NumericError as e:
            click.echo(f"Error numérico: {e}", err=True)
            code = EXIT_NUMERIC
        if standalone_mode:
            sys.exit(code)
        return code


def dataset_options(f):
    f = click.option(
        "--dataset", "dataset", required=True, help="Nombre del dataset (p. ej. MUTAG)."
    )(f)
    f = click.option(
        "--dataset-dir",
        type=click.Path(path_type=Path),
        envvar="IHGNN_DATASETS",
        default=".",
        show_default=True,
        help="Directorio con una carpeta por dataset.",
    )(f)
    return f


def config_options(f):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path)),
        click.option("--layers", type=int, help="Número de capas K."),
        click.option("--hidden", type=int, help="Dimensión r de los embeddings."),
        click.option("--batch", type=int, help="Tamaño del lote."),
        click.option("--epochs", type=int),
        click.option("--dropout", type=float),
        click.option("--lr", type=float),
        click.option("--variant", type=click.Choice([v.value for v in Variant])),
        click.option("--seed", type=int),
        click.option("--stratified/--no-stratified", default=None),
        click.option("--deterministic/--no-deterministic", default=None),
        click.option(
            "--out",
            type=click.Path(file_okay=False, path_type=Path),
            default=".",
            show_default=True,
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def build_config(
    config_path: Path | None,
    layers=None,
    hidden=None,
    batch=None,
    epochs=None,
    dropout=None,
    lr=None,
    variant=None,
    seed=None,
    stratified=None,
    deterministic=None,
) -> IHGNNConfig:
    """Configuración del fichero `--config` con los flags por encima."""
    base = IHGNNConfig.load(config_path) if config_path else IHGNNConfig()
    overrides = {
        "num_layers": layers,
        "embed_dim": hidden,
        "batch_size": batch,
        "epochs": epochs,
        "dropout": dropout,
        "lr": lr,
        "variant": Variant(variant) if variant else None,
        "seed": seed,
        "stratified": stratified,
        "deterministic": deterministic,
    }
    return base.replace(**{k: v for k, v in overrides.items() if v is not None})


def _load(dataset_dir: Path, dataset: str):
    return load_dataset(dataset_dir / dataset, dataset)


def _out_dir(out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group(cls=IHGNNGroup)
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log a nivel DEBUG.")
def cli(verbose: bool):
    """Clasificación de grafos con IHGNN, homofilia y 1-WL."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@cli.command()
@click.option(
    "--dataset-dir",
    type=click.Path(path_type=Path),
    envvar="IHGNN_DATASETS",
    default=".",
    show_default=True,
)
@click.option("--dataset", "datasets", multiple=True, required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--pretty", is_flag=True, help="Tabla rich en lugar de CSV.")
def stats(dataset_dir: Path, datasets: tuple[str, ...], out: Path | None, pretty: bool):
    """
    Tamaño, clases, nodos y aristas medios, etiquetas y homofilia β. Con
    `--out`, el manifiesto se escribe en el mismo directorio que el CSV.
    """
    manifest = RunManifest("stats", None, ",".join(datasets), __version__)
    start = time.perf_counter()
    rows = []
    for name in datasets:
        d = _load(dataset_dir, name)
        rows.append(
            (
                dataset_stats(d),
                dataset_homophily(d, Population.PER_GRAPH),
                dataset_homophily(d, Population.PER_NODE),
            )
        )
    df = pd.DataFrame(
        [
            s.as_row()
            | {
                "beta_graph_mean": g.mean,
                "beta_graph_std": g.std,
                "beta_node_mean": n.mean,
                "beta_node_std": n.std,
            }
            for s, g, n in rows
        ]
    )
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(out, index=False)
        manifest.options["out"] = out.name
        manifest.finish(time.perf_counter() - start).write(out.parent / "manifest.txt")
    if pretty:
        Console().print(stats_table(rows))
    else:
        click.echo(df.to_csv(index=False), nl=False)


@cli.command()
@dataset_options
@click.option("--bins", type=int, default=10, show_default=True)
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), default=".", show_default=True
)
def homophily(dataset_dir: Path, dataset: str, bins: int, out: Path):
    """Histograma de α_v en CSV y SVG."""
    manifest = RunManifest("homophily", None, dataset, __version__, options={"bins": bins})
    start = time.perf_counter()
    d = _load(dataset_dir, dataset)
    histogram = homophily_histogram(d, bins)
    out = _out_dir(out)
    pd.DataFrame(
        [(lo, hi, count) for (lo, hi), count in histogram],
        columns=["bin_low", "bin_high", "count"],
    ).to_csv(out / f"{dataset}_homophily.csv", index=False)
    histogram_svg(histogram, f"{dataset}: homofilia", out / f"{dataset}_homophily.svg")
    manifest.finish(time.perf_counter() - start).write(out / "manifest.txt")
    click.echo(f"β por grafo: {dataset_homophily(d, Population.PER_GRAPH)}")
    click.echo(f"β por nodo: {dataset_homophily(d, Population.PER_NODE)}")


@cli.command()
@dataset_options
@config_options
@click.option(
    "--save-models",
    is_flag=True,
    help="Guarda el modelo final de cada partición en OUT/models.",
)
def train(
    dataset_dir: Path, dataset: str, config_path, out: Path, save_models: bool, **flags
):
    """Validación cruzada de una configuración."""
    config = build_config(config_path, **flags)
    d = _load(dataset_dir, dataset)
    out = _out_dir(out)
    manifest = RunManifest("train", config, dataset, __version__)
    checkpoint_dir = out / "models" if save_models else None
    if checkpoint_dir is not None:
        manifest.options["models"] = checkpoint_dir.name
    result = cross_validate(d, config, checkpoint_dir=checkpoint_dir)
    write_cv_results(result, out / "cv_results.csv")
    write_summary([result], out / "summary.csv")
    manifest.finish(result.wall_time).write(out / "manifest.txt")
    log.info("Resultados en %s", out)
    Console().print(result.display())


@cli.command()
@dataset_options
@config_options
def ablate(dataset_dir: Path, dataset: str, config_path, out: Path, **flags):
    """Las cinco variantes con las mismas particiones."""
    config = build_config(config_path, **flags)
    d = _load(dataset_dir, dataset)
    out = _out_dir(out)
    manifest = RunManifest("ablate", config, dataset, __version__)
    start = time.perf_counter()
    results = ablation_suite(d, config)
    write_ablation(results, out / "ablation.csv")
    write_summary(results.values(), out / "summary.csv")
    manifest.finish(time.perf_counter() - start).write(out / "manifest.txt")
    log.info("Resultados en %s", out)
    for result in results.values():
        Console().print(result.display())


def _parse_layer_values(ctx, param, value: str) -> list[int]:
    try:
        values = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"lista de enteros inválida: {value!r}")
    if not values:
        raise click.BadParameter("lista vacía")
    return values


@cli.command()
@dataset_options
@config_options
@click.option(
    "--layer-values",
    default="2,3,4,5",
    show_default=True,
    callback=_parse_layer_values,
    help="Valores de K separados por comas.",
)
def sweep(
    dataset_dir: Path, dataset: str, config_path, out: Path, layer_values: list[int], **flags
):
    """Sensibilidad al número de capas."""
    config = build_config(config_path, **flags)
    d = _load(dataset_dir, dataset)
    out = _out_dir(out)
    manifest = RunManifest("sweep", config, dataset, __version__)
    start = time.perf_counter()
    plan = make_folds(d, config.seed, config.stratified, config.num_folds)
    results = layer_sweep(d, config, layer_values, plan)
    write_sweep(results, out / "sweep.csv")
    line_svg(
        [(k, r.mean_accuracy, r.std_accuracy) for k, r in results.items()],
        f"{dataset}: precisión según K",
        out / "sweep.svg",
    )
    manifest.finish(time.perf_counter() - start).write(out / "manifest.txt")
    log.info("Resultados en %s", out)


@cli.command("wl-test")
@click.option("--dataset-dir", type=click.Path(path_type=Path), envvar="IHGNN_DATASETS")
@click.option("--dataset")
@click.option(
    "--graphs",
    nargs=2,
    type=int,
    default=None,
    help="Índices de los dos grafos del dataset.",
)
@click.option("--rounds", type=int, default=3, show_default=True)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    help="Directorio para wl_test.csv y el manifiesto.",
)
@click.option(
    "--render",
    type=click.Path(file_okay=False, path_type=Path),
    help="Directorio donde dibujar los dos grafos con graphviz.",
)
def wl_test_cmd(dataset_dir, dataset, graphs, rounds: int, out: Path | None, render: Path | None):
    """
    Test 1-WL entre dos grafos; por defecto, el par de ejemplo incluido.
    Escribe el veredicto y los multiconjuntos de colores de cada ronda en CSV.
    """
    manifest = RunManifest("wl-test", None, dataset or "wl_pair", __version__)
    start = time.perf_counter()
    if dataset:
        if not graphs:
            raise click.UsageError("--dataset necesita --graphs I J")
        d = _load(Path(dataset_dir or "."), dataset)
        for i in graphs:
            if not 0 <= i < len(d):
                raise InputError(f"{dataset} no tiene el grafo {i}")
        g1, g2 = d.graphs[graphs[0]], d.graphs[graphs[1]]
    else:
        g1, g2 = wl_g1, wl_g2
    result = wl_test(g1, g2, rounds)
    df = pd.DataFrame(
        [
            (k, graph, color, count)
            for k, multisets in enumerate(result.history)
            for graph, multiset in enumerate(multisets, start=1)
            for color, count in sorted(multiset.items())
        ],
        columns=["round", "graph", "color", "count"],
    )
    click.echo(str(result))
    click.echo(df.to_csv(index=False), nl=False)
    if render is not None:
        render.mkdir(parents=True, exist_ok=True)
        for name, g in (("g1", g1), ("g2", g2)):
            log.info("Dibujado %s", g.render_graph(render / f"{name}.gv"))
    if out is not None:
        out = _out_dir(out)
        df.to_csv(out / "wl_test.csv", index=False)
        if dataset:
            manifest.options["graphs"] = " ".join(map(str, graphs))
        manifest.options |= {
            "rounds": rounds,
            "verdict": result.verdict.value,
            "verdict_round": result.round,
        }
        manifest.finish(time.perf_counter() - start).write(out / "manifest.txt")


@cli.command()
@click.option("--nodes", type=int, default=5, show_default=True)
@click.option("--edge-prob", type=float, default=0.5, show_default=True)
@click.option("--labels", type=int, default=3, show_default=True)
@click.option("--layers", type=int, default=3, show_default=True)
@click.option("--hidden", type=int, default=8, show_default=True)
@click.option("--variant", type=click.Choice([v.value for v in Variant]), default="full")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--samples", type=int, default=10, show_default=True)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    help="Directorio para gradcheck.csv y el manifiesto.",
)
def gradcheck(
    nodes: int,
    edge_prob: float,
    labels: int,
    layers: int,
    hidden: int,
    variant: str,
    seed: int,
    tol: float,
    samples: int,
    out: Path | None,
):
    """Compara los gradientes del modelo con diferencias finitas."""
    start = time.perf_counter()
    if nodes < 1 or labels < 1:
        raise click.BadParameter("--nodes y --labels deben ser positivos")
    rng = np.random.default_rng(seed)
    g = Graph.random(nodes, edge_prob, labels, rng)
    config = IHGNNConfig(
        num_layers=layers,
        embed_dim=hidden,
        classifier_hidden=2 * hidden,
        pad_size=nodes,
        num_features=labels,
        num_classes=2,
        variant=Variant(variant),
        seed=seed,
    ).validate()
    manifest = RunManifest(
        "gradcheck", config, "random", __version__, options={"edge_prob": edge_prob}
    )
    model = IHGNNModel.init(config, rng)
    batch = [(g, one_hot(g, labels), int(rng.integers(2)))]
    error = grad_check(
        lambda: loss_and_gradients(model, batch, training=False),
        model.parameters(),
        tolerance=tol,
        num_samples=samples,
        rng=rng,
    )
    click.echo(f"max_rel_error={error:.3e}")
    if out is not None:
        out = _out_dir(out)
        pd.DataFrame(
            [
                {
                    "seed": seed,
                    "nodes": nodes,
                    "edges": g.num_edges,
                    "layers": layers,
                    "variant": variant,
                    "samples": samples,
                    "max_rel_error": error,
                    "tol": tol,
                    "passed": error <= tol,
                }
            ]
        ).to_csv(out / "gradcheck.csv", index=False)
        manifest.finish(time.perf_counter() - start).write(out / "manifest.txt")
    if error > tol:
        raise NumericError(f"error relativo {error:.3e} mayor que {tol:g}")


def main():
    cli()


if __name__ == "__main__":
    main()
