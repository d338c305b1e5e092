"""
Lectura y escritura de datasets en el formato de texto de TUDataset.

Un dataset `DS` es un directorio con los ficheros:

- `DS_A.txt`: una arista `i, j` por línea, con identificadores globales de
  nodo que empiezan en 1.
- `DS_graph_indicator.txt`: el grafo (desde 1) al que pertenece cada nodo.
- `DS_graph_labels.txt`: la clase de cada grafo.
- `DS_node_labels.txt` (opcional): la etiqueta de cada nodo.

El resto de ficheros (atributos, etiquetas de aristas) se ignoran.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from functools import wraps
from pathlib import Path
from typing import TypeVar

from .errors import DatasetFormatError, DatasetLoadError
from .graph import Dataset, Graph

log = logging.getLogger(__name__)

T = TypeVar("T")

# Fila de un fichero: número de línea (desde 1) y enteros separados por comas.
Row = tuple[int, list[int]]


def tud_file(suffix: str, required: bool = True):
    """
    Decorador para las funciones que interpretan un fichero del dataset.

    La función decorada recibe las filas no vacías del fichero ya convertidas
    a enteros, junto con la ruta, y se llama con `(directory, name)`. Si el
    fichero no existe y no es obligatorio, devuelve None.
    """

    def decorator(fn: Callable[[list[Row], Path], T]) -> Callable[..., T | None]:
        @wraps(fn)
        def result(directory: Path | str, name: str) -> T | None:
            path = Path(directory) / f"{name}_{suffix}.txt"
            if not path.is_file():
                if required:
                    raise DatasetLoadError("fichero no encontrado", path)
                return None
            try:
                text = path.read_text(encoding="utf8")
            except OSError as e:
                raise DatasetLoadError(str(e), path) from e
            rows: list[Row] = []
            for i, line in enumerate(text.splitlines(), start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append((i, [int(field) for field in line.split(",")]))
                except ValueError:
                    raise DatasetFormatError(f"entero inválido: {line!r}", path, i)
            return fn(rows, path)

        return result

    return decorator


@tud_file("A")
def read_edges(rows: list[Row], path: Path) -> list[tuple[int, int, int]]:
    """Aristas como tuplas `(línea, i, j)` con identificadores globales."""
    edges = []
    for line, values in rows:
        if len(values) != 2:
            raise DatasetFormatError("se esperaban dos nodos por arista", path, line)
        edges.append((line, values[0], values[1]))
    return edges


@tud_file("graph_indicator")
def read_graph_indicator(rows: list[Row], path: Path) -> list[int]:
    return [values[0] for _, values in rows]


@tud_file("graph_labels")
def read_graph_labels(rows: list[Row], path: Path) -> list[int]:
    return [values[0] for _, values in rows]


@tud_file("node_labels", required=False)
def read_node_labels(rows: list[Row], path: Path) -> list[int]:
    return [values[0] for _, values in rows]


def load_dataset(directory: Path | str, name: str) -> Dataset:
    """
    Carga el dataset `name` del directorio `directory`.

    Las aristas se simetrizan y se eliminan los duplicados, así que da igual
    que el fichero incluya las dos direcciones de cada arista o solo una. Los
    lazos se descartan (la matriz de adyacencia tiene diagonal nula) y quedan
    registrados en `Dataset.self_loops`. Las clases se renumeran a
    `[0, C)` y las etiquetas de los nodos a índices del alfabeto, ordenado de
    forma ascendente.

    Raises:
        DatasetLoadError: si falta algún fichero obligatorio.
        DatasetFormatError: si algún fichero no respeta el formato.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetLoadError("directorio no encontrado", directory)

    indicator = read_graph_indicator(directory, name)
    raw_graph_labels = read_graph_labels(directory, name)
    raw_node_labels = read_node_labels(directory, name)
    edges = read_edges(directory, name)
    assert indicator is not None and raw_graph_labels is not None
    assert edges is not None

    indicator_path = directory / f"{name}_graph_indicator.txt"
    num_graphs = len(raw_graph_labels)
    for line, graph_id in enumerate(indicator, start=1):
        if not 1 <= graph_id <= num_graphs:
            raise DatasetFormatError(
                f"grafo {graph_id} fuera de [1, {num_graphs}]", indicator_path, line
            )
    num_nodes = len(indicator)
    if raw_node_labels is not None and len(raw_node_labels) != num_nodes:
        raise DatasetFormatError(
            f"{len(raw_node_labels)} etiquetas para {num_nodes} nodos",
            directory / f"{name}_node_labels.txt",
        )

    # Índice local de cada nodo global dentro de su grafo.
    members: list[list[int]] = [[] for _ in range(num_graphs)]
    local = [0] * num_nodes
    for node, graph_id in enumerate(indicator):
        local[node] = len(members[graph_id - 1])
        members[graph_id - 1].append(node)

    edges_path = directory / f"{name}_A.txt"
    graph_edges: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    directed: set[tuple[int, int]] = set()
    self_loops: list[tuple[int, int]] = []
    for line, i, j in edges:
        for node in (i, j):
            if not 1 <= node <= num_nodes:
                raise DatasetFormatError(
                    f"nodo {node} fuera de [1, {num_nodes}]", edges_path, line
                )
        g_i, g_j = indicator[i - 1], indicator[j - 1]
        if g_i != g_j:
            raise DatasetFormatError(
                f"la arista ({i}, {j}) une los grafos {g_i} y {g_j}", edges_path, line
            )
        if i == j:
            log.warning("%s:%d: lazo en el nodo %d descartado", edges_path.name, line, i)
            self_loops.append((g_i - 1, local[i - 1]))
            continue
        directed.add((i, j))
        graph_edges[g_i - 1].append((local[i - 1], local[j - 1]))
    missing = sum(1 for i, j in directed if (j, i) not in directed)
    if missing:
        log.warning(
            "%s: %d aristas sin su recíproca, se simetriza la lista",
            edges_path.name,
            missing,
        )

    class_values = sorted(set(raw_graph_labels))
    class_index = {y: c for c, y in enumerate(class_values)}
    graph_labels = [class_index[y] for y in raw_graph_labels]

    if raw_node_labels is not None:
        alphabet = sorted(set(raw_node_labels))
        label_index = {l: k for k, l in enumerate(alphabet)}
        graphs = [
            Graph(
                len(nodes),
                graph_edges[g],
                [label_index[raw_node_labels[node]] for node in nodes],
            )
            for g, nodes in enumerate(members)
        ]
        dataset = Dataset(
            name, graphs, graph_labels, alphabet, len(class_values), True
        )
    else:
        unlabeled = [
            Graph(len(nodes), graph_edges[g], [0] * len(nodes))
            for g, nodes in enumerate(members)
        ]
        degrees = sorted({int(d) for g in unlabeled for d in g.degrees})
        degree_index = {d: k for k, d in enumerate(degrees)}
        graphs = [
            Graph(g.num_nodes, g.edges, [degree_index[int(d)] for d in g.degrees])
            for g in unlabeled
        ]
        dataset = Dataset(name, graphs, graph_labels, degrees, len(class_values), False)
    dataset.self_loops = tuple(self_loops)
    log.debug(
        "%s: %d grafos, %d clases, m=%d", name, len(dataset), dataset.num_classes,
        dataset.max_nodes,
    )
    return dataset


def validate(d: Dataset) -> list[str]:
    """
    Revisa la integridad estructural de un dataset sin modificarlo.

    Returns:
        un aviso por cada grafo vacío, cada nodo aislado y cada lazo
        descartado al cargar.
    """
    warnings: list[str] = []
    for k, g in enumerate(d.graphs):
        if g.num_nodes == 0:
            warnings.append(f"grafo {k}: vacío")
            continue
        for v in g.isolated_nodes:
            warnings.append(f"grafo {k}: nodo {v} aislado")
    for k, v in d.self_loops:
        warnings.append(f"grafo {k}: lazo descartado en el nodo {v}")
    return warnings


def write_fixture(d: Dataset, directory: Path | str) -> Path:
    """
    Escribe `d` en `directory` con el formato de TUDataset, de forma que
    `load_dataset(directory, d.name)` devuelve un dataset con la misma
    estructura. Cada arista se escribe en las dos direcciones.

    Returns:
        el directorio escrito.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edge_lines: list[str] = []
    indicator_lines: list[str] = []
    node_label_lines: list[str] = []
    offset = 1
    for k, g in enumerate(d.graphs, start=1):
        for u, v in g.edges:
            edge_lines.append(f"{u + offset}, {v + offset}")
            edge_lines.append(f"{v + offset}, {u + offset}")
        indicator_lines += [str(k)] * g.num_nodes
        node_label_lines += [str(d.label_alphabet[l]) for l in g.node_labels]
        offset += g.num_nodes

    def write(suffix: str, lines: list[str]) -> None:
        path = directory / f"{d.name}_{suffix}.txt"
        path.write_text("".join(line + "\n" for line in lines), encoding="utf8")

    write("A", edge_lines)
    write("graph_indicator", indicator_lines)
    write("graph_labels", [str(y) for y in d.graph_labels])
    if d.has_node_labels:
        write("node_labels", node_label_lines)
    return directory
