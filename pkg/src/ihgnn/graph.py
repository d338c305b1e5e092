from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np
from rich.table import Table as rTable

from .errors import ConfigurationError, InputError

log = logging.getLogger(__name__)

# Arista no dirigida, guardada siempre con el menor índice primero.
Edge = tuple[int, int]


def normalize_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class Graph:
    """
    Grafo no dirigido con etiquetas enteras en los nodos.

    Los nodos son los índices `0, ..., num_nodes - 1`. Las etiquetas son
    índices del alfabeto Σ del dataset al que pertenece el grafo. El grafo no
    se modifica tras su construcción: las operaciones que lo transforman
    (`permute`, `relabel`) devuelven un grafo nuevo.
    """

    def __init__(
        self, num_nodes: int, edges: Iterable[Edge], node_labels: Sequence[int]
    ) -> None:
        """
        Args:
            num_nodes: número de nodos.
            edges: pares de nodos. El orden dentro del par y los duplicados
                no importan.
            node_labels: etiqueta de cada nodo.
        """
        if num_nodes < 0:
            raise InputError(f"Número de nodos negativo: {num_nodes}")
        if len(node_labels) != num_nodes:
            raise InputError(
                f"Se esperaban {num_nodes} etiquetas y hay {len(node_labels)}"
            )
        normalized: set[Edge] = set()
        for u, v in edges:
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise InputError(f"Arista ({u}, {v}) fuera de rango")
            if u == v:
                raise InputError(f"Lazo en el nodo {u}: a_(i,i) debe ser 0")
            normalized.add(normalize_edge(u, v))
        self.num_nodes = num_nodes
        self.edges: tuple[Edge, ...] = tuple(sorted(normalized))
        self.node_labels: tuple[int, ...] = tuple(int(l) for l in node_labels)

    def __repr__(self) -> str:
        return f"<Graph n={self.num_nodes} m={self.num_edges}>"

    def __eq__(self, other) -> bool:
        """Dos grafos son iguales si tienen los mismos nodos, aristas y etiquetas."""
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.edges == other.edges
            and self.node_labels == other.node_labels
        )

    def __hash__(self) -> int:
        return hash((self.num_nodes, self.edges, self.node_labels))

    def __len__(self) -> int:
        return self.num_nodes

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """
        Matriz de adyacencia densa A (simétrica, diagonal nula). Es de solo
        lectura.
        """
        A = np.zeros((self.num_nodes, self.num_nodes))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        A.flags.writeable = False
        return A

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Vecinos N_v de cada nodo, en orden ascendente."""
        result: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            result[u].append(v)
            result[v].append(u)
        return tuple(tuple(sorted(ns)) for ns in result)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(ns) for ns in self.neighbors], dtype=int)

    @cached_property
    def isolated_nodes(self) -> list[int]:
        return sorted(nx.isolates(self.to_networkx()))

    def permute(self, perm: Sequence[int]) -> Graph:
        """
        Reordena los nodos: el nodo `i` del grafo resultante es el nodo
        `perm[i]` de este grafo.
        """
        if sorted(perm) != list(range(self.num_nodes)):
            raise InputError("perm no es una permutación de los nodos")
        inverse = [0] * self.num_nodes
        for new, old in enumerate(perm):
            inverse[old] = new
        return Graph(
            self.num_nodes,
            [(inverse[u], inverse[v]) for u, v in self.edges],
            [self.node_labels[old] for old in perm],
        )

    def relabel(self, mapping: dict[int, int]) -> Graph:
        """Aplica una biyección sobre las etiquetas de los nodos."""
        return Graph(
            self.num_nodes, self.edges, [mapping[l] for l in self.node_labels]
        )

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        for v, label in enumerate(self.node_labels):
            G.add_node(v, label=label)
        G.add_edges_from(self.edges)
        return G

    @staticmethod
    def from_networkx(G: nx.Graph, label_attr: str = "label") -> Graph:
        """
        Construye un grafo a partir de un grafo de networkx. Los nodos se
        numeran en el orden en que networkx los recorre.
        """
        index = {node: i for i, node in enumerate(G.nodes)}
        labels = [int(G.nodes[node].get(label_attr, 0)) for node in G.nodes]
        edges = [(index[u], index[v]) for u, v in G.edges if u != v]
        return Graph(len(index), edges, labels)

    @staticmethod
    def random(
        num_nodes: int,
        edge_prob: float,
        num_labels: int,
        rng: np.random.Generator,
    ) -> Graph:
        """
        Grafo aleatorio de Erdős–Rényi con etiquetas uniformes en
        `range(num_labels)`.
        """
        assert num_nodes >= 1 and num_labels >= 1
        upper = np.triu(rng.random((num_nodes, num_nodes)) < edge_prob, k=1)
        edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(upper))]
        labels = rng.integers(0, num_labels, size=num_nodes).tolist()
        return Graph(num_nodes, edges, labels)

    @cached_property
    def graph(self) -> str:
        """Código fuente del grafo en Graphviz (DOT)."""
        lines = [f'{v} [label="{v}: {l}"]' for v, l in enumerate(self.node_labels)]
        lines += [f"{u} -- {v}" for u, v in self.edges]
        return "graph {\n  " + "\n  ".join(lines) + "\n}"

    def render_graph(self, path="./graph.gv", format: str = "svg") -> str:
        """
        Escribe el código DOT del grafo en `path` y lo renderiza con graphviz.

        Returns:
            ruta del fichero renderizado.
        """
        import graphviz

        filepath = Path(path)
        filepath.write_text(self.graph, encoding="utf8")
        try:
            return graphviz.render("dot", format, filepath).replace("\\", "/")
        except graphviz.ExecutableNotFound as e:
            raise ConfigurationError(f"graphviz no encuentra `dot`: {e}") from e


class Dataset:
    """
    Colección de grafos con su clase.

    Las etiquetas de los nodos de cada grafo son índices de `label_alphabet`,
    que guarda los valores originales ordenados de forma ascendente. Si el
    dataset no tiene etiquetas de nodos (`has_node_labels` falso) se usan los
    grados como etiquetas y el alfabeto es el de grados.
    """

    def __init__(
        self,
        name: str,
        graphs: Sequence[Graph],
        graph_labels: Sequence[int],
        label_alphabet: Sequence[int] | None = None,
        num_classes: int | None = None,
        has_node_labels: bool = True,
    ) -> None:
        if len(graphs) != len(graph_labels):
            raise InputError("Cada grafo debe tener exactamente una clase")
        self.name = name
        self.graphs: tuple[Graph, ...] = tuple(graphs)
        self.graph_labels: tuple[int, ...] = tuple(int(y) for y in graph_labels)
        self.num_classes = (
            num_classes
            if num_classes is not None
            else (max(self.graph_labels) + 1 if self.graph_labels else 0)
        )
        if any(not 0 <= y < self.num_classes for y in self.graph_labels):
            raise InputError(f"Clases fuera de [0, {self.num_classes})")
        max_label = max((max(g.node_labels, default=-1) for g in self.graphs), default=-1)
        self.label_alphabet: tuple[int, ...] = (
            tuple(label_alphabet)
            if label_alphabet is not None
            else tuple(range(max_label + 1))
        )
        if max_label >= len(self.label_alphabet):
            raise InputError("Hay etiquetas de nodos fuera del alfabeto")
        self.has_node_labels = has_node_labels
        # Lazos descartados al cargar: (grafo, nodo).
        self.self_loops: tuple[tuple[int, int], ...] = ()

    def __repr__(self) -> str:
        return f"<Dataset {self.name} graphs={len(self)} classes={self.num_classes}>"

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(zip(self.graphs, self.graph_labels))

    @cached_property
    def max_nodes(self) -> int:
        """Tamaño m del grafo con más nodos."""
        return max((g.num_nodes for g in self.graphs), default=0)

    @cached_property
    def degree_alphabet(self) -> tuple[int, ...]:
        """Grados distintos que aparecen en el dataset, en orden ascendente."""
        degrees: set[int] = set()
        for g in self.graphs:
            degrees.update(g.degrees.tolist())
        return tuple(sorted(degrees))

    def subset(self, indices: Iterable[int]) -> Dataset:
        indices = list(indices)
        return Dataset(
            self.name,
            [self.graphs[i] for i in indices],
            [self.graph_labels[i] for i in indices],
            self.label_alphabet,
            self.num_classes,
            self.has_node_labels,
        )


class Population(Enum):
    """Población sobre la que se agrega la homofilia de un dataset."""

    PER_NODE = "per-node"
    PER_GRAPH = "per-graph"


@dataclass(frozen=True)
class HomophilyStats:
    """
    Homofilia de un dataset: los α_v de todos los nodos, los β de cada grafo y
    la media y desviación típica de la población elegida.
    """

    per_node_alphas: np.ndarray
    per_graph_betas: np.ndarray
    population: Population

    @property
    def values(self) -> np.ndarray:
        match self.population:
            case Population.PER_NODE:
                return self.per_node_alphas
            case Population.PER_GRAPH:
                return self.per_graph_betas

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values.size else 0.0

    @property
    def std(self) -> float:
        return float(np.std(self.values)) if self.values.size else 0.0

    def __str__(self) -> str:
        return f"{self.mean:.2f}±{self.std:.2f}"


@dataclass(frozen=True)
class DatasetStats:
    """Fila de estadísticas de un dataset, como en una tabla de benchmarks."""

    name: str
    size: int
    num_classes: int
    avg_nodes: float
    avg_edges: float
    num_node_labels: int

    def as_row(self) -> dict[str, object]:
        return {
            "dataset": self.name,
            "size": self.size,
            "num_classes": self.num_classes,
            "avg_nodes": self.avg_nodes,
            "avg_edges": self.avg_edges,
            "num_node_labels": self.num_node_labels,
        }


def node_homophily(g: Graph, v: int) -> float:
    """
    Ratio de homofilia α_v: fracción de vecinos de `v` con su misma etiqueta.

    Los nodos aislados tienen α_v = 0.
    """
    if not 0 <= v < g.num_nodes:
        raise InputError(f"Nodo {v} fuera de rango (n={g.num_nodes})")
    neighbors = g.neighbors[v]
    if len(neighbors) == 0:
        log.warning("Nodo aislado %d: se toma α_v = 0", v)
        return 0.0
    same = sum(1 for u in neighbors if g.node_labels[u] == g.node_labels[v])
    return same / len(neighbors)


def node_homophilies(g: Graph, warn: bool = True) -> np.ndarray:
    """Versión vectorizada de `node_homophily` para todos los nodos de `g`."""
    labels = np.asarray(g.node_labels)
    same = (g.adjacency * (labels[:, None] == labels[None, :])).sum(axis=1)
    degrees = g.degrees
    if warn and np.any(degrees == 0):
        log.warning(
            "%d nodos aislados en %r: se toma α_v = 0", int(np.sum(degrees == 0)), g
        )
    return np.divide(
        same, degrees, out=np.zeros(g.num_nodes), where=degrees > 0
    )


def graph_homophily(g: Graph) -> float:
    """Ratio de homofilia β del grafo: media de α_v sobre todos sus nodos."""
    if g.num_nodes == 0:
        raise InputError("La homofilia de un grafo vacío no está definida")
    return float(np.mean(node_homophilies(g)))


def dataset_homophily(
    d: Dataset, population: Population = Population.PER_GRAPH
) -> HomophilyStats:
    """
    Homofilia de un dataset.

    Args:
        d: dataset no vacío.
        population: `PER_NODE` agrega todos los α_v juntos; `PER_GRAPH` agrega
            el β de cada grafo.
    """
    if len(d) == 0:
        raise InputError("Dataset vacío")
    alphas: list[np.ndarray] = []
    betas: list[float] = []
    isolated = 0
    for g in d.graphs:
        if g.num_nodes == 0:
            continue
        a = node_homophilies(g, warn=False)
        isolated += int(np.sum(g.degrees == 0))
        alphas.append(a)
        betas.append(float(np.mean(a)))
    if isolated:
        log.warning("%s: %d nodos aislados con α_v = 0", d.name, isolated)
    return HomophilyStats(
        np.concatenate(alphas) if alphas else np.zeros(0),
        np.asarray(betas),
        population,
    )


def homophily_histogram(
    d: Dataset, num_bins: int
) -> list[tuple[tuple[float, float], int]]:
    """
    Histograma de los α_v de todos los nodos del dataset.

    Los intervalos son cerrados por la izquierda y abiertos por la derecha,
    salvo el último, que es cerrado: α_v = 1 cae en el último intervalo.
    """
    if num_bins < 1:
        raise InputError(f"El número de intervalos debe ser positivo: {num_bins}")
    alphas = dataset_homophily(d, Population.PER_NODE).per_node_alphas
    counts, edges = np.histogram(alphas, bins=num_bins, range=(0.0, 1.0))
    return [
        ((float(edges[i]), float(edges[i + 1])), int(counts[i]))
        for i in range(num_bins)
    ]


def dataset_stats(d: Dataset) -> DatasetStats:
    if len(d) == 0:
        raise InputError("Dataset vacío")
    return DatasetStats(
        name=d.name,
        size=len(d),
        num_classes=d.num_classes,
        avg_nodes=float(np.mean([g.num_nodes for g in d.graphs])),
        avg_edges=float(np.mean([g.num_edges for g in d.graphs])),
        num_node_labels=len(d.label_alphabet) if d.has_node_labels else 0,
    )


def one_hot(g: Graph, num_labels: int) -> np.ndarray:
    """Codificación one-hot (n × num_labels) de las etiquetas de `g`."""
    return np.eye(num_labels)[list(g.node_labels)].reshape(g.num_nodes, num_labels)


def one_hot_features(d: Dataset) -> list[np.ndarray]:
    """
    Matriz X (n × c) de cada grafo con la codificación one-hot de la
    etiqueta de cada nodo.

    Si el dataset no tiene etiquetas, se usa el grado de cada nodo como
    etiqueta y c es el número de grados distintos del dataset.
    """
    if d.has_node_labels:
        return [one_hot(g, len(d.label_alphabet)) for g in d.graphs]
    log.info("%s no tiene etiquetas de nodos: se usan los grados", d.name)
    alphabet = np.asarray(d.degree_alphabet)
    eye = np.eye(len(alphabet))
    return [eye[np.searchsorted(alphabet, g.degrees)] for g in d.graphs]


def stats_table(rows: Sequence[tuple[DatasetStats, HomophilyStats, HomophilyStats]]):
    """
    Tabla de estadísticas en formato rich, redondeando a dos decimales.
    Cada fila incluye la homofilia por grafo y por nodo.
    """
    t = rTable()
    for header in ["Dataset", "Size", "Class #", "Avg node #", "Avg edge #"]:
        t.add_column(header)
    t.add_column("Node label #")
    t.add_column("β (grafo)", style="green")
    t.add_column("β (nodo)", style="green")
    for stats, per_graph, per_node in rows:
        t.add_row(
            stats.name,
            str(stats.size),
            str(stats.num_classes),
            f"{stats.avg_nodes:.2f}",
            f"{stats.avg_edges:.2f}",
            str(stats.num_node_labels) if stats.num_node_labels else "N/A",
            str(per_graph),
            str(per_node),
        )
    return t
