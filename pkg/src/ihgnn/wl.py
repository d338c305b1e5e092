"""
Refinamiento de colores de Weisfeiler-Lehman de primer orden (1-WL).

En cada ronda, el nuevo color de un nodo es la imagen por una función
inyectiva de su firma: su color actual seguido de los colores de sus vecinos
en orden ascendente. La función inyectiva es un diccionario compartido entre
todos los grafos que se refinan juntos, de forma que firmas iguales reciben
el mismo color en grafos distintos.
"""
from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

from .graph import Graph

# Firma numérica de un nodo: (color propio, colores de los vecinos ordenados).
Signature = tuple[int, tuple[int, ...]]


def signature_str(signature: Signature) -> str:
    own, neighbors = signature
    return f"{own}|{','.join(map(str, neighbors))}"


@dataclass(frozen=True)
class Coloring:
    """
    Coloración compartida de una lista de grafos.

    Attributes:
        colors: color de cada nodo, una tupla por grafo.
        alphabet: diccionario inyectivo firma → color acumulado en todas las
            rondas.
        round: número de rondas de refinamiento aplicadas.
        next_color: primer color libre.
    """

    colors: tuple[tuple[int, ...], ...]
    alphabet: dict[str, int] = field(default_factory=dict)
    round: int = 0
    next_color: int = 0

    @staticmethod
    def initial(graphs: Sequence[Graph]) -> Coloring:
        """Coloración inicial: las etiquetas de los nodos."""
        colors = tuple(tuple(g.node_labels) for g in graphs)
        top = max((max(c, default=-1) for c in colors), default=-1)
        return Coloring(colors, {}, 0, top + 1)

    def multiset(self, graph: int = 0) -> Counter[int]:
        return Counter(self.colors[graph])

    def num_colors(self, graph: int = 0) -> int:
        return len(set(self.colors[graph]))


def _signature(g: Graph, colors: Sequence[int], v: int) -> Signature:
    return (colors[v], tuple(sorted(colors[u] for u in g.neighbors[v])))


def wl_signature(g: Graph, coloring: Coloring, v: int, graph: int = 0) -> str:
    """
    Firma de `v`: su color y los colores ordenados de sus vecinos, por
    ejemplo `"4|1,1,3"`. Un nodo aislado de color 2 tiene firma `"2|"`.

    Args:
        graph: posición de `g` dentro de los grafos de `coloring`.
    """
    assert len(coloring.colors[graph]) == g.num_nodes
    return signature_str(_signature(g, coloring.colors[graph], v))


def wl_refine_step(graphs: Sequence[Graph], coloring: Coloring) -> Coloring:
    """
    Una ronda de refinamiento sobre todos los grafos a la vez.

    Las firmas nuevas se numeran a partir de `coloring.next_color` recorriéndolas
    en orden ascendente, así que el color asignado no depende de cómo estén
    numerados los nodos.
    """
    assert len(graphs) == len(coloring.colors)
    signatures = [
        [_signature(g, colors, v) for v in range(g.num_nodes)]
        for g, colors in zip(graphs, coloring.colors)
    ]
    alphabet = dict(coloring.alphabet)
    next_color = coloring.next_color
    for sig in sorted({s for sigs in signatures for s in sigs}):
        key = signature_str(sig)
        if key not in alphabet:
            alphabet[key] = next_color
            next_color += 1
    colors = tuple(
        tuple(alphabet[signature_str(s)] for s in sigs) for sigs in signatures
    )
    return Coloring(colors, alphabet, coloring.round + 1, next_color)


def wl_colors(graphs: Sequence[Graph], rounds: int) -> Coloring:
    """Coloración compartida tras `rounds` rondas."""
    coloring = Coloring.initial(graphs)
    for _ in range(rounds):
        coloring = wl_refine_step(graphs, coloring)
    return coloring


class WLVerdict(Enum):
    NON_ISOMORPHIC = "NonIsomorphic"
    POSSIBLY_ISOMORPHIC = "PossiblyIsomorphic"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class WLResult:
    """
    Resultado del test: el veredicto, la ronda en la que se decidió y los
    multiconjuntos de colores de los dos grafos en cada ronda.
    """

    verdict: WLVerdict
    round: int
    history: list[tuple[Counter[int], Counter[int]]]

    def __str__(self) -> str:
        return f"{self.verdict} round={self.round}"


def wl_test(g1: Graph, g2: Graph, max_rounds: int) -> WLResult:
    """
    Test de isomorfismo 1-WL.

    Se refina hasta que los multiconjuntos de colores difieren (los grafos no
    son isomorfos), hasta que la partición deja de crecer en los dos grafos o
    hasta `max_rounds` rondas (posiblemente isomorfos).
    """
    assert max_rounds >= 0
    coloring = Coloring.initial([g1, g2])
    history = [(coloring.multiset(0), coloring.multiset(1))]
    if g1.num_nodes != g2.num_nodes or history[0][0] != history[0][1]:
        return WLResult(WLVerdict.NON_ISOMORPHIC, 0, history)
    for k in range(1, max_rounds + 1):
        refined = wl_refine_step([g1, g2], coloring)
        history.append((refined.multiset(0), refined.multiset(1)))
        if history[-1][0] != history[-1][1]:
            return WLResult(WLVerdict.NON_ISOMORPHIC, k, history)
        stable = all(
            refined.num_colors(i) == coloring.num_colors(i) for i in range(2)
        )
        coloring = refined
        if stable:
            return WLResult(WLVerdict.POSSIBLY_ISOMORPHIC, k, history)
    return WLResult(WLVerdict.POSSIBLY_ISOMORPHIC, coloring.round, history)


def wl_node_order(g: Graph, rounds: int) -> list[int]:
    """
    Orden de los nodos por su color final de 1-WL, ascendente. Los empates
    se deshacen por el índice original del nodo.
    """
    assert rounds >= 0
    colors = wl_colors([g], rounds).colors[0]
    return sorted(range(g.num_nodes), key=lambda v: (colors[v], v))


def wl_history(
    g1: Graph, g2: Graph, max_rounds: int
) -> list[tuple[Counter[int], Counter[int]]]:
    """Multiconjuntos de colores de los dos grafos en cada ronda, sin parar antes."""
    coloring = Coloring.initial([g1, g2])
    history = [(coloring.multiset(0), coloring.multiset(1))]
    for _ in range(max_rounds):
        coloring = wl_refine_step([g1, g2], coloring)
        history.append((coloring.multiset(0), coloring.multiset(1)))
    return history
