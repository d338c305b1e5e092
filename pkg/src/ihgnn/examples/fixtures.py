from ..graph import Dataset, Graph

# Par de grafos del ejemplo clásico de una ronda de 1-WL. Los nodos n1..n6 son
# los índices 0..5 y las etiquetas son Σ = {1, 2, 3, 4}.
wl_g1 = Graph(
    6,
    [(3, 5), (4, 0), (1, 4), (2, 3), (4, 2), (5, 2)],
    [1, 1, 3, 3, 4, 2],
)

wl_g2 = Graph(
    6,
    [(5, 3), (4, 0), (1, 0), (4, 5), (0, 2), (5, 2)],
    [1, 1, 3, 2, 4, 3],
)

triangle = Graph(3, [(0, 1), (1, 2), (0, 2)], [1, 1, 2])

uniform_triangle = Graph(3, [(0, 1), (1, 2), (0, 2)], [0, 0, 0])

path2 = Graph(2, [(0, 1)], [1, 2])

path3 = Graph(3, [(0, 1), (1, 2)], [0, 1, 0])

star = Graph(4, [(0, 1), (0, 2), (0, 3)], [0, 1, 1, 2])

single_node = Graph(1, [], [0])

fixture_graphs = [wl_g1, wl_g2, triangle, uniform_triangle, path2, path3, star]


def triangle_dataset() -> Dataset:
    return Dataset("TRIANGLE", [triangle], [0], label_alphabet=[0, 1, 2])


def wl_pair_dataset() -> Dataset:
    return Dataset("WLPAIR", [wl_g1, wl_g2], [0, 1], label_alphabet=range(5))
