from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np
from networkx.utils import UnionFind


@dataclass(frozen=True)
class ChordalityReport:
    chordal: bool
    # perfect elimination ordering, present only when chordal
    elimination_order: tuple[int, ...] | None = None


def dependency_graph(x: np.ndarray, threshold: float) -> nx.Graph:
    """Undirected graph with an edge wherever ``|x_ij| > threshold``, ``i != j``."""
    n = x.shape[0]
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    rows, cols = np.nonzero(np.triu(np.abs(x) > threshold, k=1))
    graph.add_weighted_edges_from(
        (int(i), int(j), float(x[i, j])) for i, j in zip(rows, cols)
    )
    return graph


def connected_clusters(graph: nx.Graph) -> list[tuple[int, ...]]:
    """Connected components, members sorted, components ordered by smallest member."""
    forest = UnionFind(graph.nodes)
    for i, j in graph.edges:
        forest.union(i, j)
    components = [tuple(sorted(group)) for group in forest.to_sets()]
    return sorted(components, key=lambda members: members[0])


def maximum_cardinality_search(graph: nx.Graph) -> list[int]:
    """Visit order of MCS; ties go to the lowest node index."""
    weight = {node: 0 for node in graph.nodes}
    order: list[int] = []
    remaining = set(graph.nodes)
    while remaining:
        node = min(remaining, key=lambda v: (-weight[v], v))
        remaining.remove(node)
        order.append(node)
        for other in graph.neighbors(node):
            if other in remaining:
                weight[other] += 1
    return order


def is_chordal(graph: nx.Graph) -> ChordalityReport:
    if not nx.is_chordal(graph):
        return ChordalityReport(chordal=False)
    # reversed MCS order is a perfect elimination order on chordal graphs
    order = reversed(maximum_cardinality_search(graph))
    return ChordalityReport(chordal=True, elimination_order=tuple(order))


def edge_table(graph: nx.Graph, labels: tuple[str, ...] = ()) -> list[dict[str, object]]:
    rows = []
    for i, j, weight in graph.edges(data="weight"):
        i, j = min(i, j), max(i, j)
        rows.append(
            {
                "i": i,
                "j": j,
                "label_i": labels[i] if labels else str(i),
                "label_j": labels[j] if labels else str(j),
                "weight": weight,
                "sign": int(np.sign(weight)),
            }
        )
    return sorted(rows, key=lambda row: (row["i"], row["j"]))
