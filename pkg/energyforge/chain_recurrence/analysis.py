"""
Chain recurrence from transition graphs.

A box is chain recurrent when it lies on a directed cycle of the graph:
its strongly connected component has two or more boxes, or one box with a
self-loop. Recurrent components that touch across a box face are merged,
since a fine grid can split one physical piece into several components.

The combinatorial Lyapunov function layers the condensation DAG from the
bottom: classes without successors get 0, every other class one more than
its highest successor. Values are therefore constant on each chain
component and drop strictly along every edge between distinct classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from energyforge.chain_recurrence.graph import TransitionGraph
from energyforge.errors import HyperbolicityError
from energyforge.manifold_flow.manifolds import ChartPoint
from energyforge.utils import logger

# boxes within this distance of a point count as containing it
CONTAINMENT_RADIUS = 1e-9


def strong_components(graph: TransitionGraph) -> np.ndarray:
    _, labels = connected_components(graph.adjacency, directed=True, connection="strong")
    return labels


def _recurrent_mask(graph: TransitionGraph, labels: np.ndarray) -> np.ndarray:
    sizes = np.bincount(labels, minlength=graph.n_nodes)
    return (sizes[labels] >= 2) | graph.self_loops


def chain_recurrent_boxes(graph: TransitionGraph) -> np.ndarray:
    """Sorted ids of the boxes lying on a directed cycle."""
    return np.flatnonzero(_recurrent_mask(graph, strong_components(graph)))


def chain_components(graph: TransitionGraph) -> List[np.ndarray]:
    """Partition of the recurrent boxes into chain components.

    Recurrent strongly connected components are merged when two of their
    boxes share a face of the cover. Components are ordered by smallest box id.
    """
    labels = strong_components(graph)
    recurrent = _recurrent_mask(graph, labels)
    nodes = np.flatnonzero(recurrent)
    if len(nodes) == 0:
        return []

    # link every recurrent box to the first box of its strong component
    first_of_label = {}
    rows, cols = [], []
    for node in nodes:
        head = first_of_label.setdefault(labels[node], node)
        rows.append(node)
        cols.append(head)
    if graph.cover is not None:
        pairs = graph.cover.face_pairs
        both = recurrent[pairs[:, 0]] & recurrent[pairs[:, 1]]
        rows.extend(pairs[both, 0].tolist())
        cols.extend(pairs[both, 1].tolist())
    links = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(graph.n_nodes, graph.n_nodes))
    _, merged = connected_components(links, directed=False)

    groups: Dict[int, List[int]] = {}
    for node in nodes:
        groups.setdefault(int(merged[node]), []).append(int(node))
    return sorted((np.array(members) for members in groups.values()), key=lambda m: int(m[0]))


def _box_classes(graph: TransitionGraph, components: Sequence[np.ndarray], labels: np.ndarray) -> np.ndarray:
    """Class id per box: component index for recurrent boxes, offset SCC label otherwise."""
    classes = len(components) + labels
    for index, members in enumerate(components):
        classes[members] = index
    return classes


def _layered_condensation(graph: TransitionGraph, classes: np.ndarray) -> Tuple[nx.DiGraph, Dict[int, int]]:
    quotient = nx.DiGraph()
    quotient.add_nodes_from(np.unique(classes).tolist())
    crossing = classes[graph.sources] != classes[graph.targets]
    quotient.add_edges_from(
        set(zip(classes[graph.sources[crossing]].tolist(), classes[graph.targets[crossing]].tolist()))
    )
    dag = nx.condensation(quotient)
    layer: Dict[int, int] = {}
    for node in reversed(list(nx.topological_sort(dag))):
        successors = list(dag.successors(node))
        layer[node] = 1 + max(layer[s] for s in successors) if successors else 0
    nx.set_node_attributes(dag, layer, "layer")
    return dag, dag.graph["mapping"]


def combinatorial_lyapunov(graph: TransitionGraph, components: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Reverse-topological layer of each box's condensation class."""
    labels = strong_components(graph)
    components = chain_components(graph) if components is None else components
    classes = _box_classes(graph, components, labels)
    dag, mapping = _layered_condensation(graph, classes)
    layers = nx.get_node_attributes(dag, "layer")
    return np.array([float(layers[mapping[c]]) for c in classes.tolist()])


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    graph: TransitionGraph
    recurrent: np.ndarray
    components: List[np.ndarray]
    # -1 for boxes outside the recurrent set
    component_of_box: np.ndarray
    # condensation DAG node of every box
    dag_node_of_box: np.ndarray
    dag: nx.DiGraph
    lyapunov: np.ndarray

    @property
    def recurrent_boxes(self) -> np.ndarray:
        return np.flatnonzero(self.recurrent)

    def component_layer(self, index: int) -> int:
        return int(self.lyapunov[self.components[index][0]])

    def component_dag_node(self, index: int) -> int:
        return int(self.dag_node_of_box[self.components[index][0]])

    def reaches(self, source: int, target: int) -> bool:
        """True when the condensation DAG has a path from component `source` to `target`."""
        if source == target:
            return False
        return nx.has_path(self.dag, self.component_dag_node(source), self.component_dag_node(target))

    def representative(self, index: int) -> ChartPoint:
        """Center of the component box nearest to the mean of its box centers."""
        cover = self.graph.cover
        members = self.components[index]
        charts, centers = cover.centers(members)
        main = charts == np.bincount(charts).argmax()
        mean = centers[main].mean(axis=0)
        best = members[main][int(np.argmin(np.linalg.norm(centers[main] - mean, axis=1)))]
        chart, coords = cover.centers(np.array([best]))
        return ChartPoint.of(chart[0], coords[0])

    def components_at(self, point: ChartPoint) -> List[int]:
        """Components owning a box that contains `point`."""
        charts, coords = point.as_arrays()
        _, boxes = self.graph.cover.boxes_within(charts, coords, CONTAINMENT_RADIUS)
        return sorted({int(c) for c in self.component_of_box[boxes] if c >= 0})

    def layers_at(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Lyapunov layer of the box containing each point; NaN outside the cover."""
        boxes = self.graph.cover.locate(charts, coords)
        return np.where(boxes >= 0, self.lyapunov[np.maximum(boxes, 0)], np.nan)

    def dag_nodes_at(self, charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
        boxes = self.graph.cover.locate(charts, coords)
        return np.where(boxes >= 0, self.dag_node_of_box[np.maximum(boxes, 0)], -1)


def analyze_chains(graph: TransitionGraph) -> ChainAnalysis:
    labels = strong_components(graph)
    recurrent = _recurrent_mask(graph, labels)
    components = chain_components(graph)
    classes = _box_classes(graph, components, labels)
    dag, mapping = _layered_condensation(graph, classes)
    layers = nx.get_node_attributes(dag, "layer")
    dag_node_of_box = np.array([mapping[c] for c in classes.tolist()], dtype=int)
    lyapunov = np.array([float(layers[node]) for node in dag_node_of_box.tolist()])
    component_of_box = np.full(graph.n_nodes, -1, dtype=int)
    for index, members in enumerate(components):
        component_of_box[members] = index
    logger.info(
        f"Chain recurrence: {int(np.sum(recurrent))} recurrent boxes in {len(components)} components, "
        f"{dag.number_of_nodes()} condensation classes, top layer {int(lyapunov.max()) if len(lyapunov) else 0}"
    )
    return ChainAnalysis(
        graph=graph,
        recurrent=recurrent,
        components=components,
        component_of_box=component_of_box,
        dag_node_of_box=dag_node_of_box,
        dag=dag,
        lyapunov=lyapunov,
    )


# ── Chain witnesses ───────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ChainWitness:
    """An explicit epsilon-chain through boxes, one tau-step per hop.

    `charts`/`coords` hold the box center visited at each step; they are
    None for graphs without a cover.
    """

    boxes: Tuple[int, ...]
    tau: float
    charts: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return len(self.boxes) - 1

    @property
    def length(self) -> float:
        return self.tau * self.steps

    @property
    def times(self) -> np.ndarray:
        """Time at which the chain reaches each of its points."""
        return self.tau * np.arange(len(self.boxes), dtype=float)


def _witness(graph: TransitionGraph, boxes) -> ChainWitness:
    boxes = tuple(int(b) for b in boxes)
    if graph.cover is None:
        return ChainWitness(boxes, graph.tau)
    charts, coords = graph.cover.centers(np.array(boxes, dtype=int))
    return ChainWitness(boxes, graph.tau, charts, coords)


def chain_witness(graph: TransitionGraph, source: int, target: int) -> Optional[ChainWitness]:
    """Shortest box chain from `source` to `target`; a loop when they coincide.

    Returns None when the graph has no such chain.
    """
    if source == target and graph.self_loops[source]:
        return _witness(graph, (source, source))
    nx_graph = graph.to_networkx()
    if source != target:
        try:
            return _witness(graph, nx.shortest_path(nx_graph, source, target))
        except nx.NetworkXNoPath:
            return None
    best: Optional[List[int]] = None
    for successor in graph.successors(source).tolist():
        try:
            path = nx.shortest_path(nx_graph, successor, source)
        except nx.NetworkXNoPath:
            continue
        if best is None or len(path) < len(best):
            best = path
    if best is None:
        return None
    return _witness(graph, [source] + best)


# ── Admissibility screening ───────────────────────────────────


def screen_flow(analysis: ChainAnalysis, records: Sequence) -> List[int]:
    """Match fixed points to chain components and reject infinite recurrent sets.

    Returns the component index of every record.

    Raises:
        HyperbolicityError: a fixed point lies outside the recurrent boxes, or
            a chain component holds no fixed point (e.g. a periodic orbit).
    """
    owners: List[int] = []
    for record in records:
        found = analysis.components_at(record.location)
        if not found:
            raise HyperbolicityError(
                f"fixed point at {record.location.coords} lies outside the chain recurrent boxes",
                location=record.location,
            )
        owners.append(found[0])
    for index in range(len(analysis.components)):
        count = owners.count(index)
        if count == 0:
            where = analysis.representative(index)
            raise HyperbolicityError(
                f"chain component {index} near {tuple(round(c, 6) for c in where.coords)} "
                f"(chart {where.chart}) contains no fixed point; the chain recurrent set is not finite",
                location=where,
            )
        if count > 1:
            logger.warning(
                f"Chain component {index} holds {count} fixed points; refine the cover to separate them"
            )
    return owners
