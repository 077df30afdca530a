"""Transition graphs of box covers under the time-tau map."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix

from energyforge import constants
from energyforge.chain_recurrence.cover import BoxCover
from energyforge.errors import SpecError
from energyforge.manifold_flow.integrator import flow_batch
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import chunk_slices, logger, parallel_map, stack_chunks


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    """Directed graph on boxes; edge (b, b') when the inflated image of b meets b'.

    `cover` is None for graphs built directly from an edge list.
    """

    n_nodes: int
    sources: np.ndarray
    targets: np.ndarray
    cover: Optional[BoxCover] = None
    tau: float = constants.DEFAULT_TAU
    epsilon: float = 0.0
    samples_per_box: int = 0
    # boxes with at least one sample whose orbit left a plane-disk
    escaping: Optional[np.ndarray] = None

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "TransitionGraph":
        edges = np.asarray(list(edges), dtype=int).reshape(-1, 2)
        edges = np.unique(edges, axis=0) if len(edges) else edges
        return cls(n_nodes=n_nodes, sources=edges[:, 0], targets=edges[:, 1])

    @property
    def n_edges(self) -> int:
        return len(self.sources)

    @cached_property
    def adjacency(self) -> csr_matrix:
        data = np.ones(self.n_edges, dtype=np.int8)
        return csr_matrix((data, (self.sources, self.targets)), shape=(self.n_nodes, self.n_nodes))

    @cached_property
    def self_loops(self) -> np.ndarray:
        loops = np.zeros(self.n_nodes, dtype=bool)
        loops[self.sources[self.sources == self.targets]] = True
        return loops

    def successors(self, node: int) -> np.ndarray:
        return np.sort(self.adjacency[node].indices)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_edges_from(zip(self.sources.tolist(), self.targets.tolist()))
        return graph


def build_transition_graph(
    system: FlowSystem,
    cover: BoxCover,
    tau: float = constants.DEFAULT_TAU,
    epsilon: Optional[float] = None,
    samples_per_box: int = constants.DEFAULT_SAMPLES_PER_BOX,
    workers: int = 1,
) -> TransitionGraph:
    """Box transition graph of the time-tau map with inflation radius epsilon.

    Sample images are computed in fixed-size chunks on up to `workers`
    threads. epsilon defaults to the cover's box diameter.

    Raises:
        SpecError: tau < 1, epsilon below the box diameter, or fewer than
            four samples per box.
    """
    epsilon = cover.diameter if epsilon is None else float(epsilon)
    if tau < 1.0:
        raise SpecError(f"tau must be at least 1, got: {tau!r}")
    if epsilon < cover.diameter * (1.0 - 1e-12):
        raise SpecError(f"epsilon {epsilon:.6g} is below the box diameter {cover.diameter:.6g}")
    if samples_per_box < 4:
        raise SpecError(f"samples_per_box must be at least 4, got: {samples_per_box!r}")

    owner, charts, coords = cover.sample_points(samples_per_box)
    logger.info(
        f"Flowing {len(owner)} samples of {cover.size} boxes for tau={tau} "
        f"(eps={epsilon:.4g}, workers={workers})"
    )

    def image(part: slice):
        exited = np.zeros(part.stop - part.start, dtype=bool)
        c, y = flow_batch(system, charts[part], coords[part], tau, exited=exited)
        return c, y, exited

    parts = parallel_map(image, chunk_slices(len(owner), constants.NODE_CHUNK), workers)
    image_charts = stack_chunks([p[0] for p in parts])
    image_coords = stack_chunks([p[1] for p in parts])
    exited = stack_chunks([p[2] for p in parts])

    kept = np.flatnonzero(~exited)
    points, boxes = cover.boxes_within(image_charts[kept], image_coords[kept], epsilon)
    edges = np.unique(np.column_stack([owner[kept][points], boxes]), axis=0)
    escaping = np.zeros(cover.size, dtype=bool)
    escaping[owner[exited]] = True
    if np.any(escaping):
        logger.info(f"{int(np.sum(escaping))} boxes have samples leaving the domain")

    graph = TransitionGraph(
        n_nodes=cover.size,
        sources=edges[:, 0],
        targets=edges[:, 1],
        cover=cover,
        tau=tau,
        epsilon=epsilon,
        samples_per_box=samples_per_box,
        escaping=escaping,
    )
    logger.info(f"Transition graph: {graph.n_nodes} boxes, {graph.n_edges} edges")
    return graph
