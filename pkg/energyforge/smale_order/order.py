"""
The Smale relation between fixed points and its linear extension.

q lies above p (edge q -> p) when the unstable manifold of q meets the
stable manifold of p. Two independent tests must agree before an edge is
accepted:

    geometric       an unstable branch of q passes within
                    RELATION_RADIUS_FACTOR box diameters of p or of a
                    stable trace of p
    combinatorial   the condensation DAG of the transition graph has a
                    path from q's chain component to p's

Pairs where exactly one test holds are reported as ambiguous and left out
of the relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from energyforge import constants
from energyforge.chain_recurrence.analysis import ChainAnalysis
from energyforge.errors import OrderingError
from energyforge.fixed_points.detect import KINDS, FixedPointRecord
from energyforge.fixed_points.invariant_manifolds import InvariantManifoldTrace
from energyforge.manifold_flow.system import FlowSystem
from energyforge.utils import logger

Traces = Sequence[Tuple[InvariantManifoldTrace, InvariantManifoldTrace]]


def _target_tree(system: FlowSystem, record: FixedPointRecord, stable: InvariantManifoldTrace) -> cKDTree:
    charts, coords = stable.samples()
    own_c, own_y = record.location.as_arrays()
    if len(charts):
        charts = np.concatenate([own_c, charts])
        coords = np.concatenate([own_y, coords], axis=0)
    else:
        charts, coords = own_c, own_y
    return cKDTree(system.manifold.embed(charts, coords), boxsize=system.manifold.kdtree_boxsize)


def geometric_gap(system: FlowSystem, tree: cKDTree, unstable: InvariantManifoldTrace) -> float:
    """Smallest distance from the unstable samples to the target tree (inf without branches)."""
    charts, coords = unstable.samples()
    if len(charts) == 0:
        return float("inf")
    gaps, _ = tree.query(system.manifold.embed(charts, coords))
    return float(np.min(gaps))


@dataclass(frozen=True, eq=False)
class SmaleRelation:
    """Confirmed relation as a DAG over record indices, plus the rejected pairs."""

    dag: nx.DiGraph
    radius: float
    # (q, p, geometric, combinatorial) for every pair on which the tests disagree
    ambiguous: Tuple[Tuple[int, int, bool, bool], ...] = ()

    def edges(self) -> List[Tuple[int, int]]:
        return sorted(self.dag.edges())


def compute_relation(
    system: FlowSystem,
    records: Sequence[FixedPointRecord],
    traces: Traces,
    analysis: ChainAnalysis,
    owners: Sequence[int],
) -> SmaleRelation:
    """Doubly confirmed Smale relation; `owners[i]` is the chain component of record i."""
    radius = constants.RELATION_RADIUS_FACTOR * analysis.graph.cover.diameter
    dag = nx.DiGraph()
    dag.add_nodes_from(range(len(records)))
    trees = [_target_tree(system, record, stable) for record, (stable, _) in zip(records, traces)]
    ambiguous = []
    for q, (_, unstable) in enumerate(traces):
        for p in range(len(records)):
            if p == q:
                continue
            gap = geometric_gap(system, trees[p], unstable)
            geometric = gap <= radius
            combinatorial = owners[q] != owners[p] and analysis.reaches(owners[q], owners[p])
            if geometric and combinatorial:
                dag.add_edge(q, p, gap=gap)
            elif geometric or combinatorial:
                ambiguous.append((q, p, geometric, combinatorial))
                logger.warning(
                    f"Ambiguous relation {records[q].kind} {q} -> {records[p].kind} {p}: "
                    f"geometric={geometric} (gap {gap:.3g}), combinatorial={combinatorial}"
                )
    if not nx.is_directed_acyclic_graph(dag):
        cycle = nx.find_cycle(dag)
        raise OrderingError(f"Smale relation has a cycle {cycle}; the flow is not gradient-like")
    logger.info(f"Smale relation: {dag.number_of_edges()} edges, {len(ambiguous)} ambiguous pairs")
    return SmaleRelation(dag=dag, radius=radius, ambiguous=tuple(ambiguous))


def _tie_key(record: FixedPointRecord):
    return (KINDS.index(record.kind), record.index, record.location.chart, record.location.coords)


def linear_extension(dag: nx.DiGraph, records: Sequence[FixedPointRecord]) -> List[int]:
    """Total order p_1, ..., p_k extending the relation, as record indices.

    Sinks come first and sources last; ties go to the smaller index, then
    to the lexicographically smaller location.

    Raises:
        OrderingError: the relation has a cycle or forces a kind out of its class.
    """
    try:
        order = list(nx.lexicographical_topological_sort(dag.reverse(copy=True), key=lambda n: _tie_key(records[n])))
    except nx.NetworkXUnfeasible:
        raise OrderingError("Smale relation has a cycle; no linear extension exists") from None
    ranks = [KINDS.index(records[n].kind) for n in order]
    if ranks != sorted(ranks):
        raise OrderingError(
            f"relation forces the kind order {[records[n].kind for n in order]}; "
            "sinks must precede saddles and saddles must precede sources"
        )
    return order


@dataclass(frozen=True, eq=False)
class OrderedSpectrum:
    """Fixed points in Smale order with their traces.

    Positions are 1-based in the prefix and suffix helpers, matching
    p_1, ..., p_k.
    """

    records: Tuple[FixedPointRecord, ...]
    traces: Tuple[Tuple[InvariantManifoldTrace, InvariantManifoldTrace], ...]
    relation: SmaleRelation
    order: Tuple[int, ...]
    owners: Tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.order)

    @property
    def ordered(self) -> List[FixedPointRecord]:
        return [self.records[n] for n in self.order]

    def record_at(self, position: int) -> FixedPointRecord:
        return self.records[self.order[position - 1]]

    def position_of(self, record_index: int) -> int:
        return self.order.index(record_index) + 1

    def count(self, kind: str) -> int:
        return sum(1 for r in self.records if r.kind == kind)

    def unstable_prefix(self, i: int) -> List[InvariantManifoldTrace]:
        """Unstable traces of p_1, ..., p_i."""
        return [self.traces[n][1] for n in self.order[:i]]

    def stable_suffix(self, i: int) -> List[InvariantManifoldTrace]:
        """Stable traces of p_{i+1}, ..., p_k."""
        return [self.traces[n][0] for n in self.order[i:]]

    def closure_violations(self) -> List[str]:
        """Unstable branches of p_i that end anywhere but at some p_j with j < i."""
        problems = []
        for position, n in enumerate(self.order, start=1):
            trace = self.traces[n][1]
            for branch, limit in zip(trace.branches, trace.limits):
                if limit is None:
                    if not branch.escaped:
                        problems.append(f"p_{position} ({self.records[n].kind}): branch did not reach a fixed point")
                elif self.position_of(limit) >= position:
                    problems.append(
                        f"p_{position} ({self.records[n].kind}): branch ends at p_{self.position_of(limit)}"
                    )
        return problems

    def describe(self) -> dict:
        return {
            "order": [
                {"position": position, "record": n, **self.records[n].describe()}
                for position, n in enumerate(self.order, start=1)
            ],
            "edges": [
                {"from": q, "to": p, "gap": float(self.relation.dag.edges[q, p]["gap"])}
                for q, p in self.relation.edges()
            ],
            "ambiguous": [
                {"from": q, "to": p, "geometric": bool(g), "combinatorial": bool(c)}
                for q, p, g, c in self.relation.ambiguous
            ],
            "relation_radius": float(self.relation.radius),
        }


def order_fixed_points(
    system: FlowSystem,
    records: Sequence[FixedPointRecord],
    traces: Traces,
    analysis: ChainAnalysis,
    owners: Sequence[int],
) -> OrderedSpectrum:
    relation = compute_relation(system, records, traces, analysis, owners)
    order = linear_extension(relation.dag, records)
    spectrum = OrderedSpectrum(
        records=tuple(records),
        traces=tuple(traces),
        relation=relation,
        order=tuple(order),
        owners=tuple(owners),
    )
    for problem in spectrum.closure_violations():
        logger.warning(f"Closure check: {problem}")
    logger.info("Smale order: " + ", ".join(f"{r.kind}" for r in spectrum.ordered))
    return spectrum


def kind_positions(spectrum: OrderedSpectrum, kind: str) -> List[int]:
    return [position for position, r in enumerate(spectrum.ordered, start=1) if r.kind == kind]
