"""Reports, social networks and the aggregated ranking graph.

A report is a strict ordering of some of the ranker's neighbours, listed
from the lowest to the highest characteristic.  Every ordered pair in a
report becomes a +1/-1 comparison; comparisons on the same unordered pair
are averaged into a single antisymmetric edge weight.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple

NodeId = str


class ValidationError(ValueError):
    """A report or network violates its structural invariants."""

    def __init__(self, message: str, node: NodeId | None = None, ranker: NodeId | None = None):
        super().__init__(message)
        self.node = node
        self.ranker = ranker


@dataclass(frozen=True)
class SocialNetwork:
    """Undirected simple graph on string node ids."""

    nodes: tuple[NodeId, ...]
    adjacency: Mapping[NodeId, frozenset[NodeId]] = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[NodeId, NodeId]], nodes: Iterable[NodeId] = ()) -> "SocialNetwork":
        adj: dict[NodeId, set[NodeId]] = {str(n): set() for n in nodes}
        for a, b in edges:
            a, b = str(a), str(b)
            if a == b:
                raise ValidationError(f"self-loop on node {a!r}", node=a)
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return cls(
            nodes=tuple(sorted(adj)),
            adjacency={n: frozenset(v) for n, v in sorted(adj.items())},
        )

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValidationError("duplicate node ids in network")
        for n, nbrs in self.adjacency.items():
            if n not in node_set:
                raise ValidationError(f"adjacency references unknown node {n!r}", node=n)
            for m in nbrs:
                if m == n:
                    raise ValidationError(f"self-loop on node {n!r}", node=n)
                if m not in node_set or n not in self.adjacency.get(m, ()):
                    raise ValidationError(f"edge ({n!r}, {m!r}) is not symmetric or references an unknown node", node=m)

    def neighbors(self, node: NodeId) -> frozenset[NodeId]:
        return self.adjacency.get(node, frozenset())

    @property
    def edges(self) -> list[tuple[NodeId, NodeId]]:
        return [(a, b) for a in self.nodes for b in sorted(self.adjacency[a]) if a < b]

    @property
    def density(self) -> float:
        n = len(self.nodes)
        if n < 2:
            return 0.0
        return len(self.edges) / (n * (n - 1) / 2)

    def __eq__(self, other):
        if not isinstance(other, SocialNetwork):
            return NotImplemented
        return self.nodes == other.nodes and dict(self.adjacency) == dict(other.adjacency)

    def __hash__(self):
        return hash((self.nodes, tuple(self.edges)))


@dataclass(frozen=True)
class Report:
    """One ranker's ordering, lowest characteristic first."""

    ranker: NodeId
    ranking: tuple[NodeId, ...]
    unknown: frozenset[NodeId] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "ranking", tuple(self.ranking))
        object.__setattr__(self, "unknown", frozenset(self.unknown))
        seen = set()
        for node in self.ranking:
            if node == self.ranker:
                raise ValidationError(f"ranker {self.ranker!r} ranks themself", node=node, ranker=self.ranker)
            if node in seen:
                raise ValidationError(f"ranker {self.ranker!r} lists {node!r} twice", node=node, ranker=self.ranker)
            seen.add(node)
        if self.ranker in self.unknown:
            raise ValidationError(f"ranker {self.ranker!r} lists themself as unknown", node=self.ranker, ranker=self.ranker)
        both = seen & self.unknown
        if both:
            node = min(both)
            raise ValidationError(f"ranker {self.ranker!r} both ranks and marks {node!r} unknown", node=node, ranker=self.ranker)

    def validate(self, network: SocialNetwork) -> None:
        if self.ranker not in network.adjacency:
            raise ValidationError(f"ranker {self.ranker!r} is not in the network", node=self.ranker, ranker=self.ranker)
        nbrs = network.neighbors(self.ranker)
        for node in (*self.ranking, *sorted(self.unknown)):
            if node not in nbrs:
                raise ValidationError(
                    f"ranker {self.ranker!r} ranks {node!r}, who is not a neighbour", node=node, ranker=self.ranker
                )


class Comparison(NamedTuple):
    above: NodeId
    below: NodeId
    ranker: NodeId


def pairwise_from_ranking(report: Report, network: SocialNetwork | None = None) -> set[Comparison]:
    """Expand a strict ordering into every implied pairwise comparison."""
    if network is not None:
        report.validate(network)
    # combinations keeps list order, so the later entry is the higher one
    return {Comparison(above=hi, below=lo, ranker=report.ranker) for lo, hi in combinations(report.ranking, 2)}


@dataclass(frozen=True)
class Edge:
    weight: float  # Y_{ab} for the stored orientation a < b; positive means a ranked above b
    count: int


@dataclass(frozen=True)
class RankingGraph:
    nodes: tuple[NodeId, ...]
    edges: Mapping[tuple[NodeId, NodeId], Edge]

    def weight(self, i: NodeId, j: NodeId) -> float:
        """Y_ij, read in either orientation."""
        if i < j:
            return self.edges[(i, j)].weight
        return -self.edges[(j, i)].weight

    def has_edge(self, i: NodeId, j: NodeId) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def edge_list(self) -> list[tuple[NodeId, NodeId, float]]:
        return [(a, b, e.weight) for (a, b), e in self.edges.items()]

    def __len__(self):
        return len(self.edges)


def check_unique_rankers(reports: Iterable[Report]) -> None:
    seen = set()
    for rep in reports:
        if rep.ranker in seen:
            raise ValidationError(f"ranker {rep.ranker!r} submitted more than one report", ranker=rep.ranker)
        seen.add(rep.ranker)


def build_ranking_graph(
    reports: Iterable[Report],
    network: SocialNetwork,
    exclude: NodeId | None = None,
) -> RankingGraph:
    """Average all comparisons per pair, optionally dropping one ranker's report."""
    reports = list(reports)
    check_unique_rankers(reports)
    if exclude is not None and exclude not in network.adjacency:
        raise ValidationError(f"excluded node {exclude!r} is not in the network", node=exclude)
    for rep in reports:
        rep.validate(network)
    return aggregate(network.nodes, [rep for rep in reports if rep.ranker != exclude])


def aggregate(nodes: tuple[NodeId, ...], reports: Iterable[Report]) -> RankingGraph:
    """Ranking graph from already validated reports."""
    totals: dict[tuple[NodeId, NodeId], int] = defaultdict(int)
    counts: dict[tuple[NodeId, NodeId], int] = defaultdict(int)
    for rep in reports:
        for lo, hi in combinations(rep.ranking, 2):
            if hi < lo:
                key, sign = (hi, lo), 1
            else:
                key, sign = (lo, hi), -1
            totals[key] += sign
            counts[key] += 1
    # integer totals make the mean independent of report order
    edges = {key: Edge(weight=totals[key] / counts[key], count=counts[key]) for key in sorted(counts)}
    return RankingGraph(nodes=tuple(nodes), edges=edges)


def infer_network(reports: Iterable[Report], nodes: Iterable[NodeId] = ()) -> SocialNetwork:
    """Network implied by who ranked whom: edge (k, i) for every i that k ranked or marked unknown."""
    edges = []
    extra = set(nodes)
    for rep in reports:
        extra.add(rep.ranker)
        for node in (*rep.ranking, *rep.unknown):
            edges.append((rep.ranker, node))
    return SocialNetwork.from_edges(edges, nodes=extra)
