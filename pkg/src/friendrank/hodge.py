"""HodgeRank: least-squares scores on a ranking graph and the cycle ratio.

Scores minimise ``sum_{ij in E} ((s_i - s_j) - Y_ij)^2``.  The normal
equations are ``L s = div`` with ``L`` the unweighted graph Laplacian and
``div_u = sum_v Y_uv``.  ``L`` has one zero mode per connected component, so
each component is solved in its sum-zero subspace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .ranking import NodeId, RankingGraph

DIRECT_MAX_NODES = 2000
DEFAULT_TOLERANCE = 1e-10


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested residual norm."""

    def __init__(self, message: str, residual_norm: float, exclusion: NodeId | None = None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.exclusion = exclusion


class UndefinedCycleRatio(ValueError):
    """The cycle ratio of a graph without edges."""


@dataclass(frozen=True)
class ScoreVector:
    values: Mapping[NodeId, float]
    components: tuple[tuple[NodeId, ...], ...] = ()
    unscored: frozenset[NodeId] = frozenset()

    def __getitem__(self, node: NodeId) -> float:
        return self.values[node]

    def as_array(self, nodes) -> np.ndarray:
        return np.array([self.values[n] for n in nodes])


@dataclass(frozen=True)
class HodgeResult:
    scores: ScoreVector
    edge_residuals: Mapping[tuple[NodeId, NodeId], float]
    cycle_ratio: float | None
    components: tuple[tuple[NodeId, ...], ...] = field(default=())
    unscored: frozenset[NodeId] = frozenset()

    def to_dict(self, graph: RankingGraph | None = None) -> dict:
        edges = []
        for (a, b), r in self.edge_residuals.items():
            row = {"i": a, "j": b, "residual": r}
            if graph is not None:
                e = graph.edges[(a, b)]
                row = {"i": a, "j": b, "weight": e.weight, "count": e.count, "residual": r}
            edges.append(row)
        return {
            "scores": [
                {"node": n, "score": s, "unscored": n in self.unscored} for n, s in self.scores.values.items()
            ],
            "cycle_ratio": self.cycle_ratio,
            "components": [list(c) for c in self.components],
            "unscored": sorted(self.unscored),
            "edges": edges,
        }

    def to_json(self, graph: RankingGraph | None = None) -> str:
        return json.dumps(self.to_dict(graph), indent=2)


def _index(graph: RankingGraph):
    idx = {n: k for k, n in enumerate(graph.nodes)}
    rows = np.array([idx[a] for a, _ in graph.edges], dtype=np.intp)
    cols = np.array([idx[b] for _, b in graph.edges], dtype=np.intp)
    w = np.array([e.weight for e in graph.edges.values()], dtype=float)
    return rows, cols, w


def _sparse_laplacian(graph: RankingGraph):
    n = len(graph.nodes)
    rows, cols, w = _index(graph)
    ones = np.ones(len(rows))
    adj = scipy.sparse.coo_matrix((np.r_[ones, ones], (np.r_[rows, cols], np.r_[cols, rows])), shape=(n, n)).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = (scipy.sparse.diags(deg) - adj).tocsr()
    div = np.zeros(n)
    np.add.at(div, rows, w)
    np.add.at(div, cols, -w)
    return lap, div, adj


def laplacian_divergence(graph: RankingGraph, sparse: bool = False):
    """Return ``(L, div)`` indexed by ``graph.nodes``."""
    lap, div, _ = _sparse_laplacian(graph)
    if sparse:
        return lap, div
    return lap.toarray(), div


def _component_labels(n: int, rows, cols) -> list[int]:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(rows.tolist(), cols.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(a) for a in range(n)]


def _solve_direct(lap_c: np.ndarray, div_c: np.ndarray) -> np.ndarray:
    # pin the last node to zero; the reduced Laplacian of a connected graph is SPD
    x = np.zeros(len(div_c))
    if len(div_c) > 1:
        x[:-1] = scipy.linalg.solve(lap_c[:-1, :-1], div_c[:-1], assume_a="pos")
    return x - x.mean()


def _solve_cg(lap_c, div_c: np.ndarray, tolerance: float) -> np.ndarray:
    n = len(div_c)
    x, _info = scipy.sparse.linalg.cg(lap_c, div_c, rtol=0.0, atol=tolerance, maxiter=10 * n)
    x = x - x.mean()
    res = float(np.linalg.norm(lap_c @ x - div_c))
    if not np.isfinite(res) or res > tolerance:
        raise SolverError(f"conjugate gradient stopped at residual norm {res:.3e} > {tolerance:.1e}", res)
    return x


def solve_scores(
    graph: RankingGraph,
    tolerance: float = DEFAULT_TOLERANCE,
    method: str = "auto",
) -> ScoreVector:
    """Least-squares scores, normalised to sum to zero on every component.

    ``method`` is ``"direct"``, ``"iterative"`` (conjugate gradient) or
    ``"auto"``, which goes iterative only for components above
    ``DIRECT_MAX_NODES`` nodes.  Nodes without any incident edge get score 0
    and are listed in ``unscored``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if method not in ("auto", "direct", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    nodes = graph.nodes
    n = len(nodes)
    s = np.zeros(n)
    if n == 0:
        return ScoreVector(values={})
    rows, cols, w = _index(graph)
    div = np.zeros(n)
    np.add.at(div, rows, w)
    np.add.at(div, cols, -w)
    dense = method == "direct" or (method == "auto" and n <= DIRECT_MAX_NODES)
    if dense:
        lap = np.zeros((n, n))
        np.add.at(lap, (rows, cols), -1.0)
        np.add.at(lap, (cols, rows), -1.0)
        lap[np.diag_indices(n)] = -lap.sum(axis=1)
        labels = _component_labels(n, rows, cols)
    else:
        lap, _, adj = _sparse_laplacian(graph)
        _, labels = scipy.sparse.csgraph.connected_components(adj, directed=False)
    degree = np.zeros(n, dtype=int)
    np.add.at(degree, rows, 1)
    np.add.at(degree, cols, 1)

    members: dict[int, list[int]] = {}
    for k in range(n):
        members.setdefault(int(labels[k]), []).append(k)
    components = []
    unscored = set()
    for comp in sorted(members.values(), key=lambda c: c[0]):
        if len(comp) == 1 and degree[comp[0]] == 0:
            unscored.add(nodes[comp[0]])
            continue
        comp_idx = np.array(comp)
        div_c = div[comp_idx]
        if dense:
            s[comp_idx] = _solve_direct(lap[np.ix_(comp_idx, comp_idx)], div_c)
        else:
            lap_c = lap[comp_idx][:, comp_idx]
            if method == "iterative" or len(comp) > DIRECT_MAX_NODES:
                s[comp_idx] = _solve_cg(lap_c, div_c, tolerance)
            else:
                s[comp_idx] = _solve_direct(lap_c.toarray(), div_c)
        components.append(tuple(nodes[k] for k in comp))
    return ScoreVector(
        values={node: float(v) for node, v in zip(nodes, s)},
        components=tuple(components),
        unscored=frozenset(unscored),
    )


def edge_residuals(graph: RankingGraph, scores: ScoreVector | Mapping[NodeId, float]) -> dict[tuple[NodeId, NodeId], float]:
    """``(s_i - s_j) - Y_ij`` for each stored edge ``(i, j)``."""
    vals = scores.values if isinstance(scores, ScoreVector) else scores
    return {(a, b): (vals[a] - vals[b]) - e.weight for (a, b), e in graph.edges.items()}


def cycle_ratio(graph: RankingGraph, scores: ScoreVector | Mapping[NodeId, float]) -> float:
    """Share of the squared edge flow left unexplained by the scores."""
    if not graph.edges:
        raise UndefinedCycleRatio("cycle ratio is undefined on a graph with no edges")
    res = np.fromiter(edge_residuals(graph, scores).values(), dtype=float)
    total = sum(e.weight**2 for e in graph.edges.values())
    if total == 0.0:
        return 0.0
    # the zero score vector already gives 1, so anything above is rounding
    return float(min(np.dot(res, res) / total, 1.0))


def hodge_rank(graph: RankingGraph, tolerance: float = DEFAULT_TOLERANCE, method: str = "auto") -> HodgeResult:
    scores = solve_scores(graph, tolerance=tolerance, method=method)
    try:
        ratio = cycle_ratio(graph, scores)
    except UndefinedCycleRatio:
        ratio = None
    return HodgeResult(
        scores=scores,
        edge_residuals=edge_residuals(graph, scores),
        cycle_ratio=ratio,
        components=scores.components,
        unscored=scores.unscored,
    )
