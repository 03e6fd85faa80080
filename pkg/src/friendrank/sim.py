"""Synthetic communities, noisy friend reports and targeting evaluation.

Every random draw goes through a ``numpy.random.Generator`` built from an
explicit seed, so a (model, parameters, seed) triple always reproduces the
same network, reports and outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.stats import norm

from .hodge import UndefinedCycleRatio, cycle_ratio, solve_scores
from .mechanism import TargetingOutcome, quota_size
from .ranking import NodeId, Report, SocialNetwork, build_ranking_graph

NETWORK_KINDS = ("erdos-renyi", "ring-lattice-rewire", "geometric")
NOISE_KINDS = ("exact", "flip-constant", "flip-logistic")
QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def node_name(k: int, width: int) -> NodeId:
    # zero padded so lexical order matches numeric order
    return f"n{k:0{width}d}"


@dataclass(frozen=True)
class NetworkModel:
    kind: str
    n: int
    p: float = 0.0  # erdos-renyi edge probability
    k: int = 2  # ring lattice degree
    beta: float = 0.0  # rewiring probability
    r: float = 0.0  # geometric radius

    def __post_init__(self):
        if self.kind not in NETWORK_KINDS:
            raise ValueError(f"unknown network model {self.kind!r}")
        if self.n < 2:
            raise ValueError(f"network needs at least 2 nodes, got n={self.n}")
        if self.kind == "erdos-renyi" and not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.kind == "ring-lattice-rewire":
            if not 0 <= self.beta <= 1:
                raise ValueError("beta must lie in [0, 1]")
            if self.k < 0 or self.k >= self.n:
                raise ValueError("k must lie in [0, n)")
        if self.kind == "geometric" and self.r < 0:
            raise ValueError("r must be non-negative")

    def label(self) -> str:
        if self.kind == "erdos-renyi":
            return f"erdos-renyi(n={self.n},p={self.p})"
        if self.kind == "ring-lattice-rewire":
            return f"ring-lattice-rewire(n={self.n},k={self.k},beta={self.beta})"
        return f"geometric(n={self.n},r={self.r})"


def generate_network(model: NetworkModel, seed: int) -> SocialNetwork:
    if model.kind == "erdos-renyi":
        g = nx.gnp_random_graph(model.n, model.p, seed=seed)
    elif model.kind == "ring-lattice-rewire":
        g = nx.watts_strogatz_graph(model.n, model.k, model.beta, seed=seed)
    else:
        g = nx.random_geometric_graph(model.n, model.r, seed=seed)
    width = len(str(model.n - 1))
    return SocialNetwork.from_edges(
        ((node_name(a, width), node_name(b, width)) for a, b in g.edges()),
        nodes=(node_name(k, width) for k in range(model.n)),
    )


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "exact"
    p: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise model {self.kind!r}")
        if self.kind == "flip-constant" and not 0 <= self.p < 0.5:
            raise ValueError("flip probability must lie in [0, 0.5)")
        if self.kind == "flip-logistic" and self.scale <= 0:
            raise ValueError("logistic scale must be positive")

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact" or (self.kind == "flip-constant" and self.p == 0)

    def label(self) -> str:
        if self.kind == "flip-constant":
            return f"flip-constant(p={self.p})"
        if self.kind == "flip-logistic":
            return f"flip-logistic(scale={self.scale})"
        return "exact"


def rank_noise_sd(p: float) -> float:
    """Gaussian sd on rank positions that inverts an adjacent pair with probability ``p``."""
    # rank gap 1, difference of two draws has sd sigma * sqrt(2)
    return 1.0 / (math.sqrt(2.0) * norm.ppf(1.0 - p))


def noisy_utilities(theta: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Perceived characteristics; sorting them gives a transitive noisy ranking.

    flip-logistic adds Gumbel noise, whose pairwise differences are logistic,
    so a pair with gap ``d`` is inverted with probability ``1 / (1 + exp(|d| / scale))``.
    flip-constant works on rank positions instead of raw values, calibrated so
    that neighbouring positions swap with probability ``p``.
    """
    if noise.is_exact or len(theta) == 0:
        return np.asarray(theta, dtype=float)
    if noise.kind == "flip-logistic":
        return theta + rng.gumbel(0.0, noise.scale, size=len(theta))
    ranks = np.argsort(np.argsort(theta, kind="stable"), kind="stable").astype(float)
    return ranks + rng.normal(0.0, rank_noise_sd(noise.p), size=len(theta))


@dataclass(frozen=True)
class Community:
    network: SocialNetwork
    theta: Mapping[NodeId, float]
    theta_bar: float

    def __post_init__(self):
        missing = [n for n in self.network.nodes if n not in self.theta]
        if missing:
            raise ValueError(f"theta missing for nodes {missing[:5]}")

    @property
    def deserving(self) -> frozenset[NodeId]:
        return frozenset(n for n in self.network.nodes if self.theta[n] > self.theta_bar)


def generate_community(network: SocialNetwork, seed: int, target_share: float = 0.3) -> Community:
    """Standard normal characteristics; the threshold puts ``target_share`` of nodes above it."""
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(len(network.nodes))
    q = quota_size(target_share, len(theta))
    ordered = np.sort(theta)
    n = len(theta)
    if q == 0:
        theta_bar = float(ordered[-1])
    elif q == n:
        theta_bar = float(ordered[0]) - 1.0
    else:
        theta_bar = float((ordered[n - q - 1] + ordered[n - q]) / 2)
    return Community(network=network, theta=dict(zip(network.nodes, theta.tolist())), theta_bar=theta_bar)


def sample_reports(community: Community, noise: NoiseModel, coverage: float = 1.0, seed: int = 0) -> list[Report]:
    """Each node ranks ``ceil(coverage * degree)`` random neighbours by noisy utility.

    Neighbours left out of a report are marked unknown.
    """
    if not 0 < coverage <= 1:
        raise ValueError("coverage must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    net = community.network
    reports = []
    for ranker in net.nodes:
        nbrs = sorted(net.neighbors(ranker))
        if not nbrs:
            continue
        m = min(len(nbrs), math.ceil(coverage * len(nbrs) - 1e-9))
        if m < len(nbrs):
            picked = sorted(nbrs[k] for k in rng.choice(len(nbrs), size=m, replace=False))
        else:
            picked = nbrs
        theta = np.array([community.theta[n] for n in picked])
        util = noisy_utilities(theta, noise, rng)
        order = sorted(range(len(picked)), key=lambda k: (util[k], picked[k]))
        reports.append(
            Report(
                ranker=ranker,
                ranking=tuple(picked[k] for k in order),
                unknown=frozenset(nbrs) - frozenset(picked),
            )
        )
    return reports


def community_baseline(community: Community, noise: NoiseModel, quota: float, seed: int = 0) -> TargetingOutcome:
    """One noisy ranking of everybody; the top ``floor(quota * n)`` are targeted."""
    if not 0 < quota <= 1:
        raise ValueError("quota must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    nodes = community.network.nodes
    util = noisy_utilities(np.array([community.theta[n] for n in nodes]), noise, rng)
    order = sorted(range(len(nodes)), key=lambda k: (-util[k], nodes[k]))
    q = quota_size(quota, len(nodes))
    targeted = frozenset(nodes[k] for k in order[:q])
    return TargetingOutcome(
        targeted=targeted,
        scores={n: float(u) for n, u in zip(nodes, util)},
        probabilities={n: float(n in targeted) for n in nodes},
        mode="quota",
    )


@dataclass(frozen=True)
class EvalReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int
    unscored: int
    targeted_theta: Mapping[float, float]
    excluded_theta: Mapping[float, float]
    cycle_ratio: float | None
    network_density: float

    @property
    def n_targeted(self) -> int:
        return self.true_positives + self.false_positives


def _quantiles(values: Sequence[float]) -> dict[float, float]:
    if not values:
        return {q: math.nan for q in QUANTILES}
    return {q: float(v) for q, v in zip(QUANTILES, np.quantile(values, QUANTILES))}


def evaluate_targeting(
    outcome: TargetingOutcome,
    community: Community,
    cycle_ratio: float | None = None,
) -> EvalReport:
    """Confusion counts against ``theta_bar`` over the scored population."""
    nodes = community.network.nodes
    unknown = set(outcome.scores) - set(nodes)
    if unknown:
        raise ValueError(f"outcome mentions nodes outside the community: {sorted(unknown)[:5]}")
    population = [n for n in nodes if n not in outcome.unscored]
    tp = fp = fn = tn = 0
    for n in population:
        good = community.theta[n] > community.theta_bar
        if n in outcome.targeted:
            tp += good
            fp += not good
        else:
            fn += good
            tn += not good
    return EvalReport(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        true_negatives=tn,
        unscored=len(nodes) - len(population),
        targeted_theta=_quantiles([community.theta[n] for n in population if n in outcome.targeted]),
        excluded_theta=_quantiles([community.theta[n] for n in population if n not in outcome.targeted]),
        cycle_ratio=cycle_ratio,
        network_density=community.network.density,
    )


def run_seeds(seed: int, model_index: int = 0) -> dict[str, int]:
    """Independent integer seeds for each random stage of one run."""
    ss = np.random.SeedSequence([seed, model_index])
    names = ("network", "community", "reports", "baseline", "ties")
    return {name: int(child.generate_state(1)[0]) for name, child in zip(names, ss.spawn(len(names)))}


def full_cycle_ratio(reports: Iterable[Report], network: SocialNetwork) -> float | None:
    graph = build_ranking_graph(reports, network)
    try:
        return cycle_ratio(graph, solve_scores(graph))
    except UndefinedCycleRatio:
        return None


@dataclass(frozen=True)
class CycleRatioRow:
    run_id: int
    model: str
    seed: int
    density: float
    cycle_ratio: float | None


def cycle_ratio_experiment(
    models: Sequence[NetworkModel],
    noise: NoiseModel,
    seeds: Iterable[int],
    coverage: float = 1.0,
) -> list[CycleRatioRow]:
    """Density and full-graph cycle ratio for every (model, seed) run."""
    models = list(models)
    seeds = list(seeds)
    if not models or not seeds:
        raise ValueError("sweep needs at least one model and one seed")
    rows = []
    for mi, model in enumerate(models):
        for seed in seeds:
            s = run_seeds(seed, mi)
            net = generate_network(model, s["network"])
            com = generate_community(net, s["community"])
            reports = sample_reports(com, noise, coverage, s["reports"])
            rows.append(CycleRatioRow(len(rows), model.label(), seed, net.density, full_cycle_ratio(reports, net)))
    return rows


def density_association(rows: Sequence[CycleRatioRow], top: float = 0.1) -> dict[str, float]:
    """Mean density of the highest cycle-ratio runs against the overall mean."""
    valid = [r for r in rows if r.cycle_ratio is not None]
    if not valid:
        raise ValueError("no run has a defined cycle ratio")
    ranked = sorted(valid, key=lambda r: (-r.cycle_ratio, r.run_id))
    k = max(1, int(math.ceil(top * len(ranked))))
    return {
        "top_mean_density": float(np.mean([r.density for r in ranked[:k]])),
        "overall_mean_density": float(np.mean([r.density for r in valid])),
        "top_min_cycle_ratio": float(ranked[k - 1].cycle_ratio),
        "runs": len(valid),
        "top_runs": k,
    }
