"""The three-step targeting mechanism and its manipulation audits.

Scores come from leave-one-out HodgeRank: node ``i`` is scored on the
ranking graph built from every report except its own, so nothing ``i``
says can move ``s_i``.  Selection is either an absolute cutoff (strategy-proof)
or a quota on relative rank (manipulable, kept for comparison).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .hodge import DEFAULT_TOLERANCE, HodgeResult, SolverError, hodge_rank
from .ranking import NodeId, Report, SocialNetwork, ValidationError, aggregate, check_unique_rankers

TIE_POLICIES = ("include-all-ties", "exclude-all-ties", "seeded-uniform-random")
# scores closer than this count as tied under quota selection
TIE_ATOL = 1e-9


@dataclass(frozen=True)
class MechanismConfig:
    cutoff: float | None = None
    alpha: float | None = None
    tie_policy: str = "include-all-ties"
    seed: int = 0

    def __post_init__(self):
        if (self.cutoff is None) == (self.alpha is None):
            raise ValueError("exactly one of cutoff and alpha must be set")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tie_policy not in TIE_POLICIES:
            raise ValueError(f"unknown tie policy {self.tie_policy!r}")

    @property
    def mode(self) -> str:
        return "threshold" if self.cutoff is not None else "quota"


@dataclass(frozen=True)
class LeaveOneOut:
    scores: Mapping[NodeId, float]
    unscored: frozenset[NodeId]
    cycle_ratios: Mapping[NodeId, float | None]
    full: HodgeResult | None = None


@dataclass(frozen=True)
class TargetingOutcome:
    targeted: frozenset[NodeId]
    scores: Mapping[NodeId, float]
    probabilities: Mapping[NodeId, float]
    unscored: frozenset[NodeId] = frozenset()
    cycle_ratios: Mapping[NodeId, float | None] = field(default_factory=dict)
    mode: str = "threshold"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "targeted": sorted(self.targeted),
            "nodes": [
                {
                    "node": n,
                    "score": self.scores[n],
                    "unscored": n in self.unscored,
                    "targeted": n in self.targeted,
                    "probability": self.probabilities.get(n, 0.0),
                    "cycle_ratio": self.cycle_ratios.get(n),
                }
                for n in sorted(self.scores)
            ],
        }


def _prepare(reports: Iterable[Report], network: SocialNetwork) -> dict[NodeId, Report]:
    reports = list(reports)
    check_unique_rankers(reports)
    for rep in reports:
        rep.validate(network)
    return {rep.ranker: rep for rep in reports}


def leave_one_out_scores(
    reports: Iterable[Report],
    network: SocialNetwork,
    tolerance: float = DEFAULT_TOLERANCE,
    method: str = "auto",
    workers: int = 1,
) -> LeaveOneOut:
    """Score every node on the ranking graph that omits that node's own report."""
    by_ranker = _prepare(reports, network)
    full = hodge_rank(aggregate(network.nodes, by_ranker.values()), tolerance=tolerance, method=method)

    def solve_without(node: NodeId) -> HodgeResult:
        rep = by_ranker.get(node)
        if rep is None or len(rep.ranking) < 2:
            return full  # nothing to drop
        others = [r for k, r in by_ranker.items() if k != node]
        try:
            return hodge_rank(aggregate(network.nodes, others), tolerance=tolerance, method=method)
        except SolverError as err:
            raise SolverError(f"excluding {node!r}: {err}", err.residual_norm, exclusion=node) from err

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(network.nodes, pool.map(solve_without, network.nodes)))
    else:
        results = {node: solve_without(node) for node in network.nodes}

    return LeaveOneOut(
        scores={n: results[n].scores[n] for n in network.nodes},
        unscored=frozenset(n for n in network.nodes if n in results[n].unscored),
        cycle_ratios={n: results[n].cycle_ratio for n in network.nodes},
        full=full,
    )


def target_threshold(
    scores: Mapping[NodeId, float],
    cutoff: float,
    unscored: Iterable[NodeId] = (),
    cycle_ratios: Mapping[NodeId, float | None] | None = None,
) -> TargetingOutcome:
    """Target every scored node with ``s_i > cutoff``; ``s_i <= cutoff`` is out."""
    unscored = frozenset(unscored)
    targeted = frozenset(n for n, s in scores.items() if n not in unscored and s > cutoff)
    return TargetingOutcome(
        targeted=targeted,
        scores=dict(scores),
        probabilities={n: float(n in targeted) for n in scores},
        unscored=unscored,
        cycle_ratios=dict(cycle_ratios or {}),
        mode="threshold",
    )


def quota_size(alpha: float, n: int) -> int:
    return int(math.floor(alpha * n + 1e-9))


def target_quota(
    scores: Mapping[NodeId, float],
    alpha: float,
    tie_policy: str = "include-all-ties",
    seed: int = 0,
    unscored: Iterable[NodeId] = (),
    cycle_ratios: Mapping[NodeId, float | None] | None = None,
) -> TargetingOutcome:
    """Target the top ``floor(alpha * n)`` scored nodes.

    A node is in for sure when fewer than ``q`` scored nodes sit strictly
    above it and it fits together with its whole tie group; it is out for sure
    when ``q`` or more sit strictly above.  The tie group straddling the quota
    boundary is resolved by ``tie_policy``.  Inclusion probabilities are exact
    (``slots / group size`` under the random policy).
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    unscored = frozenset(unscored)
    scored = sorted((n for n in scores if n not in unscored), key=lambda n: (-scores[n], n))
    q = quota_size(alpha, len(scored))
    prob = {n: 0.0 for n in scores}
    targeted: set[NodeId] = set()
    if q > 0:
        boundary = scores[scored[q - 1]]
        above = [n for n in scored if scores[n] > boundary + TIE_ATOL]
        tied = [n for n in scored if abs(scores[n] - boundary) <= TIE_ATOL]
        slots = q - len(above)
        for n in above:
            prob[n] = 1.0
        targeted.update(above)
        if slots == len(tied) or tie_policy == "include-all-ties":
            chosen = tied
            p_tied = 1.0
        elif tie_policy == "exclude-all-ties":
            chosen = []
            p_tied = 0.0
        else:
            rng = np.random.default_rng(seed)
            picks = rng.choice(len(tied), size=slots, replace=False)
            chosen = [tied[k] for k in sorted(picks)]
            p_tied = slots / len(tied)
        for n in tied:
            prob[n] = p_tied
        targeted.update(chosen)
    return TargetingOutcome(
        targeted=frozenset(targeted),
        scores=dict(scores),
        probabilities=prob,
        unscored=unscored,
        cycle_ratios=dict(cycle_ratios or {}),
        mode="quota",
    )


def select(loo: LeaveOneOut, config: MechanismConfig) -> TargetingOutcome:
    if config.mode == "threshold":
        return target_threshold(loo.scores, config.cutoff, loo.unscored, loo.cycle_ratios)
    return target_quota(loo.scores, config.alpha, config.tie_policy, config.seed, loo.unscored, loo.cycle_ratios)


def run_mechanism(
    reports: Iterable[Report],
    network: SocialNetwork,
    config: MechanismConfig,
    tolerance: float = DEFAULT_TOLERANCE,
    method: str = "auto",
    workers: int = 1,
) -> TargetingOutcome:
    """Collect, score leave-one-out, select."""
    loo = leave_one_out_scores(reports, network, tolerance=tolerance, method=method, workers=workers)
    return select(loo, config)


@dataclass(frozen=True)
class MembershipDelta:
    before: bool
    after: bool
    p_before: float
    p_after: float

    @property
    def status(self) -> str:
        if self.p_after > self.p_before:
            return "gains"
        if self.p_after < self.p_before:
            return "loses"
        return "unchanged"


@dataclass(frozen=True)
class UnilateralAudit:
    deviator: NodeId
    deviator_changed: bool
    deltas: Mapping[NodeId, MembershipDelta]

    @property
    def others_changed(self) -> list[NodeId]:
        return [n for n, d in self.deltas.items() if n != self.deviator and d.status != "unchanged"]


def _replace_reports(reports: Iterable[Report], replacements: Mapping[NodeId, Report]) -> list[Report]:
    out = [replacements.get(rep.ranker, rep) for rep in reports]
    present = {rep.ranker for rep in out}
    out.extend(rep for k, rep in sorted(replacements.items()) if k not in present)
    return out


def _deltas(before: TargetingOutcome, after: TargetingOutcome) -> dict[NodeId, MembershipDelta]:
    return {
        n: MembershipDelta(
            before=n in before.targeted,
            after=n in after.targeted,
            p_before=before.probabilities.get(n, 0.0),
            p_after=after.probabilities.get(n, 0.0),
        )
        for n in sorted(before.scores)
    }


def audit_coalition(
    reports: Iterable[Report],
    network: SocialNetwork,
    config: MechanismConfig,
    coalition: Iterable[NodeId],
    alternative_reports: Iterable[Report],
) -> dict[NodeId, MembershipDelta]:
    """Membership of every coalition member before and after the joint deviation."""
    reports = list(reports)
    coalition = set(coalition)
    alternatives = {rep.ranker: rep for rep in alternative_reports}
    if set(alternatives) != coalition:
        raise ValidationError(
            f"alternative reports cover {sorted(alternatives)} but the coalition is {sorted(coalition)}"
        )
    for rep in alternatives.values():
        rep.validate(network)
    before = run_mechanism(reports, network, config)
    after = run_mechanism(_replace_reports(reports, alternatives), network, config)
    deltas = _deltas(before, after)
    return {n: deltas[n] for n in sorted(coalition)}


def audit_unilateral(
    reports: Iterable[Report],
    network: SocialNetwork,
    config: MechanismConfig,
    deviator: NodeId,
    alternative_report: Report,
) -> UnilateralAudit:
    """Does ``deviator`` change their own inclusion by sending ``alternative_report``?

    Changes are compared on inclusion probability, so a quota-mode deviation
    that only moves a node into a random tie still counts.  ``deltas`` covers
    every node, which shows who else the deviation moved.
    """
    if alternative_report.ranker != deviator:
        raise ValidationError(
            f"alternative report belongs to {alternative_report.ranker!r}, not {deviator!r}", ranker=deviator
        )
    alternative_report.validate(network)
    reports = list(reports)
    before = run_mechanism(reports, network, config)
    after = run_mechanism(_replace_reports(reports, {deviator: alternative_report}), network, config)
    deltas = _deltas(before, after)
    d = deltas[deviator]
    return UnilateralAudit(
        deviator=deviator,
        deviator_changed=d.before != d.after or d.p_before != d.p_after,
        deltas=deltas,
    )
