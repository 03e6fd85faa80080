"""Exhaustive manipulation audit on every labelled network with up to N nodes.

Threshold mode should never let a node move its own membership.  Quota mode
can, and the script counts how often.

    python scripts/audit_small_networks.py --max-nodes 4
"""

import argparse
import itertools

import numpy as np

from friendrank.mechanism import MechanismConfig, leave_one_out_scores, select
from friendrank.ranking import Report, SocialNetwork


def networks(max_n):
    for n in range(2, max_n + 1):
        nodes = [f"v{k}" for k in range(n)]
        pairs = list(itertools.combinations(nodes, 2))
        for mask in range(1 << len(pairs)):
            yield SocialNetwork.from_edges([p for k, p in enumerate(pairs) if mask >> k & 1], nodes=nodes)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-nodes", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cutoff", type=float, default=0.0)
    ap.add_argument("--alpha", type=float, default=0.4)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    configs = {"threshold": MechanismConfig(cutoff=args.cutoff), "quota": MechanismConfig(alpha=args.alpha)}
    changed = dict.fromkeys(configs, 0)
    total = 0
    for net in networks(args.max_nodes):
        base = [Report(r, tuple(rng.permutation(sorted(net.neighbors(r))))) for r in net.nodes if net.neighbors(r)]
        before = leave_one_out_scores(base, net)
        prob = {k: select(before, c).probabilities for k, c in configs.items()}
        for rep in base:
            for perm in itertools.permutations(sorted(net.neighbors(rep.ranker))):
                profile = [Report(rep.ranker, perm) if r.ranker == rep.ranker else r for r in base]
                after = leave_one_out_scores(profile, net)
                total += 1
                for k, c in configs.items():
                    changed[k] += select(after, c).probabilities[rep.ranker] != prob[k][rep.ranker]
    print(f"{total} unilateral deviations checked")
    for k, v in changed.items():
        print(f"{k:>9}: deviator's own inclusion changed in {v} cases")


if __name__ == "__main__":
    main()
