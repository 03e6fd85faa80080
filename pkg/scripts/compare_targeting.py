"""Friend-based targeting against the community-meeting baseline.

Runs a simulation config for each noise scale and prints precision and recall
of both methods.

    python scripts/compare_targeting.py configs/density_sweep.json --scales 0.25 0.5 1 2
"""

import argparse
import json
from pathlib import Path

from friendrank.experiment import ExperimentConfig, run_experiment


def rates(block):
    tp, fp, fn = block["tp"], block["fp"], block["fn"]
    precision = tp / (tp + fp) if tp + fp else float("nan")
    recall = tp / (tp + fn) if tp + fn else float("nan")
    return precision, recall


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--scales", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--seeds", type=int, help="override the number of seeds")
    ap.add_argument("--out", type=Path, default=Path("results/compare_targeting"))
    args = ap.parse_args(argv)

    base = json.loads(args.config.read_text())
    if args.seeds:
        base["seeds"] = {"start": 0, "count": args.seeds}
    print(f"{'scale':>6} {'fb prec':>8} {'fb rec':>8} {'cb prec':>8} {'cb rec':>8}")
    for scale in args.scales:
        raw = {**base, "noise": {"kind": "flip-logistic", "scale": scale}}
        raw.pop("baseline_noise", None)
        summary = run_experiment(ExperimentConfig.from_dict(raw), args.out / f"scale_{scale:g}", config_path=args.config)
        fb = rates(summary["friend_based"])
        cb = rates(summary["community"])
        print(f"{scale:>6g} {fb[0]:>8.3f} {fb[1]:>8.3f} {cb[0]:>8.3f} {cb[1]:>8.3f}")


if __name__ == "__main__":
    main()
