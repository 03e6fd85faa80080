"""Batch simulation: friend-based targeting against the community baseline.

A config is a JSON object::

    {
      "networks": [{"kind": "erdos-renyi", "n": 30, "p": 0.3}, ...],
      "noise": {"kind": "flip-logistic", "scale": 0.5},
      "coverage": 1.0,
      "target_share": 0.3,
      "baseline_quota": 0.3,
      "mechanism": {"mode": "quota", "alpha": 0.3, "tie_policy": "include-all-ties"},
      "seeds": {"start": 0, "count": 100},
      "bins": 20,
      "workers": 1
    }

``seeds`` may also be an explicit list.  A threshold mechanism takes
``"cutoff": <float>`` or ``"cutoff": "calibrate"`` with
``"calibration_seeds"``; calibration picks the cutoff that targets
``target_share`` of the pooled leave-one-out scores on those seeds.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .mechanism import TIE_POLICIES, MechanismConfig, leave_one_out_scores, quota_size, select
from .sim import (
    NETWORK_KINDS,
    NOISE_KINDS,
    CycleRatioRow,
    NetworkModel,
    NoiseModel,
    community_baseline,
    density_association,
    evaluate_targeting,
    generate_community,
    generate_network,
    run_seeds,
    sample_reports,
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptySweep(ConfigError):
    """Config asks for zero runs."""


def _get(obj: dict, key: str, path: str, kind, default=...):
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
        return default
    val = obj[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}" if path else key, f"expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path or "<root>", "expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _network(obj, path) -> NetworkModel:
    _check_keys(obj, ("kind", "n", "p", "k", "beta", "r"), path)
    kind = _get(obj, "kind", path, str)
    if kind not in NETWORK_KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {', '.join(NETWORK_KINDS)}")
    kw = {"kind": kind, "n": _get(obj, "n", path, int)}
    for name, typ in (("p", float), ("k", int), ("beta", float), ("r", float)):
        if name in obj:
            kw[name] = _get(obj, name, path, typ)
    try:
        return NetworkModel(**kw)
    except ValueError as err:
        raise ConfigError(path, str(err)) from None


def _noise(obj, path) -> NoiseModel:
    _check_keys(obj, ("kind", "p", "scale"), path)
    kind = _get(obj, "kind", path, str)
    if kind not in NOISE_KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {', '.join(NOISE_KINDS)}")
    try:
        return NoiseModel(kind=kind, p=_get(obj, "p", path, float, 0.0), scale=_get(obj, "scale", path, float, 1.0))
    except ValueError as err:
        raise ConfigError(path, str(err)) from None


@dataclass(frozen=True)
class MechanismSpec:
    mode: str
    cutoff: float | None = None
    calibrate: bool = False
    calibration_seeds: tuple[int, ...] = ()
    alpha: float | None = None
    tie_policy: str = "include-all-ties"


def _mechanism(obj, path) -> MechanismSpec:
    _check_keys(obj, ("mode", "cutoff", "alpha", "tie_policy", "calibration_seeds"), path)
    mode = _get(obj, "mode", path, str)
    if mode == "threshold":
        if "alpha" in obj:
            raise ConfigError(f"{path}.alpha", "not allowed in threshold mode")
        raw = obj.get("cutoff")
        if raw == "calibrate":
            seeds = _seeds(obj.get("calibration_seeds"), f"{path}.calibration_seeds")
            return MechanismSpec(mode, calibrate=True, calibration_seeds=tuple(seeds))
        return MechanismSpec(mode, cutoff=_get(obj, "cutoff", path, float))
    if mode == "quota":
        if "cutoff" in obj:
            raise ConfigError(f"{path}.cutoff", "not allowed in quota mode")
        alpha = _get(obj, "alpha", path, float)
        if not 0 < alpha <= 1:
            raise ConfigError(f"{path}.alpha", "must lie in (0, 1]")
        tie = _get(obj, "tie_policy", path, str, "include-all-ties")
        if tie not in TIE_POLICIES:
            raise ConfigError(f"{path}.tie_policy", f"must be one of {', '.join(TIE_POLICIES)}")
        return MechanismSpec(mode, alpha=alpha, tie_policy=tie)
    raise ConfigError(f"{path}.mode", "must be 'threshold' or 'quota'")


def _seeds(obj, path) -> list[int]:
    if isinstance(obj, dict):
        _check_keys(obj, ("start", "count"), path)
        start = _get(obj, "start", path, int, 0)
        count = _get(obj, "count", path, int)
        seeds = list(range(start, start + count))
    elif isinstance(obj, list):
        if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in obj):
            raise ConfigError(path, "seeds must be non-negative integers")
        seeds = list(obj)
    else:
        raise ConfigError(path, "expected a list of seeds or {start, count}")
    if not seeds:
        raise EmptySweep(path, "at least one seed is required")
    return seeds


@dataclass(frozen=True)
class ExperimentConfig:
    networks: tuple[NetworkModel, ...]
    noise: NoiseModel
    mechanism: MechanismSpec
    seeds: tuple[int, ...]
    coverage: float = 1.0
    target_share: float = 0.3
    baseline_quota: float = 0.3
    baseline_noise: NoiseModel = field(default_factory=NoiseModel)
    bins: int = 20
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        _check_keys(
            obj,
            ("networks", "noise", "baseline_noise", "coverage", "target_share", "baseline_quota",
             "mechanism", "seeds", "bins", "workers"),
            "",
        )
        nets = _get(obj, "networks", "", list)
        if not nets:
            raise ConfigError("networks", "at least one network model is required")
        networks = tuple(_network(m, f"networks[{k}]") for k, m in enumerate(nets))
        noise = _noise(_get(obj, "noise", "", dict), "noise")
        coverage = _get(obj, "coverage", "", float, 1.0)
        if not 0 < coverage <= 1:
            raise ConfigError("coverage", "must lie in (0, 1]")
        share = _get(obj, "target_share", "", float, 0.3)
        if not 0 < share <= 1:
            raise ConfigError("target_share", "must lie in (0, 1]")
        bq = _get(obj, "baseline_quota", "", float, share)
        if not 0 < bq <= 1:
            raise ConfigError("baseline_quota", "must lie in (0, 1]")
        bins = _get(obj, "bins", "", int, 20)
        if bins < 1:
            raise ConfigError("bins", "must be positive")
        workers = _get(obj, "workers", "", int, 1)
        if workers < 1:
            raise ConfigError("workers", "must be positive")
        return cls(
            networks=networks,
            noise=noise,
            mechanism=_mechanism(_get(obj, "mechanism", "", dict), "mechanism"),
            seeds=tuple(_seeds(obj.get("seeds"), "seeds")),
            coverage=coverage,
            target_share=share,
            baseline_quota=bq,
            baseline_noise=_noise(obj["baseline_noise"], "baseline_noise") if "baseline_noise" in obj else noise,
            bins=bins,
            workers=workers,
            raw=obj,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConfigError("<file>", f"invalid JSON at line {err.lineno}: {err.msg}") from None
        return cls.from_dict(obj)


RUN_COLUMNS = (
    "run_id", "model_index", "model", "seed", "n", "density", "cycle_ratio", "cutoff", "deserving",
    "fb_targeted", "fb_tp", "fb_fp", "fb_fn", "fb_tn", "fb_unscored",
    "cb_targeted", "cb_tp", "cb_fp", "cb_fn", "cb_tn",
)


def _community(cfg: ExperimentConfig, mi: int, seed: int):
    s = run_seeds(seed, mi)
    net = generate_network(cfg.networks[mi], s["network"])
    com = generate_community(net, s["community"], cfg.target_share)
    reports = sample_reports(com, cfg.noise, cfg.coverage, s["reports"])
    return s, com, reports


def _one_run(args):
    cfg, cutoff, run_id, mi, seed = args
    s, com, reports = _community(cfg, mi, seed)
    loo = leave_one_out_scores(reports, com.network)
    spec = cfg.mechanism
    if spec.mode == "threshold":
        mech = MechanismConfig(cutoff=cutoff)
    else:
        mech = MechanismConfig(alpha=spec.alpha, tie_policy=spec.tie_policy, seed=s["ties"])
    fb = select(loo, mech)
    cb = community_baseline(com, cfg.baseline_noise, cfg.baseline_quota, s["baseline"])
    full_ratio = loo.full.cycle_ratio
    ev_fb = evaluate_targeting(fb, com, full_ratio)
    ev_cb = evaluate_targeting(cb, com, full_ratio)
    row = {
        "run_id": run_id,
        "model_index": mi,
        "model": cfg.networks[mi].label(),
        "seed": seed,
        "n": len(com.network.nodes),
        "density": com.network.density,
        "cycle_ratio": full_ratio,
        "cutoff": cutoff,
        "deserving": len(com.deserving),
        "fb_targeted": ev_fb.n_targeted,
        "fb_tp": ev_fb.true_positives,
        "fb_fp": ev_fb.false_positives,
        "fb_fn": ev_fb.false_negatives,
        "fb_tn": ev_fb.true_negatives,
        "fb_unscored": ev_fb.unscored,
        "cb_targeted": ev_cb.n_targeted,
        "cb_tp": ev_cb.true_positives,
        "cb_fp": ev_cb.false_positives,
        "cb_fn": ev_cb.false_negatives,
        "cb_tn": ev_cb.true_negatives,
    }
    theta = {
        ("friend-based", "targeted"): [com.theta[n] for n in sorted(fb.targeted)],
        ("friend-based", "excluded"): [
            com.theta[n] for n in com.network.nodes if n not in fb.targeted and n not in fb.unscored
        ],
        ("community", "targeted"): [com.theta[n] for n in sorted(cb.targeted)],
        ("community", "excluded"): [com.theta[n] for n in com.network.nodes if n not in cb.targeted],
    }
    return row, theta


def calibrate_cutoff(cfg: ExperimentConfig, seeds) -> float:
    """Cutoff that puts ``target_share`` of pooled leave-one-out scores strictly above it."""
    pooled = []
    for mi in range(len(cfg.networks)):
        for seed in seeds:
            _, com, reports = _community(cfg, mi, seed)
            loo = leave_one_out_scores(reports, com.network)
            pooled.extend(v for n, v in loo.scores.items() if n not in loo.unscored)
    if not pooled:
        raise ValueError("calibration runs produced no scored nodes")
    pooled = np.sort(pooled)[::-1]
    k = quota_size(cfg.target_share, len(pooled))
    if k == 0:
        return float(pooled[0])
    if k >= len(pooled):
        return float(pooled[-1]) - 1.0
    return float((pooled[k - 1] + pooled[k]) / 2)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _histogram(values, edges):
    counts, _ = np.histogram(values, bins=edges)
    return counts


def run_experiment(cfg: ExperimentConfig, out_dir, command: str = "simulate", config_path=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.mechanism
    cutoff = None
    if spec.mode == "threshold":
        cutoff = calibrate_cutoff(cfg, spec.calibration_seeds) if spec.calibrate else spec.cutoff

    jobs = []
    for mi in range(len(cfg.networks)):
        for seed in cfg.seeds:
            jobs.append((cfg, cutoff, len(jobs), mi, seed))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    rows = [r for r, _ in results]

    paths = {
        "runs": out / "runs.csv",
        "theta_hist": out / "theta_hist.csv",
        "cycle_ratio_hist": out / "cycle_ratio_hist.csv",
        "summary": out / "summary.json",
        "manifest": out / "manifest.json",
    }
    with open(paths["runs"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in RUN_COLUMNS])

    pooled: dict[tuple[str, str], list[float]] = {}
    for _, theta in results:
        for key, vals in theta.items():
            pooled.setdefault(key, []).extend(vals)
    everything = [v for vals in pooled.values() for v in vals]
    lo, hi = (min(everything), max(everything)) if everything else (0.0, 1.0)
    edges = np.linspace(lo, hi if hi > lo else lo + 1.0, cfg.bins + 1)
    with open(paths["theta_hist"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "group", "bin_left", "bin_right", "count"))
        for method in ("friend-based", "community"):
            for group in ("targeted", "excluded"):
                counts = _histogram(pooled.get((method, group), []), edges)
                for k, c in enumerate(counts):
                    w.writerow((method, group, repr(float(edges[k])), repr(float(edges[k + 1])), int(c)))

    ratios = [r["cycle_ratio"] for r in rows if r["cycle_ratio"] is not None]
    cr_edges = np.linspace(0.0, 1.0, cfg.bins + 1)
    with open(paths["cycle_ratio_hist"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_left", "bin_right", "count"))
        for k, c in enumerate(_histogram(ratios, cr_edges)):
            w.writerow((repr(float(cr_edges[k])), repr(float(cr_edges[k + 1])), int(c)))

    def mean(key):
        return float(np.mean([r[key] for r in rows])) if rows else None

    summary = {
        "runs": len(rows),
        "cutoff": cutoff,
        "cutoff_calibrated": spec.calibrate,
        "mean_cycle_ratio": float(np.mean(ratios)) if ratios else None,
        "mean_density": mean("density"),
        "friend_based": {k: mean(f"fb_{k}") for k in ("targeted", "tp", "fp", "fn", "tn", "unscored")},
        "community": {k: mean(f"cb_{k}") for k in ("targeted", "tp", "fp", "fn", "tn")},
    }
    if spec.calibrate:
        summary["calibration_note"] = (
            "cutoff was fitted to the score distribution of calibration runs; "
            "a cutoff that depends on reported scores is no longer fixed in advance"
        )
    cr_rows = [CycleRatioRow(r["run_id"], r["model"], r["seed"], r["density"], r["cycle_ratio"]) for r in rows]
    if ratios:
        summary["density_association"] = density_association(cr_rows)
    paths["summary"].write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    manifest = {
        "command": command,
        "inputs": {"config": str(config_path) if config_path else None},
        "config": cfg.raw or _echo(cfg),
        "seeds": list(cfg.seeds),
        "version": __version__,
        "outputs": {k: p.name for k, p in paths.items()},
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return summary


def _echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d.pop("raw", None)
    return d
