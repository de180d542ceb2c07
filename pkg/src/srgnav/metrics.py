"""Success, SPL, SoftSPL and distance-to-success over episode records."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .bayes import RegionEstimator
from .navigator import EpisodeConfig, Policy, run_episode, sample_episodes, specs_hash

REPORT_FORMAT_VERSION = 1


def _check(records):
    records = list(records)
    if not records:
        raise ValueError("no episode records")
    for r in records:
        if r.shortest_m <= 0:
            raise ValueError(f"episode {r.episode_id} has non-positive shortest path length {r.shortest_m}")
    return records


def success_rate(records) -> float:
    records = list(records)
    if not records:
        raise ValueError("no episode records")
    return sum(1.0 if r.success else 0.0 for r in records) / len(records)


def spl(records) -> float:
    records = _check(records)
    total = 0.0
    for r in records:
        if r.success:
            total += r.shortest_m / max(r.path_m, r.shortest_m)
    return total / len(records)


def soft_spl(records) -> float:
    """SPL with the binary success replaced by progress ``1 - d/max(l, d)``.

    ``d`` is the geodesic distance from the final pose to the goal.
    """
    records = _check(records)
    total = 0.0
    for r in records:
        d, l, p = r.terminal_geodesic_m, r.shortest_m, r.path_m
        total += (1.0 - d / max(l, d)) * (l / max(p, l))
    return total / len(records)


def dts(record, threshold_m: float = 1.0) -> float:
    return max(record.terminal_euclid_m - threshold_m, 0.0)


def mean_dts(records, threshold_m: float = 1.0) -> float:
    records = list(records)
    if not records:
        raise ValueError("no episode records")
    return sum(dts(r, threshold_m) for r in records) / len(records)


@dataclass
class MetricsReport:
    policy: str
    rows: list  # one dict per scene
    aggregate: dict
    config: dict = field(default_factory=dict)
    episodes_hash: str = ""

    def to_dict(self) -> dict:
        return {"format_version": REPORT_FORMAT_VERSION, "policy": self.policy, "config": self.config,
                "episodes_hash": self.episodes_hash, "rows": self.rows, "aggregate": self.aggregate}


def _summary(records, threshold_m):
    return {
        "episodes": len(records),
        "success": success_rate(records),
        "spl": spl(records),
        "soft_spl": soft_spl(records),
        "dts_mean_m": mean_dts(records, threshold_m),
    }


def summarize(records, policy: str, config: EpisodeConfig = EpisodeConfig(), episodes_hash: str = "") -> MetricsReport:
    records = list(records)
    scenes = sorted({r.scene_id for r in records})
    rows = []
    for sid in scenes:
        row = {"scene": sid}
        row.update(_summary([r for r in records if r.scene_id == sid], config.success_radius_m))
        rows.append(row)
    return MetricsReport(policy, rows, _summary(records, config.success_radius_m),
                         config.to_dict(), episodes_hash)


def format_table(reports) -> str:
    """Plain-text table with per-scene rows and an average line per policy."""
    header = f"{'policy':<18} {'scene':<14} {'episodes':>8} {'Success':>8} {'SPL':>7} {'SoftSPL':>8} {'DTS(m)':>7}"
    lines = [header, "-" * len(header)]
    for rep in reports:
        for row in rep.rows + [dict(rep.aggregate, scene="Average")]:
            lines.append(f"{rep.policy:<18} {row['scene']:<14} {row['episodes']:>8d} {row['success']:>8.3f} "
                         f"{row['spl']:>7.3f} {row['soft_spl']:>8.3f} {row['dts_mean_m']:>7.3f}")
    return "\n".join(lines) + "\n"


def dumps_report(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=1) + "\n"


def _run_scene(args):
    scene, pol, specs, config = args
    estimator = RegionEstimator(pol.srg) if pol.srg is not None else None
    return [run_episode(scene, pol, sp, config, estimator) for sp in specs]


def compare_policies(scenes, policies: dict, episodes_per_scene: int, seed: int,
                     config: EpisodeConfig = EpisodeConfig(), workers: int = 1):
    """Run every policy on the same episode specifications.

    Returns ``{name: (MetricsReport, records)}``. Policy assets are checked
    before any episode runs. With ``workers > 1`` scenes run in separate
    processes; results do not depend on the worker count.
    """
    if not policies:
        raise ValueError("at least one policy is required")
    for name, pol in policies.items():
        if not isinstance(pol, Policy):
            raise TypeError(f"policy {name!r} is not a Policy")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    scenes = list(scenes)
    specs = {s.id: sample_episodes(s, episodes_per_scene, [seed, i], config) for i, s in enumerate(scenes)}
    all_specs = [sp for s in scenes for sp in specs[s.id]]
    h = specs_hash(all_specs)
    out = {}
    for name, pol in policies.items():
        jobs = [(s, pol, specs[s.id], config) for s in scenes]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(_run_scene, jobs))
        else:
            chunks = [_run_scene(job) for job in jobs]
        records = [r for chunk in chunks for r in chunk]
        out[name] = (summarize(records, name, config, h), records)
    return out
