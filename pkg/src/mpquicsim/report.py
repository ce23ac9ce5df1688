"""CSV serialization and SVG plotting for batches of runs."""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from statistics import median
from typing import Dict, List, Optional, Sequence, Tuple

from .metrics import RunMetrics
from .runner import RunConfig

CONFIG_FIELDS = [
    "run_id",
    "family",
    "point_index",
    "design",
    "cc",
    "cubic_variant",
    "ab_limit",
    "strategy",
    "dispatch",
    "pquic_mode",
    "ack_frequency",
    "size_bytes",
    "seed",
    "paths",
]
METRIC_FIELDS = [
    "transfer_time_s",
    "mean_ranges_per_ack_frame",
    "frac_ack_frames_at_limit",
    "rel_retransmitted",
    "max_per_byte_retrans",
    "ack_bytes_total",
    "ack_frames_total",
    "stream_bytes_sent",
    "buffer_drops",
    "packets_lost",
    "spurious_losses",
]
CSV_FIELDS = CONFIG_FIELDS + METRIC_FIELDS

_INT_FIELDS = {
    "point_index",
    "size_bytes",
    "seed",
    "max_per_byte_retrans",
    "ack_bytes_total",
    "ack_frames_total",
    "stream_bytes_sent",
    "buffer_drops",
    "packets_lost",
    "spurious_losses",
}
_FLOAT_FIELDS = {
    "transfer_time_s",
    "mean_ranges_per_ack_frame",
    "frac_ack_frames_at_limit",
    "rel_retransmitted",
}
_BOOL_FIELDS = {"pquic_mode", "ack_frequency"}


def encode_paths(paths: Sequence[Sequence[float]]) -> str:
    return "|".join(f"{bw!r}:{rtt!r}" for bw, rtt in paths)


def decode_paths(text: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for part in text.split("|"):
        bw, rtt = part.split(":")
        out.append((float(bw), float(rtt)))
    return tuple(out)


def runs_row(cfg: RunConfig, metrics: RunMetrics) -> dict:
    row = {
        "run_id": cfg.run_id(),
        "family": cfg.family,
        "point_index": cfg.point_index,
        "design": cfg.design,
        "cc": cfg.cc,
        "cubic_variant": cfg.cubic_variant,
        "ab_limit": "inf" if cfg.ab_limit is None else str(cfg.ab_limit),
        "strategy": cfg.strategy,
        "dispatch": cfg.dispatch,
        "pquic_mode": cfg.pquic_mode,
        "ack_frequency": cfg.ack_frequency,
        "size_bytes": cfg.size_bytes,
        "seed": cfg.seed,
        "paths": encode_paths(cfg.paths),
    }
    row.update(metrics.to_dict())
    return row


def write_runs_csv(path: str, rows: List[dict], append: bool = False) -> None:
    exists = append and os.path.exists(path)
    mode = "a" if exists else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if not exists:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_runs_csv(path: str) -> List[dict]:
    rows: List[dict] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {}
            for key, value in raw.items():
                if key in _INT_FIELDS:
                    row[key] = int(value)
                elif key in _FLOAT_FIELDS:
                    row[key] = float(value)
                elif key in _BOOL_FIELDS:
                    row[key] = value == "True"
                else:
                    row[key] = value
            rows.append(row)
    return rows


def write_points_csv(
    path: str, family: str, seed: int, points, scenarios, append: bool = False
) -> None:
    """One row per design point: unit coordinates plus mapped path values."""
    n_paths = len(scenarios[0].paths) if scenarios else 0
    dim = points.shape[1] if len(points) else 0
    header = (
        ["family", "seed", "point_index"]
        + [f"u{i}" for i in range(dim)]
        + [
            f"path{p}_{name}"
            for p in range(n_paths)
            for name in ("bandwidth_mbps", "rtt_ms")
        ]
    )
    exists = append and os.path.exists(path)
    mode = "a" if exists else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(header)
        for i, scenario in enumerate(scenarios):
            row = [family, seed, i]
            row.extend(repr(float(x)) for x in points[i])
            for p in scenario.paths:
                row.extend(
                    (repr(float(p.bandwidth_mbps)), repr(float(p.rtt_ms)))
                )
            writer.writerow(row)


def config_label(row: dict) -> str:
    bits = [row["design"], row["cc"], f"ab={row['ab_limit']}", row["dispatch"]]
    if row["pquic_mode"]:
        bits.append("pquic")
    return "/".join(bits)


def _ecdf(values: Sequence[float]):
    xs = sorted(values)
    ys = [(i + 1) / len(xs) for i in range(len(xs))]
    return xs, ys


def _by_label(rows: Sequence[dict]) -> Dict[str, List[dict]]:
    groups: Dict[str, List[dict]] = defaultdict(list)
    for row in rows:
        groups[config_label(row)].append(row)
    return groups


def plot_time_scatter(rows: Sequence[dict], out_path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, group in sorted(_by_label(rows).items()):
        xs = [r["point_index"] for r in group]
        ys = [r["transfer_time_s"] for r in group]
        ax.scatter(xs, ys, s=14, alpha=0.75, label=label)
    ax.set_xlabel("scenario point")
    ax.set_ylabel("transfer time (s)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_metric_cdf(
    rows: Sequence[dict],
    key: str,
    xlabel: str,
    out_path: str,
    logx: bool = False,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, group in sorted(_by_label(rows).items()):
        xs, ys = _ecdf([r[key] for r in group])
        ax.plot(xs, ys, drawstyle="steps-post", label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def dispatch_time_ratios(rows: Sequence[dict]) -> List[float]:
    """Per-scenario transfer-time ratios on-path / duplicate.

    Rows are paired when they differ only in the acknowledgment dispatch;
    a ratio above 1 means duplicating every acknowledgment on all paths
    made the transfer faster than sending it only on its own path.
    """
    def pair_key(row: dict):
        return tuple(
            row[f]
            for f in CONFIG_FIELDS
            if f not in ("run_id", "dispatch")
        )

    by_key: Dict[tuple, Dict[str, float]] = defaultdict(dict)
    for row in rows:
        by_key[pair_key(row)][row["dispatch"]] = row["transfer_time_s"]
    ratios = []
    for times in by_key.values():
        if "on-path" in times and "duplicate" in times:
            ratios.append(times["on-path"] / times["duplicate"])
    return ratios


def plot_ratio_cdf(rows: Sequence[dict], out_path: str) -> bool:
    ratios = dispatch_time_ratios(rows)
    if not ratios:
        return False
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    xs, ys = _ecdf(ratios)
    ax.plot(xs, ys, drawstyle="steps-post")
    ax.axvline(1.0, color="grey", linewidth=0.8, linestyle="--")
    ax.set_xscale("log")
    ax.set_xlabel("transfer time ratio (single ack path / duplicated acks)")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return True


def write_summary_csv(rows: Sequence[dict], out_path: str) -> None:
    """Per-configuration medians of the headline metrics."""
    summary_keys = [
        "transfer_time_s",
        "mean_ranges_per_ack_frame",
        "frac_ack_frames_at_limit",
        "rel_retransmitted",
        "ack_bytes_total",
    ]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "runs"] + [f"median_{k}" for k in summary_keys])
        for label, group in sorted(_by_label(rows).items()):
            writer.writerow(
                [label, len(group)]
                + [repr(median(r[k] for r in group)) for k in summary_keys]
            )


def render_report(
    in_dir: str, write_csv: bool = True, write_svg: bool = True
) -> List[str]:
    """Build summary CSV and SVG plots from a result directory's runs.csv."""
    runs_path = os.path.join(in_dir, "runs.csv")
    rows = read_runs_csv(runs_path)
    if not rows:
        raise ValueError(f"empty runs file: {runs_path}")
    written: List[str] = []
    if write_csv:
        out = os.path.join(in_dir, "summary.csv")
        write_summary_csv(rows, out)
        written.append(out)
    if write_svg:
        plots_dir = os.path.join(in_dir, "plots")
        os.makedirs(plots_dir, exist_ok=True)
        scatter = os.path.join(plots_dir, "transfer_time_scatter.svg")
        plot_time_scatter(rows, scatter)
        written.append(scatter)
        ranges_cdf = os.path.join(plots_dir, "mean_ranges_cdf.svg")
        plot_metric_cdf(
            rows, "mean_ranges_per_ack_frame", "mean ranges per ack frame", ranges_cdf
        )
        written.append(ranges_cdf)
        retrans_cdf = os.path.join(plots_dir, "rel_retransmitted_cdf.svg")
        plot_metric_cdf(
            rows, "rel_retransmitted", "retransmitted bytes / transfer size", retrans_cdf
        )
        written.append(retrans_cdf)
        ratio = os.path.join(plots_dir, "dispatch_time_ratio_cdf.svg")
        if plot_ratio_cdf(rows, ratio):
            written.append(ratio)
    return written
