"""Run-report rendering: figures plus a delimited summary next to them.

Reads the artifact directory a run produced (manifest.json,
candidates.json, groups.txt, cl-*.meta) and writes PNG figures alongside
report.tsv so the numbers stay grep-able.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ForgeError

STAGE_ORDER = [
    "locations",
    "to_migrate",
    "groups",
    "candidates",
    "validated",
    "selected",
    "changelists",
    "shards",
]


def _load_run(run_dir: Path) -> tuple[dict, list, list[str], list[dict]]:
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ForgeError(f"not a run directory (missing manifest.json): {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    candidates = []
    cand_path = run_dir / "candidates.json"
    if cand_path.is_file():
        candidates = json.loads(cand_path.read_text(encoding="utf-8"))
    groups = []
    groups_path = run_dir / "groups.txt"
    if groups_path.is_file():
        groups = groups_path.read_text(encoding="utf-8").splitlines()
    metas = []
    for meta_path in sorted(run_dir.glob("cl-*.meta")):
        entry = {}
        for line in meta_path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition(":")
            entry.setdefault(key, value)
        metas.append(entry)
    return manifest, candidates, groups, metas


def _fig_stage_counts(manifest: dict, out: Path) -> Path:
    counts = manifest.get("counts", {})
    labels = [k for k in STAGE_ORDER if k in counts]
    values = [counts[k] for k in labels]
    fig, ax = plt.subplots(figsize=(7.2, 3.6))
    ax.bar(range(len(labels)), values, color="#4878cf")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("count")
    ax.set_title(f"pipeline funnel: {manifest.get('recipe', '?')}")
    for x, v in enumerate(values):
        ax.text(x, v, str(v), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    path = out / "stage_counts.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _fig_group_sizes(groups: list[str], out: Path) -> Path:
    sizes = {"single": 0, "small": 0, "medium": 0, "large": 0}
    for line in groups:
        parts = line.split()
        if len(parts) >= 4 and parts[0] == "GROUP":
            sizes[parts[3]] = sizes.get(parts[3], 0) + 1
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    labels = list(sizes)
    ax.bar(labels, [sizes[k] for k in labels], color="#6acc65")
    ax.set_ylabel("groups")
    ax.set_title("group size categories")
    fig.tight_layout()
    path = out / "group_sizes.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _fig_validators(candidates: list[dict], out: Path) -> Path:
    passes: dict[str, int] = {}
    fails: dict[str, int] = {}
    for cand in candidates:
        for entry in cand.get("report", []):
            v = entry["validator"]
            if entry["outcome"] == "pass":
                passes[v] = passes.get(v, 0) + 1
            else:
                fails[v] = fails.get(v, 0) + 1
    labels = sorted(set(passes) | set(fails))
    fig, ax = plt.subplots(figsize=(5.6, 3.2))
    xs = range(len(labels))
    ax.bar(xs, [passes.get(v, 0) for v in labels], color="#6acc65", label="pass")
    ax.bar(
        xs,
        [fails.get(v, 0) for v in labels],
        bottom=[passes.get(v, 0) for v in labels],
        color="#d65f5f",
        label="fail",
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("validator outcomes")
    ax.set_title("validation results across candidates")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "validators.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _fig_schedule(metas: list[dict], out: Path) -> Path:
    owner_periods: list[tuple[str, int]] = []
    for meta in metas:
        owners = [o for o in meta.get("owners", "").split(",") if o]
        periods = [p for p in meta.get("period", "").split(",") if p]
        for owner, period in zip(owners, periods):
            owner_periods.append((owner, int(period)))
    fig, ax = plt.subplots(figsize=(5.6, 3.2))
    if owner_periods:
        owners = sorted({o for o, _ in owner_periods})
        index = {o: i for i, o in enumerate(owners)}
        xs = [p for _, p in owner_periods]
        ys = [index[o] for o, _ in owner_periods]
        ax.scatter(xs, ys, s=60, color="#4878cf")
        ax.set_yticks(range(len(owners)))
        ax.set_yticklabels(owners, fontsize=8)
        ax.set_xticks(sorted({p for _, p in owner_periods}))
    ax.set_xlabel("review period")
    ax.set_title("shard schedule by owner")
    fig.tight_layout()
    path = out / "schedule.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(run_dir: Path, out_dir: Path) -> list[Path]:
    """Write figures plus report.tsv; returns the written paths."""
    manifest, candidates, groups, metas = _load_run(run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _fig_stage_counts(manifest, out_dir),
        _fig_group_sizes(groups, out_dir),
        _fig_validators(candidates, out_dir),
        _fig_schedule(metas, out_dir),
    ]
    rows = [("run_id", manifest.get("run_id", "")), ("recipe", manifest.get("recipe", ""))]
    rows.extend(sorted(manifest.get("counts", {}).items()))
    rows.append(("needs_human", str(sum(1 for c in metas if not c))))
    tsv = "".join(f"{k}\t{v}\n" for k, v in rows)
    summary = out_dir / "report.tsv"
    summary.write_text(tsv, encoding="utf-8")
    written.append(summary)
    return written
