"""Changelist assembly, owner sharding, review-rate scheduling, and the
AI-authorship metric.

The metric compares added text of the tool-generated first version against
added text of the finally-committed version via character-level LCS: the
fraction of committed added characters the tool authored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus.snapshot import RepoSnapshot, owners_of
from .diffs import diff_file, diff_files
from .discovery import TAG_AMBIGUOUS, TaggedLocation
from .errors import ForgeError
from .grouping import FileGroup
from .recipes import Recipe

UNOWNED = "UNOWNED"


@dataclass
class Changelist:
    id: int
    description: str
    source_group: str
    base: dict[str, str]  # pre-change content of touched files
    snapshot_version: dict[str, str]  # generated content (immutable baseline)
    ambiguous: list[TaggedLocation] = field(default_factory=list)

    @property
    def file_paths(self) -> list[str]:
        return sorted(self.snapshot_version)


@dataclass
class Shard:
    changelist_id: int
    owner: str
    files: list[str]
    scheduled_period: int = -1


def assemble_changelist(
    cl_id: int,
    selected_contents: dict[str, str],
    group: FileGroup,
    tagged: list[TaggedLocation],
    recipe: Recipe,
    snapshot: RepoSnapshot,
) -> Changelist:
    """Build the reviewable unit from a selected candidate's final contents.

    Only genuinely changed files are carried; a no-op selection is an error
    (never emit empty changelists)."""
    base: dict[str, str] = {}
    snap_version: dict[str, str] = {}
    for path in group.files:
        f = snapshot.get(path)
        if f is None:
            continue
        new = selected_contents.get(path, f.content)
        if new != f.content:
            base[path] = f.content
            snap_version[path] = new
    if not snap_version:
        raise ForgeError("empty-change: selected candidate modifies nothing")

    group_files = set(group.files)
    ambiguous = [
        t for t in tagged if t.tag == TAG_AMBIGUOUS and t.file in group_files
    ]
    lines = [f"[{recipe.id}] migrate group {group.group_id} ({len(snap_version)} files)"]
    for t in ambiguous:
        lines.append(f"NEEDS-HUMAN: {t.file}:{t.line} ({t.reason})")
    return Changelist(
        id=cl_id,
        description="\n".join(lines),
        source_group=group.group_id,
        base=base,
        snapshot_version=snap_version,
        ambiguous=ambiguous,
    )


def emit_diff(changelist: Changelist) -> str:
    """Canonical unified diff: lexicographic file order, 3 context lines."""
    return diff_files(
        {
            path: (changelist.base.get(path, ""), content)
            for path, content in changelist.snapshot_version.items()
        }
    )


def shard_by_owner(changelist: Changelist, snapshot: RepoSnapshot) -> list[Shard]:
    """One shard per distinct owner of the touched files. A file with no
    OWNERS ancestor lands in the UNOWNED shard."""
    by_owner: dict[str, list[str]] = {}
    for path in changelist.file_paths:
        try:
            owners = owners_of(snapshot, path)
        except ForgeError:
            owners = []
        owner = owners[0] if owners else UNOWNED
        by_owner.setdefault(owner, []).append(path)
    return [
        Shard(changelist_id=changelist.id, owner=owner, files=sorted(files))
        for owner, files in sorted(by_owner.items())
    ]


def schedule(shards: list[Shard], cap_per_period: int) -> list[Shard]:
    """Greedy assignment in shard order: at most cap shards per period and
    at most one shard per owner per period."""
    if cap_per_period < 1:
        raise ForgeError("cap_per_period must be >= 1")
    period_counts: dict[int, int] = {}
    owner_periods: dict[tuple[str, int], bool] = {}
    for shard in shards:
        period = 0
        while (
            period_counts.get(period, 0) >= cap_per_period
            or (shard.owner, period) in owner_periods
        ):
            period += 1
        shard.scheduled_period = period
        period_counts[period] = period_counts.get(period, 0) + 1
        owner_periods[(shard.owner, period)] = True
    return shards


def lcs_length(a: str, b: str) -> int:
    """Character-level longest common subsequence (iterative two-row DP)."""
    if a == b:
        return len(a)
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def authorship_fraction(generated_added: str, final_added: str) -> float:
    """|LCS(generated, final)| / |final|, over added text."""
    if not final_added:
        return 1.0 if not generated_added else 0.0
    return lcs_length(generated_added, final_added) / len(final_added)


def _added_against_base(base: str, version: str) -> str:
    from .diffs import added_text

    return added_text(diff_file("f", base, version))


def authorship_metric(
    snapshot_version: dict[str, str],
    final_version: dict[str, str],
    base: dict[str, str] | None = None,
) -> float:
    """Aggregate character-weighted fraction across the file set.

    With no base the whole content counts as added text; files present in
    only one version contribute their full added text."""
    base = base or {}
    gen_parts: list[str] = []
    fin_parts: list[str] = []
    for path in sorted(set(snapshot_version) | set(final_version)):
        b = base.get(path, "")
        if path in snapshot_version:
            gen_parts.append(_added_against_base(b, snapshot_version[path]))
        if path in final_version:
            fin_parts.append(_added_against_base(b, final_version[path]))
    return authorship_fraction("".join(gen_parts), "".join(fin_parts))


def authorship_by_file(
    snapshot_version: dict[str, str],
    final_version: dict[str, str],
    base: dict[str, str] | None = None,
) -> dict[str, float]:
    base = base or {}
    out: dict[str, float] = {}
    for path in sorted(set(snapshot_version) | set(final_version)):
        b = base.get(path, "")
        gen = _added_against_base(b, snapshot_version[path]) if path in snapshot_version else ""
        fin = _added_against_base(b, final_version[path]) if path in final_version else ""
        out[path] = authorship_fraction(gen, fin)
    return out
