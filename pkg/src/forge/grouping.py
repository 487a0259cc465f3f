"""File grouping: related-file expansion, clustering, escapes, packing.

Groups are connected components of the undirected file projection induced
on the candidate set, so every group can be migrated (and prompted)
together. Escape edges flag references crossing the operator-chosen scope
boundary, where transition wrappers would be needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus.snapshot import RepoSnapshot
from .corpus.xref import XrefGraph
from .errors import ForgeError

SIZE_SINGLE = "single"
SIZE_SMALL = "small"
SIZE_MEDIUM = "medium"
SIZE_LARGE = "large"


def size_category(n: int) -> str:
    if n <= 1:
        return SIZE_SINGLE
    if n <= 5:
        return SIZE_SMALL
    if n <= 20:
        return SIZE_MEDIUM
    return SIZE_LARGE


@dataclass
class FileGroup:
    files: list[str]
    size_category: str = SIZE_SINGLE
    escape_edges: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def group_id(self) -> str:
        return self.files[0] if self.files else "<empty>"


def test_pair_path(path: str) -> str:
    p = Path(path)
    return (p.parent / f"{p.stem}Test{p.suffix}").as_posix()


def expand_related_files(
    files: set[str],
    graph: XrefGraph,
    snapshot: RepoSnapshot,
    scope: set[str] | None = None,
) -> set[str]:
    """Close the set over paired tests, interface definitions, and direct
    dependencies (run to a fixed point so a second application is a no-op).
    Only files inside ``scope`` (when given) are added."""

    def allowed(p: str) -> bool:
        return scope is None or p in scope

    out_edges: dict[str, set[str]] = {}
    for a, b in graph.file_projection():
        out_edges.setdefault(a, set()).add(b)

    result = set(files)
    while True:
        added: set[str] = set()
        for f in result:
            pair = test_pair_path(f)
            if pair not in result and pair in snapshot and allowed(pair):
                added.add(pair)
            for dep in out_edges.get(f, ()):
                if dep not in result and allowed(dep):
                    added.add(dep)
        if not added:
            return result
        result |= added


def cluster_file_groups(files: set[str], graph: XrefGraph) -> list[FileGroup]:
    """Connected components of the undirected projection induced on ``files``,
    ordered by their lexicographically smallest member."""
    parent: dict[str, str] = {f: f for f in files}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for a, b in graph.file_projection():
        if a in parent and b in parent:
            union(a, b)

    components: dict[str, list[str]] = {}
    for f in sorted(files):
        components.setdefault(find(f), []).append(f)

    groups = [
        FileGroup(files=members, size_category=size_category(len(members)))
        for _, members in sorted(components.items())
    ]
    return groups


def escape_analysis(
    group: FileGroup, scope: set[str], graph: XrefGraph
) -> list[tuple[str, str, str]]:
    """References crossing the scope boundary in either direction, reported
    as (group file, out-of-scope file, crossing symbol)."""
    group_files = set(group.files)
    edges: set[tuple[str, str, str]] = set()
    for symbol, records in graph.refs.items():
        def_files = graph.def_files(symbol)
        for rec in records:
            src = rec.site.file
            for dst in def_files:
                if src == dst:
                    continue
                if src in group_files and dst not in scope:
                    edges.add((src, dst, symbol))
                elif dst in group_files and src not in scope:
                    edges.add((dst, src, symbol))
    return sorted(edges)


@dataclass
class PackedGroup:
    files: list[str]
    carried: list[str] = field(default_factory=list)  # migrated earlier sub-groups


def pack_group_for_context(
    group: FileGroup, snapshot: RepoSnapshot, budget: int
) -> list[PackedGroup]:
    """Greedy prefix packing under a character budget; split sub-groups
    carry the already-migrated files so later prompts stay consistent."""
    sizes: dict[str, int] = {}
    for path in group.files:
        f = snapshot.get(path)
        size = len(f.content) if f is not None else 0
        if size > budget:
            raise ForgeError(
                f"file {path} ({size} chars) exceeds the context budget ({budget})"
            )
        sizes[path] = size

    packs: list[PackedGroup] = []
    current: list[str] = []
    used = 0
    done: list[str] = []
    for path in group.files:
        size = sizes[path]
        if current and used + size > budget:
            packs.append(PackedGroup(files=current, carried=list(done)))
            done = done + current
            current = []
            used = 0
        current.append(path)
        used += size
    if current:
        packs.append(PackedGroup(files=current, carried=list(done)))
    return packs


def format_groups(groups: list[FileGroup]) -> str:
    lines = []
    for n, g in enumerate(groups, start=1):
        lines.append(
            f"GROUP {n} SIZE {g.size_category} FILES {','.join(g.files)} "
            f"ESCAPES {len(g.escape_edges)}"
        )
    return "".join(line + "\n" for line in lines)
