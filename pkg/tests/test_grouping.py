import random

import pytest

from forge.corpus import RefRecord, SymbolRef, XrefGraph, build_xref, load_snapshot
from forge.errors import ForgeError
from forge.grouping import (
    FileGroup,
    cluster_file_groups,
    escape_analysis,
    expand_related_files,
    pack_group_for_context,
    size_category,
)


def test_expand_adds_paired_test(snapshot, graph):
    out = expand_related_files({"ads/campaign/CampaignStore.mj"}, graph, snapshot)
    assert "ads/campaign/CampaignStoreTest.mj" in out


def test_expand_idempotent_and_monotone(snapshot, graph):
    seeds = [
        {"ads/campaign/CampaignStore.mj"},
        {"testing/cart/CartTotalTest.mj", "testing/user/UserNameTest.mj"},
        {"flags/ui/Dashboard.mj", "flags/ui/Theme.mj"},
        {"time/app/billing/BillingPeriod.mj"},
    ]
    for start in seeds:
        once = expand_related_files(start, graph, snapshot)
        twice = expand_related_files(once, graph, snapshot)
        assert start <= once  # monotone: output includes input
        assert once == twice  # idempotent: second application adds nothing


def test_expand_adds_interface_file_across_directories(snapshot, graph):
    # the legacy test extends a base class defined in another directory
    out = expand_related_files({"testing/cart/CartTotalTest.mj"}, graph, snapshot)
    assert "testing/framework/TestCase.mj" in out
    assert "testing/cart/CartTotal.mj" in out  # direct dependency one edge away


def test_expand_respects_scope(snapshot, graph):
    scope = {
        f.path for f in snapshot.files if f.path.startswith("time/app/scheduler")
    }
    out = expand_related_files({"time/app/scheduler/Scheduler.mj"}, graph, snapshot, scope)
    assert out == {"time/app/scheduler/Scheduler.mj", "time/app/scheduler/SchedulerTest.mj"}


def test_cluster_matches_manifest_partition(snapshot, graph, manifest):
    files = {p for group in manifest["int64_groups"] for p in group}
    groups = cluster_file_groups(files, graph)
    assert [g.files for g in groups] == [sorted(g) for g in manifest["int64_groups"]]


def test_cluster_singletons_without_edges(graph):
    files = {"ads/campaign/campaign.schema", "flags/flags.config"}
    groups = cluster_file_groups(files, graph)
    assert [g.files for g in groups] == [
        ["ads/campaign/campaign.schema"],
        ["flags/flags.config"],
    ]
    assert all(g.size_category == "single" for g in groups)


def _random_file_graph(rng, n):
    graph = XrefGraph()
    files = [f"f{i}.mj" for i in range(n)]
    for i, path in enumerate(files):
        graph.add_def(SymbolRef(path, 1, 1, f"c{i}", "definition"))
    for _ in range(rng.randint(0, n * 2)):
        a, b = rng.randrange(n), rng.randrange(n)
        if a == b:
            continue
        graph.add_ref(
            RefRecord(SymbolRef(files[a], 2, 1, f"c{b}", "reference"), (f"c{a}",))
        )
    return graph, files


def _brute_force_components(files, edges):
    labels = {}
    adj = {f: set() for f in files}
    for a, b in edges:
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    for f in sorted(files):
        if f in labels:
            continue
        stack = [f]
        while stack:
            cur = stack.pop()
            if cur in labels:
                continue
            labels[cur] = f
            stack.extend(adj[cur])
    groups = {}
    for f, root in labels.items():
        groups.setdefault(root, set()).add(f)
    return sorted(sorted(g) for g in groups.values())


def test_cluster_matches_component_oracle():
    rng = random.Random(4242)
    for _ in range(120):
        n = rng.randint(1, 40)
        graph, files = _random_file_graph(rng, n)
        subset = set(rng.sample(files, rng.randint(1, n)))
        groups = cluster_file_groups(subset, graph)
        expected = _brute_force_components(subset, graph.file_projection())
        assert [g.files for g in groups] == expected
        # partition invariants
        union = [f for g in groups for f in g.files]
        assert sorted(union) == sorted(subset)
        assert len(union) == len(set(union))


def test_size_categories():
    assert size_category(1) == "single"
    assert size_category(2) == "small" and size_category(5) == "small"
    assert size_category(6) == "medium" and size_category(20) == "medium"
    assert size_category(21) == "large"


def test_escape_analysis_matches_manifest(snapshot, graph, manifest):
    scope = {
        f.path
        for f in snapshot.files
        if any(f.path.startswith(p + "/") for p in manifest["time_scope"])
    }
    group = FileGroup(files=manifest["time_groups"][2])  # scheduler group
    escapes = escape_analysis(group, scope, graph)
    assert escapes == [tuple(x) for x in manifest["scheduler_escapes"]]


def test_escape_analysis_soundness(snapshot, graph, manifest):
    scope = {
        f.path
        for f in snapshot.files
        if any(f.path.startswith(p + "/") for p in manifest["time_scope"])
    }
    projection = graph.file_projection()
    for group_files in manifest["time_groups"]:
        group = FileGroup(files=list(group_files))
        for in_file, out_file, _symbol in escape_analysis(group, scope, graph):
            assert in_file in set(group.files)
            assert out_file not in scope
            assert (in_file, out_file) in projection or (out_file, in_file) in projection


def test_escape_analysis_self_contained_group(snapshot, graph):
    all_files = {f.path for f in snapshot.files}
    group = FileGroup(files=["ads/billing/InvoiceCalc.mj", "ads/billing/invoice.schema"])
    assert escape_analysis(group, all_files, graph) == []


def test_escape_same_symbol_two_files():
    graph = XrefGraph()
    graph.add_def(SymbolRef("in.mj", 1, 1, "api", "definition"))
    for caller in ("out1.mj", "out2.mj"):
        graph.add_ref(RefRecord(SymbolRef(caller, 2, 1, "api", "reference"), ("x",)))
    group = FileGroup(files=["in.mj"])
    escapes = escape_analysis(group, {"in.mj"}, graph)
    assert escapes == [("in.mj", "out1.mj", "api"), ("in.mj", "out2.mj", "api")]


def _snapshot_with_sizes(tmp_path, sizes):
    for i, size in enumerate(sizes):
        (tmp_path / f"f{i}.mj").write_text("x" * size)
    return load_snapshot(tmp_path)


def test_pack_group_single_pack(tmp_path):
    snap = _snapshot_with_sizes(tmp_path, [100, 100, 100])
    group = FileGroup(files=["f0.mj", "f1.mj", "f2.mj"])
    packs = pack_group_for_context(group, snap, 1000)
    assert len(packs) == 1 and packs[0].files == group.files
    assert packs[0].carried == []


def test_pack_group_greedy_split(tmp_path):
    snap = _snapshot_with_sizes(tmp_path, [40_000] * 5)
    group = FileGroup(files=[f"f{i}.mj" for i in range(5)])
    packs = pack_group_for_context(group, snap, 100_000)
    assert [len(p.files) for p in packs] == [2, 2, 1]
    assert packs[1].carried == packs[0].files
    assert packs[2].carried == packs[0].files + packs[1].files


def test_pack_group_oversized_file_errors(tmp_path):
    snap = _snapshot_with_sizes(tmp_path, [2_000_000])
    group = FileGroup(files=["f0.mj"])
    with pytest.raises(ForgeError) as err:
        pack_group_for_context(group, snap, 1_000_000)
    assert "f0.mj" in str(err.value)
