import pytest

from forge.corpus import expand_seed, load_snapshot
from forge.discovery import (
    DiscoveryContext,
    FilterSpec,
    build_classifier_prompt,
    needs_migration_classifier,
    run_filter_pipeline,
    to_migrate_files,
)
from forge.editgen.backends import ReplayBackend
from forge.editgen.rules import RuleBackend
from forge.errors import BackendError, ForgeError
from forge.recipes import seed_accessor_maps, seed_symbols


@pytest.fixture()
def int64_ctx(snapshot, int64_recipe):
    getters, setters = seed_accessor_maps(int64_recipe)
    return DiscoveryContext(
        snapshot=snapshot,
        seed_getters=getters,
        seed_setters=setters,
        annotation_template=int64_recipe.annotation,
    )


@pytest.fixture()
def int64_tagged(snapshot, graph, int64_recipe, int64_ctx):
    refset = expand_seed(graph, seed_symbols(int64_recipe), int64_recipe.depth)
    return run_filter_pipeline(refset, int64_recipe.filters, snapshot, int64_ctx)


def test_int64_chain_tags_manifest_lines(int64_tagged, manifest):
    to_migrate = {(t.file, t.line) for t in int64_tagged if t.tag == "to-migrate"}
    expected = {tuple(x) for x in manifest["narrowing_cast_sites"]} | {
        tuple(x) for x in manifest["narrow_literal_sites"]
    }
    assert to_migrate == expected


def test_int64_chain_marks_test_definitions_irrelevant(int64_tagged, manifest):
    irrelevant = {(t.file, t.line) for t in int64_tagged if t.tag == "irrelevant"}
    assert {tuple(x) for x in manifest["test_definition_sites"]} <= irrelevant


def test_empty_location_set(snapshot, int64_recipe, int64_ctx):
    assert run_filter_pipeline([], int64_recipe.filters, snapshot, int64_ctx) == []


def test_no_decision_pipeline_leaves_all_ambiguous(snapshot, int64_ctx):
    spec = FilterSpec(id="never", kind="pattern", params={"regex": "zz_nothing"})
    tagged = run_filter_pipeline(
        [("ads/campaign/CampaignStore.mj", 7)], [spec], snapshot, int64_ctx
    )
    assert [t.tag for t in tagged] == ["ambiguous"]
    assert tagged[0].reason == "unfiltered"


def test_pipeline_needs_at_least_one_filter(snapshot, int64_ctx):
    with pytest.raises(ForgeError):
        run_filter_pipeline([("x", 1)], [], snapshot, int64_ctx)


def test_pipeline_totality(int64_tagged, snapshot, graph, int64_recipe):
    refset = expand_seed(graph, seed_symbols(int64_recipe), int64_recipe.depth)
    assert [(t.file, t.line) for t in int64_tagged] == refset.locations()


def test_cast_filter_tags_narrowing_casts(snapshot, int64_ctx, manifest):
    from forge.discovery import cast_filter

    for path, line in manifest["narrowing_cast_sites"]:
        f = snapshot.get(path)
        result = cast_filter(f, line, snapshot.tree(path), int64_ctx)
        assert result is not None and result[0] == "to-migrate"


def test_cast_filter_ignores_clean_reads(snapshot, int64_ctx):
    f = snapshot.get("ads/campaign/CampaignStore.mj")
    # line 7: long id = c.getCampaignId(); (no cast)
    from forge.discovery import cast_filter

    assert cast_filter(f, 7, snapshot.tree(f.path), int64_ctx) is None


def test_cast_filter_needs_seed_relevance(tmp_path, int64_ctx):
    (tmp_path / "Other.mj").write_text(
        "class Other {\n  int m(Counter other) {\n"
        "    int n = (int) other.getCount();\n    return n;\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    from forge.discovery import cast_filter

    f = snap.get("Other.mj")
    ctx = DiscoveryContext(snapshot=snap, seed_getters=int64_ctx.seed_getters)
    assert cast_filter(f, 3, snap.tree(f.path), ctx) is None


def test_literal_width_small_value_tags(snapshot, int64_ctx):
    from forge.discovery import literal_width_filter

    f = snapshot.get("ads/campaign/CampaignStoreTest.mj")
    result = literal_width_filter(f, 9, snapshot.tree(f.path), int64_ctx, 10_000_000_000)
    assert result is not None and result[0] == "to-migrate"


def test_literal_width_wide_value_no_decision(tmp_path, int64_ctx):
    (tmp_path / "WideTest.mj").write_text(
        "class WideTest {\n  void testWide() {\n"
        "    c.setCampaignId(10000000001L);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    from forge.discovery import literal_width_filter

    f = snap.get("WideTest.mj")
    ctx = DiscoveryContext(
        snapshot=snap,
        seed_getters=int64_ctx.seed_getters,
        seed_setters=int64_ctx.seed_setters,
    )
    assert literal_width_filter(f, 3, snap.tree(f.path), ctx, 10_000_000_000) is None


def test_literal_width_non_literal_no_decision(tmp_path, int64_ctx):
    (tmp_path / "GenTest.mj").write_text(
        "class GenTest {\n  void testGen() {\n"
        "    c.setCampaignId(makeId());\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    from forge.discovery import literal_width_filter

    f = snap.get("GenTest.mj")
    ctx = DiscoveryContext(
        snapshot=snap,
        seed_getters=int64_ctx.seed_getters,
        seed_setters=int64_ctx.seed_setters,
    )
    assert literal_width_filter(f, 3, snap.tree(f.path), ctx, 10_000_000_000) is None


def test_definition_irrelevance_gates_on_file_kind(snapshot):
    from forge.discovery import definition_irrelevance_filter

    test_file = snapshot.get("ads/campaign/CampaignStoreTest.mj")
    impl_file = snapshot.get("ads/campaign/CampaignStore.mj")
    assert definition_irrelevance_filter(
        test_file, 7, snapshot.tree(test_file.path)
    ) == ("irrelevant", None)
    # same construct in an implementation file: no decision
    assert definition_irrelevance_filter(impl_file, 6, snapshot.tree(impl_file.path)) is None
    # call site inside a test method: no decision
    assert definition_irrelevance_filter(test_file, 9, snapshot.tree(test_file.path)) is None


def test_classifier_rule_backend_verdicts(snapshot, int64_recipe):
    backend = RuleBackend(recipe=int64_recipe)
    unmigrated = snapshot.get("ads/campaign/CampaignStore.mj")
    migrated_content = unmigrated.content.replace(
        "int key = (int) c.getCampaignId();", "long key = c.getCampaignId();"
    ).replace("int cacheKey", "long cacheKey")
    from dataclasses import replace

    migrated = replace(unmigrated, content=migrated_content)
    verdict, _ = needs_migration_classifier(unmigrated, int64_recipe.few_shot, backend)
    assert verdict is True
    verdict, _ = needs_migration_classifier(migrated, int64_recipe.few_shot, backend)
    assert verdict is False


def test_classifier_garbage_reply_is_error(tmp_path, snapshot, int64_recipe):
    backend = ReplayBackend(tmp_path)
    f = snapshot.get("ads/campaign/CampaignStore.mj")
    prompt = build_classifier_prompt(f.content, int64_recipe.few_shot)
    backend.record_text(prompt, "I am not sure, maybe?")
    with pytest.raises(BackendError):
        needs_migration_classifier(f, int64_recipe.few_shot, backend)


def test_classifier_failure_tags_ambiguous(tmp_path, snapshot, int64_recipe):
    backend = ReplayBackend(tmp_path)  # empty store: every lookup misses
    ctx = DiscoveryContext(
        snapshot=snapshot,
        backend=backend,
        few_shot=int64_recipe.few_shot,
    )
    spec = FilterSpec(id="clf", kind="model-classifier", params={})
    tagged = run_filter_pipeline(
        [("ads/campaign/CampaignStore.mj", 11)], [spec], snapshot, ctx
    )
    assert tagged[0].tag == "ambiguous"
    assert tagged[0].reason == "backend-error"


def test_classifier_isolation(snapshot, int64_recipe, int64_ctx, graph):
    """Dropping model-classifier filters still yields a runnable pipeline."""
    filters = [f for f in int64_recipe.filters if f.kind != "model-classifier"]
    refset = expand_seed(graph, seed_symbols(int64_recipe), 1)
    tagged = run_filter_pipeline(refset, filters, snapshot, int64_ctx)
    assert len(tagged) == len(refset.locations())


def test_annotation_rendering(int64_tagged):
    annotated = [t for t in int64_tagged if t.tag == "to-migrate" and t.annotation]
    assert annotated, "to-migrate locations should carry annotations"
    assert any("campaign_id should be of type int64" in t.annotation for t in annotated)


def test_to_migrate_files_sorted_unique(int64_tagged):
    files = to_migrate_files(int64_tagged)
    assert files == sorted(set(files))


def test_filter_spec_validation():
    with pytest.raises(ForgeError):
        FilterSpec(id="x", kind="nope", params={}).validate()
    with pytest.raises(ForgeError):
        FilterSpec(id="x", kind="pattern", params={}).validate()
    with pytest.raises(ForgeError):
        FilterSpec(id="x", kind="literal-width", params={"bogus": "1"}).validate()
