import pytest

from forge.corpus import load_snapshot
from forge.errors import RecipeError
from forge.recipes import (
    load_recipe,
    parse_recipe,
    seed_accessor_maps,
    seed_symbols,
    serialize_recipe,
    validate_recipe,
)

MINIMAL = """recipe demo
seed symbols a.B
instruction >
  do the thing
"""


def test_int64_loads_with_default_depth(int64_recipe):
    assert int64_recipe.depth == 3
    assert int64_recipe.k == 6
    assert [f.id for f in int64_recipe.filters] == [
        "cast", "literal-width", "definition-irrelevance",
    ]
    assert len(int64_recipe.few_shot) == 3


def test_three_instructions_rejected():
    text = MINIMAL + "instruction >\n  two\ninstruction >\n  three\n"
    with pytest.raises(RecipeError) as err:
        parse_recipe(text)
    assert "at most 2" in str(err.value)


def test_flag_without_value_rejected():
    text = "recipe f\nseed flag stale_flag getter=getStaleFlag\ninstruction >\n  x\n"
    with pytest.raises(RecipeError) as err:
        parse_recipe(text)
    assert "value" in str(err.value)


def test_unknown_key_rejected():
    with pytest.raises(RecipeError) as err:
        parse_recipe(MINIMAL + "frobnicate yes\n")
    assert "frobnicate" in str(err.value)


def test_missing_instruction_rejected():
    with pytest.raises(RecipeError):
        parse_recipe("recipe demo\nseed symbols a.B\n")


def test_round_trip_all_bundled(recipes_dir):
    for path in sorted(recipes_dir.glob("*.recipe")):
        recipe = load_recipe(path)
        again = parse_recipe(serialize_recipe(recipe), source=str(path))
        assert again == recipe, path.name


def test_bundled_recipes_validate_clean(snapshot, recipes_dir, monkeypatch, repo_root):
    monkeypatch.chdir(repo_root)  # example-diff paths are repo-relative
    for path in sorted(recipes_dir.glob("*.recipe")):
        recipe = load_recipe(path)
        assert validate_recipe(recipe, snapshot) == [], path.name


def test_dangling_seed_diagnostic(snapshot):
    recipe = parse_recipe("recipe d\nseed symbols no.Such.Symbol\ninstruction >\n  x\n")
    diagnostics = validate_recipe(recipe, snapshot)
    assert len(diagnostics) == 1 and "no.Such.Symbol" in diagnostics[0]


def test_missing_auxiliary_diagnostic(snapshot):
    recipe = parse_recipe(
        "recipe d\nseed symbols joda.time.Instant\ninstruction >\n  x\n"
        "auxiliary time/util/Missing.mj\n"
    )
    diagnostics = validate_recipe(recipe, snapshot)
    assert len(diagnostics) == 1 and "Missing.mj" in diagnostics[0]


def test_schema_field_seed_symbols(int64_recipe):
    symbols = seed_symbols(int64_recipe)
    assert "ads.campaign.Campaign.campaign_id" in symbols
    assert "getCampaignId" in symbols and "setCampaignId" in symbols
    getters, setters = seed_accessor_maps(int64_recipe)
    assert getters["getRowId"] == "row_id"
    assert setters["setInvoiceId"] == "invoice_id"


def test_flag_seed_symbols(flag_recipe):
    assert seed_symbols(flag_recipe) == ["getEnableNewUi"]
    assert flag_recipe.seed.flag_value == "1"
    assert flag_recipe.two_phase


def test_mapping_table_contents(time_recipe):
    mapping = dict(time_recipe.mapping)
    assert mapping["joda.time.Duration.millis"] == "java.time.Duration.ofMillis"
    assert mapping["joda.time.Interval"] == "common.collect.Range<java.time.Instant>"


def test_recipe_file_not_found(tmp_path):
    with pytest.raises(RecipeError):
        load_recipe(tmp_path / "nope.recipe")


def test_search_seed_kind(junit_recipe):
    assert junit_recipe.seed.kind == "search"
    assert junit_recipe.seed.search_pattern == r"junit\.framework"


def test_bad_filter_kind_rejected():
    with pytest.raises(RecipeError):
        parse_recipe(MINIMAL + "filter odd mystery-kind\n")


def test_indentation_outside_block_rejected():
    with pytest.raises(RecipeError):
        parse_recipe("recipe demo\n  stray indent\n")


def test_comments_and_blanks_ignored():
    recipe = parse_recipe("# header\n\n" + MINIMAL + "# trailing\n")
    assert recipe.id == "demo"
