import random
import re

import pytest

from forge.corpus import load_snapshot, parse_minij
from forge.diffs import apply_diff, diff_file
from forge.editgen.backends import CandidateEdit, ReplayBackend
from forge.editgen.context import ModelContext
from forge.editgen.rules import RuleBackend
from forge.recipes import Recipe, SeedSpec, ValidatorSpec
from forge.validate import (
    REPAIR_INSTRUCTION,
    CandidateContext,
    apply_candidate,
    ast_guard,
    build_validator,
    completeness_check,
    example_distance,
    levenshtein,
    normalized_distance,
    repair,
    run_validators,
    score_and_select,
)
from forge.validate import test_validator as run_test_validator

V_ALL = [
    ValidatorSpec(id="build", blocking=True),
    ValidatorSpec(id="test"),
    ValidatorSpec(id="ast-guard"),
    ValidatorSpec(id="completeness"),
]


def rule_candidate(snapshot, recipe, paths):
    context = ModelContext(
        group_id=paths[0],
        files=[(p, snapshot.get(p).content) for p in paths],
        global_instruction="",
    )
    [diff] = RuleBackend(recipe=recipe).generate(context)
    return CandidateEdit(group_id=paths[0], variant_id="v1", backend_id="rule", diff=diff)


def make_ctx(snapshot, recipe, paths, modified):
    return CandidateContext(
        snapshot=snapshot, recipe=recipe, group_files=list(paths), modified=modified
    )


def test_rule_candidate_passes_all_validators(snapshot, int64_recipe, manifest):
    paths = manifest["int64_groups"][1]
    cand = rule_candidate(snapshot, int64_recipe, paths)
    contents = apply_candidate(cand, snapshot, list(paths))
    report = run_validators(cand, int64_recipe.validators, make_ctx(snapshot, int64_recipe, paths, contents))
    assert [oc for _, oc, _ in report.results] == ["pass"] * 4
    assert cand.state == "validated"


def test_syntax_error_blocks_later_validators(snapshot, int64_recipe, manifest):
    paths = manifest["int64_groups"][1]
    broken = {
        "ads/campaign/CampaignStore.mj": "class Broken {\n  int x = ;\n}\n"
    }
    cand = CandidateEdit(group_id="g", variant_id="v1", backend_id="x", diff="")
    report = run_validators(cand, V_ALL, make_ctx(snapshot, int64_recipe, paths, broken))
    assert report.results[0][0] == "build"
    assert report.results[0][1] == "fail"
    assert "syntax error" in report.results[0][2]
    # blocking failure short-circuits: test/guard/completeness never ran
    assert len(report.results) == 1


def test_empty_validator_list_validates(snapshot, int64_recipe, manifest):
    paths = manifest["int64_groups"][1]
    cand = CandidateEdit(group_id="g", variant_id="v1", backend_id="x", diff="")
    report = run_validators(cand, [], make_ctx(snapshot, int64_recipe, paths, {}))
    assert report.results == []
    assert cand.state == "validated"


def test_unknown_validator_is_tool_missing(snapshot, int64_recipe, manifest):
    paths = manifest["int64_groups"][1]
    cand = CandidateEdit(group_id="g", variant_id="v1", backend_id="x", diff="")
    report = run_validators(
        cand, [ValidatorSpec(id="coverage")], make_ctx(snapshot, int64_recipe, paths, {})
    )
    assert report.results == [("coverage", "fail", "tool-missing")]


def test_build_validator_unresolved_import(snapshot, int64_recipe):
    modified = {
        "ads/campaign/CampaignStore.mj": (
            "package ads.campaign;\n\nimport ads.campaign.Ghost;\n\nclass CampaignStore {\n}\n"
        )
    }
    ctx = make_ctx(snapshot, int64_recipe, ["ads/campaign/CampaignStore.mj"], modified)
    outcome, detail = build_validator(ctx)
    assert outcome == "fail" and "unresolved-import ads.campaign.Ghost" in detail


def test_build_validator_clean_pass(snapshot, int64_recipe, manifest):
    ctx = make_ctx(snapshot, int64_recipe, manifest["int64_groups"][1], {})
    assert build_validator(ctx)[0] == "pass"


def test_test_validator_runs_group_tests(snapshot, int64_recipe, manifest):
    paths = manifest["int64_groups"][1]
    cand = rule_candidate(snapshot, int64_recipe, paths)
    contents = apply_candidate(cand, snapshot, list(paths))
    outcome, detail = run_test_validator(make_ctx(snapshot, int64_recipe, paths, contents))
    assert outcome == "pass" and "2 tests passed" in detail


def test_overflow_assertion_fails_after_partial_migration(tmp_path, int64_recipe):
    (tmp_path / "c.schema").write_text(
        "package ads.campaign;\n\nmessage Campaign {\n  int64 campaign_id = 1;\n}\n"
    )
    (tmp_path / "OverflowTest.mj").write_text(
        "package ads.campaign;\n\nclass OverflowTest {\n"
        "  void testOverflowWraps() {\n"
        "    Campaign c;\n"
        "    c.setCampaignId(5L);\n"
        "    int narrow = (int) c.getCampaignId();\n"
        "    assertEquals(narrow, 5L);\n"
        "  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    # a sloppy edit widens the stored value but leaves the narrowing cast
    old = snap.get("OverflowTest.mj").content
    new = old.replace("setCampaignId(5L)", "setCampaignId(10000000005L)").replace(
        "assertEquals(narrow, 5L)", "assertEquals(narrow, 10000000005L)"
    )
    ctx = make_ctx(snap, int64_recipe, ["OverflowTest.mj"], {"OverflowTest.mj": new})
    outcome, detail = run_test_validator(ctx)
    assert outcome == "fail" and "testOverflowWraps" in detail
    # before the sloppy edit the same test passes (values fit 32 bits)
    assert run_test_validator(make_ctx(snap, int64_recipe, ["OverflowTest.mj"], {}))[0] == "pass"


def test_zero_tests_pass_vacuously(snapshot, int64_recipe):
    ctx = make_ctx(snapshot, int64_recipe, ["ads/campaign/CampaignStore.mj"], {})
    outcome, detail = run_test_validator(ctx)
    assert outcome == "pass" and "0 tests" in detail


# -- ast guard -----------------------------------------------------------------


def test_guard_identity_passes_on_every_corpus_file(snapshot):
    for f in snapshot.files:
        if not f.path.endswith(".mj"):
            continue
        tree = parse_minij(f.content, f.path)
        outcome, _ = ast_guard(tree, tree, set())
        assert outcome == "pass", f.path


def test_guard_type_widening_allowed():
    before = parse_minij("class A {\n  int key;\n}\n")
    after = parse_minij("class A {\n  long key;\n}\n")
    outcome, _ = ast_guard(before, after, {"TypeName"})
    assert outcome == "pass"


def test_guard_rejects_comment_insertion():
    before = parse_minij("class A {\n  int key;\n}\n")
    after = parse_minij("class A {\n  // helpful note\n  int key;\n}\n")
    outcome, detail = ast_guard(before, after, {"TypeName"})
    assert outcome == "fail" and "Comment" in detail


def test_guard_rejects_method_rename():
    before = parse_minij("class A {\n  void getX() {\n    return;\n  }\n}\n")
    after = parse_minij("class A {\n  void fetchX() {\n    return;\n  }\n}\n")
    outcome, detail = ast_guard(before, after, {"TypeName", "Identifier"})
    assert outcome == "fail" and "MethodDecl" in detail


def test_guard_mutation_fixture_set(snapshot):
    """Comment-insertion and rename mutations are rejected on all 20 cases."""
    rng = random.Random(11)
    mj_files = [f for f in snapshot.files if f.path.endswith(".mj")]
    cases = 0
    rejected = 0
    for f in mj_files[:10]:
        lines = f.content.splitlines(keepends=True)
        mid = len(lines) // 2
        commented = "".join(lines[:mid] + ["  // model chatter\n"] + lines[mid:])
        outcome, _ = ast_guard(
            parse_minij(f.content, f.path),
            parse_minij(commented, f.path),
            {"TypeName", "IntLiteral", "LongLiteral"},
        )
        cases += 1
        rejected += outcome == "fail"
    for f in mj_files:
        if cases >= 20:
            break
        names = re.findall(r"\b(\w+)\(", f.content)
        methods = [n for n in names if parse_minij(f.content).root and n not in ("if",)]
        decl = re.search(r"\b(long|int|string|void|Instant|Duration)\s+(\w+)\(", f.content)
        if decl is None:
            continue
        renamed = f.content.replace(f"{decl.group(2)}(", f"renamed{decl.group(2).title()}(", 1)
        outcome, _ = ast_guard(
            parse_minij(f.content, f.path),
            parse_minij(renamed, f.path),
            {"TypeName", "IntLiteral", "LongLiteral", "Identifier", "Chain", "Call"},
        )
        cases += 1
        rejected += outcome == "fail"
    assert cases == 20
    assert rejected == cases


# -- completeness -----------------------------------------------------------------


def test_completeness_flag_cleanup_pass(snapshot, flag_recipe, manifest):
    paths = manifest["flag_group"]
    contents = {p: snapshot.get(p).content for p in paths}
    backend = RuleBackend(recipe=flag_recipe)
    for phase in (0, 1):
        context = ModelContext(
            group_id=paths[0],
            files=[(p, contents[p]) for p in paths],
            global_instruction="",
            phase=phase,
        )
        [diff] = backend.generate(context)
        contents.update(apply_diff(contents, diff, allowed_paths=set(paths)))
    ctx = make_ctx(snapshot, flag_recipe, paths, contents)
    assert completeness_check(ctx)[0] == "pass"
    # pre-cleanup content still references the getter: the check must fail
    pre = make_ctx(snapshot, flag_recipe, paths, {})
    outcome, detail = completeness_check(pre)
    assert outcome == "fail" and "4 residual" in detail


def test_completeness_single_residual_listed(snapshot, flag_recipe):
    paths = ["flags/ui/Theme.mj"]
    content = snapshot.get(paths[0]).content
    cleaned = content.replace(
        "if (flags.getEnableNewUi() == 1) {\n      return \"teal\";\n    } else {\n      return \"gray\";\n    }",
        "return \"teal\";",
    )
    ctx = make_ctx(snapshot, flag_recipe, paths, {paths[0]: cleaned})
    outcome, detail = completeness_check(ctx)
    assert outcome == "fail" and "1 residual" in detail


def test_completeness_empty_forbidden_set(snapshot, int64_recipe, manifest):
    ctx = make_ctx(snapshot, int64_recipe, manifest["int64_groups"][0], {})
    assert completeness_check(ctx, forbidden=set())[0] == "pass"


# -- repair loop -----------------------------------------------------------------


@pytest.fixture()
def broken_group(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "A.mj").write_text("class A {\n  long ok() {\n    return 1L;\n  }\n}\n")
    snap = load_snapshot(corpus)
    recipe = Recipe(
        id="r",
        seed=SeedSpec(kind="symbols", symbols=["A"]),
        instructions=["fix"],
        validators=[ValidatorSpec(id="build", blocking=True)],
    )
    orig = snap.get("A.mj").content
    broken = orig.replace("return 1L;", "return ;;")
    cand = CandidateEdit(
        group_id="A.mj", variant_id="v1", backend_id="replay",
        diff=diff_file("A.mj", orig, broken),
    )
    contents = apply_candidate(cand, snap, ["A.mj"])
    ctx = make_ctx(snap, recipe, ["A.mj"], contents)
    report = run_validators(cand, recipe.validators, ctx)
    assert not report.all_pass
    return snap, recipe, cand, report, orig, broken


def _record_repair_fixture(store, group_id, variant_id, files, detail, fixed_diff, phase):
    backend = ReplayBackend(store)
    context = ModelContext(
        group_id=group_id,
        files=files,
        global_instruction=f"{REPAIR_INSTRUCTION}build: {detail}",
        variant_id=variant_id,
        temperature=0.0,
        phase=phase,
    )
    backend.record(context, [fixed_diff])
    return backend


def test_repair_fixed_on_first_attempt(tmp_path, broken_group):
    snap, recipe, cand, report, orig, broken = broken_group
    vid, detail = report.first_failure()
    fixed_diff = diff_file("A.mj", broken, orig)
    backend = _record_repair_fixture(
        tmp_path / "store", cand.group_id, cand.variant_id,
        [("A.mj", broken)], detail, fixed_diff, phase=1,
    )
    final, final_report, attempts = repair(
        cand, report, backend, snap, recipe, ["A.mj"], max_attempts=2
    )
    assert final_report.all_pass
    assert final_report.repair_attempts == 1
    assert len(attempts) == 1 and attempts[0].attempt == 1


def test_repair_zero_attempts_never_calls_backend(tmp_path, broken_group):
    snap, recipe, cand, report, _orig, _broken = broken_group

    class ExplodingBackend:
        id = "boom"

        def generate(self, context):
            raise AssertionError("backend must not be called with max_attempts=0")

    final, final_report, attempts = repair(
        cand, report, ExplodingBackend(), snap, recipe, ["A.mj"], max_attempts=0
    )
    assert not final_report.all_pass
    assert final_report.repair_attempts == 0 and attempts == []


def test_repair_persistent_failure_consumes_attempts(tmp_path, broken_group):
    snap, recipe, cand, report, _orig, _broken = broken_group
    backend = ReplayBackend(tmp_path / "empty-store")  # every lookup misses
    final, final_report, attempts = repair(
        cand, report, backend, snap, recipe, ["A.mj"], max_attempts=2
    )
    assert not final_report.all_pass
    assert final_report.repair_attempts == 2


def test_repair_never_exceeds_budget_fuzz(broken_group):
    """1000 scripted outcomes: the backend is never called more than max_attempts."""
    snap, recipe, cand, report, orig, broken = broken_group
    rng = random.Random(17)
    for _ in range(1000):
        max_attempts = rng.randint(0, 3)
        calls = {"n": 0}
        fixed_diff = diff_file("A.mj", broken, orig)

        class ScriptedBackend:
            id = "scripted"

            def generate(self, context):
                calls["n"] += 1
                roll = rng.random()
                if roll < 0.3:
                    from forge.errors import BackendError

                    raise BackendError("flaky")
                if roll < 0.6:
                    return ["not a diff at all"]
                return [fixed_diff]

        repair(cand, report, ScriptedBackend(), snap, recipe, ["A.mj"], max_attempts)
        assert calls["n"] <= max_attempts


# -- ranking -----------------------------------------------------------------


def _cand(variant, diff=""):
    return CandidateEdit(group_id="g", variant_id=variant, backend_id="x", diff=diff)


def _report(cand, passes, blocking_failed=False):
    from forge.validate import ValidationReport

    report = ValidationReport(candidate_ref=cand.candidate_id)
    for i in range(passes):
        report.results.append((f"v{i}", "pass", ""))
    if blocking_failed:
        report.results.append(("build", "fail", "boom"))
    return report


def test_higher_score_wins_regardless_of_distance():
    a, b = _cand("v1"), _cand("v2")
    validators = [ValidatorSpec(id="build", blocking=True)]
    reports = {a.candidate_id: _report(a, 4), b.candidate_id: _report(b, 3)}
    scored, selected = score_and_select([a, b], reports, [], validators)
    assert selected is a
    assert [s.candidate.variant_id for s in scored] == ["v1", "v2"]


def test_equal_scores_lower_distance_wins():
    example = diff_file("f.mj", "int key;\n", "long key;\n")
    near = diff_file("f.mj", "int key;\n", "long key2;\n")
    far = diff_file("f.mj", "int key;\n", "string completely = different;\n")
    a, b = _cand("v1", far), _cand("v2", near)
    reports = {a.candidate_id: _report(a, 2), b.candidate_id: _report(b, 2)}
    scored, selected = score_and_select([a, b], reports, [example], [])
    assert selected is b

    # verify against an independent recursive edit-distance implementation
    import functools

    @functools.lru_cache(maxsize=None)
    def ed(x, y):
        if not x:
            return len(y)
        if not y:
            return len(x)
        return min(
            ed(x[1:], y) + 1,
            ed(x, y[1:]) + 1,
            ed(x[1:], y[1:]) + (x[0] != y[0]),
        )

    from forge.diffs import added_text

    for cand in (a, b):
        mine = added_text(cand.diff)
        ref = added_text(example)
        expected = ed(mine, ref) / max(len(mine), len(ref))
        assert abs(example_distance(cand.diff, [example]) - expected) < 1e-12


def test_tie_break_is_lexicographic_variant_id():
    a, b = _cand("v2"), _cand("v1")
    reports = {a.candidate_id: _report(a, 1), b.candidate_id: _report(b, 1)}
    _, selected = score_and_select([a, b], reports, [], [])
    assert selected.variant_id == "v1"


def test_all_blocking_failures_select_nothing():
    a, b = _cand("v1"), _cand("v2")
    validators = [ValidatorSpec(id="build", blocking=True)]
    reports = {
        a.candidate_id: _report(a, 0, blocking_failed=True),
        b.candidate_id: _report(b, 0, blocking_failed=True),
    }
    scored, selected = score_and_select([a, b], reports, [], validators)
    assert selected is None


def test_only_v2_passes_all_validators_so_v2_selected():
    a, b, c = _cand("v1"), _cand("v2"), _cand("v3")
    validators = [ValidatorSpec(id="build", blocking=True), ValidatorSpec(id="test")]
    reports = {
        a.candidate_id: _report(a, 0, blocking_failed=True),
        b.candidate_id: _report(b, 2),
        c.candidate_id: _report(c, 0, blocking_failed=True),
    }
    _, selected = score_and_select([a, b, c], reports, [], validators)
    assert selected is b


def test_selection_deterministic():
    candidates = [_cand(f"v{i}") for i in range(1, 6)]
    reports = {c.candidate_id: _report(c, 2) for c in candidates}
    runs = [
        score_and_select(list(candidates), dict(reports), [], [])[0]
        for _ in range(3)
    ]
    orders = [[s.candidate.variant_id for s in run] for run in runs]
    assert orders[0] == orders[1] == orders[2]


def test_levenshtein_basics():
    assert levenshtein("", "") == 0
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("abc", "axc") == 1
    assert levenshtein("abc", "") == 3
    assert normalized_distance("", "") == 0.0
    assert normalized_distance("ab", "cd") == 1.0


def test_distance_one_without_examples():
    assert example_distance("anything", []) == 1.0
