from forge.corpus import load_snapshot
from forge.interp import run_tests


def test_all_corpus_tests_pass_before_migration(snapshot):
    test_files = [f.path for f in snapshot.files if f.kind == "test"]
    results = run_tests(snapshot, test_files)
    assert results and all(r.passed for r in results), [
        (r.file, r.test, r.detail) for r in results if not r.passed
    ]


def test_assert_failure_reports_values(tmp_path):
    (tmp_path / "BadTest.mj").write_text(
        "class BadTest {\n  void testWrong() {\n    assertEquals(1L, 2L);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["BadTest.mj"])
    assert not result.passed
    assert "1" in result.detail and "2" in result.detail


def test_narrowing_cast_truncates(tmp_path):
    (tmp_path / "m.schema").write_text("message M {\n  int64 wide_id = 1;\n}\n")
    (tmp_path / "CastTest.mj").write_text(
        "class CastTest {\n  void testTruncation() {\n"
        "    M m;\n    m.setWideId(10000000005L);\n"
        "    int narrow = (int) m.getWideId();\n"
        "    assertEquals(narrow, 1410065413);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["CastTest.mj"])
    assert result.passed, result.detail


def test_flag_accessor_builtins(tmp_path):
    (tmp_path / "f.config").write_text("flag dark_mode {\n  type int\n  default 0\n}\n")
    (tmp_path / "Holder.mj").write_text("class Holder {\n}\n")
    (tmp_path / "FlagTest.mj").write_text(
        "class FlagTest {\n  void testFlagRoundTrip() {\n"
        "    Holder h;\n    h.setDarkMode(2);\n"
        "    assertEquals(h.getDarkMode(), 2);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["FlagTest.mj"])
    assert result.passed, result.detail


def test_unknown_method_is_a_test_error(tmp_path):
    (tmp_path / "ErrTest.mj").write_text(
        "class ErrTest {\n  void testBoom() {\n    ghostCall();\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["ErrTest.mj"])
    assert not result.passed and "error" in result.detail


def test_annotated_methods_run_without_test_prefix(tmp_path):
    (tmp_path / "AnnoTest.mj").write_text(
        "class AnnoTest {\n  @Test\n  void verifiesThings() {\n"
        "    assertEquals(1, 1);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["AnnoTest.mj"])
    assert result.test == "verifiesThings" and result.passed


def test_field_injection_between_objects(tmp_path):
    (tmp_path / "Reader.mj").write_text(
        "class Reader {\n  long value;\n  long read() {\n    return value;\n  }\n}\n"
    )
    (tmp_path / "InjectTest.mj").write_text(
        "class InjectTest {\n  void testInject() {\n"
        "    Reader r;\n    r.value = 9L;\n"
        "    assertEquals(r.read(), 9L);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["InjectTest.mj"])
    assert result.passed, result.detail


def test_static_style_class_call(tmp_path):
    (tmp_path / "Maker.mj").write_text(
        "package p;\n\nclass Maker {\n  long make() {\n    return 4L;\n  }\n}\n"
    )
    (tmp_path / "MakerTest.mj").write_text(
        "package p;\n\nimport p.Maker;\n\nclass MakerTest {\n"
        "  void testMake() {\n    assertEquals(Maker.make(), 4L);\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["MakerTest.mj"])
    assert result.passed, result.detail


def test_infinite_recursion_hits_budget(tmp_path):
    (tmp_path / "LoopTest.mj").write_text(
        "class LoopTest {\n  void testLoop() {\n    again();\n  }\n"
        "  void again() {\n    again();\n  }\n}\n"
    )
    snap = load_snapshot(tmp_path)
    [result] = run_tests(snap, ["LoopTest.mj"])
    assert not result.passed
