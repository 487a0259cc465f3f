import re

import pytest

from forge.corpus import code_search, load_snapshot, owners_of
from forge.errors import CorpusError


def test_toy_corpus_has_34_files(snapshot, manifest):
    assert len(snapshot.files) == manifest["corpus_file_count"]


def test_empty_directory_loads_clean(tmp_path):
    snap = load_snapshot(tmp_path)
    assert snap.files == [] and snap.warnings == []


def test_single_source_and_owner_file(tmp_path):
    (tmp_path / "OWNERS").write_text("zoe\n")
    (tmp_path / "A.mj").write_text("class A {\n}\n")
    snap = load_snapshot(tmp_path)
    assert len(snap.files) == 1
    assert snap.owners == {".": ["zoe"]}


def test_unreadable_root_is_fatal(tmp_path):
    with pytest.raises(CorpusError):
        load_snapshot(tmp_path / "missing")


def test_undecodable_file_skipped_with_warning(tmp_path):
    (tmp_path / "bad.mj").write_bytes(b"\xff\xfe\x00bad")
    (tmp_path / "ok.mj").write_text("class A {\n}\n")
    snap = load_snapshot(tmp_path)
    assert [f.path for f in snap.files] == ["ok.mj"]
    assert any("bad.mj" in w for w in snap.warnings)


def test_kind_follows_test_pattern(snapshot):
    assert snapshot.get("ads/campaign/CampaignStoreTest.mj").kind == "test"
    assert snapshot.get("ads/campaign/CampaignStore.mj").kind == "implementation"
    assert snapshot.get("ads/campaign/campaign.schema").kind == "schema"
    assert snapshot.get("flags/flags.config").kind == "config"


def test_owner_comments_and_blanks(tmp_path):
    (tmp_path / "OWNERS").write_text("# team\nzoe\n\nyuri # inline\n")
    (tmp_path / "A.mj").write_text("class A {\n}\n")
    snap = load_snapshot(tmp_path)
    assert snap.owners["."] == ["zoe", "yuri"]


def test_owners_nearest_ancestor(snapshot):
    assert owners_of(snapshot, "ads/campaign/CampaignStore.mj") == ["alice"]
    # nearest wins over the ads/ root owner
    assert owners_of(snapshot, "ads/billing/InvoiceCalc.mj") == ["bob"]


def test_owners_nested_override(tmp_path):
    (tmp_path / "OWNERS").write_text("bob\n")
    sub = tmp_path / "sub"
    sub.mkdir()
    (sub / "OWNERS").write_text("carol\n")
    (sub / "A.mj").write_text("class A {\n}\n")
    (tmp_path / "B.mj").write_text("class B {\n}\n")
    snap = load_snapshot(tmp_path)
    assert owners_of(snap, "sub/A.mj") == ["carol"]
    assert owners_of(snap, "B.mj") == ["bob"]


def test_owners_empty_when_no_owner_file(tmp_path):
    (tmp_path / "A.mj").write_text("class A {\n}\n")
    snap = load_snapshot(tmp_path)
    assert owners_of(snap, "A.mj") == []


def test_owners_unknown_file_errors(snapshot):
    with pytest.raises(CorpusError):
        owners_of(snapshot, "no/such/File.mj")


def test_code_search_flag_getter_sites(snapshot, manifest):
    hits = code_search(snapshot, "getEnableNewUi")
    assert [(path, line) for path, line, _c, _t in hits] == [
        tuple(x) for x in manifest["flag_getter_sites"]
    ]


def test_code_search_no_match(snapshot):
    assert code_search(snapshot, "zz_never_appears") == []


def test_code_search_cast_sites(snapshot, manifest):
    hits = code_search(snapshot, r"\(int\)\s*\w+\.get\w+\(")
    assert sorted((p, l) for p, l, _c, _t in hits) == [
        tuple(x) for x in manifest["narrowing_cast_sites"]
    ]


def test_code_search_invalid_pattern_reports_position(snapshot):
    with pytest.raises(CorpusError) as err:
        code_search(snapshot, "(unclosed")
    assert "position" in str(err.value)


def test_code_search_matches_reference_scan(snapshot):
    # independent oracle: line-by-line regex application
    for pattern in ["getEnableNewUi", r"import\s+joda", r"set\w+\(5L\)"]:
        rx = re.compile(pattern)
        expected = []
        for f in snapshot.files:
            for n, line in enumerate(f.content.splitlines(), start=1):
                for m in rx.finditer(line):
                    expected.append((f.path, n, m.start() + 1, m.group()))
        assert code_search(snapshot, pattern) == expected


def test_deterministic_file_order(snapshot):
    paths = [f.path for f in snapshot.files]
    assert paths == sorted(paths)
