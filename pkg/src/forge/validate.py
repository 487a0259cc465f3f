"""Candidate validation, the bounded repair loop, and ranking.

Validators run in recipe order; a failing *blocking* validator stops the
chain (you cannot run tests on code that does not build). Every failure is
data in the report, never an exception crossing this module's boundary.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from .corpus.minij import parse_minij
from .corpus.schemacfg import parse_config, parse_schema
from .corpus.snapshot import RepoSnapshot
from .corpus.tree import SyntaxNode, SyntaxTree
from .corpus.xref import extract_symbols
from .diffs import added_text, apply_diff
from .editgen.backends import (
    STATE_FAILED,
    STATE_VALIDATED,
    CandidateEdit,
    invoke_backend,
)
from .editgen.context import ModelContext
from .errors import DiffError, ForgeError
from .interp import run_tests
from .recipes import Recipe, ValidatorSpec

OUTCOME_PASS = "pass"
OUTCOME_FAIL = "fail"

REPAIR_INSTRUCTION = (
    "The change you proposed fails validation. Produce a unified diff "
    "against the current file contents that fixes the failure below.\n"
)


@dataclass
class ValidationReport:
    candidate_ref: str
    results: list[tuple[str, str, str]] = field(default_factory=list)
    repair_attempts: int = 0

    @property
    def all_pass(self) -> bool:
        return all(outcome == OUTCOME_PASS for _, outcome, _ in self.results)

    @property
    def pass_count(self) -> int:
        return sum(1 for _, outcome, _ in self.results if outcome == OUTCOME_PASS)

    def blocking_ok(self, validators: list[ValidatorSpec]) -> bool:
        blocking = {v.id for v in validators if v.blocking}
        for vid, outcome, _ in self.results:
            if vid in blocking and outcome == OUTCOME_FAIL:
                return False
        return True

    def first_failure(self) -> tuple[str, str] | None:
        for vid, outcome, detail in self.results:
            if outcome == OUTCOME_FAIL:
                return vid, detail
        return None


@dataclass
class CandidateContext:
    """Everything validators need about one applied candidate."""

    snapshot: RepoSnapshot
    recipe: Recipe
    group_files: list[str]
    modified: dict[str, str]  # full post-application content per group file

    def content(self, path: str) -> str:
        if path in self.modified:
            return self.modified[path]
        f = self.snapshot.get(path)
        return f.content if f is not None else ""


def _parse_any(path: str, content: str) -> SyntaxTree | None:
    if path.endswith(".mj"):
        return parse_minij(content, path)
    if path.endswith(".schema"):
        return parse_schema(content, path)
    if path.endswith(".config"):
        return parse_config(content, path)
    return None


def _known_class_symbols(ctx: CandidateContext) -> set[str]:
    """Importable names after the candidate's changes: classes and messages."""
    known: set[str] = set()
    for f in ctx.snapshot.files:
        content = ctx.content(f.path)
        tree = _parse_any(f.path, content)
        if tree is None:
            continue
        pkg = tree.root.child_of_kind("PackageDecl")
        package = pkg.name if pkg is not None else ""
        for kind in ("ClassDecl", "MessageDecl"):
            for node in tree.root.find(kind):
                known.add(f"{package}.{node.name}" if package else node.name)
    return known


def build_validator(ctx: CandidateContext) -> tuple[str, str]:
    """MiniJ 'build': parse without error nodes, resolve all imports."""
    problems = []
    known = None
    for path in ctx.group_files:
        content = ctx.content(path)
        tree = _parse_any(path, content)
        if tree is None:
            continue
        if tree.has_errors():
            node = next(tree.root.find("ErrorNode"))
            line, col = tree.line_col(node.start)
            problems.append(f"{path}:{line}:{col}: syntax error")
            continue
        for imp in tree.root.find("ImportDecl"):
            if known is None:
                known = _known_class_symbols(ctx)
            if imp.name and imp.name not in known:
                line, _ = tree.line_col(imp.start)
                problems.append(f"{path}:{line}: unresolved-import {imp.name}")
    if problems:
        return OUTCOME_FAIL, "; ".join(problems)
    return OUTCOME_PASS, f"built {len(ctx.group_files)} files"


def test_validator(ctx: CandidateContext) -> tuple[str, str]:
    test_paths = [
        p for p in ctx.group_files
        if (f := ctx.snapshot.get(p)) is not None and f.kind == "test"
    ]
    overlay = dict(ctx.modified)
    results = run_tests(ctx.snapshot, test_paths, overlay)
    failures = [r for r in results if not r.passed]
    if failures:
        first = failures[0]
        return OUTCOME_FAIL, (
            f"{len(failures)}/{len(results)} tests failed; first: "
            f"{first.file}::{first.test}: {first.detail}"
        )
    return OUTCOME_PASS, f"{len(results)} tests passed"


def _node_signature(node: SyntaxNode) -> tuple:
    if node.is_leaf:
        return ("leaf", node.kind, node.text)
    return ("node", node.kind, node.name)


def _collect_tree_changes(
    before: SyntaxNode, after: SyntaxNode, changes: list[tuple[str, SyntaxNode]]
):
    a_sig = [_node_signature(c) for c in before.children]
    b_sig = [_node_signature(c) for c in after.children]
    sm = difflib.SequenceMatcher(a=a_sig, b=b_sig, autojunk=False)
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag == "equal":
            for offset in range(i2 - i1):
                a_child = before.children[i1 + offset]
                b_child = after.children[j1 + offset]
                if not a_child.is_leaf:
                    _collect_tree_changes(a_child, b_child, changes)
        else:
            for child in before.children[i1:i2]:
                changes.append(("deleted", child))
            for child in after.children[j1:j2]:
                changes.append(("inserted", child))


def ast_guard(
    before: SyntaxTree, after: SyntaxTree, allowed_kinds: set[str]
) -> tuple[str, str]:
    """Diff the before/after trees; fail when a changed node kind is not
    allowed (catches stray comments, renames, dropped methods)."""
    changes: list[tuple[str, SyntaxNode]] = []
    _collect_tree_changes(before.root, after.root, changes)
    offending = []
    for action, node in changes:
        if node.kind not in allowed_kinds:
            tree = before if action == "deleted" else after
            line, col = tree.line_col(node.start)
            offending.append(f"{node.kind}@{line}:{col}({action})")
    if offending:
        kinds = sorted({entry.split("@")[0] for entry in offending})
        return OUTCOME_FAIL, f"disallowed node kinds {kinds}: " + ", ".join(offending[:8])
    return OUTCOME_PASS, f"{len(changes)} changed nodes, all allowed"


def ast_guard_validator(ctx: CandidateContext) -> tuple[str, str]:
    allowed = set(ctx.recipe.guard_allowed)
    for path in ctx.group_files:
        if not path.endswith(".mj") or path not in ctx.modified:
            continue
        f = ctx.snapshot.get(path)
        before = parse_minij(f.content, path)
        after = parse_minij(ctx.modified[path], path)
        outcome, detail = ast_guard(before, after, allowed)
        if outcome == OUTCOME_FAIL:
            return OUTCOME_FAIL, f"{path}: {detail}"
    return OUTCOME_PASS, "tree changes within allowed kinds"


def completeness_check(
    ctx: CandidateContext, forbidden: set[str] | None = None
) -> tuple[str, str]:
    """No forbidden symbol may survive as a resolved reference."""
    forbidden = forbidden if forbidden is not None else set(ctx.recipe.forbidden)
    if not forbidden:
        return OUTCOME_PASS, "no forbidden symbols configured"
    from dataclasses import replace

    from .corpus.xref import build_xref, collect_accessors

    graph = build_xref(ctx.snapshot)
    accessors = collect_accessors(ctx.snapshot)
    residual = []
    for path in ctx.group_files:
        f = ctx.snapshot.get(path)
        if f is None or f.language != "minij":
            continue
        content = ctx.content(path)
        tree = parse_minij(content, path)
        shadow = replace(f, content=content)
        for ref in extract_symbols(tree, shadow, accessors=accessors, known=graph.nodes):
            if ref.role != "definition" and ref.symbol in forbidden:
                residual.append(f"{ref.file}:{ref.line}")
    if residual:
        return OUTCOME_FAIL, f"{len(residual)} residual references: " + ", ".join(residual[:10])
    return OUTCOME_PASS, "zero residual forbidden symbols"


def run_validators(
    candidate: CandidateEdit,
    validators: list[ValidatorSpec],
    ctx: CandidateContext,
) -> ValidationReport:
    report = ValidationReport(candidate_ref=candidate.candidate_id)
    for spec in validators:
        try:
            if spec.id == "build":
                outcome, detail = build_validator(ctx)
            elif spec.id == "test":
                outcome, detail = test_validator(ctx)
            elif spec.id == "ast-guard":
                outcome, detail = ast_guard_validator(ctx)
            elif spec.id == "completeness":
                outcome, detail = completeness_check(ctx)
            else:
                outcome, detail = OUTCOME_FAIL, "tool-missing"
        except Exception as e:  # validators are total: failures become data
            outcome, detail = OUTCOME_FAIL, f"validator crashed: {e}"
        report.results.append((spec.id, outcome, detail))
        if outcome == OUTCOME_FAIL and spec.blocking:
            break
    if report.all_pass:
        candidate.state = STATE_VALIDATED
    return report


def apply_candidate(
    candidate: CandidateEdit,
    snapshot: RepoSnapshot,
    group_files: list[str],
    base: dict[str, str] | None = None,
) -> dict[str, str]:
    """Apply the candidate's diff to the group's (annotation-free) content."""
    contents = dict(base) if base is not None else {
        p: snapshot.get(p).content for p in group_files
    }
    changed = apply_diff(contents, candidate.diff, allowed_paths=set(group_files))
    contents.update(changed)
    return contents


def repair(
    candidate: CandidateEdit,
    report: ValidationReport,
    backend,
    snapshot: RepoSnapshot,
    recipe: Recipe,
    group_files: list[str],
    max_attempts: int = 2,
) -> tuple[CandidateEdit, ValidationReport, list[CandidateEdit]]:
    """Bounded repair loop: re-prompt with the first failing detail until
    everything passes or attempts run out. Every attempt is recorded."""
    attempts: list[CandidateEdit] = []
    current = candidate
    current_report = report
    contents = apply_candidate(current, snapshot, group_files)
    while not current_report.all_pass and current_report.repair_attempts < max_attempts:
        failure = current_report.first_failure()
        if failure is None:
            break
        vid, detail = failure
        instruction = f"{REPAIR_INSTRUCTION}{vid}: {detail}"
        context = ModelContext(
            group_id=current.group_id,
            files=[(p, contents[p]) for p in group_files],
            global_instruction=instruction,
            variant_id=current.variant_id,
            temperature=0.0,
            phase=current.attempt + 1,
        )
        produced = invoke_backend(backend, context)
        attempt_no = current_report.repair_attempts + 1
        next_candidate = produced[0] if produced else None
        if next_candidate is None or next_candidate.state == STATE_FAILED:
            current_report.repair_attempts = attempt_no
            if next_candidate is not None:
                next_candidate.attempt = attempt_no
                attempts.append(next_candidate)
            continue
        next_candidate.attempt = attempt_no
        attempts.append(next_candidate)
        try:
            changed = apply_diff(contents, next_candidate.diff, allowed_paths=set(group_files))
        except DiffError as e:
            next_candidate.state = STATE_FAILED
            next_candidate.failure_reason = str(e)
            current_report.repair_attempts = attempt_no
            continue
        contents.update(changed)
        merged = CandidateEdit(
            group_id=current.group_id,
            variant_id=current.variant_id,
            backend_id=current.backend_id,
            diff=current.diff,
            attempt=attempt_no,
            state=current.state,
        )
        ctx = CandidateContext(
            snapshot=snapshot, recipe=recipe, group_files=group_files, modified=contents
        )
        new_report = run_validators(merged, recipe.validators, ctx)
        new_report.repair_attempts = attempt_no
        current = merged
        current_report = new_report
    return current, current_report, attempts


@dataclass
class ScoredCandidate:
    candidate: CandidateEdit
    validator_score: int
    example_distance: float
    rank: int = 0


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_distance(a: str, b: str) -> float:
    if not a and not b:
        return 0.0
    return levenshtein(a, b) / max(len(a), len(b))


def example_distance(diff_text: str, example_diffs: list[str]) -> float:
    """Minimum normalized edit distance between added-line text of the
    candidate and of each example; 1.0 when no examples are configured."""
    if not example_diffs:
        return 1.0
    mine = added_text(diff_text)
    return min(normalized_distance(mine, added_text(e)) for e in example_diffs)


def score_and_select(
    candidates: list[CandidateEdit],
    reports: dict[str, ValidationReport],
    example_diffs: list[str],
    validators: list[ValidatorSpec],
) -> tuple[list[ScoredCandidate], CandidateEdit | None]:
    """Rank by validator passes, then example distance, then variant id.
    Returns no selection when every candidate fails a blocking validator."""
    if not candidates:
        raise ForgeError("cannot rank an empty candidate list")
    scored = []
    for cand in candidates:
        report = reports.get(cand.candidate_id)
        score = report.pass_count if report is not None else 0
        distance = example_distance(cand.diff, example_diffs) if cand.diff else 1.0
        scored.append(ScoredCandidate(cand, score, distance))
    scored.sort(key=lambda s: (-s.validator_score, s.example_distance, s.candidate.variant_id))
    for rank, s in enumerate(scored, start=1):
        s.rank = rank
    selected = None
    for s in scored:
        report = reports.get(s.candidate.candidate_id)
        if (
            report is not None
            and s.candidate.state != STATE_FAILED
            and report.blocking_ok(validators)
        ):
            selected = s.candidate
            break
    return scored, selected
