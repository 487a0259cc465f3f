"""End-to-end run orchestration behind the CLI.

Stage order mirrors the migration workflow: index, discover, group,
generate+validate per group, select, assemble, shard, schedule. Artifacts
land under the output directory; the run manifest records stage counts
and timings (timings are the one non-reproducible artifact field).
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .changelist import (
    Changelist,
    assemble_changelist,
    emit_diff,
    schedule,
    shard_by_owner,
)
from .corpus.snapshot import RepoSnapshot, code_search, load_snapshot
from .corpus.xref import XrefGraph, build_xref, expand_seed
from .discovery import (
    TAG_TO_MIGRATE,
    DiscoveryContext,
    TaggedLocation,
    format_tagged_tsv,
    run_filter_pipeline,
    to_migrate_files,
)
from .diffs import apply_diff, diff_files
from .editgen.backends import (
    STATE_FAILED,
    STATE_SELECTED,
    CandidateEdit,
    invoke_backend,
    make_backend,
)
from .editgen.context import assemble_context, generate_prompt_combinations
from .errors import DiffError, ForgeError
from .grouping import (
    FileGroup,
    cluster_file_groups,
    escape_analysis,
    expand_related_files,
    format_groups,
    pack_group_for_context,
)
from .recipes import Recipe, seed_accessor_maps, seed_symbols
from .validate import (
    CandidateContext,
    ValidationReport,
    apply_candidate,
    repair,
    run_validators,
    score_and_select,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


@dataclass
class RunManifest:
    run_id: str
    recipe_id: str
    corpus_root: str
    backend: str
    counts: dict = field(default_factory=dict)
    timings_ms: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "run_id": self.run_id,
                "recipe": self.recipe_id,
                "corpus": self.corpus_root,
                "backend": self.backend,
                "counts": self.counts,
                "timings_ms": self.timings_ms,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


@dataclass
class GroupOutcome:
    group: FileGroup
    candidates: list[CandidateEdit] = field(default_factory=list)
    reports: dict[str, ValidationReport] = field(default_factory=dict)
    selected: CandidateEdit | None = None
    selected_contents: dict[str, str] = field(default_factory=dict)
    needs_human: str = ""


@dataclass
class RunResult:
    exit_code: int
    manifest: RunManifest
    tagged: list[TaggedLocation]
    groups: list[FileGroup]
    outcomes: list[GroupOutcome]
    changelists: list[Changelist]
    shards: list = field(default_factory=list)


def _run_id(recipe: Recipe, corpus: str, backend: str, k: int) -> str:
    payload = f"{recipe.id}|{corpus}|{backend}|{k}"
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def resolve_scope(snapshot: RepoSnapshot, scope_entries: list[str] | None) -> set[str] | None:
    """Expand directory prefixes/paths into the snapshot's file set."""
    if not scope_entries:
        return None
    out: set[str] = set()
    for entry in scope_entries:
        entry = entry.rstrip("/")
        for f in snapshot.files:
            if f.path == entry or f.path.startswith(entry + "/"):
                out.add(f.path)
    return out


def discover_locations(
    recipe: Recipe, snapshot: RepoSnapshot, graph: XrefGraph
) -> list[tuple[str, int]]:
    if recipe.seed.kind == "search":
        hits = code_search(snapshot, recipe.seed.search_pattern or "")
        return sorted({(path, line) for path, line, _col, _text in hits})
    refset = expand_seed(graph, seed_symbols(recipe), recipe.depth)
    return refset.locations()


def _generate_for_group(
    recipe: Recipe,
    snapshot: RepoSnapshot,
    group: FileGroup,
    tagged: list[TaggedLocation],
    backend,
    k: int,
    jobs: int,
    max_repairs: int,
) -> GroupOutcome:
    outcome = GroupOutcome(group=group)
    group_tagged = [t for t in tagged if t.file in set(group.files)]
    base_contents = {p: snapshot.get(p).content for p in group.files}
    aux = [
        (p, snapshot.get(p).content)
        for p in recipe.auxiliary
        if p in snapshot
    ]

    if recipe.two_phase:
        candidates = _two_phase_candidates(
            recipe, group, group_tagged, backend, base_contents, aux
        )
    else:
        packs = pack_group_for_context(group, snapshot, recipe.budget)
        variants = generate_prompt_combinations(recipe, k)
        contexts = []
        for variant in variants:
            pack_contexts = []
            for pack in packs:
                carried = [(p, base_contents[p]) for p in pack.carried]
                pack_contexts.append(
                    assemble_context(
                        [(p, base_contents[p]) for p in pack.files],
                        group_tagged,
                        recipe,
                        variant,
                        auxiliary=aux + carried,
                        group_id=group.group_id,
                    )
                )
            contexts.append((variant, pack_contexts))

        def run_variant(item):
            variant, pack_contexts = item
            produced: list[CandidateEdit] = []
            for context in pack_contexts:
                produced.extend(invoke_backend(backend, context))
            # merge multi-pack diffs into one candidate per variant
            if len(produced) > 1 and all(c.state != STATE_FAILED for c in produced):
                merged = CandidateEdit(
                    group_id=group.group_id,
                    variant_id=variant.id,
                    backend_id=backend.id,
                    diff="".join(c.diff for c in produced),
                )
                return [merged]
            return produced

        candidates = []
        if jobs > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(run_variant, contexts):
                    candidates.extend(result)
        else:
            for item in contexts:
                candidates.extend(run_variant(item))
        candidates.sort(key=lambda c: (c.group_id, c.variant_id, c.attempt))

    # validate (and repair) each candidate
    for cand in candidates:
        if cand.state == STATE_FAILED:
            outcome.candidates.append(cand)
            continue
        try:
            contents = apply_candidate(cand, snapshot, group.files)
            cand.state = "applied"
        except DiffError as e:
            cand.state = STATE_FAILED
            cand.failure_reason = str(e)
            outcome.candidates.append(cand)
            continue
        ctx = CandidateContext(
            snapshot=snapshot,
            recipe=recipe,
            group_files=group.files,
            modified=contents,
        )
        report = run_validators(cand, recipe.validators, ctx)
        if not report.all_pass and max_repairs > 0:
            cand, report, _attempts = repair(
                cand, report, backend, snapshot, recipe, group.files, max_repairs
            )
            contents = apply_candidate(cand, snapshot, group.files)
        outcome.candidates.append(cand)
        outcome.reports[cand.candidate_id] = report

    examples = []
    for path in recipe.example_diffs:
        p = Path(path)
        if p.is_file():
            examples.append(p.read_text(encoding="utf-8"))
    live = [c for c in outcome.candidates]
    if live:
        scored, selected = score_and_select(
            live, outcome.reports, examples, recipe.validators
        )
        outcome.selected = selected
        if selected is not None:
            selected.state = STATE_SELECTED
            outcome.selected_contents = apply_candidate(selected, snapshot, group.files)
        else:
            outcome.needs_human = (
                f"group {group.group_id}: no candidate passed the blocking validators"
            )
    else:
        outcome.needs_human = f"group {group.group_id}: backend produced no candidates"
    return outcome


def _two_phase_candidates(
    recipe: Recipe,
    group: FileGroup,
    group_tagged: list[TaggedLocation],
    backend,
    base_contents: dict[str, str],
    aux: list[tuple[str, str]],
) -> list[CandidateEdit]:
    """Flag recipes: tag test flags first, then clean up against the tagged
    content; the candidate diff is the composition of both phases."""
    from .editgen.context import ModelContext

    contents = dict(base_contents)
    for phase in (0, 1):
        context = ModelContext(
            group_id=group.group_id,
            files=[(p, contents[p]) for p in group.files],
            global_instruction=recipe.instructions[min(phase, len(recipe.instructions) - 1)],
            auxiliary=aux,
            variant_id="v1",
            temperature=recipe.temperatures[0],
            phase=phase,
        )
        produced = invoke_backend(backend, context)
        if not produced or produced[0].state == STATE_FAILED:
            return produced or []
        try:
            changed = apply_diff(contents, produced[0].diff, allowed_paths=set(group.files))
        except DiffError as e:
            produced[0].state = STATE_FAILED
            produced[0].failure_reason = str(e)
            return [produced[0]]
        contents.update(changed)
    composed = diff_files(
        {
            p: (base_contents[p], contents[p])
            for p in group.files
            if contents[p] != base_contents[p]
        }
    )
    return [
        CandidateEdit(
            group_id=group.group_id,
            variant_id="v1",
            backend_id=backend.id,
            diff=composed,
        )
    ]


def run_pipeline(
    recipe: Recipe,
    corpus: str,
    backend_name: str = "rule",
    out_dir: str | Path | None = None,
    jobs: int = 1,
    k: int | None = None,
    max_repairs: int = 2,
    cap_per_period: int = 2,
    scope_entries: list[str] | None = None,
    replay_store: str | None = None,
) -> RunResult:
    timings: dict[str, int] = {}

    def timed(name: str, fn):
        started = time.monotonic()
        result = fn()
        timings[name] = int((time.monotonic() - started) * 1000)
        return result

    snapshot = timed(
        "index.load",
        lambda: load_snapshot(corpus, recipe.test_pattern or r".*Test$"),
    )
    graph = timed("index.xref", lambda: build_xref(snapshot))
    backend = make_backend(backend_name, recipe=recipe, snapshot=snapshot,
                           store_dir=replay_store)
    scope = resolve_scope(snapshot, scope_entries)
    k = k if k is not None else recipe.k

    getters, setters = seed_accessor_maps(recipe)
    ctx = DiscoveryContext(
        snapshot=snapshot,
        seed_getters=getters,
        seed_setters=setters,
        annotation_template=recipe.annotation,
        backend=backend,
        few_shot=recipe.few_shot,
    )
    locations = timed("discover.locate", lambda: discover_locations(recipe, snapshot, graph))
    tagged = timed(
        "discover.filter",
        lambda: run_filter_pipeline(locations, recipe.filters, snapshot, ctx),
    )

    def make_groups():
        candidates = set(to_migrate_files(tagged))
        if scope is not None:
            candidates &= scope
        expanded = expand_related_files(candidates, graph, snapshot, scope)
        groups = cluster_file_groups(expanded, graph)
        scope_files = scope if scope is not None else {f.path for f in snapshot.files}
        for g in groups:
            g.escape_edges = escape_analysis(g, scope_files, graph)
        return groups

    groups = timed("cluster", make_groups)

    outcomes: list[GroupOutcome] = []

    def migrate():
        for group in groups:
            outcomes.append(
                _generate_for_group(
                    recipe, snapshot, group, tagged, backend, k, jobs, max_repairs
                )
            )

    timed("migrate", migrate)

    changelists: list[Changelist] = []
    all_shards = []

    def assemble():
        n = 0
        for outcome in outcomes:
            if outcome.selected is None:
                continue
            n += 1
            try:
                cl = assemble_changelist(
                    n,
                    outcome.selected_contents,
                    outcome.group,
                    tagged,
                    recipe,
                    snapshot,
                )
            except ForgeError as e:
                outcome.needs_human = f"group {outcome.group.group_id}: {e}"
                outcome.selected = None
                continue
            changelists.append(cl)
            all_shards.extend(shard_by_owner(cl, snapshot))
        schedule(all_shards, cap_per_period)

    timed("assemble", assemble)

    validated = sum(
        1
        for o in outcomes
        for c in o.candidates
        if o.reports.get(c.candidate_id) is not None
        and o.reports[c.candidate_id].all_pass
    )
    manifest = RunManifest(
        run_id=_run_id(recipe, corpus, backend_name, k),
        recipe_id=recipe.id,
        corpus_root=corpus,
        backend=backend_name,
        counts={
            "locations": len(tagged),
            "to_migrate": sum(1 for t in tagged if t.tag == TAG_TO_MIGRATE),
            "groups": len(groups),
            "candidates": sum(len(o.candidates) for o in outcomes),
            "validated": validated,
            "selected": sum(1 for o in outcomes if o.selected is not None),
            "changelists": len(changelists),
            "shards": len(all_shards),
        },
        timings_ms=timings,
    )

    needs_human = [o.needs_human for o in outcomes if o.needs_human]
    exit_code = EXIT_OK if not needs_human else EXIT_PARTIAL

    result = RunResult(
        exit_code=exit_code,
        manifest=manifest,
        tagged=tagged,
        groups=groups,
        outcomes=outcomes,
        changelists=changelists,
        shards=all_shards,
    )
    if out_dir is not None:
        write_artifacts(result, Path(out_dir), snapshot)
    return result


def write_artifacts(result: RunResult, out_dir: Path, snapshot: RepoSnapshot):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(result.manifest.to_json(), encoding="utf-8")
    (out_dir / "tagged.tsv").write_text(format_tagged_tsv(result.tagged), encoding="utf-8")
    (out_dir / "groups.txt").write_text(format_groups(result.groups), encoding="utf-8")

    candidates_doc = []
    for outcome in result.outcomes:
        for cand in outcome.candidates:
            report = outcome.reports.get(cand.candidate_id)
            candidates_doc.append(
                {
                    "id": cand.candidate_id,
                    "group": cand.group_id,
                    "variant": cand.variant_id,
                    "backend": cand.backend_id,
                    "attempt": cand.attempt,
                    "state": cand.state,
                    "failure_reason": cand.failure_reason,
                    "diff": cand.diff,
                    "report": (
                        [
                            {"validator": vid, "outcome": outcome_, "detail": detail}
                            for vid, outcome_, detail in report.results
                        ]
                        if report is not None
                        else []
                    ),
                    "repair_attempts": report.repair_attempts if report else 0,
                }
            )
    (out_dir / "candidates.json").write_text(
        json.dumps(candidates_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    shards_by_cl: dict[int, list] = {}
    for shard in result.shards:
        shards_by_cl.setdefault(shard.changelist_id, []).append(shard)
    for cl in result.changelists:
        (out_dir / f"cl-{cl.id}.diff").write_text(emit_diff(cl), encoding="utf-8")
        shards = shards_by_cl.get(cl.id, [])
        owners = ",".join(s.owner for s in shards)
        periods = ",".join(str(s.scheduled_period) for s in shards)
        meta = (
            f"recipe:{result.manifest.recipe_id}\n"
            f"group:{cl.source_group}\n"
            f"owners:{owners}\n"
            f"period:{periods}\n"
            f"ambiguous-count:{len(cl.ambiguous)}\n"
            f"description:{cl.description.splitlines()[0]}\n"
        )
        for line in cl.description.splitlines()[1:]:
            meta += f"note:{line}\n"
        (out_dir / f"cl-{cl.id}.meta").write_text(meta, encoding="utf-8")
