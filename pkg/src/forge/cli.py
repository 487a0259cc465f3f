"""Operator-facing command line: each subcommand is one pipeline phase,
and `run` chains them end to end."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .changelist import authorship_fraction
from .corpus.snapshot import load_snapshot
from .corpus.xref import build_xref
from .diffs import added_text, added_text_by_file
from .errors import ForgeError
from .pipeline import EXIT_FATAL, run_pipeline
from .recipes import load_recipe, validate_recipe


@click.group()
@click.version_option(version=__version__, prog_name="forge")
def main():
    """Batch toolkit for large-scale, model-assisted code migrations."""


def _common_options(fn):
    fn = click.option("--corpus", required=True, help="corpus root directory")(fn)
    fn = click.option("--recipe", "recipe_path", required=True, help="recipe file")(fn)
    return fn


def _pipeline_options(fn):
    fn = click.option("--backend", default="rule",
                      type=click.Choice(["rule", "replay", "remote"]))(fn)
    fn = click.option("--jobs", default=0, type=int,
                      help="worker pool size (0 = logical CPUs)")(fn)
    fn = click.option("--k", default=None, type=int, help="prompt variant cap")(fn)
    fn = click.option("--max-repairs", default=2, type=int)(fn)
    fn = click.option("--cap-per-period", default=2, type=int)(fn)
    fn = click.option("--scope", default=None,
                      help="comma-separated path prefixes limiting the migration")(fn)
    fn = click.option("--replay-store", default=None,
                      help="fixture store directory (replay backend)")(fn)
    return fn


def _effective_jobs(jobs: int) -> int:
    if jobs > 0:
        return jobs
    import os

    return os.cpu_count() or 1


def _run(recipe_path, corpus, out=None, **kwargs):
    recipe = load_recipe(recipe_path)
    scope = kwargs.pop("scope", None)
    scope_entries = scope.split(",") if scope else None
    jobs = _effective_jobs(kwargs.pop("jobs", 1))
    return run_pipeline(
        recipe,
        corpus,
        backend_name=kwargs.pop("backend", "rule"),
        out_dir=out,
        jobs=jobs,
        k=kwargs.pop("k", None),
        max_repairs=kwargs.pop("max_repairs", 2),
        cap_per_period=kwargs.pop("cap_per_period", 2),
        scope_entries=scope_entries,
        replay_store=kwargs.pop("replay_store", None),
    )


@main.command()
@click.option("--corpus", required=True)
@click.option("--dump", is_flag=True, help="print the edge list")
def index(corpus, dump):
    """Load the corpus and build the cross-reference graph."""
    try:
        snapshot = load_snapshot(corpus)
        graph = build_xref(snapshot)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    for warning in snapshot.warnings:
        click.echo(f"warning: {warning}", err=True)
    if dump:
        click.echo(graph.dump(), nl=False)
    else:
        click.echo(
            f"{len(snapshot.files)} files, {len(graph.nodes)} symbols, "
            f"{len(graph.edges)} edges"
        )


@main.command()
@_common_options
@_pipeline_options
@click.option("--out", default=None, help="write FILE\\tLINE\\tTAG\\tREASON here")
def discover(recipe_path, corpus, out, **kwargs):
    """Expand seeds and tag locations through the filter pipeline."""
    from .discovery import format_tagged_tsv

    try:
        result = _run(recipe_path, corpus, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    tsv = format_tagged_tsv(result.tagged)
    if out:
        Path(out).write_text(tsv, encoding="utf-8")
    else:
        click.echo(tsv, nl=False)


@main.command()
@_common_options
@_pipeline_options
def cluster(recipe_path, corpus, **kwargs):
    """Partition candidate files into migration groups."""
    from .grouping import format_groups

    try:
        result = _run(recipe_path, corpus, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    click.echo(format_groups(result.groups), nl=False)


@main.command()
@_common_options
@_pipeline_options
@click.option("--out", required=True, help="artifact output directory")
def migrate(recipe_path, corpus, out, **kwargs):
    """Generate candidate edits and validate them (writes candidates.json)."""
    try:
        result = _run(recipe_path, corpus, out=out, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    click.echo(
        f"{result.manifest.counts['candidates']} candidates, "
        f"{result.manifest.counts['selected']} selected"
    )
    sys.exit(result.exit_code)


@main.command()
@_common_options
@_pipeline_options
@click.option("--candidate", "candidate_id", required=True)
def validate(recipe_path, corpus, candidate_id, **kwargs):
    """Re-validate one candidate and print VALIDATOR<TAB>outcome<TAB>detail."""
    try:
        result = _run(recipe_path, corpus, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    for outcome in result.outcomes:
        for cand in outcome.candidates:
            if cand.candidate_id != candidate_id:
                continue
            report = outcome.reports.get(candidate_id)
            if report is None:
                click.echo(f"error: candidate {candidate_id} was never validated", err=True)
                sys.exit(EXIT_FATAL)
            for vid, oc, detail in report.results:
                click.echo(f"{vid}\t{oc}\t{detail.splitlines()[0] if detail else ''}")
            return
    click.echo(f"error: no such candidate: {candidate_id}", err=True)
    sys.exit(EXIT_FATAL)


@main.command()
@_common_options
@_pipeline_options
@click.option("--out", required=True, help="artifact output directory")
def assemble(recipe_path, corpus, out, **kwargs):
    """Assemble selected candidates into cl-<n>.diff / cl-<n>.meta files."""
    try:
        result = _run(recipe_path, corpus, out=out, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    click.echo(f"{len(result.changelists)} changelists written to {out}")
    sys.exit(result.exit_code)


@main.command()
@_common_options
@_pipeline_options
@click.option("--out", required=True, help="artifact output directory")
def run(recipe_path, corpus, out, **kwargs):
    """Run the whole pipeline: index, discover, cluster, migrate, assemble."""
    try:
        result = _run(recipe_path, corpus, out=out, **kwargs)
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    counts = result.manifest.counts
    click.echo(
        f"run {result.manifest.run_id}: {counts['locations']} locations, "
        f"{counts['groups']} groups, {counts['changelists']} changelists, "
        f"{counts['shards']} shards"
    )
    for outcome in result.outcomes:
        if outcome.needs_human:
            click.echo(f"NEEDS-HUMAN: {outcome.needs_human}", err=True)
    sys.exit(result.exit_code)


@main.command()
@click.option("--recipe", "recipe_path", required=True)
@click.option("--corpus", required=True)
def check(recipe_path, corpus):
    """Validate a recipe against a corpus (diagnostics are data)."""
    try:
        recipe = load_recipe(recipe_path)
        snapshot = load_snapshot(corpus, recipe.test_pattern or r".*Test$")
    except ForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    diagnostics = validate_recipe(recipe, snapshot)
    for d in diagnostics:
        click.echo(d)
    click.echo(f"{len(diagnostics)} diagnostics")
    sys.exit(0 if not diagnostics else 2)


@main.command()
@click.option("--snapshot", "snapshot_dir", required=True,
              help="directory of generated .diff files")
@click.option("--final", "final_dir", required=True,
              help="directory of finally-committed .diff files")
def metrics(snapshot_dir, final_dir):
    """AI-authorship fraction: generated added text vs committed added text."""

    def load_dir(d):
        concat = []
        per_file: dict[str, str] = {}
        for p in sorted(Path(d).glob("*.diff")):
            text = p.read_text(encoding="utf-8")
            concat.append(added_text(text))
            for path, added in added_text_by_file(text).items():
                per_file[path] = per_file.get(path, "") + added
        return "".join(concat), per_file

    try:
        gen_all, gen_files = load_dir(snapshot_dir)
        fin_all, fin_files = load_dir(final_dir)
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    for path in sorted(set(gen_files) | set(fin_files)):
        frac = authorship_fraction(gen_files.get(path, ""), fin_files.get(path, ""))
        click.echo(f"AI_AUTHORED_FILE {path}={frac:.6f}")
    click.echo(f"AI_AUTHORED_FRACTION={authorship_fraction(gen_all, fin_all):.6f}")


@main.command()
@click.option("--run", "run_dir", required=True, help="artifact directory from a run")
@click.option("--out", "out_dir", required=True, help="report output directory")
def report(run_dir, out_dir):
    """Render run-summary figures and a delimited summary table."""
    from .report import render_report

    try:
        written = render_report(Path(run_dir), Path(out_dir))
    except (ForgeError, OSError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_FATAL)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
