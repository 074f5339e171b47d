"""Command-line front end wiring the library together.

Every subcommand exits 0 on success. Failures print one JSON object to stderr,
{"error": <class>, "message": <text>}, and exit 1, so callers can script
against the tool without scraping prose.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import agreement as agreement_mod
from . import baseline as baseline_mod
from . import extraction, prompting, report as report_mod, scorer, synth
from .corpus import (
    GOLD_ANNOTATOR,
    category_histogram,
    parse_corpus,
    parse_split,
    serialize_corpus,
    serialize_split,
    stratified_split,
    validate_corpus,
)
from .errors import CogspanError, InputError, SchemaValidationError


def _fail(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def _guarded(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (CogspanError, OSError) as exc:
            _fail(exc)

    return wrapper


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _read_json(path: str):
    try:
        return json.loads(_read(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaValidationError(f"{path}: not valid JSON ({exc.msg}, line {exc.lineno})") from exc


def _emit(data: bytes, out: str) -> None:
    if out == "-":
        click.get_binary_stream("stdout").write(data)
    else:
        Path(out).write_bytes(data)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"--ratios wants three comma-separated numbers, got {text!r}")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError:
        raise InputError(f"--ratios wants three comma-separated numbers, got {text!r}") from None
    return (a, b, c)


@click.group()
@click.version_option(package_name="cogspan")
def main() -> None:
    """Span extraction, scoring, and agreement tools for narrative corpora."""


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@_guarded
def validate(corpus_file: str) -> None:
    """Check a corpus file; print violations as JSON (an empty list is a pass)."""
    corpus = parse_corpus(_read(corpus_file))
    violations = validate_corpus(corpus)
    payload = [
        {
            "doc_id": v.doc_id,
            "rule": v.rule,
            "value": v.value,
            **({"annotator_id": v.annotator_id} if v.annotator_id else {}),
        }
        for v in violations
    ]
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@_guarded
def stats(corpus_file: str) -> None:
    """Document and span counts, per annotator and category."""
    corpus = parse_corpus(_read(corpus_file))
    histograms = {
        annotator: {cat.value: n for cat, n in category_histogram(corpus, annotator).items()}
        for annotator in corpus.annotator_ids()
    }
    payload = {
        "documents": len(corpus.documents),
        "annotators": corpus.annotator_ids(),
        "category_counts": histograms,
    }
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--ratios", default="0.7,0.1,0.2", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--annotator", default=GOLD_ANNOTATOR, show_default=True)
@click.option("--out", default="-", show_default=True)
@_guarded
def split(corpus_file: str, ratios: str, seed: int, annotator: str, out: str) -> None:
    """Assign documents to train/dev/test, stratified by category counts."""
    corpus = parse_corpus(_read(corpus_file))
    assignment = stratified_split(corpus, _parse_ratios(ratios), seed, annotator_id=annotator)
    _emit(serialize_split(assignment), out)


@main.command()
@click.option("--a", "file_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "file_b", required=True, type=click.Path(exists=True, dir_okay=False))
@_guarded
def iaa(file_a: str, file_b: str) -> None:
    """Agreement between two annotation files over the same documents."""
    corpus_a = parse_corpus(_read(file_a))
    corpus_b = parse_corpus(_read(file_b))
    texts_a = {doc.id: doc.text for doc in corpus_a.documents}
    for doc in corpus_b.documents:
        if doc.id in texts_a and texts_a[doc.id] != doc.text:
            raise InputError(f"document {doc.id!r} differs between the two files")
    rep = agreement_mod.agreement_report(
        list(corpus_a.annotations), list(corpus_b.annotations), corpus_a
    )
    click.echo(json.dumps(rep.to_dict(), indent=2, ensure_ascii=False))


@main.command("export-sft")
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--split", "split_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--partition", required=True, type=click.Choice(["train", "dev", "test"]))
@click.option("--annotator", default=GOLD_ANNOTATOR, show_default=True)
@click.option("--sentence-level", is_flag=True)
@click.option("--out", default="-", show_default=True)
@_guarded
def export_sft(
    corpus_file: str, split_file: str, partition: str, annotator: str, sentence_level: bool, out: str
) -> None:
    """Write instruction-tuning records (JSONL) for one partition."""
    corpus = parse_corpus(_read(corpus_file))
    assignment = parse_split(_read(split_file))
    records = prompting.export_sft(
        corpus, assignment, partition, annotator_id=annotator, sentence_level=sentence_level
    )
    _emit(prompting.records_to_jsonl(records), out)


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", required=True, type=click.Choice(["zero", "few"]))
@click.option("--exemplars", "exemplars_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--endpoint", required=True)
@click.option("--model", required=True)
@click.option("--concurrency", type=int, default=4, show_default=True)
@click.option("--timeout", type=float, default=30.0, show_default=True)
@click.option("--max-retries", type=int, default=3, show_default=True)
@click.option("--out", default="-", show_default=True)
@_guarded
def extract(
    corpus_file: str,
    mode: str,
    exemplars_file: str | None,
    endpoint: str,
    model: str,
    concurrency: int,
    timeout: float,
    max_retries: int,
    out: str,
) -> None:
    """Run extraction against a chat-completions endpoint; write predictions."""
    corpus = parse_corpus(_read(corpus_file))
    exemplars = None
    if mode == "few":
        if exemplars_file:
            exemplars = prompting.parse_exemplars(_read(exemplars_file))
        else:
            exemplars = prompting.default_exemplars()
    config = extraction.EndpointConfig(
        base_url=endpoint,
        model_name=model,
        max_concurrency=concurrency,
        timeout=timeout,
        max_retries=max_retries,
    )
    results = extraction.extract_batch(list(corpus.documents), mode, exemplars, config)
    _emit(extraction.serialize_predictions(results), out)


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--lexicon", "lexicon_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="-", show_default=True)
@_guarded
def baseline(corpus_file: str, lexicon_file: str | None, out: str) -> None:
    """Tag every document with the phrase lexicon; write predictions."""
    corpus = parse_corpus(_read(corpus_file))
    if lexicon_file:
        lexicon = baseline_mod.parse_lexicon(_read(lexicon_file))
    else:
        lexicon = baseline_mod.starter_lexicon()
    results = []
    for doc in corpus.documents:
        spans = baseline_mod.lexicon_tag(doc, lexicon)
        results.append(
            extraction.GroundedResult(
                doc_id=doc.id,
                spans=tuple(spans),
                ungrounded=(),
                null_response=False,
                provenance=extraction.Provenance(
                    model_name="lexicon", mode="zero", prompt_hash=""
                ),
            )
        )
    _emit(extraction.serialize_predictions(results), out)


@main.command("eval")
@click.option("--gold", "gold_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", "pred_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--criterion", default="both", show_default=True,
    type=click.Choice(["both", "strict", "lenient"]),
)
@click.option("--annotator", default=GOLD_ANNOTATOR, show_default=True)
@click.option("--out", default="-", show_default=True)
@_guarded
def eval_cmd(gold_file: str, pred_file: str, criterion: str, annotator: str, out: str) -> None:
    """Score a predictions file against gold annotations; write a JSON report."""
    corpus = parse_corpus(_read(gold_file))
    gold_sets = corpus.sets_for(annotator)
    if not gold_sets:
        raise InputError(f"no annotations by {annotator!r} in {gold_file}")
    results = extraction.parse_predictions(_read(pred_file))
    pred_sets = extraction.results_to_annotation_sets(results, "model")
    if criterion == "both":
        criteria = (scorer.MatchCriterion.STRICT, scorer.MatchCriterion.LENIENT)
    else:
        criteria = (scorer.MatchCriterion(criterion),)
    rep = scorer.score(gold_sets, pred_sets, criteria)
    _emit(report_mod.render_report(rep, report_mod.RenderTarget.JSON), out)


@main.command()
@click.option("--in", "report_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--format", "target", default="markdown", show_default=True,
    type=click.Choice(["json", "markdown", "csv"]),
)
@click.option("--out", default="-", show_default=True)
@_guarded
def report(report_file: str, target: str, out: str) -> None:
    """Re-render a JSON evaluation report as markdown, CSV, or normalized JSON."""
    raw = _read_json(report_file)
    try:
        rep = scorer.EvalReport.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{report_file} is not an evaluation report: {exc}") from exc
    _emit(report_mod.render_report(rep, report_mod.RenderTarget(target)), out)


@main.command("synth")
@click.option("--spec", "spec_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--out", default="-", show_default=True)
@_guarded
def synth_cmd(spec_file: str, seed: int, out: str) -> None:
    """Generate a synthetic corpus with gold spans from a spec file."""
    raw = _read_json(spec_file)
    spec = synth.parse_synth_spec(raw)
    corpus = synth.generate_synthetic_corpus(spec, seed)
    _emit(serialize_corpus(corpus), out)


if __name__ == "__main__":
    main()
