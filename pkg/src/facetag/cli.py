"""Command line entry point wiring the harness together.

Configuration comes from an optional JSON file plus flag overrides (flags
win). Exit codes: 0 success, 1 validation error, 2 I/O or protocol error.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .analysis import (
    ScoredExample,
    SheetError,
    read_sheet,
    render_shift,
    render_tally,
    sample_errors,
    shift_analysis,
    tally_errors,
    write_sheet,
)
from .corpus import (
    CorpusError,
    FormatSpec,
    label_histogram,
    parse_corpus,
    write_corpus_jsonl,
)
from .examples import (
    Example,
    ExampleVariant,
    MissingAnnotationError,
    MixPlan,
    build_examples,
    mix_multitask,
    read_examples_jsonl,
    write_examples_jsonl,
)
from .labels import FACE_ACT_LABELSET, load_tagset_registry
from .metrics import (
    average_folds,
    confusion,
    render_confusion,
    render_report,
    report,
    row_normalize,
)
from .predict import (
    PredictionRecord,
    load_baseline,
    repair_label,
    save_baseline,
    train_baseline,
)
from .protocol import (
    FileConfig,
    PredictRequest,
    ProtocolError,
    SubprocessConfig,
    run_external,
)
from .stats import da_fa_matrix, friedman, render_friedman_table

DEFAULTS = {
    "context_size": 2,
    "sample_fraction": 0.10,
    "seed": 0,
    "excluded_labels": ["spos-"],
    "alpha_levels": [0.05, 0.10],
    "collapse_map": {"Disruption": "Statement"},
    "restrict_tags": ["Statement", "Question"],
}


class Settings:
    def __init__(self):
        self.config = dict(DEFAULTS)
        self.no_timestamp = False
        self.jobs = 1

    def get(self, key, override=None):
        if override is not None:
            return override
        return self.config.get(key, DEFAULTS.get(key))

    def provenance(self, command: str, **resolved) -> dict:
        prov = {
            "tool": "facetag",
            "version": __version__,
            "command": command,
            "config": {**self.config, **resolved},
        }
        if not self.no_timestamp:
            prov["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return prov


pass_settings = click.make_pass_decorator(Settings, ensure=True)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file; flags override its values.")
@click.option("--seed", type=int, default=None, help="Global random seed.")
@click.option("--jobs", type=int, default=1, help="Worker processes (advisory).")
@click.option("--no-timestamp", is_flag=True, help="Omit timestamps from reports.")
@click.pass_context
def main(ctx, config_path, seed, jobs, no_timestamp):
    """Face-act tagging experiment harness."""
    settings = ctx.ensure_object(Settings)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            loaded = json.load(fh)
        for key in loaded:
            if key not in DEFAULTS and key not in (
                "corpus", "da_corpus", "variant", "predictor", "endpoint",
            ):
                raise click.ClickException(f"unknown config field: {key!r}")
        settings.config.update(loaded)
    if seed is not None:
        settings.config["seed"] = seed
    settings.jobs = jobs
    settings.no_timestamp = no_timestamp


def _write_json(obj: dict, out: str | None):
    text = json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _load_examples(path: str) -> list[Example]:
    with open(path, encoding="utf-8") as fh:
        return read_examples_jsonl(fh)


def _load_corpus(path: str, tagset=None, role_map=None):
    with open(path, "rb") as fh:
        return parse_corpus(fh, "jsonl", tagset=tagset, role_map=role_map)


def _load_predictions(path: str) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(PredictionRecord.from_json(json.loads(line)))
    return out


def _pairs_by_fold(
    examples: list[Example], predictions: list[PredictionRecord]
) -> dict[int, list[tuple[str, str]]]:
    pred_by_id = {p.example_id: p for p in predictions}
    missing = [ex.id for ex in examples if ex.id not in pred_by_id]
    if missing:
        raise click.ClickException(
            f"predictions missing for {len(missing)} example(s), first: {missing[0]}"
        )
    folds: dict[int, list[tuple[str, str]]] = {}
    for ex in examples:
        folds.setdefault(ex.fold, []).append((ex.target, pred_by_id[ex.id].label))
    return folds


@main.command("import")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_name", default="jsonl",
              help='"jsonl" or a path to a FormatSpec JSON for delimited text.')
@click.option("--tagset-registry", type=click.Path(exists=True), default=None)
@click.option("--tagset", "tagset_id", default=None)
@click.option("--role-map", default=None,
              help='JSON object mapping raw speaker strings to ER/EE.')
@click.option("--out", required=True, type=click.Path())
@pass_settings
def import_cmd(settings, input_path, format_name, tagset_registry, tagset_id, role_map, out):
    """Import a corpus file and write canonical JSONL plus a histogram."""
    tagset = None
    if tagset_registry:
        registry = load_tagset_registry(tagset_registry)
        if tagset_id is None:
            raise click.ClickException("--tagset is required with --tagset-registry")
        if tagset_id not in registry:
            raise click.ClickException(f"tagset {tagset_id!r} not in registry")
        tagset = registry[tagset_id]
    roles = json.loads(role_map) if role_map else None
    if format_name == "jsonl":
        fmt = "jsonl"
    else:
        with open(format_name, encoding="utf-8") as fh:
            fmt = FormatSpec.from_json(json.load(fh))
    with open(input_path, "rb") as fh:
        corpus = parse_corpus(fh, fmt, tagset=tagset, role_map=roles)
    with open(out, "w", encoding="utf-8") as fh:
        write_corpus_jsonl(corpus, fh)
    hist = label_histogram(corpus)
    click.echo(f"conversations: {len(corpus.conversations)}", err=True)
    click.echo(f"utterances:    {corpus.num_utterances()}", err=True)
    click.echo("label histogram (verify against the published counts):", err=True)
    for label, count in sorted(hist.items(), key=lambda kv: -kv[1]):
        click.echo(f"  {label.canonical:<7} {count}", err=True)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--variant", type=click.Choice([v.value for v in ExampleVariant]), required=True)
@click.option("--context-size", type=int, default=None)
@click.option("--da-corpus", type=click.Path(exists=True), default=None,
              help="Dialog act corpus for multi-task mixing (mtl-fa only).")
@click.option("--fraction", type=float, default=None,
              help="Conversation sample fraction for multi-task mixing.")
@click.option("--out", required=True, type=click.Path())
@pass_settings
def prepare(settings, corpus_path, variant, context_size, da_corpus, fraction, out):
    """Build example JSONL for one input preparation."""
    corpus = _load_corpus(corpus_path)
    var = ExampleVariant(variant)
    ctx_size = settings.get("context_size", context_size)
    examples = build_examples(corpus, var, ctx_size)
    if da_corpus:
        if var is not ExampleVariant.MTL_FA:
            raise click.ClickException("--da-corpus requires --variant mtl-fa")
        plan = MixPlan(
            sample_fraction=settings.get("sample_fraction", fraction),
            seed=settings.get("seed"),
        )
        examples = mix_multitask(examples, _load_corpus(da_corpus), plan, ctx_size)
    with open(out, "w", encoding="utf-8") as fh:
        write_examples_jsonl(examples, fh)
    click.echo(f"wrote {len(examples)} examples", err=True)


@main.command("train-baseline")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--alpha", type=float, default=1.0)
@click.option("--out-dir", required=True, type=click.Path())
@pass_settings
def train_baseline_cmd(settings, examples_path, alpha, out_dir):
    """Train one baseline model per fold (trained on the other folds)."""
    examples = _load_examples(examples_path)
    folds = sorted({ex.fold for ex in examples})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fold in folds:
        train = [ex for ex in examples if ex.fold != fold]
        if not train:  # single-fold input: train on everything
            train = examples
        model = train_baseline(train, alpha)
        with open(out / f"model_fold{fold}.json", "w", encoding="utf-8") as fh:
            save_baseline(model, fh)
    click.echo(f"trained {len(folds)} fold model(s) in {out_dir}", err=True)


@main.command()
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--model-dir", type=click.Path(exists=True), default=None,
              help="Directory of per-fold baseline models.")
@click.option("--external-cmd", default=None,
              help="Command line of an external predictor (wire protocol on stdio).")
@click.option("--requests", "requests_path", type=click.Path(), default=None)
@click.option("--responses", "responses_path", type=click.Path(), default=None)
@click.option("--window", type=int, default=64)
@click.option("--timeout", type=float, default=60.0)
@click.option("--out", required=True, type=click.Path())
@pass_settings
def predict(settings, examples_path, model_dir, external_cmd, requests_path,
            responses_path, window, timeout, out):
    """Predict labels for examples and repair malformed outputs."""
    examples = _load_examples(examples_path)
    labelset = FACE_ACT_LABELSET
    records: list[dict] = []

    if model_dir:
        models = {}
        for fold in sorted({ex.fold for ex in examples}):
            path = Path(model_dir) / f"model_fold{fold}.json"
            if not path.exists():
                raise click.ClickException(f"missing model for fold {fold}: {path}")
            with open(path, encoding="utf-8") as fh:
                models[fold] = load_baseline(fh)
        for ex in examples:
            model = models[ex.fold]
            raw = model.predict(ex.input)
            rec = repair_label(raw, labelset, model.train_freqs(), example_id=ex.id)
            records.append({**rec.to_json(), "fold": ex.fold})
    elif external_cmd or responses_path:
        requests = [
            PredictRequest(id=ex.id, task=ex.variant.task, input=ex.input)
            for ex in examples
        ]
        if external_cmd and not responses_path:
            config = SubprocessConfig(
                command=external_cmd.split(), window=window, timeout=timeout
            )
        else:
            if not (requests_path and responses_path):
                raise click.ClickException(
                    "file transport needs both --requests and --responses"
                )
            config = FileConfig(
                requests_path=Path(requests_path),
                responses_path=Path(responses_path),
                command=external_cmd.split() if external_cmd else None,
                timeout=timeout,
            )
        raws = run_external(requests, config)
        freqs: dict[str, int] = {}
        for ex in examples:
            freqs[ex.target] = freqs.get(ex.target, 0) + 1
        fold_of = {ex.id: ex.fold for ex in examples}
        for raw in raws:
            rec = repair_label(raw.output, labelset, freqs, example_id=raw.example_id)
            records.append({**rec.to_json(), "fold": fold_of[raw.example_id]})
    else:
        raise click.ClickException("choose a predictor: --model-dir or --external-cmd")

    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    click.echo(f"wrote {len(records)} predictions", err=True)


@main.command()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True),
              help="Example JSONL carrying gold targets and folds.")
@click.option("--excl", default=None, help="Comma-separated labels excluded from macro.")
@click.option("--per-fold/--pooled", "per_fold", default=True)
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def evaluate(settings, pred_path, gold_path, excl, per_fold, out):
    """Score predictions: fold-averaged P/R/F1 report as JSON."""
    examples = _load_examples(gold_path)
    predictions = _load_predictions(pred_path)
    excluded = set(
        excl.split(",") if excl is not None else settings.get("excluded_labels")
    )
    folds = _pairs_by_fold(examples, predictions)
    if per_fold and len(folds) > 1:
        fold_reports = {
            fold: report(confusion(pairs, FACE_ACT_LABELSET), excluded)
            for fold, pairs in sorted(folds.items())
        }
        final = average_folds(list(fold_reports.values()))
        payload = {
            "provenance": settings.provenance("evaluate", excluded_labels=sorted(excluded)),
            "report": final.to_json(),
            "per_fold": {str(f): r.to_json() for f, r in fold_reports.items()},
        }
    else:
        pairs = [p for ps in folds.values() for p in ps]
        final = report(confusion(pairs, FACE_ACT_LABELSET), excluded)
        payload = {
            "provenance": settings.provenance("evaluate", excluded_labels=sorted(excluded)),
            "report": final.to_json(),
        }
    _write_json(payload, out)
    click.echo(render_report(final), err=True)


@main.command()
@click.option("--reports", "report_paths", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--names", default=None, help="Comma-separated system names.")
@click.option("--metric", type=click.Choice(["f1", "precision", "recall"]), default="f1")
@click.option("--level", type=click.Choice(["label", "fold"]), default="label",
              help="Blocks: per-label metrics or per-fold micro metrics.")
@click.option("--permutation-draws", type=int, default=0,
              help="Also compute a permutation p with this many draws.")
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def compare(settings, report_paths, names, metric, level, permutation_draws, out):
    """Friedman / Kendall's W comparison across evaluation reports.

    With --level label, blocks are the labels supported in every report
    and treatments are the systems; each cell is that system's per-label
    metric. With --level fold, blocks are folds and cells are per-fold
    micro metrics (requires reports produced with --per-fold).
    """
    from .metrics import MetricsReport
    from .stats import friedman_permutation_p

    payloads = []
    for path in report_paths:
        with open(path, encoding="utf-8") as fh:
            payloads.append(json.load(fh))
    system_names = (
        names.split(",") if names else [Path(p).stem for p in report_paths]
    )
    if len(system_names) != len(payloads):
        raise click.ClickException("--names count does not match --reports")

    if level == "label":
        reports = [MetricsReport.from_json(p["report"]) for p in payloads]
        common = None
        for rep in reports:
            supported = {m.label for m in rep.per_label if m.support > 0}
            common = supported if common is None else common & supported
        blocks = sorted(common or [])
        if len(blocks) < 2:
            raise click.ClickException("fewer than 2 labels supported in all reports")
        matrix = [
            [getattr(rep.per_label_map()[label], metric) for rep in reports]
            for label in blocks
        ]
    else:
        matrices = []
        fold_keys = None
        for p in payloads:
            if "per_fold" not in p:
                raise click.ClickException("--level fold needs per-fold reports")
            keys = sorted(p["per_fold"])
            fold_keys = keys if fold_keys is None else fold_keys
            if keys != fold_keys:
                raise click.ClickException("reports cover different folds")
            matrices.append(
                [p["per_fold"][k]["micro"][metric] for k in fold_keys]
            )
        blocks = fold_keys
        matrix = [list(col) for col in zip(*matrices)]

    alphas = settings.get("alpha_levels")
    result = friedman(matrix, alphas)
    payload = {
        "provenance": settings.provenance("compare", metric=metric, level=level),
        "systems": system_names,
        "blocks": blocks,
        "friedman": result.to_json(),
    }
    if permutation_draws:
        payload["permutation_p"] = friedman_permutation_p(
            matrix, permutation_draws, settings.get("seed")
        )
    _write_json(payload, out)
    click.echo(render_friedman_table({metric: result}), err=True)
    click.echo(
        "mean ranks: "
        + ", ".join(f"{n}={r:.2f}" for n, r in zip(system_names, result.mean_ranks)),
        err=True,
    )


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def correlate(settings, corpus_path, out):
    """Dialog act x face act phi correlation matrix (per-utterance)."""
    corpus = _load_corpus(corpus_path)
    cells = da_fa_matrix(corpus)
    payload = {
        "provenance": settings.provenance("correlate", statistic="per-utterance phi"),
        "cells": [c.to_json() for c in cells],
    }
    _write_json(payload, out)


@main.command("confusion")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--normalize/--counts", default=False)
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def confusion_cmd(settings, pred_path, gold_path, normalize, out):
    """Confusion matrix over all scored examples."""
    examples = _load_examples(gold_path)
    predictions = _load_predictions(pred_path)
    pairs = [p for ps in _pairs_by_fold(examples, predictions).values() for p in ps]
    cm = confusion(pairs, FACE_ACT_LABELSET)
    payload = {
        "provenance": settings.provenance("confusion", normalized=normalize),
        "matrix": cm.to_json(),
    }
    if normalize:
        payload["row_normalized"] = row_normalize(cm)
    _write_json(payload, out)
    click.echo(render_confusion(cm, normalized=normalize), err=True)


def _scored_examples(examples: list[Example], predictions) -> list[ScoredExample]:
    pred_by_id = {p.example_id: p for p in predictions}
    scored = []
    for ex in examples:
        if ex.id not in pred_by_id:
            raise click.ClickException(f"prediction missing for example {ex.id}")
        cid, _, turn = ex.id.rpartition(":")
        lines = ex.input.split("\n")
        scored.append(
            ScoredExample(
                example_id=ex.id,
                conversation_id=cid,
                turn=int(turn),
                fold=ex.fold,
                context="\n".join(lines[:-1]),
                text=lines[-1],
                gold=ex.target,
                predicted=pred_by_id[ex.id].label,
            )
        )
    return scored


@main.command("sample-errors")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--per-fold", "per_fold", type=int, default=5)
@click.option("--cap", type=int, default=25)
@click.option("--out", required=True, type=click.Path())
@pass_settings
def sample_errors_cmd(settings, pred_path, gold_path, per_fold, cap, out):
    """Draw stratified misclassification samples into an annotation sheet."""
    examples = _load_examples(gold_path)
    predictions = _load_predictions(pred_path)
    scored = _scored_examples(examples, predictions)
    samples = sample_errors(scored, per_fold, cap, settings.get("seed"))
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_sheet(samples, fh)
    click.echo(f"wrote {len(samples)} samples to {out}", err=True)


@main.command("tally-errors")
@click.option("--sheet", "sheet_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def tally_errors_cmd(settings, sheet_path, out):
    """Tally a human-annotated error sheet."""
    with open(sheet_path, encoding="utf-8", newline="") as fh:
        samples = read_sheet(fh, require_category=True)
    tally = tally_errors(samples)
    payload = {
        "provenance": settings.provenance("tally-errors"),
        "tally": tally.to_json(),
    }
    _write_json(payload, out)
    click.echo(render_tally(tally), err=True)


@main.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred-a", required=True, type=click.Path(exists=True))
@click.option("--pred-b", required=True, type=click.Path(exists=True))
@click.option("--target", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="Corpus JSONL carrying dialog act tags.")
@click.option("--tags", default=None, help="Comma-separated restricted tag subset.")
@click.option("--out", type=click.Path(), default=None)
@pass_settings
def shift(settings, gold_path, pred_a, pred_b, target, corpus_path, tags, out):
    """Prediction shift analysis between two systems for one label."""
    examples = _load_examples(gold_path)
    preds_a = {p.example_id: p.label for p in _load_predictions(pred_a)}
    preds_b = {p.example_id: p.label for p in _load_predictions(pred_b)}
    corpus = _load_corpus(corpus_path)
    tag_of = {}
    for conv in corpus.conversations:
        for utt in conv.utterances:
            if utt.dialog_act is not None:
                tag_of[f"{conv.id}:{utt.turn}"] = utt.dialog_act.name
    missing = [ex.id for ex in examples if ex.id not in tag_of]
    if missing:
        raise click.ClickException(
            f"dialog act missing for {len(missing)} example(s), first: {missing[0]}"
        )
    for name, preds in (("--pred-a", preds_a), ("--pred-b", preds_b)):
        absent = [ex.id for ex in examples if ex.id not in preds]
        if absent:
            raise click.ClickException(f"{name} missing prediction for {absent[0]}")
    restrict = tags.split(",") if tags else settings.get("restrict_tags")
    result = shift_analysis(
        gold=[ex.target for ex in examples],
        preds_a=[preds_a[ex.id] for ex in examples],
        preds_b=[preds_b[ex.id] for ex in examples],
        target=target,
        da_tags=[tag_of[ex.id] for ex in examples],
        collapse_map=settings.get("collapse_map"),
        restrict_tags=restrict,
    )
    payload = {
        "provenance": settings.provenance("shift", target=target, restrict_tags=restrict),
        "shift": result.to_json(),
    }
    _write_json(payload, out)
    click.echo(render_shift(result), err=True)


def run(argv=None) -> int:
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except ProtocolError as exc:
        click.echo(f"protocol error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2
    except (CorpusError, MissingAnnotationError, SheetError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
