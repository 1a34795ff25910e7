"""Command-line entry point: classify, evaluate, calibrate, stats, curriculum.

Every run that produces artifacts also writes a JSON manifest carrying
the config hash, asset hashes, and seed needed to reproduce it.

Exit codes: 0 success, 1 configuration error, 2 data error,
3 upstream/transport failure.
"""

from __future__ import annotations

import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import calibration, metrics, strategies
from .corpus import (
    SPLITS,
    Corpus,
    CurriculumSpec,
    UnlabeledRow,
    build_curriculum,
    detect_anomalies,
    label_distribution,
    load_split,
    save_split,
    token_stats,
)
from .errors import ConfigError, DataError, TransportError
from .gateway import ChatGateway, HttpBackend, MockBackend, ResponseCache, SamplingParams
from .strategies import FALLBACK_MODES, STRATEGIES, PromptLibrary, load_rules, run_batch, write_predictions


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(obj: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@click.group()
def cli() -> None:
    """Multilingual subjectivity detection pipeline."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--language", default="en", show_default=True)
@click.option("--split", default="test", type=click.Choice(SPLITS), show_default=True)
@click.option("--strategy", required=True, type=click.Choice(STRATEGIES))
@click.option("--model", default=None, help="Chat model name; defaults per strategy.")
@click.option("--endpoint", default=None, help="Chat endpoint base URL (or env SUBJSCAN_ENDPOINT).")
@click.option("--mock", "mock_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Mock-backend script (JSON); replaces the network entirely.")
@click.option("--prompts-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None)
@click.option("--rules", "rules_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--fallback", default="obj", type=click.Choice(FALLBACK_MODES), show_default=True,
              help="Label applied to unparseable responses.")
@click.option("--concurrency", default=4, type=click.IntRange(min=1), show_default=True)
@click.option("--cache-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--sampling-temperature", default=0.0, type=float, show_default=True)
@click.option("--max-output-tokens", default=None, type=int)
@click.option("--max-tokens", default=500, type=click.IntRange(min=1), show_default=True,
              help="Token-count threshold for anomaly flagging.")
@click.option("--drop-anomalies", is_flag=True, help="Drop flagged rows instead of classifying them.")
@click.option("--out-dir", default=".", type=click.Path(file_okay=False, path_type=Path), show_default=True)
def classify(
    input_path: Path,
    language: str,
    split: str,
    strategy: str,
    model: str | None,
    endpoint: str | None,
    mock_path: Path | None,
    prompts_dir: Path | None,
    rules_path: Path | None,
    fallback: str,
    concurrency: int,
    cache_dir: Path | None,
    seed: int,
    sampling_temperature: float,
    max_output_tokens: int | None,
    max_tokens: int,
    drop_anomalies: bool,
    out_dir: Path,
) -> None:
    """Classify a corpus with one strategy; write predictions + manifest."""
    # Configuration is resolved before any upstream traffic.
    if mock_path is not None:
        backend = MockBackend.from_script_file(mock_path)
        backend_info = {"kind": "mock", "script": str(mock_path), "script_sha256": _sha256_file(mock_path)}
    else:
        backend = HttpBackend.from_env(endpoint)
        backend_info = {"kind": "http", "endpoint": backend.endpoint}
    prompts = PromptLibrary(prompts_dir)
    rules = load_rules(rules_path)
    model = model or strategies.DEFAULT_MODELS[strategy]

    corpus = load_split(input_path, language=language, split=split)
    flagged = detect_anomalies(corpus, max_tokens=max_tokens)
    dropped_ids: list[str] = []
    if drop_anomalies and flagged:
        dropped_ids = [sid for sid, _ in flagged]
        kept = [s for s in corpus if s.sentence_id not in set(dropped_ids)]
        corpus = Corpus(language=corpus.language, split=corpus.split, sentences=kept)

    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    gateway = ChatGateway(backend, cache=cache, concurrency_limit=concurrency)
    sampling = SamplingParams(temperature=sampling_temperature, max_tokens=max_output_tokens)

    batch = run_batch(
        corpus,
        strategy,
        gateway,
        prompts=prompts,
        rules=rules,
        model=model,
        concurrency=concurrency,
        fallback=fallback,
        sampling=sampling,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = out_dir / "predictions.tsv"
    write_predictions(batch.predictions(), predictions_path)

    config = {
        "strategy": strategy,
        "model": model,
        "language": language,
        "split": split,
        "input_sha256": _sha256_file(input_path),
        "prompt_hashes": prompts.hashes(),
        "rules_sha256": rules.sha256,
        "sampling": {"temperature": sampling_temperature, "max_output_tokens": max_output_tokens},
        "fallback": fallback,
        "max_tokens": max_tokens,
        "drop_anomalies": drop_anomalies,
        "seed": seed,
    }
    manifest = {
        "subcommand": "classify",
        "created": _now(),
        **config,
        "input": str(input_path),
        "n": len(corpus),
        "backend": backend_info,
        "rules_source": rules.source,
        "rule_count": len(rules.rules),
        "anomalies": {"flagged": flagged, "dropped_ids": dropped_ids},
        "concurrency": concurrency,
        "cache_dir": str(cache_dir) if cache_dir else None,
        "upstream_calls": gateway.backend_calls,
        "fallback_count": batch.fallback_count,
        "error_count": batch.error_count,
        "parse_paths": {e.sentence_id: e.parse_path for e in batch.entries},
        "errors": {e.sentence_id: e.error for e in batch.entries if e.error},
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode("utf-8")
        ).hexdigest(),
        "predictions": str(predictions_path),
    }
    _write_json(manifest, out_dir / "manifest.json")

    click.echo(
        f"classified {len(corpus)} sentences with {strategy}/{model}: "
        f"{batch.fallback_count} fallback, {batch.error_count} errors, "
        f"{gateway.backend_calls} upstream calls"
    )
    click.echo(f"predictions: {predictions_path}")
    if batch.error_count:
        kinds = {e.error_kind for e in batch.entries if e.error_kind}
        for e in batch.entries:
            if e.error:
                click.echo(f"  error {e.sentence_id}: {e.error}", err=True)
        sys.exit(3 if "transport" in kinds else 2)


@cli.command()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--baseline-f1", default=None, type=float, help="Reference macro-F1 for the delta column.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False, path_type=Path))
def evaluate(pred_path: Path, gold_path: Path, baseline_f1: float | None, out_path: Path | None) -> None:
    """Score a predictions file against a gold file (aligned by id)."""
    preds = metrics.read_label_file(pred_path)
    golds = metrics.read_label_file(gold_path)
    pred_seq, gold_seq = metrics.align_by_id(preds, golds)
    rep = metrics.report(
        pred_seq,
        gold_seq,
        baseline_f1=baseline_f1,
        metadata={"pred": str(pred_path), "gold": str(gold_path), "created": _now()},
    )
    click.echo(metrics.render_text(rep))
    if out_path is not None:
        _write_json(rep.to_dict(), out_path)


@cli.command()
@click.option("--logits", "logits_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--fitted-on", default=None, help="Dataset identifier stored in the model file.")
@click.option("--threshold", default=0.45, type=float, show_default=True)
@click.option("--predictions-out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Also decide labels for every record and write a predictions TSV.")
def calibrate(
    logits_path: Path,
    gold_path: Path,
    out_path: Path,
    fitted_on: str | None,
    threshold: float,
    predictions_out: Path | None,
) -> None:
    """Fit the softmax temperature on dev logits + gold labels."""
    records = calibration.load_logits(logits_path)
    golds_by_id = metrics.read_label_file(gold_path)
    try:
        golds = [golds_by_id[r.sentence_id] for r in records]
    except KeyError as exc:
        raise metrics.IdMismatch(f"no gold label for sentence_id {exc.args[0]!r}") from exc

    nll_before = calibration.mean_nll(records, golds, temperature=1.0)
    model = calibration.fit_temperature(records, golds, fitted_on=fitted_on or str(logits_path))
    calibration.save_model(model, out_path)
    click.echo(f"temperature: {model.temperature:.6f}")
    click.echo(f"nll at T=1:  {nll_before:.6f}")
    click.echo(f"nll fitted:  {model.nll:.6f}")
    click.echo(f"model: {out_path}")

    if predictions_out is not None:
        policy = calibration.DecisionPolicy(subj_threshold=threshold)
        pairs = calibration.calibrate_and_predict(records, model, policy)
        write_predictions(pairs, predictions_out)
        click.echo(f"predictions: {predictions_out}")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--language", default="en", show_default=True)
@click.option("--split", default="train", type=click.Choice(SPLITS), show_default=True)
@click.option("--max-tokens", default=500, type=click.IntRange(min=1), show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False, path_type=Path))
def stats(input_path: Path, language: str, split: str, max_tokens: int, out_path: Path | None) -> None:
    """Label distribution, token statistics, and anomalies for one file."""
    corpus = load_split(input_path, language=language, split=split)
    lengths = token_stats(corpus)
    try:
        dist = label_distribution(corpus)
        labels = {label.value: count for label, count in dist.counts.items()}
        subj_fraction = dist.subj_fraction
    except UnlabeledRow:
        labels, subj_fraction = None, None
    payload = {
        "path": str(input_path),
        "language": language,
        "split": split,
        "n": len(corpus),
        "labels": labels,
        "subj_fraction": subj_fraction,
        "tokens": {
            "total": lengths.total,
            "mean": lengths.mean,
            "min": lengths.min,
            "max": lengths.max,
            "median": lengths.median,
        },
        "max_tokens": max_tokens,
        "anomalies": detect_anomalies(corpus, max_tokens=max_tokens),
    }
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))
    if out_path is not None:
        _write_json(payload, out_path)


@cli.command()
@click.option("--entry", "entries", multiple=True, required=True, metavar="LANG=PATH",
              help="Train file per language, in curriculum order; repeatable.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
def curriculum(entries: tuple[str, ...], seed: int, out_path: Path) -> None:
    """Merge train files in order and shuffle deterministically."""
    parsed: list[tuple[str, Path]] = []
    for entry in entries:
        if "=" not in entry:
            raise ConfigError(f"--entry expects LANG=PATH, got {entry!r}")
        lang, _, raw_path = entry.partition("=")
        path = Path(raw_path)
        if not path.exists():
            raise ConfigError(f"curriculum file not found: {path}")
        parsed.append((lang, path))

    spec = CurriculumSpec(entries=tuple(parsed), seed=seed)
    merged = build_curriculum(spec)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_split(merged, out_path)

    sizes = {lang: sum(1 for s in merged if s.language == lang) for lang, _ in parsed}
    manifest = {
        "subcommand": "curriculum",
        "created": _now(),
        "seed": seed,
        "entries": [{"language": lang, "path": str(path), "sha256": _sha256_file(path)} for lang, path in parsed],
        "sizes": sizes,
        "total": len(merged),
        "output": str(out_path),
        "output_sha256": _sha256_file(out_path),
    }
    _write_json(manifest, Path(str(out_path) + ".manifest.json"))
    click.echo(f"merged {len(merged)} sentences ({sizes}) -> {out_path}")


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping error families onto the exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:  # includes UsageError: bad flags = config
        exc.show(file=sys.stderr)
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except TransportError as exc:
        click.echo(f"upstream error: {exc}", err=True)
        sys.exit(3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
