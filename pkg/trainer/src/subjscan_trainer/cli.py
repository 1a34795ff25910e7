"""Trainer CLI: fine-tune on corpus TSVs and export logits JSONL."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .data import DataError
from .export import export_logits
from .train import train as run_training


@click.group()
def cli() -> None:
    """Encoder fine-tuning for subjectivity detection."""


@cli.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--train", "train_tsv", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--dev", "dev_tsv", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def train_cmd(config_path: Path, train_tsv: Path, dev_tsv: Path, out_dir: Path) -> None:
    """Fine-tune per the YAML config; keep the best dev-macro-F1 checkpoint."""
    config = load_config(config_path)
    summary = run_training(config, train_tsv, dev_tsv, out_dir)
    click.echo(
        f"trained {summary.epochs_run} epochs "
        f"(best epoch {summary.best_epoch}, dev macro-F1 {summary.best_dev_macro_f1:.4f}, "
        f"early stop: {summary.stopped_early})"
    )
    click.echo(f"checkpoint: {summary.checkpoint_dir}")
    click.echo(f"log: {summary.log_path}")


@cli.command("export-logits")
@click.option("--ckpt", "ckpt_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--input", "input_tsv", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--batch-size", default=32, type=click.IntRange(min=1), show_default=True)
def export_cmd(ckpt_dir: Path, input_tsv: Path, out_path: Path, batch_size: int) -> None:
    """Write one {"sentence_id", "logits": [z_obj, z_subj]} line per sentence."""
    written = export_logits(ckpt_dir, input_tsv, out_path, batch_size=batch_size)
    click.echo(f"wrote {written} logit records to {out_path}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
