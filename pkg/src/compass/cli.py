"""``compass`` command line: run, eval, export, stats.

Exit codes: 0 success, 1 fatal input error, 2 partial run (quarantines present).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import CompassError
from .evaluate import MatchCriteria, evaluate, labelled_set_from_dict, report
from .pipeline import PipelineConfig, run_pipeline
from .store import FORMATS, RecordStore, export, format_stats, stats_report

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class InputError(click.ClickException):
    exit_code = EXIT_FATAL


def _store_path(path: str) -> Path:
    p = Path(path)
    return p / "records.jsonl" if p.is_dir() else p


def _read_json(path: Path, what: str):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {what} {path}: {exc}") from exc


@click.group()
@click.option("-v", "--verbose", count=True, help="Log warnings (-v) or progress (-vv) to stderr.")
def cli(verbose):
    level = {0: logging.ERROR, 1: logging.WARNING}.get(verbose, logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--config", "config_file", type=click.Path(dir_okay=False), help="JSON run configuration.")
@click.option("--corpus", type=click.Path(), help="Directory of pre-parsed paper JSON files.")
@click.option("--tree", type=click.Path(dir_okay=False), help="Knowledge tree file (default: bundled).")
@click.option("--backend", type=click.Choice(["mock", "http"]))
@click.option("--fixtures", type=click.Path(dir_okay=False), help="Mock response table.")
@click.option("--endpoint", help="Chat-completions URL for the http backend.")
@click.option("--model", help="Model name for the http backend.")
@click.option("--keywords", help="Comma-separated retrieval keywords.")
@click.option("--external", "externals", multiple=True, type=click.Path(dir_okay=False),
              help="External dataset CSV (sidecar <name>.map.json); repeatable.")
@click.option("--max-parallel", type=int)
@click.option("--max-attempts", type=int)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--save-config", type=click.Path(dir_okay=False), help="Write the effective config here.")
@click.option("--inject-faults", type=click.Choice(["garbage", "transient"]), hidden=True)
def run(config_file, corpus, tree, backend, fixtures, endpoint, model, keywords, externals,
        max_parallel, max_attempts, out_dir, save_config, inject_faults):
    """Run collection, extraction and aggregation over a corpus."""
    base = _read_json(Path(config_file), "config") if config_file else {}
    overrides = {"corpus_path": corpus, "tree_path": tree, "backend": backend, "fixtures_path": fixtures,
                 "endpoint": endpoint, "model": model, "max_parallel": max_parallel,
                 "max_attempts": max_attempts, "output_dir": out_dir, "fault_injection": inject_faults}
    base.update({k: v for k, v in overrides.items() if v is not None})
    if keywords:
        base["keywords"] = [k.strip() for k in keywords.split(",") if k.strip()]
    if externals:
        base["externals"] = list(externals)
    if "corpus_path" not in base or "output_dir" not in base:
        raise InputError("--corpus and --out are required (directly or via --config)")
    try:
        config = PipelineConfig.from_dict(base)
        if save_config:
            config.save(save_config)
        manifest = run_pipeline(config)
    except (CompassError, OSError, ValueError, TypeError) as exc:
        raise InputError(f"{type(exc).__name__}: {exc}") from exc
    c = manifest.counts
    click.echo(f"{manifest.run_id}: {c['papers_seen']} papers, {c['papers_target']} target, "
               f"{c['tables_target']} target tables; records extracted {c['records_extracted']}, "
               f"validated {c['records_validated']}, quarantined {c['records_quarantined']}, "
               f"fused {c['records_fused']}; rollback events {manifest.rollback_events}")
    return EXIT_PARTIAL if manifest.partial else EXIT_OK


@cli.command("eval")
@click.option("--gold", required=True, type=click.Path(dir_okay=False))
@click.option("--pred", required=True, type=click.Path(), help="predictions.json or a run directory.")
@click.option("--value-tol", type=float, default=1e-6, show_default=True)
@click.option("--coord-tol", type=float, default=0.01, show_default=True)
@click.option("--depth-tol", type=float, default=1.0, show_default=True)
@click.option("--json-out", type=click.Path(dir_okay=False), help="Also write the JSON report here.")
def eval_cmd(gold, pred, value_tol, coord_tol, depth_tol, json_out):
    """Score predictions against a gold file."""
    pred_path = Path(pred)
    manifest = None
    if pred_path.is_dir():
        if (pred_path / "manifest.json").exists():
            manifest = _read_json(pred_path / "manifest.json", "manifest")
        pred_path = pred_path / "predictions.json"
    try:
        gold_set = labelled_set_from_dict(_read_json(Path(gold), "gold file"))
        pred_set = labelled_set_from_dict(_read_json(pred_path, "predictions"), strict=False)
        criteria = MatchCriteria(value_tol, coord_tol, depth_tol)
    except (CompassError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{type(exc).__name__}: {exc}") from exc
    text, doc = report(evaluate(pred_set, gold_set, criteria), manifest)
    click.echo(text, nl=False)
    if json_out:
        Path(json_out).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


@cli.command("export")
@click.option("--store", "store_path", default=".", show_default=True, type=click.Path(),
              help="Run directory or records.jsonl.")
@click.option("--format", "fmt", required=True, type=click.Choice(FORMATS))
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
def export_cmd(store_path, fmt, out_file):
    """Export the unified dataset as CSV, JSON-lines or GeoJSON."""
    path = _store_path(store_path)
    if not path.exists():
        raise InputError(f"no record store at {path}")
    try:
        export(RecordStore(path), fmt, out_file)
    except CompassError as exc:
        raise InputError(str(exc)) from exc
    return EXIT_OK


@cli.command()
@click.option("--store", "store_path", default=".", show_default=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Print JSON instead of a table.")
def stats(store_path, as_json):
    """Counts by measurement type, source kind and coarse region."""
    path = _store_path(store_path)
    if not path.exists():
        raise InputError(f"no record store at {path}")
    s = stats_report(RecordStore(path))
    click.echo(json.dumps(s, indent=1) if as_json else format_stats(s).rstrip("\n"))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, prog_name="compass", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        code = EXIT_FATAL
    except click.exceptions.Abort:
        code = EXIT_FATAL
    except click.exceptions.Exit as exc:
        code = exc.exit_code
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
