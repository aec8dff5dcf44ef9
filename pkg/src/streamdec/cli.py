"""Command-line experiment runner.

    streamdec run      --config CFG [--out DIR] [--seed N] [--jobs N]
    streamdec compare  BUNDLE... --baseline BUNDLE [--out DIR]
    streamdec analyze  BUNDLE --kind confidence|attention [--out DIR]

Exit codes: 0 success, 2 config error, 3 I/O error, 4 incomparable or
unsuitable inputs. ``STREAMDEC_OUT`` supplies a default output directory.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, kernels
from .config import (
    ExperimentConfig,
    build_denoiser,
    comparability_key,
    default_config,
    load_config,
    make_prompt,
    parse_config,
)
from .errors import (
    ConfigInvalidError,
    EmptyBundleError,
    IncomparableBundlesError,
    NoAttentionDataError,
    StreamDecError,
)
from .metrics import (
    AttentionRow,
    ConfidenceRow,
    ThroughputReport,
    make_report,
    monotone_blocks,
    read_trace_jsonl,
    speedup,
    summarize_attention,
    summarize_confidence,
    throughput_proxy,
    write_rows_csv,
    write_trace_jsonl,
)
from .scheduler import decode_sequence

logger = logging.getLogger("streamdec")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INCOMPARABLE = 0, 2, 3, 4
MANIFEST = "manifest.json"


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_rep(cfg: ExperimentConfig, rep: int, rep_dir: str) -> tuple[dict, float]:
    denoiser = build_denoiser(cfg)
    prompt = make_prompt(cfg, rep, denoiser.vocab_size)
    result = decode_sequence(prompt, denoiser, cfg.decode)
    report = throughput_proxy(result.ledger, result)
    out = Path(rep_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_jsonl(result.trace, out / "trace.jsonl")
    _dump(result.ledger.to_dict(), out / "ledger.json")
    # wall clock lives in the manifest so these files stay reproducible
    _dump(report.to_dict(), out / "throughput.json")
    _dump({"prompt": prompt.tolist(), "tokens": result.tokens.tolist(),
           "exited_early_at": result.exited_early_at}, out / "output.json")
    return report.to_dict(), result.wall_clock_seconds


def _run_bundle(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    reps = range(cfg.repetitions)
    dirs = [str(out_dir / f"rep_{r:03d}") for r in reps]
    if jobs > 1 and cfg.repetitions > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_rep, [cfg] * len(dirs), reps, dirs))
    else:
        results = [_run_rep(cfg, r, d) for r, d in zip(reps, dirs)]

    reports = [ThroughputReport.from_dict(r) for r, _ in results]
    total = make_report(
        sum(r.non_eos_tokens for r in reports),
        sum(r.query_tokens for r in reports),
        sum(r.attention_pairs for r in reports),
        sum(r.forward_calls for r in reports),
    )
    _dump(total.to_dict(), out_dir / "throughput.json")
    manifest = {
        "engine_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.decode.seed,
        "scheduler_kind": cfg.decode.scheduler_kind,
        "repetitions": [Path(d).name for d in dirs],
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_clock_seconds": [secs for _, secs in results],
    }
    _dump(manifest, out_dir / MANIFEST)
    return total.to_dict()


def _point_name(point: dict) -> str:
    return "_".join(f"{k}={v}" for k, v in point.items())


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> Path:
    """Run every repetition (and sweep point) and write the bundle(s) to disk."""
    out = out_dir or config.output_dir or os.environ.get("STREAMDEC_OUT")
    if out is None:
        raise ConfigInvalidError("output_dir", "no output directory (use --out, output_dir or STREAMDEC_OUT)")
    out = Path(out)
    points = config.sweep_points()
    if not points:
        _run_bundle(config, out, jobs)
        return out
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for point in points:
        sub = config.at_point(point)
        total = _run_bundle(sub, out / _point_name(point), jobs)
        rows.append({**{k: point.get(k, getattr(sub.decode, k)) for k in ("w", "alpha", "K", "L")},
                     "scheduler_kind": sub.decode.scheduler_kind, **total})
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    _dump({"engine_version": __version__, "config": config.to_dict(),
           "config_hash": config.config_hash(),
           "points": [_point_name(p) for p in points]}, out / "sweep_manifest.json")
    return out


def _load_bundle(path) -> tuple[ExperimentConfig, ThroughputReport, dict]:
    path = Path(path)
    manifest_path = path / MANIFEST
    if not manifest_path.is_file():
        raise EmptyBundleError(f"{path} has no {MANIFEST}")
    manifest = json.loads(manifest_path.read_text())
    cfg = parse_config(manifest)
    report = ThroughputReport.from_dict(json.loads((path / "throughput.json").read_text()))
    return cfg, report, manifest


def compare_runs(bundles: Sequence, baseline, out_dir=None, stream=None) -> list[dict]:
    """Tabulate proxy speedups of each bundle against ``baseline``."""
    stream = stream or sys.stdout
    base_cfg, base_report, _ = _load_bundle(baseline)
    key = comparability_key(base_cfg)
    rows = []
    for label, path in [("baseline", baseline)] + [(None, b) for b in bundles]:
        cfg, report, _ = _load_bundle(path)
        if comparability_key(cfg) != key:
            diff = sorted(k for k, v in comparability_key(cfg).items() if key.get(k) != v)
            raise IncomparableBundlesError(f"{path} differs from baseline in {diff}")
        s = speedup(report, base_report)
        rows.append({
            "bundle": label or Path(path).name,
            "scheduler_kind": cfg.decode.scheduler_kind,
            "non_eos_tokens": report.non_eos_tokens,
            "query_tokens": report.query_tokens,
            "attention_pairs": report.attention_pairs,
            "speedup_tps_q": s.tps_q,
            "speedup_tps_a": s.tps_a,
            "query_reduction": s.query_reduction,
        })
    out = Path(out_dir or os.environ.get("STREAMDEC_OUT") or ".")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    stream.write(format_table(rows))
    return rows


def format_table(rows: list[dict]) -> str:
    def cell(v):
        return f"{v:.3f}x" if isinstance(v, float) else str(v)

    header = list(rows[0])
    body = [[cell(r[h]) for h in header] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"


def _bundle_traces(bundle) -> list:
    bundle = Path(bundle)
    if not bundle.is_dir():
        raise EmptyBundleError(f"{bundle} is not a directory")
    files = sorted(bundle.rglob("trace.jsonl"))
    if not files:
        raise EmptyBundleError(f"no trace files under {bundle}")
    trace = []
    for f in files:
        trace.extend(read_trace_jsonl(f))
    return trace


def analyze_traces(bundle, kind: str, out_dir=None, stream=None) -> Path:
    stream = stream or sys.stdout
    trace = _bundle_traces(bundle)
    out = Path(out_dir) if out_dir else Path(bundle)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "confidence":
        rows = summarize_confidence(trace)
        path = out / "confidence_summary.csv"
        write_rows_csv(rows, path, ConfidenceRow)
        for block, ok in monotone_blocks(rows).items():
            stream.write(f"block {block}: mean confidence {'non-decreasing' if ok else 'NOT monotone'}\n")
    elif kind == "attention":
        rows = summarize_attention(trace)
        path = out / "attention_summary.csv"
        write_rows_csv(rows, path, AttentionRow)
        worst = max(abs(r.prefix + r.current + r.suffix - 1.0) for r in rows)
        stream.write(f"{len(rows)} rows; max |row sum - 1| = {worst:.2e}\n")
    else:
        raise ConfigInvalidError("kind", f"must be 'confidence' or 'attention', got {kind!r}")
    return path


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamdec", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", help="experiment JSON (default: shipped default config)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int, help="override decode.seed")
    run.add_argument("--jobs", type=int, default=1, help="parallel repetition workers")

    cmp_ = sub.add_parser("compare", help="compare run bundles against a baseline")
    cmp_.add_argument("bundles", nargs="+")
    cmp_.add_argument("--baseline", required=True)
    cmp_.add_argument("--out", help="directory for comparison.csv")

    an = sub.add_parser("analyze", help="summarise traces of a bundle")
    an.add_argument("bundle")
    an.add_argument("--kind", choices=("confidence", "attention"), required=True)
    an.add_argument("--out", help="directory for the summary CSV (default: the bundle)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config) if args.config else default_config()
            if args.seed is not None:
                cfg = cfg.with_seed(args.seed)
            out = run_experiment(cfg, args.out, jobs=args.jobs)
            print(out)
        elif args.command == "compare":
            compare_runs(args.bundles, args.baseline, args.out)
        else:
            path = analyze_traces(args.bundle, args.kind, args.out)
            print(path)
    except ConfigInvalidError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IncomparableBundlesError, NoAttentionDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPARABLE
    except (EmptyBundleError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StreamDecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
