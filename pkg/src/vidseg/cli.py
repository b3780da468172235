"""Command-line interface.

Commands::

    vidseg run          full pipeline over an input root
    vidseg eval         score predictions against ground truth
    vidseg synth        write a synthetic case in the ingest layout
    vidseg cluster-dump premask + clustering only, as JSON

Exit codes: 0 success, 2 configuration error, 3 ingestion error,
4 pipeline failure. Failures emit a JSON diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import ingest, metrics, pipeline
from .errors import ConfigurationError, IngestionError, PipelineError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("--input", required=True, help="sequence dir or root of sequences")
    run.add_argument("--output", required=True, help="output root for masks + summary")
    _add_config_flags(run)

    ev = sub.add_parser("eval", help="evaluate predictions against ground truth")
    ev.add_argument("--input", required=True, help="prediction root")
    ev.add_argument("--gt", required=True, help="ground-truth root (ingest layout)")
    ev.add_argument("--output", required=True, help="directory for report.json/.csv")
    ev.add_argument("--config", help="JSON config file")
    ev.add_argument("--recall-mode", choices=metrics.RECALL_MODES)
    ev.add_argument("--tau-recall", type=float)
    ev.add_argument("--exclude-endpoints", action="store_true", default=None)

    sy = sub.add_parser("synth", help="emit a synthetic case in the ingest layout")
    sy.add_argument("--output", required=True, help="root to write the sequence under")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--n-frames", type=int, default=40)
    sy.add_argument("--width", type=int, default=96)
    sy.add_argument("--height", type=int, default=96)
    sy.add_argument("--drop-fraction", type=float, default=0.0)
    sy.add_argument("--descriptor-dim", type=int, default=64)
    sy.add_argument("--name", default="synth")

    cd = sub.add_parser("cluster-dump", help="dump the cluster assignment as JSON")
    cd.add_argument("--input", required=True, help="sequence directory")
    cd.add_argument("--output", help="JSON file (default: stdout)")
    _add_config_flags(cd)
    return parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--tau", type=float, help="proposal binarization threshold")
    p.add_argument("--min-frac", type=float)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--p", type=int, help="donor frame count for fills")
    p.add_argument("--gamma", type=float, help="pairwise strength for fills")
    p.add_argument("--recall-mode", choices=metrics.RECALL_MODES)
    p.add_argument("--exclude-endpoints", action="store_true", default=None)


_FLAG_FIELDS = {
    "seed": "seed",
    "jobs": "jobs",
    "k": "k",
    "tau": "tau_binarize",
    "min_frac": "min_frac",
    "bandwidth": "bandwidth",
    "p": "p",
    "recall_mode": "recall_mode",
    "tau_recall": "tau_recall",
    "exclude_endpoints": "exclude_endpoints",
}


def _config_from_args(args: argparse.Namespace) -> pipeline.PipelineConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    for flag, fld in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[fld] = value
    gamma = getattr(args, "gamma", None)
    if gamma is not None:
        data.setdefault("grabcut", {})
        if not isinstance(data["grabcut"], dict):
            raise ConfigurationError("'grabcut' config section must be an object")
        data["grabcut"]["gamma"] = gamma
    return pipeline.PipelineConfig.from_mapping(data)


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    summary = pipeline.run_pipeline(cfg, args.input, args.output)
    print(json.dumps({k: summary[k] for k in ("seed", "failures")}))
    if summary["failures"]:
        for entry in summary["sequences"]:
            if entry["error"] is not None:
                print(json.dumps(entry["error"]), file=sys.stderr)
        return 4
    return 0


def _cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    report = pipeline.evaluate(args.input, args.gt, cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_report_json(
        report, out / "report.json", tau=cfg.tau_recall, recall_mode=cfg.recall_mode
    )
    metrics.write_report_csv(report, out / "report.csv", tau=cfg.tau_recall)
    print(
        json.dumps(
            {
                "j_mean": metrics.j_mean(report),
                "j_recall": metrics.j_recall(report, cfg.tau_recall, cfg.recall_mode),
                "j_decay": metrics.j_decay(report),
            }
        )
    )
    return 0


def _cmd_synth(args) -> int:
    cfg = ingest.SynthConfig(
        n_frames=args.n_frames,
        width=args.width,
        height=args.height,
        drop_fraction=args.drop_fraction,
        descriptor_dim=args.descriptor_dim,
        name=args.name,
    )
    case = ingest.generate_synthetic_case(cfg, seed=args.seed)
    seq_dir = ingest.write_synth_case(case, args.output)
    print(json.dumps({"sequence": str(seq_dir), "dropped_frames": sorted(case.dropped_frames)}))
    return 0


def _cmd_cluster_dump(args) -> int:
    cfg = _config_from_args(args)
    dump = pipeline.cluster_dump(args.input, cfg)
    text = json.dumps(dump, indent=1)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "cluster-dump": _cmd_cluster_dump,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(json.dumps({"error": "configuration", "message": str(e)}), file=sys.stderr)
        return 2
    except IngestionError as e:
        print(json.dumps({"error": "ingestion", "message": str(e)}), file=sys.stderr)
        return 3
    except PipelineError as e:
        print(json.dumps(e.diagnostic()), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
