"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .corpus import SyntheticSpec, generate_synthetic, save_jsonl, validate_jsonl
from .errors import ConfigError, DataError, InvariantError
from .pipeline import (
    run_exp1,
    run_exp2,
    run_fit_topics,
    run_summarize,
    run_tau_sweep,
    write_json,
)
from .simgraph import export_graph, graph_from_json

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--input", help="corpus JSONL path")
    p.add_argument("--outdir", help="output directory")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--k", type=int, help="topic count")
    p.add_argument("--tau", type=float, help="similarity threshold for this command")
    p.add_argument("--top-words", type=int, help="terms per sub-graph label")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topicspan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a JSONL corpus against the schema")
    _add_common(p)
    p.add_argument("--strict", action="store_true", help="fail on any malformed line")

    p = sub.add_parser("summarize", help="per-community summary table")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    _add_common(p)
    p.add_argument("--spec", required=True, help="synthetic spec JSON file")

    p = sub.add_parser("fit-topics", help="fit and cache the topic model")
    _add_common(p)

    p = sub.add_parser("exp1", help="community centroid similarity graph")
    _add_common(p)

    p = sub.add_parser("exp2", help="semantic span similarity graphs and labels")
    _add_common(p)

    p = sub.add_parser("export-graph", help="re-export a stored graph JSON")
    _add_common(p)
    p.add_argument("--graph", required=True, help="graph.json produced by exp1/exp2")
    p.add_argument("--format", choices=["dot", "json"], default="dot")
    p.add_argument("--output", required=True, help="destination file")

    p = sub.add_parser("tau-sweep", help="component counts against the threshold")
    _add_common(p)
    p.add_argument("--level", choices=["community", "span"], default="span")
    p.add_argument("--taus", help="comma-separated thresholds (default 0.0..1.0 step 0.05)")
    return parser


def _config_from_args(args: argparse.Namespace, tau_field: str | None = None):
    overrides = {
        "input": getattr(args, "input", None),
        "output_dir": getattr(args, "outdir", None),
        "seed": getattr(args, "seed", None),
        "k": getattr(args, "k", None),
        "top_words": getattr(args, "top_words", None),
    }
    if tau_field is not None and getattr(args, "tau", None) is not None:
        overrides[tau_field] = args.tau
    return load_config(getattr(args, "config", None), overrides)


def _cmd_validate(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.input:
        raise ConfigError("validate needs --input")
    report = validate_jsonl(cfg.input)
    print(f"{report.path}: {report.n_valid} valid, {report.n_skipped} skipped")
    for community, count in sorted(report.community_counts.items()):
        print(f"  {community}: {count}")
    for problem in report.problems[:20]:
        print(f"  problem: {problem}")
    if report.n_valid == 0 or (args.strict and report.n_skipped):
        raise DataError(f"{report.path}: validation failed")
    return 0


def _cmd_summarize(args) -> int:
    cfg = _config_from_args(args)
    run_summarize(cfg)
    out = Path(cfg.output_dir)
    print((out / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"wrote {out / 'summary.json'}")
    return 0


def _cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    spec = SyntheticSpec.load(args.spec)
    corpus, truth = generate_synthetic(spec)
    out = Path(cfg.output_dir)
    save_jsonl(corpus, out / "corpus.jsonl")
    truth.save(out / "ground_truth.json")
    write_json(
        out / "synth_report.json",
        {
            "report": "synth",
            "spec": str(args.spec),
            "documents": len(corpus),
            "communities": {
                c: sum(1 for s in corpus if s.community == c) for c in corpus.communities
            },
            "corpus_fingerprint": corpus.fingerprint(),
        },
    )
    print(f"wrote {out / 'corpus.jsonl'} ({len(corpus)} documents)")
    return 0


def _cmd_fit_topics(args) -> int:
    cfg = _config_from_args(args)
    report = run_fit_topics(cfg)
    print(f"k={report['k']} V={report['vocabulary_size']} perplexity={report['perplexity']:.2f}")
    return 0


def _cmd_exp1(args) -> int:
    cfg = _config_from_args(args, tau_field="tau_exp1")
    run_exp1(cfg)
    print(f"wrote {Path(cfg.output_dir) / 'exp1'}")
    return 0


def _cmd_exp2(args) -> int:
    cfg = _config_from_args(args, tau_field="tau_all")
    run_exp2(cfg)
    print(f"wrote {Path(cfg.output_dir) / 'exp2'}")
    return 0


def _cmd_export_graph(args) -> int:
    path = Path(args.graph)
    if not path.exists():
        raise DataError(f"no such graph file: {path}")
    with open(path, encoding="utf-8") as fh:
        graph = graph_from_json(json.load(fh))
    export_graph(graph, None, args.output, format=args.format)
    print(f"wrote {args.output}")
    return 0


def _cmd_tau_sweep(args) -> int:
    cfg = _config_from_args(args)
    taus = None
    if args.taus:
        taus = [float(t) for t in args.taus.split(",") if t.strip()]
    run_tau_sweep(cfg, level=args.level, taus=taus)
    print(f"wrote {Path(cfg.output_dir) / 'tau_sweep.json'}")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "summarize": _cmd_summarize,
    "synth": _cmd_synth,
    "fit-topics": _cmd_fit_topics,
    "exp1": _cmd_exp1,
    "exp2": _cmd_exp2,
    "export-graph": _cmd_export_graph,
    "tau-sweep": _cmd_tau_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, Exception):  # anything else is an internal failure
        logger.exception("internal error")
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
