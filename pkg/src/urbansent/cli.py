"""Command line entry point.

One subcommand per pipeline stage plus ``run`` (everything in order) and
``curate`` (interactive lexicon session). Exit codes: 0 success, 1 invalid
configuration, 2 stage failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, ontology, pipeline
from .pipeline import ConfigError, StageError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, metavar="FILE", help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--out", "-o", default=None, metavar="DIR", help="override the output directory")


_STAGE_HELP = {
    "ingest": "load and validate the POI catalog and review corpus",
    "filter": "keep reviews matching the density lexicon; split sentences",
    "train": "grid-search and fit the review classifier",
    "classify": "label flagged reviews as density-related or not",
    "sentiment": "score density sentences and roll up per review",
    "aggregate": "aggregate review sentiment to POIs and block groups",
    "lsva": "rank salient words with their sentiment valence",
    "stats": "pairwise rank-sum tests across business sectors",
    "pls": "latent-component regression of block-group sentiment on factors",
    "report": "render figures from existing stage outputs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urbansent",
        description="Review-corpus sentiment analytics for urban density, from raw reviews to regression tables.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    run_parser = sub.add_parser("run", help="execute every stage in order")
    _add_common(run_parser)

    for name in pipeline.RUN_ORDER:
        stage_parser = sub.add_parser(name, help=_STAGE_HELP[name])
        _add_common(stage_parser)

    curate = sub.add_parser("curate", help="interactively grow the lexicon from corpus candidates")
    _add_common(curate)
    curate.add_argument("--page-size", type=int, default=10, help="candidates shown per page")
    curate.add_argument("--max-candidates", type=int, default=200, help="candidate pool size")
    curate.add_argument("--save", default=None, metavar="FILE", help="where to write the revised lexicon")
    curate.add_argument("--log", default=None, metavar="FILE", help="append the session transcript here")
    return parser


def _print_stage(name: str, entry: dict) -> None:
    rows = ", ".join(f"{k}={v}" for k, v in sorted(entry.get("rows_out", {}).items()))
    extra = f" ({rows})" if rows else ""
    warnings = len(entry.get("warnings", []))
    note = f", {warnings} warning(s)" if warnings else ""
    print(f"{name}: ok{extra}{note}")


def _curate(cfg: pipeline.RunConfig, args) -> int:
    out = Path(cfg.out)
    reviews = pipeline.reviews_from_artifact(out)
    lexicon = ontology.load_lexicon(cfg.lexicon or ontology.bundled_lexicon_path())
    revised = ontology.curate_session(
        reviews,
        lexicon,
        page_size=args.page_size,
        max_candidates=args.max_candidates,
        log_path=args.log,
    )
    target = Path(args.save) if args.save else out / "lexicon_curated.txt"
    lines = [f"{entry}  # {revised.provenance[entry]}" for entry in revised.entries]
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    added = len(revised.entries) - len(lexicon.entries)
    print(f"curate: ok ({len(revised.entries)} entries, {added} added) -> {target}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out}
    try:
        cfg = pipeline.load_run_config(args.config, overrides=overrides)
        if args.command == "run":
            manifest = pipeline.run_pipeline(cfg)
            for name in manifest["order"]:
                _print_stage(name, manifest["stages"][name])
            print(f"bundle written to {cfg.out}")
        elif args.command == "curate":
            return _curate(cfg, args)
        else:
            manifest = pipeline.execute(cfg, [args.command])
            _print_stage(args.command, manifest["stages"][args.command])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ontology.NonInteractiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
