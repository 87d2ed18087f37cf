"""Batch CLI: kb ingest / review run / review refine / eval / serve.

Exit codes: 0 success, 2 configuration problem, 3 pipeline stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, SrkitError, StageError
from .mesh import ingest_descriptors
from .pipeline import Pipeline, PipelineConfig
from .sessions import evaluate, refine_and_rerun, session_to_dict
from .server import serve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kb", help="knowledge-base utilities")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    ingest = kb_sub.add_parser("ingest", help="ingest and validate a descriptor source")
    ingest.add_argument("--source", required=True, help="MeSH XML or fixture TSV path")

    review = sub.add_parser("review", help="run or refine review sessions")
    review_sub = review.add_subparsers(dest="review_command", required=True)
    run = review_sub.add_parser("run", help="run the pipeline for a question")
    run.add_argument("--question", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="write the session JSON here as well")
    refine = review_sub.add_parser("refine", help="apply edits and re-run")
    refine.add_argument("--session", required=True)
    refine.add_argument("--config", required=True)
    refine.add_argument(
        "--edits",
        required=True,
        help="path to a JSON file holding a list of edit objects, or '-' for stdin",
    )

    ev = sub.add_parser("eval", help="score a session against sentinel pmids")
    ev.add_argument("--session", required=True)
    ev.add_argument("--config", required=True)
    ev.add_argument("--sentinels", required=True, help="comma-separated pmids")
    ev.add_argument("--k", type=int, default=10)

    srv = sub.add_parser("serve", help="serve the HTTP API")
    srv.add_argument("--config", required=True)
    srv.add_argument("--bind", default="127.0.0.1:8080")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"pipeline error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except SrkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE


def _run(args: argparse.Namespace) -> int:
    if args.command == "kb":
        kb = ingest_descriptors(args.source)
        print(f"ingested {len(kb)} descriptors ({kb.skipped} skipped)")
        print(f"tree numbers indexed: {len(kb.tree_index)}")
        return EXIT_OK

    if args.command == "review" and args.review_command == "run":
        config = PipelineConfig.from_file(args.config)
        session = Pipeline(config).run(args.question)
        payload = json.dumps(session_to_dict(session), indent=2, ensure_ascii=False)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(payload + "\n")
        print(f"session {session.session_id} rev {session.revision}")
        print(f"  seeds: {[s.display_name for s in session.context.seeds]}")
        print(f"  queries: {len(session.queries)}  hits: {len(session.hits)}")
        return EXIT_OK

    if args.command == "review" and args.review_command == "refine":
        config = PipelineConfig.from_file(args.config)
        pipeline = Pipeline(config)
        raw = sys.stdin.read() if args.edits == "-" else open(args.edits).read()
        edits = json.loads(raw)
        session = refine_and_rerun(pipeline.store, args.session, edits, pipeline)
        print(f"session {session.session_id} now rev {session.revision}")
        return EXIT_OK

    if args.command == "eval":
        config = PipelineConfig.from_file(args.config)
        pipeline = Pipeline(config)
        session = pipeline.store.load_session(args.session)
        sentinels = {p.strip() for p in args.sentinels.split(",") if p.strip()}
        metrics = evaluate(session.hits, sentinels, args.k)
        print(json.dumps(metrics.to_dict(), indent=2))
        return EXIT_OK

    if args.command == "serve":
        config = PipelineConfig.from_file(args.config)
        service = serve(config, bind=args.bind)
        print(f"listening on {service.url}")
        service.serve_forever()
        return EXIT_OK

    raise ConfigError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
