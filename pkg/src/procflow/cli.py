"""Command-line entry point: ``procflow <stage> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import DependencyError, ProcflowError
from .stages import SAMPLING_STAGES, STAGE_DEPS, StageFlags, run_stage
from .workspace import Workspace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procflow",
        description="Procedural cooking-video analysis pipeline over a workspace directory.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGE_DEPS:
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("--workspace", default=".", help="workspace root directory")
        sp.add_argument("--config", default=None, help="config file (default: <workspace>/procflow.json)")
        sp.add_argument("--seed", type=int, default=None, required=stage in SAMPLING_STAGES,
                        help="RNG seed (mandatory for sampling stages)")
        sp.add_argument("--force", action="store_true",
                        help="proceed despite a config hash mismatch on prerequisites")
        sp.add_argument("--json-errors", action="store_true",
                        help="emit machine-readable JSON errors on stderr")
        if stage == "compare":
            sp.add_argument("--max-pairs", type=int, default=None, help="cap on pairs per action class")
            sp.add_argument("--k-frames", dest="k", type=int, default=None, help="frames per sub-action")
        if stage == "retrieve":
            sp.add_argument("--query", required=True, help="free-text action query")
            sp.add_argument("--k", type=int, default=5, help="number of top labels to return")
        if stage == "qa-gen":
            sp.add_argument("--tier", default="all", choices=["all", "easy", "medium", "hard"],
                            help="generate only one difficulty tier")
        if stage == "qa-eval":
            sp.add_argument("--answers", default=None, help="model answers JSONL file")
            sp.add_argument("--manifest", default=None, help="QA manifest JSONL (default: derived)")
        if stage == "review-serve":
            sp.add_argument("--host", default="127.0.0.1")
            sp.add_argument("--port", type=int, default=8731)
            sp.add_argument("--ui-dir", default=None, help="static directory with the review UI build")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    json_errors = getattr(args, "json_errors", False)
    try:
        ws = Workspace(args.workspace, config_path=args.config)
        if args.stage == "review-serve":
            return _serve(ws, args)
        flags = StageFlags(
            seed=getattr(args, "seed", None),
            force=getattr(args, "force", False),
            max_pairs=getattr(args, "max_pairs", None),
            k=getattr(args, "k", None),
            query=getattr(args, "query", None),
            answers=getattr(args, "answers", None),
            tier=getattr(args, "tier", "all"),
            manifest=getattr(args, "manifest", None),
        )
        artifacts = run_stage(args.stage, ws, flags)
        print(
            json.dumps(
                {
                    "stage": args.stage,
                    "config_hash": ws.config_hash,
                    "artifacts": sorted(str(p.relative_to(ws.root)) for p in artifacts),
                },
                sort_keys=True,
            )
        )
        return 0
    except ProcflowError as exc:
        _report_error(args.stage, exc, json_errors)
        return 1


def _report_error(stage: str, exc: ProcflowError, json_errors: bool) -> None:
    if json_errors:
        payload = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, DependencyError):
            payload["missing_stage"] = exc.missing_stage
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"procflow {stage}: error: {exc}", file=sys.stderr)


def _serve(ws: Workspace, args) -> int:
    import uvicorn

    from .review_api import app_for_workspace
    from .stages import check_dependencies

    check_dependencies("review-serve", ws)
    app = app_for_workspace(ws.root, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
