"""Command line interface.

Exit codes: 0 success, 1 validation/conflict/unknown-entity errors, 2 I/O
errors. All subcommands that print reports accept --format structured for
machine-readable JSON identical to the HTTP API's data payloads.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics, reports
from .exceptions import BladeQCError
from .store import InspectionStore

DEFAULT_DATA_DIR = "./bladeqc-data"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bladeqc", description="Blade inspection QC toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_data_dir(p):
        p.add_argument("--data-dir", default=DEFAULT_DATA_DIR, help="journal directory")

    def add_format(p):
        p.add_argument("--format", choices=["tabular", "structured"], default="tabular")

    p = sub.add_parser("ingest", help="ingest a job manifest")
    p.add_argument("manifest", help="manifest JSON file")
    add_data_dir(p)
    p.add_argument("--control-ratio", type=float, default=0.8)
    p.add_argument("--salt", default="")
    p.add_argument("--actor", default="cli")
    add_format(p)

    p = sub.add_parser("predictions", help="ingest a prediction file and generate clues")
    p.add_argument("file", help="prediction JSON file")
    add_data_dir(p)
    p.add_argument("--score-threshold", type=float, default=0.5)
    p.add_argument("--actor", default="model-adapter")
    add_format(p)

    p = sub.add_parser("clues", help="list the clues of an image")
    p.add_argument("image", help="image id")
    add_data_dir(p)
    add_format(p)

    p = sub.add_parser("eval", help="compute damage recall/precision for an eval file")
    p.add_argument("file", help="eval JSON file: {images: [...]} or a bare list")
    p.add_argument("--iou-threshold", type=float, default=metrics.DEFAULT_IOU_THRESHOLD)
    add_format(p)

    p = sub.add_parser("report", help="production dashboard reports")
    rsub = p.add_subparsers(dest="report_kind", required=True, parser_class=_Parser)
    pc = rsub.add_parser("conversion")
    pc.add_argument("--job", action="append", default=None, help="restrict to job id (repeatable)")
    add_data_dir(pc)
    add_format(pc)
    pp = rsub.add_parser("productivity")
    pp.add_argument("--arm", choices=["control", "treatment"], required=True)
    add_data_dir(pp)
    add_format(pp)
    pa = rsub.add_parser("comparison")
    add_data_dir(pa)
    add_format(pa)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    add_data_dir(p)
    p.add_argument("--ui-dir", default=None, help="static review UI assets to mount at /ui")

    p = sub.add_parser("replay", help="rebuild state from a journal file or directory")
    p.add_argument("journal", help="journal .jsonl file or a data directory")
    add_format(p)

    return parser


def _load_store(data_dir: str) -> InspectionStore:
    path = Path(data_dir)
    if path.is_dir() and any(path.glob("job-*.jsonl")):
        return InspectionStore.load(path)
    return InspectionStore(data_dir=path)


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_ingest(args) -> int:
    store = _load_store(args.data_dir)
    store.control_ratio = args.control_ratio
    store.salt = args.salt
    job = store.ingest_job(_read_json(args.manifest), actor=args.actor)
    if args.format == "structured":
        print(json.dumps(job.to_wire(), indent=2, sort_keys=True))
    else:
        print(f"job {job.job_id}: {len(job.image_ids)} images, arm={job.arm.value}")
    return 0


def _cmd_predictions(args) -> int:
    store = _load_store(args.data_dir)
    clues = store.ingest_predictions(
        _read_json(args.file), score_threshold=args.score_threshold, actor=args.actor
    )
    if args.format == "structured":
        print(json.dumps([c.to_wire() for c in clues], indent=2, sort_keys=True))
    else:
        print(f"{len(clues)} clues generated")
    return 0


def _cmd_clues(args) -> int:
    store = _load_store(args.data_dir)
    clues = store.clues_for(args.image)
    if args.format == "structured":
        print(json.dumps([c.to_wire() for c in clues], indent=2, sort_keys=True))
    else:
        for c in clues:
            print(f"{c.id}  score={c.score:.3f}  status={c.status.value}")
        print(f"{len(clues)} clues")
    return 0


def _cmd_eval(args) -> int:
    payload = _read_json(args.file)
    wire_images = payload["images"] if isinstance(payload, dict) else payload
    images = [metrics.EvalImage.from_wire(obj) for obj in wire_images]
    report = metrics.evaluate_dataset(images, args.iou_threshold)
    if args.format == "structured":
        print(json.dumps(report.to_wire(), indent=2, sort_keys=True))
    else:
        print(report.format_text())
    return 0


def _cmd_report(args) -> int:
    store = _load_store(args.data_dir)
    if args.report_kind == "conversion":
        report = reports.conversion_table(store, job_ids=args.job)
    elif args.report_kind == "productivity":
        report = reports.productivity_report(store, args.arm)
    else:
        report = reports.arm_comparison(store)
    print(reports.export_report(report, format=args.format))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_replay(args) -> int:
    path = Path(args.journal)
    if path.is_dir():
        store = InspectionStore.load(path)
    else:
        store = InspectionStore.replay_journal_file(path)
    n_events = sum(len(j) for j in store.journals.values())
    if args.format == "structured":
        print(
            json.dumps(
                {
                    "events": n_events,
                    "jobs": len(store.jobs),
                    "images": len(store.images),
                    "state_digest": store.state_digest(),
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(f"replayed {n_events} events, {len(store.jobs)} jobs, {len(store.images)} images")
        print(f"state digest: {store.state_digest()}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "predictions": _cmd_predictions,
    "clues": _cmd_clues,
    "eval": _cmd_eval,
    "report": _cmd_report,
    "serve": _cmd_serve,
    "replay": _cmd_replay,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except BladeQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
