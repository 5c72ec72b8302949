"""Command-line front end; a thin client over the HTTP service.

Commands operate on local paths, ship bytes through the service API
(in-process by default, remote with ``--server``), and write the result
back to disk.  Option precedence is built-in defaults, then a JSON config
file (``--config``), then explicit flags.

Exit status: 0 on success, 2 for usage errors (bad flags, missing
inputs), 1 for processing or service failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .client import ServiceClient, ServiceError

__all__ = ["dispatch", "main"]

_CONFIG_KEYS = {
    "grid",
    "clip_limit",
    "bins",
    "median_window",
    "scales",
    "beta",
    "c",
    "dark_vessels",
    "threshold",
    "jobs",
    "queue_depth",
    "gray_rescale",
    "eq6_verbatim",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veinview",
        description="NIR vessel enhancement: grayscale, CLAHE, median, vesselness, video pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--server", help="base URL of a running service (default: in-process)")
        p.add_argument("--config", help="JSON config file; flags override its values")

    p = sub.add_parser("gray", help="convert a PPM to the custom grayscale")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--gray-rescale", action="store_true", default=None,
                   help="rescale the darkened blend back to display range")
    p.add_argument("--eq6-verbatim", action="store_true", default=None,
                   help="legacy compatibility: blue-channel average uses green terms")

    p = sub.add_parser("clahe", help="contrast-limited adaptive histogram equalization")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--grid", help="tile grid, e.g. 8x8")
    p.add_argument("--clip-limit", type=float, help="multiple of the uniform bin height")
    p.add_argument("--bins", type=int, help="histogram bins (default 256)")

    p = sub.add_parser("median", help="median filter")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--median-window", type=int, help="odd window side length (default 5)")

    p = sub.add_parser("frangi", help="multiscale vesselness (tube rendering)")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--scales", help="comma-separated sigma list, e.g. 1,2,3")
    p.add_argument("--beta", type=float, help="blob sensitivity")
    p.add_argument("--c", help="background sensitivity, number or 'auto'")
    p.add_argument("--dark-vessels", action=argparse.BooleanOptionalAction, default=None,
                   help="vessels darker than surroundings (default true)")

    p = sub.add_parser("enhance", help="run the canonical enhancement recipe on one image")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=int, help="background brightness threshold")
    group.add_argument("--otsu", action="store_true", default=None,
                       help="derive the background threshold from the histogram (default)")
    p.add_argument("--median-window", type=int)
    p.add_argument("--clip-limit", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--gray-rescale", action="store_true", default=None)
    p.add_argument("--eq6-verbatim", action="store_true", default=None)

    p = sub.add_parser("video", help="run a pipeline over a YUV4MPEG2 stream")
    add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--pipeline", help="pipeline spec JSON file (default: canonical recipe)")
    p.add_argument("--jobs", type=int, help="worker threads (default from spec)")
    p.add_argument("--queue-depth", type=int, help="max in-flight frames")
    p.add_argument("--stats-out", help="write per-frame stats as JSON lines")

    p = sub.add_parser("bench", help="run a pipeline and report throughput")
    add_common(p)
    p.add_argument("input")
    p.add_argument("--pipeline", help="pipeline spec JSON file (default: canonical recipe)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--queue-depth", type=int)
    p.add_argument("--stats-out", help="write per-frame stats as JSON lines")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    config = json.loads(p.read_text())
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return config


class _Options:
    """defaults < config file < command-line flags."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, flag: str, default):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        if flag in self.config:
            return self.config[flag]
        return default

    def scales_csv(self) -> str | None:
        value = self.get("scales", None)
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)

    def threshold(self) -> str:
        if getattr(self.args, "otsu", None):
            return "otsu"
        value = self.get("threshold", "otsu")
        return str(value)


def _read_input(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    return p.read_bytes()


def _write_stats(path: str, stats: list[dict]) -> None:
    with open(path, "w") as fh:
        for record in stats:
            fh.write(json.dumps(record) + "\n")


def _load_pipeline_json(path: str | None) -> str | None:
    if not path:
        return None
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    return json.dumps(json.loads(p.read_text()))


def dispatch(argv: list[str] | None = None) -> int:
    """Parse arguments and run one command; returns the exit status."""
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        config = _load_config(args.config)
        opts = _Options(args, config)
        client = ServiceClient(base_url=args.server)

        if args.command == "gray":
            data = _read_input(args.input)
            out = client.gray(
                data,
                rescale=bool(opts.get("gray_rescale", False)),
                eq6_verbatim=bool(opts.get("eq6_verbatim", False)),
            )
            Path(args.output).write_bytes(out)
        elif args.command == "clahe":
            data = _read_input(args.input)
            out = client.clahe(
                data,
                grid=str(opts.get("grid", "8x8")),
                clip_limit=float(opts.get("clip_limit", 2.0)),
                bins=int(opts.get("bins", 256)),
            )
            Path(args.output).write_bytes(out)
        elif args.command == "median":
            data = _read_input(args.input)
            out = client.median(data, window=int(opts.get("median_window", 5)))
            Path(args.output).write_bytes(out)
        elif args.command == "frangi":
            data = _read_input(args.input)
            scales = opts.scales_csv() or "1,2,3,4,5,6,7,8"
            out = client.frangi(
                data,
                scales=scales,
                beta=float(opts.get("beta", 0.5)),
                c=str(opts.get("c", "auto")),
                dark_vessels=bool(opts.get("dark_vessels", True)),
            )
            Path(args.output).write_bytes(out)
        elif args.command == "enhance":
            data = _read_input(args.input)
            out = client.enhance(
                data,
                threshold=opts.threshold(),
                median_window=int(opts.get("median_window", 5)),
                clip_limit=float(opts.get("clip_limit", 2.0)),
                bins=int(opts.get("bins", 256)),
                rescale=bool(opts.get("gray_rescale", False)),
                eq6_verbatim=bool(opts.get("eq6_verbatim", False)),
            )
            Path(args.output).write_bytes(out)
        elif args.command == "video":
            data = _read_input(args.input)
            result = client.process_video(
                data,
                spec_json=_load_pipeline_json(args.pipeline),
                jobs=opts.get("jobs", None),
                queue_depth=opts.get("queue_depth", None),
            )
            if not result.get("video_b64"):
                raise ServiceError(500, "service returned no video payload")
            import base64

            Path(args.output).write_bytes(base64.b64decode(result["video_b64"]))
            if args.stats_out:
                _write_stats(args.stats_out, result["stats"])
        elif args.command == "bench":
            data = _read_input(args.input)
            result = client.bench(
                data,
                spec_json=_load_pipeline_json(args.pipeline),
                jobs=opts.get("jobs", None),
                queue_depth=opts.get("queue_depth", None),
            )
            stats = result.pop("stats")
            if args.stats_out:
                _write_stats(args.stats_out, stats)
            print(json.dumps(result, indent=2))
            print(f"fps: {result['fps']:.2f}")
        return 0
    except FileNotFoundError as exc:
        print(f"veinview: missing input: {exc}", file=sys.stderr)
        return 2
    except ServiceError as exc:
        print(f"veinview: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"veinview: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
