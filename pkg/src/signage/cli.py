"""Command-line entry point: analytic sweeps, simulations and codec file operations.

Results go to stdout (or ``--out``); diagnostics go to stderr. Exit status is
0 on success, 1 on a usage error and 2 on a data or validation error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import jsonschema

from signage import codec, framing
from signage.des import METRICS, Policy, SimParams, replicate, simulate
from signage.errors import InvalidConfig, SignageError
from signage.ppm import load_frame_ppm, store_frame_ppm
from signage.queueing import CloudSystemConfig, DisplayQueueConfig, EvaluationMode, split_rate, sweep_rates

DEFAULT_CONFIG = {
    "displays": [
        {"channels": 10, "arrival_rate": 0.5},
        {"channels": 10, "arrival_rate": 0.3},
        {"channels": 10, "arrival_rate": 0.2},
    ],
    "service_mean_s": 10.0,
    "policy": "dynamic",
    "queue_capacity": 100,
    "seed": 1,
    "total_arrivals": 20000,
    "replications": 10,
    "warmup_fraction": 0.1,
    "mode": "corrected",
    "sweep": {"totals": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "ratio": [5, 3, 2]},
}

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "displays": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["channels"],
                "properties": {
                    "channels": {"type": "integer", "minimum": 1},
                    "arrival_rate": {"type": "number", "minimum": 0},
                    "service_mean_s": _POSITIVE,
                },
            },
        },
        "service_mean_s": _POSITIVE,
        "policy": {"enum": ["static", "dynamic"]},
        "queue_capacity": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "unbounded"}]},
        "seed": {"type": "integer", "minimum": 0},
        "total_arrivals": {"type": "integer", "minimum": 1},
        "replications": {"type": "integer", "minimum": 1},
        "warmup_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "mode": {"enum": ["verbatim", "corrected"]},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "totals": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "ratio": {"type": "array", "minItems": 1, "items": _POSITIVE},
            },
        },
    },
}

SIM_COLUMNS = ["scenario", "total_rate", "policy"] + list(METRICS) + [f"{m}_ci" for m in METRICS]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def load_config(path: Optional[str]) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        with open(path, encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfig(f"{path}: invalid JSON: {exc}") from None
        try:
            jsonschema.validate(user, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise InvalidConfig(f"{path}: {where}: {exc.message}") from None
        if "sweep" in user:
            config["sweep"].update(user.pop("sweep"))
        config.update(user)
    if len(config["sweep"]["ratio"]) != len(config["displays"]):
        raise InvalidConfig("sweep.ratio must have one entry per display")
    return config


def system_from(config: dict) -> CloudSystemConfig:
    default_mean = float(config["service_mean_s"])
    return CloudSystemConfig(
        tuple(
            DisplayQueueConfig(
                i + 1,
                d["channels"],
                float(d.get("arrival_rate", 0.0)),
                1.0 / float(d.get("service_mean_s", default_mean)),
            )
            for i, d in enumerate(config["displays"])
        )
    )


def params_from(config: dict) -> SimParams:
    cap = config["queue_capacity"]
    return SimParams(
        seed=config["seed"],
        total_arrivals=config["total_arrivals"],
        queue_capacity=None if cap == "unbounded" else int(cap),
        warmup_fraction=float(config["warmup_fraction"]),
    )


def _sim_rows(scenario, total, sys, policy, params, replications):
    policy = Policy.parse(policy)
    if replications >= 2:
        report = replicate(sys, policy, params, replications)
        means = [report[m].mean for m in METRICS]
        cis = [report[m].half_width for m in METRICS]
    else:
        run = simulate(sys, policy, params)
        means = [getattr(run, m) for m in METRICS]
        cis = [None] * len(METRICS)
    return [[scenario, float(total), policy.value] + means + cis]


def _render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_analyze(args) -> None:
    config = load_config(args.config)
    if args.mode:
        config["mode"] = args.mode
    totals = _parse_floats(args.totals) if args.totals else config["sweep"]["totals"]
    template = system_from(config)
    rows = sweep_rates(template, totals, config["sweep"]["ratio"], EvaluationMode(config["mode"]))
    header = ["scenario", "total_rate", "mode"] + [f"lambda_{i + 1}" for i in range(template.size)]
    header += ["rejection", "utilization", "stable"]
    body = [
        [f"analytic-{k + 1}", r.total_arrival_rate, r.mode.value, *r.per_display_rates,
         r.rejection, r.utilization, "yes" if r.stable else "unstable"]
        for k, r in enumerate(rows)
    ]
    _emit(_render_csv(header, body), args.out)


def cmd_simulate(args) -> None:
    config = load_config(args.config)
    policy = args.policy or config["policy"]
    sys_ = system_from(config)
    rows = _sim_rows("simulate", sys_.total_arrival_rate, sys_, policy, params_from(config), config["replications"])
    _emit(_render_csv(SIM_COLUMNS, rows), args.out)


def cmd_sweep(args) -> None:
    config = load_config(args.config)
    totals = _parse_floats(args.totals) if args.totals else config["sweep"]["totals"]
    policies = ["static", "dynamic"] if args.compare else [args.policy or config["policy"]]
    template = system_from(config)
    params = params_from(config)
    rows = []
    for k, total in enumerate(totals):
        sys_ = template.with_rates(split_rate(total, config["sweep"]["ratio"]))
        for policy in policies:
            rows += _sim_rows(f"sweep-{k + 1}", total, sys_, policy, params, config["replications"])
    _emit(_render_csv(SIM_COLUMNS, rows), args.out)


def _profile(args) -> codec.ModulationProfile:
    deltas = _parse_floats(args.deltas)
    if len(deltas) != 3:
        raise UsageError("--deltas takes three integers r,g,b")
    return codec.ModulationProfile(*(int(d) for d in deltas), decode_threshold=args.threshold)


def _layout(args, frame: codec.Frame) -> codec.SegmentLayout:
    return codec.make_layout(frame.width, frame.height, args.rows, args.cols)


def _parse_bits(text: str) -> list[int]:
    if any(ch not in "01" for ch in text):
        raise UsageError("--bits must be a string of 0 and 1")
    return [int(ch) for ch in text]


def cmd_embed(args) -> None:
    ref = load_frame_ppm(args.reference)
    data = codec.embed_bits(ref, _parse_bits(args.bits), _layout(args, ref), _profile(args))
    store_frame_ppm(data, args.out)


def cmd_extract(args) -> None:
    ref, data = load_frame_ppm(args.reference), load_frame_ppm(args.data)
    bits = codec.extract_bits(ref, data, _layout(args, ref), _profile(args))
    print("".join(map(str, bits)))


def cmd_send(args) -> None:
    refs = [load_frame_ppm(p) for p in args.reference]
    layout = _layout(args, refs[0])
    bits = framing.frame_payload(args.text)
    blocks = -(-len(bits) // layout.count)
    # cycle the given reference images to cover the payload
    pool = [refs[k % len(refs)] for k in range(blocks)]
    frames = codec.encode_stream(pool, bits, layout, _profile(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        store_frame_ppm(frame, out / f"frame_{k:05d}.ppm")
    print(len(frames), file=sys.stderr)


def _frame_paths(items: Sequence[str]) -> list[str]:
    paths: list[str] = []
    for item in items:
        if os.path.isdir(item):
            paths += sorted(str(p) for p in Path(item).glob("*.ppm"))
        else:
            paths.append(item)
    return paths


def cmd_recv(args) -> None:
    frames = [load_frame_ppm(p) for p in _frame_paths(args.frames)]
    if not frames:
        raise InvalidConfig("no frames to decode")
    bits = codec.decode_stream(frames, _layout(args, frames[0]), _profile(args))
    print(framing.deframe_payload(bits))


def cmd_histogram(args) -> None:
    hist = codec.histogram(load_frame_ppm(args.frame))
    rows = [[b, int(hist.red[b]), int(hist.green[b]), int(hist.blue[b])] for b in range(256)]
    _emit(_render_csv(["bin", "red", "green", "blue"], rows), args.out)


def cmd_throughput(args) -> None:
    print(fmt(float(codec.stream_throughput(args.fps, args.bits))))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_opts(p, sweep=False):
        p.add_argument("--config", help="JSON run configuration (defaults to the reference scenario)")
        p.add_argument("--out", help="write CSV here instead of stdout")
        if sweep:
            p.add_argument("--totals", help="comma-separated total arrival rates")

    p = sub.add_parser("analyze", help="closed-form rejection and utilization sweep")
    config_opts(p, sweep=True)
    p.add_argument("--mode", choices=["verbatim", "corrected"])
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="simulate the configured arrival rates")
    config_opts(p)
    p.add_argument("--policy", choices=["static", "dynamic"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate over the configured total rates")
    config_opts(p, sweep=True)
    p.add_argument("--policy", choices=["static", "dynamic"])
    p.add_argument("--compare", action="store_true", help="run both policies")
    p.set_defaults(func=cmd_sweep)

    def codec_opts(p):
        p.add_argument("--rows", type=int, default=2)
        p.add_argument("--cols", type=int, default=4)
        p.add_argument("--deltas", default="2,0,4", help="intensity steps r,g,b")
        p.add_argument("--threshold", type=float, default=None)

    p = sub.add_parser("embed", help="embed one bit per segment into a PPM frame")
    p.add_argument("--reference", required=True)
    p.add_argument("--bits", required=True)
    p.add_argument("--out", required=True)
    codec_opts(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="decode the bits of a reference/data PPM pair")
    p.add_argument("--reference", required=True)
    p.add_argument("--data", required=True)
    codec_opts(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("send", help="frame a link and write the PPM frame sequence")
    p.add_argument("--text", required=True)
    p.add_argument("--reference", required=True, nargs="+")
    p.add_argument("--out-dir", required=True)
    codec_opts(p)
    p.set_defaults(func=cmd_send)

    p = sub.add_parser("recv", help="decode a PPM frame sequence back to the link text")
    p.add_argument("frames", nargs="+", help="frame files or a directory of *.ppm")
    codec_opts(p)
    p.set_defaults(func=cmd_recv)

    p = sub.add_parser("histogram", help="256-bin RGB histogram of a PPM frame")
    p.add_argument("frame")
    p.add_argument("--out")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("throughput", help="payload bit rate for a frame rate")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--bits", type=int, required=True)
    p.set_defaults(func=cmd_throughput)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SignageError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
