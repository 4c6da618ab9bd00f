"""Command-line surface: bench, fit, optimize, simulate, report.

Subcommands compose through files only (CSV records, JSON models), so a
whole study is reproducible as a shell pipeline.  Outputs are written
atomically (temp file + rename) and every subcommand is deterministic
given --seed; --no-timestamps makes bench output byte-stable for CI.

Exit codes: 0 success, 1 error, 2 partial benchmark grid.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import modelfit, optimizer
from .core import NodeConfig, StreamSpec
from .device import (
    DeviceProfile,
    default_profile,
    load_profile,
    parse_policy,
)
from .modelfit import IncompleteGridError
from .orchestrator import (
    CampaignAborted,
    CampaignSpec,
    FormatError,
    load_records,
    loopback_transport,
    persist_records,
    run_campaign,
)

PROFILE_DIR_ENV = "EDGEGOV_PROFILE_DIR"


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _atomic_write(path: Path, write_fn) -> None:
    """Write via a sibling temp file and rename, so failures leave no partial."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from exc
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _resolve_profile(spec: str, noise_sd: float | None) -> DeviceProfile:
    if spec == "builtin":
        profile = default_profile()
    else:
        path = Path(spec)
        if not path.exists():
            search_dir = os.environ.get(PROFILE_DIR_ENV)
            if search_dir:
                candidate = Path(search_dir) / spec
                if candidate.exists():
                    path = candidate
        if not path.exists():
            raise CliError(f"profile not found: {spec}")
        try:
            profile = load_profile(path)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot load profile {path}: {exc}") from exc
    if noise_sd is not None:
        profile = profile.with_noise(noise_sd)
    return profile


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_bench(args) -> int:
    profile = _resolve_profile(args.profile, args.noise_sd)
    configs = args.configs if args.configs else list(profile.ladder)
    loads = args.loads if args.loads else list(range(10, 101, 10))
    try:
        spec = CampaignSpec(
            configs=tuple(NodeConfig(f) for f in configs),
            loads=tuple(loads),
            stress_duration=args.duration,
            repetitions=args.reps,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    transport = loopback_transport(profile)
    partial = False
    try:
        records = run_campaign(
            transport, spec, record_timestamps=not args.no_timestamps
        )
    except CampaignAborted as exc:
        print(f"warning: {exc}", file=sys.stderr)
        records = exc.partial
        partial = True
    if len(records) < spec.expected_records():
        partial = True
    _atomic_write(Path(args.out), lambda tmp: persist_records(records, tmp))
    print(f"wrote {len(records)} records to {args.out}")
    return 2 if partial else 0


def cmd_fit(args) -> int:
    try:
        records = load_records(args.records)
        model = modelfit.fit(records)
    except (OSError, FormatError, IncompleteGridError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    for note in model.warnings:
        print(f"warning: {note}", file=sys.stderr)
    _atomic_write(Path(args.out), lambda tmp: modelfit.save_model(model, tmp))
    print(f"wrote model to {args.out}")
    return 0


def _load_model(path: str):
    try:
        return modelfit.load_model(path)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load model {path}: {exc}") from exc


def cmd_optimize(args) -> int:
    model = _load_model(args.model)
    if args.sweep_d or args.sweep_k:
        if not (args.sweep_d and args.sweep_k):
            raise CliError("--sweep-d and --sweep-k must be given together")
        results = optimizer.sweep(model, args.sweep_d, args.sweep_k)
    else:
        if args.d is None or args.k is None:
            raise CliError("need --d and --k (or --sweep-d/--sweep-k)")
        try:
            results = [optimizer.optimize(model, StreamSpec(d=args.d, k=args.k))]
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    _atomic_write(Path(args.out), lambda tmp: optimizer.sweep_to_csv(results, tmp))
    print(f"wrote {len(results)} result rows to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    profile = _resolve_profile(args.profile, noise_sd=None)
    try:
        policies = [parse_policy(p) for p in args.policy]
        stream = StreamSpec(d=args.d, k=args.k)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    cmp = optimizer.compare_governors(
        profile, stream, args.tokens, policies, queue_capacity=args.queue_capacity
    )
    doc = optimizer.comparison_to_dict(cmp)
    _atomic_write(
        Path(args.out),
        lambda tmp: Path(tmp).write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        ),
    )
    print(f"wrote governor comparison to {args.out}")
    return 0


def cmd_report(args) -> int:
    model = _load_model(args.model)
    try:
        grid = modelfit.efficiency(model)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    def write(tmp):
        lines = ["freq_khz,load_pct,efficiency_norm"]
        for i, f in enumerate(grid.ladder):
            for j, u in enumerate(grid.loads):
                lines.append(f"{f},{u},{grid.values[i, j]:.17g}")
        Path(tmp).write_text("\n".join(lines) + "\n", encoding="utf-8")

    _atomic_write(Path(args.out), write)
    print(f"wrote efficiency heatmap to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgegov",
        description="Benchmark, model and optimize DVFS stream processing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run a benchmark campaign over the loopback SUT")
    p.add_argument("--profile", default="builtin", help="builtin or path to profile JSON")
    p.add_argument("--configs", type=_int_list, default=None,
                   help="comma-separated frequencies in kHz (default: whole ladder)")
    p.add_argument("--loads", type=_int_list, default=None,
                   help="comma-separated load percentages (default: 10..100)")
    p.add_argument("--duration", type=float, default=15.0, help="stress duration per cell [s]")
    p.add_argument("--reps", type=int, default=1, help="repetitions per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=None,
                   help="override the profile's measurement noise")
    p.add_argument("--no-timestamps", action="store_true",
                   help="write zero timestamps for reproducible output")
    p.add_argument("--out", required=True, help="output records CSV")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit", help="fit a power model from benchmark records")
    p.add_argument("--records", required=True, help="input records CSV")
    p.add_argument("--out", required=True, help="output model JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="energy-optimal frequency for a stream")
    p.add_argument("--model", required=True, help="fitted model JSON")
    p.add_argument("--d", type=float, default=None, help="token interval [s]")
    p.add_argument("--k", type=float, default=None, help="work per token [bogo-ops]")
    p.add_argument("--sweep-d", type=_float_list, default=None,
                   help="comma-separated d axis for a sweep")
    p.add_argument("--sweep-k", type=_float_list, default=None,
                   help="comma-separated k axis for a sweep")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="simulate governors on a stream")
    p.add_argument("--profile", default="builtin")
    p.add_argument("--policy", action="append", required=True,
                   help="policy spec, repeatable: performance, powersave, "
                        "userspace:KHZ, ondemand[:UP], conservative[:UP,DOWN], "
                        "schedutil[:HEADROOM]")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--tokens", type=int, default=1000)
    p.add_argument("--queue-capacity", type=int, default=0)
    p.add_argument("--out", required=True, help="output comparison JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="emit the normalized efficiency heatmap")
    p.add_argument("--model", required=True, help="fitted model JSON")
    p.add_argument("--out", required=True, help="output heatmap CSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
