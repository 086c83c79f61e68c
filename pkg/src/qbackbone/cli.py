"""Command-line entry point: run scenarios, sweeps, pass tables, link budgets.

Exit codes: 0 success, 1 parse/validation errors, 2 I/O errors.  All
diagnostics go to standard error; data goes to files or standard output.
CSV numbers use a decimal point and no grouping, so outputs for a fixed
(config, seed) are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
from typing import Iterable, Sequence

from . import engine, scenario
from .geometry import slant_range_km, visibility_window
from .linkbudget import attenuation_profile, fiber_transmittance

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

TIMESERIES_COLUMNS = (
    "bin_start_s",
    "pairs_arrived",
    "pairs_stored",
    "pairs_dropped",
    "qubits_delivered",
    "frames_completed",
)
FRAMES_COLUMNS = (
    "frame_id",
    "created_at_s",
    "egress_at_s",
    "payload_qubits",
    "survivors_at_egress",
    "ingress_access_lost",
    "attempts",
    "dropped_for_no_pair",
    "successes",
    "teleport_failures",
    "pairs_consumed",
    "consumed_start",
    "consumed_stop",
    "delivered",
    "egress_access_lost",
    "delivered_at_s",
)
SUMMARY_COLUMNS = (
    "seed",
    "duration_s",
    "frames_generated",
    "frames_processed",
    "frames_completed",
    "pairs_arrived",
    "pairs_stored",
    "pairs_dropped",
    "qubits_delivered",
)
SWEEP_COLUMNS = ("label", "memory_capacity", "seed", "total_qubits_delivered")
PASSES_COLUMNS = (
    "satellite",
    "altitude_km",
    "peak_elevation_a_deg",
    "peak_elevation_b_deg",
    "min_range_a_km",
    "min_range_b_km",
    "window_start_s",
    "window_end_s",
    "window_duration_s",
)
LINKBUDGET_COLUMNS = (
    "time_s",
    "elev_a_deg",
    "elev_b_deg",
    "range_a_km",
    "range_b_km",
    "eta_a",
    "eta_b",
    "p_coincidence",
)


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip form, also for numpy scalars
    return str(value)


def _write_rows(fh, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _load(args: argparse.Namespace) -> scenario.ScenarioConfig:
    """Config from --config (or defaults) with seed precedence --seed > env > file."""
    if args.config is not None:
        config = scenario.load_config_file(args.config)
    else:
        config = scenario.default_config()
    seed = scenario.seed_from_env()
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if seed is not None:
        if seed < 0:
            raise scenario.ConfigError(f"seed must be >= 0: {seed}")
        config = dataclasses.replace(config, seed=seed)
    return config


def _frame_rows(frames: Iterable[engine.FrameRecord]) -> Iterable[Sequence[object]]:
    for f in frames:
        yield (
            f.frame_id,
            f.created_at_s,
            f.egress_at_s,
            f.payload_qubits,
            f.survivors_at_egress,
            f.payload_qubits - f.survivors_at_egress,
            f.attempts,
            f.dropped_for_no_pair,
            f.successes,
            f.attempts - f.successes,
            f.pairs_consumed,
            f.consumed_start,
            f.consumed_stop,
            f.delivered,
            None if f.delivered is None else f.successes - f.delivered,
            f.delivered_at_s,
        )


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    result = engine.run(config)
    try:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "timeseries.csv"), "w", encoding="utf-8", newline="") as fh:
            _write_rows(
                fh,
                TIMESERIES_COLUMNS,
                (
                    (
                        b.bin_start_s,
                        b.pairs_arrived,
                        b.pairs_stored,
                        b.pairs_dropped,
                        b.qubits_delivered,
                        b.frames_completed,
                    )
                    for b in result.bins
                ),
            )
        with open(os.path.join(args.out, "frames.csv"), "w", encoding="utf-8", newline="") as fh:
            _write_rows(fh, FRAMES_COLUMNS, _frame_rows(result.frames))
        with open(os.path.join(args.out, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
            t = result.totals
            _write_rows(
                fh,
                SUMMARY_COLUMNS,
                [
                    (
                        result.seed,
                        config.duration_s,
                        t.frames_generated,
                        t.frames_processed,
                        t.frames_completed,
                        t.pairs_arrived,
                        t.pairs_stored,
                        t.pairs_dropped,
                        t.qubits_delivered,
                    )
                ],
            )
    except OSError as exc:
        print(f"error: cannot write outputs under {args.out!r}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote timeseries.csv, frames.csv, summary.csv to {args.out}", file=sys.stderr)
    return EXIT_OK


def _parse_memory_list(raw: str) -> list[int | None]:
    values: list[int | None] = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() in ("unlimited", "none", "inf"):
            values.append(None)
            continue
        try:
            m = int(token)
        except ValueError as exc:
            raise scenario.ConfigError(f"invalid memory size {token!r}") from exc
        if m < 1:
            raise scenario.ConfigError("capacity must be >= 1 or unlimited")
        values.append(m)
    if not values:
        raise scenario.ConfigError("memory list must not be empty")
    return values


def _isolated_source_runs(
    config: scenario.ScenarioConfig,
) -> list[tuple[str, scenario.ScenarioConfig]]:
    """One (label, config) per source, each run with only that source active."""
    runs = []
    for source in config.sources:
        if source.kind == "satellite-pass":
            policy = scenario.Policy("satellite-only", source.source_id)
        else:
            policy = scenario.Policy("fiber-only")
        runs.append(
            (
                source.source_id,
                dataclasses.replace(config, sources=(source,), policy=policy),
            )
        )
    return runs


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    memory_sizes = _parse_memory_list(args.memory)
    if args.seeds_per_point < 1:
        raise scenario.ConfigError("--seeds-per-point must be >= 1")

    if args.policy is not None:
        base = dataclasses.replace(config, policy=scenario.Policy(args.policy, args.source))
        labeled = [(args.policy, base)]
    else:
        labeled = _isolated_source_runs(config)
        if args.source is not None:
            labeled = [(label, cfg) for label, cfg in labeled if label == args.source]
            if not labeled:
                raise scenario.ConfigError(f"unknown source {args.source!r}")

    rows = []
    for label, base in sorted(labeled, key=lambda item: item[0]):
        for memory in sorted(memory_sizes, key=lambda m: (m is None, m)):
            for k in range(args.seeds_per_point):
                cfg = dataclasses.replace(
                    base, memory_capacity=memory, seed=config.seed + k
                )
                result = engine.run(cfg, keep_frames=False)
                rows.append(
                    (
                        label,
                        "unlimited" if memory is None else memory,
                        cfg.seed,
                        result.totals.qubits_delivered,
                    )
                )
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            _write_rows(fh, SWEEP_COLUMNS, rows)
    except OSError as exc:
        print(f"error: cannot write {args.out!r}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(rows)} sweep points to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_passes(args: argparse.Namespace) -> int:
    config = _load(args)
    if not 0.0 < args.min_elevation <= 90.0:
        raise scenario.ConfigError(
            f"--min-elevation must be in (0, 90]: {args.min_elevation}"
        )
    rows = []
    for source in config.sources:
        if source.kind != "satellite-pass":
            continue
        model = source.pass_model
        pass_a = model.station_passes[source.station_a]
        pass_b = model.station_passes[source.station_b]
        window = visibility_window(
            model, args.min_elevation, (source.station_a, source.station_b)
        )
        rows.append(
            (
                model.satellite_name,
                model.altitude_km,
                pass_a.peak_elevation_deg,
                pass_b.peak_elevation_deg,
                slant_range_km(pass_a.peak_elevation_deg, model.altitude_km, model.earth_radius_km),
                slant_range_km(pass_b.peak_elevation_deg, model.altitude_km, model.earth_radius_km),
                None if window is None else window.start_s,
                None if window is None else window.end_s,
                None if window is None else window.duration_s,
            )
        )
    if not rows:
        print("note: no satellite sources in configuration", file=sys.stderr)
    _write_rows(sys.stdout, PASSES_COLUMNS, rows)
    return EXIT_OK


def _cmd_linkbudget(args: argparse.Namespace) -> int:
    config = _load(args)
    matches = [s for s in config.sources if s.source_id == args.source]
    if not matches:
        raise scenario.ConfigError(f"unknown source {args.source!r}")
    source = matches[0]
    if source.kind == "ground-fiber":
        eta_a = fiber_transmittance(source.arm_a)
        eta_b = fiber_transmittance(source.arm_b)
        rows = [
            (
                0.0,
                None,
                None,
                source.arm_a.length_km,
                source.arm_b.length_km,
                eta_a,
                eta_b,
                eta_a * eta_b,
            )
        ]
    else:
        samples = attenuation_profile(
            source.pass_model,
            (source.station_a, source.station_b),
            source.link_params,
            step_s=config.channel_step_s,
        )
        rows = [
            (
                s.time_s,
                None if math.isnan(s.elevation_a_deg) else s.elevation_a_deg,
                None if math.isnan(s.elevation_b_deg) else s.elevation_b_deg,
                None if math.isnan(s.range_a_km) else s.range_a_km,
                None if math.isnan(s.range_b_km) else s.range_b_km,
                s.eta_a,
                s.eta_b,
                s.coincidence_probability,
            )
            for s in samples
        ]
    _write_rows(sys.stdout, LINKBUDGET_COLUMNS, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbackbone",
        description="Simulate quantum dataframe transmission over an entanglement backbone.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run one scenario and write CSV telemetry.")
    simulate.add_argument("--config", help="Scenario JSON (defaults when omitted).")
    simulate.add_argument("--out", required=True, help="Output directory for the CSV files.")
    simulate.add_argument("--seed", type=int, help="Master seed override.")
    simulate.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="Sweep memory sizes over seeds and sources.")
    sweep.add_argument("--config", help="Scenario JSON (defaults when omitted).")
    sweep.add_argument("--out", required=True, help="Output CSV file.")
    sweep.add_argument("--seed", type=int, help="Base seed override.")
    sweep.add_argument(
        "--memory",
        required=True,
        help="Comma-separated memory sizes, e.g. '1,10,100,unlimited'.",
    )
    sweep.add_argument("--seeds-per-point", type=int, default=1, help="Seeds per point.")
    sweep.add_argument("--source", help="Restrict to one source id.")
    sweep.add_argument(
        "--policy",
        choices=scenario.POLICY_KINDS,
        help="Sweep this policy over the full source list instead of per-source isolation.",
    )
    sweep.set_defaults(func=_cmd_sweep)

    passes = sub.add_parser("passes", help="Print the satellite pass table as CSV.")
    passes.add_argument("--config", help="Scenario JSON (defaults when omitted).")
    passes.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    passes.add_argument(
        "--min-elevation", type=float, default=20.0, help="Elevation mask in degrees."
    )
    passes.set_defaults(func=_cmd_passes)

    linkbudget = sub.add_parser(
        "linkbudget", help="Print one source's attenuation profile as CSV."
    )
    linkbudget.add_argument("--config", help="Scenario JSON (defaults when omitted).")
    linkbudget.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    linkbudget.add_argument("--source", required=True, help="Source id to profile.")
    linkbudget.set_defaults(func=_cmd_linkbudget)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except scenario.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the pipe; not our error
        try:
            sys.stdout.close()
        except OSError:
            pass
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
