"""Command-line entry point.

Subcommands::

    driftcast fetch           --config c.toml [--start D --end D] [--offline]
    driftcast replay-run      --config c.toml [--out DIR] [--seed N]
    driftcast live-run        --config c.toml [--out DIR] [--seed N]
    driftcast drift-check     --model m.npz --replay data.csv [--window H]
    driftcast horizon-inspect --config c.toml [--at TIMESTAMP] [--city NAME]
    driftcast report          --log log.ndjson [--out DIR]

Common flags (accepted by every subcommand): ``--config PATH``,
``--out DIR``, ``--seed N``, ``--offline``, ``--watts W`` (default 200),
``--verbose``.  ``--seed`` and ``--watts`` override the config file.

stdout carries data and tables only; diagnostics go to stderr.  Exit
codes: 0 success; 1 runtime failure (any partial event log has already
been flushed); 2 configuration or usage error; 3 data source
unreachable; 4 insufficient data for the requested computation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .drift import DriftConfig, build_drift_window, check_drift
from .errors import (
    DriftcastError,
    InsufficientData,
    InvalidArgument,
    NotFound,
    ParseError,
    SourceUnavailable,
)
from .evaluate import BootstrapConfig, build_metric_rows, render_report
from .frames import GridSpec, format_timestamp, parse_timestamp
from .horizon import curve_to_csv
from .ingest import (
    SourceSpec,
    fetch_hourly,
    load_cache,
    load_replay,
    save_cache,
    save_replay,
)
from .models.io import load_model
from .schedule import (
    ExperimentLog,
    prepare_feature_frame,
    run_experiment,
    variance_horizon_search,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_SOURCE = 3
EXIT_DATA = 4

log = logging.getLogger("driftcast")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config")
    common.add_argument(
        "--out", metavar="DIR", default=".", help="output directory (default: .)"
    )
    common.add_argument(
        "--seed", type=int, metavar="N", help="override the config's master seed"
    )
    common.add_argument(
        "--offline", action="store_true", help="use only cached data; no network"
    )
    common.add_argument(
        "--watts",
        type=float,
        metavar="W",
        help="override the power rating used for energy accounting (default 200)",
    )
    common.add_argument(
        "--verbose", action="store_true", help="debug diagnostics on stderr"
    )

    parser = argparse.ArgumentParser(
        prog="driftcast",
        description="Cost-aware adaptive forecasting over hourly weather grids.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "fetch", parents=[common], help="download hourly data into replay CSVs"
    )
    p.add_argument("--start", metavar="YYYY-MM-DD", help="first day (inclusive)")
    p.add_argument("--end", metavar="YYYY-MM-DD", help="last day (inclusive)")

    sub.add_parser(
        "replay-run",
        parents=[common],
        help="run the experiment against recorded replay files",
    )
    sub.add_parser(
        "live-run", parents=[common], help="run the experiment against the live API"
    )

    p = sub.add_parser(
        "drift-check",
        parents=[common],
        help="evaluate one saved model's drift verdict on recent data",
    )
    p.add_argument("--model", metavar="PATH", required=True, help="saved .npz model")
    p.add_argument("--replay", metavar="PATH", required=True, help="replay CSV")
    p.add_argument(
        "--window", type=int, default=None, metavar="H", help="sliding window hours"
    )
    p.add_argument(
        "--threshold",
        type=float,
        default=None,
        metavar="F",
        help="relative loss-increase trigger level",
    )

    p = sub.add_parser(
        "horizon-inspect",
        parents=[common],
        help="run the training-window search once and export its ratio curve",
    )
    p.add_argument(
        "--at", metavar="TIMESTAMP", help="pretend now is this instant (RFC 3339)"
    )
    p.add_argument("--city", metavar="NAME", help="city to inspect (default: first)")
    p.add_argument(
        "--threshold",
        type=float,
        default=None,
        metavar="F",
        help="override the plateau threshold (inf stops at the smallest window)",
    )

    p = sub.add_parser(
        "report", parents=[common], help="re-render metrics from an existing log"
    )
    p.add_argument("--log", metavar="PATH", required=True, help="ndjson event log")

    return parser


def _require_config(args) -> ExperimentConfig:
    if not args.config:
        raise InvalidArgument(f"{args.subcommand} requires --config")
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.watts is not None:
        config = replace(config, watts=args.watts)
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _city_source(config: ExperimentConfig, city) -> SourceSpec:
    ing = config.ingest
    return SourceSpec(
        mode="live",
        variables=ing.variables,
        grid=GridSpec(
            center=(city.latitude, city.longitude),
            span_km=ing.span_km,
            points_per_side=ing.points_per_side,
        ),
        api_base=ing.api_base,
        history_days=ing.history_days,
        reference=ing.reference,
    )


def cmd_fetch(args) -> int:
    config = _require_config(args)
    out = Path(args.out)
    cache_dir = out / "cache"
    if args.end:
        end = np.datetime64(args.end, "D")
    else:
        end = np.datetime64("now", "D")
    if args.start:
        start = np.datetime64(args.start, "D")
    else:
        start = end - np.timedelta64(config.ingest.history_days, "D")
    date_range = (str(start), str(end))

    batches = []
    for city in config.cities:
        spec = _city_source(config, city)
        try:
            batch = load_cache(spec, date_range, cache_dir)
            log.debug("cache hit for %s %s", city.name, date_range)
        except NotFound:
            if args.offline:
                raise SourceUnavailable(
                    f"--offline set and no cached data for city {city.name!r} "
                    f"over {date_range[0]}..{date_range[1]}"
                )
            batch = fetch_hourly(spec, date_range)
            save_cache(batch, spec, date_range, cache_dir)
        batches.append((city, batch))

    # All sources answered; only now touch the replay files (no partial output).
    out.mkdir(parents=True, exist_ok=True)
    for city, batch in batches:
        path = out / f"{city.name}.csv"
        save_replay(batch, path)
        print(f"{path}\t{batch.merged.n_rows} rows\t{batch.merged.n_columns} columns")
    return EXIT_OK


def _run(args, mode: str) -> int:
    config = _require_config(args)
    if mode == "live" and args.offline:
        raise InvalidArgument("live-run cannot be combined with --offline")
    config = replace(config, clock=replace(config.clock, mode=mode))
    if mode == "replay":
        for city in config.cities:
            if not os.path.exists(city.replay_path):
                raise InvalidArgument(
                    f"replay file not found for city {city.name!r}: "
                    f"{city.replay_path}"
                )
    out = _out_dir(args)
    log_path = out / "log.ndjson"
    log.debug("running %s experiment; log at %s", mode, log_path)
    run_log = run_experiment(config, log_path)
    rows = build_metric_rows(run_log, BootstrapConfig(seed=config.seed))
    _, table = render_report(rows, out / "metrics.csv", out / "report.txt")
    sys.stdout.write(table)
    log.info("wrote %s, %s, %s", log_path, out / "metrics.csv", out / "report.txt")
    return EXIT_OK


def cmd_replay_run(args) -> int:
    return _run(args, "replay")


def cmd_live_run(args) -> int:
    return _run(args, "live")


def cmd_drift_check(args) -> int:
    model = load_model(args.model)
    if model.scaler is None or model.target is None:
        raise InvalidArgument(
            f"model {args.model} carries no scaler/target and cannot be "
            "drift-checked standalone"
        )
    frame = load_replay(args.replay).merged
    prepared = prepare_feature_frame(frame)
    defaults = DriftConfig()
    config = DriftConfig(
        window_hours=args.window if args.window is not None else defaults.window_hours,
        loss_increase_threshold=(
            args.threshold
            if args.threshold is not None
            else defaults.loss_increase_threshold
        ),
    )
    if model.state.input_width is not None:
        lookback = model.state.input_width // len(model.scaler.columns)
    else:
        lookback = 24
    window = build_drift_window(
        prepared,
        config,
        model.scaler,
        model.target,
        lookback=lookback,
        horizon=model.horizon,
    )
    verdict = check_drift(model, window, config)
    print(
        json.dumps(
            {
                "checked_at": format_timestamp(verdict.checked_at),
                "baseline_loss": verdict.baseline_loss,
                "current_loss": verdict.current_loss,
                "relative_increase": verdict.relative_increase,
                "drifted": verdict.drifted,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_horizon_inspect(args) -> int:
    config = _require_config(args)
    if args.city:
        matches = [c for c in config.cities if c.name == args.city]
        if not matches:
            raise InvalidArgument(f"no city named {args.city!r} in the config")
        city = matches[0]
    else:
        city = config.cities[0]
    if not city.replay_path or not os.path.exists(city.replay_path):
        raise InvalidArgument(
            f"horizon-inspect needs a replay file for city {city.name!r}"
        )
    frame = load_replay(city.replay_path).merged
    if args.at:
        at = parse_timestamp(args.at)
        visible_rows = int(np.sum(frame.timestamps <= at))
        if visible_rows == 0:
            raise InsufficientData(
                f"no data at or before {args.at} in {city.replay_path}"
            )
        frame = frame.head(visible_rows)
    prepared = prepare_feature_frame(frame)
    search = config.horizon_search
    if args.threshold is not None:
        search = replace(search, threshold=args.threshold)
    result = variance_horizon_search(prepared, config.training, search)
    out = _out_dir(args)
    curve_path = out / "horizon_curve.csv"
    curve_to_csv(result, curve_path)
    print(
        json.dumps(
            {
                "city": city.name,
                "at": format_timestamp(prepared.timestamps[-1]),
                "selected_window": result.selected_window,
                "stopped_by": result.stopped_by,
                "final_ratio": result.final_ratio,
                "evaluated_windows": int(result.curve.shape[0]),
                "curve_csv": str(curve_path),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_report(args) -> int:
    run_log = ExperimentLog.read(args.log)
    rows = build_metric_rows(
        run_log, BootstrapConfig(seed=args.seed if args.seed is not None else 0)
    )
    out = _out_dir(args)
    _, table = render_report(rows, out / "metrics.csv", out / "report.txt")
    sys.stdout.write(table)
    return EXIT_OK


_DISPATCH = {
    "fetch": cmd_fetch,
    "replay-run": cmd_replay_run,
    "live-run": cmd_live_run,
    "drift-check": cmd_drift_check,
    "horizon-inspect": cmd_horizon_inspect,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _DISPATCH[args.subcommand](args)
    except (InvalidArgument, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DriftcastError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
