"""Command-line surface: forecast, benchmark, inspect.

Configuration comes from flags plus an optional key=value file (flags win).
Exit codes: 0 success, 1 usage, 2 load/ingestion failure, 3 runtime domain
error.  Identical configuration and inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import eval as evaluation
from . import imaging
from .errors import ConfigError, IngestionError, LoadError, VisionTSError
from .mae_infer import load_model
from .periodicity import Frequency, PeriodChoice, PeriodSource, candidate_periods, select_period
from .pipeline import MaeReconstructor, mae_forecaster
from .series import CsvSchema, SplitSpec, parse_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LOAD = 2
EXIT_RUNTIME = 3

_DEFAULT_SPLIT = "0.7,0.1,0.2"


def _read_config_file(path: str) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment, keys match flag names."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip().strip('"')
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visionts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value file supplying defaults for any flag")
        p.add_argument("--weights", help="tensor archive with pre-trained weights")
        p.add_argument("--data", help="input CSV (wide layout, optional 'date' column)")
        p.add_argument("--context-length", type=int, help="look-back window L")
        p.add_argument("--period", default="auto", help="seasonal period P, or 'auto'")
        p.add_argument("--frequency", default="OTHER", help="sampling frequency tag, e.g. H, 15T")
        p.add_argument("--r", type=float, default=0.4, help="normalization constant in (0,1]")
        p.add_argument("--c", type=float, default=0.4, help="alignment constant in (0,1]")
        p.add_argument("--strict", action="store_true", help="64-bit accumulation (debugging)")

    forecast = sub.add_parser("forecast", help="forecast H steps past the end of the data")
    common(forecast)
    forecast.add_argument("--horizons", default="96", help="forecast length (single integer)")
    forecast.add_argument("--out", default="forecast.csv", help="output CSV path")

    bench = sub.add_parser("benchmark", help="zero-shot evaluation over the test split")
    common(bench)
    bench.add_argument("--horizons", default="96,192,336,720", help="comma-separated horizons")
    bench.add_argument("--split", default=_DEFAULT_SPLIT, help="ratios 'a,b,c' or boundaries 't1:t2:t3'")
    bench.add_argument("--baselines", default="seasonal_naive,seasonal_avg",
                       help="comma-separated baseline names, or 'none'")
    bench.add_argument("--report", default="report.json", help="output report path")

    inspect = sub.add_parser("inspect", help="dump codec images for one window as PGM")
    common(inspect)
    inspect.add_argument("--horizons", default="96", help="forecast length (single integer)")
    inspect.add_argument("--variable", type=int, default=0, help="variable index")
    inspect.add_argument("--origin", type=int, default=-1,
                         help="global index where the forecast starts (-1 = end of data)")
    inspect.add_argument("--out", default=".", help="output directory for PGM files")
    return parser


def _option_types(parser: argparse.ArgumentParser, command: str) -> dict[str, type | None]:
    """dest -> declared type for the given subcommand's options."""
    types: dict[str, type | None] = {}
    for action in parser._actions:  # noqa: SLF001 - argparse offers no public walk
        if isinstance(action, argparse._SubParsersAction):
            for action_sub in action.choices[command]._actions:
                types[action_sub.dest] = action_sub.type  # type: ignore[assignment]
    return types


def _apply_config_file(args: argparse.Namespace, argv: list[str], parser: argparse.ArgumentParser) -> None:
    if not args.config:
        return
    defaults = _read_config_file(args.config)
    types = _option_types(parser, args.command)
    explicit = {arg.lstrip("-").replace("-", "_").split("=")[0] for arg in argv if arg.startswith("--")}
    for key, value in defaults.items():
        if key not in vars(args) or key in explicit:
            continue
        if isinstance(getattr(args, key), bool):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
            continue
        caster = types.get(key)
        try:
            setattr(args, key, caster(value) if caster is not None else value)
        except ValueError:
            raise ConfigError(f"config value {key}={value!r} is not a valid {caster.__name__}") from None


def _parse_horizons(text: str) -> tuple[int, ...]:
    try:
        horizons = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"cannot parse horizons {text!r}") from None
    if not horizons:
        raise ConfigError("at least one horizon is required")
    return horizons


def _parse_split(text: str) -> SplitSpec:
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"boundaries need three values, got {text!r}")
        return SplitSpec.from_boundaries(*parts)
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"ratios need three values, got {text!r}")
    return SplitSpec.from_ratios(*parts)


def _resolve_period(args, frequency: Frequency, validation_loss=None) -> PeriodChoice:
    text = str(args.period).strip().lower()
    if text != "auto":
        try:
            return PeriodChoice(int(text), PeriodSource.FORCED)
        except ValueError:
            raise ConfigError(f"--period must be an integer or 'auto', got {args.period!r}") from None
    candidates = candidate_periods(frequency)
    if validation_loss is None:
        return PeriodChoice(candidates[0], PeriodSource.FREQUENCY_TABLE)
    return select_period(candidates, validation_loss)


def _require(args, *names: str) -> None:
    missing = [n for n in names if not getattr(args, n.replace("-", "_"), None)]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _format_value(v: float) -> str:
    return repr(float(v))


def cmd_forecast(args) -> int:
    _require(args, "weights", "data", "context-length")
    model = load_model(args.weights)
    frequency = Frequency.parse(args.frequency)
    frame = parse_csv(args.data, CsvSchema(frequency=frequency))
    horizon = _parse_horizons(args.horizons)
    if len(horizon) != 1:
        raise ConfigError("forecast takes a single horizon")
    choice = _resolve_period(args, frequency)
    forecaster = mae_forecaster(
        model, choice.period, target_std=args.r, visible_scale=args.c, strict=args.strict
    )
    length = args.context_length
    if frame.num_rows < length:
        raise ConfigError(f"data has {frame.num_rows} rows, context needs {length}")
    contexts = frame.values[-length:].T  # (M, L)
    forecasts = forecaster.forecast_batch(contexts, horizon[0])
    out = Path(args.out)
    with out.open("w", encoding="utf-8", newline="") as fh:
        for name, row in zip(frame.variable_names, forecasts):
            fh.write(",".join([name] + [_format_value(v) for v in row]) + "\n")
    print(f"wrote {out} ({frame.num_variables} variables, horizon {horizon[0]}, period "
          f"{choice.period} [{choice.source.value}])")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    _require(args, "weights", "data", "context-length")
    model = load_model(args.weights)
    frequency = Frequency.parse(args.frequency)
    frame = parse_csv(args.data, CsvSchema(frequency=frequency))
    horizons = _parse_horizons(args.horizons)
    split_spec = _parse_split(args.split)
    baselines = () if args.baselines.strip().lower() == "none" else tuple(
        name.strip() for name in args.baselines.split(",") if name.strip()
    )

    def validation_loss(period: int) -> float:
        cfg = _val_config(args, frame, split_spec, period, horizons)
        candidate = mae_forecaster(model, period, target_std=args.r,
                                   visible_scale=args.c, strict=args.strict)
        report = evaluation.run_benchmark(frame, cfg, candidate, baselines=())
        return report.aggregates["avg_over_horizons"][candidate.name]["mse"]

    choice = _resolve_period(args, frequency,
                             validation_loss if str(args.period).lower() == "auto" else None)
    config = evaluation.BenchmarkConfig(
        dataset=Path(args.data).stem,
        context_length=args.context_length,
        horizons=horizons,
        period=choice.period,
        split=split_spec,
        target_std=args.r,
        visible_scale=args.c,
    )
    forecaster = mae_forecaster(model, choice.period, target_std=args.r,
                                visible_scale=args.c, strict=args.strict)
    report = evaluation.run_benchmark(frame, config, forecaster, baselines=baselines)
    report.metadata["period_source"] = choice.source.value
    text = report.to_json()
    Path(args.report).write_text(text + "\n", encoding="utf-8")
    for row in report.rows:
        print(f"{row.dataset} H={row.horizon} {row.method}: "
              f"mse={row.mse:.6f} mae={row.mae:.6f} windows={row.window_count}")
    print(f"wrote {args.report}")
    return EXIT_OK


def _val_config(args, frame, split_spec: SplitSpec, period: int, horizons) -> "evaluation.BenchmarkConfig":
    """Score a candidate period on the validation region (val treated as test)."""
    t1, t2, _ = split_spec.resolve(frame.num_rows)
    return evaluation.BenchmarkConfig(
        dataset="validation",
        context_length=args.context_length,
        horizons=(min(horizons),),
        period=period,
        split=SplitSpec.from_boundaries(t1, t1, t2),
        target_std=args.r,
        visible_scale=args.c,
    )


def cmd_inspect(args) -> int:
    _require(args, "weights", "data", "context-length")
    model = load_model(args.weights)
    frequency = Frequency.parse(args.frequency)
    frame = parse_csv(args.data, CsvSchema(frequency=frequency))
    horizon = _parse_horizons(args.horizons)
    if len(horizon) != 1:
        raise ConfigError("inspect takes a single horizon")
    choice = _resolve_period(args, frequency)
    length = args.context_length

    origin = args.origin if args.origin >= 0 else frame.num_rows
    if not (0 <= args.variable < frame.num_variables):
        raise VisionTSError(f"variable {args.variable} out of range (0..{frame.num_variables - 1})")
    if not (length <= origin <= frame.num_rows):
        raise VisionTSError(
            f"window origin {origin} out of range: need context of {length} rows "
            f"inside 0..{frame.num_rows}"
        )
    context = frame.values[origin - length : origin, args.variable]
    plan = imaging.plan_for(length, horizon[0], choice.period,
                            target_std=args.r, visible_scale=args.c,
                            grid_side=model.manifest.grid_side,
                            patch_size=model.manifest.patch_size)
    matrix = imaging.segment(context, plan.period)
    norm, stats = imaging.normalize(matrix, plan.target_std)
    visible, mask = imaging.align(norm, plan)
    canvas = np.zeros((imaging.IMAGE_SIDE, imaging.IMAGE_SIDE), dtype=np.float32)
    canvas[:, : plan.visible_width] = visible.pixels
    reconstructed = MaeReconstructor(model, strict=args.strict)(canvas, mask)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"window_v{args.variable}_t{origin}"
    mask_image = np.kron(mask.grid.astype(np.float32), np.ones((plan.patch_size, plan.patch_size),
                                                               dtype=np.float32))
    files = {
        f"{stem}_input.pgm": imaging.to_pgm(norm),
        f"{stem}_visible.pgm": imaging.to_pgm(visible),
        f"{stem}_mask.pgm": imaging.to_pgm(mask_image),
        f"{stem}_reconstruction.pgm": imaging.to_pgm(reconstructed),
    }
    for name, blob in files.items():
        (out_dir / name).write_bytes(blob)
        print(f"wrote {out_dir / name}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        _apply_config_file(args, argv, parser)
        if args.command == "forecast":
            return cmd_forecast(args)
        if args.command == "benchmark":
            return cmd_benchmark(args)
        return cmd_inspect(args)
    except (LoadError, IngestionError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VisionTSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
