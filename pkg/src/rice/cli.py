"""``rice`` command-line entry point.

Settings resolve as: command-line flag > JSON config file > built-in default.
The config file comes from ``--config`` or the ``RICE_CONFIG`` environment
variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import (
    DEFAULT_HARDWARE,
    DEFAULT_REGION,
    DataError,
    HardwareDB,
    HardwareSpec,
    LookupFailed,
    RegionDB,
    bundled_path,
    filter_unoptimized,
    load_leaderboard,
)
from .estimator import MODEL_FILES, EstimateRequest, MissingModelError, ModelBundle, estimate, rank_models
from .regression import ForestParams, ModelFormatError
from .training import DEFAULT_POLY_DEGREE, DEFAULT_SEED, save_bundle, train_from_files
from .validation import ValidationConfig, report_from_predictions, run_validation, run_validation_modes

logger = logging.getLogger("rice")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

CONFIG_ENV = "RICE_CONFIG"

DEFAULTS = {
    "models_dir": "models",
    "seed": DEFAULT_SEED,
    "degree": DEFAULT_POLY_DEGREE,
    "format": "table",
    "hardware_name": DEFAULT_HARDWARE,
    "region": DEFAULT_REGION,
    "utilization": None,
    "pue": None,
    "rci_g_per_kwh": None,
    "device_rounding": "ceil",
    "hardware_db": None,
    "rci_db": None,
    "encoding_csv": None,
    "per_token_csv": None,
    "min_device_csv": None,
}


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {val}")
    return val


def _candidate(text: str) -> tuple[str, float]:
    name, sep, params = text.rpartition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=PARAMS_B, got {text!r}")
    return name, _positive_float(params)


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys in {p}: {unknown}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    settings.update(load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


# -- helpers ------------------------------------------------------------------

def _emit(args_format: str, payload: dict, table: str) -> None:
    if args_format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(table)


def _databases(settings: dict) -> tuple[HardwareDB, RegionDB]:
    return HardwareDB.load(settings["hardware_db"]), RegionDB.load(settings["rci_db"])


def _load_bundle(settings: dict) -> ModelBundle:
    directory = Path(settings["models_dir"])
    if not directory.is_dir():
        raise MissingModelError(f"models directory not found: {directory} (run `rice train` first)")
    return ModelBundle.load(directory)


def _estimator_fields(settings: dict) -> dict:
    return {
        "hardware_name": settings["hardware_name"],
        "utilization": settings["utilization"],
        "pue": settings["pue"],
        "rci_g_per_kwh": settings["rci_g_per_kwh"],
        "region": settings["region"],
        "device_rounding": settings["device_rounding"],
    }


def format_result_table(result) -> str:
    lines = [
        f"model size            {result.model_params:g} B",
        f"prompt / output       {result.prompt_tokens} / {result.output_tokens} tokens",
        f"encoding latency      {result.encoding_latency_s:.6g} s",
        f"per-token latency     {result.per_token_latency_s:.6g} s",
        f"end-to-end latency    {result.e2e_latency_s:.6g} s",
        f"devices               {result.device_count:g}",
        f"power draw            {result.power_draw_w:.6g} W",
        f"energy                {result.energy_j:.6g} J ({result.energy_kwh:.6g} kWh)",
        f"CO2eq                 {result.co2_g:.6g} g",
        "assumptions:",
    ]
    width = max(len(a.name) for a in result.assumptions)
    lines += [f"  {a.name.ljust(width)}  {a.value}  [{a.source}]" for a in result.assumptions]
    lines += [f"warning: {w}" for w in result.warnings]
    return "\n".join(lines)


# -- commands -----------------------------------------------------------------

def cmd_train(args, settings) -> int:
    paths = [
        Path(settings["encoding_csv"] or bundled_path("encoding_samples.csv")),
        Path(settings["per_token_csv"] or bundled_path("per_token_samples.csv")),
        Path(settings["min_device_csv"] or bundled_path("min_device_samples.csv")),
    ]
    for p in paths:
        if not p.is_file():
            raise UsageError(f"training data not found: {p}")
    forest = ForestParams(
        n_trees=args.n_trees, max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf
    )
    try:
        bundle, report = train_from_files(
            *paths, seed=int(settings["seed"]), degree=int(settings["degree"]), forest_params=forest
        )
    except (DataError, ValueError) as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = Path(settings["models_dir"])
    bundle = save_bundle(bundle, out)
    doc = report.to_dict()
    doc["models"] = {name: str(out / f) for name, f in MODEL_FILES.items()}
    doc["fingerprints"] = bundle.fingerprints
    (out / "training_report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    lines = [
        f"models written to {out}",
        f"min devices (linear)        R2={report.min_devices_r2:.4f}",
        f"per-token (poly deg {report.polynomial_degree})    R2={report.per_token_r2:.4f}  LOO R2={report.per_token_loo_r2:.4f}",
        "encoding latency, held-out 20%:",
        f"  {'algorithm':<24}{'R2':>8}{'MSE':>12}{'MAPE':>8}",
    ]
    for row in report.encoding_comparison:
        r = row.report
        lines.append(f"  {row.algorithm:<24}{r.r_squared:>8.3f}{r.mse:>12.3g}{r.mape:>8.3f}")
    _emit(settings["format"], doc, "\n".join(lines))
    return EXIT_OK


def cmd_estimate(args, settings) -> int:
    hw, regions = _databases(settings)
    bundle = _load_bundle(settings)
    try:
        request = EstimateRequest(
            model_params=args.params,
            prompt_tokens=args.prompt_tokens,
            output_tokens=args.output_tokens,
            device_override=args.devices,
            **_estimator_fields(settings),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = estimate(request, bundle, hw, regions)
    _emit(settings["format"], result.to_dict(), format_result_table(result))
    return EXIT_OK


def cmd_validate(args, settings) -> int:
    if args.predictions:
        reports = [report_from_predictions(args.predictions)]
    else:
        if not args.leaderboard:
            raise UsageError("validate needs --leaderboard or --predictions")
        entries = load_leaderboard(args.leaderboard, strict=False)
        if not args.no_filter:
            entries = filter_unoptimized(entries)
        hw, regions = _databases(settings)
        bundle = _load_bundle(settings)
        fields = {k: v for k, v in _estimator_fields(settings).items() if k != "device_rounding"}
        mode = args.validate_rounding or "both"
        if mode == "both":
            config = ValidationConfig(args.prompt_tokens, args.output_tokens, args.decode_tokens, fields)
            reports = run_validation_modes(entries, bundle, config, hw, regions)
        else:
            config = ValidationConfig(
                args.prompt_tokens, args.output_tokens, args.decode_tokens, {**fields, "device_rounding": mode}
            )
            reports = [run_validation(entries, bundle, config, hw, regions, label=f"devices={mode}")]
    payload = {"reports": [r.to_dict() for r in reports]}
    _emit(settings["format"], payload, "\n\n".join(r.to_table() for r in reports))
    return EXIT_FAILED if any(r.error for r in reports) else EXIT_OK


def cmd_rank(args, settings) -> int:
    if not args.candidate:
        raise UsageError("rank needs at least one --candidate NAME=PARAMS_B")
    hw, regions = _databases(settings)
    bundle = _load_bundle(settings)
    try:
        ranked = rank_models(
            args.candidate, args.prompt_tokens, args.output_tokens, bundle,
            _estimator_fields(settings), hw, regions,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    payload = {"ranking": [{"rank": i + 1, "name": n, **r.to_dict()} for i, (n, r) in enumerate(ranked)]}
    width = max(len(n) for n, _ in ranked)
    lines = [f"{'#':>3}  {'model'.ljust(width)}  {'CO2eq (g)':>12}  {'latency (s)':>12}  {'energy (J)':>12}"]
    for i, (name, r) in enumerate(ranked, start=1):
        lines.append(f"{i:>3}  {name.ljust(width)}  {r.co2_g:>12.5g}  {r.e2e_latency_s:>12.5g}  {r.energy_j:>12.5g}")
    _emit(settings["format"], payload, "\n".join(lines))
    return EXIT_OK


def cmd_hardware(args, settings) -> int:
    path = settings["hardware_db"]
    # adding to a table that does not exist yet starts from the bundled rows
    seed_from_bundled = args.action == "add" and path and not Path(path).exists()
    db = HardwareDB.load(None if seed_from_bundled else path)
    if args.action == "add":
        if not settings["hardware_db"]:
            raise UsageError("hardware add needs --hardware-db PATH (the bundled table is read-only)")
        if args.name is None or args.tdp is None or args.memory is None:
            raise UsageError("hardware add needs --name, --tdp and --memory")
        try:
            db = db.with_entry(HardwareSpec(args.name, args.tdp, args.memory), replace=args.replace)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        db.save(settings["hardware_db"])
    rows = [s.to_dict() for s in db]
    width = max(len(s.name) for s in db)
    lines = [f"{'name'.ljust(width)}  {'TDP (W)':>8}  {'memory (GB)':>11}"]
    lines += [f"{s.name.ljust(width)}  {s.tdp_watts:>8g}  {s.memory_gb:>11g}" for s in db]
    _emit(settings["format"], {"hardware": rows}, "\n".join(lines))
    return EXIT_OK


def cmd_serve(args, settings) -> int:
    try:
        import uvicorn
    except ImportError:
        print("error: `rice serve` needs uvicorn (pip install uvicorn)", file=sys.stderr)
        return EXIT_USAGE
    from .service import create_app

    hw, regions = _databases(settings)
    app = create_app(_load_bundle(settings), hw, regions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--format", choices=("table", "json"), help="output format")
    p.add_argument("--models", dest="models_dir", help="directory holding the three model files")
    p.add_argument("--seed", type=int)
    p.add_argument("--hardware-db", dest="hardware_db", help="hardware TDP table (JSON)")
    p.add_argument("--rci-db", dest="rci_db", help="regional carbon-intensity table (JSON)")
    p.add_argument("-v", "--verbose", action="store_true")


def _assumption_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hardware", dest="hardware_name", help="hardware name from the TDP table")
    p.add_argument("--utilization", type=float, help="average fraction of TDP drawn (default 0.26)")
    p.add_argument("--pue", type=float, help="data-centre PUE (default 1.1)")
    p.add_argument("--rci", dest="rci_g_per_kwh", type=float, help="carbon intensity, g CO2eq per kWh")
    p.add_argument("--region", help="region code looked up in the RCI table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rice", description="LLM inference latency, energy and carbon estimates")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the three regression models")
    _common(p)
    p.add_argument("--encoding", dest="encoding_csv", help="encoding_samples.csv (default: bundled)")
    p.add_argument("--per-token", dest="per_token_csv", help="per_token_samples.csv (default: bundled)")
    p.add_argument("--min-devices", dest="min_device_csv", help="min_device_samples.csv (default: bundled)")
    p.add_argument("--degree", type=_positive_int, help="per-token polynomial degree (default 2)")
    p.add_argument("--n-trees", type=_positive_int, default=100)
    p.add_argument("--max-depth", type=_positive_int, default=16)
    p.add_argument("--min-samples-leaf", type=_positive_int, default=2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="estimate one prompt")
    _common(p)
    _assumption_flags(p)
    p.add_argument("--params", type=_positive_float, required=True, help="model size, billions of parameters")
    p.add_argument("--prompt-tokens", type=_positive_int, required=True)
    p.add_argument("--output-tokens", type=_positive_int, required=True)
    p.add_argument("--devices", type=_positive_int, help="override the estimated device count")
    p.add_argument("--device-rounding", dest="device_rounding", choices=("ceil", "continuous"))
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="score estimates against a leaderboard")
    _common(p)
    _assumption_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--leaderboard", help="leaderboard CSV")
    src.add_argument("--predictions", help="CSV of paired ground truth and predictions")
    p.add_argument("--no-filter", action="store_true", help="keep optimized and duplicate entries")
    p.add_argument("--prompt-tokens", type=_positive_int, default=192)
    p.add_argument("--output-tokens", type=_positive_int, default=250)
    p.add_argument("--decode-tokens", type=_positive_int, default=256,
                   help="decode length the leaderboard latencies were measured at")
    p.add_argument("--device-rounding", dest="validate_rounding", choices=("ceil", "continuous", "both"),
                   help="device rounding mode(s) to report (default: both)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rank", help="order candidate models by estimated CO2eq")
    _common(p)
    _assumption_flags(p)
    p.add_argument("--candidate", type=_candidate, action="append", metavar="NAME=PARAMS_B")
    p.add_argument("--prompt-tokens", type=_positive_int, default=192)
    p.add_argument("--output-tokens", type=_positive_int, default=250)
    p.add_argument("--device-rounding", dest="device_rounding", choices=("ceil", "continuous"))
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("hardware", help="list or add hardware TDP rows")
    _common(p)
    p.add_argument("action", choices=("list", "add"), nargs="?", default="list")
    p.add_argument("--name")
    p.add_argument("--tdp", type=_positive_float, help="watts")
    p.add_argument("--memory", type=_positive_float, help="GB")
    p.add_argument("--replace", action="store_true", help="overwrite an existing row of the same name")
    p.set_defaults(func=cmd_hardware)

    p = sub.add_parser("serve", help="run the HTTP JSON service")
    _common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = resolve(args)
        return args.func(args, settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, MissingModelError, ModelFormatError, LookupFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
