"""Compare estimates against leaderboard measurements and report MAPE."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import HardwareDB, LeaderboardEntry, RegionDB
from .estimator import JOULES_PER_KWH, EstimateRequest, ModelBundle, estimate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValidationConfig:
    prompt_tokens: int = 192
    output_tokens: int = 250
    # leaderboard latencies are measured over this many decoded tokens
    leaderboard_decode_tokens: int = 256
    estimator: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("prompt_tokens", "output_tokens", "leaderboard_decode_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ValidationRow:
    model_name: str
    params: float
    true_latency_s: float
    pred_latency_s: float
    true_energy_kwh: float
    pred_energy_kwh: float

    @property
    def latency_ape(self) -> float:
        return abs(self.true_latency_s - self.pred_latency_s) / abs(self.true_latency_s)

    @property
    def energy_ape(self) -> float:
        return abs(self.true_energy_kwh - self.pred_energy_kwh) / abs(self.true_energy_kwh)

    def to_dict(self) -> dict:
        return {**asdict(self), "latency_ape": self.latency_ape, "energy_ape": self.energy_ape}


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]
    skipped: tuple[str, ...] = ()
    label: str = ""

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def error(self) -> bool:
        return self.n == 0 or bool(self.skipped)

    @property
    def latency_mape(self) -> float | None:
        return float(np.mean([r.latency_ape for r in self.rows])) if self.rows else None

    @property
    def energy_mape(self) -> float | None:
        return float(np.mean([r.energy_ape for r in self.rows])) if self.rows else None

    def to_dict(self) -> dict:
        doc = {
            "label": self.label,
            "rows": [r.to_dict() for r in self.rows],
            "skipped": list(self.skipped),
            "n": self.n,
            "error": self.error,
        }
        if self.rows:
            doc["latency_mape"] = self.latency_mape
            doc["energy_mape"] = self.energy_mape
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        header = ("model", "params_b", "true_lat_s", "pred_lat_s", "lat_ape", "true_kwh", "pred_kwh", "energy_ape")
        body = [
            (
                r.model_name,
                f"{r.params:g}",
                f"{r.true_latency_s:.4g}",
                f"{r.pred_latency_s:.4g}",
                f"{100 * r.latency_ape:.2f}%",
                f"{r.true_energy_kwh:.4g}",
                f"{r.pred_energy_kwh:.4g}",
                f"{100 * r.energy_ape:.2f}%",
            )
            for r in self.rows
        ]
        widths = [max(len(str(c)) for c in col) for col in zip(header, *body)]
        lines = []
        if self.label:
            lines.append(f"[{self.label}]")
        for row in (header, *body):
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip())
        if self.rows:
            lines.append(
                f"n={self.n}  latency MAPE={100 * self.latency_mape:.2f}%  energy MAPE={100 * self.energy_mape:.2f}%"
            )
        else:
            lines.append("n=0  no rows evaluated; MAPE not reported")
        for s in self.skipped:
            lines.append(f"skipped: {s}")
        return "\n".join(lines)


def scale_ground_truth(entry: LeaderboardEntry, config: ValidationConfig) -> tuple[float, float]:
    """Rescale a leaderboard row to the evaluation prompt: (latency_s, energy_kwh)."""
    if not entry.tokens_per_kwh > 0:
        raise ValueError(f"{entry.model_name}: tokens_per_kwh must be > 0")
    latency = entry.e2e_latency / config.leaderboard_decode_tokens * config.output_tokens
    energy_kwh = config.output_tokens / entry.tokens_per_kwh
    return latency, energy_kwh


def run_validation(
    entries: Iterable[LeaderboardEntry],
    bundle: ModelBundle,
    config: ValidationConfig | None = None,
    hardware_db: HardwareDB | None = None,
    region_db: RegionDB | None = None,
    label: str = "",
) -> ValidationReport:
    """Estimate every (pre-filtered) entry at the evaluation prompt and score it.

    Rows without a parameter count, or that fail to estimate, are skipped and
    listed in ``report.skipped``; row order follows input order.
    """
    config = config or ValidationConfig()
    bundle.require()
    rows, skipped = [], []
    for i, entry in enumerate(entries):
        if entry.model_params is None:
            skipped.append(f"entry {i} ({entry.model_name}): missing model_params")
            continue
        try:
            true_lat, true_kwh = scale_ground_truth(entry, config)
            request = EstimateRequest(
                model_params=entry.model_params,
                prompt_tokens=config.prompt_tokens,
                output_tokens=config.output_tokens,
                **config.estimator,
            )
            result = estimate(request, bundle, hardware_db, region_db)
        except (ValueError, KeyError, ArithmeticError) as exc:
            skipped.append(f"entry {i} ({entry.model_name}): {exc}")
            continue
        rows.append(ValidationRow(
            entry.model_name, entry.model_params, true_lat, result.e2e_latency_s, true_kwh, result.energy_kwh
        ))
    for s in skipped:
        logger.warning("validation skipped %s", s)
    return ValidationReport(tuple(rows), tuple(skipped), label)


def run_validation_modes(entries: Sequence[LeaderboardEntry], bundle: ModelBundle, config: ValidationConfig | None = None,
                         hardware_db=None, region_db=None) -> list[ValidationReport]:
    """One report per device-rounding mode."""
    config = config or ValidationConfig()
    reports = []
    for mode in ("ceil", "continuous"):
        cfg = ValidationConfig(
            config.prompt_tokens,
            config.output_tokens,
            config.leaderboard_decode_tokens,
            {**config.estimator, "device_rounding": mode},
        )
        reports.append(run_validation(entries, bundle, cfg, hardware_db, region_db, label=f"devices={mode}"))
    return reports


def report_from_predictions(path) -> ValidationReport:
    """Score a CSV of already-paired ground truth and predictions.

    Columns: ``model_name, model_params_b, true_latency_s, pred_latency_s,
    true_energy_j, pred_energy_j``. Energies are converted to kWh.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"predictions file not found: {path}")
    rows, skipped = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for i, rec in enumerate(csv.DictReader(fh), start=1):
            try:
                row = ValidationRow(
                    rec["model_name"],
                    float(rec["model_params_b"]),
                    float(rec["true_latency_s"]),
                    float(rec["pred_latency_s"]),
                    float(rec["true_energy_j"]) / JOULES_PER_KWH,
                    float(rec["pred_energy_j"]) / JOULES_PER_KWH,
                )
                row.latency_ape, row.energy_ape  # zero ground truth fails here
            except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
                skipped.append(f"row {i}: {exc!r}")
                continue
            rows.append(row)
    return ValidationReport(tuple(rows), tuple(skipped), label=path.name)
