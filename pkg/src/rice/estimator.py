"""Per-prompt latency, energy and CO2eq estimates from the three fitted models.

End-to-end latency for ``p`` prompt tokens and ``o`` output tokens is
``encoding(p) + (o - 1) * beta``, where the encoding time comes from the
random forest and ``beta`` (seconds per extra output token) from the
polynomial. Energy is ``devices * TDP * utilization * latency * PUE`` and
emissions multiply the energy in kWh by the grid carbon intensity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .dataset import (
    DEFAULT_HARDWARE,
    DEFAULT_REGION,
    HardwareDB,
    HardwareSpec,
    RegionDB,
    default_hardware_db,
    default_region_db,
)
from .regression import (
    ForestModel,
    LinearModel,
    PolynomialModel,
    TrainedModel,
    file_sha256,
    load_model,
    predict,
)

logger = logging.getLogger(__name__)

DEFAULT_UTILIZATION = 0.26
DEFAULT_PUE = 1.1
MAX_CONTEXT_TOKENS = 10_000
JOULES_PER_KWH = 3.6e6
MIN_BETA_S = 1e-9
MIN_CONTINUOUS_DEVICES = 1e-6
ROUNDING_MODES = ("ceil", "continuous")

MODEL_FILES = {
    "min_devices": "min_devices.json",
    "encoding": "encoding_latency.json",
    "per_token": "per_token_latency.json",
}


class MissingModelError(RuntimeError):
    pass


class ModelOutputError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EstimateRequest:
    """Inputs for one estimate.

    ``None`` for utilization, PUE or RCI means "use the default"; the source
    of every value ends up in the result's assumption ledger.
    """

    model_params: float
    prompt_tokens: int
    output_tokens: int
    hardware_name: str = DEFAULT_HARDWARE
    utilization: float | None = None
    pue: float | None = None
    rci_g_per_kwh: float | None = None
    region: str = DEFAULT_REGION
    device_override: int | None = None
    device_rounding: str = "ceil"

    def __post_init__(self):
        problems = []
        if not _finite(self.model_params) or self.model_params <= 0:
            problems.append("model_params must be > 0")
        for name in ("prompt_tokens", "output_tokens"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int) or val < 1:
                problems.append(f"{name} must be an integer >= 1")
        if self.utilization is not None and not (_finite(self.utilization) and 0 < self.utilization <= 1):
            problems.append("utilization must lie in (0, 1]")
        if self.pue is not None and not (_finite(self.pue) and self.pue >= 1):
            problems.append("pue must be >= 1")
        if self.rci_g_per_kwh is not None and not (_finite(self.rci_g_per_kwh) and self.rci_g_per_kwh >= 0):
            problems.append("rci_g_per_kwh must be >= 0")
        if self.device_override is not None and (
            isinstance(self.device_override, bool)
            or not isinstance(self.device_override, int)
            or self.device_override < 1
        ):
            problems.append("device_override must be an integer >= 1")
        if self.device_rounding not in ROUNDING_MODES:
            problems.append(f"device_rounding must be one of {ROUNDING_MODES}")
        if not str(self.hardware_name).strip():
            problems.append("hardware_name must be non-empty")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def context_tokens(self) -> int:
        return self.prompt_tokens + self.output_tokens


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class Assumption:
    name: str
    value: float | str
    source: str  # default | user | database | model


@dataclass(frozen=True)
class EstimateResult:
    model_params: float
    prompt_tokens: int
    output_tokens: int
    encoding_latency_s: float
    per_token_latency_s: float
    e2e_latency_s: float
    device_count: float | int
    power_draw_w: float
    energy_j: float
    energy_kwh: float
    co2_g: float
    assumptions: tuple[Assumption, ...] = ()
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["assumptions"] = [asdict(a) for a in self.assumptions]
        doc["warnings"] = list(self.warnings)
        return doc


@dataclass(frozen=True)
class ModelBundle:
    """The three fitted models an estimate needs, plus their file hashes."""

    min_devices: TrainedModel | None = None
    encoding: TrainedModel | None = None
    per_token: TrainedModel | None = None
    fingerprints: dict = field(default_factory=dict, compare=False)

    def require(self) -> None:
        missing = [name for name in MODEL_FILES if getattr(self, name) is None]
        if missing:
            raise MissingModelError(f"model bundle is missing: {', '.join(missing)}")
        checks = (
            ("min_devices", LinearModel),
            ("encoding", ForestModel),
            ("per_token", PolynomialModel),
        )
        for name, cls in checks:
            inner = getattr(self, name).model
            if not isinstance(inner, cls):
                raise MissingModelError(f"{name} model must be {cls.kind}, got {inner.kind}")

    @classmethod
    def load(cls, directory) -> "ModelBundle":
        directory = Path(directory)
        models, prints = {}, {}
        missing = []
        for name, filename in MODEL_FILES.items():
            path = directory / filename
            if not path.is_file():
                missing.append(f"{name} ({path})")
                continue
            models[name] = load_model(path)
            prints[name] = file_sha256(path)
        if missing:
            raise MissingModelError(f"model bundle is missing: {', '.join(missing)}")
        bundle = cls(fingerprints=prints, **models)
        bundle.require()
        return bundle


def _wrap(model) -> TrainedModel:
    return model if isinstance(model, TrainedModel) else TrainedModel(model)


def estimate_min_devices(model_params: float, linear_model, rounding: str = "ceil") -> float | int:
    raw = predict(linear_model, [model_params])
    if not math.isfinite(raw):
        raise ModelOutputError(f"min-device model returned {raw}")
    if rounding == "ceil":
        return max(1, math.ceil(raw))
    if rounding == "continuous":
        return max(raw, MIN_CONTINUOUS_DEVICES)
    raise ValueError(f"unknown rounding mode {rounding!r}")


def estimate_e2e_latency(request: EstimateRequest, encoding_model, per_token_model) -> tuple[float, float, float]:
    encoding = predict(encoding_model, [request.model_params, request.prompt_tokens])
    if not math.isfinite(encoding):
        raise ModelOutputError(f"encoding-latency model returned {encoding}")
    beta = predict(per_token_model, [request.model_params])
    if not math.isfinite(beta):
        raise ModelOutputError(f"per-token-latency model returned {beta}")
    beta = max(beta, MIN_BETA_S)
    return encoding, beta, encoding + (request.output_tokens - 1) * beta


def estimate_energy(request: EstimateRequest, device_count: float, e2e_latency_s: float, hardware: HardwareSpec):
    """Return (power_draw_w, energy_j, energy_kwh)."""
    utilization = DEFAULT_UTILIZATION if request.utilization is None else request.utilization
    pue = DEFAULT_PUE if request.pue is None else request.pue
    power = device_count * hardware.tdp_watts * utilization * pue
    energy_j = device_count * hardware.tdp_watts * utilization * e2e_latency_s * pue
    return power, energy_j, energy_j / JOULES_PER_KWH


def estimate_carbon(energy_kwh: float, rci_g_per_kwh: float) -> float:
    if energy_kwh < 0 or rci_g_per_kwh < 0:
        raise ValueError("energy and carbon intensity must be non-negative")
    return energy_kwh * rci_g_per_kwh


def estimate(
    request: EstimateRequest,
    bundle: ModelBundle,
    hardware_db: HardwareDB | None = None,
    region_db: RegionDB | None = None,
) -> EstimateResult:
    bundle.require()
    hardware = (hardware_db or default_hardware_db()).lookup(request.hardware_name)
    ledger = [
        Assumption("model_params", request.model_params, "user"),
        Assumption("prompt_tokens", request.prompt_tokens, "user"),
        Assumption("output_tokens", request.output_tokens, "user"),
        Assumption("hardware_name", hardware.name,
                   "default" if request.hardware_name == DEFAULT_HARDWARE else "user"),
    ]
    warnings = []

    if request.device_override is not None:
        devices = request.device_override
        ledger.append(Assumption("device_count", devices, "user"))
    else:
        devices = estimate_min_devices(request.model_params, bundle.min_devices, request.device_rounding)
        ledger.append(Assumption("device_count", devices, "model"))

    encoding, beta, total = estimate_e2e_latency(request, bundle.encoding, bundle.per_token)

    ledger.append(Assumption("tdp_watts", hardware.tdp_watts, "database"))
    ledger.append(_defaulted("utilization", request.utilization, DEFAULT_UTILIZATION))
    ledger.append(_defaulted("pue", request.pue, DEFAULT_PUE))
    if request.rci_g_per_kwh is not None:
        rci = request.rci_g_per_kwh
        ledger.append(Assumption("rci_g_per_kwh", rci, "user"))
    else:
        entry = (region_db or default_region_db()).lookup(request.region)
        rci = entry.rci_g_per_kwh
        source = "default" if request.region == DEFAULT_REGION else "database"
        ledger.append(Assumption("rci_g_per_kwh", rci, source))

    power, energy_j, energy_kwh = estimate_energy(request, devices, total, hardware)
    co2 = estimate_carbon(energy_kwh, rci)

    if request.context_tokens >= MAX_CONTEXT_TOKENS:
        warnings.append(
            f"context of {request.context_tokens} tokens exceeds the {MAX_CONTEXT_TOKENS}-token validity range"
        )
    outside = _wrap(bundle.encoding).outside_envelope([request.model_params, request.prompt_tokens])
    outside += [
        n for n in _wrap(bundle.per_token).outside_envelope([request.model_params]) if n not in outside
    ]
    if outside:
        warnings.append(f"extrapolating beyond training data in: {', '.join(outside)}")
    for w in warnings:
        logger.warning(w)

    return EstimateResult(
        model_params=request.model_params,
        prompt_tokens=request.prompt_tokens,
        output_tokens=request.output_tokens,
        encoding_latency_s=encoding,
        per_token_latency_s=beta,
        e2e_latency_s=total,
        device_count=devices,
        power_draw_w=power,
        energy_j=energy_j,
        energy_kwh=energy_kwh,
        co2_g=co2,
        assumptions=tuple(ledger),
        warnings=tuple(warnings),
    )


def _defaulted(name: str, value, default) -> Assumption:
    return Assumption(name, default, "default") if value is None else Assumption(name, value, "user")


def rank_models(
    candidates: Iterable[tuple[str, float]],
    prompt_tokens: int,
    output_tokens: int,
    bundle: ModelBundle,
    config: dict | None = None,
    hardware_db: HardwareDB | None = None,
    region_db: RegionDB | None = None,
) -> list[tuple[str, EstimateResult]]:
    """Order candidate models by estimated CO2eq for one prompt profile.

    ``config`` holds shared ``EstimateRequest`` fields (hardware, PUE, ...).
    Ties fall back to latency, then name.
    """
    candidates: Sequence = list(candidates)
    if not candidates:
        raise ValueError("rank_models needs at least one candidate")
    config = dict(config or {})
    ranked = []
    for name, params in candidates:
        request = EstimateRequest(
            model_params=params, prompt_tokens=prompt_tokens, output_tokens=output_tokens, **config
        )
        ranked.append((name, estimate(request, bundle, hardware_db, region_db)))
    ranked.sort(key=lambda item: (item[1].co2_g, item[1].e2e_latency_s, item[0]))
    return ranked

