"""Training/validation data loaders and the hardware and carbon-intensity tables.

Units everywhere: parameters in billions, latencies in seconds, TDP in watts,
memory in GB, carbon intensity in g CO2eq per kWh.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

DEFAULT_HARDWARE = "NVIDIA A100-80GB"
DEFAULT_REGION = "default"
MAX_CURATED_PROMPT_TOKENS = 1920

_NULL_TAGS = {"", "none", "null", "n/a", "-", "false", "no"}


class DataError(ValueError):
    """One or more rows of a data file failed validation."""

    def __init__(self, path, problems: Sequence[str]):
        self.path = str(path)
        self.problems = list(problems)
        head = "; ".join(self.problems[:5])
        more = f" (+{len(self.problems) - 5} more)" if len(self.problems) > 5 else ""
        super().__init__(f"{self.path}: {head}{more}")


class LookupFailed(KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass(frozen=True)
class EncodingSample:
    model_params: float
    prompt_tokens: int
    encoding_latency: float


@dataclass(frozen=True)
class PerTokenSample:
    model_params: float
    per_token_latency: float


@dataclass(frozen=True)
class MinDeviceSample:
    model_params: float
    device_count: int
    hardware_name: str


@dataclass(frozen=True)
class HardwareSpec:
    name: str
    tdp_watts: float
    memory_gb: float

    def to_dict(self) -> dict:
        return {"name": self.name, "tdp_watts": self.tdp_watts, "memory_gb": self.memory_gb}


@dataclass(frozen=True)
class RegionEntry:
    region_code: str
    rci_g_per_kwh: float

    def to_dict(self) -> dict:
        return {"region_code": self.region_code, "rci_g_per_kwh": self.rci_g_per_kwh}


@dataclass(frozen=True)
class LeaderboardEntry:
    model_name: str
    model_params: float | None
    e2e_latency: float
    tokens_per_kwh: float
    optimizations: frozenset[str] = frozenset()
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def is_optimized(self) -> bool:
        return bool(self.optimizations)


# -- CSV schemas --------------------------------------------------------------

def _positive_real(raw: str) -> float:
    val = float(raw)
    if not math.isfinite(val):
        raise ValueError(f"{raw!r} is not finite")
    if val <= 0:
        raise ValueError(f"{raw!r} must be > 0")
    return val


def _positive_int(raw: str) -> int:
    text = raw.strip()
    val = float(text)
    if not math.isfinite(val) or val != int(val):
        raise ValueError(f"{raw!r} is not an integer")
    if val < 1:
        raise ValueError(f"{raw!r} must be >= 1")
    return int(val)


def _identifier(raw: str) -> str:
    text = raw.strip()
    if not text:
        raise ValueError("empty")
    return text


@dataclass(frozen=True)
class _Schema:
    cls: type
    columns: tuple[tuple[str, str, object], ...]  # (csv column, field name, parser)

    @property
    def header(self) -> list[str]:
        return [c for c, _, _ in self.columns]


SCHEMAS = {
    "encoding": _Schema(EncodingSample, (
        ("model_params_b", "model_params", _positive_real),
        ("prompt_tokens", "prompt_tokens", _positive_int),
        ("encoding_latency_s", "encoding_latency", _positive_real),
    )),
    "per_token": _Schema(PerTokenSample, (
        ("model_params_b", "model_params", _positive_real),
        ("per_token_latency_s", "per_token_latency", _positive_real),
    )),
    "min_device": _Schema(MinDeviceSample, (
        ("model_params_b", "model_params", _positive_real),
        ("device_count", "device_count", _positive_int),
        ("hardware_name", "hardware_name", _identifier),
    )),
}

LEADERBOARD_HEADER = ["model_name", "model_params_b", "e2e_latency_s", "tokens_per_kwh", "optimizations"]


def _read_rows(path: Path, expected: Sequence[str]):
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(path, ["file is empty (missing header row)"])
        header = [h.strip() for h in header]
        missing = [c for c in expected if c not in header]
        if missing:
            raise DataError(path, [f"header is missing column(s) {missing}; expected {list(expected)}"])
        index = {name: i for i, name in enumerate(header)}
        rows = []
        # row numbers are 1-based data rows (header excluded)
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                rows.append((row_no, None, f"row {row_no}: expected {len(header)} fields, got {len(row)}"))
                continue
            rows.append((row_no, {name: row[i] for name, i in index.items()}, None))
        return header, rows


def _handle_problems(path, problems: list[str], strict: bool) -> None:
    if not problems:
        return
    if strict:
        raise DataError(path, problems)
    for problem in problems:
        logger.warning("%s: skipped %s", path, problem)


def load_samples(path, kind: str, *, strict: bool = True) -> list:
    """Read a curated sample CSV into validated dataclasses, in file order.

    ``kind`` is ``"encoding"``, ``"per_token"`` or ``"min_device"``. Invalid
    rows raise :class:`DataError` naming the row and column; with
    ``strict=False`` they are skipped and logged instead.
    """
    if kind not in SCHEMAS:
        raise ValueError(f"unknown sample kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    schema = SCHEMAS[kind]
    path = Path(path)
    _, rows = _read_rows(path, schema.header)
    samples, problems = [], []
    for row_no, values, err in rows:
        if err:
            problems.append(err)
            continue
        kwargs = {}
        for column, field_name, parse in schema.columns:
            try:
                kwargs[field_name] = parse(values[column])
            except ValueError as exc:
                problems.append(f"row {row_no}, column {column!r}: {exc}")
                break
        else:
            samples.append(schema.cls(**kwargs))
    _handle_problems(path, problems, strict)
    if kind == "encoding":
        wide = sum(1 for s in samples if s.prompt_tokens > MAX_CURATED_PROMPT_TOKENS)
        if wide:
            logger.warning("%s: %d rows exceed %d prompt tokens", path, wide, MAX_CURATED_PROMPT_TOKENS)
    logger.info("loaded %d %s samples from %s", len(samples), kind, path)
    return samples


def write_samples(path, samples: Iterable, kind: str) -> Path:
    schema = SCHEMAS[kind]
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.header)
        for s in samples:
            writer.writerow([_fmt(getattr(s, f)) for _, f, _ in schema.columns])
    return path


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


# -- leaderboard --------------------------------------------------------------

def parse_optimizations(*cells: str) -> frozenset[str]:
    tags = set()
    for cell in cells:
        for tag in (cell or "").split(";"):
            tag = tag.strip()
            if tag.lower() not in _NULL_TAGS:
                tags.add(tag)
    return frozenset(tags)


def load_leaderboard(
    path,
    *,
    optimization_columns: Sequence[str] = ("optimizations",),
    strict: bool = True,
) -> list[LeaderboardEntry]:
    """Read a leaderboard CSV.

    Rows with a blank ``model_params_b`` load with ``model_params=None`` so the
    validation run can skip and count them. Columns beyond the schema are kept
    in ``metadata``; any of ``optimization_columns`` holding a non-null value
    marks the entry as optimized.
    """
    path = Path(path)
    header, rows = _read_rows(path, LEADERBOARD_HEADER[:-1])
    opt_cols = [c for c in optimization_columns if c in header]
    entries, problems = [], []
    for row_no, values, err in rows:
        if err:
            problems.append(err)
            continue
        try:
            column = "model_name"
            name = _identifier(values[column])
            column = "model_params_b"
            params = _positive_real(values[column]) if values[column].strip() else None
            column = "e2e_latency_s"
            latency = _positive_real(values[column])
            column = "tokens_per_kwh"
            tok_kwh = _positive_real(values[column])
        except ValueError as exc:
            problems.append(f"row {row_no}, column {column!r}: {exc}")
            continue
        meta = {k: v for k, v in values.items() if k not in LEADERBOARD_HEADER}
        entries.append(LeaderboardEntry(
            model_name=name,
            model_params=params,
            e2e_latency=latency,
            tokens_per_kwh=tok_kwh,
            optimizations=parse_optimizations(*(values[c] for c in opt_cols)),
            metadata=meta,
        ))
    _handle_problems(path, problems, strict)
    return entries


def write_leaderboard(path, entries: Iterable[LeaderboardEntry]) -> Path:
    entries = list(entries)
    extra = sorted({k for e in entries for k in e.metadata})
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEADERBOARD_HEADER + extra)
        for e in entries:
            writer.writerow([
                e.model_name,
                "" if e.model_params is None else _fmt(e.model_params),
                _fmt(e.e2e_latency),
                _fmt(e.tokens_per_kwh),
                ";".join(sorted(e.optimizations)),
                *(e.metadata.get(k, "") for k in extra),
            ])
    return path


def filter_unoptimized(entries: Iterable[LeaderboardEntry]) -> list[LeaderboardEntry]:
    """Drop optimized variants, then keep the first of each (name, params) pair."""
    kept: list[LeaderboardEntry] = []
    seen: set = set()
    for entry in entries:
        if entry.is_optimized:
            continue
        key = (entry.model_name, entry.model_params)
        if key in seen:
            logger.info("dropping duplicate leaderboard entry %s (%s B)", *key)
            continue
        seen.add(key)
        kept.append(entry)
    return kept


# -- lookup tables ------------------------------------------------------------

class HardwareDB:
    def __init__(self, specs: Iterable[HardwareSpec]):
        self._specs: dict[str, HardwareSpec] = {}
        for spec in specs:
            if not spec.name.strip():
                raise ValueError("hardware name must be non-empty")
            if not (math.isfinite(spec.tdp_watts) and spec.tdp_watts > 0):
                raise ValueError(f"{spec.name}: tdp_watts must be > 0")
            if not (math.isfinite(spec.memory_gb) and spec.memory_gb > 0):
                raise ValueError(f"{spec.name}: memory_gb must be > 0")
            key = spec.name.casefold()
            if key in self._specs:
                raise ValueError(f"duplicate hardware name {spec.name!r}")
            self._specs[key] = spec

    @classmethod
    def load(cls, path=None) -> "HardwareDB":
        rows = _load_json_table(path, "hardware_db.json")
        try:
            return cls(HardwareSpec(str(r["name"]), float(r["tdp_watts"]), float(r["memory_gb"])) for r in rows)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed hardware database row: {exc}") from exc

    def lookup(self, name: str) -> HardwareSpec:
        try:
            return self._specs[name.strip().casefold()]
        except KeyError:
            raise LookupFailed(f"unknown hardware {name!r}; available: {self.names()}") from None

    def names(self) -> list[str]:
        return [s.name for s in self._specs.values()]

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self):
        return len(self._specs)

    def with_entry(self, spec: HardwareSpec, replace: bool = False) -> "HardwareDB":
        specs = [s for s in self if not (replace and s.name.casefold() == spec.name.casefold())]
        return HardwareDB([*specs, spec])

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps([s.to_dict() for s in self], indent=2) + "\n", encoding="utf-8")
        return path


class RegionDB:
    def __init__(self, entries: Iterable[RegionEntry]):
        self._entries: dict[str, RegionEntry] = {}
        for entry in entries:
            if not (math.isfinite(entry.rci_g_per_kwh) and entry.rci_g_per_kwh >= 0):
                raise ValueError(f"{entry.region_code}: rci_g_per_kwh must be >= 0")
            self._entries[entry.region_code.casefold()] = entry

    @classmethod
    def load(cls, path=None) -> "RegionDB":
        rows = _load_json_table(path, "rci_db.json")
        try:
            return cls(RegionEntry(str(r["region_code"]), float(r["rci_g_per_kwh"])) for r in rows)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed carbon-intensity row: {exc}") from exc

    def lookup(self, region_code: str) -> RegionEntry:
        try:
            return self._entries[region_code.strip().casefold()]
        except KeyError:
            raise LookupFailed(
                f"unknown region {region_code!r}; available: {self.codes()} (or pass an explicit RCI)"
            ) from None

    def codes(self) -> list[str]:
        return [e.region_code for e in self._entries.values()]

    def __iter__(self):
        return iter(self._entries.values())


def _load_json_table(path, bundled_name: str) -> list:
    if path is None:
        text = resources.files("rice.data").joinpath(bundled_name).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = json.loads(text)
    if not isinstance(rows, list):
        raise ValueError(f"{path or bundled_name}: expected a JSON array")
    return rows


_default_hardware: HardwareDB | None = None
_default_regions: RegionDB | None = None


def default_hardware_db() -> HardwareDB:
    global _default_hardware
    if _default_hardware is None:
        _default_hardware = HardwareDB.load()
    return _default_hardware


def default_region_db() -> RegionDB:
    global _default_regions
    if _default_regions is None:
        _default_regions = RegionDB.load()
    return _default_regions


def lookup_hardware(name: str, db: HardwareDB | None = None) -> HardwareSpec:
    return (db or default_hardware_db()).lookup(name)


def lookup_rci(region_code: str, db: RegionDB | None = None) -> RegionEntry:
    return (db or default_region_db()).lookup(region_code)


def bundled_path(name: str) -> Path:
    """Filesystem path of a file shipped in ``rice/data``."""
    return Path(str(resources.files("rice.data").joinpath(name)))
