"""Read-only HTTP JSON API over the estimator.

Endpoints: ``POST /estimate``, ``POST /rank``, ``GET /health``,
``GET /hardware``. Models are loaded once at startup and never change; retrain
with the CLI and restart to pick up new ones.
"""

from __future__ import annotations

import logging
import os
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .dataset import DEFAULT_HARDWARE, DEFAULT_REGION, HardwareDB, LookupFailed, RegionDB
from .estimator import EstimateRequest, ModelBundle, ModelOutputError, estimate, rank_models

logger = logging.getLogger(__name__)


class EstimateBody(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model_params: float = Field(..., gt=0, description="model size, billions of parameters")
    prompt_tokens: int = Field(..., ge=1)
    output_tokens: int = Field(..., ge=1)
    hardware_name: str = DEFAULT_HARDWARE
    utilization: Optional[float] = Field(None, gt=0, le=1)
    pue: Optional[float] = Field(None, ge=1)
    rci_g_per_kwh: Optional[float] = Field(None, ge=0)
    region: str = DEFAULT_REGION
    device_override: Optional[int] = Field(None, ge=1)
    device_rounding: Literal["ceil", "continuous"] = "ceil"


class Candidate(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    name: str = Field(..., min_length=1)
    model_params: float = Field(..., gt=0)


class RankBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    candidates: list[Candidate]
    prompt_tokens: int = Field(192, ge=1)
    output_tokens: int = Field(250, ge=1)
    hardware_name: str = DEFAULT_HARDWARE
    utilization: Optional[float] = Field(None, gt=0, le=1)
    pue: Optional[float] = Field(None, ge=1)
    rci_g_per_kwh: Optional[float] = Field(None, ge=0)
    region: str = DEFAULT_REGION
    device_rounding: Literal["ceil", "continuous"] = "ceil"


def _error(status: int, message: str, fields: list | None = None) -> JSONResponse:
    body = {"error": message}
    if fields:
        body["fields"] = fields
    return JSONResponse(status_code=status, content=body)


def create_app(
    bundle: ModelBundle | None = None,
    hardware_db: HardwareDB | None = None,
    region_db: RegionDB | None = None,
) -> FastAPI:
    """Build the app around an immutable model bundle.

    With ``bundle=None`` the service reports ``loading`` and answers 503 until
    one is supplied (a fresh app must be created; state never mutates).
    """
    if bundle is not None:
        bundle.require()
    hardware_db = hardware_db or HardwareDB.load()
    region_db = region_db or RegionDB.load()

    app = FastAPI(title="rice", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        fields = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
            for err in exc.errors()
        ]
        return _error(400, "invalid request body", fields)

    def _unavailable():
        return _error(503, "models are not loaded")

    @app.get("/health")
    def health():
        if bundle is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        models = {}
        for name in ("min_devices", "encoding", "per_token"):
            trained = getattr(bundle, name)
            models[name] = {
                "kind": trained.kind,
                "file_sha256": bundle.fingerprints.get(name),
                "data_fingerprint": trained.data_fingerprint,
                "created_at": trained.created_at,
            }
        return {"status": "ok", "version": __version__, "models": models}

    @app.get("/hardware")
    def hardware():
        return {"hardware": [s.to_dict() for s in hardware_db]}

    @app.post("/estimate")
    def estimate_endpoint(body: EstimateBody):
        if bundle is None:
            return _unavailable()
        try:
            request = EstimateRequest(**body.model_dump())
            result = estimate(request, bundle, hardware_db, region_db)
        except (ValueError, LookupFailed) as exc:
            return _error(400, str(exc))
        except ModelOutputError as exc:
            return _error(500, str(exc))
        return result.to_dict()

    @app.post("/rank")
    def rank_endpoint(body: RankBody):
        if bundle is None:
            return _unavailable()
        if not body.candidates:
            return _error(400, "candidates must not be empty", [{"field": "candidates", "message": "empty"}])
        shared = body.model_dump(exclude={"candidates", "prompt_tokens", "output_tokens"})
        try:
            ranked = rank_models(
                [(c.name, c.model_params) for c in body.candidates],
                body.prompt_tokens,
                body.output_tokens,
                bundle,
                shared,
                hardware_db,
                region_db,
            )
        except (ValueError, LookupFailed) as exc:
            return _error(400, str(exc))
        return {"ranking": [{"rank": i + 1, "name": n, **r.to_dict()} for i, (n, r) in enumerate(ranked)]}

    return app


def app_from_env() -> FastAPI:
    """Factory for ``uvicorn --factory rice.service:app_from_env``; reads ``RICE_MODELS``."""
    models = os.environ.get("RICE_MODELS", "models")
    return create_app(ModelBundle.load(models))
