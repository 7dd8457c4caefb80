"""Request and response models for the certification service.

The ``system`` payload is the system-file document itself (same JSON schema
as on disk); it is validated by the data-model layer so that file-based and
service-based workflows reject malformed systems identically.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

__all__ = [
    "AnalyzeRequest",
    "SynthesizeRequest",
    "L2Request",
    "SimulateRequest",
    "VerifyRequest",
    "Report",
    "SynthesizeResponse",
    "L2Response",
    "SimulateResponse",
    "ErrorBody",
]


class AnalyzeRequest(BaseModel):
    system: dict
    tau_max: int = Field(default=16, ge=1)
    form: str = "primal"
    robust: bool = False


class SynthesizeRequest(BaseModel):
    system: dict
    tau: int = Field(ge=1)
    l2: bool = False
    gamma: float | None = Field(default=None, gt=0)
    minimize: bool = False
    tol_rel: float = Field(default=1e-3, gt=0)
    gains_path: str | None = None


class L2Request(BaseModel):
    system: dict
    tau: int | None = Field(default=None, ge=1)
    sweep: list[int] | None = None
    tol_rel: float = Field(default=1e-3, gt=0)


class SimulateRequest(BaseModel):
    system: dict
    tau: int = Field(ge=1)
    seed: int = 0
    horizon: int = Field(default=120, ge=0)
    gains: dict | None = None
    certificate: dict | None = None


class VerifyRequest(BaseModel):
    system: dict
    certificate: dict | None = None
    witness: str | None = None


class Report(BaseModel):
    """Machine-readable result envelope shared by every command."""

    command: str
    outcome: str  # "positive" for certified/confirmed, "negative" otherwise
    system: dict
    results: dict
    verification: list[dict] = []
    timings_ms: dict[str, float] = {}
    version: str
    seed: int | None = None


class SynthesizeResponse(BaseModel):
    report: Report
    gains: dict | None = None


class L2Response(BaseModel):
    report: Report
    csv: str | None = None


class SimulateResponse(BaseModel):
    report: Report
    csv: str


class ErrorBody(BaseModel):
    error: str
    message: str
