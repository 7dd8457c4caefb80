"""HTTP face of the certification toolkit.

Long solves run synchronously within the request; deploy behind a worker
pool when multiple clients submit concurrently.  Malformed systems or
documents map to 400 with a structured body; well-posed negative results are
200 responses with ``outcome="negative"`` in the report.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    CertificateDegenerate,
    DimensionMismatch,
    DwellcertError,
    InvalidInput,
    MissingMatrix,
    ParseError,
)
from . import runners
from .schemas import (
    AnalyzeRequest,
    ErrorBody,
    L2Request,
    L2Response,
    Report,
    SimulateRequest,
    SimulateResponse,
    SynthesizeRequest,
    SynthesizeResponse,
    VerifyRequest,
)

_CLIENT_ERRORS = (
    ParseError,
    DimensionMismatch,
    InvalidInput,
    MissingMatrix,
    CertificateDegenerate,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="dwellcert",
        version=__version__,
        description=(
            "Certification of stability, stabilizability and energy-gain bounds "
            "for discrete-time switched linear systems under minimum dwell-time "
            "constraints."
        ),
    )

    @app.exception_handler(DwellcertError)
    async def _dwellcert_error(request: Request, exc: DwellcertError):
        status = 400 if isinstance(exc, _CLIENT_ERRORS) else 500
        body = ErrorBody(error=type(exc).__name__, message=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.get("/health")
    async def health() -> dict:
        return {"name": "dwellcert", "version": __version__}

    @app.post("/analyze", response_model=Report)
    def analyze(request: AnalyzeRequest) -> Report:
        return runners.run_analyze(request)

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize(request: SynthesizeRequest) -> SynthesizeResponse:
        return runners.run_synthesize(request)

    @app.post("/l2", response_model=L2Response)
    def l2(request: L2Request) -> L2Response:
        return runners.run_l2(request)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(request: SimulateRequest) -> SimulateResponse:
        return runners.run_simulate(request)

    @app.post("/verify", response_model=Report)
    def verify(request: VerifyRequest) -> Report:
        return runners.run_verify(request)

    return app
