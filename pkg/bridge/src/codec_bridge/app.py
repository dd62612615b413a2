"""FastAPI application implementing the scorer wire protocol.

Responses depend only on the request body and the backend identity.
Malformed requests get HTTP 400 with an ``error`` field; token surfaces
the backend cannot encode get HTTP 422 naming the offending token.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backend import Backend, UnencodableTokenError

WIRE_VERSION = "1"


class ProtocolError(ValueError):
    pass


def _string_list(obj: dict, field: str, *, nonempty: bool = False) -> list:
    value = obj.get(field)
    if not isinstance(value, list) or \
            not all(isinstance(t, str) for t in value):
        raise ProtocolError(f"field {field!r} must be a list of strings")
    if nonempty and not value:
        raise ProtocolError(f"field {field!r} must be nonempty")
    return value


def _check_version(obj) -> None:
    if not isinstance(obj, dict):
        raise ProtocolError("request body must be a JSON object")
    v = obj.get("v")
    if v != WIRE_VERSION:
        raise ProtocolError(f"unsupported wire version {v!r} "
                            f"(expected {WIRE_VERSION!r})")


def _logprob_query(obj: dict) -> tuple[list, list, list]:
    return (_string_list(obj, "source_tokens"),
            _string_list(obj, "prefix_tokens"),
            _string_list(obj, "candidate_tokens", nonempty=True))


def create_app(backend: Backend) -> FastAPI:
    app = FastAPI(title="codec-bridge")

    def bad_request(msg: str) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": msg})

    @app.exception_handler(UnencodableTokenError)
    async def _unencodable(_req, exc: UnencodableTokenError):
        return JSONResponse(status_code=422,
                            content={"error": str(exc), "token": exc.token})

    async def parse_body(request: Request) -> dict:
        try:
            obj = await request.json()
        except Exception:
            raise ProtocolError("request body is not valid JSON") from None
        _check_version(obj)
        return obj

    @app.get("/health")
    async def health():
        return {"model_id": backend.model_id,
                "vocab_size": backend.vocab_size}

    @app.post("/logprobs")
    async def logprobs(request: Request):
        try:
            obj = await parse_body(request)
            src, pfx, cands = _logprob_query(obj)
        except ProtocolError as e:
            return bad_request(str(e))
        return {"logprobs": backend.logprobs(src, pfx, cands),
                "model_id": backend.model_id}

    @app.post("/logprobs_batch")
    async def logprobs_batch(request: Request):
        try:
            obj = await parse_body(request)
            reqs = obj.get("requests")
            if not isinstance(reqs, list):
                raise ProtocolError("field 'requests' must be a list")
            queries = [_logprob_query(r) if isinstance(r, dict)
                       else _raise_not_object() for r in reqs]
        except ProtocolError as e:
            return bad_request(str(e))
        return {"responses": [{"logprobs": backend.logprobs(s, p, c)}
                              for s, p, c in queries],
                "model_id": backend.model_id}

    @app.post("/sequence")
    async def sequence(request: Request):
        try:
            obj = await parse_body(request)
            src = _string_list(obj, "source_tokens")
            tgt = _string_list(obj, "target_tokens", nonempty=True)
        except ProtocolError as e:
            return bad_request(str(e))
        return {"logprob": backend.sequence_logprob(src, tgt),
                "model_id": backend.model_id}

    return app


def _raise_not_object():
    raise ProtocolError("each batch request must be a JSON object")
