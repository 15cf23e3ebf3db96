"""Local HTTP facade over the parser, condition generator, and solver
backend, consumed by the web front end.

The protocol is stateless: every request carries the full program source
and every response is a pure function of it, so the editor and the server
can never drift apart.  The server binds to localhost only.
"""

from __future__ import annotations

import argparse
from importlib import resources
from typing import Sequence

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import backend
from .parser import HoareFile, ParseError, UnknownAssertion, parse, rewrite_hint
from .vcgen import GENERATION_ERRORS, VC, bind_solvers, generate, vc_to_record

JSON_SCHEMA_VERSION = 1
SOLVER_PARALLELISM = 4


class SourceRequest(BaseModel):
    source: str


class VerifyRequest(BaseModel):
    source: str
    vc_ids: list[str] | None = None
    timeout_ms: int = backend.DEFAULT_TIMEOUT_MS


class SetSolverRequest(BaseModel):
    source: str
    vc_id: str
    solver: str


def _error_entry(e: Exception) -> dict:
    span = getattr(e, "span", None)
    return {"span": list(span) if span else None, "message": getattr(e, "message", str(e))}


def _generate(source: str) -> tuple[HoareFile | None, list[VC], list[dict]]:
    try:
        file = parse(source)
        vcs, _warnings = bind_solvers(file, generate(file))
    except (ParseError, *GENERATION_ERRORS) as e:
        return None, [], [_error_entry(e)]
    return file, vcs, []


def create_app() -> FastAPI:
    app = FastAPI(title="hhlverify service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/parse")
    def parse_endpoint(req: SourceRequest) -> dict:
        try:
            parse(req.source)
        except ParseError as e:
            return {"ok": False, "errors": [_error_entry(e)]}
        return {"ok": True, "errors": []}

    @app.post("/vcs")
    def vcs_endpoint(req: SourceRequest) -> dict:
        _file, vcs, errors = _generate(req.source)
        return {
            "schema": JSON_SCHEMA_VERSION,
            "vcs": [vc_to_record(v) for v in vcs],
            "errors": errors,
        }

    @app.post("/verify")
    def verify_endpoint(req: VerifyRequest) -> dict:
        _file, vcs, errors = _generate(req.source)
        if errors:
            raise HTTPException(status_code=422, detail=errors)
        by_id = {v.id: v for v in vcs}
        if req.vc_ids is None:
            selected: list[tuple[str, VC | None]] = [(v.id, v) for v in vcs]
        else:
            selected = [(i, by_id.get(i)) for i in req.vc_ids]
        to_check = [v for _, v in selected if v is not None]
        cfg = backend.config_for("z3", timeout_ms=req.timeout_ms)
        checked = iter(backend.check_all(to_check, cfg, SOLVER_PARALLELISM))
        results = []
        for vc_id, v in selected:
            if v is None:
                results.append({"id": vc_id, "error": "unknown vc id"})
            else:
                results.append({"id": vc_id} | backend.result_record(next(checked)))
        return {"schema": JSON_SCHEMA_VERSION, "results": results}

    @app.post("/set_solver")
    def set_solver_endpoint(req: SetSolverRequest) -> dict:
        file, vcs, errors = _generate(req.source)
        if errors:
            raise HTTPException(status_code=422, detail=errors)
        target = next((v for v in vcs if v.id == req.vc_id), None)
        if target is None:
            raise HTTPException(status_code=422, detail=f"unknown vc id: {req.vc_id}")
        try:
            rewritten = rewrite_hint(
                file, target.origin.hint_path, target.label.render_hint(), req.solver
            )
        except UnknownAssertion as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return {"source": rewritten}

    @app.get("/examples")
    def examples_endpoint() -> dict:
        corpus = resources.files("hhlverify") / "corpus"
        examples = [
            {"name": entry.name, "source": entry.read_text(encoding="utf-8")}
            for entry in sorted(corpus.iterdir(), key=lambda e: e.name)
            if entry.name.endswith(".hhl")
        ]
        return {"examples": examples}

    return app


app = create_app()


def main(argv: Sequence[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="hhlverify-service", description="Run the local verification service."
    )
    parser.add_argument("--port", type=int, default=8899)
    args = parser.parse_args(argv)
    import uvicorn

    uvicorn.run(app, host="127.0.0.1", port=args.port)


if __name__ == "__main__":
    main()
