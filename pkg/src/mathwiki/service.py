"""HTTP facade over the wiki: every endpoint is a thin adapter around one
wiki-core call, so HTTP results are the JSON/XML encodings of the library
results. Author attribution comes from the `X-Author` header."""

from __future__ import annotations

from typing import Optional, Union

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .omdoc import ParseError
from .rendering import RenderWarning
from .triples import QueryPattern, Triple, UnsafeNegation
from .wiki import (
    ConflictError,
    CyclicImportError,
    GranularityError,
    NameCollisionError,
    PageNameError,
    SaveReceipt,
    UnknownPageError,
    Wiki,
    WikiError,
)


class SaveBody(BaseModel):
    source: str
    base_revision: Optional[int] = None


class QueryBody(BaseModel):
    patterns: list[tuple[str, str, str]]
    negations: list[tuple[str, str, str]] = []


def _error(status: int, code: str, message: str, detail: Optional[dict] = None) -> JSONResponse:
    body: dict = {"code": code, "message": message}
    if detail is not None:
        body["detail"] = detail
    return JSONResponse(status_code=status, content=body)


def _warning_json(w: RenderWarning) -> dict:
    out: dict = {"code": w.code, "message": w.message}
    if w.symbol is not None:
        out["symbol"] = str(w.symbol)
    return out


def _receipt_json(receipt: SaveReceipt) -> dict:
    return {
        "new_revision": receipt.new_revision,
        "invalidated": sorted(receipt.invalidated),
        "warnings": [_warning_json(w) for w in receipt.warnings],
    }


def _triples_json(triples: tuple[Triple, ...]) -> list[list[str]]:
    return [[t.subject, t.predicate, t.object] for t in triples]


def create_app(wiki: Wiki) -> FastAPI:
    app = FastAPI(title="mathwiki", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ParseError)
    async def _parse_error(_, exc: ParseError):
        return _error(422, "ParseError", exc.message, {
            "line": exc.line, "column": exc.column, "error_code": exc.code.value,
        })

    @app.exception_handler(WikiError)
    async def _wiki_error(_, exc: WikiError):
        if isinstance(exc, UnknownPageError):
            return _error(404, "UnknownPage", str(exc), {"page": exc.page})
        if isinstance(exc, ConflictError):
            return _error(409, "Conflict", str(exc), {"head_revision": exc.head_revision})
        if isinstance(exc, NameCollisionError):
            return _error(409, "NameCollision", str(exc), {"page": exc.page})
        if isinstance(exc, CyclicImportError):
            return _error(422, "CyclicImport", str(exc), {"cycle": exc.cycle})
        if isinstance(exc, (GranularityError, PageNameError)):
            return _error(422, type(exc).__name__, str(exc))
        return _error(500, "WikiError", str(exc))

    @app.exception_handler(UnsafeNegation)
    async def _unsafe_negation(_, exc: UnsafeNegation):
        return _error(400, "UnsafeNegation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _bad_body(_, exc: RequestValidationError):
        errors = [
            {"loc": [str(part) for part in e.get("loc", ())], "msg": str(e.get("msg", ""))}
            for e in exc.errors()
        ]
        return _error(400, "BadRequest", "request body does not match the endpoint schema",
                      {"errors": errors})

    @app.exception_handler(ValueError)
    async def _value_error(_, exc: ValueError):
        return _error(400, "BadRequest", str(exc))

    @app.get("/pages")
    def list_pages():
        return [
            {"name": p.name, "kind": p.kind.value, "head_revision": p.head_revision}
            for p in wiki.list_pages()
        ]

    @app.get("/pages/{name:path}/rendered")
    def rendered(name: str, accept: Optional[str] = Header(default=None)):
        page = wiki.rendered(name)
        if accept is not None and "text/plain" in accept:
            return PlainTextResponse(page.plain)
        return Response(content=page.layout_xml, media_type="text/xml")

    @app.get("/pages/{name:path}/links")
    def links(name: str):
        box = wiki.links_for(name)
        return {
            "extracted": _triples_json(box.extracted),
            "inferred": _triples_json(box.inferred),
        }

    @app.get("/pages/{name:path}/history")
    def history(name: str):
        return [
            {
                "id": r.id,
                "parent": r.parent,
                "author": r.author,
                "timestamp": r.timestamp,
                "tombstone": r.tombstone,
            }
            for r in wiki.history(name)
        ]

    @app.get("/pages/{name:path}")
    def get_page(name: str):
        info = wiki.page_info(name)
        return {
            "source": wiki.page_source(name),
            "head_revision": info.head_revision,
            "kind": info.kind.value,
        }

    @app.put("/pages/{name:path}")
    def put_page(
        name: str,
        body: SaveBody,
        x_author: str = Header(default="anonymous"),
    ):
        receipt = wiki.save_page(name, body.source, body.base_revision, author=x_author)
        return _receipt_json(receipt)

    @app.post("/query")
    def query(body: QueryBody):
        pattern = QueryPattern(tuple(body.patterns), tuple(body.negations))
        return wiki.query(pattern)

    @app.get("/tasks")
    def tasks():
        queue = wiki.work_queue()
        return {
            "unproven": list(queue.unproven),
            "undefined_symbols": list(queue.undefined_symbols),
            "missing_notations": [str(r) for r in queue.missing_notations],
            "dangling_refs": [list(pair) for pair in queue.dangling_refs],
        }

    @app.post("/import")
    async def import_doc(request: Request, x_author: str = Header(default="anonymous")):
        xml = (await request.body()).decode("utf-8")
        return {"pages": wiki.import_document(xml, author=x_author)}

    @app.get("/export/{theory}")
    def export(theory: str, closure: bool = Query(default=False)):
        return Response(content=wiki.export_theory(theory, closure), media_type="application/xml")

    return app


def serve(port: int, data_dir: Union[str, None]) -> None:
    """Run the service; the triple store is rebuilt from the data directory."""
    import uvicorn

    app = create_app(Wiki(data_dir))
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
