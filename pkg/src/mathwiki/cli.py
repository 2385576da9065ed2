"""Command-line interface sharing wiki-core directly (no service needed).

Exit codes: 0 success, 1 usage errors, 2 data errors. Data goes to stdout,
diagnostics to stderr; every subcommand has a machine-readable --json form.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .model import validate_statement
from .omdoc import ParseError, parse_document
from .triples import QueryPattern, UnsafeNegation
from .wiki import Wiki, WikiError

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; we reserve 2 for data errors
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mathwiki", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, data_dir: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if data_dir:
            p.add_argument("--data-dir", required=True, help="wiki data directory")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("import", "import a document, one page per theory/statement")
    p.add_argument("file", help="document XML file")
    p.add_argument("--author", default="anonymous")

    p = add("export", "assemble a theory (optionally with its dependency closure)")
    p.add_argument("theory")
    p.add_argument("--closure", action="store_true")

    p = add("render", "render a page's formula")
    p.add_argument("page")
    p.add_argument("--plain", action="store_true", help="plain text instead of layout XML")

    p = add("validate", "check a document file", data_dir=False)
    p.add_argument("file")

    add("tasks", "show where work needs to be done")

    p = add("query", "run a conjunctive pattern query")
    p.add_argument("--pattern", action="append", default=[], metavar="'S P O'",
                   help="triple pattern; terms starting with ? are variables")
    p.add_argument("--not", dest="negations", action="append", default=[], metavar="'S P O'",
                   help="negation pattern (not-exists)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=int(os.environ.get("WIKI_PORT", "8640")),
                   help="listen port (or WIKI_PORT)")
    p.add_argument("--data-dir", default=os.environ.get("WIKI_DATA"),
                   help="wiki data directory (or WIKI_DATA)")
    p.add_argument("--json", action="store_true", help=argparse.SUPPRESS)

    return parser


def _fail(message: str, as_json: bool, payload: Optional[dict] = None) -> int:
    if as_json:
        print(json.dumps({"error": message, **(payload or {})}, sort_keys=True))
    print(message, file=sys.stderr)
    return DATA_ERROR


def _parse_term_row(text: str) -> tuple[str, str, str]:
    terms = text.split()
    if len(terms) != 3:
        raise ValueError(f"pattern needs exactly three terms: {text!r}")
    return (terms[0], terms[1], terms[2])


def _cmd_import(args) -> int:
    try:
        xml = open(args.file, encoding="utf-8").read()
    except OSError as e:
        return _fail(str(e), args.json)
    wiki = Wiki(args.data_dir)
    try:
        pages = wiki.import_document(xml, author=args.author)
    except ParseError as e:
        return _fail(f"{args.file}:{e.line}:{e.column}: {e.code.value}: {e.message}", args.json,
                     {"line": e.line, "column": e.column, "code": e.code.value})
    except WikiError as e:
        return _fail(str(e), args.json)
    if args.json:
        print(json.dumps({"pages": pages}))
    else:
        for page in pages:
            print(page)
    return 0


def _cmd_export(args) -> int:
    wiki = Wiki(args.data_dir)
    try:
        xml = wiki.export_theory(args.theory, closure=args.closure)
    except WikiError as e:
        return _fail(str(e), args.json)
    if args.json:
        print(json.dumps({"document": xml}))
    else:
        print(xml)
    return 0


def _cmd_render(args) -> int:
    wiki = Wiki(args.data_dir)
    try:
        page = wiki.rendered(args.page)
    except WikiError as e:
        return _fail(str(e), args.json)
    if args.json:
        print(json.dumps({
            "layout": page.layout_xml,
            "plain": page.plain,
            "warnings": [{"code": w.code, "message": w.message} for w in page.warnings],
        }))
    else:
        print(page.plain if args.plain else page.layout_xml)
    for w in page.warnings:
        print(f"warning: {w.code}: {w.message}", file=sys.stderr)
    return 0


def _cmd_validate(args) -> int:
    try:
        xml = open(args.file, encoding="utf-8").read()
    except OSError as e:
        return _fail(str(e), args.json)
    try:
        doc = parse_document(xml)
    except ParseError as e:
        message = f"{args.file}:{e.line}:{e.column}: {e.code.value}: {e.message}"
        if args.json:
            print(json.dumps({"valid": False, "violations": [
                {"line": e.line, "column": e.column, "code": e.code.value, "message": e.message}
            ]}))
        print(message, file=sys.stderr)
        return DATA_ERROR
    violations = [
        {"statement": s.id, "code": v.code, "message": v.message}
        for theory in doc.theories
        for s in theory.statements
        for v in validate_statement(s)
    ]
    if violations:
        if args.json:
            print(json.dumps({"valid": False, "violations": violations}))
        for v in violations:
            print(f"{v['statement']}: {v['code']}: {v['message']}", file=sys.stderr)
        return DATA_ERROR
    if args.json:
        print(json.dumps({"valid": True, "violations": []}))
    else:
        print("OK")
    return 0


def _cmd_tasks(args) -> int:
    wiki = Wiki(args.data_dir)
    queue = wiki.work_queue()
    if args.json:
        print(json.dumps({
            "unproven": list(queue.unproven),
            "undefined_symbols": list(queue.undefined_symbols),
            "missing_notations": [str(r) for r in queue.missing_notations],
            "dangling_refs": [list(p) for p in queue.dangling_refs],
        }))
        return 0
    sections = [
        ("unproven assertions", list(queue.unproven)),
        ("undefined symbols", list(queue.undefined_symbols)),
        ("missing notations", [str(r) for r in queue.missing_notations]),
        ("dangling references", [f"{page} -> {target}" for page, target in queue.dangling_refs]),
    ]
    for title, items in sections:
        print(f"{title} ({len(items)})")
        for item in items:
            print(f"  {item}")
    return 0


def _cmd_query(args) -> int:
    wiki = Wiki(args.data_dir)
    try:
        pattern = QueryPattern(
            tuple(_parse_term_row(t) for t in args.pattern),
            tuple(_parse_term_row(t) for t in args.negations),
        )
        bindings = wiki.query(pattern)
    except (ValueError, UnsafeNegation) as e:
        return _fail(str(e), args.json)
    if args.json:
        print(json.dumps(bindings))
    else:
        for binding in bindings:
            print(" ".join(f"{var}={val}" for var, val in sorted(binding.items())))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    if args.data_dir is None:
        return _fail("serve needs --data-dir or WIKI_DATA", as_json=False)
    serve(args.port, args.data_dir)
    return 0


_COMMANDS = {
    "import": _cmd_import,
    "export": _cmd_export,
    "render": _cmd_render,
    "validate": _cmd_validate,
    "tasks": _cmd_tasks,
    "query": _cmd_query,
    "serve": _cmd_serve,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
