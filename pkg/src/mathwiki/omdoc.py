"""Bidirectional codec between the knowledge model and its wire formats.

Two formats live here: the XML document subset (``<omdoc>`` with theories,
statements and content-markup formulae) and the simplified ASCII formula
notation (``arith#plus(1, $x)``). Parsing is total: any input yields either
a valid model value or a positioned :class:`ParseError`, never a crash and
never an invariant-violating value. Serialization is canonical — equal
inputs produce byte-equal output, and parse(serialize(d)) == d.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union
from xml.parsers import expat

from .model import (
    Apply,
    DublinCore,
    Fixity,
    FormulaNode,
    Int,
    NotationDefinition,
    PageLink,
    Statement,
    StatementKind,
    Sym,
    SymbolRef,
    Text,
    TextBlock,
    Theory,
    Var,
    is_identifier,
    is_page_name,
    notation_violations,
    validate_statement,
)

MAX_NESTING = 200

INT_RE = re.compile(r"-?[0-9]+\Z")
SYMREF_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_-]*)#([A-Za-z_][A-Za-z0-9_-]*)\Z")


class ErrorCode(Enum):
    MALFORMED = "Malformed"
    UNKNOWN_ELEMENT = "UnknownElement"
    MISSING_ATTR = "MissingAttr"
    BAD_REF = "BadRef"
    BAD_INTEGER = "BadInteger"


class ParseError(Exception):
    """Positioned parse failure; `line` and `column` are 1-based."""

    def __init__(self, line: int, column: int, code: ErrorCode, message: str):
        super().__init__(f"{line}:{column}: {code.value}: {message}")
        self.line = max(1, line)
        self.column = max(1, column)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Document:
    theories: tuple[Theory, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "theories", tuple(self.theories))


# --- low-level XML tree with source positions --------------------------------


@dataclass
class _Elem:
    tag: str
    attrs: dict[str, str]
    children: list[Union["_Elem", str]]
    line: int
    column: int

    def err(self, code: ErrorCode, message: str) -> ParseError:
        return ParseError(self.line, self.column, code, message)


def _parse_xml_tree(text: str) -> _Elem:
    parser = expat.ParserCreate()
    root: list[_Elem] = []
    stack: list[_Elem] = []

    def start(tag: str, attrs: dict[str, str]) -> None:
        node = _Elem(tag, attrs, [], parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag: str) -> None:
        stack.pop()

    def chars(data: str) -> None:
        if not stack:
            return  # whitespace around the root element
        children = stack[-1].children
        if children and isinstance(children[-1], str):
            children[-1] += data
        else:
            children.append(data)

    def doctype(*args) -> None:
        raise ParseError(
            parser.CurrentLineNumber, parser.CurrentColumnNumber + 1,
            ErrorCode.MALFORMED, "DTD declarations are not supported",
        )

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.StartDoctypeDeclHandler = doctype
    try:
        parser.Parse(text, True)
    except expat.ExpatError as e:
        message = expat.errors.messages.get(e.code, str(e))
        raise ParseError(
            getattr(e, "lineno", 1), getattr(e, "offset", 0) + 1,
            ErrorCode.MALFORMED, message,
        ) from None
    if not root:
        raise ParseError(1, 1, ErrorCode.MALFORMED, "no root element")
    return root[0]


def _element_children(node: _Elem) -> list[_Elem]:
    """Child elements, rejecting any non-whitespace stray text."""
    out = []
    for child in node.children:
        if isinstance(child, str):
            if child.strip():
                raise node.err(ErrorCode.MALFORMED, f"unexpected text inside <{node.tag}>")
        else:
            out.append(child)
    return out


def _text_content(node: _Elem) -> str:
    parts = []
    for child in node.children:
        if isinstance(child, _Elem):
            raise child.err(ErrorCode.MALFORMED, f"unexpected <{child.tag}> inside <{node.tag}>")
        parts.append(child)
    return "".join(parts)


def _check_attrs(node: _Elem, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> None:
    for name in required:
        if name not in node.attrs:
            raise node.err(ErrorCode.MISSING_ATTR, f"<{node.tag}> requires attribute {name!r}")
    for name in node.attrs:
        if name not in required and name not in optional:
            raise node.err(ErrorCode.MALFORMED, f"<{node.tag}> has unknown attribute {name!r}")


# --- model building -----------------------------------------------------------

_STATEMENT_TAGS = {
    "symbol": StatementKind.SYMBOL_DECL,
    "definition": StatementKind.DEFINITION,
    "axiom": StatementKind.AXIOM,
    "assertion": StatementKind.ASSERTION,
    "proof": StatementKind.PROOF,
    "example": StatementKind.EXAMPLE,
}

_DC_TAGS = ("dc-title", "dc-creator", "dc-description", "dc-date")


def parse_document(xml: str) -> Document:
    """Parse an omdoc document. Raises :class:`ParseError` on any deviation."""
    root = _parse_xml_tree(xml)
    if root.tag != "omdoc":
        raise root.err(ErrorCode.UNKNOWN_ELEMENT, f"expected <omdoc>, got <{root.tag}>")
    _check_attrs(root, ())
    theories = []
    for node in _element_children(root):
        if node.tag != "theory":
            raise node.err(ErrorCode.UNKNOWN_ELEMENT, f"<{node.tag}> is not allowed inside <omdoc>")
        theories.append(_parse_theory(node))
    return Document(tuple(theories))


def _parse_theory(node: _Elem) -> Theory:
    _check_attrs(node, ("xml:id",))
    theory_id = node.attrs["xml:id"]
    if not is_identifier(theory_id):
        raise node.err(ErrorCode.BAD_REF, f"bad theory id {theory_id!r}")
    metadata = DublinCore()
    saw_metadata = False
    imports: list[str] = []
    statements: list[Statement] = []
    notation_ids: set[str] = set()
    for child in _element_children(node):
        if child.tag == "metadata":
            if saw_metadata:
                raise child.err(ErrorCode.MALFORMED, "more than one <metadata>")
            saw_metadata = True
            metadata = _parse_metadata(child)
        elif child.tag == "imports":
            _check_attrs(child, ("from",))
            target = child.attrs["from"]
            if not is_identifier(target):
                raise child.err(ErrorCode.BAD_REF, f"bad import target {target!r}")
            if target == theory_id:
                raise child.err(ErrorCode.BAD_REF, f"theory {theory_id!r} must not import itself")
            if target in imports:
                raise child.err(ErrorCode.BAD_REF, f"duplicate import of {target!r}")
            imports.append(target)
        elif child.tag in _STATEMENT_TAGS:
            statements.append(_parse_statement(child, theory_id, depth=0))
        elif child.tag == "notation":
            statements.append(_parse_notation(child, theory_id, notation_ids))
        else:
            raise child.err(ErrorCode.UNKNOWN_ELEMENT, f"<{child.tag}> is not allowed inside <theory>")
    try:
        return Theory(theory_id, tuple(imports), metadata, tuple(statements))
    except ValueError as e:
        raise node.err(ErrorCode.BAD_REF, str(e)) from None


def _parse_metadata(node: _Elem) -> DublinCore:
    _check_attrs(node, ())
    values: dict[str, str] = {}
    for child in _element_children(node):
        if child.tag not in _DC_TAGS:
            raise child.err(ErrorCode.UNKNOWN_ELEMENT, f"<{child.tag}> is not a metadata element")
        if child.tag in values:
            raise child.err(ErrorCode.MALFORMED, f"duplicate <{child.tag}>")
        _check_attrs(child, ())
        text = _text_content(child)
        if text == "":
            raise child.err(ErrorCode.MALFORMED, f"<{child.tag}> must not be empty")
        values[child.tag] = text
    return DublinCore(
        title=values.get("dc-title"),
        creator=values.get("dc-creator"),
        description=values.get("dc-description"),
        date=values.get("dc-date"),
    )


def _parse_statement(node: _Elem, theory_id: str, depth: int) -> Statement:
    if depth > MAX_NESTING:
        raise node.err(ErrorCode.MALFORMED, "statement nesting too deep")
    kind = _STATEMENT_TAGS[node.tag]
    if kind in (StatementKind.DEFINITION, StatementKind.PROOF):
        _check_attrs(node, ("id", "for"))
    elif kind is StatementKind.EXAMPLE:
        _check_attrs(node, ("id",), ("for",))
    else:
        _check_attrs(node, ("id",))
    stmt_id = node.attrs["id"]
    if not is_identifier(stmt_id):
        raise node.err(ErrorCode.BAD_REF, f"bad statement id {stmt_id!r}")
    for_target = node.attrs.get("for")
    if for_target is not None and not is_page_name(for_target):
        raise node.err(ErrorCode.BAD_REF, f"bad target {for_target!r}")

    informal: list[TextBlock] = []
    formal: Optional[FormulaNode] = None
    steps: list[Statement] = []
    for child in _element_children(node):
        if child.tag == "CMP":
            for block in _parse_cmp(child):
                # adjacent text runs merge so parser output stays canonical
                if isinstance(block, Text) and informal and isinstance(informal[-1], Text):
                    informal[-1] = Text(informal[-1].text + block.text)
                else:
                    informal.append(block)
        elif child.tag == "FMP":
            if formal is not None:
                raise child.err(ErrorCode.MALFORMED, "more than one <FMP>")
            formal = _parse_fmp(child)
        elif child.tag in _STATEMENT_TAGS and kind is StatementKind.PROOF:
            steps.append(_parse_statement(child, theory_id, depth + 1))
        else:
            raise child.err(ErrorCode.UNKNOWN_ELEMENT, f"<{child.tag}> is not allowed inside <{node.tag}>")

    stmt = Statement(
        id=stmt_id,
        kind=kind,
        home_theory=theory_id,
        for_target=for_target,
        informal=tuple(informal),
        formal=formal,
        steps=tuple(steps),
    )
    violations = validate_statement(stmt)
    if violations:
        raise node.err(ErrorCode.MALFORMED, violations[0].message)
    return stmt


def notation_statement_id(ref: SymbolRef, taken: set[str]) -> str:
    """Deterministic page-local id for a notation declaration.

    The wire format carries no id for <notation>, so parsing synthesizes
    one from the symbol; duplicates within a theory get a numeric suffix.
    """
    base = f"notation-{ref.theory}-{ref.name}"
    candidate = base
    n = 1
    while candidate in taken:
        n += 1
        candidate = f"{base}-{n}"
    return candidate


def _parse_notation(node: _Elem, theory_id: str, taken_ids: set[str]) -> Statement:
    _check_attrs(node, ("for", "fixity", "operator", "precedence"))
    if _element_children(node):
        raise node.err(ErrorCode.MALFORMED, "<notation> must be empty")
    m = SYMREF_RE.match(node.attrs["for"])
    if not m:
        raise node.err(ErrorCode.BAD_REF, f"bad symbol reference {node.attrs['for']!r}")
    ref = SymbolRef(m.group(1), m.group(2))
    try:
        fixity = Fixity(node.attrs["fixity"])
    except ValueError:
        raise node.err(ErrorCode.MALFORMED, f"bad fixity {node.attrs['fixity']!r}") from None
    if not INT_RE.match(node.attrs["precedence"]):
        raise node.err(ErrorCode.BAD_INTEGER, f"bad precedence {node.attrs['precedence']!r}")
    notation = NotationDefinition(ref, fixity, node.attrs["operator"], int(node.attrs["precedence"]))
    problems = notation_violations(notation)
    if problems:
        raise node.err(ErrorCode.MALFORMED, problems[0])
    stmt_id = notation_statement_id(ref, taken_ids)
    taken_ids.add(stmt_id)
    return Statement(
        id=stmt_id,
        kind=StatementKind.NOTATION_DECL,
        home_theory=theory_id,
        for_target=ref,
        notation=notation,
    )


def _parse_cmp(node: _Elem) -> list[TextBlock]:
    _check_attrs(node, ())
    blocks: list[TextBlock] = []
    for child in node.children:
        if isinstance(child, str):
            if child:
                blocks.append(Text(child))
        elif child.tag == "link":
            _check_attrs(child, ("to",))
            target = child.attrs["to"]
            if not is_page_name(target):
                raise child.err(ErrorCode.BAD_REF, f"bad link target {target!r}")
            blocks.append(PageLink(target, _text_content(child)))
        else:
            raise child.err(ErrorCode.UNKNOWN_ELEMENT, f"<{child.tag}> is not allowed inside <CMP>")
    return blocks


def _parse_fmp(node: _Elem) -> FormulaNode:
    _check_attrs(node, ())
    children = _element_children(node)
    if len(children) != 1:
        raise node.err(ErrorCode.MALFORMED, "<FMP> must contain exactly one formula element")
    return _parse_formula_elem(children[0], depth=0)


def _parse_formula_elem(node: _Elem, depth: int) -> FormulaNode:
    if depth > MAX_NESTING:
        raise node.err(ErrorCode.MALFORMED, "formula nesting too deep")
    if node.tag == "OMS":
        _check_attrs(node, ("cd", "name"))
        if _element_children(node):
            raise node.err(ErrorCode.MALFORMED, "<OMS> must be empty")
        try:
            return Sym(SymbolRef(node.attrs["cd"], node.attrs["name"]))
        except ValueError as e:
            raise node.err(ErrorCode.BAD_REF, str(e)) from None
    if node.tag == "OMV":
        _check_attrs(node, ("name",))
        if _element_children(node):
            raise node.err(ErrorCode.MALFORMED, "<OMV> must be empty")
        try:
            return Var(node.attrs["name"])
        except ValueError as e:
            raise node.err(ErrorCode.BAD_REF, str(e)) from None
    if node.tag == "OMI":
        _check_attrs(node, ())
        text = _text_content(node).strip()
        if not INT_RE.match(text):
            raise node.err(ErrorCode.BAD_INTEGER, f"bad integer literal {text!r}")
        return Int(int(text))
    if node.tag == "OMA":
        _check_attrs(node, ())
        children = _element_children(node)
        if len(children) < 2:
            raise node.err(ErrorCode.MALFORMED, "<OMA> needs a head and at least one argument")
        parts = [_parse_formula_elem(c, depth + 1) for c in children]
        return Apply(parts[0], tuple(parts[1:]))
    raise node.err(ErrorCode.UNKNOWN_ELEMENT, f"<{node.tag}> is not a formula element")


# --- canonical serialization --------------------------------------------------


def _esc_text(s: str) -> str:
    # \r must be a character reference or the parser folds it into \n
    return (
        s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        .replace("\r", "&#13;")
    )


def _esc_attr(s: str) -> str:
    # newlines and tabs in attribute values are normalized to spaces unless
    # written as character references
    return (
        _esc_text(s).replace('"', "&quot;")
        .replace("\n", "&#10;").replace("\t", "&#9;")
    )


class _XmlWriter:
    def __init__(self) -> None:
        self.parts: list[str] = []
        self.depth = 0

    def line(self, text: str) -> None:
        self.parts.append("  " * self.depth + text)

    def result(self) -> str:
        return "\n".join(self.parts)


def _open_tag(tag: str, attrs: list[tuple[str, str]], selfclose: bool = False) -> str:
    inner = "".join(f' {k}="{_esc_attr(v)}"' for k, v in attrs)
    return f"<{tag}{inner}{'/' if selfclose else ''}>"


def serialize_document(d: Document) -> str:
    """Canonical, deterministic serialization; re-parses to an equal Document."""
    if not d.theories:
        return "<omdoc/>"
    w = _XmlWriter()
    w.line("<omdoc>")
    w.depth += 1
    for theory in d.theories:
        _write_theory(w, theory)
    w.depth -= 1
    w.line("</omdoc>")
    return w.result()


def _write_theory(w: _XmlWriter, t: Theory) -> None:
    attrs = [("xml:id", t.id)]
    if t.metadata.is_empty() and not t.imports and not t.statements:
        w.line(_open_tag("theory", attrs, selfclose=True))
        return
    w.line(_open_tag("theory", attrs))
    w.depth += 1
    if not t.metadata.is_empty():
        _write_metadata(w, t.metadata)
    for target in t.imports:
        w.line(_open_tag("imports", [("from", target)], selfclose=True))
    for s in t.statements:
        _write_statement(w, s)
    w.depth -= 1
    w.line("</theory>")


def _write_metadata(w: _XmlWriter, m: DublinCore) -> None:
    w.line("<metadata>")
    w.depth += 1
    for tag, value in zip(_DC_TAGS, (m.title, m.creator, m.description, m.date)):
        if value is not None:
            w.line(f"<{tag}>{_esc_text(value)}</{tag}>")
    w.depth -= 1
    w.line("</metadata>")


def _write_statement(w: _XmlWriter, s: Statement) -> None:
    if s.kind is StatementKind.NOTATION_DECL:
        n = s.notation
        assert n is not None
        w.line(_open_tag("notation", [
            ("for", str(n.for_symbol)),
            ("fixity", n.fixity.value),
            ("operator", n.operator),
            ("precedence", str(n.precedence)),
        ], selfclose=True))
        return
    tag = s.kind.value
    attrs = [("id", s.id)]
    if s.for_target is not None:
        attrs.append(("for", s.for_target))
    if not s.informal and s.formal is None and not s.steps:
        w.line(_open_tag(tag, attrs, selfclose=True))
        return
    w.line(_open_tag(tag, attrs))
    w.depth += 1
    if s.informal:
        w.line(f"<CMP>{_cmp_content(s.informal)}</CMP>")
    if s.formal is not None:
        w.line("<FMP>")
        w.depth += 1
        _write_formula(w, s.formal)
        w.depth -= 1
        w.line("</FMP>")
    for step in s.steps:
        _write_statement(w, step)
    w.depth -= 1
    w.line(f"</{tag}>")


def _cmp_content(blocks: tuple[TextBlock, ...]) -> str:
    parts = []
    for block in blocks:
        if isinstance(block, Text):
            parts.append(_esc_text(block.text))
        else:
            parts.append(f'<link to="{_esc_attr(block.target)}">{_esc_text(block.label)}</link>')
    return "".join(parts)


def _write_formula(w: _XmlWriter, f: FormulaNode) -> None:
    if isinstance(f, Sym):
        w.line(_open_tag("OMS", [("cd", f.ref.theory), ("name", f.ref.name)], selfclose=True))
    elif isinstance(f, Var):
        w.line(_open_tag("OMV", [("name", f.name)], selfclose=True))
    elif isinstance(f, Int):
        w.line(f"<OMI>{f.value}</OMI>")
    else:
        w.line("<OMA>")
        w.depth += 1
        _write_formula(w, f.head)
        for arg in f.args:
            _write_formula(w, arg)
        w.depth -= 1
        w.line("</OMA>")


# --- ASCII formula notation ---------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<int>-?[0-9]+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_-]*)"
    r"|(?P<punct>[#$(),])"
)


@dataclass
class _Token:
    kind: str  # int | ident | punct | end
    text: str
    line: int
    column: int


def _tokenize_formula(src: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(line, col, ErrorCode.MALFORMED, f"unexpected character {src[pos]!r}")
        text = m.group(0)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(_Token("end", "", line, col))
    return tokens


class _FormulaParser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: _Token, message: str, code: ErrorCode = ErrorCode.MALFORMED) -> ParseError:
        return ParseError(tok.line, tok.column, code, message)

    def expect_punct(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            raise self.fail(tok, f"expected {text!r}, got {tok.text or 'end of input'!r}")
        return tok

    def parse(self) -> FormulaNode:
        node = self.formula(0)
        tok = self.peek()
        if tok.kind != "end":
            raise self.fail(tok, f"unexpected trailing input {tok.text!r}")
        return node

    def formula(self, depth: int) -> FormulaNode:
        if depth > MAX_NESTING:
            tok = self.peek()
            raise self.fail(tok, "formula nesting too deep")
        node = self.primary()
        while self.peek().kind == "punct" and self.peek().text == "(":
            self.next()
            args = [self.formula(depth + 1)]
            while self.peek().text == ",":
                self.next()
                args.append(self.formula(depth + 1))
            self.expect_punct(")")
            node = Apply(node, tuple(args))
        return node

    def primary(self) -> FormulaNode:
        tok = self.next()
        if tok.kind == "int":
            return Int(int(tok.text))
        if tok.kind == "punct" and tok.text == "$":
            name = self.next()
            if name.kind != "ident":
                raise self.fail(name, "expected a variable name after '$'")
            return Var(name.text)
        if tok.kind == "ident":
            hash_tok = self.next()
            if hash_tok.kind != "punct" or hash_tok.text != "#":
                raise self.fail(hash_tok, "expected '#' after theory name", ErrorCode.BAD_REF)
            name = self.next()
            if name.kind != "ident":
                raise self.fail(name, "expected a symbol name after '#'", ErrorCode.BAD_REF)
            return Sym(SymbolRef(tok.text, name.text))
        raise self.fail(tok, f"expected a formula, got {tok.text or 'end of input'!r}")


def parse_formula_ascii(src: str) -> FormulaNode:
    """Parse the ASCII notation. Raises :class:`ParseError` on any deviation."""
    return _FormulaParser(_tokenize_formula(src)).parse()


def print_formula_ascii(f: FormulaNode) -> str:
    """Canonical ASCII form: single space after commas, none elsewhere."""
    if isinstance(f, Sym):
        return str(f.ref)
    if isinstance(f, Var):
        return f"${f.name}"
    if isinstance(f, Int):
        return str(f.value)
    head = print_formula_ascii(f.head)
    return f"{head}({', '.join(print_formula_ascii(a) for a in f.args)})"
