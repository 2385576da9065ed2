"""Notation-driven formula rendering.

Turns a formula tree plus a table of per-symbol notation definitions into a
presentation tree (rows, operator/identifier/number tokens, links, fences),
then linearizes that tree to plain text or to the layout XML dialect
(`m:row`, `m:o`, `m:i`, `m:n`, `m:fenced`, with `href` for symbol links).

Precedence convention: higher binds tighter; an argument in an operator
position is parenthesized iff it is an application whose head notation has
strictly lower precedence than the parent's. Equal precedence stays flat.
Prefix-call and fallback arguments already sit inside the call fence and
are never parenthesized again.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .model import Apply, Fixity, FormulaNode, Int, NotationDefinition, Sym, SymbolRef, Var

# warning codes
MISSING_NOTATION = "MissingNotation"
OPAQUE_HEAD = "OpaqueHead"
DANGLING_SYMBOL = "DanglingSymbol"
MIXFIX_ARITY = "MixfixArity"
DUPLICATE_NOTATION = "DuplicateNotation"


@dataclass(frozen=True)
class RenderWarning:
    code: str
    message: str
    symbol: Optional[SymbolRef] = None


@dataclass(frozen=True)
class Row:
    children: tuple["PresentationNode", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Op:
    text: str


@dataclass(frozen=True)
class Ident:
    text: str


@dataclass(frozen=True)
class Num:
    text: str


@dataclass(frozen=True)
class Link:
    target: str
    child: "PresentationNode"


@dataclass(frozen=True)
class Fenced:
    child: "PresentationNode"


PresentationNode = Union[Row, Op, Ident, Num, Link, Fenced]


@dataclass
class NotationTable:
    """Per-symbol rendering rules plus the symbol → declaring-page map."""

    defs: dict[SymbolRef, NotationDefinition] = field(default_factory=dict)
    declared: dict[SymbolRef, str] = field(default_factory=dict)


_MIXFIX_SPLIT_RE = re.compile(r"#([0-9]+)")


class _Renderer:
    def __init__(self, table: NotationTable):
        self.table = table
        self.warnings: list[RenderWarning] = []
        self._warned: set[tuple] = set()

    def warn(self, code: str, message: str, symbol: Optional[SymbolRef] = None) -> None:
        key = (code, symbol, message)
        if key not in self._warned:
            self._warned.add(key)
            self.warnings.append(RenderWarning(code, message, symbol))

    def link(self, ref: SymbolRef, token: PresentationNode) -> PresentationNode:
        page = self.table.declared.get(ref)
        if page is None:
            self.warn(DANGLING_SYMBOL, f"symbol {ref} has no declaration page", ref)
            return token
        return Link(page, token)

    def render(self, f: FormulaNode) -> PresentationNode:
        if isinstance(f, Var):
            return Ident(f.name)
        if isinstance(f, Int):
            return Num(str(f.value))
        if isinstance(f, Sym):
            defn = self.table.defs.get(f.ref)
            if defn is None:
                self.warn(MISSING_NOTATION, f"no notation definition for {f.ref}", f.ref)
            display = defn.operator if defn is not None and defn.fixity is Fixity.PREFIX \
                else f"{f.ref.theory}?{f.ref.name}"
            return self.link(f.ref, Ident(display))
        return self.render_apply(f)

    def render_apply(self, f: Apply) -> PresentationNode:
        if not isinstance(f.head, Sym):
            self.warn(OPAQUE_HEAD, "application head is not a symbol")
            return Row((self.render(f.head), Fenced(self.comma_row(f.args))))
        ref = f.head.ref
        defn = self.table.defs.get(ref)
        if defn is None:
            self.warn(MISSING_NOTATION, f"no notation definition for {ref}", ref)
            token = self.link(ref, Ident(f"{ref.theory}?{ref.name}"))
            return Row((token, Fenced(self.comma_row(f.args))))
        if defn.fixity is Fixity.PREFIX:
            return Row((self.link(ref, Op(defn.operator)), Fenced(self.comma_row(f.args))))
        if defn.fixity is Fixity.INFIX:
            parts: list[PresentationNode] = []
            for i, arg in enumerate(f.args):
                if i:
                    parts.append(self.link(ref, Op(defn.operator)))
                parts.append(self.operand(arg, defn.precedence))
            return Row(tuple(parts))
        if defn.fixity is Fixity.POSTFIX:
            parts = list(self.comma_row_parts(f.args, defn.precedence))
            parts.append(self.link(ref, Op(defn.operator)))
            return Row(tuple(parts))
        return self.render_mixfix(f, ref, defn)

    def render_mixfix(self, f: Apply, ref: SymbolRef, defn: NotationDefinition) -> PresentationNode:
        pieces = _MIXFIX_SPLIT_RE.split(defn.operator)
        slot_count = len(pieces) // 2
        if slot_count != len(f.args):
            self.warn(
                MIXFIX_ARITY,
                f"notation for {ref} has {slot_count} slots but got {len(f.args)} arguments",
                ref,
            )
        parts: list[PresentationNode] = []
        head_linked = False
        for i, piece in enumerate(pieces):
            if i % 2 == 0:
                text = piece.strip()
                if text:
                    token: PresentationNode = Op(text)
                    if not head_linked:
                        token = self.link(ref, token)
                        head_linked = True
                    parts.append(token)
            else:
                slot = int(piece)
                if slot <= len(f.args):
                    parts.append(self.operand(f.args[slot - 1], defn.precedence))
                else:
                    parts.append(Ident(f"#{slot}"))
        if len(f.args) > slot_count:
            parts.append(Fenced(self.comma_row(f.args[slot_count:])))
        return Row(tuple(parts))

    def operand(self, arg: FormulaNode, parent_prec: int) -> PresentationNode:
        """Render an argument in an operator position, fencing it when its
        head notation binds strictly less tightly than the parent."""
        node = self.render(arg)
        if isinstance(arg, Apply) and isinstance(arg.head, Sym):
            child_defn = self.table.defs.get(arg.head.ref)
            if child_defn is not None and child_defn.precedence < parent_prec:
                return Fenced(node)
        return node

    def comma_row_parts(self, args: tuple[FormulaNode, ...], parent_prec: Optional[int] = None) -> list[PresentationNode]:
        parts: list[PresentationNode] = []
        for i, arg in enumerate(args):
            if i:
                parts.append(Op(","))
            if parent_prec is None:
                parts.append(self.render(arg))
            else:
                parts.append(self.operand(arg, parent_prec))
        return parts

    def comma_row(self, args: tuple[FormulaNode, ...]) -> PresentationNode:
        return Row(tuple(self.comma_row_parts(args)))


def render(f: FormulaNode, table: NotationTable) -> tuple[PresentationNode, list[RenderWarning]]:
    """Render a formula under the given notation table.

    Never fails: symbols without notation fall back to `theory?name(args)`
    with a MissingNotation warning, non-symbol heads render opaquely.
    """
    r = _Renderer(table)
    return r.render(f), r.warnings


# --- linearization -----------------------------------------------------------


def render_plain(p: PresentationNode) -> str:
    """Plain-text form: single spaces around operator tokens, tight fences,
    commas attach to the preceding token, call fences glue to the callee."""
    tokens: list[tuple[str, str]] = []  # (kind, text)

    def walk(node: PresentationNode) -> None:
        if isinstance(node, Row):
            for child in node.children:
                walk(child)
        elif isinstance(node, Op):
            tokens.append(("comma" if node.text == "," else "op", node.text))
        elif isinstance(node, (Ident, Num)):
            tokens.append(("atom", node.text))
        elif isinstance(node, Link):
            walk(node.child)
        else:
            tokens.append(("open", "("))
            walk(node.child)
            tokens.append(("close", ")"))

    walk(p)
    out: list[str] = []
    prev_kind = None
    for kind, text in tokens:
        glue = (
            prev_kind is None
            or prev_kind == "open"
            or kind in ("close", "comma")
            or (kind == "open" and prev_kind in ("atom", "close"))
        )
        if not glue:
            out.append(" ")
        out.append(text)
        prev_kind = kind
    return "".join(out)


# --- layout XML ----------------------------------------------------------------


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _esc_attr(s: str) -> str:
    return _esc(s).replace('"', "&quot;")


_LEAF_TAGS = {Op: "m:o", Ident: "m:i", Num: "m:n"}


def serialize_layout(p: PresentationNode) -> str:
    """Deterministic layout XML mirroring the presentation tree 1:1."""
    return _layout(p, None)


def _layout(node: PresentationNode, href: Optional[str]) -> str:
    if isinstance(node, Link):
        return _layout(node.child, node.target)
    attr = f' href="{_esc_attr(href)}"' if href is not None else ""
    if isinstance(node, Row):
        if not node.children:
            return f"<m:row{attr}/>"
        inner = "".join(_layout(c, None) for c in node.children)
        return f"<m:row{attr}>{inner}</m:row>"
    if isinstance(node, Fenced):
        return f"<m:fenced{attr}>{_layout(node.child, None)}</m:fenced>"
    tag = _LEAF_TAGS[type(node)]
    return f"<{tag}{attr}>{_esc(node.text)}</{tag}>"
