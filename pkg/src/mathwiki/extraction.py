"""Triple extraction: maps one page's content to its fact set.

Statement-level facts use the page name as the subject; formula occurrences
and proof steps get page-prefixed skolem ids (`page#f1`, `page#stepid`) so
the containment chain page → step → formula lives in the graph.
"""

from __future__ import annotations

from typing import Union

from . import ontology as onto
from .model import Statement, StatementKind, SymbolRef, Theory, symbols_used
from .triples import Extracted, Triple

_KIND_CLASS = {
    StatementKind.SYMBOL_DECL: onto.SYMBOL,
    StatementKind.DEFINITION: onto.DEFINITION,
    StatementKind.AXIOM: onto.AXIOM,
    StatementKind.ASSERTION: onto.ASSERTION,
    StatementKind.PROOF: onto.PROOF,
    StatementKind.EXAMPLE: onto.EXAMPLE,
    StatementKind.NOTATION_DECL: onto.NOTATION_DEFINITION,
}

_TARGET_PROPERTY = {
    StatementKind.PROOF: onto.PROVES,
    StatementKind.DEFINITION: onto.DEFINES,
    StatementKind.EXAMPLE: onto.EXEMPLIFIES,
}


def symbol_node(ref: SymbolRef) -> str:
    """Graph node id for a symbol: `<theory-page>#<name>`."""
    return f"{ref.theory}#{ref.name}"


def owner_page(node_id: str) -> str:
    """The page a (possibly skolem) node id belongs to."""
    return node_id.split("#", 1)[0]


def extract(page_name: str, content: Union[Theory, Statement]) -> set[Triple]:
    """All facts extracted from one page, with Extracted(page_name) provenance."""
    prov = Extracted(page_name)
    out: set[Triple] = set()

    def fact(s: str, p: str, o: str) -> None:
        out.add(Triple(s, p, o, prov))

    if isinstance(content, Theory):
        fact(page_name, onto.TYPE, onto.THEORY)
        for target in content.imports:
            fact(page_name, onto.IMPORTS, target)
        return out

    fact(content.home_theory, onto.HOME_THEORY_OF, page_name)
    formula_counter = [0]

    def walk(node_id: str, s: Statement) -> None:
        fact(node_id, onto.TYPE, _KIND_CLASS[s.kind])
        prop = _TARGET_PROPERTY.get(s.kind)
        if prop is not None and isinstance(s.for_target, str):
            fact(node_id, prop, s.for_target)
        if s.kind is StatementKind.NOTATION_DECL and isinstance(s.for_target, SymbolRef):
            sym = symbol_node(s.for_target)
            fact(node_id, onto.RENDERS, sym)
            fact(sym, onto.TYPE, onto.SYMBOL)
        if s.formal is not None:
            formula_counter[0] += 1
            fid = f"{page_name}#f{formula_counter[0]}"
            fact(node_id, onto.CONTAINS, fid)
            fact(fid, onto.TYPE, onto.FORMULA)
            for ref in symbols_used(s.formal):
                fact(fid, onto.USES, symbol_node(ref))
        for step in s.steps:
            step_id = f"{page_name}#{step.id}"
            fact(node_id, onto.CONTAINS, step_id)
            walk(step_id, step)

    walk(page_name, content)
    return out
