"""Shared fixtures, random generators, and independent oracles.

The oracles here deliberately re-derive results by the dumbest possible
means (full scans, naive fixpoints, bitset Warshall closure, source walks)
so the indexed/incremental production paths are checked against a second,
independent route.
"""

from __future__ import annotations

import random
import string
from typing import Optional

from mathwiki.model import (
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
    Theory,
    Var,
)
from mathwiki.omdoc import Document, notation_statement_id, serialize_document
from mathwiki.ontology import OntologySchema
from mathwiki.triples import Extracted, INFERRED, Triple
from mathwiki.wiki import Wiki, page_document

# --- paper-anchored fixtures -------------------------------------------------

# The proof page from the figure, wrapped in a home theory as the page
# format requires; saved under the page name "pyth-proof".
FIG1_PAGE_NAME = "pyth-proof"
FIG1_SOURCE = """<omdoc>
  <theory xml:id="geometry">
    <proof id="pyth-proof" for="pythagoras">
      <CMP>Consider a right triangle with legs a and b and hypotenuse c.</CMP>
    </proof>
  </theory>
</omdoc>"""

# The algebra refactoring chain: semigroup, monoid importing it, group on top.
FOOTNOTE_CORPUS = """<omdoc>
  <theory xml:id="semigroup">
    <symbol id="op"><CMP>an associative operation on a set</CMP></symbol>
    <axiom id="associativity"><CMP>op is associative</CMP></axiom>
  </theory>
  <theory xml:id="monoid">
    <imports from="semigroup"/>
    <symbol id="e"><CMP>an identity element</CMP></symbol>
    <axiom id="identity"><CMP>e is neutral for op</CMP></axiom>
  </theory>
  <theory xml:id="group">
    <imports from="monoid"/>
    <symbol id="inv"><CMP>inverse elements</CMP></symbol>
    <axiom id="inverses"><CMP>every element has an inverse</CMP></axiom>
  </theory>
</omdoc>"""

# Exactly one unproved theorem, one undefined symbol, one notation-less
# used symbol, one dangling import.
WORK_QUEUE_FIXTURE = """<omdoc>
  <theory xml:id="tasks_t">
    <imports from="ghost"/>
    <symbol id="sym1"><CMP>declared but never defined</CMP></symbol>
    <symbol id="sym2"><CMP>declared and defined</CMP></symbol>
    <definition id="def-sym2" for="tasks_t/sym2"><CMP>defines sym2</CMP></definition>
    <assertion id="thm">
      <CMP>an unproved theorem using sym2</CMP>
      <FMP><OMA><OMS cd="tasks_t" name="sym2"/><OMI>1</OMI></OMA></FMP>
    </assertion>
  </theory>
</omdoc>"""

# Everything proved, defined, and annotated: all four task lists empty.
ALL_DONE_FIXTURE = """<omdoc>
  <theory xml:id="done_t">
    <symbol id="plus"><CMP>addition</CMP></symbol>
    <definition id="def-plus" for="done_t/plus"><CMP>defines plus</CMP></definition>
    <assertion id="thm">
      <CMP>a proved theorem</CMP>
      <FMP><OMA><OMS cd="done_t" name="plus"/><OMI>1</OMI><OMI>2</OMI></OMA></FMP>
    </assertion>
    <proof id="thm-proof" for="done_t/thm"><CMP>obvious</CMP></proof>
    <notation for="done_t#plus" fixity="infix" operator="+" precedence="10"/>
  </theory>
</omdoc>"""


# --- random generators --------------------------------------------------------

_IDENT_FIRST = string.ascii_letters + "_"
_IDENT_REST = string.ascii_letters + string.digits + "_-"
_TEXT_CHARS = string.ascii_letters + string.digits + " <>&\"'.,;:!\n"


def gen_ident(rng: random.Random, max_len: int = 8) -> str:
    length = rng.randint(1, max_len)
    return rng.choice(_IDENT_FIRST) + "".join(
        rng.choice(_IDENT_REST) for _ in range(length - 1)
    )


def gen_text(rng: random.Random, max_len: int = 30) -> str:
    return "".join(rng.choice(_TEXT_CHARS) for _ in range(rng.randint(1, max_len)))


def gen_formula(
    rng: random.Random,
    symbols: Optional[list[SymbolRef]] = None,
    max_depth: int = 4,
    higher_order: bool = True,
) -> FormulaNode:
    """A random formula tree; with higher_order, occasionally a non-symbol head."""
    if symbols is None:
        symbols = [SymbolRef(gen_ident(rng), gen_ident(rng)) for _ in range(4)]

    def leaf() -> FormulaNode:
        roll = rng.random()
        if roll < 0.35:
            return Var(gen_ident(rng))
        if roll < 0.7:
            return Int(rng.randint(-10**6, 10**6))
        return Sym(rng.choice(symbols))

    def node(depth: int) -> FormulaNode:
        if depth >= max_depth or rng.random() < 0.4:
            return leaf()
        if higher_order and rng.random() < 0.12:
            head = node(depth + 1)
        else:
            head = Sym(rng.choice(symbols))
        args = tuple(node(depth + 1) for _ in range(rng.randint(1, 3)))
        return Apply(head, args)

    return node(0)


def gen_informal(rng: random.Random) -> tuple:
    """Canonical informal blocks: no empty or adjacent Text runs."""
    blocks = []
    for i in range(rng.randint(0, 3)):
        if i % 2 == 0:
            blocks.append(Text(gen_text(rng)))
        else:
            blocks.append(PageLink(gen_ident(rng), gen_text(rng, 10)))
    return tuple(blocks)


def gen_metadata(rng: random.Random) -> DublinCore:
    def maybe() -> Optional[str]:
        return gen_text(rng, 15) if rng.random() < 0.4 else None

    return DublinCore(title=maybe(), creator=maybe(), description=maybe(), date=maybe())


def gen_document(
    rng: random.Random,
    max_theories: int = 4,
    max_statements: int = 6,
    with_notations: bool = True,
    proof_targets_exist: bool = False,
) -> Document:
    """A random valid document; theory imports form a DAG by construction."""
    theories = []
    theory_ids: list[str] = []
    for _ in range(rng.randint(1, max_theories)):
        tid = gen_ident(rng)
        while tid in theory_ids:
            tid = gen_ident(rng)
        imports = tuple(
            t for t in rng.sample(theory_ids, k=min(len(theory_ids), rng.randint(0, 2)))
        )
        statements: list[Statement] = []
        stmt_ids: set[str] = set()
        notation_ids: set[str] = set()
        declared_here: list[str] = []
        assertions_here: list[str] = []

        def fresh_id() -> str:
            sid = gen_ident(rng)
            while sid in stmt_ids:
                sid = gen_ident(rng)
            stmt_ids.add(sid)
            return sid

        symbols = [SymbolRef(tid, gen_ident(rng)) for _ in range(3)]
        for _ in range(rng.randint(0, max_statements)):
            roll = rng.random()
            if roll < 0.25:
                sid = fresh_id()
                declared_here.append(sid)
                statements.append(Statement(sid, StatementKind.SYMBOL_DECL, tid,
                                            informal=gen_informal(rng)))
            elif roll < 0.4 and declared_here:
                sid = fresh_id()
                statements.append(Statement(
                    sid, StatementKind.DEFINITION, tid,
                    for_target=f"{tid}/{rng.choice(declared_here)}",
                    informal=gen_informal(rng),
                    formal=gen_formula(rng, symbols) if rng.random() < 0.6 else None,
                ))
            elif roll < 0.6:
                sid = fresh_id()
                kind = rng.choice((StatementKind.AXIOM, StatementKind.ASSERTION))
                if kind is StatementKind.ASSERTION:
                    assertions_here.append(sid)
                statements.append(Statement(
                    sid, kind, tid,
                    informal=gen_informal(rng),
                    formal=gen_formula(rng, symbols) if rng.random() < 0.7 else None,
                ))
            elif roll < 0.75:
                sid = fresh_id()
                if proof_targets_exist and assertions_here:
                    target = f"{tid}/{rng.choice(assertions_here)}"
                else:
                    target = gen_ident(rng)
                steps = tuple(
                    Statement(gen_ident(rng) + f"-s{k}", StatementKind.AXIOM, tid,
                              informal=gen_informal(rng),
                              formal=gen_formula(rng, symbols) if rng.random() < 0.5 else None)
                    for k in range(rng.randint(0, 2))
                )
                statements.append(Statement(
                    sid, StatementKind.PROOF, tid, for_target=target,
                    informal=gen_informal(rng),
                    formal=gen_formula(rng, symbols) if rng.random() < 0.4 else None,
                    steps=steps,
                ))
            elif roll < 0.85:
                sid = fresh_id()
                statements.append(Statement(
                    sid, StatementKind.EXAMPLE, tid,
                    for_target=gen_ident(rng) if rng.random() < 0.5 else None,
                    informal=gen_informal(rng),
                    formal=gen_formula(rng, symbols) if rng.random() < 0.5 else None,
                ))
            elif with_notations:
                ref = rng.choice(symbols)
                fixity = rng.choice(list(Fixity))
                if fixity is Fixity.MIXFIX:
                    operator = "if #1 then #2"
                    notation = NotationDefinition(ref, fixity, operator, rng.randint(0, 30))
                else:
                    operator = rng.choice("+-*/!~") * rng.randint(1, 2)
                    notation = NotationDefinition(ref, fixity, operator, rng.randint(0, 30))
                sid = notation_statement_id(ref, notation_ids)
                if sid in stmt_ids:
                    continue
                notation_ids.add(sid)
                stmt_ids.add(sid)
                statements.append(Statement(
                    sid, StatementKind.NOTATION_DECL, tid,
                    for_target=ref, notation=notation,
                ))
        theory_ids.append(tid)
        theories.append(Theory(tid, imports, gen_metadata(rng), tuple(statements)))
    return Document(tuple(theories))


def gen_wiki(rng: random.Random, **kwargs) -> tuple[Wiki, list[str]]:
    doc = gen_document(rng, **kwargs)
    wiki = Wiki()
    pages = wiki.import_document(serialize_document(doc))
    return wiki, pages


# --- independent oracles --------------------------------------------------------


def walk_symbols(f: FormulaNode) -> set[SymbolRef]:
    """Brute-force recursive node walk collecting Sym leaves."""
    if isinstance(f, Sym):
        return {f.ref}
    if isinstance(f, Apply):
        acc = walk_symbols(f.head)
        for arg in f.args:
            acc |= walk_symbols(arg)
        return acc
    return set()


def flatten_steps(s: Statement) -> list[Statement]:
    """Independent recursive pre-order traversal of proof steps."""
    if s.kind is not StatementKind.PROOF:
        return []
    out = []
    for step in s.steps:
        out.append(step)
        out.extend(flatten_steps(step))
    return out


def naive_entail(facts: set[tuple[str, str, str]], schema: OntologySchema) -> set[tuple[str, str, str]]:
    """Rule-application-to-fixpoint reference engine: apply R1-R4 over the
    whole fact set until nothing changes; returns inferred facts only."""
    known = set(facts)
    while True:
        new: set[tuple[str, str, str]] = set()
        for s, p, o in known:
            if p == "type":
                for c, d in schema.subclass_of:
                    if o == c:
                        new.add((s, "type", d))
                continue
            for a, b in schema.subproperty_of:
                if p == a:
                    new.add((s, b, o))
            if p in schema.domains:
                new.add((s, "type", schema.domains[p]))
            if p in schema.ranges:
                new.add((o, "type", schema.ranges[p]))
            if p in schema.transitive:
                for s2, p2, o2 in known:
                    if p2 == p and s2 == o:
                        new.add((s, p, o2))
        if new <= known:
            return known - facts
        known |= new


def warshall_reach(n: int, edges: list[tuple[int, int]]) -> list[int]:
    """Floyd-Warshall boolean closure over bitset rows."""
    reach = [0] * n
    for a, b in edges:
        reach[a] |= 1 << b
    for k in range(n):
        bit = 1 << k
        for i in range(n):
            if reach[i] & bit:
                reach[i] |= reach[k]
    return reach


def scan_match(
    triples: list[Triple],
    s: Optional[str],
    p: Optional[str],
    o: Optional[str],
) -> list[Triple]:
    """Linear-scan filter oracle for TripleStore.match."""
    from mathwiki.triples import triple_sort_key

    out = [
        t
        for t in triples
        if (s is None or t.subject == s)
        and (p is None or t.predicate == p)
        and (o is None or t.object == o)
    ]
    return sorted(out, key=triple_sort_key)


def nested_loop_query(
    facts: list[tuple[str, str, str]],
    patterns: list[tuple[str, str, str]],
    negations: list[tuple[str, str, str]] = (),
) -> list[dict[str, str]]:
    """Reference evaluator: nested-loop join plus not-exists filtering."""

    def extend(binding: dict[str, str], pattern: tuple[str, str, str], fact: tuple[str, str, str]):
        sp, pp, op = pattern
        s, p, o = fact
        if p != pp:
            return None
        local = dict(binding)
        for term, val in ((sp, s), (op, o)):
            if term.startswith("?"):
                if term in local and local[term] != val:
                    return None
                local[term] = val
            elif term != val:
                return None
        return local

    bindings: list[dict[str, str]] = [{}]
    for pattern in patterns:
        bindings = [b2 for b in bindings for f in facts if (b2 := extend(b, pattern, f)) is not None]
    survivors = [
        b
        for b in bindings
        if not any(any(extend(b, neg, f) is not None for f in facts) for neg in negations)
    ]
    unique = {tuple(sorted(b.items())): b for b in survivors}
    return [unique[k] for k in sorted(unique)]


def gen_schema_facts(rng: random.Random, schema: OntologySchema, max_nodes: int = 60) -> set[tuple[str, str, str]]:
    """Random facts over the schema vocabulary (nodes n0..nk)."""
    n_nodes = rng.randint(2, max_nodes)
    nodes = [f"n{i}" for i in range(n_nodes)]
    classes = sorted(schema.classes)
    properties = sorted(schema.properties)
    facts: set[tuple[str, str, str]] = set()
    for _ in range(rng.randint(1, 2 * n_nodes)):
        if rng.random() < 0.3:
            facts.add((rng.choice(nodes), "type", rng.choice(classes)))
        else:
            facts.add((rng.choice(nodes), rng.choice(properties), rng.choice(nodes)))
    return facts


def invalidation_oracle(wiki: Wiki, changed: set[SymbolRef]) -> set[str]:
    """Graph-rebuild oracle recomputed from page sources: pages owning a
    formula using a changed symbol, plus the live pages containing them."""
    live = {info.name for info in wiki.list_pages()}
    users: set[str] = set()
    for name in live:
        content = wiki.page_content(name)
        if not isinstance(content, Statement):
            continue
        stmts = [content, *flatten_steps(content)]
        for stmt in stmts:
            if stmt.formal is not None and walk_symbols(stmt.formal) & changed:
                users.add(name)
                break
    containers = {
        wiki.page_content(name).home_theory
        for name in users
        if isinstance(wiki.page_content(name), Statement)
        and wiki.page_content(name).home_theory in live
    }
    return users | containers


def statement_page_source(stmt: Statement) -> str:
    return serialize_document(page_document(stmt))


def dedup_provenances(triples: list[Triple]) -> int:
    return len({(t.subject, t.predicate, t.object, t.provenance) for t in triples})


def gen_store_triples(rng: random.Random, n: int, n_pages: int = 5) -> list[Triple]:
    nodes = [f"x{i}" for i in range(12)]
    preds = ["p", "q", "r"]
    pages = [f"page{i}" for i in range(n_pages)]
    out = []
    for _ in range(n):
        prov = Extracted(rng.choice(pages)) if rng.random() < 0.7 else INFERRED
        out.append(Triple(rng.choice(nodes), rng.choice(preds), rng.choice(nodes), prov))
    return out
