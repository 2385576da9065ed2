"""Document ontology: class hierarchy, properties, and rule-based entailment.

The schema is compiled in. Entailment materializes the four-rule closure
(subclass, subproperty, declared transitivity, domain/range typing) by
forward chaining to fixpoint and returns only the newly inferred facts.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

from .triples import INFERRED, Triple

TYPE = "type"

# class names
THEORY = "Theory"
STATEMENT = "Statement"
SYMBOL = "Symbol"
DEFINITION = "Definition"
AXIOM = "Axiom"
ASSERTION = "Assertion"
PROOF = "Proof"
EXAMPLE = "Example"
NOTATION_DEFINITION = "NotationDefinition"
FORMULA = "Formula"

# property names
PROVES = "proves"
DEFINES = "defines"
EXEMPLIFIES = "exemplifies"
RENDERS = "renders"
USES = "uses"
IMPORTS = "imports"
HOME_THEORY_OF = "homeTheoryOf"
CONTAINS = "contains"
DEPENDS_ON = "dependsOn"


def _acyclic(pairs: frozenset[tuple[str, str]]) -> bool:
    succ: dict[str, set[str]] = {}
    for a, b in pairs:
        succ.setdefault(a, set()).add(b)
    visiting: set[str] = set()
    done: set[str] = set()

    def visit(node: str) -> bool:
        if node in done:
            return True
        if node in visiting:
            return False
        visiting.add(node)
        for nxt in succ.get(node, ()):
            if not visit(nxt):
                return False
        visiting.discard(node)
        done.add(node)
        return True

    return all(visit(n) for n in list(succ))


@dataclass(frozen=True)
class OntologySchema:
    classes: frozenset[str]
    subclass_of: frozenset[tuple[str, str]]
    properties: frozenset[str]
    subproperty_of: frozenset[tuple[str, str]]
    transitive: frozenset[str]
    domains: Mapping[str, str]
    ranges: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", frozenset(self.classes))
        object.__setattr__(self, "subclass_of", frozenset(self.subclass_of))
        object.__setattr__(self, "properties", frozenset(self.properties))
        object.__setattr__(self, "subproperty_of", frozenset(self.subproperty_of))
        object.__setattr__(self, "transitive", frozenset(self.transitive))
        object.__setattr__(self, "domains", MappingProxyType(dict(self.domains)))
        object.__setattr__(self, "ranges", MappingProxyType(dict(self.ranges)))
        if not _acyclic(self.subclass_of):
            raise ValueError("subclass hierarchy has a cycle")
        if not _acyclic(self.subproperty_of):
            raise ValueError("subproperty hierarchy has a cycle")
        if not self.transitive <= self.properties:
            raise ValueError("transitive flags must name declared properties")
        for prop in (*self.domains, *self.ranges):
            if prop not in self.properties:
                raise ValueError(f"domain/range given for unknown property {prop!r}")

    def superclasses(self, cls: str) -> frozenset[str]:
        return _ancestors(self.subclass_of).get(cls, frozenset())

    def superproperties(self, prop: str) -> frozenset[str]:
        return _ancestors(self.subproperty_of).get(prop, frozenset())


def _ancestors(pairs: frozenset[tuple[str, str]]) -> dict[str, frozenset[str]]:
    parents: dict[str, set[str]] = {}
    for a, b in pairs:
        parents.setdefault(a, set()).add(b)
    closure: dict[str, frozenset[str]] = {}

    def visit(node: str) -> frozenset[str]:
        if node in closure:
            return closure[node]
        acc: set[str] = set()
        for parent in parents.get(node, ()):
            acc.add(parent)
            acc |= visit(parent)
        closure[node] = frozenset(acc)
        return closure[node]

    for node in list(parents):
        visit(node)
    return closure


_STATEMENT_CLASSES = (SYMBOL, DEFINITION, AXIOM, ASSERTION, PROOF, EXAMPLE, NOTATION_DEFINITION)

_BUILTIN = OntologySchema(
    classes=frozenset({THEORY, STATEMENT, FORMULA, *_STATEMENT_CLASSES}),
    subclass_of=frozenset((c, STATEMENT) for c in _STATEMENT_CLASSES),
    properties=frozenset({
        PROVES, DEFINES, EXEMPLIFIES, RENDERS, USES,
        IMPORTS, HOME_THEORY_OF, CONTAINS, DEPENDS_ON,
    }),
    subproperty_of=frozenset({(IMPORTS, DEPENDS_ON), (HOME_THEORY_OF, CONTAINS)}),
    transitive=frozenset({DEPENDS_ON, CONTAINS}),
    # `contains` has domain Statement-or-Theory, which a single-class map
    # cannot express, so it carries no domain entry here.
    domains={PROVES: PROOF, RENDERS: NOTATION_DEFINITION, USES: FORMULA, IMPORTS: THEORY},
    ranges={PROVES: ASSERTION, RENDERS: SYMBOL, USES: SYMBOL, IMPORTS: THEORY},
)


def builtin_schema() -> OntologySchema:
    """The fixed document ontology this wiki reasons with."""
    return _BUILTIN


def schema_triples(schema: OntologySchema) -> list[tuple[str, str, str]]:
    """Read-only dump of the schema for UIs and docs."""
    out = [(a, "subClassOf", b) for a, b in schema.subclass_of]
    out += [(a, "subPropertyOf", b) for a, b in schema.subproperty_of]
    out += [(p, "transitive", "true") for p in schema.transitive]
    return sorted(out)


def entail(extracted: Iterable[Triple], schema: OntologySchema) -> set[Triple]:
    """Forward-chain the four rules to fixpoint; returns inferred facts only.

    Rules: (R1) subclass typing, (R2) subproperty lifting, (R3) declared
    transitivity, (R4) domain/range typing. The result is disjoint from the
    input facts and carries Inferred provenance.
    """
    superclass = {c: schema.superclasses(c) for c in schema.classes}
    superprop = {p: schema.superproperties(p) for p in schema.properties}

    input_facts: set[tuple[str, str, str]] = set()
    for t in extracted:
        input_facts.add(t.spo())

    known: set[tuple[str, str, str]] = set()
    # successor/predecessor indexes per transitive property
    succ: dict[str, dict[str, set[str]]] = {p: {} for p in schema.transitive}
    pred: dict[str, dict[str, set[str]]] = {p: {} for p in schema.transitive}
    worklist: list[tuple[str, str, str]] = list(input_facts)
    known.update(input_facts)
    for fact in input_facts:
        s, p, o = fact
        if p in succ:
            succ[p].setdefault(s, set()).add(o)
            pred[p].setdefault(o, set()).add(s)

    def add(fact: tuple[str, str, str]) -> None:
        if fact in known:
            return
        known.add(fact)
        worklist.append(fact)
        s, p, o = fact
        if p in succ:
            succ[p].setdefault(s, set()).add(o)
            pred[p].setdefault(o, set()).add(s)

    while worklist:
        s, p, o = worklist.pop()
        if p == TYPE:
            for sup in superclass.get(o, ()):
                add((s, TYPE, sup))
            continue
        for sup in superprop.get(p, ()):
            add((s, sup, o))
        domain = schema.domains.get(p)
        if domain is not None:
            add((s, TYPE, domain))
        rng = schema.ranges.get(p)
        if rng is not None:
            add((o, TYPE, rng))
        if p in succ:
            for nxt in list(succ[p].get(o, ())):
                add((s, p, nxt))
            for prev in list(pred[p].get(s, ())):
                add((prev, p, o))

    return {Triple(s, p, o, INFERRED) for (s, p, o) in known - input_facts}
