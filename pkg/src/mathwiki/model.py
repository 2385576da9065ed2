"""In-memory knowledge model: theories, statements, formulae, notation.

Everything here is an immutable value type. Constructors enforce the
structural invariants that can never be violated in a well-formed wiki
(identifier grammar, acyclic import lists); the kind/field consistency
rules of statements are checked by :func:`validate_statement`, which
reports violations as values instead of raising.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*\Z")
# A wiki page is a theory page ("arith") or a statement page ("arith/plus").
PAGE_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*(?:/[A-Za-z_][A-Za-z0-9_-]*)?\Z")
MIXFIX_SLOT_RE = re.compile(r"#([0-9]+)")


def is_identifier(s: str) -> bool:
    return bool(IDENT_RE.match(s))


def is_page_name(s: str) -> bool:
    return bool(PAGE_NAME_RE.match(s))


@dataclass(frozen=True)
class SymbolRef:
    """A symbol named `name` declared in theory page `theory`."""

    theory: str
    name: str

    def __post_init__(self) -> None:
        if not is_identifier(self.theory):
            raise ValueError(f"bad theory name in symbol reference: {self.theory!r}")
        if not is_identifier(self.name):
            raise ValueError(f"bad symbol name in symbol reference: {self.name!r}")

    def __str__(self) -> str:
        return f"{self.theory}#{self.name}"


# --- formula trees ---------------------------------------------------------


@dataclass(frozen=True)
class Sym:
    ref: SymbolRef


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self) -> None:
        if not is_identifier(self.name):
            raise ValueError(f"bad variable name: {self.name!r}")


@dataclass(frozen=True)
class Int:
    value: int


@dataclass(frozen=True)
class Apply:
    """Application of `head` to one or more arguments.

    The head may itself be any formula (higher-order application).
    """

    head: "FormulaNode"
    args: tuple["FormulaNode", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 1:
            raise ValueError("application needs at least one argument")


FormulaNode = Union[Sym, Var, Int, Apply]


def symbols_used(f: FormulaNode) -> set[SymbolRef]:
    """Every symbol referenced anywhere in the formula tree."""
    seen: set[SymbolRef] = set()
    stack: list[FormulaNode] = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Sym):
            seen.add(node.ref)
        elif isinstance(node, Apply):
            stack.append(node.head)
            stack.extend(node.args)
    return seen


# --- statements and theories -----------------------------------------------


class StatementKind(Enum):
    SYMBOL_DECL = "symbol"
    DEFINITION = "definition"
    AXIOM = "axiom"
    ASSERTION = "assertion"
    PROOF = "proof"
    EXAMPLE = "example"
    NOTATION_DECL = "notation"


class Fixity(Enum):
    PREFIX = "prefix"
    INFIX = "infix"
    POSTFIX = "postfix"
    MIXFIX = "mixfix"


@dataclass(frozen=True)
class NotationDefinition:
    """Rendering rule for one symbol.

    For prefix/infix/postfix the operator is the display text; for mixfix
    it is a template with `#1`..`#n` argument slots.
    """

    for_symbol: SymbolRef
    fixity: Fixity
    operator: str
    precedence: int


def mixfix_slots(template: str) -> list[int]:
    return [int(m) for m in MIXFIX_SLOT_RE.findall(template)]


def notation_violations(n: NotationDefinition) -> list[str]:
    """Invariant failures of a notation definition, as messages."""
    problems = []
    if n.fixity is Fixity.MIXFIX:
        slots = mixfix_slots(n.operator)
        if sorted(slots) != list(range(1, len(slots) + 1)):
            problems.append(
                f"mixfix template slots must be exactly #1..#n, each once: {n.operator!r}"
            )
    if n.fixity is Fixity.INFIX and n.operator == "":
        problems.append("infix operator must be non-empty")
    return problems


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class PageLink:
    target: str
    label: str


TextBlock = Union[Text, PageLink]


@dataclass(frozen=True)
class DublinCore:
    title: Optional[str] = None
    creator: Optional[str] = None
    description: Optional[str] = None
    date: Optional[str] = None

    def is_empty(self) -> bool:
        return self == DublinCore()


@dataclass(frozen=True)
class Statement:
    """One statement-granular knowledge unit (one wiki page's content).

    `for_target` is a page name for definitions/proofs/examples and a
    SymbolRef for notation declarations. `steps` is only meaningful for
    proofs; step statements are full statements themselves.
    """

    id: str
    kind: StatementKind
    home_theory: str
    for_target: Union[str, SymbolRef, None] = None
    informal: tuple[TextBlock, ...] = ()
    formal: Optional[FormulaNode] = None
    steps: tuple["Statement", ...] = ()
    notation: Optional[NotationDefinition] = None
    metadata: DublinCore = field(default_factory=DublinCore)

    def __post_init__(self) -> None:
        object.__setattr__(self, "informal", tuple(self.informal))
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class Theory:
    """A named group of statements; may import other theories.

    In page form (what a theory wiki page stores) `statements` is empty;
    the document form produced by the parser carries them inline.
    """

    id: str
    imports: tuple[str, ...] = ()
    metadata: DublinCore = field(default_factory=DublinCore)
    statements: tuple[Statement, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "imports", tuple(self.imports))
        object.__setattr__(self, "statements", tuple(self.statements))
        if not is_identifier(self.id):
            raise ValueError(f"bad theory id: {self.id!r}")
        if len(set(self.imports)) != len(self.imports):
            raise ValueError(f"duplicate imports in theory {self.id!r}")
        if self.id in self.imports:
            raise ValueError(f"theory {self.id!r} imports itself")


def substatements(s: Statement) -> list[Statement]:
    """Proof steps flattened in pre-order (a step's own steps follow it)."""
    if s.kind is not StatementKind.PROOF:
        return []
    out: list[Statement] = []
    for step in s.steps:
        out.append(step)
        out.extend(substatements(step))
    return out


# --- statement validation ---------------------------------------------------

MISSING_TARGET = "MissingTarget"
UNEXPECTED_TARGET = "UnexpectedTarget"
BAD_TARGET = "BadTarget"
UNEXPECTED_STEPS = "UnexpectedSteps"
MISSING_NOTATION = "MissingNotation"
UNEXPECTED_NOTATION = "UnexpectedNotation"
BAD_TEMPLATE = "BadTemplate"
BAD_OPERATOR = "BadOperator"
BAD_IDENTIFIER = "BadIdentifier"
BAD_METADATA = "BadMetadata"
BAD_LINK = "BadLink"


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


_TARGETED_KINDS = {
    StatementKind.DEFINITION,
    StatementKind.PROOF,
    StatementKind.EXAMPLE,
    StatementKind.NOTATION_DECL,
}


def validate_statement(s: Statement) -> list[Violation]:
    """Every kind/field consistency violation of `s`, including its steps.

    Returns an empty list iff the statement satisfies all invariants.
    """
    out: list[Violation] = []

    def bad(code: str, message: str) -> None:
        out.append(Violation(code, message))

    if not is_identifier(s.id):
        bad(BAD_IDENTIFIER, f"statement id {s.id!r} is not a valid identifier")
    if not is_identifier(s.home_theory):
        bad(BAD_IDENTIFIER, f"home theory {s.home_theory!r} is not a valid identifier")

    if s.kind in (StatementKind.PROOF, StatementKind.DEFINITION):
        if s.for_target is None:
            bad(MISSING_TARGET, f"{s.kind.value} {s.id!r} needs a target")
    if s.kind is StatementKind.NOTATION_DECL:
        if s.notation is None:
            bad(MISSING_NOTATION, f"notation declaration {s.id!r} carries no definition")
        if s.for_target is None:
            bad(MISSING_TARGET, f"notation declaration {s.id!r} needs a target symbol")
        elif not isinstance(s.for_target, SymbolRef):
            bad(BAD_TARGET, f"notation declaration {s.id!r} target must be a symbol")
        elif s.notation is not None and s.notation.for_symbol != s.for_target:
            bad(BAD_TARGET, f"notation declaration {s.id!r} target and definition disagree")
    elif s.for_target is not None:
        if s.kind not in _TARGETED_KINDS:
            bad(UNEXPECTED_TARGET, f"{s.kind.value} {s.id!r} must not have a target")
        elif isinstance(s.for_target, SymbolRef):
            bad(BAD_TARGET, f"{s.kind.value} {s.id!r} target must be a page name")
        elif not is_page_name(s.for_target):
            bad(BAD_IDENTIFIER, f"{s.kind.value} {s.id!r} target {s.for_target!r} is not a page name")

    if s.steps and s.kind is not StatementKind.PROOF:
        bad(UNEXPECTED_STEPS, f"{s.kind.value} {s.id!r} must not have proof steps")
    if s.notation is not None and s.kind is not StatementKind.NOTATION_DECL:
        bad(UNEXPECTED_NOTATION, f"{s.kind.value} {s.id!r} must not carry a notation definition")

    if s.notation is not None:
        for msg in notation_violations(s.notation):
            code = BAD_OPERATOR if "infix" in msg else BAD_TEMPLATE
            bad(code, msg)

    for block in s.informal:
        if isinstance(block, PageLink) and block.target == "":
            bad(BAD_LINK, f"{s.id!r} has a page link with an empty target")

    for name in ("title", "creator", "description", "date"):
        value = getattr(s.metadata, name)
        if value == "":
            bad(BAD_METADATA, f"{s.id!r} metadata field {name} present but empty")

    for step in s.steps:
        for v in validate_statement(step):
            out.append(Violation(v.code, f"step {step.id!r}: {v.message}"))
    return out
