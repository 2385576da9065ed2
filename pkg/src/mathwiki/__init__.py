"""mathwiki: a semantic wiki engine for mathematical knowledge.

Documents in an OMDoc-subset markup are split into statement/theory
granularity pages, mined into an ontology-typed triple graph, rendered via
per-symbol notation definitions, and kept consistent by dependency-driven
re-render invalidation.
"""

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
    Theory,
    Var,
    substatements,
    symbols_used,
    validate_statement,
)
from .omdoc import (
    Document,
    ErrorCode,
    ParseError,
    parse_document,
    parse_formula_ascii,
    print_formula_ascii,
    serialize_document,
)
from .ontology import OntologySchema, builtin_schema, entail, schema_triples
from .triples import (
    Extracted,
    INFERRED,
    Inferred,
    QueryPattern,
    Triple,
    TripleStore,
    UnsafeNegation,
)
from .extraction import extract, symbol_node
from .rendering import (
    Fenced,
    Ident,
    Link,
    NotationTable,
    Num,
    Op,
    RenderWarning,
    Row,
    render,
    render_plain,
    serialize_layout,
)
from .wiki import (
    ConflictError,
    CyclicImportError,
    GranularityError,
    NameCollisionError,
    PageInfo,
    PageKind,
    PageLinks,
    PageNameError,
    RenderedPage,
    Revision,
    SaveReceipt,
    UnknownPageError,
    Wiki,
    WikiError,
    WorkQueue,
)

__version__ = "0.1.0"
