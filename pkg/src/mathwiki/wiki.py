"""Wiki lifecycle: pages, revisions, and the save/import pipeline.

Each page holds exactly one theory or one statement. Saving runs
parse → validate → optimistic-concurrency check → append revision →
re-extract → re-entail → notation-change invalidation. The triple store is
derived data: it is rebuilt from page head sources on startup and kept
consistent with them by construction.

Persistence layout: one directory per page (statement pages nest under
their slash), `rev-<n>.xml` canonical sources plus `rev-<n>.json` metadata
records. Mutations take a wiki-wide write lock; reads see consistent state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from . import ontology as onto
from .extraction import extract, owner_page, symbol_node
from .model import (
    DublinCore,
    NotationDefinition,
    Statement,
    StatementKind,
    SymbolRef,
    Theory,
    is_page_name,
    substatements,
)
from .omdoc import Document, parse_document, serialize_document
from .ontology import builtin_schema, entail
from .rendering import (
    DUPLICATE_NOTATION,
    NotationTable,
    PresentationNode,
    RenderWarning,
    Row,
    render,
    render_plain,
    serialize_layout,
)
from .triples import Extracted, QueryPattern, Triple, TripleStore, triple_sort_key

TOMBSTONE_SOURCE = "<omdoc/>"


class WikiError(Exception):
    pass


class UnknownPageError(WikiError):
    def __init__(self, page: str):
        super().__init__(f"no such page: {page}")
        self.page = page


class ConflictError(WikiError):
    def __init__(self, head_revision: Optional[int]):
        super().__init__(f"stale base revision; head is {head_revision}")
        self.head_revision = head_revision


class CyclicImportError(WikiError):
    def __init__(self, cycle: list[str]):
        super().__init__("import cycle: " + " -> ".join(cycle))
        self.cycle = cycle


class NameCollisionError(WikiError):
    def __init__(self, page: str):
        super().__init__(f"page already exists: {page}")
        self.page = page


class GranularityError(WikiError):
    """The source does not hold exactly one theory or one statement."""


class PageNameError(WikiError):
    pass


class PageKind(Enum):
    THEORY = "theory"
    STATEMENT = "statement"


@dataclass
class Revision:
    id: int
    parent: Optional[int]
    author: str
    timestamp: str
    tombstone: bool
    source: str


@dataclass(frozen=True)
class PageInfo:
    name: str
    kind: PageKind
    head_revision: int


@dataclass(frozen=True)
class SaveReceipt:
    new_revision: int
    invalidated: frozenset[str]
    warnings: tuple[RenderWarning, ...] = ()


@dataclass(frozen=True)
class PageLinks:
    extracted: tuple[Triple, ...]
    inferred: tuple[Triple, ...]


@dataclass(frozen=True)
class RenderedPage:
    layout_xml: str
    plain: str
    warnings: tuple[RenderWarning, ...]


@dataclass(frozen=True)
class WorkQueue:
    unproven: tuple[str, ...]
    undefined_symbols: tuple[str, ...]
    missing_notations: tuple[SymbolRef, ...]
    dangling_refs: tuple[tuple[str, str], ...]


@dataclass
class _PageState:
    name: str
    kind: PageKind
    revisions: list[Revision]
    content: Union[Theory, Statement, None]
    seq: int  # global save order, resolves duplicate notations (latest wins)

    @property
    def head(self) -> Revision:
        return self.revisions[-1]

    @property
    def live(self) -> bool:
        return self.content is not None


_STATEMENT_GROUP_ORDER = {
    StatementKind.SYMBOL_DECL: 0,
    StatementKind.DEFINITION: 1,
    StatementKind.AXIOM: 2,
    StatementKind.ASSERTION: 3,
    StatementKind.PROOF: 4,
    StatementKind.EXAMPLE: 5,
    StatementKind.NOTATION_DECL: 6,
}

_TABLE_KINDS = (StatementKind.SYMBOL_DECL, StatementKind.NOTATION_DECL)


def page_document(content: Union[Theory, Statement]) -> Document:
    """The single-page document a page's content canonically serializes to."""
    if isinstance(content, Theory):
        return Document((Theory(content.id, content.imports, content.metadata, ()),))
    return Document((Theory(content.home_theory, (), DublinCore(), (content,)),))


def _notations_of(content: Union[Theory, Statement, None]) -> dict[SymbolRef, tuple]:
    if not isinstance(content, Statement):
        return {}
    out: dict[SymbolRef, tuple] = {}
    for s in [content, *substatements(content)]:
        if s.kind is StatementKind.NOTATION_DECL and s.notation is not None:
            n = s.notation
            out[n.for_symbol] = (n.fixity, n.operator, n.precedence)
    return out


def _affects_table(*contents: Union[Theory, Statement, None]) -> bool:
    return any(
        isinstance(c, Statement) and c.kind in _TABLE_KINDS for c in contents
    )


class Wiki:
    """One wiki instance; pass data_dir=None for a purely in-memory wiki."""

    def __init__(self, data_dir: Union[str, Path, None] = None):
        self._lock = threading.RLock()
        self._data_dir = Path(data_dir) if data_dir is not None else None
        self._pages: dict[str, _PageState] = {}
        self._schema = builtin_schema()
        self._store = TripleStore()
        self._seq = 0
        self._table_version = 0
        self._table_cache: Optional[tuple[int, NotationTable, tuple[RenderWarning, ...]]] = None
        self._render_cache: dict[str, tuple[int, int, RenderedPage]] = {}
        if self._data_dir is not None:
            self._load()

    # --- read API ---------------------------------------------------------

    @property
    def store(self) -> TripleStore:
        return self._store

    def list_pages(self) -> list[PageInfo]:
        with self._lock:
            return [
                PageInfo(st.name, st.kind, st.head.id)
                for _, st in sorted(self._pages.items())
                if st.live
            ]

    def _live_state(self, name: str) -> _PageState:
        state = self._pages.get(name)
        if state is None or not state.live:
            raise UnknownPageError(name)
        return state

    def page_info(self, name: str) -> PageInfo:
        with self._lock:
            st = self._live_state(name)
            return PageInfo(st.name, st.kind, st.head.id)

    def page_source(self, name: str) -> str:
        with self._lock:
            return self._live_state(name).head.source

    def page_content(self, name: str) -> Union[Theory, Statement]:
        with self._lock:
            content = self._live_state(name).content
            assert content is not None
            return content

    def history(self, name: str) -> list[Revision]:
        with self._lock:
            state = self._pages.get(name)
            if state is None:
                raise UnknownPageError(name)
            return list(state.revisions)

    def query(self, q: QueryPattern) -> list[dict[str, str]]:
        with self._lock:
            return self._store.query(q)

    # --- save pipeline ------------------------------------------------------

    def save_page(
        self,
        name: str,
        source: str,
        base_revision: Optional[int] = None,
        author: str = "anonymous",
    ) -> SaveReceipt:
        """Parse, check, commit, re-extract, re-entail, invalidate."""
        with self._lock:
            if not is_page_name(name):
                raise PageNameError(f"bad page name: {name!r}")
            kind, content = self._parse_page_source(source)
            state = self._pages.get(name)

            if state is not None and state.live:
                if base_revision != state.head.id:
                    raise ConflictError(state.head.id)
            elif state is not None:  # tombstoned: allow re-create with or without base
                if base_revision is not None and base_revision != state.head.id:
                    raise ConflictError(state.head.id)
            else:
                if base_revision is not None:
                    raise ConflictError(None)

            if content is None and (state is None or not state.live):
                raise GranularityError("cannot create a page from an empty document")
            if isinstance(content, Theory):
                if content.id != name:
                    raise PageNameError(
                        f"theory page {name!r} must be named after its theory id {content.id!r}"
                    )
                self._check_cycles(extra={name: content.imports})

            old_content = state.content if state is not None else None
            receipt = self._commit(name, kind, content, author)
            self._reentail()
            return self._finish_save(name, old_content, content, receipt)

    def delete_page(self, name: str, base_revision: Optional[int], author: str = "anonymous") -> SaveReceipt:
        """Deletion is a tombstone revision; extraction is retracted."""
        with self._lock:
            if name not in self._pages or not self._pages[name].live:
                raise UnknownPageError(name)
            return self.save_page(name, TOMBSTONE_SOURCE, base_revision, author)

    def _parse_page_source(self, source: str) -> tuple[PageKind, Union[Theory, Statement, None]]:
        doc = parse_document(source)
        if not doc.theories:
            return PageKind.THEORY, None  # tombstone; kind is kept from the page
        if len(doc.theories) > 1:
            raise GranularityError("a page holds exactly one theory")
        th = doc.theories[0]
        if not th.statements:
            return PageKind.THEORY, Theory(th.id, th.imports, th.metadata, ())
        if len(th.statements) == 1 and not th.imports and th.metadata.is_empty():
            return PageKind.STATEMENT, th.statements[0]
        raise GranularityError(
            "a statement page holds exactly one statement inside a bare home-theory wrapper"
        )

    def _commit(
        self,
        name: str,
        kind: PageKind,
        content: Union[Theory, Statement, None],
        author: str,
    ) -> SaveReceipt:
        """Append the revision, persist it, and re-extract this page."""
        state = self._pages.get(name)
        head_id = state.head.id if state is not None else 0
        canonical = TOMBSTONE_SOURCE if content is None else serialize_document(page_document(content))
        rev = Revision(
            id=head_id + 1,
            parent=head_id if head_id else None,
            author=author,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="microseconds"),
            tombstone=content is None,
            source=canonical,
        )
        if state is None:
            state = _PageState(name, kind, [], content, 0)
            self._pages[name] = state
        state.revisions.append(rev)
        state.content = content
        if content is not None:
            state.kind = kind
        self._seq += 1
        state.seq = self._seq
        self._persist(state, rev)
        self._store.retract_page(name)
        if content is not None:
            self._store.insert_all(extract(name, content))
        return SaveReceipt(rev.id, frozenset())

    def _finish_save(
        self,
        name: str,
        old_content: Union[Theory, Statement, None],
        new_content: Union[Theory, Statement, None],
        receipt: SaveReceipt,
    ) -> SaveReceipt:
        """Notation-change invalidation and cache maintenance after a commit."""
        if _affects_table(old_content, new_content):
            self._bump_table()
        old_notations = _notations_of(old_content)
        new_notations = _notations_of(new_content)
        changed = {
            ref
            for ref in old_notations.keys() | new_notations.keys()
            if old_notations.get(ref) != new_notations.get(ref)
        }
        invalidated: frozenset[str] = frozenset()
        if changed:
            invalidated = frozenset(self.invalidation_set(changed) - {name})
            for page in invalidated:
                self._render_cache.pop(page, None)
        self._render_cache.pop(name, None)
        warnings = tuple(
            w for w in self._table_warnings() if w.symbol in new_notations
        )
        return SaveReceipt(receipt.new_revision, invalidated, warnings)

    def _reentail(self) -> None:
        self._store.retract_inferred()
        self._store.insert_all(entail(self._store.extracted(), self._schema))

    def _bump_table(self) -> None:
        self._table_version += 1
        self._table_cache = None

    # --- invalidation ---------------------------------------------------------

    def invalidation_set(self, changed_symbols: set[SymbolRef]) -> set[str]:
        """Pages whose rendering may depend on the given symbols' notation:
        owners of formulae using them, plus pages transitively containing
        those owners. Computed from the triple graph, not by source scans."""
        with self._lock:
            users: set[str] = set()
            for ref in changed_symbols:
                node = symbol_node(ref)
                for s, _, _ in self._store.match_spo(None, onto.USES, node):
                    page = owner_page(s)
                    state = self._pages.get(page)
                    if state is not None and state.live:
                        users.add(page)
            containers: set[str] = set()
            for page in users:
                for s, _, _ in self._store.match_spo(None, onto.CONTAINS, page):
                    state = self._pages.get(s)
                    if state is not None and state.live:
                        containers.add(s)
            return users | containers

    # --- import / export --------------------------------------------------------

    def import_document(self, xml: str, author: str = "anonymous") -> list[str]:
        """Split a document into pages: one per theory, one per top-level
        statement (named `<theory>/<id>`). Atomic: collisions or import
        cycles reject the whole import with the wiki untouched."""
        with self._lock:
            doc = parse_document(xml)
            plan: list[tuple[str, PageKind, Union[Theory, Statement]]] = []
            for th in doc.theories:
                plan.append((th.id, PageKind.THEORY, Theory(th.id, th.imports, th.metadata, ())))
                for s in th.statements:
                    plan.append((f"{th.id}/{s.id}", PageKind.STATEMENT, s))
            seen: set[str] = set()
            for name, _, _ in plan:
                if name in seen:
                    raise NameCollisionError(name)
                seen.add(name)
                state = self._pages.get(name)
                if state is not None and state.live:
                    raise NameCollisionError(name)
            extra = {
                name: content.imports
                for name, kind, content in plan
                if isinstance(content, Theory)
            }
            self._check_cycles(extra=extra)

            created = []
            any_table = False
            for name, kind, content in plan:
                self._commit(name, kind, content, author)
                any_table = any_table or _affects_table(content)
                created.append(name)
            self._reentail()
            if any_table:
                self._bump_table()
                self._render_cache.clear()
            return created

    def export_theory(self, theory: str, closure: bool = False) -> str:
        """Assemble a theory page and its statements back into one document;
        with closure, include all reachable dependencies in topological
        order (imports before importers)."""
        with self._lock:
            state = self._live_state(theory)
            if state.kind is not PageKind.THEORY:
                raise UnknownPageError(theory)
            if closure:
                nodes = {theory}
                for node in self._store.reachable(theory, onto.DEPENDS_ON):
                    st = self._pages.get(node)
                    if st is not None and st.live and st.kind is PageKind.THEORY:
                        nodes.add(node)
                order = self._topo_sort(nodes)
            else:
                order = [theory]
            theories = tuple(self._assemble_theory(name) for name in order)
            return serialize_document(Document(theories))

    def _topo_sort(self, nodes: set[str]) -> list[str]:
        remaining = dict()
        for name in nodes:
            content = self._pages[name].content
            assert isinstance(content, Theory)
            remaining[name] = {t for t in content.imports if t in nodes}
        order = []
        while remaining:
            ready = sorted(n for n, deps in remaining.items() if not deps)
            if not ready:  # cannot happen: import graph is kept acyclic
                raise CyclicImportError(sorted(remaining))
            node = ready[0]
            del remaining[node]
            for deps in remaining.values():
                deps.discard(node)
            order.append(node)
        return order

    def _assemble_theory(self, name: str) -> Theory:
        content = self._pages[name].content
        assert isinstance(content, Theory)
        members = []
        for _, _, page in self._store.match_spo(name, onto.HOME_THEORY_OF, None):
            st = self._pages.get(page)
            if st is not None and st.live and isinstance(st.content, Statement):
                members.append((st.content, page))
        members.sort(key=lambda m: (_STATEMENT_GROUP_ORDER[m[0].kind], m[0].id, m[1]))
        return Theory(
            content.id,
            content.imports,
            content.metadata,
            tuple(m[0] for m in members),
        )

    # --- links box and work queue ---------------------------------------------

    def links_for(self, page: str) -> PageLinks:
        """All triples touching the page or its skolem children, split by
        provenance, deterministically ordered."""
        with self._lock:
            self._live_state(page)
            prefix = page + "#"

            def touches(node: str) -> bool:
                return node == page or node.startswith(prefix)

            extracted = []
            inferred = []
            for t in self._store:
                if touches(t.subject) or touches(t.object):
                    if isinstance(t.provenance, Extracted):
                        extracted.append(t)
                    else:
                        inferred.append(t)
            extracted.sort(key=triple_sort_key)
            inferred.sort(key=triple_sort_key)
            return PageLinks(tuple(extracted), tuple(inferred))

    def work_queue(self) -> WorkQueue:
        """Where work needs to be done: unproved assertions, declared but
        undefined symbols, used symbols without notation, dangling refs."""
        with self._lock:
            live = {n for n, st in self._pages.items() if st.live}

            bindings = self._store.query(QueryPattern(
                patterns=(("?t", onto.TYPE, onto.ASSERTION),),
                negations=(("?p", onto.PROVES, "?t"),),
            ))
            unproven = tuple(sorted({b["?t"] for b in bindings if b["?t"] in live}))

            undefined = tuple(sorted({
                t.subject
                for t in self._store.match(None, onto.TYPE, onto.SYMBOL)
                if isinstance(t.provenance, Extracted)
                and t.subject in live
                and not self._store.match_spo(None, onto.DEFINES, t.subject)
            }))

            used = {o for _, _, o in self._store.match_spo(None, onto.USES, None)}
            missing = tuple(sorted(
                (self._node_symbol(node) for node in used
                 if not self._store.match_spo(None, onto.RENDERS, node)),
                key=lambda r: (r.theory, r.name),
            ))

            table, _ = self._notation_table()
            dangling: list[tuple[str, str]] = []
            for name in sorted(live):
                content = self._pages[name].content
                if isinstance(content, Theory):
                    for target in content.imports:
                        if target not in live:
                            dangling.append((name, target))
                elif content is not None:
                    target = content.for_target
                    if isinstance(target, str) and target not in live:
                        dangling.append((name, target))
                    elif isinstance(target, SymbolRef) and target not in table.declared:
                        dangling.append((name, symbol_node(target)))
            return WorkQueue(unproven, undefined, missing, tuple(sorted(dangling)))

    @staticmethod
    def _node_symbol(node: str) -> SymbolRef:
        theory, sym = node.split("#", 1)
        return SymbolRef(theory, sym)

    # --- rendering -----------------------------------------------------------

    def notation_table(self) -> NotationTable:
        with self._lock:
            return self._notation_table()[0]

    def _notation_table(self) -> tuple[NotationTable, tuple[RenderWarning, ...]]:
        if self._table_cache is not None and self._table_cache[0] == self._table_version:
            return self._table_cache[1], self._table_cache[2]
        defs: dict[SymbolRef, NotationDefinition] = {}
        declared: dict[SymbolRef, str] = {}
        duplicated: set[SymbolRef] = set()
        states = sorted(
            (st for st in self._pages.values() if st.live and isinstance(st.content, Statement)),
            key=lambda st: st.seq,
        )
        for st in states:
            content = st.content
            assert isinstance(content, Statement)
            if content.kind is StatementKind.SYMBOL_DECL:
                declared[SymbolRef(content.home_theory, content.id)] = st.name
            elif content.kind is StatementKind.NOTATION_DECL and content.notation is not None:
                ref = content.notation.for_symbol
                if ref in defs:
                    duplicated.add(ref)
                defs[ref] = content.notation
        warnings = tuple(
            RenderWarning(
                DUPLICATE_NOTATION,
                f"multiple notation definitions for {ref}; the latest saved wins",
                ref,
            )
            for ref in sorted(duplicated, key=lambda r: (r.theory, r.name))
        )
        table = NotationTable(defs, declared)
        self._table_cache = (self._table_version, table, warnings)
        return table, warnings

    def _table_warnings(self) -> tuple[RenderWarning, ...]:
        return self._notation_table()[1]

    def rendered(self, name: str) -> RenderedPage:
        """Layout XML + plain text for the page's formal formula (cached by
        page revision and notation-table version)."""
        with self._lock:
            state = self._live_state(name)
            cached = self._render_cache.get(name)
            if cached is not None and cached[0] == state.head.id and cached[1] == self._table_version:
                return cached[2]
            table, _ = self._notation_table()
            content = state.content
            node: PresentationNode = Row(())
            warnings: list[RenderWarning] = []
            if isinstance(content, Statement) and content.formal is not None:
                node, warnings = render(content.formal, table)
            page = RenderedPage(serialize_layout(node), render_plain(node), tuple(warnings))
            self._render_cache[name] = (state.head.id, self._table_version, page)
            return page

    # --- import cycle detection -------------------------------------------------

    def _check_cycles(self, extra: dict[str, tuple[str, ...]]) -> None:
        graph: dict[str, tuple[str, ...]] = {
            name: state.content.imports
            for name, state in self._pages.items()
            if state.live and isinstance(state.content, Theory) and name not in extra
        }
        graph.update(extra)
        done: set[str] = set()
        for root in sorted(graph):
            if root in done:
                continue
            # iterative DFS; recursion depth would equal the longest chain
            path: list[str] = []
            on_path: set[str] = set()
            stack: list[tuple[str, int]] = [(root, 0)]
            while stack:
                node, edge_index = stack.pop()
                if edge_index == 0:
                    if node in done:
                        continue
                    path.append(node)
                    on_path.add(node)
                targets = graph.get(node, ())
                if edge_index < len(targets):
                    stack.append((node, edge_index + 1))
                    target = targets[edge_index]
                    if target in on_path:
                        cycle = path[path.index(target):] + [target]
                        raise CyclicImportError(cycle)
                    if target not in done and target in graph:
                        stack.append((target, 0))
                else:
                    path.pop()
                    on_path.discard(node)
                    done.add(node)

    # --- persistence ---------------------------------------------------------

    def _page_dir(self, name: str) -> Path:
        assert self._data_dir is not None
        return self._data_dir.joinpath(*name.split("/"))

    def _persist(self, state: _PageState, rev: Revision) -> None:
        if self._data_dir is None:
            return
        page_dir = self._page_dir(state.name)
        page_dir.mkdir(parents=True, exist_ok=True)
        (page_dir / f"rev-{rev.id}.xml").write_text(rev.source, encoding="utf-8")
        meta = {
            "author": rev.author,
            "timestamp": rev.timestamp,
            "parent": rev.parent,
            "tombstone": rev.tombstone,
            "kind": state.kind.value,
        }
        (page_dir / f"rev-{rev.id}.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def _load(self) -> None:
        assert self._data_dir is not None
        self._data_dir.mkdir(parents=True, exist_ok=True)
        loaded: list[_PageState] = []
        for meta_path in sorted(self._data_dir.rglob("rev-1.xml")):
            page_dir = meta_path.parent
            name = page_dir.relative_to(self._data_dir).as_posix()
            if not is_page_name(name):
                raise WikiError(f"data directory holds an invalid page name: {name!r}")
            revisions = []
            rev_ids = sorted(
                int(p.stem.split("-", 1)[1]) for p in page_dir.glob("rev-*.xml")
            )
            if rev_ids != list(range(1, len(rev_ids) + 1)):
                raise WikiError(f"page {name!r} has a gap in its revision history")
            for rev_id in rev_ids:
                source = (page_dir / f"rev-{rev_id}.xml").read_text(encoding="utf-8")
                meta = json.loads((page_dir / f"rev-{rev_id}.json").read_text(encoding="utf-8"))
                revisions.append(Revision(
                    id=rev_id,
                    parent=meta.get("parent"),
                    author=meta.get("author", "anonymous"),
                    timestamp=meta.get("timestamp", ""),
                    tombstone=bool(meta.get("tombstone", False)),
                    source=source,
                ))
            head = revisions[-1]
            kind = PageKind(json.loads(
                (page_dir / f"rev-{head.id}.json").read_text(encoding="utf-8")
            ).get("kind", "theory"))
            if head.tombstone:
                content: Union[Theory, Statement, None] = None
            else:
                parsed_kind, content = self._parse_page_source(head.source)
                kind = parsed_kind
            loaded.append(_PageState(name, kind, revisions, content, 0))
        loaded.sort(key=lambda st: (st.head.timestamp, st.name))
        for st in loaded:
            self._seq += 1
            st.seq = self._seq
            self._pages[st.name] = st
            if st.content is not None:
                self._store.insert_all(extract(st.name, st.content))
        self._reentail()
