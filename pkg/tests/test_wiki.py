import random
import threading

import pytest

from mathwiki.model import NotationDefinition, Statement, StatementKind
from mathwiki.omdoc import ParseError, parse_document, serialize_document
from mathwiki.rendering import DUPLICATE_NOTATION
from mathwiki.triples import Extracted, QueryPattern
from mathwiki.wiki import (
    ConflictError,
    CyclicImportError,
    GranularityError,
    NameCollisionError,
    PageKind,
    PageNameError,
    UnknownPageError,
    Wiki,
    page_document,
)
from helpers import (
    ALL_DONE_FIXTURE,
    FIG1_PAGE_NAME,
    FIG1_SOURCE,
    FOOTNOTE_CORPUS,
    WORK_QUEUE_FIXTURE,
    gen_document,
    gen_wiki,
    invalidation_oracle,
)

AXIOM_PAGE = """<omdoc>
  <theory xml:id="t">
    <axiom id="a"><CMP>a simple axiom</CMP></axiom>
  </theory>
</omdoc>"""

INVALIDATION_FIXTURE = """<omdoc>
  <theory xml:id="arith">
    <symbol id="plus"><CMP>addition</CMP></symbol>
    <notation for="arith#plus" fixity="infix" operator="+" precedence="10"/>
    <assertion id="comm">
      <CMP>commutativity</CMP>
      <FMP><OMA><OMS cd="arith" name="plus"/><OMV name="x"/><OMV name="y"/></OMA></FMP>
    </assertion>
  </theory>
</omdoc>"""

PLUS_NOTATION_PAGE = "arith/notation-arith-plus"


def _notation_source(operator: str, precedence: int = 10, fixity: str = "infix") -> str:
    return (
        '<omdoc><theory xml:id="arith">'
        f'<notation for="arith#plus" fixity="{fixity}" operator="{operator}" precedence="{precedence}"/>'
        "</theory></omdoc>"
    )


class TestSavePage:
    def test_new_axiom_page(self):
        wiki = Wiki()
        receipt = wiki.save_page("t/a", AXIOM_PAGE)
        assert receipt.new_revision == 1
        assert receipt.invalidated == frozenset()
        assert wiki.page_info("t/a").kind is PageKind.STATEMENT

    def test_source_is_canonicalized(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        stored = wiki.page_source("t/a")
        assert stored == serialize_document(parse_document(stored))

    def test_second_save_needs_base(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        with pytest.raises(ConflictError) as exc:
            wiki.save_page("t/a", AXIOM_PAGE)
        assert exc.value.head_revision == 1
        receipt = wiki.save_page("t/a", AXIOM_PAGE, base_revision=1)
        assert receipt.new_revision == 2

    def test_races_from_same_base(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        wiki.save_page("t/a", AXIOM_PAGE, base_revision=1)
        with pytest.raises(ConflictError) as exc:
            wiki.save_page("t/a", AXIOM_PAGE, base_revision=1)
        assert exc.value.head_revision == 2

    def test_base_on_new_page_conflicts(self):
        wiki = Wiki()
        with pytest.raises(ConflictError) as exc:
            wiki.save_page("t/a", AXIOM_PAGE, base_revision=3)
        assert exc.value.head_revision is None

    def test_threaded_saves_exactly_one_wins(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        results = []

        def racer():
            try:
                results.append(wiki.save_page("t/a", AXIOM_PAGE, base_revision=1))
            except ConflictError as e:
                results.append(e)

        threads = [threading.Thread(target=racer) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        conflicts = [r for r in results if isinstance(r, ConflictError)]
        assert len(conflicts) == 1
        assert conflicts[0].head_revision == 2

    def test_cyclic_import_rejected(self):
        wiki = Wiki()
        wiki.save_page("a", '<omdoc><theory xml:id="a"><imports from="b"/></theory></omdoc>')
        with pytest.raises(CyclicImportError):
            wiki.save_page("b", '<omdoc><theory xml:id="b"><imports from="a"/></theory></omdoc>')

    def test_parse_error_passthrough(self):
        wiki = Wiki()
        with pytest.raises(ParseError):
            wiki.save_page("t/a", "<omdoc><oops/></omdoc>")

    def test_theory_page_name_must_match_id(self):
        wiki = Wiki()
        with pytest.raises(PageNameError):
            wiki.save_page("wrong", '<omdoc><theory xml:id="t"/></omdoc>')

    def test_granularity_enforced(self):
        wiki = Wiki()
        source = (
            '<omdoc><theory xml:id="t"><imports from="u"/>'
            '<axiom id="a"/></theory></omdoc>'
        )
        with pytest.raises(GranularityError):
            wiki.save_page("t", source)
        with pytest.raises(GranularityError):
            wiki.save_page("t", '<omdoc><theory xml:id="t"><axiom id="a"/><axiom id="b"/></theory></omdoc>')

    def test_statement_page_any_name_allowed(self):
        wiki = Wiki()
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)
        spo = {t.spo() for t in wiki.store.match("pyth-proof")}
        assert spo == {
            ("pyth-proof", "type", "Proof"),
            ("pyth-proof", "proves", "pythagoras"),
            ("pyth-proof", "type", "Statement"),
        }

    def test_duplicate_notation_warns(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        receipt = wiki.save_page("plus-notation-2", _notation_source("plus", 30, "prefix"))
        assert DUPLICATE_NOTATION in {w.code for w in receipt.warnings}


class TestHistory:
    def test_linear_append_only(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        wiki.save_page("t/a", AXIOM_PAGE, base_revision=1)
        wiki.save_page("t/a", AXIOM_PAGE, base_revision=2)
        history = wiki.history("t/a")
        assert [r.id for r in history] == [1, 2, 3]
        assert [r.parent for r in history] == [None, 1, 2]
        for rev in history:
            parse_document(rev.source)

    def test_unknown_page(self):
        with pytest.raises(UnknownPageError):
            Wiki().history("nope")


class TestDeletion:
    def test_tombstone_retracts_and_hides(self):
        wiki = Wiki()
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)
        receipt = wiki.delete_page(FIG1_PAGE_NAME, base_revision=1)
        assert receipt.new_revision == 2
        assert wiki.store.match("pyth-proof") == []
        with pytest.raises(UnknownPageError):
            wiki.page_source(FIG1_PAGE_NAME)
        assert [r.tombstone for r in wiki.history(FIG1_PAGE_NAME)] == [False, True]

    def test_recreate_after_delete(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        wiki.delete_page("t/a", base_revision=1)
        receipt = wiki.save_page("t/a", AXIOM_PAGE)
        assert receipt.new_revision == 3
        assert wiki.page_info("t/a").head_revision == 3

    def test_cannot_create_from_tombstone(self):
        wiki = Wiki()
        with pytest.raises(GranularityError):
            wiki.save_page("t/a", "<omdoc/>")


class TestImport:
    def test_one_page_per_theory_and_statement(self):
        wiki = Wiki()
        doc = (
            '<omdoc><theory xml:id="t">'
            '<symbol id="s"/><axiom id="a"/><assertion id="c"/>'
            "</theory></omdoc>"
        )
        pages = wiki.import_document(doc)
        assert pages == ["t", "t/s", "t/a", "t/c"]

    def test_proof_steps_stay_inside_their_page(self):
        wiki = Wiki()
        doc = (
            '<omdoc><theory xml:id="t">'
            '<proof id="p" for="thm"><axiom id="inner"/></proof>'
            "</theory></omdoc>"
        )
        pages = wiki.import_document(doc)
        assert pages == ["t", "t/p"]

    def test_footnote_corpus(self):
        wiki = Wiki()
        pages = wiki.import_document(FOOTNOTE_CORPUS)
        assert len(pages) == 9
        assert wiki.store.reachable("group", "dependsOn") == {"monoid", "semigroup"}

    def test_name_collision_is_atomic(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        before_pages = wiki.list_pages()
        before_dump = wiki.store.dump()
        # "t/a" collides with the existing statement page; "other" must not survive
        colliding = '<omdoc><theory xml:id="other"/><theory xml:id="t"><axiom id="a"/></theory></omdoc>'
        with pytest.raises(NameCollisionError):
            wiki.import_document(colliding)
        assert wiki.list_pages() == before_pages
        assert wiki.store.dump() == before_dump

    def test_collision_within_document(self):
        wiki = Wiki()
        with pytest.raises(NameCollisionError):
            wiki.import_document('<omdoc><theory xml:id="t"/><theory xml:id="t"/></omdoc>')

    def test_import_cycle_rejected_atomically(self):
        wiki = Wiki()
        wiki.save_page("a", '<omdoc><theory xml:id="a"><imports from="b"/></theory></omdoc>')
        before = wiki.store.dump()
        doc = '<omdoc><theory xml:id="b"><imports from="c"/></theory><theory xml:id="c"><imports from="a"/></theory></omdoc>'
        with pytest.raises(CyclicImportError):
            wiki.import_document(doc)
        assert wiki.store.dump() == before

    def test_import_revives_tombstone(self):
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        wiki.delete_page("t/a", base_revision=1)
        pages = wiki.import_document('<omdoc><theory xml:id="t"><axiom id="a"/></theory></omdoc>')
        assert pages == ["t", "t/a"]
        assert wiki.page_info("t/a").head_revision == 3


class TestExport:
    def test_flat_theory_with_symbols(self):
        wiki = Wiki()
        wiki.import_document(
            '<omdoc><theory xml:id="cd"><symbol id="s1"/><symbol id="s2"/></theory></omdoc>'
        )
        doc = parse_document(wiki.export_theory("cd"))
        assert len(doc.theories) == 1
        assert [s.id for s in doc.theories[0].statements] == ["s1", "s2"]

    def test_footnote_closure_order(self):
        wiki = Wiki()
        wiki.import_document(FOOTNOTE_CORPUS)
        doc = parse_document(wiki.export_theory("group", closure=True))
        assert [t.id for t in doc.theories] == ["semigroup", "monoid", "group"]

    def test_unknown_page(self):
        with pytest.raises(UnknownPageError):
            Wiki().export_theory("nope")
        wiki = Wiki()
        wiki.save_page("t/a", AXIOM_PAGE)
        with pytest.raises(UnknownPageError):
            wiki.export_theory("t/a")

    def test_reimport_of_export_is_identical(self):
        rng = random.Random(314)
        for _ in range(20):
            wiki, pages = gen_wiki(rng, max_theories=3, max_statements=5)
            theories = [p for p in pages if wiki.page_info(p).kind is PageKind.THEORY]
            root = rng.choice(theories)
            exported = wiki.export_theory(root, closure=True)
            fresh = Wiki()
            new_pages = fresh.import_document(exported)
            closure = {root} | {
                n for n in wiki.store.reachable(root, "dependsOn")
                if n in theories
            }
            expected = set()
            for t in sorted(closure):
                expected.add(t)
                for _, _, member in wiki.store.match_spo(t, "homeTheoryOf", None):
                    expected.add(member)
            assert set(new_pages) == expected
            for page in new_pages:
                assert fresh.page_source(page) == wiki.page_source(page)


class TestInvalidation:
    def test_notation_change_invalidates_user_and_container(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        head = wiki.page_info(PLUS_NOTATION_PAGE).head_revision
        receipt = wiki.save_page(PLUS_NOTATION_PAGE, _notation_source("+", 11), base_revision=head)
        assert receipt.invalidated == {"arith/comm", "arith"}

    def test_unused_symbol_notation_change_invalidates_nothing(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        receipt = wiki.save_page("ghost-notation", (
            '<omdoc><theory xml:id="arith">'
            '<notation for="arith#unused" fixity="infix" operator="?" precedence="1"/>'
            "</theory></omdoc>"
        ))
        assert receipt.invalidated == frozenset()

    def test_identity_save_of_notation_invalidates_nothing(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        head = wiki.page_info(PLUS_NOTATION_PAGE).head_revision
        receipt = wiki.save_page(PLUS_NOTATION_PAGE, _notation_source("+", 10), base_revision=head)
        assert receipt.invalidated == frozenset()

    def test_random_wikis_match_both_oracles(self):
        rng = random.Random(777)
        trials = 0
        while trials < 25:
            wiki, pages = gen_wiki(rng, max_theories=3, max_statements=6)
            notation_pages = [
                p for p in pages
                if wiki.page_info(p).kind is PageKind.STATEMENT
                and wiki.page_content(p).kind is StatementKind.NOTATION_DECL
            ]
            if not notation_pages:
                continue
            trials += 1
            target = rng.choice(notation_pages)
            stmt = wiki.page_content(target)
            ref = stmt.notation.for_symbol
            live = [p.name for p in wiki.list_pages()]
            before_renders = {p: wiki.rendered(p).layout_xml for p in live}

            changed = NotationDefinition(ref, stmt.notation.fixity, stmt.notation.operator,
                                         stmt.notation.precedence + 1)
            new_stmt = Statement(stmt.id, stmt.kind, stmt.home_theory,
                                 for_target=stmt.for_target, notation=changed)
            source = serialize_document(page_document(new_stmt))
            receipt = wiki.save_page(target, source, base_revision=wiki.page_info(target).head_revision)

            oracle = invalidation_oracle(wiki, {ref})
            assert receipt.invalidated == frozenset(oracle - {target})
            assert wiki.invalidation_set({ref}) == oracle

            after_renders = {p: wiki.rendered(p).layout_xml for p in live}
            diff = {p for p in live if before_renders[p] != after_renders[p]}
            assert diff <= receipt.invalidated


class TestLinksFor:
    def test_fig1_links(self):
        wiki = Wiki()
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)
        box = wiki.links_for(FIG1_PAGE_NAME)
        extracted = {t.spo() for t in box.extracted}
        inferred = {t.spo() for t in box.inferred}
        assert ("pyth-proof", "proves", "pythagoras") in extracted
        assert ("pyth-proof", "type", "Statement") in inferred

    def test_partition_matches_scan(self):
        rng = random.Random(888)
        wiki, pages = gen_wiki(rng, max_theories=3)
        for info in wiki.list_pages():
            box = wiki.links_for(info.name)
            prefix = info.name + "#"

            def touches(n):
                return n == info.name or n.startswith(prefix)

            expected_ext = sorted(
                (t for t in wiki.store.match()
                 if (touches(t.subject) or touches(t.object)) and isinstance(t.provenance, Extracted)),
                key=lambda t: (t.subject, t.predicate, t.object),
            )
            assert [t.spo() for t in box.extracted] == [t.spo() for t in expected_ext]

    def test_unknown_page(self):
        with pytest.raises(UnknownPageError):
            Wiki().links_for("nope")


class TestWorkQueue:
    def test_seeded_fixture_exact(self):
        wiki = Wiki()
        wiki.import_document(WORK_QUEUE_FIXTURE)
        queue = wiki.work_queue()
        assert list(queue.unproven) == ["tasks_t/thm"]
        assert list(queue.undefined_symbols) == ["tasks_t/sym1"]
        assert [str(r) for r in queue.missing_notations] == ["tasks_t#sym2"]
        assert list(queue.dangling_refs) == [("tasks_t", "ghost")]

    def test_fully_annotated_wiki_is_empty(self):
        wiki = Wiki()
        wiki.import_document(ALL_DONE_FIXTURE)
        queue = wiki.work_queue()
        assert queue.unproven == ()
        assert queue.undefined_symbols == ()
        assert queue.missing_notations == ()
        assert queue.dangling_refs == ()

    def test_deleting_proof_surfaces_theorem(self):
        wiki = Wiki()
        wiki.import_document(ALL_DONE_FIXTURE)
        assert wiki.work_queue().unproven == ()
        head = wiki.page_info("done_t/thm-proof").head_revision
        wiki.delete_page("done_t/thm-proof", base_revision=head)
        assert list(wiki.work_queue().unproven) == ["done_t/thm"]

    def test_unproven_agrees_with_query_engine(self):
        wiki = Wiki()
        wiki.import_document(WORK_QUEUE_FIXTURE)
        bindings = wiki.query(QueryPattern(
            patterns=(("?t", "type", "Assertion"),),
            negations=(("?p", "proves", "?t"),),
        ))
        live = {p.name for p in wiki.list_pages()}
        assert sorted(b["?t"] for b in bindings if b["?t"] in live) == list(wiki.work_queue().unproven)


class TestPersistence:
    def test_reload_roundtrip(self, tmp_path):
        wiki = Wiki(tmp_path / "data")
        wiki.import_document(FOOTNOTE_CORPUS)
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE, base_revision=1)

        reloaded = Wiki(tmp_path / "data")
        assert reloaded.list_pages() == wiki.list_pages()
        for info in wiki.list_pages():
            assert reloaded.page_source(info.name) == wiki.page_source(info.name)
            assert [r.id for r in reloaded.history(info.name)] == [r.id for r in wiki.history(info.name)]
        assert reloaded.store.dump() == wiki.store.dump()

    def test_rebuild_invariant_after_mutations(self, tmp_path):
        rng = random.Random(515)
        wiki = Wiki(tmp_path / "w")
        doc = gen_document(rng, max_theories=3, max_statements=5)
        wiki.import_document(serialize_document(doc))
        # a few extra mutations: delete one page, save another twice
        live = [p.name for p in wiki.list_pages()]
        victim = rng.choice(live)
        wiki.delete_page(victim, base_revision=wiki.page_info(victim).head_revision)
        wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)
        rebuilt = Wiki(tmp_path / "w")
        assert rebuilt.store.dump() == wiki.store.dump()
        assert rebuilt.list_pages() == wiki.list_pages()

    def test_rev_files_are_canonical(self, tmp_path):
        wiki = Wiki(tmp_path / "d")
        wiki.save_page("t/a", AXIOM_PAGE)
        stored = (tmp_path / "d" / "t" / "a" / "rev-1.xml").read_text(encoding="utf-8")
        assert stored == serialize_document(parse_document(stored))
        assert stored == wiki.page_source("t/a")


class TestRebuildInvariant:
    def test_store_equals_fresh_extraction_of_head_sources(self):
        # the fundamental invariant: the live store is exactly what
        # re-extracting and re-entailing every head source produces
        from mathwiki.extraction import extract
        from mathwiki.ontology import builtin_schema, entail
        from mathwiki.triples import TripleStore

        rng = random.Random(4242)
        for _ in range(10):
            wiki, pages = gen_wiki(rng, max_theories=3, max_statements=6)
            live = [p.name for p in wiki.list_pages()]
            if len(live) > 2:
                victim = rng.choice(live)
                wiki.delete_page(victim, base_revision=wiki.page_info(victim).head_revision)
            wiki.save_page(FIG1_PAGE_NAME, FIG1_SOURCE)

            rebuilt = TripleStore()
            for info in wiki.list_pages():
                content = wiki.page_content(info.name)
                rebuilt.insert_all(extract(info.name, content))
            rebuilt.insert_all(entail(rebuilt.extracted(), builtin_schema()))
            assert rebuilt.dump() == wiki.store.dump()


class TestPageNames:
    @pytest.mark.parametrize("name", ["", ".", "a/b/c", "a b", "../etc", "a#b", "1abc"])
    def test_bad_page_names_rejected(self, name):
        with pytest.raises(PageNameError):
            Wiki().save_page(name, AXIOM_PAGE)


class TestNotationResolution:
    def test_latest_saved_wins_and_flips_back(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        wiki.save_page("alt-notation", _notation_source("plus", 30, "prefix"))
        assert wiki.rendered("arith/comm").plain == "plus (x, y)"
        # re-saving the original page makes it the latest again
        head = wiki.page_info(PLUS_NOTATION_PAGE).head_revision
        wiki.save_page(PLUS_NOTATION_PAGE, _notation_source("+", 10), base_revision=head)
        assert wiki.rendered("arith/comm").plain == "x + y"


class TestConcurrentAccess:
    def test_readers_and_writers_do_not_corrupt(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        errors = []
        stop = threading.Event()

        def reader():
            while not stop.is_set():
                try:
                    wiki.rendered("arith/comm")
                    wiki.links_for("arith")
                    wiki.work_queue()
                except Exception as e:  # noqa: BLE001 - collecting for the assert
                    errors.append(e)
                    return

        def writer():
            for i in range(20):
                try:
                    head = wiki.page_info(PLUS_NOTATION_PAGE).head_revision
                    wiki.save_page(PLUS_NOTATION_PAGE, _notation_source("+", 10 + i),
                                   base_revision=head)
                except Exception as e:  # noqa: BLE001
                    errors.append(e)
                    return

        readers = [threading.Thread(target=reader) for _ in range(3)]
        writer_thread = threading.Thread(target=writer)
        for t in readers:
            t.start()
        writer_thread.start()
        writer_thread.join()
        stop.set()
        for t in readers:
            t.join()
        assert errors == []
        assert wiki.page_info(PLUS_NOTATION_PAGE).head_revision == 21


class TestRendered:
    def test_rendered_page_and_cache(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        first = wiki.rendered("arith/comm")
        assert first.plain == "x + y"
        assert wiki.rendered("arith/comm") is first  # cache hit
        head = wiki.page_info(PLUS_NOTATION_PAGE).head_revision
        wiki.save_page(PLUS_NOTATION_PAGE, _notation_source("⊕"), base_revision=head)
        assert wiki.rendered("arith/comm").plain == "x ⊕ y"

    def test_theory_pages_render_empty(self):
        wiki = Wiki()
        wiki.import_document(FOOTNOTE_CORPUS)
        assert wiki.rendered("group").layout_xml == "<m:row/>"
        assert wiki.rendered("group").plain == ""

    def test_symbol_links_point_at_declaring_pages(self):
        wiki = Wiki()
        wiki.import_document(INVALIDATION_FIXTURE)
        assert 'href="arith/plus"' in wiki.rendered("arith/comm").layout_xml
