"""Indexed in-memory triple store with pattern matching and reachability.

Three permutation indexes (SPO, POS, OSP) serve every wildcard combination.
Triples are set-unique per (subject, predicate, object, provenance); the
store is derived data, rebuilt from page sources, and never persisted.
Concurrency contract: many readers or one writer — callers serialize writes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union


@dataclass(frozen=True)
class Extracted:
    page: str


@dataclass(frozen=True)
class Inferred:
    pass


Provenance = Union[Extracted, Inferred]
INFERRED = Inferred()


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str
    provenance: Provenance = INFERRED

    def spo(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)


def _prov_key(p: Provenance) -> tuple[int, str]:
    return (0, p.page) if isinstance(p, Extracted) else (1, "")


def triple_sort_key(t: Triple) -> tuple:
    return (t.subject, t.predicate, t.object) + _prov_key(t.provenance)


class UnsafeNegation(ValueError):
    pass


@dataclass(frozen=True)
class QueryPattern:
    """Conjunction of triple patterns with not-exists negations.

    Terms starting with '?' are variables; predicates must be constants.
    Variables occurring only inside a negation are existential there, but
    each negation must share at least one variable with the positive
    patterns (or be fully ground), otherwise the query is rejected.
    """

    patterns: tuple[tuple[str, str, str], ...]
    negations: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "patterns", tuple(tuple(p) for p in self.patterns))
        object.__setattr__(self, "negations", tuple(tuple(p) for p in self.negations))


def is_variable(term: str) -> bool:
    return term.startswith("?")


class TripleStore:
    def __init__(self) -> None:
        # (s, p, o) -> set of provenances
        self._facts: dict[tuple[str, str, str], set[Provenance]] = {}
        self._spo: dict[str, dict[str, set[str]]] = {}
        self._pos: dict[str, dict[str, set[str]]] = {}
        self._osp: dict[str, dict[str, set[str]]] = {}
        self._by_page: dict[str, set[tuple[str, str, str]]] = {}

    def __len__(self) -> int:
        return sum(len(provs) for provs in self._facts.values())

    def __iter__(self) -> Iterator[Triple]:
        for (s, p, o), provs in self._facts.items():
            for prov in provs:
                yield Triple(s, p, o, prov)

    def insert(self, t: Triple) -> None:
        key = t.spo()
        provs = self._facts.get(key)
        if provs is None:
            provs = self._facts[key] = set()
            s, p, o = key
            self._spo.setdefault(s, {}).setdefault(p, set()).add(o)
            self._pos.setdefault(p, {}).setdefault(o, set()).add(s)
            self._osp.setdefault(o, {}).setdefault(s, set()).add(p)
        provs.add(t.provenance)
        if isinstance(t.provenance, Extracted):
            self._by_page.setdefault(t.provenance.page, set()).add(key)

    def insert_all(self, triples: Iterable[Triple]) -> None:
        for t in triples:
            self.insert(t)

    def _unindex(self, key: tuple[str, str, str]) -> None:
        s, p, o = key
        self._spo[s][p].discard(o)
        if not self._spo[s][p]:
            del self._spo[s][p]
            if not self._spo[s]:
                del self._spo[s]
        self._pos[p][o].discard(s)
        if not self._pos[p][o]:
            del self._pos[p][o]
            if not self._pos[p]:
                del self._pos[p]
        self._osp[o][s].discard(p)
        if not self._osp[o][s]:
            del self._osp[o][s]
            if not self._osp[o]:
                del self._osp[o]

    def _drop_provenance(self, key: tuple[str, str, str], prov: Provenance) -> None:
        provs = self._facts.get(key)
        if provs is None or prov not in provs:
            return
        provs.discard(prov)
        if not provs:
            del self._facts[key]
            self._unindex(key)

    def retract_page(self, page: str) -> int:
        """Remove every triple extracted from `page`; returns the count removed."""
        keys = self._by_page.pop(page, set())
        prov = Extracted(page)
        for key in keys:
            self._drop_provenance(key, prov)
        return len(keys)

    def retract_inferred(self) -> int:
        """Remove all inferred triples (before re-running entailment)."""
        keys = [k for k, provs in self._facts.items() if INFERRED in provs]
        for key in keys:
            self._drop_provenance(key, INFERRED)
        return len(keys)

    def extracted(self) -> list[Triple]:
        return [t for t in self if isinstance(t.provenance, Extracted)]

    def contains(self, s: str, p: str, o: str) -> bool:
        return (s, p, o) in self._facts

    def _match_keys(self, s: Optional[str], p: Optional[str], o: Optional[str]) -> Iterator[tuple[str, str, str]]:
        if s is not None and p is not None and o is not None:
            if (s, p, o) in self._facts:
                yield (s, p, o)
        elif s is not None:
            by_p = self._spo.get(s, {})
            if p is not None:
                for obj in by_p.get(p, ()):
                    yield (s, p, obj)
            else:
                for pred, objs in by_p.items():
                    for obj in objs:
                        if o is None or obj == o:
                            yield (s, pred, obj)
        elif p is not None:
            by_o = self._pos.get(p, {})
            if o is not None:
                for subj in by_o.get(o, ()):
                    yield (subj, p, o)
            else:
                for obj, subjs in by_o.items():
                    for subj in subjs:
                        yield (subj, p, obj)
        elif o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield (subj, pred, o)
        else:
            yield from self._facts.keys()

    def match(self, s: Optional[str] = None, p: Optional[str] = None, o: Optional[str] = None) -> list[Triple]:
        """All triples matching the given constants (None = wildcard), both
        provenances, in lexicographic (s, p, o, provenance) order."""
        out = []
        for key in self._match_keys(s, p, o):
            for prov in self._facts[key]:
                out.append(Triple(key[0], key[1], key[2], prov))
        out.sort(key=triple_sort_key)
        return out

    def match_spo(self, s: Optional[str] = None, p: Optional[str] = None, o: Optional[str] = None) -> list[tuple[str, str, str]]:
        """Provenance-free variant of match (one entry per distinct fact)."""
        return sorted(self._match_keys(s, p, o))

    # --- conjunctive queries ---------------------------------------------

    def query(self, q: QueryPattern) -> list[dict[str, str]]:
        """All variable bindings satisfying every pattern and no negation.

        Deduplicated, deterministically ordered. Raises UnsafeNegation for
        negations that neither share a variable with the positive patterns
        nor are fully ground.
        """
        positive_vars: set[str] = set()
        for pattern in q.patterns:
            self._check_pattern(pattern)
            positive_vars.update(t for t in (pattern[0], pattern[2]) if is_variable(t))
        for pattern in q.negations:
            self._check_pattern(pattern)
            neg_vars = {t for t in (pattern[0], pattern[2]) if is_variable(t)}
            if neg_vars and not (neg_vars & positive_vars):
                raise UnsafeNegation(
                    f"negation {pattern} shares no variable with the positive patterns"
                )

        bindings: list[dict[str, str]] = [{}]
        for pattern in q.patterns:
            bindings = self._extend(bindings, pattern)
            if not bindings:
                break
        survivors = [b for b in bindings if not self._any_negation_holds(b, q.negations)]

        unique: dict[tuple, dict[str, str]] = {}
        for b in survivors:
            unique[tuple(sorted(b.items()))] = b
        return [unique[k] for k in sorted(unique)]

    @staticmethod
    def _check_pattern(pattern: tuple[str, str, str]) -> None:
        if len(pattern) != 3:
            raise ValueError(f"pattern must have three terms: {pattern!r}")
        if is_variable(pattern[1]):
            raise ValueError(f"predicate position must be a constant: {pattern!r}")

    def _extend(self, bindings: list[dict[str, str]], pattern: tuple[str, str, str]) -> list[dict[str, str]]:
        out = []
        s_term, p_term, o_term = pattern
        for binding in bindings:
            s = binding.get(s_term) if is_variable(s_term) else s_term
            o = binding.get(o_term) if is_variable(o_term) else o_term
            for key in self._match_keys(s, p_term, o):
                extended = dict(binding)
                ok = True
                for term, value in ((s_term, key[0]), (o_term, key[2])):
                    if not is_variable(term):
                        continue
                    if term in extended and extended[term] != value:
                        ok = False
                        break
                    extended[term] = value
                if ok:
                    out.append(extended)
        return out

    def _any_negation_holds(self, binding: dict[str, str], negations: tuple[tuple[str, str, str], ...]) -> bool:
        for s_term, p_term, o_term in negations:
            s = binding.get(s_term) if is_variable(s_term) else s_term
            o = binding.get(o_term) if is_variable(o_term) else o_term
            for _ in self._match_keys(s, p_term, o):
                return True
        return False

    # --- reachability -----------------------------------------------------

    def reachable(self, start: str, p: str) -> set[str]:
        """Nodes reachable from `start` via one or more `p` edges.

        `start` itself is included only if it lies on a cycle through it.
        """
        seen: set[str] = set()
        frontier = list(self._spo.get(start, {}).get(p, ()))
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(self._spo.get(node, {}).get(p, ()))
        return seen

    # --- debugging dump ----------------------------------------------------

    def dump(self) -> str:
        """One line per triple: `<s> <p> <o> <provenance>`, sorted."""
        lines = []
        for t in sorted(self, key=triple_sort_key):
            prov = f"extracted:{t.provenance.page}" if isinstance(t.provenance, Extracted) else "inferred"
            lines.append(f"{t.subject} {t.predicate} {t.object} {prov}")
        return "\n".join(lines)
