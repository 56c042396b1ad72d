"""Triple store: N-Triples parsing, adjacency indices, and binary snapshots.

The store is built once from a dump file and is immutable afterwards, so a
single instance can serve any number of concurrent readers.
"""

from __future__ import annotations

import gzip
import io
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal

from .errors import (
    EmptyResultError,
    MalformedLineError,
    UnknownEntityError,
)

KbId = str

_NONE_IDX = 0xFFFFFFFF
_SNAPSHOT_MAGIC = b"KBQASNP1"


@dataclass(frozen=True)
class KbObject:
    """A triple tail: either an entity reference or a literal value."""

    is_literal: bool
    value: str
    datatype: str | None = None

    @staticmethod
    def entity(entity_id: KbId) -> "KbObject":
        return KbObject(is_literal=False, value=entity_id)

    @staticmethod
    def literal(text: str, datatype: str | None = None) -> "KbObject":
        return KbObject(is_literal=True, value=text, datatype=datatype)

    @property
    def entity_id(self) -> KbId | None:
        return None if self.is_literal else self.value

    def to_json(self) -> dict:
        if self.is_literal:
            out: dict = {"kind": "literal", "text": self.value}
            if self.datatype:
                out["datatype"] = self.datatype
            return out
        return {"kind": "entity", "id": self.value}

    @staticmethod
    def from_json(obj: dict) -> "KbObject":
        if obj.get("kind") == "literal":
            return KbObject.literal(obj["text"], obj.get("datatype"))
        return KbObject.entity(obj["id"])


@dataclass(frozen=True)
class Relation:
    """A predicate identified by a dotted or slashed path string."""

    id: str
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.id:
            raise ValueError("relation id must be non-empty")


@dataclass(frozen=True)
class Triple:
    head: KbId
    relation: Relation
    tail: KbObject

    def to_json(self) -> dict:
        out = {
            "head": self.head,
            "relation": self.relation.id,
            "tail": self.tail.value,
            "tail_is_literal": self.tail.is_literal,
        }
        if self.tail.datatype:
            out["tail_datatype"] = self.tail.datatype
        return out

    @staticmethod
    def from_json(obj: dict) -> "Triple":
        if obj.get("tail_is_literal"):
            tail = KbObject.literal(obj["tail"], obj.get("tail_datatype"))
        else:
            tail = KbObject.entity(obj["tail"])
        return Triple(obj["head"], Relation(obj["relation"]), tail)


@dataclass(frozen=True)
class PreprocessFilter:
    """Relation routing applied while loading a dump.

    Relations listed in ``name_relations``/``alias_relations`` feed the
    surface-form tables instead of the adjacency indices.  ``deny_prefixes``
    drops housekeeping relations (page ids, revision history); when
    ``allow_prefixes`` is non-empty only matching relations are kept.
    """

    deny_prefixes: tuple[str, ...] = ()
    allow_prefixes: tuple[str, ...] = ()
    name_relations: frozenset[str] = frozenset()
    alias_relations: frozenset[str] = frozenset()

    def admits(self, relation_id: str) -> bool:
        if any(relation_id.startswith(p) for p in self.deny_prefixes):
            return False
        if self.allow_prefixes:
            return any(relation_id.startswith(p) for p in self.allow_prefixes)
        return True


@dataclass(frozen=True)
class CvtPolicy:
    """How event (compound value) nodes are recognized.

    ``relations`` marks every entity tail of the listed relations; with
    ``use_heuristic`` any unnamed entity holding at least two outgoing
    triples is marked.  Both criteria may be combined.
    """

    relations: frozenset[str] = frozenset()
    use_heuristic: bool = False

    @staticmethod
    def explicit(relation_ids: Iterable[str]) -> "CvtPolicy":
        return CvtPolicy(relations=frozenset(relation_ids))

    @staticmethod
    def heuristic() -> "CvtPolicy":
        return CvtPolicy(use_heuristic=True)


def _tail_sort_tag(tail: KbObject) -> str:
    if tail.is_literal:
        return f"l:{tail.datatype or ''}:{tail.value}"
    return f"e:{tail.value}"


class KnowledgeBase:
    """Immutable triple set with by-head/by-tail indices and surface tables."""

    def __init__(
        self,
        triples: Iterable[Triple],
        names: dict[KbId, str] | None = None,
        aliases: dict[str, frozenset[KbId]] | None = None,
        cvt_markers: frozenset[KbId] = frozenset(),
        load_diagnostics: dict | None = None,
    ):
        self.triples: tuple[Triple, ...] = tuple(triples)
        self.names: dict[KbId, str] = dict(names or {})
        self.aliases: dict[str, frozenset[KbId]] = dict(aliases or {})
        self.cvt_markers: frozenset[KbId] = frozenset(cvt_markers)
        self.load_diagnostics: dict = dict(load_diagnostics or {})

        entities: set[KbId] = set()
        by_head: dict[KbId, list[Triple]] = {}
        by_tail: dict[KbId, list[Triple]] = {}
        for t in self.triples:
            entities.add(t.head)
            by_head.setdefault(t.head, []).append(t)
            if not t.tail.is_literal:
                entities.add(t.tail.value)
                by_tail.setdefault(t.tail.value, []).append(t)
        self.entities: frozenset[KbId] = frozenset(entities)

        key = self._neighbor_sort_key
        self.by_head: dict[KbId, tuple[Triple, ...]] = {
            h: tuple(sorted(ts, key=key)) for h, ts in by_head.items()
        }
        self.by_tail: dict[KbId, tuple[Triple, ...]] = {
            t: tuple(sorted(ts, key=key)) for t, ts in by_tail.items()
        }

    def _neighbor_sort_key(self, t: Triple) -> tuple[str, str, str, str]:
        return (t.relation.id, self.surface_of(t.tail) or t.tail.value, t.head, _tail_sort_tag(t.tail))

    # -- surface forms -----------------------------------------------------

    def name_of(self, entity_id: KbId) -> str | None:
        return self.names.get(entity_id)

    def surface_of(self, obj: KbObject) -> str | None:
        """Preferred rendering of an object: literal text or the entity name.

        Falls back to the raw id for entities without a name so sorting stays
        total; verbalizers that need a real name must check ``name_of``.
        """
        if obj.is_literal:
            return obj.value
        return self.names.get(obj.value, obj.value)

    def knows(self, entity_id: KbId) -> bool:
        return (
            entity_id in self.entities
            or entity_id in self.names
            or entity_id in self.cvt_markers
        )

    def relation_ids(self) -> set[str]:
        return {t.relation.id for t in self.triples}

    def stats(self) -> dict:
        return {
            "triples": len(self.triples),
            "entities": len(self.entities),
            "relations": len(self.relation_ids()),
            "names": len(self.names),
            "alias_surfaces": len(self.aliases),
            "cvt_markers": len(self.cvt_markers),
        }


# -- N-Triples subset parser ----------------------------------------------

_ESCAPES = {
    "\\": "\\",
    '"': '"',
    "n": "\n",
    "t": "\t",
    "r": "\r",
}


def _parse_iri_or_name(line: str, pos: int, lineno: int) -> tuple[str, int]:
    n = len(line)
    if pos < n and line[pos] == "<":
        end = line.find(">", pos + 1)
        if end < 0:
            raise MalformedLineError(lineno, line, "unterminated IRI")
        return line[pos + 1 : end], end + 1
    end = pos
    while end < n and not line[end].isspace():
        end += 1
    if end == pos:
        raise MalformedLineError(lineno, line, "expected term")
    return line[pos:end], end


def _parse_literal(line: str, pos: int, lineno: int) -> tuple[str, str | None, int]:
    n = len(line)
    out: list[str] = []
    i = pos + 1
    while i < n:
        c = line[i]
        if c == "\\":
            if i + 1 >= n:
                raise MalformedLineError(lineno, line, "dangling escape")
            e = line[i + 1]
            if e in _ESCAPES:
                out.append(_ESCAPES[e])
                i += 2
            elif e == "u" and i + 5 < n:
                out.append(chr(int(line[i + 2 : i + 6], 16)))
                i += 6
            elif e == "U" and i + 9 < n:
                out.append(chr(int(line[i + 2 : i + 10], 16)))
                i += 10
            else:
                raise MalformedLineError(lineno, line, f"bad escape \\{e}")
        elif c == '"':
            i += 1
            break
        else:
            out.append(c)
            i += 1
    else:
        raise MalformedLineError(lineno, line, "unterminated literal")

    datatype: str | None = None
    if i < n and line[i] == "@":
        end = i + 1
        while end < n and not line[end].isspace():
            end += 1
        datatype = line[i:end]  # language tag kept as "@xx"
        i = end
    elif line.startswith("^^", i):
        datatype, i = _parse_iri_or_name(line, i + 2, lineno)
    return "".join(out), datatype, i


def parse_ntriples_line(line: str, lineno: int = 0) -> Triple | None:
    """Parse one line of the N-Triples subset; None for blanks and comments.

    Subjects and predicates are IRIs (``<...>``) or bare prefixed names;
    objects may also be literals with an optional language or datatype tag.
    """
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None

    pos = 0
    n = len(stripped)

    def skip_ws(p: int) -> int:
        while p < n and stripped[p].isspace():
            p += 1
        return p

    subject, pos = _parse_iri_or_name(stripped, skip_ws(pos), lineno)
    predicate, pos = _parse_iri_or_name(stripped, skip_ws(pos), lineno)
    pos = skip_ws(pos)
    if pos >= n:
        raise MalformedLineError(lineno, line, "missing object")
    if stripped[pos] == '"':
        text, datatype, pos = _parse_literal(stripped, pos, lineno)
        if not text.strip():
            raise MalformedLineError(lineno, line, "empty literal")
        tail = KbObject.literal(text, datatype)
    else:
        obj_id, pos = _parse_iri_or_name(stripped, pos, lineno)
        tail = KbObject.entity(obj_id)
    rest = stripped[pos:].strip()
    if rest != ".":
        raise MalformedLineError(lineno, line, "missing terminating dot")
    if not subject or not predicate:
        raise MalformedLineError(lineno, line, "empty term")
    return Triple(subject, Relation(predicate), tail)


def _open_text(path: str) -> io.TextIOBase:
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def iter_ntriples(path: str, strict: bool = False) -> Iterator[tuple[int, Triple | None, bool]]:
    """Stream (lineno, triple, malformed) tuples; memory stays per-line."""
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                triple = parse_ntriples_line(raw, lineno)
            except MalformedLineError:
                if strict:
                    raise
                yield lineno, None, True
                continue
            yield lineno, triple, False


def load_ntriples(
    path: str,
    filter: PreprocessFilter | None = None,
    strict: bool = False,
) -> KnowledgeBase:
    """Load a dump into a fully indexed KnowledgeBase.

    Name/alias relations populate the surface tables instead of the
    adjacency indices; that routing runs before the deny/allow filter so a
    narrow allow list cannot drop entity names.  Malformed lines raise in
    strict mode and are skipped (and counted) otherwise.
    """
    filt = filter or PreprocessFilter()
    triples: list[Triple] = []
    names: dict[KbId, str] = {}
    aliases: dict[str, set[KbId]] = {}
    skipped = 0
    denied = 0

    def add_alias(surface: str, entity_id: KbId) -> None:
        aliases.setdefault(surface, set()).add(entity_id)

    for _lineno, triple, malformed in iter_ntriples(path, strict=strict):
        if malformed:
            skipped += 1
            continue
        if triple is None:
            continue
        rel_id = triple.relation.id
        surface = triple.tail.value
        if rel_id in filt.name_relations:
            names.setdefault(triple.head, surface)
            add_alias(surface, triple.head)
            continue
        if rel_id in filt.alias_relations:
            add_alias(surface, triple.head)
            continue
        if not filt.admits(rel_id):
            denied += 1
            continue
        triples.append(triple)

    return KnowledgeBase(
        triples,
        names=names,
        aliases={s: frozenset(ids) for s, ids in aliases.items()},
        load_diagnostics={"skipped_lines": skipped, "denied_triples": denied},
    )


# -- indexed operations -----------------------------------------------------

Direction = Literal["out", "in", "both"]


def neighbors(kb: KnowledgeBase, entity_id: KbId, direction: Direction = "both") -> list[Triple]:
    """Triples around an entity in deterministic (relation, tail, head) order."""
    if not kb.knows(entity_id):
        raise UnknownEntityError(entity_id)
    if direction == "out":
        return list(kb.by_head.get(entity_id, ()))
    if direction == "in":
        return list(kb.by_tail.get(entity_id, ()))
    if direction == "both":
        merged = set(kb.by_head.get(entity_id, ())) | set(kb.by_tail.get(entity_id, ()))
        return sorted(merged, key=kb._neighbor_sort_key)
    raise ValueError(f"unknown direction {direction!r}")


def prune_to_relations(kb: KnowledgeBase, keep: Iterable[str]) -> KnowledgeBase:
    """Keep only triples whose relation id is in ``keep``; rebuild indices."""
    keep_set = set(keep)
    if not keep_set:
        raise ValueError("keep set must be non-empty")
    kept = [t for t in kb.triples if t.relation.id in keep_set]
    if not kept:
        raise EmptyResultError(f"no triple matches the {len(keep_set)} kept relations")
    surviving_heads = {t.head for t in kept}
    return KnowledgeBase(
        kept,
        names=kb.names,
        aliases=kb.aliases,
        cvt_markers=frozenset(c for c in kb.cvt_markers if c in surviving_heads),
        load_diagnostics=kb.load_diagnostics,
    )


def mark_cvt(kb: KnowledgeBase, policy: CvtPolicy) -> KnowledgeBase:
    """Return a copy of ``kb`` with event-node markers computed from ``policy``.

    Recomputing from the same policy always yields the same marker set, so
    the operation is idempotent.
    """
    marked: set[KbId] = set()
    if policy.relations:
        for t in kb.triples:
            if t.relation.id in policy.relations and not t.tail.is_literal:
                marked.add(t.tail.value)
    if policy.use_heuristic:
        for head, bucket in kb.by_head.items():
            if head not in kb.names and len(bucket) >= 2:
                marked.add(head)
    # markers must point at nodes that head at least one triple
    marked = {m for m in marked if m in kb.by_head}
    return KnowledgeBase(
        kb.triples,
        names=kb.names,
        aliases=kb.aliases,
        cvt_markers=frozenset(marked),
        load_diagnostics=kb.load_diagnostics,
    )


# -- binary snapshot ---------------------------------------------------------


def _collect_strings(kb: KnowledgeBase) -> list[str]:
    strings: set[str] = set()
    for t in kb.triples:
        strings.add(t.head)
        strings.add(t.relation.id)
        if t.relation.label:
            strings.add(t.relation.label)
        strings.add(t.tail.value)
        if t.tail.datatype:
            strings.add(t.tail.datatype)
    for k, v in kb.names.items():
        strings.add(k)
        strings.add(v)
    for s, ids in kb.aliases.items():
        strings.add(s)
        strings.update(ids)
    strings.update(kb.cvt_markers)
    return sorted(strings)


def save_snapshot(kb: KnowledgeBase, path: str) -> None:
    """Write a versioned binary image: magic, counts, string table, sections.

    The string table is sorted, and every section is emitted in canonical
    order, so the same KB always serializes to identical bytes.
    """
    strings = _collect_strings(kb)
    index = {s: i for i, s in enumerate(strings)}

    def sidx(s: str | None) -> int:
        return _NONE_IDX if s is None else index[s]

    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(
            struct.pack(
                "<5I",
                len(strings),
                len(kb.triples),
                len(kb.names),
                len(kb.aliases),
                len(kb.cvt_markers),
            )
        )
        for s in strings:
            raw = s.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for t in kb.triples:
            fh.write(
                struct.pack(
                    "<IIIBII",
                    index[t.head],
                    index[t.relation.id],
                    sidx(t.relation.label),
                    1 if t.tail.is_literal else 0,
                    index[t.tail.value],
                    sidx(t.tail.datatype),
                )
            )
        for k in sorted(kb.names):
            fh.write(struct.pack("<II", index[k], index[kb.names[k]]))
        for s in sorted(kb.aliases):
            ids = sorted(kb.aliases[s])
            fh.write(struct.pack("<II", index[s], len(ids)))
            for eid in ids:
                fh.write(struct.pack("<I", index[eid]))
        for c in sorted(kb.cvt_markers):
            fh.write(struct.pack("<I", index[c]))


def load_snapshot(path: str) -> KnowledgeBase:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"not a KB snapshot: bad magic {magic!r}")
        n_strings, n_triples, n_names, n_aliases, n_cvt = struct.unpack("<5I", fh.read(20))
        strings: list[str] = []
        for _ in range(n_strings):
            (length,) = struct.unpack("<I", fh.read(4))
            strings.append(fh.read(length).decode("utf-8"))

        def sref(i: int) -> str | None:
            return None if i == _NONE_IDX else strings[i]

        triples: list[Triple] = []
        for _ in range(n_triples):
            h, r, lbl, is_lit, tv, dt = struct.unpack("<IIIBII", fh.read(21))
            tail = (
                KbObject.literal(strings[tv], sref(dt))
                if is_lit
                else KbObject.entity(strings[tv])
            )
            triples.append(Triple(strings[h], Relation(strings[r], sref(lbl)), tail))
        names: dict[str, str] = {}
        for _ in range(n_names):
            k, v = struct.unpack("<II", fh.read(8))
            names[strings[k]] = strings[v]
        aliases: dict[str, frozenset[str]] = {}
        for _ in range(n_aliases):
            s, count = struct.unpack("<II", fh.read(8))
            ids = struct.unpack(f"<{count}I", fh.read(4 * count))
            aliases[strings[s]] = frozenset(strings[i] for i in ids)
        cvt = frozenset(
            strings[struct.unpack("<I", fh.read(4))[0]] for _ in range(n_cvt)
        )
    return KnowledgeBase(triples, names=names, aliases=aliases, cvt_markers=cvt)


def stats_json(kb: KnowledgeBase) -> str:
    return json.dumps(kb.stats(), sort_keys=True)
