"""Turn triples and grouped events into natural-language sentences.

Three interchangeable modes produce the same contract (sentence text plus
grounded object surfaces): a bare concatenation heuristic, deterministic
templates, and a remote neural generator whose output is validated and
backed by the template when it drops an entity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import MissingSurfaceError
from .kb import KbId, KbObject, Relation, Triple
from .matching import fuzzy_find
from .subgraph import EventFact, Subgraph

MODES = ("concat", "template", "remote")


@dataclass(frozen=True)
class VerbalizedUnit:
    """One generated sentence, its source triples, and the objects it mentions.

    Every (object, surface) pair's surface occurs verbatim in ``text``; the
    remote mode enforces this by validation with fallback to the template.
    """

    text: str
    sources: tuple[Triple, ...]
    objects: tuple[tuple[KbObject, str], ...]

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "sources": [t.to_json() for t in self.sources],
            "objects": [
                {"object": o.to_json(), "surface": s} for o, s in self.objects
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "VerbalizedUnit":
        return VerbalizedUnit(
            text=obj["text"],
            sources=tuple(Triple.from_json(t) for t in obj["sources"]),
            objects=tuple(
                (KbObject.from_json(o["object"]), o["surface"])
                for o in obj["objects"]
            ),
        )


def humanize_relation(rel: Relation | str) -> str:
    """Last path segment of a dotted/slashed relation id, as lowercase words."""
    rel_id = rel.id if isinstance(rel, Relation) else rel
    segment = re.split(r"[./]", rel_id)[-1] or rel_id
    return segment.replace("_", " ").strip().lower()


def _entity_surface(entity_id: KbId, names: Mapping[KbId, str]) -> str:
    surface = names.get(entity_id)
    if not surface:
        raise MissingSurfaceError(f"no surface form for entity {entity_id}")
    return surface


def _object_surface(obj: KbObject, names: Mapping[KbId, str]) -> str:
    if obj.is_literal:
        return obj.value
    return _entity_surface(obj.value, names)


def _join_list(surfaces: Sequence[str]) -> str:
    if len(surfaces) == 1:
        return surfaces[0]
    return ", ".join(surfaces[:-1]) + " and " + surfaces[-1]


def verbalize_concat(t: Triple, names: Mapping[KbId, str]) -> VerbalizedUnit:
    """Bare head/predicate/tail concatenation (the no-generation baseline)."""
    head_surface = _entity_surface(t.head, names)
    tail_surface = _object_surface(t.tail, names)
    text = f"{head_surface} {humanize_relation(t.relation)} {tail_surface} ."
    return VerbalizedUnit(
        text=text,
        sources=(t,),
        objects=((t.tail, tail_surface), (KbObject.entity(t.head), head_surface)),
    )


def _concat_event(e: EventFact, names: Mapping[KbId, str]) -> VerbalizedUnit:
    # flatten through the unnamed pivot: head, incoming relation, then each
    # field relation/value pair
    head = e.incoming.head if e.incoming.head != e.pivot else e.incoming.tail.value
    head_surface = _entity_surface(head, names)
    parts = [head_surface, humanize_relation(e.incoming.relation)]
    objects: list[tuple[KbObject, str]] = [(KbObject.entity(head), head_surface)]
    for f in e.fields:
        surface = _object_surface(f.tail, names)
        parts.append(humanize_relation(f.relation))
        parts.append(surface)
        objects.append((f.tail, surface))
    return VerbalizedUnit(
        text=" ".join(parts) + " .",
        sources=(e.incoming, *e.fields),
        objects=tuple(objects),
    )


def _template_group(group: Sequence[Triple], names: Mapping[KbId, str]) -> VerbalizedUnit:
    head = group[0].head
    rel = group[0].relation
    head_surface = _entity_surface(head, names)
    tail_surfaces = [_object_surface(t.tail, names) for t in group]
    text = f"The {humanize_relation(rel)} of {head_surface} is {_join_list(tail_surfaces)}."
    objects = [(KbObject.entity(head), head_surface)]
    objects.extend((t.tail, s) for t, s in zip(group, tail_surfaces))
    return VerbalizedUnit(text=text, sources=tuple(group), objects=tuple(objects))


def _template_event(e: EventFact, names: Mapping[KbId, str]) -> VerbalizedUnit:
    head = e.incoming.head if e.incoming.head != e.pivot else e.incoming.tail.value
    head_surface = _entity_surface(head, names)
    field_parts = []
    objects: list[tuple[KbObject, str]] = [(KbObject.entity(head), head_surface)]
    for f in e.fields:
        surface = _object_surface(f.tail, names)
        field_parts.append(f"{humanize_relation(f.relation)} {surface}")
        objects.append((f.tail, surface))
    text = f"{head_surface}: " + "; ".join(field_parts) + "."
    return VerbalizedUnit(
        text=text, sources=(e.incoming, *e.fields), objects=tuple(objects)
    )


def verbalize_template(
    item: Triple | EventFact | Sequence[Triple], names: Mapping[KbId, str]
) -> VerbalizedUnit:
    """Template sentence for a triple, a same-(head, relation) group, or an event.

    Plain triples render as "The <relation> of <head> is <tail>."; a group
    merges its tails into one comma/"and" list; an event names the reaching
    edge's head and then every field as "<relation> <value>" joined by
    semicolons.
    """
    if isinstance(item, EventFact):
        return _template_event(item, names)
    if isinstance(item, Triple):
        return _template_group([item], names)
    group = list(item)
    if not group:
        raise ValueError("empty triple group")
    key = (group[0].head, group[0].relation.id)
    if any((t.head, t.relation.id) != key for t in group):
        raise ValueError("merged triples must share head and relation")
    return _template_group(group, names)


def merge_plain_triples(triples: Iterable[Triple]) -> list[list[Triple]]:
    """Group triples by (head, relation), preserving first-occurrence order."""
    groups: dict[tuple[str, str], list[Triple]] = {}
    for t in triples:
        groups.setdefault((t.head, t.relation.id), []).append(t)
    return list(groups.values())


def subgraph_units(sg: Subgraph) -> list[Triple | EventFact | list[Triple]]:
    """Verbalization units of a subgraph: merged plain groups, then events."""
    units: list[Triple | EventFact | list[Triple]] = list(
        merge_plain_triples(sg.plain_triples)
    )
    units.extend(sg.events)
    return units


def unit_payload(
    item: Triple | EventFact | Sequence[Triple], names: Mapping[KbId, str]
) -> dict:
    """Wire form of one unit for the /verbalize endpoint.

    The generator never sees KB ids: heads and entity tails are rendered
    as their surface forms, which is also what the response validation
    looks for in the generated sentence.  The one exception is an event's
    pivot node, which has no name by nature and is sent as its opaque id
    so the generator can see which triples the event links together.
    """

    def triple_json(t: Triple, pivot: str | None = None) -> dict:
        head = t.head if t.head == pivot else _entity_surface(t.head, names)
        if t.tail.is_literal:
            tail = t.tail.value
        elif t.tail.value == pivot:
            tail = t.tail.value
        else:
            tail = _entity_surface(t.tail.value, names)
        out = {
            "head": head,
            "relation": t.relation.id,
            "tail": tail,
            "tail_is_literal": t.tail.is_literal,
        }
        if t.tail.datatype:
            out["tail_datatype"] = t.tail.datatype
        return out

    if isinstance(item, EventFact):
        return {
            "triples": [triple_json(item.incoming, item.pivot)]
            + [triple_json(f, item.pivot) for f in item.fields],
            "pivot": item.pivot,
        }
    if isinstance(item, Triple):
        return {"triples": [triple_json(item)]}
    return {"triples": [triple_json(t) for t in item]}


def verbalize_remote(
    items: Sequence[Triple | EventFact | list[Triple]],
    client,
    names: Mapping[KbId, str],
    threshold: float = 85.0,
) -> list[VerbalizedUnit]:
    """Generate sentences remotely, validating that no object went missing.

    Every expected object surface must be locatable in the returned sentence
    by the fuzzy matcher at ``threshold``; a sentence that drops one falls
    back to the deterministic template for that unit.  Matched surfaces are
    re-read from the generated sentence, so grounding offsets stay honest
    even when the generator paraphrases casing or spelling.
    """
    templates = [verbalize_template(item, names) for item in items]
    sentences = client.verbalize([unit_payload(item, names) for item in items])
    out: list[VerbalizedUnit] = []
    for template_unit, sentence in zip(templates, sentences):
        if not sentence or not sentence.strip():
            out.append(template_unit)
            continue
        grounded: list[tuple[KbObject, str]] = []
        ok = True
        for obj, expected_surface in template_unit.objects:
            match = fuzzy_find(expected_surface, sentence, threshold)
            if match is None:
                ok = False
                break
            grounded.append((obj, sentence[match.start : match.end]))
        if ok:
            out.append(
                VerbalizedUnit(
                    text=sentence,
                    sources=template_unit.sources,
                    objects=tuple(grounded),
                )
            )
        else:
            out.append(template_unit)
    return out


def verbalize_units(
    sg: Subgraph,
    mode: str,
    names: Mapping[KbId, str],
    client=None,
    threshold: float = 85.0,
    skip_unnamed: bool = True,
) -> tuple[list[VerbalizedUnit], int]:
    """Verbalize a whole subgraph in the given mode.

    Returns the units plus the count of units dropped because an entity had
    no surface form (``skip_unnamed=False`` re-raises instead, for callers
    that want the strict per-unit contract).
    """
    if mode not in MODES:
        raise ValueError(f"unknown verbalizer mode {mode!r}")
    if mode == "concat":
        # the concatenation baseline is strictly per-triple: no merging
        items: list = [*sg.plain_triples, *sg.events]
    else:
        items = subgraph_units(sg)

    if mode == "remote":
        if client is None:
            raise ValueError("remote mode needs a model-server client")
        usable: list = []
        dropped = 0
        for item in items:
            try:
                verbalize_template(item, names)
            except MissingSurfaceError:
                if not skip_unnamed:
                    raise
                dropped += 1
                continue
            usable.append(item)
        return verbalize_remote(usable, client, names, threshold), dropped

    out: list[VerbalizedUnit] = []
    dropped = 0
    for item in items:
        try:
            if mode == "template":
                out.append(verbalize_template(item, names))
            elif isinstance(item, EventFact):
                out.append(_concat_event(item, names))
            else:
                out.append(verbalize_concat(item, names))
        except MissingSurfaceError:
            if not skip_unnamed:
                raise
            dropped += 1
    return out, dropped
