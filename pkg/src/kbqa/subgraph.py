"""Question-specific subgraph construction around topic entities.

Breadth-first expansion in both edge directions; nodes carrying a CVT
marker are folded into a single grouped event (the reaching edge plus the
node's outgoing field triples) that costs one hop step, so a two-hop
extraction reaches answers hidden behind event nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyTopicsError, UnknownEntityError
from .kb import KbId, KnowledgeBase, Triple, neighbors

UNLIMITED = 2**62


@dataclass(frozen=True)
class EventFact:
    """A grouped event: the edge that reached the pivot plus its fields."""

    pivot: KbId
    incoming: Triple
    fields: tuple[Triple, ...]

    def __post_init__(self):
        if not self.fields:
            raise ValueError("event fields must be non-empty")
        for t in self.fields:
            if t.head != self.pivot:
                raise ValueError(f"field head {t.head} is not the pivot {self.pivot}")

    def to_json(self) -> dict:
        return {
            "pivot": self.pivot,
            "incoming": self.incoming.to_json(),
            "fields": [t.to_json() for t in self.fields],
        }

    @staticmethod
    def from_json(obj: dict) -> "EventFact":
        return EventFact(
            pivot=obj["pivot"],
            incoming=Triple.from_json(obj["incoming"]),
            fields=tuple(Triple.from_json(t) for t in obj["fields"]),
        )


@dataclass(frozen=True)
class Subgraph:
    topics: tuple[KbId, ...]
    plain_triples: tuple[Triple, ...]
    events: tuple[EventFact, ...]
    hop_limit: int
    truncated: bool = field(default=False, compare=False)

    def to_json(self) -> dict:
        return {
            "topics": list(self.topics),
            "triples": [t.to_json() for t in self.plain_triples],
            "events": [e.to_json() for e in self.events],
            "hop_limit": self.hop_limit,
        }

    @staticmethod
    def from_json(obj: dict) -> "Subgraph":
        return Subgraph(
            topics=tuple(obj["topics"]),
            plain_triples=tuple(Triple.from_json(t) for t in obj["triples"]),
            events=tuple(EventFact.from_json(e) for e in obj["events"]),
            hop_limit=obj.get("hop_limit", 0),
        )

    def all_triples(self) -> list[Triple]:
        """Every triple in the subgraph, events flattened (incoming + fields)."""
        out = list(self.plain_triples)
        for e in self.events:
            out.append(e.incoming)
            out.extend(e.fields)
        return out


def triple_count(sg: Subgraph) -> int:
    return len(sg.plain_triples) + sum(len(e.fields) for e in sg.events) + len(sg.events)


def extract(
    kb: KnowledgeBase,
    topics: list[KbId],
    hops: int = 2,
    max_triples: int = 2000,
) -> Subgraph:
    """BFS neighborhood of the topics, grouped events included.

    Every arrival edge at a CVT-marked node yields one EventFact carrying
    that edge plus the pivot's outgoing field triples, so each participant
    gets a sentence naming it next to the event's fields; fields shared by
    several events of the same pivot are repeated by design.  A pivot keeps
    expanding through its remaining incoming edges on later hops (that is
    how sibling participants such as a co-star are reached from the object
    side), but nodes discovered through an event never start an event of
    their own.

    Expansion is deterministic: frontier nodes in discovery order, each
    node's triples in the store's neighbor order.  The size cap keeps a
    prefix of that enumeration (earlier layers first); an event that does
    not fit whole has its field list truncated to the remaining room.
    """
    if not topics:
        raise EmptyTopicsError("no topic entities")
    for t in topics:
        if not kb.knows(t):
            raise UnknownEntityError(t)
    if hops < 1:
        raise ValueError("hops must be >= 1")
    if max_triples < 1:
        raise ValueError("max_triples must be >= 1")

    topic_set = set(topics)
    plain: list[Triple] = []
    events: list[EventFact] = []
    seen: set[Triple] = set()
    plain_set: set[Triple] = set()
    pivots: set[KbId] = set()
    visited: dict[KbId, int] = {}
    frontier: list[KbId] = []
    for t in topics:
        if t not in visited:
            visited[t] = 0
            frontier.append(t)

    count = 0
    truncated = False

    for depth in range(hops):
        if truncated or not frontier:
            break
        next_frontier: list[KbId] = []
        for node in frontier:
            if truncated:
                break
            if node in pivots:
                edges: Iterable[Triple] = kb.by_tail.get(node, ())
            else:
                edges = neighbors(kb, node, "both")
            for edge in edges:
                if edge in seen:
                    continue
                if edge.head == node:
                    partner = None if edge.tail.is_literal else edge.tail.value
                else:
                    partner = edge.head

                pivot: KbId | None = None
                if node in pivots:
                    pivot = node
                elif (
                    partner is not None
                    and partner in kb.cvt_markers
                    and partner != node
                    and partner not in topic_set
                ):
                    pivot = partner

                if pivot is not None:
                    fields = tuple(
                        f
                        for f in kb.by_head.get(pivot, ())
                        if f != edge and f not in plain_set
                    )
                    if fields:
                        if count + 2 > max_triples:
                            truncated = True
                            break
                        keep = min(len(fields), max_triples - count - 1)
                        if keep < len(fields):
                            truncated = True
                        fields = fields[:keep]
                        events.append(EventFact(pivot, edge, fields))
                        seen.add(edge)
                        seen.update(fields)
                        count += 1 + len(fields)
                        if pivot not in visited:
                            visited[pivot] = depth + 1
                            pivots.add(pivot)
                            next_frontier.append(pivot)
                        participants = []
                        if edge.head != pivot:
                            participants.append(edge.head)
                        elif not edge.tail.is_literal:
                            participants.append(edge.tail.value)
                        for f in fields:
                            if not f.tail.is_literal:
                                participants.append(f.tail.value)
                        for entity in participants:
                            if entity not in visited:
                                visited[entity] = depth + 1
                                # no chained events: nodes found through an
                                # event stop here if they are CVTs themselves
                                if entity not in kb.cvt_markers:
                                    next_frontier.append(entity)
                        if truncated:
                            break
                        continue
                    # degenerate event (no remaining fields): fall through

                if count + 1 > max_triples:
                    truncated = True
                    break
                plain.append(edge)
                seen.add(edge)
                plain_set.add(edge)
                count += 1
                if partner is not None and partner not in visited:
                    visited[partner] = depth + 1
                    next_frontier.append(partner)
        frontier = next_frontier

    return Subgraph(
        topics=tuple(dict.fromkeys(topics)),
        plain_triples=tuple(plain),
        events=tuple(events),
        hop_limit=hops,
        truncated=truncated,
    )
