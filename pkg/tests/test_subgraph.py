from collections import Counter, deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbqa.errors import EmptyTopicsError, UnknownEntityError
from kbqa.kb import KbObject, KnowledgeBase, Relation, Triple, neighbors
from kbqa.subgraph import EventFact, Subgraph, extract, triple_count


def bfs_oracle(kb: KnowledgeBase, topics, hops: int) -> set:
    """Distance-based oracle: a triple belongs to the h-hop neighborhood iff
    one of its entity endpoints lies within h-1 undirected hops of a topic."""
    dist = {t: 0 for t in topics}
    queue = deque(topics)
    while queue:
        u = queue.popleft()
        for t in kb.by_head.get(u, ()):
            if not t.tail.is_literal and t.tail.value not in dist:
                dist[t.tail.value] = dist[u] + 1
                queue.append(t.tail.value)
        for t in kb.by_tail.get(u, ()):
            if t.head not in dist:
                dist[t.head] = dist[u] + 1
                queue.append(t.head)
    keep = set()
    for t in kb.triples:
        endpoints = [t.head] if t.tail.is_literal else [t.head, t.tail.value]
        if any(dist.get(e, hops) <= hops - 1 for e in endpoints):
            keep.add(t)
    return keep


def flatten(sg: Subgraph) -> Counter:
    return Counter(sg.all_triples())


def _kb(raw, cvt=frozenset(), names=None):
    triples = [
        Triple(h, Relation(r), KbObject.entity(t) if t.startswith("m.") else KbObject.literal(t))
        for h, r, t in raw
    ]
    return KnowledgeBase(triples, names=names or {}, cvt_markers=frozenset(cvt))


class TestExtractBasics:
    def test_hops1_partitions_neighbor_edges(self, toy_kb):
        for topic in ("m.ford", "m.lutz", "m.walmart"):
            sg = extract(toy_kb, [topic], hops=1, max_triples=10**6)
            arrival = set(sg.plain_triples) | {e.incoming for e in sg.events}
            assert arrival == set(neighbors(toy_kb, topic, "both"))

    def test_zero_neighbor_topic_is_empty(self, toy_kb):
        sg = extract(toy_kb, ["m.ghost"], hops=2, max_triples=100)
        assert sg.plain_triples == () and sg.events == ()
        assert triple_count(sg) == 0

    def test_cvt_grouped_into_single_event(self, toy_kb):
        sg = extract(toy_kb, ["m.lutz"], hops=1, max_triples=10**6)
        assert len(sg.events) == 2
        twilight_event = next(
            e for e in sg.events if e.pivot == "m.cvt_lutz_twilight"
        )
        assert twilight_event.incoming.head == "m.lutz"
        field_tails = {f.tail.value for f in twilight_event.fields}
        assert field_tails == {"m.twilight", "m.cullen"}

    def test_reverse_arrival_reaches_sibling_participants(self, toy_kb):
        # from the film side, two hops must reach the actor through the event
        sg = extract(toy_kb, ["m.twilight"], hops=2, max_triples=10**6)
        heads = {e.incoming.head for e in sg.events}
        assert "m.lutz" in heads

    def test_no_triple_both_plain_and_in_event(self, toy_kb):
        for topic in sorted(toy_kb.entities):
            sg = extract(toy_kb, [topic], hops=2, max_triples=10**6)
            plain = set(sg.plain_triples)
            for event in sg.events:
                assert event.incoming not in plain
                assert not plain.intersection(event.fields)

    def test_unknown_topic(self, toy_kb):
        with pytest.raises(UnknownEntityError):
            extract(toy_kb, ["m.nope"], hops=1)

    def test_empty_topics(self, toy_kb):
        with pytest.raises(EmptyTopicsError):
            extract(toy_kb, [], hops=1)

    def test_no_chained_events(self):
        kb = _kb(
            [
                ("m.a", "r.to_cvt", "m.cvt1"),
                ("m.cvt1", "r.f1", "m.cvt2"),
                ("m.cvt1", "r.f2", "m.x"),
                ("m.cvt2", "r.g1", "m.y"),
                ("m.cvt2", "r.g2", "m.z"),
            ],
            cvt={"m.cvt1", "m.cvt2"},
            names={"m.a": "A", "m.x": "X", "m.y": "Y", "m.z": "Z"},
        )
        sg = extract(kb, ["m.a"], hops=4, max_triples=100)
        assert {e.pivot for e in sg.events} == {"m.cvt1"}

    def test_topic_that_is_cvt_marked_expands_plainly(self):
        kb = _kb(
            [("m.cvt1", "r.f1", "m.x"), ("m.cvt1", "r.f2", "m.y")],
            cvt={"m.cvt1"},
        )
        sg = extract(kb, ["m.cvt1"], hops=1, max_triples=100)
        assert sg.events == ()
        assert len(sg.plain_triples) == 2


class TestTripleCount:
    def test_empty(self, toy_kb):
        sg = extract(toy_kb, ["m.ghost"], hops=1)
        assert triple_count(sg) == 0

    def test_arithmetic_of_definition(self):
        t = Triple("m.p", Relation("r.f"), KbObject.entity("m.q"))
        event = EventFact(
            "m.p",
            Triple("m.in", Relation("r.in"), KbObject.entity("m.p")),
            (t, Triple("m.p", Relation("r.g"), KbObject.literal("v"))),
        )
        sg = Subgraph(
            topics=("m.in",),
            plain_triples=(
                Triple("m.a", Relation("r.1"), KbObject.entity("m.b")),
                Triple("m.a", Relation("r.2"), KbObject.entity("m.c")),
                Triple("m.b", Relation("r.3"), KbObject.literal("x")),
            ),
            events=(event,),
            hop_limit=1,
        )
        assert triple_count(sg) == 3 + 2 + 1

    def test_matches_enumeration(self, toy_kb):
        sg = extract(toy_kb, ["m.lutz"], hops=2, max_triples=10**6)
        assert triple_count(sg) == len(sg.all_triples())


# -- randomized properties ----------------------------------------------------

_nodes = [f"m.n{i}" for i in range(12)]
_edges = st.lists(
    st.tuples(
        st.sampled_from(_nodes),
        st.sampled_from([f"rel.r{i}" for i in range(5)]),
        st.one_of(st.sampled_from(_nodes), st.sampled_from(["lit1", "lit2"])),
    ),
    min_size=1,
    max_size=40,
)
_cvt_choice = st.sets(st.sampled_from(_nodes), max_size=3)


@settings(deadline=None, max_examples=60)
@given(_edges, _cvt_choice, st.integers(1, 3))
def test_monotone_in_hops(raw, cvt, hops):
    kb = _kb(raw, cvt={c for c in cvt if any(h == c for h, _, _ in raw)})
    topic = raw[0][0]
    smaller = flatten(extract(kb, [topic], hops=hops, max_triples=10**9))
    larger = flatten(extract(kb, [topic], hops=hops + 1, max_triples=10**9))
    assert all(larger[t] >= c for t, c in smaller.items())


@settings(deadline=None, max_examples=60)
@given(_edges, _cvt_choice, st.integers(1, 3))
def test_union_property(raw, cvt, hops):
    kb = _kb(raw, cvt={c for c in cvt if any(h == c for h, _, _ in raw)})
    a = raw[0][0]
    b = raw[-1][0]
    combined = set(extract(kb, [a, b], hops=hops, max_triples=10**9).all_triples())
    single_a = set(extract(kb, [a], hops=hops, max_triples=10**9).all_triples())
    single_b = set(extract(kb, [b], hops=hops, max_triples=10**9).all_triples())
    assert combined >= single_a | single_b


@settings(deadline=None, max_examples=60)
@given(_edges, _cvt_choice, st.integers(1, 3), st.integers(1, 15))
def test_cap_respected_and_deterministic(raw, cvt, hops, cap):
    kb = _kb(raw, cvt={c for c in cvt if any(h == c for h, _, _ in raw)})
    topic = raw[0][0]
    first = extract(kb, [topic], hops=hops, max_triples=cap)
    second = extract(kb, [topic], hops=hops, max_triples=cap)
    assert triple_count(first) <= cap
    assert first.plain_triples == second.plain_triples
    assert first.events == second.events


@settings(deadline=None, max_examples=60)
@given(_edges, st.integers(1, 15))
def test_truncation_is_a_prefix(raw, cap):
    kb = _kb(raw)
    topic = raw[0][0]
    capped = extract(kb, [topic], hops=3, max_triples=cap)
    full = extract(kb, [topic], hops=3, max_triples=10**9)
    assert capped.plain_triples == full.plain_triples[: len(capped.plain_triples)]
