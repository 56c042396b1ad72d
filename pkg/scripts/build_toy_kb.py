#!/usr/bin/env python3
"""Regenerate the toy fixture KB, question set, and pipeline config.

The fixture is small enough to trace by hand but covers every structural
case the pipeline handles: grouped events behind unnamed nodes, a hub
entity with 40+ neighbors, literal answers, alias collisions, and
questions designed to fail in specific, diagnosable ways.
"""

from __future__ import annotations

import json
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"

NAME_REL = "type.object.name"
ALIAS_REL = "common.topic.alias"

NAMES = {
    "m.ford": "Gerald Ford",
    "m.rockefeller": "Nelson Rockefeller",
    "m.omaha": "Omaha",
    "m.usa": "United States",
    "m.dc": "Washington D.C.",
    "m.lutz": "Kellan Lutz",
    "m.twilight": "Twilight",
    "m.cullen": "Emmett Cullen",
    "m.promnight": "Prom Night",
    "m.leland": "Rick Leland",
    "m.walmart": "Walmart",
    "m.retail": "Retail-Store",
    "m.variety": "Variety Stores",
    "m.dept": "Department Stores",
    "m.aldi": "Aldi",
    "m.kalbrecht": "Karl Albrecht",
    "m.essen": "Essen",
    "m.vandy": "Vanderbilt University",
    "m.commodores": "Commodores",
    "m.nashville": "Nashville",
    "m.ghost": "Ghost Town",
    "m.cornelius": "Cornelius Vanderbilt",
}

ALIASES = [
    ("m.ford", "Ford"),
    ("m.cornelius", "Vanderbilt"),
]

TRIPLES = [
    # presidents
    ("m.ford", "government.us_president.vice_president", "m.rockefeller"),
    ("m.ford", "people.person.place_of_birth", "m.omaha"),
    ("m.ford", "people.person.date_of_birth", '"1913-07-14"^^xsd:date'),
    ("m.rockefeller", "people.person.date_of_birth", '"1908-07-08"^^xsd:date'),
    # films, through unnamed event nodes
    ("m.lutz", "film.actor.film", "m.cvt_lutz_twilight"),
    ("m.cvt_lutz_twilight", "film.performance.film", "m.twilight"),
    ("m.cvt_lutz_twilight", "film.performance.character", "m.cullen"),
    ("m.lutz", "film.actor.film", "m.cvt_lutz_promnight"),
    ("m.cvt_lutz_promnight", "film.performance.film", "m.promnight"),
    ("m.cvt_lutz_promnight", "film.performance.character", "m.leland"),
    # companies
    ("m.walmart", "business.industry", "m.retail"),
    ("m.walmart", "business.industry", "m.variety"),
    ("m.walmart", "business.industry", "m.dept"),
    ("m.aldi", "organization.organization.founders", "m.kalbrecht"),
    ("m.aldi", "organization.organization.headquarters", "m.essen"),
    ("m.aldi", "business.employer.employees", "m.cvt_aldi_founder"),
    ("m.cvt_aldi_founder", "business.employment_tenure.person", "m.kalbrecht"),
    ("m.cvt_aldi_founder", "business.employment_tenure.from", '"1946"'),
    # places and education
    ("m.vandy", "education.educational_institution.mascot", "m.commodores"),
    ("m.vandy", "location.location.contained_by", "m.nashville"),
    ("m.nashville", "location.location.contained_by", "m.usa"),
    ("m.omaha", "location.location.contained_by", "m.usa"),
    ("m.dc", "location.location.contained_by", "m.usa"),
    ("m.usa", "location.country.capital", "m.dc"),
]

# hub block: 40 contained cities make m.usa a 40+-neighbor entity
for i in range(1, 41):
    NAMES[f"m.city{i:02d}"] = f"City {i:02d}"
    TRIPLES.append(("m.usa", "location.location.contains", f"m.city{i:02d}"))

# housekeeping triples that the default deny filter must drop
JUNK = [
    ("m.walmart", "common.topic.page_id", '"12345"'),
    ("m.ford", "wiki.revision.history", '"rev-999"'),
]


def _term(value: str) -> str:
    if value.startswith('"'):
        return value
    return f"<{value}>"


def write_kb(path: Path) -> None:
    lines = ["# toy knowledge base fixture"]
    for entity_id, name in sorted(NAMES.items()):
        lines.append(f'<{entity_id}> <{NAME_REL}> "{name}" .')
    for entity_id, alias in ALIASES:
        lines.append(f'<{entity_id}> <{ALIAS_REL}> "{alias}" .')
    for head, rel, tail in TRIPLES + JUNK:
        lines.append(f"<{head}> <{rel}> {_term(tail)} .")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


QUESTIONS = [
    # (id, text, language, topics, answers, expected_correct)
    ("toy-01", "Who was the vice president of Gerald Ford?", "en",
     ["m.ford"], [{"id": "m.rockefeller", "name": "Nelson Rockefeller"}], True),
    ("toy-02", "What is the place of birth of Gerald Ford?", "en",
     ["m.ford"], [{"id": "m.omaha", "name": "Omaha"}], True),
    ("toy-03", "What is the date of birth of Gerald Ford?", "en",
     ["m.ford"], [{"name": "1913-07-14"}], True),
    ("toy-04", "Who played Emmett Cullen in Twilight?", "en",
     ["m.twilight"], [{"id": "m.lutz", "name": "Kellan Lutz"}], True),
    ("toy-05", "Who does Kellan Lutz play in Prom Night?", "en",
     ["m.lutz"], [{"id": "m.leland", "name": "Rick Leland"}], True),
    # annotation-gap case: two sibling industries outrank the golden one
    ("toy-06", "What industry does Walmart operate in?", "en",
     ["m.walmart"], [{"id": "m.variety", "name": "Variety Stores"}], False),
    ("toy-07", "What is the capital of the United States?", "en",
     ["m.usa"], [{"id": "m.dc", "name": "Washington D.C."}], True),
    ("toy-08", "What is the mascot of Vanderbilt University?", "en",
     ["m.vandy"], [{"id": "m.commodores", "name": "Commodores"}], True),
    # zero lexical overlap: the overlap baseline cannot solve it
    ("toy-09", "范德堡大学的吉祥物是什么？", "zh",
     ["m.vandy"], [{"id": "m.commodores", "name": "Commodores"}], False),
    ("toy-10", "Who are the founders of Aldi?", "en",
     ["m.aldi"], [{"id": "m.kalbrecht", "name": "Karl Albrecht"}], True),
    # the answer relation is absent from the KB entirely
    ("toy-11", "What is the population of Omaha?", "en",
     ["m.omaha"], [{"name": "486051"}], False),
    ("toy-12", "Which country is Omaha contained in?", "en",
     ["m.omaha"], [{"id": "m.usa", "name": "United States"}], True),
    ("toy-13", "In which city is the headquarters of Aldi?", "en",
     ["m.aldi"], [{"id": "m.essen", "name": "Essen"}], True),
    ("toy-14", "Which character does Kellan Lutz play in Twilight?", "en",
     ["m.lutz"], [{"id": "m.cullen", "name": "Emmett Cullen"}], True),
    ("toy-15", "Which city is Vanderbilt University contained in?", "en",
     ["m.vandy"], [{"id": "m.nashville", "name": "Nashville"}], True),
    ("toy-16", "Which president has place of birth Omaha?", "en",
     ["m.omaha"], [{"id": "m.ford", "name": "Gerald Ford"}], True),
    # topic entity is named but edgeless: no passage can be built
    ("toy-17", "Where is Ghost Town?", "en",
     ["m.ghost"], [{"id": "m.usa", "name": "United States"}], False),
    # record with no topic annotation at all
    ("toy-18", "What is the meaning of life?", "en",
     [], [{"name": "42"}], False),
    ("toy-19", "What is the date of birth of Nelson Rockefeller?", "en",
     ["m.rockefeller"], [{"name": "1908-07-08"}], True),
    ("toy-20", "Welche Stadt ist die capital der United States?", "de",
     ["m.usa"], [{"id": "m.dc", "name": "Washington D.C."}], True),
]


def write_questions(path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for qid, text, lang, topics, answers, _expected in QUESTIONS:
            record = {
                "id": qid,
                "question": text,
                "language": lang,
                "topic_entities": [{"id": t} for t in topics],
                "answers": answers,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


CONFIG = """\
# toy end-to-end configuration
name = toy-template-lexical
verbalizer.mode = template
reader.mode = lexical
linker.mode = golden
passage.budget_words = 750
fuzzy.threshold = 85
subgraph.hops = 2
subgraph.max_triples = 2000
"""


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_kb(DATA_DIR / "toy_kb.nt")
    write_questions(DATA_DIR / "toy_questions.jsonl")
    (DATA_DIR / "toy.cfg").write_text(CONFIG, encoding="utf-8")
    expected = sum(1 for q in QUESTIONS if q[5])
    print(f"wrote fixtures to {DATA_DIR}")
    print(f"hand-scored hits@1: {expected}/{len(QUESTIONS)} = {expected / len(QUESTIONS)}")


if __name__ == "__main__":
    main()
