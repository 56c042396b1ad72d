import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from kbqa import kb as kbm
from kbqa.evaluation import PipelineConfig, load_dataset
from kbqa.kb import KbObject, KnowledgeBase, Relation, Triple
from kbqa.verbalize import VerbalizedUnit

DATA_DIR = Path(__file__).parent / "data"

TOY_FILTER = kbm.PreprocessFilter(
    deny_prefixes=("common.topic.page_id", "wiki."),
    name_relations=frozenset({"type.object.name"}),
    alias_relations=frozenset({"common.topic.alias"}),
)


@pytest.fixture(scope="session")
def toy_kb() -> KnowledgeBase:
    knowledge = kbm.load_ntriples(str(DATA_DIR / "toy_kb.nt"), TOY_FILTER)
    return kbm.mark_cvt(knowledge, kbm.CvtPolicy.heuristic())


@pytest.fixture(scope="session")
def toy_questions():
    return load_dataset(str(DATA_DIR / "toy_questions.jsonl"))


@pytest.fixture(scope="session")
def toy_config() -> PipelineConfig:
    return PipelineConfig.from_file(str(DATA_DIR / "toy.cfg"))


# The two-sentence passage fixture used across passage/reader tests; the
# sentences keep their original spacing, including the space before the
# final period.
FORD_QUESTION = "Who was the vice president of Gerald Ford?"
GERGEN_SENTENCE = (
    "David Gergen was appointed as the White House Communications Director "
    "by President Gerald Ford ."
)
ROCKEFELLER_SENTENCE = "The vice president of Gerald Ford was Nelson Rockefeller ."


@pytest.fixture()
def ford_units() -> list[VerbalizedUnit]:
    gergen = Triple(
        "m.ford",
        Relation("government.white_house.communications_director"),
        KbObject.entity("m.gergen"),
    )
    rocky = Triple(
        "m.ford",
        Relation("government.us_president.vice_president"),
        KbObject.entity("m.rockefeller"),
    )
    return [
        VerbalizedUnit(
            text=GERGEN_SENTENCE,
            sources=(gergen,),
            objects=((KbObject.entity("m.gergen"), "David Gergen"),),
        ),
        VerbalizedUnit(
            text=ROCKEFELLER_SENTENCE,
            sources=(rocky,),
            objects=((KbObject.entity("m.rockefeller"), "Nelson Rockefeller"),),
        ),
    ]


def make_unit(text: str, objects: list[tuple[KbObject, str]]) -> VerbalizedUnit:
    """Test helper: a unit with a synthetic source triple."""
    return VerbalizedUnit(
        text=text,
        sources=(Triple("m.src", Relation("test.rel"), KbObject.literal(text[:10] or "x")),),
        objects=tuple(objects),
    )


class StubHandler(BaseHTTPRequestHandler):
    """Minimal protocol stub; per-path behavior set via `server.responses`.

    A response spec is either a (status, body) pair or a callable taking
    the parsed request payload and returning such a pair.
    """

    def log_message(self, *args):
        pass

    def _payload(self):
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length) or b"{}")

    def do_GET(self):
        self._respond(self.server.responses.get(("GET", self.path)), None)

    def do_POST(self):
        payload = self._payload()
        self.server.request_log.append((self.path, payload))
        self._respond(self.server.responses.get(("POST", self.path)), payload)

    def _respond(self, spec, payload):
        if spec is None:
            self.send_response(404)
            self.end_headers()
            return
        if callable(spec):
            spec = spec(payload)
        status, body = spec
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        if isinstance(body, (dict, list)):
            self.wfile.write(json.dumps(body).encode())
        else:
            self.wfile.write(body.encode())


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), StubHandler)
    server.responses = {}
    server.request_log = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


def random_units(rng: random.Random, n_units: int, vocab: list[str]) -> list[VerbalizedUnit]:
    """Random verbalized units whose object surfaces really occur in the text."""
    units = []
    for i in range(n_units):
        words = [rng.choice(vocab) for _ in range(rng.randint(3, 12))]
        surface_len = rng.randint(1, 2)
        start = rng.randrange(0, len(words) - surface_len + 1)
        surface = " ".join(words[start : start + surface_len])
        text = " ".join(words) + "."
        obj = (
            KbObject.entity(f"m.obj{i}_{rng.randrange(1000)}")
            if rng.random() < 0.7
            else KbObject.literal(surface)
        )
        units.append(make_unit(text, [(obj, surface)]))
    return units
