import json
import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

from model_server.app import create_app
from model_server.backends import DummyBackend

PRIMARY_DATA = Path(__file__).resolve().parents[2] / "tests" / "data"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveServer:
    def __init__(self, app):
        self.port = free_port()
        config = uvicorn.Config(
            app, host="127.0.0.1", port=self.port, log_level="error"
        )
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def dummy_server():
    with LiveServer(create_app(DummyBackend)) as live:
        yield live.url


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    from model_server.tiny import build_tiny_qa_checkpoint

    return build_tiny_qa_checkpoint(str(tmp_path_factory.mktemp("tiny") / "ckpt"))


@pytest.fixture(scope="session")
def squad_file(tmp_path_factory):
    """Ten-example reading-comprehension file in the standard nested layout."""
    contexts = [
        ("The capital of France is Paris.", "What is the capital of France?", "Paris"),
        ("Mount Everest is the highest mountain.", "Which mountain is highest?", "Mount Everest"),
        ("Water boils at 100 degrees.", "At what temperature does water boil?", "100 degrees"),
        ("The sun rises in the east.", "Where does the sun rise?", "east"),
        ("Honey is made by bees.", "Who makes honey?", "bees"),
    ]
    data = {"data": []}
    for i, (context, question, answer) in enumerate(contexts * 2):
        data["data"].append(
            {
                "paragraphs": [
                    {
                        "context": context,
                        "qas": [
                            {
                                "id": f"s{i}",
                                "question": question,
                                "answers": [
                                    {"text": answer, "answer_start": context.index(answer)}
                                ],
                            }
                        ],
                    }
                ]
            }
        )
    path = tmp_path_factory.mktemp("data") / "squad.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def passages_file(tmp_path_factory):
    """Exported passage records in the pipeline's JSON Lines schema."""
    records = []
    for i in range(10):
        text = f"The capital of Country{i} is Metro{i}. The anthem of Country{i} is Song{i}."
        start = text.index(f"Metro{i}")
        records.append(
            {
                "id": f"p{i}",
                "question_id": f"p{i}",
                "question": f"What is the capital of Country{i}?",
                "language": "en",
                "text": text,
                "spans": [
                    {
                        "start": start,
                        "end": start + len(f"Metro{i}"),
                        "object": {"kind": "entity", "id": f"m.metro{i}"},
                        "surface": f"Metro{i}",
                        "score": 100.0,
                    },
                    {
                        "start": text.index(f"Song{i}"),
                        "end": text.index(f"Song{i}") + len(f"Song{i}"),
                        "object": {"kind": "entity", "id": f"m.song{i}"},
                        "surface": f"Song{i}",
                        "score": 100.0,
                    },
                ],
                "answers": [{"id": f"m.metro{i}", "name": f"Metro{i}"}],
            }
        )
    path = tmp_path_factory.mktemp("data") / "passages.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records), encoding="utf-8")
    return str(path)
