import threading
from contextlib import contextmanager

import pytest

from commentator import server
from commentator.config import Config
from commentator.preannotation import PreannotationEngine
from commentator.storage import Store


@pytest.fixture
def config(tmp_path) -> Config:
    return Config(db_dir=tmp_path / "data")


@pytest.fixture
def engine() -> PreannotationEngine:
    return PreannotationEngine.load()


@pytest.fixture
def store(config):
    with Store(config, owner=True) as handle:
        yield handle


@contextmanager
def run_app(config, store=None, engine=None):
    """Serve the API on an ephemeral loopback port in a daemon thread."""
    app = server.App(config, store=store, engine=engine)
    srv = server.make_server(app, host="127.0.0.1", port=0)
    thread = threading.Thread(target=lambda: srv.serve_forever(poll_interval=0.02),
                              daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{srv.server_address[1]}", app
    finally:
        srv.shutdown()
        srv.server_close()
        thread.join(timeout=5)
        if store is None:
            app.store.close()


def make_corpus_csv(texts, start_id=1) -> str:
    lines = ["id,text"]
    for offset, text in enumerate(texts):
        quoted = '"' + text.replace('"', '""') + '"'
        lines.append(f"{start_id + offset},{quoted}")
    return "\n".join(lines) + "\n"
