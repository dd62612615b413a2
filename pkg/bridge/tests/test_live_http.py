"""End-to-end check over a real HTTP socket: the engine CLI's bridge
scorer against a live uvicorn server."""

import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

from codec.cli import main as codec_main

from codec_bridge import TableBackend, create_app

DATA = Path(__file__).resolve().parent.parent.parent / "tests" / "data"


@pytest.fixture(scope="module")
def server_url():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    app = create_app(TableBackend(DATA / "parity_table.tsv"))
    config = uvicorn.Config(app, host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            pytest.fail("bridge server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestLiveBridge:
    def test_cli_matches_frozen_output(self, server_url, tmp_path):
        out = tmp_path / "out.jsonl"
        code = codec_main(["project", "--scorer", f"bridge:{server_url}",
                           "--no-filter", "-o", str(out),
                           str(DATA / "parity_suite.jsonl")])
        assert code == 0
        assert out.read_text() == \
            (DATA / "table_golden_output.jsonl").read_text()

    def test_env_var_url_fallback(self, server_url, tmp_path, monkeypatch):
        monkeypatch.setenv("CODEC_BRIDGE_URL", server_url)
        out = tmp_path / "out.jsonl"
        code = codec_main(["project", "--scorer", "bridge", "--no-filter",
                           "-o", str(out),
                           str(DATA / "parity_suite.jsonl")])
        assert code == 0
        assert out.read_text() == \
            (DATA / "table_golden_output.jsonl").read_text()
