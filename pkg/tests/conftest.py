import json
import os
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import HealthCheck, settings

from ifct.data import example_path, load_example

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def liver():
    return load_example("liver")


@pytest.fixture(scope="session")
def renal():
    return load_example("renal")


@pytest.fixture(scope="session")
def pancreas():
    return load_example("pancreas")


@pytest.fixture
def liver_doc():
    with open(example_path("liver"), encoding="utf-8") as fh:
        return json.load(fh)


@contextmanager
def json_server(handler_fn):
    """Serve POST requests on localhost; ``handler_fn(body_bytes) -> (status, bytes)``."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
            status, payload = handler_fn(body)
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}/"
    finally:
        server.shutdown()
        server.server_close()


def minimal_doc():
    return {
        "organ": "test",
        "version": "0",
        "attributes": [{"name": "diameter_cm", "type": "real", "producer": "measure", "unit": "cm",
                        "function": "calc_mass_diameter_cm", "method": "feret"}],
        "risk_rules": [],
        "root": "n1",
        "nodes": {
            "n1": {"kind": "decision", "predicate": {"op": "le", "attr": "diameter_cm", "value": 1.0, "unit": "cm"},
                   "branches": {"true": "small", "false": "big"}, "text": "Small?"},
            "small": {"kind": "leaf", "recommendation": "No follow-up.", "severity": 0, "text": "small"},
            "big": {"kind": "leaf", "recommendation": "MRI.", "severity": 1, "text": "big"},
        },
    }


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
