import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from querysplit.backends import (
    CachedBackend,
    EchoBackend,
    GenerationRequest,
    GoldOracleBackend,
    RemoteBackend,
    ScriptedBackend,
    build_backend,
    cached,
    generate,
)
from querysplit.errors import (
    BackendConnectionError,
    BackendRejectedError,
    BackendTimeout,
    BackendServerError,
    ConfigError,
    MalformedResponseError,
    ScriptExhaustedError,
    UnknownRequestError,
)


def req(text, task="split", **kwargs):
    return GenerationRequest(task=task, input_text=text, **kwargs)


class TestGenerationRequest:
    def test_validation(self):
        with pytest.raises(ValueError):
            GenerationRequest(task="", input_text="x")
        with pytest.raises(ValueError):
            GenerationRequest(task="split", input_text="")
        with pytest.raises(ValueError):
            GenerationRequest(task="split", input_text="x", max_length=0)

    def test_request_ids_are_unique(self):
        assert req("a").request_id != req("a").request_id

    def test_wire_shape(self):
        request = GenerationRequest(task="split", input_text="A; B", seed=7, request_id="r1")
        assert request.to_wire() == {
            "task": "split",
            "input": "A; B",
            "max_length": 128,
            "seed": 7,
            "request_id": "r1",
        }


class TestStubs:
    def test_echo(self):
        response = generate(EchoBackend(), req("A; B"))
        assert response.output_text == "A; B"
        assert response.backend_id == "echo"

    def test_echo_is_pure(self):
        backend = EchoBackend()
        r = req("去北京", request_id="fixed")
        assert backend.generate(r) == backend.generate(r)

    def test_gold_oracle_plain_key(self):
        backend = GoldOracleBackend({"in": "out"})
        assert backend.generate(req("in")).output_text == "out"

    def test_gold_oracle_task_key_wins(self):
        backend = GoldOracleBackend({("split", "in"): "split-out", "in": "plain-out"})
        assert backend.generate(req("in", task="split")).output_text == "split-out"
        assert backend.generate(req("in", task="delete")).output_text == "plain-out"

    def test_gold_oracle_unknown_input(self):
        with pytest.raises(UnknownRequestError):
            GoldOracleBackend({}).generate(req("mystery"))

    def test_scripted_order_and_exhaustion(self):
        backend = ScriptedBackend(["X", "Y"])
        assert backend.generate(req("a")).output_text == "X"
        assert backend.generate(req("b")).output_text == "Y"
        with pytest.raises(ScriptExhaustedError):
            backend.generate(req("c"))
        assert [r.input_text for r in backend.recorded] == ["a", "b", "c"]


class TestCachedBackend:
    def test_hit_consumes_script_once(self):
        inner = ScriptedBackend(["X", "Y"])
        backend = cached(inner, capacity=8)
        first = backend.generate(req("a", request_id="r"))
        second = backend.generate(req("a", request_id="r"))
        assert first == second
        assert inner.calls == 1
        assert backend.hits == 1 and backend.misses == 1

    def test_lru_eviction_at_capacity_one(self):
        inner = ScriptedBackend(["1", "2", "3", "4"])
        backend = cached(inner, capacity=1)
        backend.generate(req("a"))
        backend.generate(req("b"))
        backend.generate(req("c"))
        backend.generate(req("a"))  # evicted, consumes the script again
        assert inner.calls == 4

    def test_seed_is_part_of_the_key(self):
        inner = ScriptedBackend(["X", "Y"])
        backend = cached(inner, capacity=8)
        backend.generate(req("a", seed=1))
        backend.generate(req("a", seed=2))
        assert inner.calls == 2

    def test_response_echoes_new_request_id(self):
        backend = cached(ScriptedBackend(["X"]))
        backend.generate(req("a", request_id="first"))
        hit = backend.generate(req("a", request_id="second"))
        assert hit.request_id == "second"

    def test_cache_transparent_to_pipelines(self):
        from querysplit.pipeline import end_to_end_config, run_pipeline

        table = {("end_to_end", "A然后B"): "A; B; </s>"}
        config = end_to_end_config(executor="m")
        plain = run_pipeline(config, "A然后B", {"m": GoldOracleBackend(table)})
        through_cache = run_pipeline(
            config, "A然后B", {"m": cached(GoldOracleBackend(table), capacity=4)}
        )
        assert plain == through_cache

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            CachedBackend(EchoBackend(), capacity=0)


class _Script(BaseHTTPRequestHandler):
    """Plays (status, body) pairs in sequence; remembers request payloads."""

    responses = []
    received = []
    index = 0

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        type(self).received.append(json.loads(self.rfile.read(length)))
        status, body = type(self).responses[min(type(self).index, len(type(self).responses) - 1)]
        type(self).index += 1
        payload = body(type(self).received[-1]) if callable(body) else body
        data = payload.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self.send_response(200)
        self.send_header("Content-Length", "2")
        self.end_headers()
        self.wfile.write(b"{}")

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Script)
    _Script.responses = []
    _Script.received = []
    _Script.index = 0
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _Script
    server.shutdown()
    thread.join(timeout=3)


class TestRemoteBackend:
    def test_round_trip(self, http_server):
        url, script = http_server
        script.responses = [
            (200, lambda body: json.dumps({"output": body["input"].upper(),
                                           "request_id": body["request_id"]}))
        ]
        backend = RemoteBackend(url, retries=0)
        response = backend.generate(req("abc"))
        assert response.output_text == "ABC"
        assert backend.total_attempts == 1
        assert script.received[0]["task"] == "split"

    def test_server_errors_retried_then_propagate(self, http_server):
        url, script = http_server
        script.responses = [(500, "{}")]
        backend = RemoteBackend(url, retries=2)
        with pytest.raises(BackendServerError):
            backend.generate(req("abc"))
        assert backend.total_attempts == 3  # 1 + retries

    def test_recovery_after_one_failure(self, http_server):
        url, script = http_server
        script.responses = [
            (500, "{}"),
            (200, lambda body: json.dumps({"output": "ok", "request_id": body["request_id"]})),
        ]
        backend = RemoteBackend(url, retries=2)
        assert backend.generate(req("abc")).output_text == "ok"
        assert backend.last_attempts == 2

    def test_rejection_is_not_retried(self, http_server):
        url, script = http_server
        script.responses = [(400, json.dumps({"error": "bad task"}))]
        backend = RemoteBackend(url, retries=2)
        with pytest.raises(BackendRejectedError):
            backend.generate(req("abc"))
        assert backend.total_attempts == 1

    def test_malformed_payloads(self, http_server):
        url, script = http_server
        script.responses = [(200, "not json at all")]
        backend = RemoteBackend(url, retries=0)
        with pytest.raises(MalformedResponseError):
            backend.generate(req("abc"))

    def test_mismatched_request_id(self, http_server):
        url, script = http_server
        script.responses = [(200, json.dumps({"output": "x", "request_id": "other"}))]
        backend = RemoteBackend(url, retries=0)
        with pytest.raises(MalformedResponseError):
            backend.generate(req("abc"))

    def test_connection_error(self):
        backend = RemoteBackend("http://127.0.0.1:9", retries=1, timeout_s=0.5)
        with pytest.raises(BackendConnectionError):
            backend.generate(req("abc"))
        assert backend.total_attempts == 2

    def test_timeout(self, http_server):
        url, script = http_server

        def slow(body):
            time.sleep(0.4)
            return json.dumps({"output": "late", "request_id": body["request_id"]})

        script.responses = [(200, slow)]
        backend = RemoteBackend(url, retries=1, timeout_s=0.1)
        with pytest.raises(BackendTimeout):
            backend.generate(req("abc"))
        assert backend.total_attempts == 2

    def test_health(self, http_server):
        url, _ = http_server
        assert RemoteBackend(url).is_healthy()
        assert not RemoteBackend("http://127.0.0.1:9", timeout_s=0.5).is_healthy()


class TestBuildBackend:
    def test_kinds(self):
        assert isinstance(build_backend({"kind": "echo"}), EchoBackend)
        assert isinstance(build_backend({"kind": "scripted", "script": ["x"]}), ScriptedBackend)
        assert isinstance(build_backend({"kind": "gold", "table": {"a": "b"}}), GoldOracleBackend)
        assert isinstance(build_backend({"kind": "remote", "url": "http://h"}), RemoteBackend)

    def test_gold_needs_table(self):
        with pytest.raises(ConfigError):
            build_backend({"kind": "gold"})

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_backend({"kind": "warp"})

    def test_cache_wrapper(self):
        backend = build_backend({"kind": "echo", "cache": 4})
        assert isinstance(backend, CachedBackend)
