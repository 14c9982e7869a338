import json
import threading
import time

import pytest
import requests

from susbp.monitor import SessionConfig
from susbp.server import MonitorService, tcp_feed
from susbp.simulate import EpisodeScript, ScenarioScript, generate


@pytest.fixture()
def scripted_stream():
    script = ScenarioScript(
        episodes=(
            EpisodeScript(start_offset_s=25.0, duration_s=20.0, dispensed_g=3.4),
            EpisodeScript(start_offset_s=80.0, duration_s=22.0, dispensed_g=4.2),
        ),
    )
    return generate(script)


def _service(lines, speed=1e9, **kwargs):
    service = MonitorService(SessionConfig(), iter(lines), port=0, speed=speed, **kwargs)
    service.start()
    return service


def test_state_and_healthz(scripted_stream):
    lines = scripted_stream.to_jsonl().splitlines()
    lines.insert(5, "garbage line")
    service = _service(lines)
    try:
        assert service.wait_feed(timeout=30)
        base = f"http://127.0.0.1:{service.port}"
        state = requests.get(f"{base}/state", timeout=5).json()
        assert state["schema"] == "susbp.live/1"
        assert len(state["completed_episodes"]) == 2
        health = requests.get(f"{base}/healthz", timeout=5).json()
        assert health["feed_errors"] == 1
        assert health["feed_lines"] == len(lines)
        assert health["feed_done"] is True
    finally:
        service.stop()


def test_events_stream_starts_with_full_snapshot(scripted_stream):
    lines = scripted_stream.to_jsonl().splitlines()
    service = _service(lines)
    try:
        assert service.wait_feed(timeout=30)
        base = f"http://127.0.0.1:{service.port}"
        with requests.get(f"{base}/events", stream=True, timeout=5) as response:
            assert response.headers["Content-Type"].startswith("text/event-stream")
            event = {}
            for raw in response.iter_lines():
                line = raw.decode()
                if line.startswith("event:"):
                    event["event"] = line.split(":", 1)[1].strip()
                elif line.startswith("id:"):
                    event["id"] = int(line.split(":", 1)[1])
                elif line.startswith("data:"):
                    event["data"] = json.loads(line.split(":", 1)[1])
                elif not line and event:
                    break
        assert event["event"] == "snapshot"
        snapshot = event["data"]
        assert event["id"] == snapshot["seq"]
        # join semantics: the first frame is the current full snapshot
        assert len(snapshot["completed_episodes"]) == 2
        assert snapshot["targets"]["amount_ml_range"] == [3.0, 5.0]
    finally:
        service.stop()


def test_streaming_updates_while_feeding(scripted_stream):
    lines = scripted_stream.to_jsonl().splitlines()
    service = _service(lines, speed=200.0)
    try:
        base = f"http://127.0.0.1:{service.port}"
        seqs = []
        with requests.get(f"{base}/events", stream=True, timeout=10) as response:
            for raw in response.iter_lines():
                line = raw.decode()
                if line.startswith("id:"):
                    seqs.append(int(line.split(":", 1)[1]))
                    if len(seqs) >= 4:
                        break
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)
    finally:
        service.stop()


def test_static_fallback_page_and_404(scripted_stream):
    service = _service(scripted_stream.to_jsonl().splitlines())
    try:
        base = f"http://127.0.0.1:{service.port}"
        page = requests.get(base + "/", timeout=5)
        assert page.status_code == 200
        assert "susbp monitor" in page.text
        assert requests.get(base + "/nope.js", timeout=5).status_code == 404
    finally:
        service.stop()


def test_static_dir_served(tmp_path, scripted_stream):
    (tmp_path / "index.html").write_text("<html>dash</html>")
    asset_dir = tmp_path / "assets"
    asset_dir.mkdir()
    (asset_dir / "main.js").write_text("export {};")
    service = _service(scripted_stream.to_jsonl().splitlines(), static_dir=tmp_path)
    try:
        base = f"http://127.0.0.1:{service.port}"
        assert requests.get(base + "/", timeout=5).text == "<html>dash</html>"
        js = requests.get(base + "/assets/main.js", timeout=5)
        assert js.status_code == 200
        assert "javascript" in js.headers["Content-Type"]
    finally:
        service.stop()


def test_session_end_exports(tmp_path, scripted_stream):
    service = _service(scripted_stream.to_jsonl().splitlines(), out_dir=tmp_path)
    try:
        assert service.wait_feed(timeout=30)
        assert (tmp_path / "episodes.xes").exists()
        assert (tmp_path / "episodes.csv").exists()
        assert len((tmp_path / "episodes.csv").read_text().splitlines()) == 3
    finally:
        service.stop()


def test_tcp_feed_roundtrip(scripted_stream):
    import socket

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()

    ready = threading.Event()
    lines_iter = tcp_feed(port, ready=ready)
    assert ready.wait(timeout=5)
    service = MonitorService(SessionConfig(), lines_iter, port=0, speed=1e9)
    service.start()
    try:
        client = socket.create_connection(("127.0.0.1", port), timeout=5)
        payload = scripted_stream.to_jsonl().splitlines()[:50]
        client.sendall(("\n".join(payload) + "\n").encode())
        client.close()
        deadline = time.monotonic() + 10
        while service.feed_lines < 50 and time.monotonic() < deadline:
            time.sleep(0.05)
        assert service.feed_lines >= 50
        state = requests.get(f"http://127.0.0.1:{service.port}/state", timeout=5).json()
        assert state["seq"] > 0
    finally:
        service.stop()
