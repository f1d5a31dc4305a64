import json
import shutil
import subprocess
import sys
import threading
import time
from importlib import resources
from pathlib import Path

import httpx
import pytest

from dronenav.cli import (EX_INPUT, EX_NOPATH, EX_OK, EX_USAGE, main)

from conftest import map_doc


@pytest.fixture()
def map_file(tmp_path, reference_map_text) -> Path:
    path = tmp_path / "mission.json"
    path.write_text(reference_map_text)
    return path


@pytest.fixture()
def providers_file() -> str:
    return str(resources.files("dronenav") / "data" / "providers_mock.json")


class TestPlan:
    def test_basic(self, map_file, capsys):
        assert main(["plan", "--map", str(map_file)]) == EX_OK
        out = capsys.readouterr().out
        assert "cost: 38" in out
        assert "waypoints (39)" in out
        assert "preflight" in out
        assert "Pre-Flight Check" in out

    def test_context_and_ascii(self, map_file, capsys):
        code = main(["plan", "--map", str(map_file), "--ascii",
                     "--context", "avoid within 2 squares of school",
                     "--context", "birds at (13, 15) covering about 3 grids"])
        assert code == EX_OK
        out = capsys.readouterr().out
        assert "cost: 38" in out
        assert out.count("#") > 24  # zones render as blocked cells

    def test_no_path_exit_code(self, tmp_path, capsys):
        doc = map_doc(width=5, height=5, end=(4, 4), obstacles=[
            {"label": "w1", "x1": 3, "y1": 3, "x2": 4, "y2": 3},
            {"label": "w2", "x1": 3, "y1": 4, "x2": 3, "y2": 4}])
        path = tmp_path / "walled.json"
        path.write_text(doc)
        assert main(["plan", "--map", str(path)]) == EX_NOPATH

    def test_missing_file(self):
        assert main(["plan", "--map", "/does/not/exist.json"]) == EX_INPUT

    def test_bad_utterance(self, map_file):
        code = main(["plan", "--map", str(map_file),
                     "--context", "nonsense text"])
        assert code == EX_INPUT


class TestUsage:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == EX_USAGE

    def test_missing_required_flag(self):
        assert main(["plan"]) == EX_USAGE

    def test_bad_scenario_spec(self, providers_file):
        assert main(["bench", "--providers", providers_file,
                     "--scenario", "bogus"]) == EX_INPUT


class TestBench:
    def test_reference_scenario(self, tmp_path, providers_file, capsys):
        out = tmp_path / "out"
        code = main(["bench", "--providers", providers_file,
                     "--scenario", "appendix", "--out", str(out)])
        assert code == EX_OK
        report = (out / "report.md").read_text()
        assert "| mock-perfect | ✓ | ✓ | ✓ | ✓ | ✓ |" in report
        assert "| mock-corrupt | ✓ | Format | ✓ | ✓ | ✓ |" in report
        doc = json.loads((out / "report.json").read_text())
        assert len(doc["rows"]) == 2

    def test_generated_scenario(self, tmp_path, providers_file):
        out = tmp_path / "out"
        code = main(["bench", "--providers", providers_file,
                     "--scenario", "seed:40:40:10", "--out", str(out)])
        assert code == EX_OK
        doc = json.loads((out / "report.json").read_text())
        assert doc["scenario"]["width"] == 40
        assert doc["scenario"]["n_obstacles"] == 10

    def test_byte_identical_reruns(self, tmp_path, providers_file):
        first = tmp_path / "a"
        second = tmp_path / "b"
        for out in (first, second):
            assert main(["bench", "--providers", providers_file,
                         "--scenario", "seed:30:30:5", "--out", str(out)]) == EX_OK
        assert (first / "report.md").read_bytes() == (second / "report.md").read_bytes()
        assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()

    def test_record_then_replay(self, tmp_path, providers_file):
        record = tmp_path / "rec"
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert main(["bench", "--providers", providers_file,
                     "--scenario", "appendix", "--record", str(record),
                     "--out", str(out1)]) == EX_OK
        assert (record / "mock-perfect.jsonl").exists()
        assert main(["bench", "--providers", providers_file,
                     "--scenario", "appendix", "--replay", str(record),
                     "--out", str(out2)]) == EX_OK
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


class TestPlace:
    def test_default_config(self, capsys):
        assert main(["place"]) == EX_OK
        out = capsys.readouterr().out
        assert "| Llama3:8b | xApp_tactical | placed |" in out
        assert "unassessable" in out

    def test_out_files(self, tmp_path, capsys):
        assert main(["place", "--out", str(tmp_path)]) == EX_OK
        assert (tmp_path / "placement.md").exists()
        doc = json.loads((tmp_path / "placement.json").read_text())
        assert doc["placements"]

    def test_json_stdout(self, capsys):
        assert main(["place", "--format", "json"]) == EX_OK
        doc = json.loads(capsys.readouterr().out)
        assert {p["status"] for p in doc["placements"]} >= {
            "placed", "unplaceable", "unassessable"}

    def test_custom_config(self, tmp_path, capsys):
        config = tmp_path / "tiny.yaml"
        config.write_text(
            "bytes_per_param: 2\n"
            "models:\n  - {name: tiny, params_bn: 1, context_tokens: 2048}\n"
            "tasks:\n  - {name: chat, prompt_tokens: 10, output_tokens: 10,"
            " latency_budget: 5.0}\n"
            "nodes:\n"
            "  - {tier: RU, memory_gb: 4, prefill_rate: 1000, decode_rate: 1000}\n"
            "  - {tier: DU, memory_gb: 8, prefill_rate: 1000, decode_rate: 1000}\n"
            "  - {tier: CU, memory_gb: 64, prefill_rate: 1000, decode_rate: 1000}\n"
            "link_latency: {ue_ru: 0.001, ru_du: 0.001, du_cu: 0.001}\n")
        assert main(["place", "--config", str(config)]) == EX_OK
        out = capsys.readouterr().out
        assert "| tiny | chat | placed | RU |" in out


class TestConsoleScript:
    def test_entry_point_installed(self, map_file):
        exe = shutil.which("dronenav")
        assert exe, "console script not on PATH"
        proc = subprocess.run([exe, "plan", "--map", str(map_file)],
                              capture_output=True, text=True, timeout=60)
        assert proc.returncode == EX_OK
        assert "cost: 38" in proc.stdout

    def test_usage_exit_code(self):
        proc = subprocess.run([sys.executable, "-m", "dronenav.cli"],
                              capture_output=True, text=True, timeout=60)
        assert proc.returncode == EX_USAGE


class TestServe:
    def test_serves_http(self, map_file, reference_map_text):
        import socket

        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()

        thread = threading.Thread(
            target=main, args=(["serve", "--addr", f"127.0.0.1:{port}"],),
            daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{port}"
        deadline = time.monotonic() + 15
        last_error = None
        while time.monotonic() < deadline:
            try:
                if httpx.get(f"{base}/healthz", timeout=1).status_code == 200:
                    break
            except httpx.HTTPError as exc:
                last_error = exc
                time.sleep(0.2)
        else:
            pytest.fail(f"service never came up: {last_error}")

        created = httpx.post(f"{base}/missions", content=reference_map_text,
                             timeout=5)
        assert created.status_code == 201
        mid = created.json()["mission_id"]
        state = httpx.post(f"{base}/missions/{mid}/step", timeout=5).json()
        assert state["phase"] == "airborne"
