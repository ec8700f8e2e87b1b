"""CLI contract: exit codes, outputs, and the composed pipeline."""

import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

from vitalsgate.cli import main
from vitalsgate.corpus import corpus_text
from vitalsgate.wire import StreamDecoder

GOLDEN_DIR = Path(__file__).parent / "goldens"

REPLAY_P2 = """
[node]
node_id = 2
rng_seed = 3

[scenario]
replay_participant = 2
"""


def run_cli(*argv):
    return main(list(argv))


class TestCorpusValidate:
    def test_bundled_corpus_passes(self, capsys):
        assert run_cli("corpus", "validate") == 0
        out = capsys.readouterr().out
        assert "OK" in out and "79.27" in out

    def test_mutated_cell_fails_naming_column(self, tmp_path, capsys):
        mutated = corpus_text().replace("389.44", "489.44")  # air, person 1 hour 1
        path = tmp_path / "corpus.csv"
        path.write_text(mutated)
        assert run_cli("corpus", "validate", "--file", str(path)) == 3
        out = capsys.readouterr().out
        assert "air_quality person 1" in out

    def test_out_of_range_cell_named_exactly(self, tmp_path, capsys):
        mutated = corpus_text().replace("73.51", "173.51", 1)  # person 1 hour 1 humidity
        path = tmp_path / "corpus.csv"
        path.write_text(mutated)
        assert run_cli("corpus", "validate", "--file", str(path)) == 3
        out = capsys.readouterr().out
        assert "person 1 hour 1" in out and "humidity" in out


class TestReportTables:
    def test_corpus_reports_match_goldens(self, tmp_path, capsys):
        out_dir = tmp_path / "reports"
        assert run_cli("report", "tables", "--corpus", "--out", str(out_dir)) == 0
        for parameter in ("body_temp", "heart_rate", "ambient_temp", "humidity", "air_quality"):
            assert (out_dir / f"table_{parameter}.csv").exists()
            assert (out_dir / f"series_{parameter}.csv").exists()
            assert (out_dir / f"table_{parameter}.json").exists()
        golden = (GOLDEN_DIR / "table_body_temp.csv").read_text()
        assert (out_dir / "table_body_temp.csv").read_text() == golden

    def test_single_parameter_flag(self, tmp_path):
        out_dir = tmp_path / "reports"
        assert run_cli("report", "tables", "--corpus", "--parameter", "humidity",
                       "--out", str(out_dir)) == 0
        assert (out_dir / "table_humidity.csv").exists()
        assert not (out_dir / "table_body_temp.csv").exists()

    def test_empty_store_is_no_data_exit(self, tmp_path, capsys):
        code = run_cli("report", "tables", "--store", str(tmp_path / "empty"),
                       "--out", str(tmp_path / "r"))
        assert code == 2
        assert "no data" in capsys.readouterr().err

    def test_gappy_store_flagged(self, tmp_path, capsys):
        # one hour of one node only: report emitted, exit distinguishes gaps
        from vitalsgate.clock import ManualClock
        from vitalsgate.gateway.service import GatewayService
        from vitalsgate.rules import INSTANT_ALERTS
        from vitalsgate.sim.node import NodeConfig, SensorNode
        from vitalsgate.sim.scenario import replay_scenario

        clock = ManualClock()
        service = GatewayService(tmp_path / "store", clock=clock, hysteresis=INSTANT_ALERTS)
        node = SensorNode(NodeConfig(node_id=1, scenario=replay_scenario(1, hours=(1,))))
        conn = service.connection_opened("c")
        t = 0
        while not node.halted:
            clock.set(t)
            result = node.tick(t)
            if result.frame:
                service.connection_bytes(conn, result.frame)
            t += 1000
        code = run_cli("report", "tables", "--store", str(tmp_path / "store"),
                       "--out", str(tmp_path / "r"))
        assert code == 3
        assert "GAPS" in capsys.readouterr().out
        table = (tmp_path / "r" / "table_humidity.csv").read_text().splitlines()
        assert table[2] == "2,"  # hour 2 gap marker


class TestNodeSimulate:
    def test_bad_scenario_lists_line_numbers(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[scenario]\nreplay_participant = 9\n")
        assert run_cli("node", "simulate", "--scenario", str(path), "--out",
                       str(tmp_path / "x.bin")) == 3
        err = capsys.readouterr().err
        assert "line 2" in err

    def test_offline_file_decodes_to_same_samples(self, tmp_path, capsys):
        scenario = tmp_path / "p2.toml"
        scenario.write_text(REPLAY_P2)
        out = tmp_path / "frames.bin"
        assert run_cli("node", "simulate", "--scenario", str(scenario),
                       "--out", str(out)) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["data_frames"] == 10800
        frames, faults = StreamDecoder().feed(out.read_bytes())
        assert len(frames) == 10801 and not faults
        assert frames[0].node_id == 2
        assert frames[0].heart_rate == 81  # person 2 hour 1

    def test_deterministic_under_seed(self, tmp_path, capsys):
        scenario = tmp_path / "p2.toml"
        scenario.write_text(REPLAY_P2)
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        assert run_cli("node", "simulate", "--scenario", str(scenario), "--out", str(a),
                       "--seed", "99") == 0
        assert run_cli("node", "simulate", "--scenario", str(scenario), "--out", str(b),
                       "--seed", "99") == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unreachable_gateway_is_runtime_error(self, tmp_path, capsys):
        scenario = tmp_path / "p2.toml"
        scenario.write_text(REPLAY_P2)
        port = _free_port()  # nothing listens here
        code = run_cli("node", "simulate", "--scenario", str(scenario),
                       "--connect", f"127.0.0.1:{port}")
        assert code == 2

    def test_shipped_scenarios_parse(self):
        from vitalsgate.sim.scenario import load_scenario_file

        root = Path(__file__).parent.parent / "scenarios"
        for name in ("replay_person1.toml", "synthetic_demo.toml"):
            node_table, scenario = load_scenario_file(root / name)
            assert "node_id" in node_table
            assert scenario.duration_ms > 0

    @pytest.mark.slow
    def test_speed_3600_finishes_six_hours_in_under_10s(self, tmp_path, capsys):
        scenario = tmp_path / "p2.toml"
        scenario.write_text(REPLAY_P2)
        started = time.monotonic()
        assert run_cli("node", "simulate", "--scenario", str(scenario),
                       "--out", str(tmp_path / "frames.bin"), "--speed", "3600") == 0
        elapsed = time.monotonic() - started
        assert elapsed <= 10.0, f"{elapsed:.1f}s"
        report = json.loads(capsys.readouterr().out)
        assert report["data_frames"] == 10800


class TestUsage:
    def test_usage_error_is_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("node", "simulate")  # missing required flags
        assert exc.value.code == 1

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("node", "simulate", "--help")
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--scenario", "--connect", "--out", "--speed", "--seed"):
            assert flag in out


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_http(url, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        try:
            httpx.get(url, timeout=1.0)
            return
        except httpx.HTTPError:
            time.sleep(0.1)
    raise TimeoutError(f"server at {url} never came up")


def _serve_args(listen, http, store):
    return [
        sys.executable, "-m", "vitalsgate.cli", "gateway", "serve",
        "--listen", str(listen), "--http", str(http),
        "--store", str(store), "--time-mode", "frame-paced",
    ]


@pytest.mark.slow
class TestComposedPipeline:
    """node simulate + gateway serve + report tables reproduce the corpus."""

    def test_full_composition_and_kill_restart(self, tmp_path):
        listen, http = _free_port(), _free_port()
        store = tmp_path / "store"
        base = f"http://127.0.0.1:{http}"
        proc = subprocess.Popen(_serve_args(listen, http, store))
        try:
            _wait_http(f"{base}/api/v1/nodes")
            for person in (1, 2, 3, 4, 5):
                scenario = tmp_path / f"p{person}.toml"
                scenario.write_text(
                    f"[node]\nnode_id = {person}\n\n[scenario]\nreplay_participant = {person}\n"
                )
                out = subprocess.run(
                    [sys.executable, "-m", "vitalsgate.cli", "node", "simulate",
                     "--scenario", str(scenario), "--connect", f"127.0.0.1:{listen}"],
                    capture_output=True, text=True, timeout=300,
                )
                assert out.returncode == 0, out.stderr
            deadline = time.time() + 120
            while time.time() < deadline:
                nodes = httpx.get(f"{base}/api/v1/nodes", timeout=5).json()
                if len(nodes) == 5 and all(n["records"] == 10801 for n in nodes):
                    break
                time.sleep(0.25)
            else:
                pytest.fail(f"ingestion never settled: {nodes}")

            # hard kill mid-life, restart on the same store: state resumes
            proc.send_signal(signal.SIGKILL)
            proc.wait(timeout=30)
            proc2 = subprocess.Popen(_serve_args(listen, http, store))
            try:
                _wait_http(f"{base}/api/v1/nodes")
                nodes = httpx.get(f"{base}/api/v1/nodes", timeout=5).json()
                assert len(nodes) == 5
                assert all(n["records"] == 10801 for n in nodes)
                alerts = httpx.get(f"{base}/api/v1/alerts?state=open", timeout=5).json()
                assert alerts, "open alerts must survive a kill"
                profile = httpx.get(f"{base}/api/v1/nodes/1/thresholds", timeout=5).json()
                assert profile["profile_version"] >= 1
            finally:
                proc2.send_signal(signal.SIGINT)
                proc2.wait(timeout=30)
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait(timeout=30)

        # tables regenerated from the ingested store must equal the
        # corpus-derived ones (the `corpus validate` ground truth)
        reports = tmp_path / "reports"
        code = subprocess.run(
            [sys.executable, "-m", "vitalsgate.cli", "report", "tables",
             "--store", str(store), "--out", str(reports)],
            capture_output=True, text=True, timeout=300,
        )
        assert code.returncode == 0, code.stdout + code.stderr
        from_corpus = tmp_path / "corpus_reports"
        assert run_cli("report", "tables", "--corpus", "--out", str(from_corpus)) == 0
        for parameter in ("body_temp", "heart_rate", "ambient_temp", "humidity",
                          "air_quality"):
            name = f"table_{parameter}.csv"
            assert (reports / name).read_text() == (from_corpus / name).read_text(), name

    def test_port_in_use_fails_before_writes(self, tmp_path):
        blocker = socket.socket()
        blocker.bind(("0.0.0.0", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            out = subprocess.run(
                _serve_args(port, _free_port(), tmp_path / "store2"),
                capture_output=True, text=True, timeout=60,
            )
            assert out.returncode == 2
            assert not (tmp_path / "store2").exists()
        finally:
            blocker.close()
