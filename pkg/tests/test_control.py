import json
import time

import pytest
import requests

from flowscape.control import ControlServer
from flowscape.engine import ConfigError, EngineConfig, LiveEngine
from flowscape.packets import SYN, parse_ip

WINDOW = 0.12


def rec(ts, src="203.0.113.5", dst="10.0.0.7", flags=SYN, sport=40000, dport=80):
    return (ts, parse_ip(src), parse_ip(dst), 0, flags, sport, dport)


def steady_records(stop):
    """Synthetic capture feed: a packet every few ms until told to stop."""
    i = 0
    while not stop["done"]:
        yield rec(int(time.time() * 1e6), sport=40000 + (i % 50))
        i += 1
        time.sleep(0.004)


@pytest.fixture()
def engine_and_url(tmp_path):
    stop = {"done": False}
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW,
                          log_dir=str(tmp_path / "logs"))
    engine = LiveEngine(config, steady_records(stop), live_drops=True, audio="null")
    engine.start()
    server = ControlServer(engine, "127.0.0.1:0")
    server.start()
    host, port = server.address[0], server.address[1]
    yield engine, f"http://{host}:{port}"
    stop["done"] = True
    server.stop()
    engine.stop()


def wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def test_state_endpoint(engine_and_url):
    engine, url = engine_and_url
    assert wait_for(lambda: engine.last_report is not None)
    state = requests.get(f"{url}/state", timeout=5).json()
    assert state["window_index"] >= 1
    assert state["window_period_s"] == WINDOW
    assert state["config_version"] == 1
    assert state["audio_sink"] == "null"
    assert "rain" in " ".join(state["last_sounds"]) or state["ip_flow_count"] >= 0


def test_config_get_and_patch(engine_and_url):
    engine, url = engine_and_url
    config = requests.get(f"{url}/config", timeout=5).json()
    assert "rule4:" in config["rules"]
    assert config["home_networks"] == ["10.0.0.0/24"]

    before = requests.get(f"{url}/state", timeout=5).json()["window_index"]
    resp = requests.put(f"{url}/config", json={"window_period_s": 0.2}, timeout=5)
    assert resp.status_code == 200
    body = resp.json()
    assert body["version"] == 2
    assert body["activation_window"] >= before
    assert wait_for(lambda: engine.config.window_period_s == 0.2)
    state = requests.get(f"{url}/state", timeout=5).json()
    assert state["applied_version"] == 2


def test_invalid_config_rejected_entirely(engine_and_url):
    engine, url = engine_and_url
    resp = requests.put(f"{url}/config", json={
        "window_period_s": 0.2,
        "rules": 'bad: NOPE-in-IP > 1 -> sound "frog"\n',
    }, timeout=5)
    assert resp.status_code == 422
    assert any("unknown feature" in e for e in resp.json()["errors"])
    # nothing from the payload applied
    assert engine.config.window_period_s == WINDOW
    resp = requests.put(f"{url}/config", json={"nonsense_key": 1}, timeout=5)
    assert resp.status_code == 422


def test_gain_mute_and_sound_endpoints(engine_and_url):
    engine, url = engine_and_url
    assert requests.put(f"{url}/gain/rule6", json={"gain": 0.1}, timeout=5).status_code == 200
    assert requests.post(f"{url}/mute/rule6", timeout=5).status_code == 200
    resp = requests.put(f"{url}/sound/rule6", json={"sound": "creek"}, timeout=5)
    assert resp.status_code == 200
    assert wait_for(lambda: engine._ruleset.get("rule6").sound_id == "creek")
    assert engine._ruleset.get("rule6").muted
    assert engine._ruleset.get("rule6").gain == 0.1
    # unknown rule and unknown sound are named in errors
    resp = requests.put(f"{url}/gain/rule99", json={"gain": 0.5}, timeout=5)
    assert resp.status_code == 422
    resp = requests.put(f"{url}/sound/rule6", json={"sound": "nonexistent"}, timeout=5)
    assert resp.status_code == 200  # no asset library configured: ids unchecked

    muted_events = []
    assert wait_for(lambda: engine.last_report is not None and any(
        ev.rule_id == "rule6" for ev in engine.last_report.events))  # still logged


def test_window_period_endpoint(engine_and_url):
    engine, url = engine_and_url
    resp = requests.put(f"{url}/window_period", json={"window_period_s": 0.3}, timeout=5)
    assert resp.status_code == 200
    assert wait_for(lambda: engine.config.window_period_s == 0.3)
    resp = requests.put(f"{url}/window_period", json={"window_period_s": -1}, timeout=5)
    assert resp.status_code == 422


def test_event_stream_two_subscribers_identical(engine_and_url):
    engine, url = engine_and_url

    def collect(n):
        frames = []
        with requests.get(f"{url}/events", stream=True, timeout=10) as resp:
            for line in resp.iter_lines():
                if not line:
                    continue
                frame = json.loads(line)
                if "close_reason" in frame:
                    break
                frames.append(frame)
                if len(frames) >= n:
                    break
        return frames

    a = collect(4)
    b = collect(4)
    assert len(a) == len(b) == 4
    for frame in a + b:
        assert set(frame) == {"window", "start_us", "events", "sounds", "stats"}
    # windows strictly increase within one subscription
    windows = [f["window"] for f in a]
    assert windows == sorted(windows)
    for frame in a:
        for ev in frame["events"]:
            assert set(ev) == {"rule", "sound", "category", "flow", "features"}
            assert ev["features"]  # headline features present


def test_slow_subscriber_disconnected_with_reason(engine_and_url):
    engine, url = engine_and_url
    with requests.get(f"{url}/events", stream=True, timeout=10) as resp:
        raw = resp.raw
        assert wait_for(lambda: engine._subs, timeout=5)
        engine._subs[-1].overflowed = True  # simulate the engine cutting us off
        lines = []
        for line in resp.iter_lines():
            if line:
                lines.append(json.loads(line))
            if lines and "close_reason" in lines[-1]:
                break
        assert lines[-1]["close_reason"] == "slow_subscriber"
    assert wait_for(lambda: not engine._subs)


def test_subscriber_overflow_flagging(engine_and_url):
    engine, url = engine_and_url
    sub = engine.subscribe(maxsize=1)
    assert wait_for(lambda: sub.overflowed, timeout=5)
    engine.unsubscribe(sub)


def test_static_ui_serving(tmp_path):
    stop = {"done": True}  # no packets needed
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW)
    engine = LiveEngine(config, iter(()), audio="null")
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>panel</body></html>")
    (ui / "app.js").write_text("console.log('hi')")
    server = ControlServer(engine, "127.0.0.1:0", ui_dir=str(ui))
    server.start()
    engine.start()
    try:
        host, port = server.address[0], server.address[1]
        url = f"http://{host}:{port}"
        resp = requests.get(f"{url}/", timeout=5)
        assert resp.status_code == 200 and "panel" in resp.text
        resp = requests.get(f"{url}/app.js", timeout=5)
        assert resp.status_code == 200
        assert requests.get(f"{url}/../secrets", timeout=5).status_code in (400, 404)
        assert requests.get(f"{url}/nope.js", timeout=5).status_code == 404
    finally:
        server.stop()
        engine.stop()


def test_engine_stage_config_requires_valid_home():
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW)
    engine = LiveEngine(config, iter(()), audio="null")
    with pytest.raises(ConfigError):
        engine.stage_config({"home_networks": []})
    with pytest.raises(ConfigError):
        engine.stage_config({"home_networks": ["not-a-cidr"]})


def test_state_during_syn_flood_names_creek(tmp_path):
    # replaying a flood, the status snapshot lists the escalated water sound
    base = 1_700_000_000_000_000
    records = [rec(base + i, sport=1024 + (i % 60000)) for i in range(1200)]
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW)
    engine = LiveEngine(config, iter(records), audio="null")
    engine.start()
    try:
        assert wait_for(lambda: engine.last_report is not None
                        and "creek" in engine.get_state()["last_sounds"])
    finally:
        engine.stop()


def test_ambient_layer_fills_quiet_windows():
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW,
                          ambient_sound="forest_bird")
    engine = LiveEngine(config, iter(()), audio="null")
    engine.start()
    try:
        assert wait_for(lambda: engine.last_report is not None)
        from flowscape.audio import plan

        playback = plan([], engine._ruleset, engine.config.master_gain, 0,
                        WINDOW, engine.config.ambient_sound)
        assert playback.entries == (("forest_bird", 1.0),)
    finally:
        engine.stop()


def test_config_churn_never_stalls_rotation(engine_and_url):
    # the latency guarantee: rotations continue on schedule while the control
    # plane is hammered with config mutations
    engine, url = engine_and_url
    assert wait_for(lambda: engine.window_index >= 1)
    start_window = engine.window_index
    start_time = time.monotonic()
    for i in range(40):
        gain = round(0.1 + (i % 9) / 10, 2)
        assert requests.put(f"{url}/gain/rule6", json={"gain": gain}, timeout=5).status_code == 200
    elapsed = time.monotonic() - start_time
    expected = int(elapsed / WINDOW)
    assert wait_for(lambda: engine.window_index - start_window >= max(1, expected - 2), timeout=5)


def test_shutdown_flushes_partial_window_to_logs(tmp_path):
    base = 1_700_000_000_000_000
    records = [rec(base + i * 1000, sport=40000 + i) for i in range(30)]
    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=60.0,
                          log_dir=str(tmp_path))
    engine = LiveEngine(config, iter(records), audio="null")
    engine.start()
    assert wait_for(lambda: engine._queue.empty(), timeout=5)
    time.sleep(0.1)
    engine.stop()  # window far from its deadline: the flush must cover it
    text = (tmp_path / "ipflow.log").read_text()
    assert "# window 0 " in text
    assert "traffic_flows=30" in text


def test_paced_replay_preserves_recorded_spacing(tmp_path):
    # packets 0.3s apart and a 0.12s window: with pacing honoured they land
    # in different windows even though the file reads instantly
    base = 1_700_000_000_000_000
    records = [rec(base), rec(base + 300_000), rec(base + 600_000)]
    sleeps = []

    config = EngineConfig(home_networks=("10.0.0.0/24",), window_period_s=WINDOW)
    engine = LiveEngine(config, iter(records), paced=True, audio="null",
                        sleep=lambda s: (sleeps.append(s), time.sleep(s))[1])
    engine.start()
    assert wait_for(lambda: engine.window_index >= 6, timeout=10)
    engine.stop()
    assert sleeps.count(0.3) == 2
