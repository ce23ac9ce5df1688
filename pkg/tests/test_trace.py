"""Trace recorder and reader tests."""

import json

from mpquicsim.trace import (
    LEVEL_FULL,
    LEVEL_STANDARD,
    TraceRecorder,
    read_trace,
)


def test_consumer_receives_microsecond_time():
    seen = []
    rec = TraceRecorder(consumers=[lambda e, t, f: seen.append((e, t, f))])
    rec.emit("packet_sent", 1.2345678, pn=3, path=1)
    assert seen == [("packet_sent", 1_234_568, {"pn": 3, "path": 1})]


def test_file_round_trip(tmp_path):
    path = str(tmp_path / "run.jsonl")
    with TraceRecorder(path) as rec:
        rec.emit("stream_send", 0.5, offset=0, len=1000)
        rec.emit("transfer_complete", 2.0, seconds=2.0)
    records = list(read_trace(path))
    assert [r["event"] for r in records] == ["stream_send", "transfer_complete"]
    assert records[0]["time_us"] == 500_000
    assert records[0]["offset"] == 0


def test_gzip_round_trip(tmp_path):
    path = str(tmp_path / "run.jsonl.gz")
    with TraceRecorder(path) as rec:
        for i in range(100):
            rec.emit("rtt_sample", i * 0.001, path=0, latest=0.05)
    records = list(read_trace(path))
    assert len(records) == 100
    assert records[42]["time_us"] == 42_000


def test_standard_level_drops_link_events(tmp_path):
    path = str(tmp_path / "std.jsonl")
    with TraceRecorder(path, level=LEVEL_STANDARD) as rec:
        rec.emit("link_enqueue", 0.1, path=0)
        rec.emit("link_deliver", 0.2, path=0)
        rec.emit("packet_sent", 0.3, pn=0)
    assert [r["event"] for r in read_trace(path)] == ["packet_sent"]


def test_full_level_keeps_link_events(tmp_path):
    path = str(tmp_path / "full.jsonl")
    with TraceRecorder(path, level=LEVEL_FULL) as rec:
        rec.emit("link_enqueue", 0.1, path=0)
        rec.emit("packet_sent", 0.3, pn=0)
    assert [r["event"] for r in read_trace(path)] == ["link_enqueue", "packet_sent"]


def test_lines_are_compact_json(tmp_path):
    path = str(tmp_path / "fmt.jsonl")
    with TraceRecorder(path) as rec:
        rec.emit("ack_generated", 1.0, n_ranges=2, at_limit=False)
    with open(path, encoding="utf-8") as fh:
        line = fh.readline().rstrip("\n")
    assert " " not in line
    assert json.loads(line)["n_ranges"] == 2


def test_no_file_no_error():
    rec = TraceRecorder()
    rec.emit("packet_sent", 0.0, pn=1)
    rec.close()
