"""Run metric extraction, online from a recorder or offline from a trace."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

from .intervals import IntervalCounter
from .trace import read_trace


@dataclass
class RunMetrics:
    transfer_time_s: float
    mean_ranges_per_ack_frame: float
    frac_ack_frames_at_limit: float
    rel_retransmitted: float
    max_per_byte_retrans: int
    ack_bytes_total: int
    ack_frames_total: int
    stream_bytes_sent: int
    buffer_drops: int
    packets_lost: int
    spurious_losses: int

    def to_dict(self) -> dict:
        return asdict(self)


class MetricsCollector:
    """Trace consumer accumulating the metrics of a single run.

    Acknowledgment metrics cover frames sent by the client (the data
    receiver); retransmission metrics cover stream frames sent by the
    server (the data sender).
    """

    def __init__(self, transfer_size: int) -> None:
        self.transfer_size = transfer_size
        self.transfer_time_s: Optional[float] = None
        self.ack_frames = 0
        self.ack_ranges_sum = 0
        self.ack_frames_at_limit = 0
        self.ack_bytes = 0
        self.stream_bytes = 0
        self.coverage = IntervalCounter()
        self.buffer_drops = 0
        self.packets_lost = 0
        self.spurious_losses = 0

    def __call__(self, event: str, time_us: int, fields: dict) -> None:
        if event == "ack_generated":
            if fields.get("by") == "client":
                self.ack_frames += 1
                self.ack_ranges_sum += fields["n_ranges"]
                self.ack_frames_at_limit += 1 if fields["at_limit"] else 0
                self.ack_bytes += fields["bytes"]
        elif event == "stream_send":
            if fields.get("by") == "server":
                off, ln = fields["offset"], fields["len"]
                self.stream_bytes += ln
                self.coverage.increment(off, off + ln)
        elif event == "transfer_complete":
            self.transfer_time_s = fields["seconds"]
        elif event == "buffer_drop":
            self.buffer_drops += 1
        elif event == "packet_lost":
            if fields.get("by") == "server":
                self.packets_lost += 1
        elif event == "spurious_loss":
            if fields.get("by") == "server":
                self.spurious_losses += 1

    def finalize(self) -> RunMetrics:
        if self.transfer_time_s is None:
            raise RuntimeError("trace has no transfer_complete event")
        mean_ranges = (
            self.ack_ranges_sum / self.ack_frames if self.ack_frames else 0.0
        )
        frac_at_limit = (
            self.ack_frames_at_limit / self.ack_frames if self.ack_frames else 0.0
        )
        rel = (self.stream_bytes - self.transfer_size) / self.transfer_size
        max_retrans = max(0, self.coverage.max_count() - 1)
        return RunMetrics(
            transfer_time_s=self.transfer_time_s,
            mean_ranges_per_ack_frame=mean_ranges,
            frac_ack_frames_at_limit=frac_at_limit,
            rel_retransmitted=rel,
            max_per_byte_retrans=max_retrans,
            ack_bytes_total=self.ack_bytes,
            ack_frames_total=self.ack_frames,
            stream_bytes_sent=self.stream_bytes,
            buffer_drops=self.buffer_drops,
            packets_lost=self.packets_lost,
            spurious_losses=self.spurious_losses,
        )


def extract_metrics(trace_path: str, transfer_size: int) -> RunMetrics:
    """Recompute a run's metrics by re-parsing its trace file."""
    collector = MetricsCollector(transfer_size)
    for record in read_trace(trace_path):
        fields = {
            k: v for k, v in record.items() if k not in ("time_us", "event")
        }
        collector(record["event"], record["time_us"], fields)
    return collector.finalize()
