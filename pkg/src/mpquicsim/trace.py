"""JSON-lines run traces: one event per line, integer-microsecond clock."""

from __future__ import annotations

import gzip
import json
from typing import Callable, Dict, Iterable, Iterator, List, Optional

LEVEL_STANDARD = "standard"
LEVEL_FULL = "full"

# per-hop link events are high volume and only needed for conservation and
# throughput checks, so the standard level drops them
VERBOSE_EVENTS = frozenset({"link_enqueue", "link_deliver"})


class TraceRecorder:
    """Fans events out to an optional JSONL file and in-process consumers."""

    def __init__(
        self,
        path: Optional[str] = None,
        level: str = LEVEL_STANDARD,
        consumers: Optional[List[Callable[[str, int, dict], None]]] = None,
    ) -> None:
        self.level = level
        self.consumers = consumers or []
        self._fh = None
        if path is not None:
            opener = gzip.open if str(path).endswith(".gz") else open
            self._fh = opener(path, "wt", encoding="utf-8")

    def emit(self, event: str, now: float, **fields) -> None:
        if self.level != LEVEL_FULL and event in VERBOSE_EVENTS:
            return
        time_us = int(round(now * 1e6))
        for consumer in self.consumers:
            consumer(event, time_us, fields)
        if self._fh is not None:
            record = {"time_us": time_us, "event": event}
            record.update(fields)
            self._fh.write(json.dumps(record, separators=(",", ":")))
            self._fh.write("\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TraceRecorder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_trace(path: str) -> Iterator[dict]:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
