"""Connection ID registry, multipath negotiation, path validation."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set

from .sendtrack import MULTI_SPACE, SINGLE_SPACE, ProtocolError

DEFAULT_ACTIVE_CID_LIMIT = 8


class PathState(Enum):
    UNUSED = "unused"
    PROBING = "probing"
    VALIDATED = "validated"
    ACTIVE = "active"


def negotiate(client_modes: Set[str], server_modes: Set[str]) -> Optional[str]:
    """Pick the multipath flavor both sides support.

    Per-path number spaces win when both designs are available; disjoint
    support disables multipath entirely.
    """
    common = client_modes & server_modes
    if not common:
        return None
    if MULTI_SPACE in common:
        return MULTI_SPACE
    return SINGLE_SPACE


class CidRegistry:
    """Connection IDs issued by the peer, one consumed per path."""

    def __init__(self, active_limit: int = DEFAULT_ACTIVE_CID_LIMIT) -> None:
        self.active_limit = active_limit
        self.issued: Dict[int, bytes] = {}
        self.consumed: Set[int] = set()

    def on_new_connection_id(self, seq: int, cid: bytes) -> None:
        if seq in self.issued and self.issued[seq] != cid:
            raise ProtocolError(f"connection id seq {seq} reissued with new value")
        if len(self.issued) >= self.active_limit and seq not in self.issued:
            raise ProtocolError("active connection id limit exceeded")
        self.issued[seq] = cid

    def take(self) -> int:
        """Consume the lowest unused sequence number."""
        for seq in sorted(self.issued):
            if seq not in self.consumed:
                self.consumed.add(seq)
                return seq
        raise ProtocolError("no connection id available for a new path")


@dataclass
class PathRecord:
    path_id: int
    cid_seq: int = 0
    state: PathState = PathState.UNUSED
    challenge_data: Optional[bytes] = None
    challenge_sent_time: float = 0.0
    validated_time: float = 0.0
    # challenge received from the peer and not answered yet
    pending_response: Optional[bytes] = None


class PathManager:
    """Per-endpoint view of the connection's paths."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.paths: Dict[int, PathRecord] = {}

    def add_path(self, path_id: int, cid_seq: int = 0) -> PathRecord:
        rec = PathRecord(path_id=path_id, cid_seq=cid_seq)
        self.paths[path_id] = rec
        return rec

    def get(self, path_id: int) -> PathRecord:
        rec = self.paths.get(path_id)
        if rec is None:
            raise ProtocolError(f"unknown path {path_id}")
        return rec

    def start_validation(self, path_id: int, now: float) -> bytes:
        """Move a path to probing; returns the 8-byte challenge payload."""
        rec = self.get(path_id)
        if rec.state not in (PathState.UNUSED, PathState.PROBING):
            raise ProtocolError(f"path {path_id} already validated")
        rec.state = PathState.PROBING
        rec.challenge_data = self.rng.randbytes(8)
        rec.challenge_sent_time = now
        return rec.challenge_data

    def on_challenge(self, path_id: int, data: bytes) -> None:
        """Peer probes this path; a response must be echoed on it."""
        rec = self.paths.get(path_id)
        if rec is None:
            rec = self.add_path(path_id)
        rec.pending_response = data

    def take_pending_response(self, path_id: int) -> Optional[bytes]:
        rec = self.get(path_id)
        data, rec.pending_response = rec.pending_response, None
        return data

    def on_response(self, path_id: int, data: bytes, now: float) -> bool:
        """Returns True when the echo validates the path."""
        rec = self.get(path_id)
        if rec.state != PathState.PROBING or data != rec.challenge_data:
            return False
        rec.state = PathState.VALIDATED
        rec.validated_time = now
        return True

    def mark_active(self, path_id: int) -> None:
        rec = self.get(path_id)
        if rec.state == PathState.VALIDATED:
            rec.state = PathState.ACTIVE

    def mark_validated(self, path_id: int, now: float) -> None:
        rec = self.get(path_id)
        rec.state = PathState.VALIDATED
        rec.validated_time = now

    def usable_paths(self) -> List[int]:
        """Paths data frames may use, in id order."""
        return sorted(
            pid
            for pid, rec in self.paths.items()
            if rec.state in (PathState.VALIDATED, PathState.ACTIVE)
        )

    def validated_rtt_hint(self, path_id: int, now: float) -> Optional[float]:
        rec = self.paths.get(path_id)
        if rec is None or not rec.validated_time:
            return None
        return rec.validated_time - rec.challenge_sent_time
