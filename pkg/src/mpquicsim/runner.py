"""Run orchestration: endpoint/network wiring, batches, scripted replays."""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .acktrack import AckPolicy, AckAction, AckTracker
from .endpoint import CLIENT, SERVER, Endpoint, EndpointConfig, Packet
from .metrics import MetricsCollector, RunMetrics
from .netsim import EventQueue, Link, SimulationClock, make_path_links, run_until_idle
from .scenarios import DEFAULT_TRANSFER_BYTES, Scenario, design_scenarios
from .sendtrack import MULTI_SPACE, SINGLE_SPACE, SenderTracker
from .trace import LEVEL_FULL, LEVEL_STANDARD, TraceRecorder

DEFAULT_SEED = 8
MAX_SIM_SECONDS = 600.0


@dataclass(frozen=True)
class RunConfig:
    """Complete, serializable description of a single simulated transfer."""

    family: str
    point_index: int
    paths: Tuple[Tuple[float, float], ...]  # (bandwidth_mbps, rtt_ms) per path
    design: str = SINGLE_SPACE
    cc: str = "cubic"
    cubic_variant: str = "picoquic"
    ab_limit: Optional[int] = 32
    strategy: str = "largest-first"
    dispatch: str = "on-path"
    pquic_mode: bool = False
    ack_frequency: bool = True
    size_bytes: int = DEFAULT_TRANSFER_BYTES
    seed: int = DEFAULT_SEED

    def run_id(self) -> str:
        ab = "inf" if self.ab_limit is None else str(self.ab_limit)
        bits = [
            self.family,
            f"p{self.point_index:03d}",
            self.design,
            self.cc,
            f"ab{ab}",
            self.strategy,
            self.dispatch,
        ]
        if self.pquic_mode:
            bits.append("pquic")
        bits.append(f"s{self.seed}")
        return "-".join(bits)

    def scenario_id(self) -> str:
        """Identity of the network scenario alone, for pairing configs."""
        return f"{self.family}-p{self.point_index:03d}-s{self.seed}-{self.size_bytes}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["paths"] = [list(p) for p in self.paths]
        d["ab_limit"] = "inf" if self.ab_limit is None else self.ab_limit
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["paths"] = tuple(tuple(p) for p in d["paths"])
        ab = d.get("ab_limit", 32)
        d["ab_limit"] = None if ab in ("inf", None) else int(ab)
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def config_from_scenario(scenario: Scenario, **overrides) -> RunConfig:
    paths = tuple((p.bandwidth_mbps, p.rtt_ms) for p in scenario.paths)
    return RunConfig(
        family=scenario.family,
        point_index=scenario.index,
        paths=paths,
        **overrides,
    )


def configs_for_family(
    family: str, n_points: int, seed: int = DEFAULT_SEED, **overrides
) -> List[RunConfig]:
    _, scenarios = design_scenarios(family, n_points, seed)
    return [
        config_from_scenario(s, seed=seed, **overrides) for s in scenarios
    ]


def policy_for(cfg: RunConfig) -> AckPolicy:
    return AckPolicy(
        ab_limit=cfg.ab_limit,
        strategy=cfg.strategy,
        dispatch=cfg.dispatch,
        pquic_mode=cfg.pquic_mode,
    )


class Simulation:
    """One client/server pair over per-path bidirectional links."""

    def __init__(self, cfg: RunConfig, trace: TraceRecorder) -> None:
        self.cfg = cfg
        self.trace = trace
        self.queue = EventQueue()
        self.clock = SimulationClock()
        self.links = {
            pid: make_path_links(bw * 1e6, rtt / 1e3)
            for pid, (bw, rtt) in enumerate(cfg.paths)
        }
        rng = random.Random(cfg.seed)
        ecfg = EndpointConfig(
            design=cfg.design,
            cc=cfg.cc,
            cubic_variant=cfg.cubic_variant,
            policy=policy_for(cfg),
            transfer_size=cfg.size_bytes,
            n_paths=len(cfg.paths),
            # the every-2-packets mode stands in for a stack without the
            # acknowledgment frequency extension
            ack_frequency_enabled=cfg.ack_frequency and not cfg.pquic_mode,
        )
        self.client = Endpoint(CLIENT, ecfg, trace, rng)
        self.server = Endpoint(SERVER, ecfg, trace, rng)

    def _pump(self, now: float) -> None:
        for ep in (self.client, self.server):
            from_client = ep.role == CLIENT
            direction = "c2s" if from_client else "s2c"
            for path_id, pkt in ep.take_outgoing():
                link = (
                    self.links[path_id].to_server
                    if from_client
                    else self.links[path_id].to_client
                )
                self.trace.emit(
                    "link_enqueue",
                    now,
                    path=path_id,
                    direction=direction,
                    bytes=pkt.wire_bytes,
                )
                arrival = link.enqueue(pkt.wire_bytes, now)
                if arrival is None:
                    self.trace.emit(
                        "buffer_drop",
                        now,
                        path=path_id,
                        direction=direction,
                        bytes=pkt.wire_bytes,
                    )
                else:
                    self.queue.push(arrival, ("pkt", pkt))
            for at, kind, key, gen in ep.take_timer_requests():
                self.queue.push(max(at, now), ("timer", ep.role, kind, key, gen))

    def _dispatch(self, now: float, payload) -> None:
        if payload[0] == "pkt":
            pkt: Packet = payload[1]
            receiver = self.server if pkt.sender == CLIENT else self.client
            self.trace.emit(
                "link_deliver",
                now,
                path=pkt.path_id,
                direction="c2s" if pkt.sender == CLIENT else "s2c",
                bytes=pkt.wire_bytes,
            )
            receiver.on_datagram(pkt, now)
        else:
            _, role, kind, key, gen = payload
            ep = self.client if role == CLIENT else self.server
            ep.on_timer(kind, key, gen, now)
        self._pump(now)

    def run(self) -> float:
        self.client.start(0.0)
        self._pump(0.0)
        run_until_idle(
            self.queue,
            self.clock,
            self._dispatch,
            stop=lambda: self.client.closed,
            max_time=MAX_SIM_SECONDS,
        )
        if not self.client.closed:
            raise RuntimeError(f"run did not complete: {self.cfg.run_id()}")
        return self.clock.now


def run_scenario(
    cfg: RunConfig,
    trace_path: Optional[str] = None,
    trace_level: str = LEVEL_STANDARD,
) -> RunMetrics:
    """Simulate one transfer; returns its metrics."""
    collector = MetricsCollector(cfg.size_bytes)
    with TraceRecorder(trace_path, trace_level, consumers=[collector]) as trace:
        Simulation(cfg, trace).run()
    return collector.finalize()


def _run_indexed(args) -> Tuple[int, RunMetrics]:
    index, cfg, trace_path, trace_level = args
    return index, run_scenario(cfg, trace_path, trace_level)


def run_many(
    cfgs: Sequence[RunConfig],
    trace_paths: Optional[Sequence[Optional[str]]] = None,
    trace_level: str = LEVEL_STANDARD,
    jobs: int = 1,
) -> List[RunMetrics]:
    """Run a batch; results ordered like cfgs regardless of completion order."""
    if trace_paths is None:
        trace_paths = [None] * len(cfgs)
    work = [
        (i, cfg, trace_paths[i], trace_level) for i, cfg in enumerate(cfgs)
    ]
    results: List[Optional[RunMetrics]] = [None] * len(cfgs)
    if jobs <= 1:
        for item in work:
            i, metrics = _run_indexed(item)
            results[i] = metrics
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, metrics in pool.map(_run_indexed, work):
                results[i] = metrics
    return results  # type: ignore[return-value]


# ---- scripted two-path reorder walkthrough --------------------------------

REPLAY_PACKET_BYTES = 1250
REPLAY_PACKET_COUNT = 12
# path 0: low bandwidth, short one-way delay; path 1: four times faster
# but farther, so its packets interleave into path 0's number gaps
REPLAY_PATHS = ((2.5e6, 0.0055), (10e6, 0.010))


@dataclass
class WalkthroughAck:
    time_s: float
    space_id: int
    ranges: Tuple[Tuple[int, int], ...]  # descending by high end


@dataclass
class WalkthroughResult:
    design: str
    arrivals: List[Tuple[float, int, int, int]]  # (time, path, space, pn)
    acks: List[WalkthroughAck]
    ranges_at_fourth_fast: Dict[int, Tuple[Tuple[int, int], ...]]
    prior_ack: Optional[WalkthroughAck]


def reorder_walkthrough(design: str) -> WalkthroughResult:
    """Replay of a round-robin burst over two asymmetric paths.

    Twelve full packets leave the server back to back, alternating paths.
    The faster-but-farther path overtakes the other, so under a shared
    number space the receiver accumulates acknowledgment gaps, while
    per-path spaces see every packet arrive in order.
    """
    queue = EventQueue()
    tracker = SenderTracker(design)
    links = {
        pid: Link(bw, delay, capacity_bytes=1 << 20)
        for pid, (bw, delay) in enumerate(REPLAY_PATHS)
    }
    for i in range(REPLAY_PACKET_COUNT):
        path_id = i % 2
        space_id, pn = tracker.assign_pn(path_id)
        arrival = links[path_id].enqueue(REPLAY_PACKET_BYTES, 0.0)
        assert arrival is not None
        queue.push(arrival, (path_id, space_id, pn))

    acks = AckTracker(AckPolicy())
    result = WalkthroughResult(design, [], [], {}, None)
    fast_seen = 0
    last_time = 0.0
    while queue:
        now, (path_id, space_id, pn) = queue.pop()
        last_time = now
        decision = acks.on_packet_received(space_id, pn, True, path_id, now)
        result.arrivals.append((now, path_id, space_id, pn))
        if path_id == 1:
            fast_seen += 1
            if fast_seen == 4:
                result.prior_ack = result.acks[-1] if result.acks else None
                result.ranges_at_fourth_fast = {
                    sid: sp.ranges.ranges()[::-1]  # descending
                    for sid, sp in acks.spaces.items()
                }
        if decision.action == AckAction.SEND_NOW:
            for built in acks.build_acks(now, bundle_all=decision.bundle_all):
                result.acks.append(
                    WalkthroughAck(now, built.space_id, built.ranges)
                )
    for built in acks.build_acks(last_time):
        result.acks.append(WalkthroughAck(last_time, built.space_id, built.ranges))
    return result
