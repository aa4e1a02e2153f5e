"""Discrete-event simulation of the cloud link pool.

Two allocation policies are modelled:

``static_partition``
    A display's users may only occupy that display's reserved channels.
``dynamic_borrow``
    When a display's own channels are all busy, an idle channel reserved for
    another display is lent to the request. Borrowed channels are held until
    the service completes and then go back to their owner, which serves its
    own queue first and only lends the channel again when nobody of its own
    is waiting. The pool is therefore work-conserving: no channel idles
    while a request waits.

Arrivals and service times are exponential. Every display has one random
stream for inter-arrival times and one for service times, both derived from
the master seed, so a run is fully reproducible from ``(sys, policy, params)``.
"""

from __future__ import annotations

import enum
import heapq
import math
import statistics
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from signage.errors import InvalidConfig, NonPositiveRate
from signage.queueing import CloudSystemConfig


class Policy(str, enum.Enum):
    STATIC_PARTITION = "static_partition"
    DYNAMIC_BORROW = "dynamic_borrow"

    @classmethod
    def parse(cls, value: "str | Policy") -> "Policy":
        aliases = {"static": cls.STATIC_PARTITION, "dynamic": cls.DYNAMIC_BORROW}
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class SimParams:
    seed: int = 1
    total_arrivals: int = 20_000
    queue_capacity: Optional[int] = None  # None: unbounded waiting room
    warmup_fraction: float = 0.1

    def __post_init__(self):
        if self.total_arrivals < 1:
            raise InvalidConfig("total_arrivals must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidConfig("warmup_fraction must lie in [0, 1)")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise InvalidConfig("queue_capacity must be positive or None")


class Allocation(NamedTuple):
    kind: str  # "own", "borrow", "enqueue" or "drop"
    owner: Optional[int] = None


OWN, BORROW, ENQUEUE, DROP = "own", "borrow", "enqueue", "drop"


@dataclass
class ChannelPool:
    """Channel occupancy and waiting queues, indexed by display position (0-based).

    ``serving[o][d]`` counts channels reserved for display ``o`` that are
    currently serving a user of display ``d``. Queue entries are
    ``(arrival_time, request)`` pairs in arrival order.
    """

    owned: list[int]
    queue_capacity: Optional[int] = None
    idle: list[int] = field(default_factory=list)
    serving: list[list[int]] = field(default_factory=list)
    queues: list[deque] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.owned)
        if not self.idle:
            self.idle = list(self.owned)
        if not self.serving:
            self.serving = [[0] * n for _ in range(n)]
        if not self.queues:
            self.queues = [deque() for _ in range(n)]

    @classmethod
    def for_system(cls, sys: CloudSystemConfig, queue_capacity: Optional[int] = None) -> "ChannelPool":
        return cls([d.reserved_channels for d in sys.displays], queue_capacity)

    def busy(self, owner: int) -> int:
        return self.owned[owner] - self.idle[owner]

    def effective_channels(self, display: int) -> int:
        """Channels reserved for ``display`` minus those lent out plus those borrowed."""
        lent_out = sum(self.serving[display]) - self.serving[display][display]
        borrowed = sum(row[display] for o, row in enumerate(self.serving) if o != display)
        return self.owned[display] - lent_out + borrowed

    def queue_full(self, display: int) -> bool:
        return self.queue_capacity is not None and len(self.queues[display]) >= self.queue_capacity

    def occupy(self, owner: int, display: int) -> None:
        self.idle[owner] -= 1
        self.serving[owner][display] += 1

    def vacate(self, owner: int, display: int) -> None:
        self.serving[owner][display] -= 1
        self.idle[owner] += 1


def try_allocate(pool: ChannelPool, display: int, policy: Policy) -> Allocation:
    """Decide where an arriving request of ``display`` goes. Does not mutate ``pool``."""
    if pool.idle[display] > 0:
        return Allocation(OWN, display)
    if policy is Policy.DYNAMIC_BORROW:
        for owner, idle in enumerate(pool.idle):
            if idle > 0:
                return Allocation(BORROW, owner)
    if pool.queue_full(display):
        return Allocation(DROP)
    return Allocation(ENQUEUE)


def on_release(pool: ChannelPool, owner: int, policy: Policy) -> Optional[int]:
    """Pick the display whose queue head takes a freed channel of ``owner``.

    Returns ``None`` when the channel should go idle. The owner's own queue
    always comes first. Under dynamic borrowing a channel whose owner has
    nobody waiting is lent to the longest-waiting head across the other
    queues; ties go to the lowest display index.
    """
    if pool.queues[owner]:
        return owner
    if policy is Policy.STATIC_PARTITION:
        return None
    best, best_t = None, math.inf
    for d, q in enumerate(pool.queues):
        if q and q[0][0] < best_t:
            best, best_t = d, q[0][0]
    return best


@dataclass(frozen=True)
class QueueMetrics:
    wait_probability: float = 0.0
    drop_probability: float = 0.0
    mean_wait_s: float = 0.0
    mean_queue_len: float = 0.0
    busy_fraction: float = 0.0
    arrivals: int = 0
    served: int = 0
    dropped: int = 0
    in_system: int = 0
    duration_s: float = 0.0
    per_display: tuple["QueueMetrics", ...] = ()


METRICS = ("wait_probability", "drop_probability", "mean_wait_s", "mean_queue_len", "busy_fraction")


class _ExpStream:
    """Buffered exponential variates by inverse CDF."""

    __slots__ = ("_rng", "_scale", "_block", "_buf", "_i")

    def __init__(self, seed_words: Sequence[int], rate: float, block: int = 4096):
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed_words))))
        self._scale = 1.0 / rate
        self._block = block
        self._buf: list[float] = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            u = self._rng.random(self._block)
            self._buf = (-np.log1p(-u) * self._scale).tolist()
            self._i = 0
        x = self._buf[self._i]
        self._i += 1
        return x


_ARRIVAL, _DEPARTURE = 0, 1


def _validate(sys: CloudSystemConfig) -> None:
    if not isinstance(sys, CloudSystemConfig) or not sys.displays:
        raise InvalidConfig("simulation needs at least one display")
    for d in sys.displays:
        if not d.service_rate > 0:
            raise NonPositiveRate(f"display {d.display_id}: service_rate must be > 0")


def simulate(sys: CloudSystemConfig, policy: Policy | str, params: SimParams) -> QueueMetrics:
    """Run one replication and return metrics over the post-warmup arrivals.

    The run stops at the instant of the ``params.total_arrivals``-th arrival;
    requests still queued or in service then are reported as ``in_system``.
    Time averages cover the window from the first counted arrival to the end.
    """
    _validate(sys)
    policy = Policy.parse(policy)
    n_disp = sys.size
    seed = int(params.seed) & 0xFFFFFFFFFFFFFFFF
    rates = [d.arrival_rate for d in sys.displays]
    if all(r == 0 for r in rates):
        zero = QueueMetrics()
        return QueueMetrics(per_display=tuple(zero for _ in range(n_disp)))

    arr_streams = [_ExpStream((seed, d, 0), r) if r > 0 else None for d, r in enumerate(rates)]
    svc_streams = [_ExpStream((seed, d, 1), cfg.service_rate) for d, cfg in enumerate(sys.displays)]

    pool = ChannelPool.for_system(sys, params.queue_capacity)
    queues = pool.queues
    heap: list = []
    seq = 0
    for d, s in enumerate(arr_streams):
        if s is not None:
            heap.append((s.next(), seq, _ARRIVAL, d, 0, False))
            seq += 1
    heapq.heapify(heap)

    total = params.total_arrivals
    warm_n = int(params.warmup_fraction * total)

    # lazily integrated time averages: value, last change time, area
    q_area = [0.0] * n_disp
    q_last = [0.0] * n_disp
    b_area = [0.0] * n_disp
    b_last = [0.0] * n_disp

    arrivals = [0] * n_disp
    waited = [0] * n_disp
    dropped = [0] * n_disp
    started = [0] * n_disp
    wait_sum = [0.0] * n_disp
    completed = [0] * n_disp

    n_arr = 0
    t = 0.0
    t_start = 0.0
    collecting = warm_n == 0
    heappush, heappop = heapq.heappush, heapq.heappop

    def start_service(now, owner, disp, arrived, counted):
        nonlocal seq
        b = pool.busy(owner)
        b_area[owner] += (now - b_last[owner]) * b
        b_last[owner] = now
        pool.occupy(owner, disp)
        if counted:
            started[disp] += 1
            wait_sum[disp] += now - arrived
        heappush(heap, (now + svc_streams[disp].next(), seq, _DEPARTURE, owner, disp, counted))
        seq += 1

    while heap:
        t, _, kind, a, b, counted = heappop(heap)
        if kind == _ARRIVAL:
            d = a
            counted = n_arr >= warm_n
            if counted and not collecting:
                collecting = True
                t_start = t
                for i in range(n_disp):
                    q_area[i] = b_area[i] = 0.0
                    q_last[i] = b_last[i] = t
            n_arr += 1
            decision = try_allocate(pool, d, policy)
            if counted:
                arrivals[d] += 1
            if decision.kind == OWN or decision.kind == BORROW:
                start_service(t, decision.owner, d, t, counted)
            elif decision.kind == ENQUEUE:
                q_area[d] += (t - q_last[d]) * len(queues[d])
                q_last[d] = t
                queues[d].append((t, counted))
                if counted:
                    waited[d] += 1
            else:
                if counted:
                    waited[d] += 1
                    dropped[d] += 1
            if n_arr >= total:
                break
            heappush(heap, (t + arr_streams[d].next(), seq, _ARRIVAL, d, 0, False))
            seq += 1
        else:
            owner, disp = a, b
            if counted:
                completed[disp] += 1
            busy = pool.busy(owner)
            b_area[owner] += (t - b_last[owner]) * busy
            b_last[owner] = t
            pool.vacate(owner, disp)
            nxt = on_release(pool, owner, policy)
            if nxt is not None:
                q_area[nxt] += (t - q_last[nxt]) * len(queues[nxt])
                q_last[nxt] = t
                arrived, req_counted = queues[nxt].popleft()
                start_service(t, owner, nxt, arrived, req_counted)

    t_end = t
    duration = t_end - t_start
    for i in range(n_disp):
        q_area[i] += (t_end - q_last[i]) * len(queues[i])
        b_area[i] += (t_end - b_last[i]) * pool.busy(i)

    def build(arr, wt, dr, st, ws, comp, qa, ba, channels, per=()):
        in_sys = arr - dr - comp
        return QueueMetrics(
            wait_probability=wt / arr if arr else 0.0,
            drop_probability=dr / arr if arr else 0.0,
            mean_wait_s=ws / st if st else 0.0,
            mean_queue_len=qa / duration if duration > 0 else 0.0,
            busy_fraction=ba / (duration * channels) if duration > 0 else 0.0,
            arrivals=arr,
            served=comp,
            dropped=dr,
            in_system=in_sys,
            duration_s=duration,
            per_display=per,
        )

    per = tuple(
        build(arrivals[i], waited[i], dropped[i], started[i], wait_sum[i], completed[i],
              q_area[i], b_area[i], pool.owned[i])
        for i in range(n_disp)
    )
    return build(sum(arrivals), sum(waited), sum(dropped), sum(started), sum(wait_sum),
                 sum(completed), sum(q_area), sum(b_area), sum(pool.owned), per)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    half_width: float


_Z95 = statistics.NormalDist().inv_cdf(0.975)


def summarize(values: Sequence[float]) -> MetricSummary:
    """Mean, sample standard deviation and 95% normal-approximation half-width."""
    values = [float(v) for v in values]
    mean = statistics.fmean(values)
    if len(values) < 2:
        return MetricSummary(mean, 0.0, math.nan)
    std = statistics.stdev(values)
    return MetricSummary(mean, std, _Z95 * std / math.sqrt(len(values)))


@dataclass(frozen=True)
class ReplicationReport:
    n: int
    metrics: dict[str, MetricSummary]
    runs: tuple[QueueMetrics, ...]

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]

    def per_display(self, index: int, name: str) -> MetricSummary:
        return summarize([getattr(r.per_display[index], name) for r in self.runs])


def derive_seed(master: int, index: int) -> int:
    """Seed of replication ``index``, derived from ``master`` by counter."""
    words = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, index]).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def replicate(
    sys: CloudSystemConfig,
    policy: Policy | str,
    params: SimParams,
    n_seeds: int,
    seeds: Optional[Sequence[int]] = None,
) -> ReplicationReport:
    """Run ``n_seeds`` independent replications and aggregate every metric.

    ``seeds`` overrides the derived per-replication seeds.
    """
    if n_seeds < 2:
        raise InvalidConfig("replicate needs at least two seeds")
    if seeds is None:
        seeds = [derive_seed(params.seed, i) for i in range(n_seeds)]
    elif len(seeds) != n_seeds:
        raise InvalidConfig("seeds must have n_seeds entries")
    runs = tuple(
        simulate(sys, policy, SimParams(s, params.total_arrivals, params.queue_capacity, params.warmup_fraction))
        for s in seeds
    )
    metrics = {name: summarize([getattr(r, name) for r in runs]) for name in METRICS}
    return ReplicationReport(n_seeds, metrics, runs)
