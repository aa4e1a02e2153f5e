"""Closed-form M/M/U queuing quantities for the signage link pool.

Each display ``d`` owns ``U_d`` link channels, receives Poisson requests at
rate ``lambda_d`` and releases channels at rate ``mu_d`` per busy channel.
The per-display formulas are the standard Erlang-C state probabilities; the
system-wide rejection and utilization figures come in two flavours selected
by :class:`EvaluationMode`:

* ``verbatim`` evaluates the system formulas in their literal closed form,
  including their odd zero-load behaviour (both return 1.0 when no
  traffic is offered).
* ``corrected`` uses the traffic-weighted waiting probability and the carried
  load fraction, which vanish at zero load and grow with it.

Factorials and powers are handled in log space so that large channel counts
do not overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from signage.errors import DimensionMismatch, InvalidConfig, NonPositiveRate, UnstableQueue


class EvaluationMode(str, enum.Enum):
    VERBATIM = "verbatim"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class DisplayQueueConfig:
    display_id: int
    reserved_channels: int
    arrival_rate: float
    service_rate: float

    def __post_init__(self):
        if int(self.reserved_channels) != self.reserved_channels or self.reserved_channels < 1:
            raise InvalidConfig(
                f"display {self.display_id}: reserved_channels must be a positive integer, "
                f"got {self.reserved_channels!r}"
            )
        if not self.service_rate > 0:
            raise NonPositiveRate(f"display {self.display_id}: service_rate must be > 0")
        if not self.arrival_rate >= 0:
            raise InvalidConfig(f"display {self.display_id}: arrival_rate must be >= 0")

    @property
    def offered_load(self) -> float:
        """Offered traffic ``a = lambda / mu`` in Erlangs."""
        return self.arrival_rate / self.service_rate

    @property
    def capacity(self) -> float:
        return self.reserved_channels * self.service_rate

    @property
    def stable(self) -> bool:
        return self.arrival_rate < self.capacity


@dataclass(frozen=True)
class CloudSystemConfig:
    displays: tuple[DisplayQueueConfig, ...]

    def __post_init__(self):
        object.__setattr__(self, "displays", tuple(self.displays))
        if not self.displays:
            raise InvalidConfig("a cloud system needs at least one display")
        ids = [d.display_id for d in self.displays]
        if ids != list(range(1, len(ids) + 1)):
            raise InvalidConfig(f"display ids must be 1..D in order, got {ids}")

    @classmethod
    def uniform(
        cls, channels: int | Sequence[int], arrival_rates: Sequence[float], service_rate: float
    ) -> "CloudSystemConfig":
        """Build a system from per-display rates sharing one service rate."""
        if isinstance(channels, int):
            channels = [channels] * len(arrival_rates)
        if len(channels) != len(arrival_rates):
            raise DimensionMismatch("channels and arrival_rates differ in length")
        return cls(
            tuple(
                DisplayQueueConfig(i + 1, int(u), float(lam), float(service_rate))
                for i, (u, lam) in enumerate(zip(channels, arrival_rates))
            )
        )

    @property
    def size(self) -> int:
        return len(self.displays)

    @property
    def total_channels(self) -> int:
        return sum(d.reserved_channels for d in self.displays)

    @property
    def total_arrival_rate(self) -> float:
        return sum(d.arrival_rate for d in self.displays)

    @property
    def total_capacity(self) -> float:
        return sum(d.capacity for d in self.displays)

    def with_rates(self, rates: Sequence[float]) -> "CloudSystemConfig":
        if len(rates) != self.size:
            raise DimensionMismatch(f"expected {self.size} rates, got {len(rates)}")
        return CloudSystemConfig(
            tuple(
                DisplayQueueConfig(d.display_id, d.reserved_channels, float(r), d.service_rate)
                for d, r in zip(self.displays, rates)
            )
        )


@dataclass(frozen=True)
class SweepRow:
    total_arrival_rate: float
    per_display_rates: tuple[float, ...]
    rejection: Optional[float]
    utilization: Optional[float]
    mode: EvaluationMode
    stable: bool = True


def _require_stable(cfg: DisplayQueueConfig) -> None:
    if not cfg.stable:
        raise UnstableQueue(
            f"display {cfg.display_id}: arrival rate {cfg.arrival_rate:g} is not below "
            f"capacity {cfg.reserved_channels} x {cfg.service_rate:g} = {cfg.capacity:g}"
        )


def _logsumexp(values: Sequence[float]) -> float:
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(sum(math.exp(v - top) for v in values))


def _log_terms(cfg: DisplayQueueConfig) -> tuple[list[float], float]:
    """Log of the idle-probability normalizer terms: m = 0..U-1 and the queued tail term.

    The tail term ``U lam^U / (mu^(U-1) U! (U mu - lam))`` is rewritten as
    ``a^U / U! * U mu / (U mu - lam)``.
    """
    u = cfg.reserved_channels
    lam, mu = cfg.arrival_rate, cfg.service_rate
    if lam == 0:
        return [0.0] + [-math.inf] * (u - 1), -math.inf
    log_a = math.log(lam) - math.log(mu)
    head = [m * log_a - math.lgamma(m + 1) for m in range(u)]
    tail = u * log_a - math.lgamma(u + 1) + math.log(u * mu) - math.log(u * mu - lam)
    return head, tail


def _log_idle(cfg: DisplayQueueConfig) -> float:
    head, tail = _log_terms(cfg)
    return -_logsumexp(head + [tail])


def idle_probability(cfg: DisplayQueueConfig) -> float:
    """Probability that no request is present at display ``cfg`` (``R_d(0)``)."""
    _require_stable(cfg)
    return math.exp(_log_idle(cfg))


def state_probability(cfg: DisplayQueueConfig, m: int) -> float:
    """Stationary probability of ``m`` requests in the display's system."""
    _require_stable(cfg)
    if m < 0:
        raise ValueError("m must be non-negative")
    lam, mu, u = cfg.arrival_rate, cfg.service_rate, cfg.reserved_channels
    if m == 0:
        return idle_probability(cfg)
    if lam == 0:
        return 0.0
    log_a = math.log(lam) - math.log(mu)
    if m <= u:
        log_term = m * log_a - math.lgamma(m + 1)
    else:
        log_term = m * log_a - math.lgamma(u + 1) - (m - u) * math.log(u)
    return math.exp(log_term + _log_idle(cfg))


def waiting_probability(cfg: DisplayQueueConfig) -> float:
    """Erlang-C probability that an arrival finds every channel busy (``R_c(d)``)."""
    _require_stable(cfg)
    _, tail = _log_terms(cfg)
    if tail == -math.inf:
        return 0.0
    return math.exp(tail + _log_idle(cfg))


def mean_wait(cfg: DisplayQueueConfig) -> float:
    """Mean time in queue, ``C / (U mu - lam)``."""
    return waiting_probability(cfg) / (cfg.capacity - cfg.arrival_rate)


def system_rejection_probability(sys: CloudSystemConfig, mode: EvaluationMode) -> float:
    mode = EvaluationMode(mode)
    waits = [waiting_probability(d) for d in sys.displays]
    lam = [d.arrival_rate for d in sys.displays]
    if mode is EvaluationMode.VERBATIM:
        carried = sum(l * (1.0 - w) for l, w in zip(lam, waits))
        return 1.0 - carried / sys.total_channels
    total = sum(lam)
    if total == 0:
        return 0.0
    return sum(l * w for l, w in zip(lam, waits)) / total


def link_utilization(sys: CloudSystemConfig, mode: EvaluationMode) -> float:
    mode = EvaluationMode(mode)
    rejection = system_rejection_probability(sys, mode)
    offered = sys.total_arrival_rate / sys.total_capacity
    if mode is EvaluationMode.VERBATIM:
        return 1.0 - (1.0 - rejection) * offered
    return min(1.0, max(0.0, (1.0 - rejection) * offered))


def split_rate(total: float, ratio: Sequence[float]) -> tuple[float, ...]:
    weight = float(sum(ratio))
    return tuple(total * r / weight for r in ratio)


def sweep_rates(
    sys_template: CloudSystemConfig,
    total_rates: Sequence[float],
    ratio: Sequence[float],
    mode: EvaluationMode = EvaluationMode.CORRECTED,
) -> list[SweepRow]:
    """Evaluate rejection and utilization over a range of total arrival rates.

    Each total is split across displays proportionally to ``ratio``; the
    channel counts and service rates come from ``sys_template``. Rows with
    an unstable display carry ``stable=False`` and no numbers.
    """
    mode = EvaluationMode(mode)
    if len(ratio) != sys_template.size:
        raise DimensionMismatch(f"ratio has {len(ratio)} entries for {sys_template.size} displays")
    if any(not r > 0 for r in ratio):
        raise InvalidConfig("ratio entries must be positive")
    rows = []
    for total in total_rates:
        rates = split_rate(total, ratio)
        sys = sys_template.with_rates(rates)
        if all(d.stable for d in sys.displays):
            rows.append(
                SweepRow(
                    float(total),
                    rates,
                    system_rejection_probability(sys, mode),
                    link_utilization(sys, mode),
                    mode,
                )
            )
        else:
            rows.append(SweepRow(float(total), rates, None, None, mode, stable=False))
    return rows
