"""Circuit-switch schedule: a cyclic sequence of matchings with a fixed
transmission phase (day) and a reconfiguration gap (night)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CircuitSchedule:
    """matchings[k] maps each node index to its peer during day k (a node
    mapped to itself is disconnected that day). The schedule repeats with
    period len(matchings) * (day + night)."""

    matchings: tuple
    day: float
    night: float

    def __post_init__(self) -> None:
        if not self.matchings:
            raise ValueError("schedule needs at least one matching")
        if self.day <= 0 or self.night < 0:
            raise ValueError("day must be positive, night non-negative")

    @property
    def slot(self) -> float:
        return self.day + self.night

    @property
    def period(self) -> float:
        return len(self.matchings) * self.slot

    def day_bounds(self, k: int) -> tuple[float, float]:
        """Absolute (start, end) of the k-th day since t=0."""
        start = k * self.slot
        return start, start + self.day

    def matching_index(self, k: int) -> int:
        return k % len(self.matchings)


def circuit_step(schedule: CircuitSchedule, now: float):
    """Active matching at `now`, or None during a reconfiguration night.

    Pure function of the timestamp, so every component sees one consistent
    phase without shared state.
    """
    if now < 0:
        return None
    offset = now % schedule.slot
    if offset >= schedule.day:
        return None
    k = int(now // schedule.slot)
    return schedule.matchings[schedule.matching_index(k)]


def ring_pair_schedule(n: int, day: float, night: float) -> CircuitSchedule:
    """One bidirectional pair per day, cycling over all node pairs of a
    small ring: day k connects (k, k+1 mod n)."""
    matchings = []
    for k in range(n):
        a, b = k, (k + 1) % n
        m = {i: i for i in range(n)}
        m[a], m[b] = b, a
        matchings.append(m)
    return CircuitSchedule(matchings=tuple(matchings), day=day, night=night)
