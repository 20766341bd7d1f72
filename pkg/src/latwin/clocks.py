"""Vector clocks and the happen-before relation on events and local states.

Each of the ``n`` monitored processes produces a stream alternating events
and local states: event ``e_i`` begins state ``s_i``, and ``e_{i+1}`` ends it.
Clock components use count semantics: component ``k`` is the number of events
on process ``k`` known to have occurred, so the event beginning state ``s_i``
on process ``k`` carries ``clock[k] == i + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping


class ClockMismatchError(ValueError):
    """Raised when two clocks of different lengths are combined."""


class SameProcessError(ValueError):
    """Raised when a cross-process query is made for two states of one process."""


INTERNAL = "internal"
SEND = "send"
RECEIVE = "receive"
EVENT_KINDS = (INTERNAL, SEND, RECEIVE)


@dataclass(frozen=True, slots=True)
class VectorClock:
    """Fixed-length vector clock over a run with a known process count.

    Instances are immutable; combining clocks returns new instances.
    """

    components: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.components):
            raise ValueError(f"negative clock component in {self.components}")

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, k: int) -> int:
        return self.components[k]

    def merge(self, other: VectorClock) -> VectorClock:
        """Componentwise maximum of the two clocks.

        Raises:
            ClockMismatchError: if the clocks have different lengths.
        """
        a, b = self.components, other.components
        if len(a) != len(b):
            raise ClockMismatchError(f"clock lengths differ: {len(a)} vs {len(b)}")
        return VectorClock(tuple(max(x, y) for x, y in zip(a, b)))

    def dominates(self, other: VectorClock) -> bool:
        """True when every component of *other* is <= the matching one here."""
        if len(self.components) != len(other.components):
            raise ClockMismatchError("cannot compare clocks of different lengths")
        return all(x >= y for x, y in zip(self.components, other.components))

    def precedes(self, other: VectorClock) -> bool:
        """Strict componentwise order: ``self <= other`` and unequal."""
        return other.dominates(self) and self.components != other.components


def merge(a: VectorClock, b: VectorClock) -> VectorClock:
    """Componentwise maximum; see :meth:`VectorClock.merge`."""
    return a.merge(b)


@dataclass(frozen=True, slots=True)
class EventId:
    """Identity of one event: owning process, position in its stream, and kind.

    Process indices run from 0 to n-1; event indices on one process are
    gapless from 0.
    """

    process: int
    index: int
    kind: str = INTERNAL

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class LocalState:
    """One local state: the interval between consecutive events of a process.

    ``clock`` is the clock of the event that begins the state, hence
    ``clock[process] == index + 1``.  ``seq`` is the per-process delivery
    sequence number used for FIFO reassembly at the checker.  ``payload``
    maps local predicate names to their truth values over this state.
    """

    process: int
    index: int
    clock: VectorClock
    seq: int = -1
    payload: Mapping[str, bool] = field(default_factory=dict, compare=False)
    # Derived copy of clock.components; consistency checks are the hot path.
    counts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"negative state index {self.index}")
        if self.clock[self.process] != self.index + 1:
            raise ValueError(
                f"state s({self.process},{self.index}) carries clock "
                f"{self.clock.components}; component {self.process} must be "
                f"{self.index + 1}"
            )
        if self.seq < 0:
            object.__setattr__(self, "seq", self.index)
        object.__setattr__(self, "counts", self.clock.components)


def event_happens_before(
    a: tuple[EventId, VectorClock], b: tuple[EventId, VectorClock]
) -> bool:
    """Happen-before on events, decoded from their vector clocks.

    Same process: program order.  Distinct processes: ``a -> b`` iff b's
    clock has seen at least as many events of a's process as a's clock
    records, which is the standard clock characterisation of the relation.
    """
    aid, aclock = a
    bid, bclock = b
    if aid == bid:
        return False
    if aid.process == bid.process:
        return aid.index < bid.index
    return bclock[aid.process] >= aclock[aid.process]


def state_happens_before(s1: LocalState, s2: LocalState) -> bool:
    """True when s1's ending event happens before (or is) s2's beginning event.

    Same process: plain index order.  Cross-process: s1 ends with the
    (index+2)-th event of its process, so the order holds exactly when s2's
    beginning clock has counted that many events of s1's process.
    """
    if s1.process == s2.process:
        return s1.index < s2.index
    return s2.clock[s1.process] >= s1.index + 2


def concurrent(s1: LocalState, s2: LocalState) -> bool:
    """True when neither state happens before the other.

    Raises:
        SameProcessError: for two states of one process; they are totally
            ordered and callers must not ask.
    """
    if s1.process == s2.process:
        raise SameProcessError(
            f"states of process {s1.process} are never concurrent"
        )
    return not state_happens_before(s1, s2) and not state_happens_before(s2, s1)
