"""Global states, the consistency test, and the full CGS lattice oracle.

A global state picks one local state per process.  It is consistent (a CGS)
when its constituents are pairwise concurrent, i.e. no constituent happened
before another.  The set of all CGSs of a run, ordered by coordinatewise
index dominance, forms a distributive lattice; ``build_full_lattice``
materialises it by brute force and is meant for oracle checks and desk-scale
baselines, not for online use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .clocks import LocalState, state_happens_before

if TYPE_CHECKING:
    from .trace import Trace

Vec = tuple[int, ...]


class TraceGapError(ValueError):
    """Raised when a stream has missing or out-of-order state indices."""


class LatticeTooLargeError(RuntimeError):
    """Raised when a brute-force enumeration would exceed its cell budget."""


@dataclass(frozen=True, slots=True)
class GlobalState:
    """A vector of local states, one per process, in process order."""

    states: tuple[LocalState, ...]

    def __post_init__(self) -> None:
        for k, s in enumerate(self.states):
            if s.process != k:
                raise ValueError(
                    f"state of process {s.process} placed at coordinate {k}"
                )

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def index_vector(self) -> Vec:
        return tuple(s.index for s in self.states)

    def __getitem__(self, k: int) -> LocalState:
        return self.states[k]


def pairwise_concurrent(states: Sequence[LocalState]) -> bool:
    """Consistency test on a sequence of per-process states.

    Quadratic in the process count; each ordered pair is resolved with one
    integer comparison on the clocks (state q saw p's ending event iff its
    beginning clock counts at least index+2 events of p).
    """
    n = len(states)
    for p in range(n):
        bound = states[p].index + 2
        for q in range(n):
            if p != q and states[q].counts[p] >= bound:
                return False
    return True


def is_consistent(gs: GlobalState) -> bool:
    """True when the global state's constituents are pairwise concurrent."""
    return pairwise_concurrent(gs.states)


def precede(c1: GlobalState, c2: GlobalState) -> bool:
    """True when c2 advances c1 by exactly one state on exactly one process."""
    advanced = 0
    for s1, s2 in zip(c1.states, c2.states):
        d = s2.index - s1.index
        if d == 0:
            continue
        if d != 1:
            return False
        advanced += 1
    return advanced == 1


def meet(c1: GlobalState, c2: GlobalState) -> GlobalState:
    """Coordinatewise index minimum; consistent whenever both inputs are."""
    return GlobalState(
        tuple(a if a.index <= b.index else b for a, b in zip(c1.states, c2.states))
    )


def join(c1: GlobalState, c2: GlobalState) -> GlobalState:
    """Coordinatewise index maximum; consistent whenever both inputs are."""
    return GlobalState(
        tuple(a if a.index >= b.index else b for a, b in zip(c1.states, c2.states))
    )


class CgsNode:
    """A CGS in a maintained lattice, with doubly-linked cover adjacency.

    ``vec`` is the index vector and acts as the node identity; ``preds`` and
    ``succs`` hold the nodes one state below/above along single coordinates.
    Adjacency sets are absent when the owning structure derives edges from
    membership instead of storing them.
    """

    __slots__ = ("vec", "states", "preds", "succs", "_hash")

    def __init__(
        self,
        states: tuple[LocalState, ...],
        store_edges: bool = True,
        vec: Vec | None = None,
    ):
        self.states = states
        self.vec: Vec = vec if vec is not None else tuple(s.index for s in states)
        self.preds: set[CgsNode] | None = set() if store_edges else None
        self.succs: set[CgsNode] | None = set() if store_edges else None
        self._hash = hash(self.vec)

    @property
    def gs(self) -> GlobalState:
        return GlobalState(self.states)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CgsNode):
            return NotImplemented
        return self.vec == other.vec

    def __repr__(self) -> str:
        return f"CgsNode{self.vec}"


def _as_streams(source: "Trace | Sequence[Sequence[LocalState]]") -> list[list[LocalState]]:
    streams_fn = getattr(source, "streams", None)
    streams = streams_fn() if callable(streams_fn) else [list(s) for s in source]
    for k, stream in enumerate(streams):
        for i, s in enumerate(stream):
            if s.process != k or s.index != i:
                raise TraceGapError(
                    f"stream {k} has state ({s.process},{s.index}) at slot {i}; "
                    "indices must be gapless from 0"
                )
    return streams


def concurrency_matrix(
    stream_a: Sequence[LocalState], stream_b: Sequence[LocalState]
) -> np.ndarray:
    """Boolean matrix M[i, j] = states a_i and b_j are concurrent.

    Streams must belong to two distinct processes and be gapless from 0.
    """
    if not stream_a or not stream_b:
        return np.zeros((len(stream_a), len(stream_b)), dtype=bool)
    p = stream_a[0].process
    q = stream_b[0].process
    # b_j.clock[p] >= i + 2  <=>  a_i -> b_j
    b_saw_a = np.array([s.clock[p] for s in stream_b], dtype=np.int64)
    a_saw_b = np.array([s.clock[q] for s in stream_a], dtype=np.int64)
    ia = np.arange(len(stream_a), dtype=np.int64)
    ib = np.arange(len(stream_b), dtype=np.int64)
    a_before_b = b_saw_a[None, :] >= (ia[:, None] + 2)
    b_before_a = a_saw_b[:, None] >= (ib[None, :] + 2)
    return ~a_before_b & ~b_before_a


def enumerate_consistent_vecs(
    streams: Sequence[Sequence[LocalState]], cell_budget: int = 200_000_000
) -> np.ndarray:
    """All consistent index vectors over the given per-process streams.

    Returns an (N, n) int array in lexicographic order.  Enumerates the full
    Cartesian product with vectorised pairwise masks, so it is exact but only
    fit for desk-scale inputs.

    Raises:
        LatticeTooLargeError: if the product grid exceeds ``cell_budget``.
    """
    n = len(streams)
    shape = tuple(len(s) for s in streams)
    if any(d == 0 for d in shape):
        return np.zeros((0, n), dtype=np.int64)
    if n == 1:
        return np.arange(shape[0], dtype=np.int64).reshape(-1, 1)
    cells = 1
    for d in shape:
        cells *= d
    if cells > cell_budget:
        raise LatticeTooLargeError(
            f"product grid has {cells} cells; budget is {cell_budget}"
        )
    mask = np.ones(shape, dtype=bool)
    for p in range(n):
        for q in range(p + 1, n):
            m = concurrency_matrix(streams[p], streams[q])
            dims = [1] * n
            dims[p] = shape[p]
            dims[q] = shape[q]
            mask &= m.reshape(dims)
    return np.argwhere(mask).astype(np.int64)


@dataclass
class FullLattice:
    """The complete CGS lattice of a run, built by exhaustive enumeration."""

    n: int
    nodes: dict[Vec, CgsNode] = field(default_factory=dict)
    initial: CgsNode | None = None
    final: CgsNode | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)

    def vec_array(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array(sorted(self.nodes), dtype=np.int64)

    def edges(self) -> set[tuple[Vec, Vec]]:
        out: set[tuple[Vec, Vec]] = set()
        for vec, node in self.nodes.items():
            assert node.succs is not None
            for succ in node.succs:
                out.add((vec, succ.vec))
        return out

    def to_json_dict(self) -> dict:
        """Plain-data form (nodes as index vectors, edges as vector pairs)."""
        return {
            "n": self.n,
            "nodes": [list(v) for v in sorted(self.nodes)],
            "edges": sorted(
                [list(a), list(b)] for a, b in self.edges()
            ),
        }


def build_full_lattice(source: "Trace | Sequence[Sequence[LocalState]]") -> FullLattice:
    """Materialise the full CGS lattice of a complete run.

    ``source`` is a trace or per-process state lists; indices must be gapless
    from 0 (a gap raises :class:`TraceGapError`).  Output is a pure function
    of the streams, independent of any arrival order.
    """
    streams = _as_streams(source)
    n = len(streams)
    lat = FullLattice(n=n)
    vecs = enumerate_consistent_vecs(streams)
    for row in vecs:
        vec = tuple(int(i) for i in row)
        states = tuple(streams[k][vec[k]] for k in range(n))
        lat.nodes[vec] = CgsNode(states)
    for vec, node in lat.nodes.items():
        for k in range(n):
            up = vec[:k] + (vec[k] + 1,) + vec[k + 1 :]
            succ = lat.nodes.get(up)
            if succ is not None:
                node.succs.add(succ)
                succ.preds.add(node)
    if lat.nodes:
        arr = lat.vec_array()
        lat.initial = lat.nodes[tuple(int(i) for i in arr.min(axis=0))]
        lat.final = lat.nodes[tuple(int(i) for i in arr.max(axis=0))]
    return lat


def is_convex_sublattice(
    sub: Iterable[Vec | CgsNode], full: FullLattice
) -> bool:
    """True when ``sub`` is closed under the full lattice's meet/join and
    contains every full-lattice CGS lying between two of its members."""
    vecs = {s.vec if isinstance(s, CgsNode) else tuple(s) for s in sub}
    if not vecs:
        return True
    if not vecs <= full.nodes.keys():
        return False
    members = sorted(vecs)
    for i, a in enumerate(members):
        for b in members[i + 1 :]:
            lo = tuple(map(min, a, b))
            hi = tuple(map(max, a, b))
            if lo not in vecs or hi not in vecs:
                return False
    # Closure grants a unique bottom/top, so convexity reduces to the box
    # between them: every full-lattice node inside it must be a member.
    arr = np.array(members, dtype=np.int64)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    full_arr = full.vec_array()
    inside = ((full_arr >= lo) & (full_arr <= hi)).all(axis=1)
    for row in full_arr[inside]:
        if tuple(int(i) for i in row) not in vecs:
            return False
    return True
