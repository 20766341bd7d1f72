"""Online maintenance of the windowed CGS lattice.

The checker consumes one state at a time.  Each arrival slides that process's
window, then the lattice grows with the consistent combinations that contain
the new state and prunes the ones anchored on the evicted state:

* a non-empty lattice can only grow when the newest state directly extends
  the current maximum; the candidate obtained by advancing the maximum along
  the arriving process must itself be consistent, otherwise no in-window CGS
  contains the new state at all;
* an empty lattice regrows from any consistent combination of the new state
  with peer states that touches some window lower bound;
* growth spreads recursively to every in-window CGS neighbouring a new one;
* pruning is needed exactly when the minimum's coordinate on the arriving
  process went stale; it walks successor edges from the minimum, deleting the
  stale column and re-anchoring the minimum on the surviving side.

Both anchors always touch a window bound while the lattice is non-empty, and
the node set equals the full lattice filtered to the window after every
advance; the oracle suite checks this exhaustively.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Sequence, TextIO

from .clocks import LocalState, VectorClock
from .lattice import CgsNode, Vec, pairwise_concurrent


class NodeBudgetExceeded(RuntimeError):
    """Raised when lattice growth would exceed the configured node budget."""


class ReorderQueue:
    """Per-process FIFO reassembly: releases the maximal gapless seq prefix."""

    __slots__ = ("process", "next_expected", "buffered", "duplicates")

    def __init__(self, process: int):
        self.process = process
        self.next_expected = 0
        self.buffered: dict[int, LocalState] = {}
        self.duplicates = 0

    def offer(self, state: LocalState) -> list[LocalState]:
        """Buffer one state; return the run now deliverable, in seq order.

        Duplicate or already-delivered seq numbers are dropped and counted;
        the transport contract says they indicate a harness bug upstream.
        """
        if state.seq < self.next_expected or state.seq in self.buffered:
            self.duplicates += 1
            return []
        self.buffered[state.seq] = state
        out: list[LocalState] = []
        while self.next_expected in self.buffered:
            out.append(self.buffered.pop(self.next_expected))
            self.next_expected += 1
        return out


class WindowBuffer:
    """Sliding buffer of the most recent local states of one process.

    Holds at most ``capacity`` states with contiguous ascending indices;
    ``capacity`` None means unbounded (the full-stream baseline).
    """

    __slots__ = ("process", "capacity", "_states")

    def __init__(self, process: int, capacity: int | None):
        if capacity is not None and capacity < 1:
            raise ValueError(f"window capacity must be >= 1, got {capacity}")
        self.process = process
        self.capacity = capacity
        self._states: list[LocalState] = []

    def __len__(self) -> int:
        return len(self._states)

    def __iter__(self) -> Iterator[LocalState]:
        return iter(self._states)

    @property
    def min_index(self) -> int:
        return self._states[0].index

    @property
    def max_index(self) -> int:
        return self._states[-1].index

    def contains_index(self, index: int) -> bool:
        return bool(self._states) and self._states[0].index <= index <= self._states[-1].index

    def state_at(self, index: int) -> LocalState:
        return self._states[index - self._states[0].index]

    def push(self, state: LocalState) -> LocalState | None:
        """Append a state, returning the evicted oldest one if full."""
        if self._states and state.index != self._states[-1].index + 1:
            raise ValueError(
                f"window {self.process} got index {state.index} after "
                f"{self._states[-1].index}; delivery must be gapless"
            )
        self._states.append(state)
        if self.capacity is not None and len(self._states) > self.capacity:
            return self._states.pop(0)
        return None


@dataclass
class EngineStats:
    """Running counters; the work counters back the per-advance cost bounds."""

    advances: int = 0
    duplicates: int = 0
    max_nodes: int = 0
    total_added: int = 0
    total_removed: int = 0
    last_grow_candidates: int = 0
    max_grow_candidates: int = 0
    last_pruned: int = 0
    max_pruned: int = 0


@dataclass(frozen=True)
class UpdateReport:
    """Outcome of one advance: what was added/removed and the new anchors."""

    process: int
    index: int
    added: tuple[Vec, ...]
    removed: tuple[Vec, ...]
    c_min: Vec | None
    c_max: Vec | None
    node_count: int
    grow_candidates: int

    def to_json_dict(self) -> dict:
        return {
            "process": self.process,
            "index": self.index,
            "added": [list(v) for v in self.added],
            "removed": [list(v) for v in self.removed],
            "c_min": list(self.c_min) if self.c_min else None,
            "c_max": list(self.c_max) if self.c_max else None,
            "nodes": self.node_count,
            "grow_candidates": self.grow_candidates,
        }


@dataclass(frozen=True)
class LatWinView:
    """Immutable point-in-time snapshot of the engine.

    ``nodes`` holds index vectors; constituent states are looked up through
    the captured window contents.  Cover edges are derivable from the node
    set, since an edge links vectors differing by one on a single coordinate.
    """

    n: int
    windows: tuple[tuple[LocalState, ...], ...]
    nodes: frozenset[Vec]
    c_min: Vec | None
    c_max: Vec | None
    _succ_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def state_at(self, process: int, index: int) -> LocalState:
        window = self.windows[process]
        return window[index - window[0].index]

    def states_of(self, vec: Vec) -> tuple[LocalState, ...]:
        return tuple(self.state_at(k, i) for k, i in enumerate(vec))

    def window_min_index(self, process: int) -> int:
        return self.windows[process][0].index

    def window_max_index(self, process: int) -> int:
        return self.windows[process][-1].index

    def edges(self) -> set[tuple[Vec, Vec]]:
        out: set[tuple[Vec, Vec]] = set()
        for vec in self.nodes:
            for k in range(self.n):
                up = vec[:k] + (vec[k] + 1,) + vec[k + 1 :]
                if up in self.nodes:
                    out.add((vec, up))
        return out

    def successors(self, vec: Vec) -> list[Vec]:
        out = self._succ_cache.get(vec)
        if out is None:
            out = []
            for k in range(self.n):
                up = vec[:k] + (vec[k] + 1,) + vec[k + 1 :]
                if up in self.nodes:
                    out.append(up)
            self._succ_cache[vec] = out
        return out

    def predecessors(self, vec: Vec) -> list[Vec]:
        out = []
        for k in range(self.n):
            if vec[k] == 0:
                continue
            down = vec[:k] + (vec[k] - 1,) + vec[k + 1 :]
            if down in self.nodes:
                out.append(down)
        return out


class LatWinEngine:
    """Single-writer maintainer of the windowed CGS lattice.

    All advances must happen on one logical thread; snapshots are immutable
    and may be shared freely.  ``window_size`` may be one uniform capacity, a
    per-process sequence, or None for the unbounded full-lattice baseline.
    ``prune_first`` flips the grow/prune order inside an advance (the two
    commute; the flag exists so tests can prove it).  ``store_edges=False``
    skips cover-edge bookkeeping and derives neighbours from membership,
    which the unbounded baseline uses to keep nodes lean.
    """

    def __init__(
        self,
        n: int,
        window_size: int | Sequence[int] | None,
        *,
        prune_first: bool = False,
        store_edges: bool = True,
        node_budget: int | None = None,
        seed_pick: str = "first",
    ):
        if n < 1:
            raise ValueError("need at least one process")
        if isinstance(window_size, int) or window_size is None:
            capacities = [window_size] * n
        else:
            capacities = list(window_size)
            if len(capacities) != n:
                raise ValueError("one window capacity per process required")
        if seed_pick not in ("first", "last"):
            raise ValueError("seed_pick must be 'first' or 'last'")
        self.n = n
        self.windows = [WindowBuffer(k, capacities[k]) for k in range(n)]
        self.queues = [ReorderQueue(k) for k in range(n)]
        self.nodes: dict[Vec, CgsNode] = {}
        self.c_min: CgsNode | None = None
        self.c_max: CgsNode | None = None
        self.stats = EngineStats()
        self._prune_first = prune_first
        self._store_edges = store_edges
        self._node_budget = node_budget
        self._seed_pick = seed_pick
        self._memo: dict[Vec, bool] = {}

    # -- ingestion ---------------------------------------------------------

    def on_receive(self, state: LocalState) -> list[LocalState]:
        """Buffer an arrival; return the states now deliverable in order."""
        self._check_state(state)
        queue = self.queues[state.process]
        before = queue.duplicates
        out = queue.offer(state)
        self.stats.duplicates += queue.duplicates - before
        return out

    def receive(self, state: LocalState) -> list[UpdateReport]:
        """Convenience: buffer, then advance through every deliverable state."""
        return [self.advance(s) for s in self.on_receive(state)]

    def advance(self, state: LocalState) -> UpdateReport:
        """Slide the window with one in-order state and update the lattice."""
        self._check_state(state)
        k = state.process
        self.windows[k].push(state)
        self._memo = {}
        if self._prune_first:
            removed = self._prune(k)
            added = self._grow(state)
        else:
            added = self._grow(state)
            removed = self._prune(k)
        st = self.stats
        st.advances += 1
        st.total_added += len(added)
        st.total_removed += len(removed)
        st.last_grow_candidates = len(self._memo)
        st.max_grow_candidates = max(st.max_grow_candidates, len(self._memo))
        st.last_pruned = len(removed)
        st.max_pruned = max(st.max_pruned, len(removed))
        st.max_nodes = max(st.max_nodes, len(self.nodes))
        return UpdateReport(
            process=k,
            index=state.index,
            added=tuple(sorted(n.vec for n in added)),
            removed=tuple(sorted(n.vec for n in removed)),
            c_min=self.c_min.vec if self.c_min else None,
            c_max=self.c_max.vec if self.c_max else None,
            node_count=len(self.nodes),
            grow_candidates=len(self._memo),
        )

    def snapshot(self) -> LatWinView:
        """Immutable copy of windows, node set and anchors."""
        return LatWinView(
            n=self.n,
            windows=tuple(tuple(w) for w in self.windows),
            nodes=frozenset(self.nodes),
            c_min=self.c_min.vec if self.c_min else None,
            c_max=self.c_max.vec if self.c_max else None,
        )

    def _check_state(self, state: LocalState) -> None:
        if not 0 <= state.process < self.n:
            raise ValueError(f"state process {state.process} out of range")
        if len(state.clock) != self.n:
            raise ValueError(
                f"state clock has {len(state.clock)} components, engine has {self.n}"
            )

    # -- growing -----------------------------------------------------------

    def _candidate_ok(self, vec: Vec) -> tuple[LocalState, ...] | bool:
        """Memoized consistency check; truthy result carries the states."""
        cached = self._memo.get(vec)
        if cached is None:
            states = tuple(self.windows[j].state_at(vec[j]) for j in range(self.n))
            cached = states if pairwise_concurrent(states) else False
            self._memo[vec] = cached
        return cached

    def _grow(self, state: LocalState) -> list[CgsNode]:
        k = state.process
        added: list[CgsNode] = []
        if not self.nodes:
            seed = self._empty_seed(state)
            if seed is not None:
                self._grow_from(seed, k, state.index, added, was_empty=True)
        else:
            cmax = self.c_max
            if cmax.vec[k] == state.index - 1:
                gvec = cmax.vec[:k] + (state.index,) + cmax.vec[k + 1 :]
                if self._candidate_ok(gvec):
                    self._grow_from(gvec, k, state.index, added, was_empty=False)
        return added

    def _empty_seed(self, state: LocalState) -> Vec | None:
        """A consistent combination of the new state with peer states that
        touches some peer window's lower bound; None when none exists."""
        k = state.process
        if self.n == 1:
            vec = (state.index,)
            return vec if self._candidate_ok(vec) else None
        peers = [j for j in range(self.n) if j != k]
        if any(len(self.windows[j]) == 0 for j in peers):
            return None
        mins = {j: self.windows[j].min_index for j in peers}
        ranges = [range(self.windows[j].min_index, self.windows[j].max_index + 1) for j in peers]
        found: Vec | None = None
        for combo in product(*ranges):
            if not any(idx == mins[j] for j, idx in zip(peers, combo)):
                continue
            vec = list(combo)
            vec.insert(k, state.index)
            vec_t = tuple(vec)
            if self._candidate_ok(vec_t):
                if self._seed_pick == "first":
                    return vec_t
                found = vec_t
        return found

    def _grow_from(
        self, seed: Vec, k: int, new_index: int, added: list[CgsNode], *, was_empty: bool
    ) -> None:
        """Add the seed and, transitively, every in-window CGS adjacent to a
        new one.  All reachable new CGSs carry the new state on coordinate k,
        so recursion is confined to that slab; other neighbours either exist
        already (and only need linking) or are inconsistent."""
        n = self.n
        nodes = self.nodes
        memo = self._memo
        budget = self._node_budget
        store_edges = self._store_edges
        los = [w.min_index for w in self.windows]
        his = [w.max_index for w in self.windows]
        rows = [w._states for w in self.windows]
        stack = [seed]
        scheduled = {seed}
        while stack:
            vec = stack.pop()
            if vec in nodes:
                continue
            if budget is not None and len(nodes) >= budget:
                raise NodeBudgetExceeded(
                    f"node budget {self._node_budget} exceeded while growing"
                )
            states = memo.get(vec)
            if not states:
                states = tuple(rows[j][vec[j] - los[j]] for j in range(n))
            node = CgsNode(states, store_edges=store_edges, vec=vec)
            nodes[vec] = node
            added.append(node)
            has_pred = False
            has_succ = False
            for j in range(n):
                vj = vec[j]
                down = vec[:j] + (vj - 1,) + vec[j + 1 :]
                neighbor = nodes.get(down)
                if neighbor is not None:
                    # May sit just below the window when w == 1: the stale
                    # column is linked anyway so pruning can walk off it.
                    has_pred = True
                    if store_edges:
                        neighbor.succs.add(node)
                        node.preds.add(neighbor)
                elif j != k and vj - 1 >= los[j]:
                    # Slab candidate: coordinate k still holds the new state.
                    hit = memo.get(down)
                    if hit is None:
                        sts = tuple(rows[m][down[m] - los[m]] for m in range(n))
                        hit = sts if pairwise_concurrent(sts) else False
                        memo[down] = hit
                    if hit:
                        has_pred = True
                        if down not in scheduled:
                            scheduled.add(down)
                            stack.append(down)
                up = vec[:j] + (vj + 1,) + vec[j + 1 :]
                neighbor = nodes.get(up)
                if neighbor is not None:
                    has_succ = True
                    if store_edges:
                        node.succs.add(neighbor)
                        neighbor.preds.add(node)
                elif j != k and vj + 1 <= his[j]:
                    hit = memo.get(up)
                    if hit is None:
                        sts = tuple(rows[m][up[m] - los[m]] for m in range(n))
                        hit = sts if pairwise_concurrent(sts) else False
                        memo[up] = hit
                    if hit:
                        has_succ = True
                        if up not in scheduled:
                            scheduled.add(up)
                            stack.append(up)
            # The new maximum always sits among the added nodes; the minimum
            # moves only when the lattice was empty before this growth.
            if was_empty and not has_pred:
                self.c_min = node
            if not has_succ:
                self.c_max = node

    def _link(self, lower: CgsNode, upper: CgsNode) -> None:
        if self._store_edges:
            lower.succs.add(upper)
            upper.preds.add(lower)

    # -- pruning -----------------------------------------------------------

    def _succs_of(self, node: CgsNode) -> list[CgsNode]:
        if node.succs is not None:
            return list(node.succs)
        out = []
        for j in range(self.n):
            up = node.vec[:j] + (node.vec[j] + 1,) + node.vec[j + 1 :]
            succ = self.nodes.get(up)
            if succ is not None:
                out.append(succ)
        return out

    def _has_other_pred(self, node: CgsNode, exclude: CgsNode) -> bool:
        if node.preds is not None:
            return any(p is not exclude for p in node.preds)
        for j in range(self.n):
            down = node.vec[:j] + (node.vec[j] - 1,) + node.vec[j + 1 :]
            pred = self.nodes.get(down)
            if pred is not None and pred is not exclude:
                return True
        return False

    def _unlink(self, lower: CgsNode, upper: CgsNode) -> None:
        if lower.succs is not None:
            lower.succs.discard(upper)
        if upper.preds is not None:
            upper.preds.discard(lower)

    def _prune(self, k: int) -> list[CgsNode]:
        """Remove every node whose coordinate k went stale, walking successor
        edges from the minimum; re-anchor the minimum on the first survivor
        left with no predecessors."""
        if not self.nodes:
            return []
        wmin = self.windows[k].min_index
        stale = self.c_min.vec[k]
        if stale >= wmin:
            return []
        removed: list[CgsNode] = []
        if self.c_max.vec[k] == stale:
            # Every node holds the stale state; the lattice empties.
            removed = list(self.nodes.values())
            self.nodes.clear()
            self.c_min = None
            self.c_max = None
            return removed
        queue: deque[CgsNode] = deque([self.c_min])
        seen = {self.c_min.vec}
        while queue:
            node = queue.popleft()
            for succ in self._succs_of(node):
                self._unlink(node, succ)
                if succ.vec[k] == stale:
                    if succ.vec not in seen:
                        seen.add(succ.vec)
                        queue.append(succ)
                elif not self._has_other_pred(succ, exclude=node):
                    self.c_min = succ
            del self.nodes[node.vec]
            removed.append(node)
        return removed


# -- replay wire format ----------------------------------------------------


def state_to_record(state: LocalState, true_time_begin: float | None = None) -> dict:
    record = {
        "process": state.process,
        "index": state.index,
        "seq": state.seq,
        "clock": list(state.clock.components),
        "payload": dict(state.payload),
    }
    if true_time_begin is not None:
        record["true_time_begin"] = true_time_begin
    return record


def record_to_state(record: dict) -> LocalState:
    return LocalState(
        process=record["process"],
        index=record["index"],
        clock=VectorClock(tuple(record["clock"])),
        seq=record["seq"],
        payload={str(k): bool(v) for k, v in record.get("payload", {}).items()},
    )


def read_delivery_jsonl(fp: TextIO) -> Iterator[LocalState]:
    """States from a JSON-lines replay file, in file (delivery) order."""
    for line_no, line in enumerate(fp, 1):
        line = line.strip()
        if not line:
            continue
        try:
            yield record_to_state(json.loads(line))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"bad replay record on line {line_no}: {exc}") from exc


def write_report_jsonl(reports: Iterable[UpdateReport], fp: TextIO) -> None:
    for report in reports:
        fp.write(json.dumps(report.to_json_dict(), sort_keys=True))
        fp.write("\n")
