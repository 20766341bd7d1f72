"""Possibly/Definitely evaluation of conjunctive properties over a view.

A property names one local predicate per process; a CGS satisfies it when
every constituent state's predicate is true.  Possibly holds when some node
of the view satisfies the property.  Definitely holds when the view is
non-empty and every cover path from its minimum to its maximum passes through
a satisfying node (the endpoints count as path members).  Both verdicts
depend only on the view's node set and edges.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .engine import LatWinView
from .lattice import Vec


class UnknownPredicateError(LookupError):
    """Raised when a property references a predicate absent from payloads."""


class Modality(str, Enum):
    POSSIBLY = "possibly"
    DEFINITELY = "definitely"


@dataclass(frozen=True)
class Property:
    """A conjunction of per-process local predicates under one modality."""

    name: str
    locals: tuple[str, ...]
    modality: Modality

    @classmethod
    def conjunction(
        cls, n: int, predicate: str = "active", modality: Modality = Modality.DEFINITELY,
        name: str | None = None,
    ) -> "Property":
        return cls(
            name=name or f"{modality.value}({predicate}^{n})",
            locals=(predicate,) * n,
            modality=Modality(modality),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "Property":
        return cls(
            name=data["name"],
            locals=tuple(data["locals"]),
            modality=Modality(data["modality"]),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "locals": list(self.locals),
            "modality": self.modality.value,
        }


@dataclass(frozen=True)
class DetectionOutcome:
    """Verdict plus, for a holding Possibly, one satisfying index vector."""

    holds: bool
    witness: Vec | None = None


def eval_cgs(vec: Vec, prop: Property, view: LatWinView) -> bool:
    """Conjunction of the property's local predicates over one CGS."""
    for k, name in enumerate(prop.locals):
        payload = view.state_at(k, vec[k]).payload
        if name not in payload:
            raise UnknownPredicateError(
                f"predicate {name!r} missing from process {k} payloads"
            )
        if not payload[name]:
            return False
    return True


def _possibly(view: LatWinView, satisfies: Callable[[Vec], bool]) -> bool:
    """True iff some node satisfies."""
    return any(satisfies(vec) for vec in view.nodes)


def _definitely(view: LatWinView, satisfies: Callable[[Vec], bool]) -> bool:
    """True iff no min-to-max cover path uses only non-satisfying nodes."""
    if view.is_empty:
        return False
    if satisfies(view.c_min):
        return True
    if view.c_min == view.c_max:
        return False
    queue = deque([view.c_min])
    seen = {view.c_min}
    while queue:
        vec = queue.popleft()
        for succ in view.successors(vec):
            if succ in seen or satisfies(succ):
                continue
            if succ == view.c_max:
                return False
            seen.add(succ)
            queue.append(succ)
    return True


def detect(prop: Property, view: LatWinView) -> DetectionOutcome:
    """Evaluate the property over the view under its modality.

    An empty view never holds.  A witness is attached exactly when a
    Possibly property holds (the smallest satisfying vector).
    """
    if view.is_empty:
        return DetectionOutcome(holds=False)
    cache: dict[Vec, bool] = {}

    def sat(vec: Vec) -> bool:
        hit = cache.get(vec)
        if hit is None:
            hit = eval_cgs(vec, prop, view)
            cache[vec] = hit
        return hit

    if prop.modality is Modality.POSSIBLY:
        for vec in sorted(view.nodes):
            if sat(vec):
                return DetectionOutcome(holds=True, witness=vec)
        return DetectionOutcome(holds=False)
    return DetectionOutcome(holds=_definitely(view, sat))


def detect_negation(prop: Property, view: LatWinView) -> bool:
    """Definitely-verdict for the negated property (no satisfying node on
    some path becomes: every path crosses a node violating the conjunction).

    Used by episode monitors to decide that a detected property has surely
    stopped holding before re-arming.
    """
    if view.is_empty:
        return False
    cache: dict[Vec, bool] = {}

    def violates(vec: Vec) -> bool:
        hit = cache.get(vec)
        if hit is None:
            hit = not eval_cgs(vec, prop, view)
            cache[vec] = hit
        return hit

    return _definitely(view, violates)


def restrict_view(view: LatWinView, floor: Vec) -> LatWinView:
    """The sub-view of nodes dominating ``floor`` componentwise.

    The restriction of a meet/join-closed node set stays closed, so its
    anchors are the componentwise extremes of the surviving vectors.
    """
    if view.is_empty or all(
        f <= view.window_min_index(k) for k, f in enumerate(floor)
    ):
        return view
    kept: list[Vec] = []
    mins: list[int] | None = None
    maxs: list[int] | None = None
    for vec in view.nodes:
        ok = True
        for v, f in zip(vec, floor):
            if v < f:
                ok = False
                break
        if not ok:
            continue
        kept.append(vec)
        if mins is None:
            mins = list(vec)
            maxs = list(vec)
        else:
            for k, v in enumerate(vec):
                if v < mins[k]:
                    mins[k] = v
                if v > maxs[k]:
                    maxs[k] = v
    if not kept:
        return LatWinView(
            n=view.n, windows=view.windows, nodes=frozenset(), c_min=None, c_max=None
        )
    return LatWinView(
        n=view.n,
        windows=view.windows,
        nodes=frozenset(kept),
        c_min=tuple(mins),
        c_max=tuple(maxs),
    )
