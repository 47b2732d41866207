"""Support digraph, closed classes, absorbing sets and decomposability witnesses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CertificateError, DimensionMismatch
from .kernel import StateSet, StochasticKernel

#: mass tolerance for "P(x, A) = 1"
ABSORB_TOL = 1e-12

Digraph = tuple[tuple[int, ...], ...]


def support_digraph(P: StochasticKernel) -> Digraph:
    """Successor lists: ``i -> j`` iff ``P[i, j] > 0`` in the stored matrix."""
    return tuple(tuple(int(j) for j in np.flatnonzero(row > 0)) for row in P.matrix)


def strongly_connected_components(graph: Digraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative; components come out in reverse topological order."""
    n = len(graph)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            succ = graph[v]
            while pos < len(succ):
                w = succ[pos]
                pos += 1
                if index[w] == -1:
                    work.append((v, pos))
                    work.append((w, 0))
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    components.append(sorted(comp))
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
    return components


@dataclass(frozen=True)
class ClassDecomposition:
    """All communicating classes, sorted by smallest member, with closedness flags."""

    classes: tuple[StateSet, ...]
    closed_flags: tuple[bool, ...]
    transient_states: StateSet

    @property
    def closed_classes(self) -> list[StateSet]:
        return [c for c, closed in zip(self.classes, self.closed_flags) if closed]

    def to_json(self) -> dict:
        return {
            "classes": [c.indices for c in self.classes],
            "closed": list(self.closed_flags),
            "closed_classes": [c.indices for c in self.closed_classes],
            "transient": self.transient_states.indices,
        }


def class_decomposition(P: StochasticKernel) -> ClassDecomposition:
    graph = support_digraph(P)
    comps = sorted(strongly_connected_components(graph), key=lambda c: c[0])
    owner = np.empty(P.n, dtype=int)
    for k, comp in enumerate(comps):
        owner[comp] = k
    flags = []
    for k, comp in enumerate(comps):
        flags.append(all(owner[j] == k for i in comp for j in graph[i]))
    transient = StateSet.of(P.n, (i for comp, f in zip(comps, flags) if not f for i in comp))
    return ClassDecomposition(
        classes=tuple(StateSet.of(P.n, c) for c in comps),
        closed_flags=tuple(flags),
        transient_states=transient,
    )


def _mass_inside(P: StochasticKernel, A: StateSet) -> np.ndarray:
    return P.matrix[:, A.mask].sum(axis=1)


def is_absorbing(P: StochasticKernel, A: StateSet) -> bool:
    """``P(x, A) >= 1 - ABSORB_TOL`` for every ``x`` in ``A`` (vacuous for the empty set)."""
    if A.n != P.n:
        raise DimensionMismatch(f"set over {A.n} states, kernel over {P.n}")
    if not len(A):
        return True
    return bool(np.all(_mass_inside(P, A)[A.mask] >= 1.0 - ABSORB_TOL))


def largest_absorbing_subset(P: StochasticKernel, A: StateSet) -> StateSet:
    """Greatest absorbing subset of ``A``.

    Repeatedly drops states that leak mass out of the current set, starting
    from ``A`` itself.  The result contains every absorbing subset of ``A``
    and may be empty.
    """
    if A.n != P.n:
        raise DimensionMismatch(f"set over {A.n} states, kernel over {P.n}")
    current = A.mask.copy()
    for _ in range(P.n + 1):
        inside = P.matrix[:, current].sum(axis=1)
        keep = current & (inside >= 1.0 - ABSORB_TOL)
        if np.array_equal(keep, current):
            break
        current = keep
    return StateSet.from_mask(current)


@dataclass(frozen=True)
class IndecomposabilityCertificate:
    indecomposable: bool
    witness: tuple[StateSet, StateSet] | None
    decomposition: ClassDecomposition

    @property
    def verdict(self) -> str:
        return "indecomposable" if self.indecomposable else "decomposable"

    def verify(self, P: StochasticKernel) -> None:
        closed = class_decomposition(P).closed_classes
        if self.indecomposable:
            if self.witness is not None or len(closed) != 1:
                raise CertificateError("indecomposable verdict with witness or several closed classes")
            return
        if self.witness is None:
            raise CertificateError("decomposable verdict without witness")
        A, B = self.witness
        if not len(A) or not len(B):
            raise CertificateError("witness set is empty")
        if not A.isdisjoint(B):
            raise CertificateError("witness sets intersect")
        if not (is_absorbing(P, A) and is_absorbing(P, B)):
            raise CertificateError("witness set is not absorbing")

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": None
            if self.witness is None
            else {"A": self.witness[0].indices, "B": self.witness[1].indices},
            "closed_classes": [c.indices for c in self.decomposition.closed_classes],
            "transient": self.decomposition.transient_states.indices,
        }

    @classmethod
    def from_json(cls, obj: dict, n: int) -> IndecomposabilityCertificate:
        witness = obj.get("witness")
        closed = [StateSet.of(n, c) for c in obj["closed_classes"]]
        transient = StateSet.of(n, obj["transient"])
        decomposition = ClassDecomposition(tuple(closed), (True,) * len(closed), transient)
        return cls(
            indecomposable=obj["verdict"] == "indecomposable",
            witness=None if witness is None else (StateSet.of(n, witness["A"]), StateSet.of(n, witness["B"])),
            decomposition=decomposition,
        )


def indecomposability_certificate(P: StochasticKernel) -> IndecomposabilityCertificate:
    """Decide indecomposability; on failure return two disjoint closed classes.

    On a finite space two disjoint nonempty absorbing sets exist iff there are
    at least two closed classes.  The witness is the pair of closed classes
    with the smallest minimal states.
    """
    dec = class_decomposition(P)
    closed = dec.closed_classes
    if len(closed) == 1:
        cert = IndecomposabilityCertificate(True, None, dec)
    else:
        cert = IndecomposabilityCertificate(False, (closed[0], closed[1]), dec)
    cert.verify(P)
    return cert


def theorem_witness_pair(P: StochasticKernel, A: StateSet) -> tuple[StateSet, StateSet]:
    """Largest absorbing subsets of ``A`` and of its complement."""
    return largest_absorbing_subset(P, A), largest_absorbing_subset(P, A.complement())


def reachability(P: StochasticKernel) -> np.ndarray:
    """Boolean ``R[x, y]``: ``y`` reachable from ``x`` in zero or more steps."""
    graph = support_digraph(P)
    out = np.zeros((P.n, P.n), dtype=bool)
    for x in range(P.n):
        seen = out[x]
        seen[x] = True
        frontier = [x]
        while frontier:
            v = frontier.pop()
            for w in graph[v]:
                if not seen[w]:
                    seen[w] = True
                    frontier.append(w)
    return out
