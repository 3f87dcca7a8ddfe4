"""Default-propagation analysis.

Defaults travel from a borrower to its guarantors, i.e. against the stored
guarantor->borrower edge direction. Path enumeration is simple-path with
length and count caps and a deterministic lexicographic exploration order, so
truncation is reproducible. Cut sets are per-session overlays; the underlying
snapshot is never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import UnknownEdge, UnknownNode
from .graphcore import Snapshot, simple_view

DEFAULT_MAX_LEN = 8
DEFAULT_MAX_PATHS = 10 ** 5


@dataclass(frozen=True)
class PropagationResult:
    seed: str
    paths: tuple  # node sequences, each starting at the seed
    truncated: bool
    occurrences: dict  # node -> number of paths containing it
    importance: dict  # node -> occurrence / max occurrence, in (0, 1]


@dataclass(frozen=True)
class SankeyFlow:
    focus: str
    nodes: tuple
    links: tuple  # (source, target, value), value = guarantee amount
    provided: dict  # node -> total amount guaranteed to others
    received: dict  # node -> total amount received as borrower


def _guarantors_map(snap: Snapshot, removed_edges=frozenset()):
    """borrower -> {guarantor: summed amount}, honoring a cut overlay."""
    out = {}
    for e in snap.edges:
        if (e.guarantor_id, e.borrower_id) in removed_edges:
            continue
        out.setdefault(e.borrower_id, {})
        out[e.borrower_id][e.guarantor_id] = (
            out[e.borrower_id].get(e.guarantor_id, 0.0) + e.guarantee_amount
        )
    return out


def contagion_set(snap: Snapshot, seed: str, removed_edges=frozenset()) -> frozenset:
    """Nodes reachable from the seed by repeated borrower->guarantor hops."""
    if seed not in snap.nodes:
        raise UnknownNode(f"{seed} not in snapshot")
    guarantors = _guarantors_map(snap, removed_edges)
    seen = {seed}
    stack = [seed]
    while stack:
        v = stack.pop()
        for g in guarantors.get(v, ()):
            if g not in seen:
                seen.add(g)
                stack.append(g)
    return frozenset(seen - {seed})


def enumerate_paths(snap: Snapshot, seed: str, max_len: int = DEFAULT_MAX_LEN,
                    max_paths: int = DEFAULT_MAX_PATHS,
                    removed_edges=frozenset()) -> PropagationResult:
    """All maximal simple reverse-direction paths from the seed, up to caps.

    ``max_len`` bounds the number of hops; a path is recorded when it cannot
    be extended (dead end, revisit, or length cap).
    """
    if seed not in snap.nodes:
        raise UnknownNode(f"{seed} not in snapshot")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    guarantors = _guarantors_map(snap, removed_edges)
    paths = []
    truncated = False

    def dfs(path, on_path):
        nonlocal truncated
        if truncated:
            return
        v = path[-1]
        nexts = [g for g in sorted(guarantors.get(v, ())) if g not in on_path]
        if not nexts or len(path) > max_len:
            if len(path) > 1:
                paths.append(tuple(path))
                if len(paths) >= max_paths:
                    truncated = True
            return
        for g in nexts:
            path.append(g)
            on_path.add(g)
            dfs(path, on_path)
            path.pop()
            on_path.remove(g)
            if truncated:
                return

    dfs([seed], {seed})
    occurrences = {}
    for p in paths:
        for n in p:
            occurrences[n] = occurrences.get(n, 0) + 1
    peak = max(occurrences.values()) if occurrences else 1
    importance = {n: c / peak for n, c in occurrences.items()}
    return PropagationResult(seed=seed, paths=tuple(paths), truncated=truncated,
                             occurrences=occurrences, importance=importance)


def propagation_importance(snap: Snapshot, max_len: int = DEFAULT_MAX_LEN,
                           max_paths: int = DEFAULT_MAX_PATHS,
                           removed_edges=frozenset()):
    """Global importance: occurrences aggregated over paths from every seed.

    Returns (importance map, raw occurrence map, truncated flag).
    """
    occurrences = {}
    truncated = False
    for seed in sorted(snap.nodes):
        res = enumerate_paths(snap, seed, max_len, max_paths, removed_edges)
        truncated = truncated or res.truncated
        for n, c in res.occurrences.items():
            occurrences[n] = occurrences.get(n, 0) + c
    peak = max(occurrences.values()) if occurrences else 1
    return {n: c / peak for n, c in occurrences.items()}, occurrences, truncated


def sankey_flow(snap: Snapshot, focus: str, max_len: int = DEFAULT_MAX_LEN,
                max_paths: int = DEFAULT_MAX_PATHS,
                removed_edges=frozenset()) -> SankeyFlow:
    """Guarantee flows over the focus node's propagation subgraph."""
    result = enumerate_paths(snap, focus, max_len, max_paths, removed_edges)
    nodes = {focus}
    hops = set()
    for p in result.paths:
        nodes.update(p)
        for borrower, guarantor in zip(p, p[1:]):
            hops.add((guarantor, borrower))  # restore guarantor->borrower direction
    collapsed = simple_view(snap, "directed").weights
    links = tuple(
        (g, b, collapsed[(g, b)])
        for (g, b) in sorted(hops)
        if (g, b) in collapsed and (g, b) not in removed_edges
    )
    provided, received = {}, {}
    for g, b, v in links:
        provided[g] = provided.get(g, 0.0) + v
        received[b] = received.get(b, 0.0) + v
    return SankeyFlow(focus=focus, nodes=tuple(sorted(nodes)), links=links,
                      provided=provided, received=received)


@dataclass
class CutSession:
    """Per-session cut overlay; cuts never touch the underlying snapshot."""
    snapshot: Snapshot
    session_id: str = "local"
    removed_edges: set = field(default_factory=set)  # (guarantor, borrower) pairs

    def _check_edge(self, edge):
        g, b = edge
        if not any(e.guarantor_id == g and e.borrower_id == b for e in self.snapshot.edges):
            raise UnknownEdge(f"no edge {g}->{b} in snapshot")

    def apply_cut(self, edge) -> None:
        self._check_edge(tuple(edge))
        self.removed_edges.add(tuple(edge))

    def revert_cut(self, edge) -> None:
        edge = tuple(edge)
        if edge not in self.removed_edges:
            raise UnknownEdge(f"edge {edge} is not cut")
        self.removed_edges.remove(edge)

    def enumerate_paths(self, seed, max_len=DEFAULT_MAX_LEN, max_paths=DEFAULT_MAX_PATHS):
        return enumerate_paths(self.snapshot, seed, max_len, max_paths,
                               frozenset(self.removed_edges))

    def contagion_set(self, seed):
        return contagion_set(self.snapshot, seed, frozenset(self.removed_edges))

    def sankey_flow(self, focus, max_len=DEFAULT_MAX_LEN, max_paths=DEFAULT_MAX_PATHS):
        return sankey_flow(self.snapshot, focus, max_len, max_paths,
                           frozenset(self.removed_edges))
