"""Guarantee circles, directed motif census, matching and ranking.

Motifs are small weakly connected digraphs compared by an
isomorphism-invariant canonical code: the minimum, over all slot
permutations, of the adjacency bitmask. Census and matching use induced
subgraph semantics and count distinct node sets, so the same node set never
appears twice regardless of automorphisms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .errors import DisconnectedResult, SizeCapExceeded
from .graphcore import GuaranteeNetwork, Snapshot, defaulted_enterprises, simple_view

MAX_EDIT_NODES = 6
DEFAULT_MATCH_BUDGET = 10 ** 6
DEFAULT_CYCLE_BUDGET = 10 ** 5
DEFAULT_MAX_CYCLE_LEN = 8


def _slot_pairs(k):
    return [(i, j) for i in range(k) for j in range(k) if i != j]


def edges_to_code(k, edges):
    pairs = _slot_pairs(k)
    index = {p: b for b, p in enumerate(pairs)}
    code = 0
    for e in edges:
        code |= 1 << index[tuple(e)]
    return code


def code_to_edges(k, code):
    return frozenset(p for b, p in enumerate(_slot_pairs(k)) if code >> b & 1)


def _is_weakly_connected(k, edges):
    if k == 1:
        return True
    adj = {i: set() for i in range(k)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == k


@lru_cache(maxsize=None)
def _perm_codes(k):
    """For each permutation, the bit-source index per bit position."""
    pairs = _slot_pairs(k)
    index = {p: b for b, p in enumerate(pairs)}
    perms = []
    for perm in itertools.permutations(range(k)):
        perms.append(tuple(index[(perm[i], perm[j])] for (i, j) in pairs))
    return perms


@lru_cache(maxsize=None)
def _canonical_code_cached(k, code):
    best = code
    for mapping in _perm_codes(k):
        permuted = 0
        for dst_bit, src_bit in enumerate(mapping):
            if code >> dst_bit & 1:
                permuted |= 1 << src_bit
        if permuted < best:
            best = permuted
    return best


@dataclass(frozen=True)
class Motif:
    k: int
    edges: frozenset  # (guarantor_slot, borrower_slot) pairs

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loops not allowed in motifs")
            if not (0 <= i < self.k and 0 <= j < self.k):
                raise ValueError("edge slot out of range")
        if not _is_weakly_connected(self.k, self.edges):
            raise DisconnectedResult("motif must be weakly connected")

    @property
    def code(self) -> int:
        return edges_to_code(self.k, self.edges)

    @property
    def canonical_code(self) -> int:
        return _canonical_code_cached(self.k, self.code)

    def canonical(self) -> "Motif":
        return Motif(self.k, code_to_edges(self.k, self.canonical_code))

    def as_dict(self):
        return {
            "k": self.k,
            "edges": sorted([i, j] for i, j in self.edges),
            "canonical_code": self.canonical_code,
        }

    @classmethod
    def from_edges(cls, edges):
        edges = [tuple(e) for e in edges]
        k = max(max(i, j) for i, j in edges) + 1
        return cls(k=k, edges=frozenset(edges))


def enumerate_motif_classes(k: int):
    """All weakly connected digraph isomorphism classes on k nodes (3..5)."""
    if k not in (3, 4, 5):
        raise ValueError("k must be in 3..5")
    if k <= 4:
        reps = []
        for code in range(1 << (k * (k - 1))):
            if _canonical_code_cached(k, code) == code:
                edges = code_to_edges(k, code)
                if _is_weakly_connected(k, edges):
                    reps.append(Motif(k, edges))
        return reps
    return _enumerate_k5()


def _enumerate_k5():
    """Vectorized canonicalization of all 2^20 digraphs on 5 nodes."""
    k = 5
    nbits = k * (k - 1)
    codes = np.arange(1 << nbits, dtype=np.int64)
    bits = [(codes >> b) & 1 for b in range(nbits)]
    best = codes.copy()
    for mapping in _perm_codes(k):
        permuted = np.zeros_like(codes)
        for dst_bit, src_bit in enumerate(mapping):
            permuted |= bits[dst_bit] << src_bit
        np.minimum(best, permuted, out=best)
    reps = np.nonzero(best == codes)[0]
    out = []
    for code in reps:
        edges = code_to_edges(k, int(code))
        if _is_weakly_connected(k, edges):
            out.append(Motif(k, edges))
    return out


# ---------------------------------------------------------------------------
# Guarantee circles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleSet:
    mutual: tuple  # 2-cycles, each a node tuple starting at the smallest id
    revolving: tuple  # simple cycles length >= 3
    stars: tuple  # (center, sorted borrower tuple)
    joint_liability: tuple  # (borrower, sorted guarantor tuple)
    truncated: bool = False


def _simple_cycles(successors, nodes, max_len, budget):
    """Every directed simple cycle of length <= max_len, each reported once.

    Rotation-normalized by exploring only from the cycle's smallest node.
    """
    cycles = []
    truncated = False
    for s in nodes:
        if truncated:
            break
        path = [s]
        on_path = {s}

        def dfs(v):
            nonlocal truncated
            if truncated:
                return
            for u in sorted(successors.get(v, ())):
                if u == s and len(path) >= 2:
                    cycles.append(tuple(path))
                    if len(cycles) >= budget:
                        truncated = True
                        return
                elif u > s and u not in on_path and len(path) < max_len:
                    path.append(u)
                    on_path.add(u)
                    dfs(u)
                    path.pop()
                    on_path.remove(u)

        dfs(s)
    return cycles, truncated


def detect_circles(snap: Snapshot, max_cycle_len: int = DEFAULT_MAX_CYCLE_LEN,
                   budget: int = DEFAULT_CYCLE_BUDGET) -> CircleSet:
    """Classic circle patterns: mutual / revolving / star / joint liability."""
    if max_cycle_len < 2:
        raise ValueError("max_cycle_len must be >= 2")
    g = simple_view(snap, "directed")
    successors = {}
    borrowers_of = {}
    guarantors_of = {}
    for (u, v) in g.weights:
        successors.setdefault(u, set()).add(v)
        borrowers_of.setdefault(u, set()).add(v)
        guarantors_of.setdefault(v, set()).add(u)
    cycles, truncated = _simple_cycles(successors, list(g.nodes), max_cycle_len, budget)
    mutual = tuple(c for c in cycles if len(c) == 2)
    revolving = tuple(c for c in cycles if len(c) >= 3)
    stars = tuple(
        (center, tuple(sorted(bs)))
        for center, bs in sorted(borrowers_of.items())
        if len(bs) >= 3
    )
    joint = tuple(
        (borrower, tuple(sorted(gs)))
        for borrower, gs in sorted(guarantors_of.items())
        if len(gs) >= 2
    )
    return CircleSet(mutual=mutual, revolving=revolving, stars=stars,
                     joint_liability=joint, truncated=truncated)


# ---------------------------------------------------------------------------
# Census and matching
# ---------------------------------------------------------------------------

def _directed_pairs(snap):
    return set(simple_view(snap, "directed").weights)


def _induced_code(node_tuple, directed_pairs):
    k = len(node_tuple)
    idx = {n: i for i, n in enumerate(node_tuple)}
    edges = []
    for a, b in itertools.permutations(node_tuple, 2):
        if (a, b) in directed_pairs:
            edges.append((idx[a], idx[b]))
    return _canonical_code_cached(k, edges_to_code(k, edges))


def _connected_k_subsets(adj, k, budget, tick=None):
    """ESU enumeration of weakly connected k-node subsets, each exactly once.

    ``tick(done, total)`` is called once per root node; returning False stops
    the enumeration early with the truncated flag set (cooperative cancel).
    """
    nodes = sorted(adj)
    order = {n: i for i, n in enumerate(nodes)}
    results = []
    truncated = False

    def extend(sub, ext, v_rank):
        nonlocal truncated
        if truncated:
            return
        if len(sub) == k:
            results.append(tuple(sorted(sub)))
            if len(results) >= budget:
                truncated = True
            return
        ext = sorted(ext)
        while ext and not truncated:
            w = ext.pop(0)
            neighborhood = set().union(*(adj[u] for u in sub)) | set(sub)
            new_ext = set(ext) | {
                u for u in adj[w]
                if order[u] > v_rank and u not in neighborhood
            }
            extend(sub + [w], new_ext, v_rank)

    for i, v in enumerate(nodes):
        if truncated:
            break
        if tick is not None and not tick(i, len(nodes)):
            truncated = True
            break
        extend([v], {u for u in adj[v] if order[u] > order[v]}, order[v])
    if tick is not None and not truncated:
        tick(len(nodes), len(nodes))
    return results, truncated


@dataclass(frozen=True)
class CensusResult:
    k: int
    counts: dict  # canonical code -> occurrence count
    truncated: bool = False

    def classes(self):
        return [Motif(self.k, code_to_edges(self.k, code)) for code in sorted(self.counts)]


@dataclass(frozen=True)
class MatchResult:
    motif: Motif
    embeddings: tuple  # sorted node tuples, each node set once
    truncated: bool = False


def motif_census(snap: Snapshot, k: int, budget: int = DEFAULT_MATCH_BUDGET,
                 tick=None) -> CensusResult:
    """Counts of induced weakly connected k-node sub-digraph classes."""
    if k not in (3, 4, 5):
        raise ValueError("census k must be in 3..5")
    und = simple_view(snap, "undirected").adjacency()
    pairs = _directed_pairs(snap)
    subsets, truncated = _connected_k_subsets(
        {n: set(vs) for n, vs in und.items()}, k, budget, tick
    )
    counts = {}
    for nodes in subsets:
        code = _induced_code(nodes, pairs)
        counts[code] = counts.get(code, 0) + 1
    return CensusResult(k=k, counts=counts, truncated=truncated)


def match_motif(snap: Snapshot, motif: Motif, budget: int = DEFAULT_MATCH_BUDGET,
                tick=None) -> MatchResult:
    """All node sets whose induced sub-digraph is isomorphic to the motif."""
    target = motif.canonical_code
    und = simple_view(snap, "undirected").adjacency()
    pairs = _directed_pairs(snap)
    if len(und) < motif.k:
        return MatchResult(motif=motif, embeddings=(), truncated=False)
    subsets, truncated = _connected_k_subsets(
        {n: set(vs) for n, vs in und.items()}, motif.k, budget, tick
    )
    hits = tuple(nodes for nodes in subsets if _induced_code(nodes, pairs) == target)
    return MatchResult(motif=motif, embeddings=hits, truncated=truncated)


# ---------------------------------------------------------------------------
# Reports and ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotifReport:
    motif: Motif
    instance_count: int
    covered_firms: tuple
    default_firms: tuple
    priority: float  # default firms / covered firms, in [0,1]
    total_loan_amount: float
    total_default_amount: float
    ratio_default_amount: Optional[float]

    def as_row(self):
        return {
            "canonical_code": self.motif.canonical_code,
            "k": self.motif.k,
            "instances": self.instance_count,
            "firms": len(self.covered_firms),
            "default_firms": len(self.default_firms),
            "ratio_default_firms_pct": round(self.priority * 100),
            "ratio_default_amount_pct": (
                round(self.ratio_default_amount * 100)
                if self.ratio_default_amount is not None else None
            ),
            "total_loan_amount": round(self.total_loan_amount, 2),
            "total_default_amount": round(self.total_default_amount, 2),
        }


def motif_report(motif: Motif, embeddings: Iterable, network: GuaranteeNetwork) -> MotifReport:
    """Table-style statistics over the deduplicated union of covered firms."""
    covered = sorted(set().union(*map(set, embeddings)) if embeddings else set())
    defaulted = defaulted_enterprises(network)
    default_firms = sorted(n for n in covered if n in defaulted)
    covered_set = set(covered)
    default_by_contract = {}
    for r in network.repayments:
        if r.default_flag:
            c = network.contracts.get(r.contract_id)
            if c is not None:
                amt = dict(c.installments).get(r.due_date, 0.0)
                default_by_contract[r.contract_id] = default_by_contract.get(r.contract_id, 0.0) + amt
    loan_total = 0.0
    default_total = 0.0
    for c in network.contracts.values():
        if c.borrower_id in covered_set:
            loan_total += c.loan_amount
            default_total += default_by_contract.get(c.contract_id, 0.0)
    return MotifReport(
        motif=motif,
        instance_count=len(tuple(embeddings)),
        covered_firms=tuple(covered),
        default_firms=tuple(default_firms),
        priority=(len(default_firms) / len(covered)) if covered else 0.0,
        total_loan_amount=loan_total,
        total_default_amount=default_total,
        ratio_default_amount=(default_total / loan_total) if loan_total > 0 else None,
    )


def rank_motifs(reports) -> list:
    """Descending by priority, then default-amount ratio, then canonical code."""
    return sorted(
        reports,
        key=lambda r: (
            -r.priority,
            -(r.ratio_default_amount if r.ratio_default_amount is not None else -1.0),
            r.motif.canonical_code,
        ),
    )


# ---------------------------------------------------------------------------
# Interactive editing
# ---------------------------------------------------------------------------

def edit_motif(motif: Motif, edit: tuple) -> Motif:
    """Apply one edit and re-canonicalize.

    ``edit`` is (op, (u, v)) with op in add_node | add_edge | remove_edge.
    For add_node the pair must reference the fresh slot ``motif.k``.
    """
    op, (u, v) = edit
    edges = set(motif.edges)
    if op == "add_node":
        if motif.k + 1 > MAX_EDIT_NODES:
            raise SizeCapExceeded(f"motifs are capped at {MAX_EDIT_NODES} nodes")
        if motif.k not in (u, v):
            raise ValueError(f"add_node edge must touch new slot {motif.k}")
        edges.add((u, v))
        return Motif(k=motif.k + 1, edges=frozenset(edges)).canonical()
    if op == "add_edge":
        edges.add((u, v))
        return Motif(k=motif.k, edges=frozenset(edges)).canonical()
    if op == "remove_edge":
        if (u, v) not in edges:
            raise ValueError(f"edge {(u, v)} not in motif")
        edges.remove((u, v))
        return Motif(k=motif.k, edges=frozenset(edges)).canonical()
    raise ValueError(f"unknown edit op {op!r}")
