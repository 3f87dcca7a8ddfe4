"""Centrality battery, default-rate histograms and the rolling-risk heatmap.

Seven measures per snapshot: HITS hub/authority and PageRank on the directed
simple view; k-shell, eigenvector, betweenness and closeness on the
symmetrized view. All exact; no sampling approximations.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceFailure
from .graphcore import Snapshot, simple_view

POWER_TOL = 1e-10
POWER_CAP = 10_000
PAGERANK_DAMPING = 0.85

METRIC_KINDS = ("hub", "authority", "pagerank", "kshell", "eigenvector", "betweenness", "closeness")


@dataclass(frozen=True)
class NodeMetrics:
    hub: float
    authority: float
    pagerank: float
    kshell: int
    eigenvector: float
    betweenness: float
    closeness: float

    def get(self, kind):
        return getattr(self, kind)


@dataclass(frozen=True)
class MetricHistogram:
    kind: str
    bin_edges: tuple  # length bins + 1
    counts: tuple
    default_counts: tuple
    rates: tuple  # None where the bin is empty


@dataclass(frozen=True)
class HeatmapGrid:
    rows: tuple  # enterprise ids, sorted
    columns: tuple  # window end dates, sorted
    cells: dict  # (enterprise, window_end) -> probability


def _directed_adjacency_matrix(graph, nodes):
    idx = {n: i for i, n in enumerate(nodes)}
    a = np.zeros((len(nodes), len(nodes)))
    for (u, v) in graph.weights:
        a[idx[u], idx[v]] = 1.0
    return a


def _pagerank(a, tol=POWER_TOL, cap=POWER_CAP, damping=PAGERANK_DAMPING):
    n = a.shape[0]
    out_deg = a.sum(axis=1)
    # row-stochastic transition; dangling rows spread uniformly
    p = np.where(out_deg[:, None] > 0, a / np.maximum(out_deg, 1)[:, None], 1.0 / n)
    x = np.full(n, 1.0 / n)
    for _ in range(cap):
        nxt = damping * (x @ p) + (1 - damping) / n
        if np.abs(nxt - x).sum() < tol:
            return nxt / nxt.sum()
        x = nxt
    raise ConvergenceFailure("pagerank")


def _top_eigenspace_projection(m):
    """Limit of power iteration on a symmetric PSD matrix from a uniform start.

    Exact eigendecomposition sidesteps the slow convergence of iterating when
    the top eigenvalues nearly coincide; the uniform-start projection keeps
    the tie-breaking of the iterative definition (symmetric nodes score equally).
    """
    n = m.shape[0]
    w, v = np.linalg.eigh(m)
    lam = w[-1]
    if lam <= 0:
        raise ConvergenceFailure("no positive dominant eigenvalue")
    top = v[:, w >= lam - 1e-9 * max(1.0, lam)]
    x = top @ (top.T @ np.full(n, 1.0 / np.sqrt(n)))
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        x = np.abs(top[:, -1])
        norm = np.linalg.norm(x)
    x = np.maximum(x / norm, 0.0)
    return x / np.linalg.norm(x)


def _hits(a):
    n = a.shape[0]
    if a.sum() == 0:
        return np.zeros(n), np.zeros(n)
    hub = _top_eigenspace_projection(a @ a.T)
    auth = a.T @ hub
    norm = np.linalg.norm(auth)
    if norm > 0:
        auth /= norm
    hub = a @ auth
    norm = np.linalg.norm(hub)
    if norm > 0:
        hub /= norm
    return hub, auth


def _eigenvector(sym):
    n = sym.shape[0]
    if sym.sum() == 0:
        return np.zeros(n)
    # +I shift keeps the spectrum positive on bipartite components
    return _top_eigenspace_projection(sym + np.eye(n))


def _core_numbers(adj):
    """K-shell via repeated minimum-degree removal on the undirected view."""
    degree = {v: len(ns) for v, ns in adj.items()}
    neighbors = {v: set(ns) for v, ns in adj.items()}
    core = {}
    k = 0
    remaining = set(degree)
    while remaining:
        v = min(remaining, key=lambda u: (degree[u], u))
        k = max(k, degree[v])
        core[v] = k
        remaining.remove(v)
        for u in neighbors[v]:
            if u in remaining:
                degree[u] -= 1
                neighbors[u].discard(v)
    return core


def _bfs(adj, source):
    dist = {source: 0}
    q = deque([source])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def _betweenness(adj, nodes):
    """Brandes' accumulation on the unweighted undirected view."""
    bc = {v: 0.0 for v in nodes}
    for s in nodes:
        stack = []
        preds = {v: [] for v in nodes}
        sigma = {v: 0.0 for v in nodes}
        dist = {v: -1 for v in nodes}
        sigma[s], dist[s] = 1.0, 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for u in adj[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    q.append(u)
                if dist[u] == dist[v] + 1:
                    sigma[u] += sigma[v]
                    preds[u].append(v)
        delta = {v: 0.0 for v in nodes}
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1 + delta[w])
            if w != s:
                bc[w] += delta[w]
        # undirected: each pair counted from both endpoints
    n = len(nodes)
    scale = (n - 1) * (n - 2) if n > 2 else 1.0
    return {v: bc[v] / scale for v in nodes}


def _harmonic_closeness(adj, nodes):
    n = len(nodes)
    out = {}
    for v in nodes:
        dist = _bfs(adj, v)
        total = sum(1.0 / d for u, d in dist.items() if u != v)
        out[v] = total / (n - 1) if n > 1 else 0.0
    return out


def compute_centralities(snap: Snapshot) -> dict:
    """All seven measures for every node of the snapshot."""
    if not snap.nodes:
        return {}
    directed = simple_view(snap, "directed")
    undirected = simple_view(snap, "undirected")
    nodes = directed.nodes

    a = _directed_adjacency_matrix(directed, nodes)
    pr = _pagerank(a)
    hub, auth = _hits(a)
    sym = np.zeros_like(a)
    idx = {n: i for i, n in enumerate(nodes)}
    for (u, v) in undirected.weights:
        sym[idx[u], idx[v]] = sym[idx[v], idx[u]] = 1.0
    eig = _eigenvector(sym)

    adj = undirected.adjacency()
    core = _core_numbers(adj)
    bc = _betweenness(adj, nodes)
    cl = _harmonic_closeness(adj, nodes)

    return {
        n: NodeMetrics(
            hub=float(hub[idx[n]]),
            authority=float(auth[idx[n]]),
            pagerank=float(pr[idx[n]]),
            kshell=int(core[n]),
            eigenvector=float(eig[idx[n]]),
            betweenness=float(bc[n]),
            closeness=float(cl[n]),
        )
        for n in nodes
    }


def default_rate_histogram(metrics: dict, default_flags, kind: str, bin_count: int = 10) -> MetricHistogram:
    """Equal-width bins over the observed metric range with per-bin default rates."""
    if kind not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {kind!r}")
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    values = {n: m.get(kind) for n, m in metrics.items()}
    if not values:
        return MetricHistogram(kind, (), (), (), ())
    lo, hi = min(values.values()), max(values.values())
    width = (hi - lo) / bin_count
    counts = [0] * bin_count
    dcounts = [0] * bin_count
    for n, v in values.items():
        if width == 0:
            b = 0
        else:
            b = min(int((v - lo) / width), bin_count - 1)
        counts[b] += 1
        if n in default_flags:
            dcounts[b] += 1
    edges = tuple(lo + i * width for i in range(bin_count + 1))
    rates = tuple((d / c) if c else None for c, d in zip(counts, dcounts))
    return MetricHistogram(kind, edges, tuple(counts), tuple(dcounts), rates)


def assemble_heatmap(rolling_predictions) -> HeatmapGrid:
    """Grid of (enterprise, window end) -> predicted default probability.

    ``rolling_predictions`` is an iterable of (enterprise, window_end, prob);
    an (enterprise, window) pair with no active loan simply has no entry.
    """
    cells = {}
    for ent, window_end, prob in rolling_predictions:
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"probability out of range: {prob}")
        cells[(ent, window_end)] = prob
    rows = tuple(sorted({e for e, _ in cells}))
    cols = tuple(sorted({w for _, w in cells}))
    return HeatmapGrid(rows=rows, columns=cols, cells=cells)


def export_metrics_csv(metrics: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node"] + list(METRIC_KINDS))
        for n in sorted(metrics):
            m = metrics[n]
            writer.writerow([n] + [m.get(k) for k in METRIC_KINDS])
