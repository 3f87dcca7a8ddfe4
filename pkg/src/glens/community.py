"""Community detection and interactive editing for guarantee networks.

Detection is agglomerative short-random-walk clustering: nodes whose t-step
walk distributions look alike are merged bottom-up, and the dendrogram is cut
at maximum modularity. Edits (merge / reassign / split) are versioned and
replayable; spanners are the boundary nodes the edit semantics pivot on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import NotACut, NotAdjacent, NotASpanner, NotNeighbours
from .graphcore import GuaranteeNetwork, Snapshot, defaulted_enterprises, simple_view

DEFAULT_WALK_STEPS = 4
TREEMAP_FLOOR_FRACTION = 0.02

RADAR_AXES = ("defaults", "la_rc", "deposit_loss", "sector_concentration", "ga_rc", "credit_rating")


@dataclass(frozen=True)
class Partition:
    labels: dict  # node -> int community label
    revision: int = 0
    history: tuple = ()  # operation records, replayable

    def members(self, label):
        return sorted(n for n, l in self.labels.items() if l == label)

    def communities(self):
        out = {}
        for n, l in self.labels.items():
            out.setdefault(l, []).append(n)
        return {l: sorted(ns) for l, ns in out.items()}

    def check_valid(self, snap: Snapshot):
        assert set(self.labels) == set(snap.nodes), "partition must cover snapshot nodes"


@dataclass(frozen=True)
class CommunityStats:
    label: int
    firms: int
    default_firms: int
    ratio_default_firms: Optional[float]
    ratio_default_amount: Optional[float]
    spanners: int
    neighbour_communities: int
    total_loan_amount: float
    total_default_amount: float


@dataclass(frozen=True)
class RadarProfile:
    label: int
    raw: dict  # axis -> raw value
    normalized: dict  # axis -> [0,1]
    warnings: tuple = ()


@dataclass(frozen=True)
class TreemapLayout:
    # label -> (x, y, w, h) in the unit square
    rects: dict
    size_measure: str


def round_percent(x: float) -> int:
    """Half-up rounding to whole percent, as displayed in reports."""
    return int(math.floor(x * 100 + 0.5))


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

def _components(adj):
    seen = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def _modularity(adj, labels, m):
    if m == 0:
        return 0.0
    intra = 0
    deg_sum = {}
    for v, ns in adj.items():
        deg_sum[labels[v]] = deg_sum.get(labels[v], 0) + len(ns)
        for u in ns:
            if u > v and labels[u] == labels[v]:
                intra += 1
    q = 0.0
    for l, d in deg_sum.items():
        e_l = sum(1 for v, ns in adj.items() if labels[v] == l
                  for u in ns if u > v and labels[u] == l)
        q += e_l / m - (d / (2 * m)) ** 2
    return q


def _cluster_component(comp, adj, walk_steps):
    """Walk-distance agglomeration of one connected component.

    Returns a list of communities (each a sorted node list) at the
    modularity-maximal cut. Deterministic: merge ties resolved by the
    smallest community ids involved.
    """
    n = len(comp)
    if n == 1:
        return [list(comp)]
    idx = {v: i for i, v in enumerate(comp)}
    a = np.zeros((n, n))
    for v in comp:
        for u in adj[v]:
            a[idx[v], idx[u]] = 1.0
    deg = a.sum(axis=1)
    p = a / deg[:, None]
    pt = np.linalg.matrix_power(p, walk_steps)
    inv_d = 1.0 / deg  # distance metric weights

    # community state: id -> (member index list, mean walk row)
    comms = {i: [i] for i in range(n)}
    rows = {i: pt[i].copy() for i in range(n)}
    adj_comm = {i: set() for i in range(n)}
    for v in comp:
        for u in adj[v]:
            if idx[u] != idx[v]:
                adj_comm[idx[v]].add(idx[u])

    def delta(c1, c2):
        d2 = float(np.sum(inv_d * (rows[c1] - rows[c2]) ** 2))
        s1, s2 = len(comms[c1]), len(comms[c2])
        return s1 * s2 / (s1 + s2) / n * d2

    m_edges = int(a.sum() / 2)
    comp_adj = {v: adj[v] for v in comp}
    labels = {comp[i]: c for c, mem in comms.items() for i in mem}
    best_q = _modularity(comp_adj, labels, m_edges)
    best_partition = {c: list(mem) for c, mem in comms.items()}

    while len(comms) > 1:
        candidates = []
        for c1 in sorted(comms):
            for c2 in sorted(adj_comm[c1]):
                if c2 > c1:
                    candidates.append((delta(c1, c2), c1, c2))
        if not candidates:
            break
        _, c1, c2 = min(candidates)
        s1, s2 = len(comms[c1]), len(comms[c2])
        rows[c1] = (s1 * rows[c1] + s2 * rows[c2]) / (s1 + s2)
        comms[c1] = sorted(comms[c1] + comms[c2])
        adj_comm[c1] = (adj_comm[c1] | adj_comm[c2]) - {c1, c2}
        for other in adj_comm[c2]:
            if other != c1:
                adj_comm[other].discard(c2)
                adj_comm[other].add(c1)
        del comms[c2], rows[c2], adj_comm[c2]
        labels = {comp[i]: c for c, mem in comms.items() for i in mem}
        q = _modularity(comp_adj, labels, m_edges)
        if q > best_q + 1e-12:
            best_q = q
            best_partition = {c: list(mem) for c, mem in comms.items()}

    return [sorted(comp[i] for i in mem) for _, mem in sorted(best_partition.items())]


def detect_communities(snap: Snapshot, walk_steps: int = DEFAULT_WALK_STEPS) -> Partition:
    if walk_steps < 1:
        raise ValueError("walk_steps must be >= 1")
    adj = {n: vs for n, vs in simple_view(snap, "undirected").adjacency().items()}
    groups = []
    for comp in _components(adj):
        groups.extend(_cluster_component(comp, adj, walk_steps))
    # stable labels: number groups by their smallest member id
    groups.sort(key=lambda g: g[0])
    labels = {}
    for i, g in enumerate(groups, start=1):
        for v in g:
            labels[v] = i
    return Partition(labels=labels, revision=0, history=())


# ---------------------------------------------------------------------------
# Stats and spanners
# ---------------------------------------------------------------------------

def _cross_edges(partition, snap):
    """Undirected label-crossing node pairs from the snapshot's simple view."""
    pairs = set()
    for (u, v) in simple_view(snap, "undirected").weights:
        if partition.labels[u] != partition.labels[v]:
            pairs.add((u, v))
    return pairs


def find_spanners(partition: Partition, snap: Snapshot) -> dict:
    """Boundary nodes: node -> sorted list of adjacent foreign community labels."""
    out = {}
    for (u, v) in _cross_edges(partition, snap):
        out.setdefault(u, set()).add(partition.labels[v])
        out.setdefault(v, set()).add(partition.labels[u])
    return {n: sorted(ls) for n, ls in out.items()}


def community_stats(partition: Partition, snap: Snapshot, network: GuaranteeNetwork) -> dict:
    """Per-community Table-style statistics: label -> CommunityStats."""
    defaulted = defaulted_enterprises(network)
    spanners = find_spanners(partition, snap)
    default_amount_by_contract = {}
    for r in network.repayments:
        if r.default_flag:
            c = network.contracts.get(r.contract_id)
            if c is not None:
                plan = dict(c.installments)
                amt = plan.get(r.due_date, 0.0)
                default_amount_by_contract[r.contract_id] = (
                    default_amount_by_contract.get(r.contract_id, 0.0) + amt
                )

    stats = {}
    for label, members in partition.communities().items():
        member_set = set(members)
        firms = len(members)
        dfirms = sum(1 for n in members if n in defaulted)
        loan_total = 0.0
        default_total = 0.0
        for c in network.contracts.values():
            if c.borrower_id in member_set:
                loan_total += c.loan_amount
                default_total += default_amount_by_contract.get(c.contract_id, 0.0)
        neighbour_labels = set()
        for n in members:
            neighbour_labels.update(spanners.get(n, ()))
        stats[label] = CommunityStats(
            label=label,
            firms=firms,
            default_firms=dfirms,
            ratio_default_firms=(dfirms / firms) if firms else None,
            ratio_default_amount=(default_total / loan_total) if loan_total > 0 else None,
            spanners=sum(1 for n in members if n in spanners),
            neighbour_communities=len(neighbour_labels),
            total_loan_amount=loan_total,
            total_default_amount=default_total,
        )
    return stats


# ---------------------------------------------------------------------------
# Edit operations
# ---------------------------------------------------------------------------

def _bump(partition, op_record, new_labels):
    return Partition(
        labels=new_labels,
        revision=partition.revision + 1,
        history=partition.history + (op_record,),
    )


def merge(partition: Partition, snap: Snapshot, community_a: int, community_b: int) -> Partition:
    """Relabel all of b as a; communities must share at least one edge."""
    if community_a == community_b:
        raise NotNeighbours("cannot merge a community with itself")
    touching = any(
        {partition.labels[u], partition.labels[v]} == {community_a, community_b}
        for (u, v) in _cross_edges(partition, snap)
    )
    if not touching:
        raise NotNeighbours(f"communities {community_a} and {community_b} share no edge")
    new_labels = {
        n: (community_a if l == community_b else l) for n, l in partition.labels.items()
    }
    return _bump(partition, {"op": "merge", "a": community_a, "b": community_b}, new_labels)


def reassign(partition: Partition, snap: Snapshot, node: str, target_community: int) -> Partition:
    spanners = find_spanners(partition, snap)
    if node not in spanners:
        raise NotASpanner(f"{node} has no cross-community edge")
    if target_community not in spanners[node]:
        raise NotAdjacent(f"{node} is not adjacent to community {target_community}")
    new_labels = dict(partition.labels)
    new_labels[node] = target_community
    return _bump(partition, {"op": "reassign", "node": node, "target": target_community}, new_labels)


def split(partition: Partition, snap: Snapshot, community: int, cut_edges) -> Partition:
    """Split a community along an explicit cut-edge set.

    ``cut_edges`` is an iterable of node pairs (order-insensitive). Each
    resulting connected part gets a fresh label; parts are labeled in order
    of their smallest member id.
    """
    members = partition.members(community)
    if not members:
        raise NotACut(f"community {community} is empty")
    member_set = set(members)
    cut = {frozenset(e) for e in cut_edges}
    adj = {n: [] for n in members}
    for (u, v) in simple_view(snap, "undirected").weights:
        if u in member_set and v in member_set and frozenset((u, v)) not in cut:
            adj[u].append(v)
            adj[v].append(u)
    parts = _components(adj)
    if len(parts) < 2:
        raise NotACut("cut-edge removal leaves the community connected")
    parts.sort(key=lambda p: p[0])
    next_label = max(partition.labels.values()) + 1
    new_labels = dict(partition.labels)
    for i, part in enumerate(parts):
        for n in part:
            new_labels[n] = next_label + i
    record = {"op": "split", "community": community,
              "cut_edges": sorted(sorted(e) for e in cut)}
    return _bump(partition, record, new_labels)


def replay(initial: Partition, snap: Snapshot, history) -> Partition:
    """Re-apply an operation log; used for edit-determinism checks."""
    p = initial
    for record in history:
        if record["op"] == "merge":
            p = merge(p, snap, record["a"], record["b"])
        elif record["op"] == "reassign":
            p = reassign(p, snap, record["node"], record["target"])
        elif record["op"] == "split":
            p = split(p, snap, record["community"], [tuple(e) for e in record["cut_edges"]])
        else:
            raise ValueError(f"unknown op {record['op']!r}")
    return p


# ---------------------------------------------------------------------------
# Treemap and radar
# ---------------------------------------------------------------------------

def _squarify(sizes, x, y, w, h):
    """Squarified treemap; sizes already normalized to the rectangle area."""
    rects = []
    sizes = list(sizes)
    while sizes:
        if len(sizes) == 1:
            rects.append((x, y, w, h))
            break
        shorter = min(w, h)
        row = [sizes.pop(0)]

        def worst_ratio(row_):
            s = sum(row_)
            if s == 0 or shorter == 0:
                return float("inf")
            return max(max((shorter ** 2) * r / (s ** 2), (s ** 2) / ((shorter ** 2) * r)) for r in row_)
        while sizes:
            if worst_ratio(row + [sizes[0]]) <= worst_ratio(row):
                row.append(sizes.pop(0))
            else:
                break
        s = sum(row)
        if w >= h:
            col_w = s / h if h > 0 else 0
            cy = y
            for r in row:
                rh = r / col_w if col_w > 0 else 0
                rects.append((x, cy, col_w, rh))
                cy += rh
            x += col_w
            w -= col_w
        else:
            row_h = s / w if w > 0 else 0
            cx = x
            for r in row:
                rw = r / row_h if row_h > 0 else 0
                rects.append((cx, y, rw, row_h))
                cx += rw
            y += row_h
            h -= row_h
    return rects


def treemap_layout(stats: dict, size_measure: str = "ratio_default_firms") -> TreemapLayout:
    """Squarified unit-square layout, area proportional to the size measure.

    A floor of 2% of the mean measure keeps zero-default communities visible.
    """
    if not stats:
        raise ValueError("need at least one community")
    values = {}
    for label, cs in stats.items():
        v = getattr(cs, size_measure)
        values[label] = v if v is not None else 0.0
    mean = sum(values.values()) / len(values)
    floor = TREEMAP_FLOOR_FRACTION * mean if mean > 0 else 1.0
    sized = {l: max(v, floor) for l, v in values.items()}
    total = sum(sized.values())
    order = sorted(sized, key=lambda l: (-sized[l], l))
    norm = [sized[l] / total for l in order]
    rects = _squarify(norm, 0.0, 0.0, 1.0, 1.0)
    return TreemapLayout(rects=dict(zip(order, rects)), size_measure=size_measure)


def _deposit_loss(enterprises, as_of):
    """Relative decline of the aggregate deposit series over the trailing year."""
    series = {}
    for e in enterprises:
        for d, bal in e.deposit_series:
            series[d] = series.get(d, 0.0) + bal
    if not series:
        return None
    dates = sorted(series)
    end = as_of or dates[-1]
    start_candidates = [d for d in dates if (end - d).days <= 366 and d <= end]
    if not start_candidates:
        return None
    start = start_candidates[0]
    if series[start] <= 0:
        return None
    return max(0.0, (series[start] - series.get(end, series[dates[-1]])) / series[start])


def radar_profiles(partition: Partition, network: GuaranteeNetwork,
                   snap: Snapshot, stats: Optional[dict] = None) -> dict:
    """Six-axis financial profile per community, max-normalized per axis.

    Returns label -> RadarProfile; raw values retained alongside the
    normalized ones.
    """
    if stats is None:
        stats = community_stats(partition, snap, network)
    guarantee_out = {}
    for e in snap.edges:
        guarantee_out[e.guarantor_id] = guarantee_out.get(e.guarantor_id, 0.0) + e.guarantee_amount

    raws = {}
    warn = {}
    for label, members in partition.communities().items():
        ents = [network.enterprises[n] for n in members if n in network.enterprises]
        warnings = tuple(
            f"missing financials for {n}" for n in members if n not in network.enterprises
        )
        rc = sum(e.registered_capital for e in ents)
        if rc <= 0:
            warnings = warnings + (f"community {label}: zero registered capital",)
        cs = stats[label]
        sectors = {}
        for e in ents:
            sectors[e.sector] = sectors.get(e.sector, 0) + 1
        raws[label] = {
            "defaults": cs.ratio_default_firms or 0.0,
            "la_rc": (cs.total_loan_amount / rc) if rc > 0 else 0.0,
            "deposit_loss": _deposit_loss(ents, snap.as_of) or 0.0,
            "sector_concentration": (max(sectors.values()) / len(ents)) if ents else 0.0,
            "ga_rc": (sum(guarantee_out.get(n, 0.0) for n in members) / rc) if rc > 0 else 0.0,
            "credit_rating": (sum(e.credit_rating for e in ents) / len(ents)) if ents else 0.0,
        }
        warn[label] = warnings

    maxima = {ax: max(r[ax] for r in raws.values()) for ax in RADAR_AXES}
    out = {}
    for label, raw in raws.items():
        normalized = {
            ax: (raw[ax] / maxima[ax]) if maxima[ax] > 0 else 0.0 for ax in RADAR_AXES
        }
        out[label] = RadarProfile(label=label, raw=raw, normalized=normalized, warnings=warn[label])
    return out
