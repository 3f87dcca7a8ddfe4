"""Temporal guarantee-network data model.

Nodes are enterprises; edges are guarantor->borrower contracts carrying an
amount and a validity interval. The network itself is an immutable record
store; algorithms consume time-sliced :class:`Snapshot` values and collapsed
:class:`SimpleGraph` views derived from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Optional, Sequence

from .errors import BadRange, InvalidInterval, UnknownEnterprise


@dataclass(frozen=True)
class Enterprise:
    id: str
    business_nature: str = ""
    registered_capital: float = 0.0
    enterprise_scale: str = ""
    employee_count: int = 0
    sector: str = ""
    credit_rating: int = 0
    # (date, balance) pairs, ascending by date
    deposit_series: tuple = ()

    def __post_init__(self):
        if self.registered_capital < 0:
            raise InvalidInterval(f"enterprise {self.id}: negative registered_capital")
        if self.employee_count < 0:
            raise InvalidInterval(f"enterprise {self.id}: negative employee_count")


@dataclass(frozen=True)
class GuaranteeEdge:
    guarantor_id: str
    borrower_id: str
    guarantee_amount: float
    contract_id: str
    valid_from: date
    valid_to: Optional[date] = None  # None = open-ended

    def __post_init__(self):
        if self.guarantor_id == self.borrower_id:
            raise InvalidInterval(
                f"edge {self.contract_id}: self-guarantee {self.guarantor_id}"
            )
        if self.guarantee_amount <= 0:
            raise InvalidInterval(f"edge {self.contract_id}: non-positive amount")
        if self.valid_to is not None and self.valid_from > self.valid_to:
            raise InvalidInterval(
                f"edge {self.contract_id}: valid_from {self.valid_from} after valid_to {self.valid_to}"
            )

    def active_at(self, as_of: date) -> bool:
        if as_of < self.valid_from:
            return False
        return self.valid_to is None or as_of <= self.valid_to


@dataclass(frozen=True)
class LoanContract:
    contract_id: str
    borrower_id: str
    loan_amount: float
    start_date: date
    # (due_date, due_amount) pairs, strictly increasing due dates
    installments: tuple = ()
    capital_return_type: str = ""
    interest_return_type: str = ""

    def __post_init__(self):
        if self.loan_amount <= 0:
            raise InvalidInterval(f"contract {self.contract_id}: non-positive loan_amount")
        dues = [d for d, _ in self.installments]
        if any(b <= a for a, b in zip(dues, dues[1:])):
            raise InvalidInterval(
                f"contract {self.contract_id}: installment due dates not strictly increasing"
            )

    @property
    def end_date(self) -> date:
        if self.installments:
            return self.installments[-1][0]
        return self.start_date

    def active_at(self, as_of: date) -> bool:
        return self.start_date <= as_of <= self.end_date


@dataclass(frozen=True)
class RepaymentEvent:
    contract_id: str
    due_date: date
    paid_date: Optional[date]
    paid_amount: float
    default_flag: bool


@dataclass(frozen=True)
class GuaranteeNetwork:
    enterprises: Mapping[str, Enterprise]
    edges: tuple
    contracts: Mapping[str, LoanContract]
    repayments: tuple

    def date_span(self):
        """Earliest and latest dates mentioned anywhere in the records."""
        dates = []
        for e in self.edges:
            dates.append(e.valid_from)
            if e.valid_to is not None:
                dates.append(e.valid_to)
        for c in self.contracts.values():
            dates.append(c.start_date)
            dates.append(c.end_date)
        for r in self.repayments:
            dates.append(r.due_date)
        if not dates:
            return None
        return min(dates), max(dates)

    def contracts_of(self, enterprise_id: str):
        return [c for c in self.contracts.values() if c.borrower_id == enterprise_id]


@dataclass(frozen=True)
class Snapshot:
    as_of: date
    nodes: frozenset
    edges: tuple  # GuaranteeEdge, in stable input order

    def has_node(self, node_id: str) -> bool:
        return node_id in self.nodes


@dataclass(frozen=True)
class NetworkDiff:
    added_nodes: frozenset
    removed_nodes: frozenset
    added_edges: frozenset
    removed_edges: frozenset

    def is_empty(self) -> bool:
        return not (self.added_nodes or self.removed_nodes or self.added_edges or self.removed_edges)


@dataclass(frozen=True)
class SimpleGraph:
    """Multi-edges collapsed for algorithm consumption.

    ``directed`` edges keep guarantor->borrower orientation; undirected mode
    symmetrizes. Collapsed edge weight is the sum of guarantee amounts.
    """

    directed: bool
    nodes: tuple  # sorted node ids
    weights: Mapping[tuple, float]  # (u, v) -> summed amount

    @property
    def node_index(self):
        return {n: i for i, n in enumerate(self.nodes)}

    def successors(self, u):
        return [v for (a, v) in self.weights if a == u]

    def neighbors(self, u):
        out = set()
        for a, b in self.weights:
            if a == u:
                out.add(b)
            elif b == u:
                out.add(a)
        return out

    def adjacency(self):
        """Dense adjacency as dict node -> sorted neighbor list (undirected sense)."""
        adj = {n: set() for n in self.nodes}
        for (a, b) in self.weights:
            adj[a].add(b)
            if not self.directed:
                adj[b].add(a)
        return {n: sorted(vs) for n, vs in adj.items()}


def build_network(
    enterprises: Iterable[Enterprise],
    edges: Iterable[GuaranteeEdge],
    contracts: Iterable[LoanContract],
    repayments: Iterable[RepaymentEvent],
) -> GuaranteeNetwork:
    """Assemble and validate a network, rejecting dangling references."""
    ent_map = {}
    for e in enterprises:
        if e.id in ent_map:
            raise InvalidInterval(f"duplicate enterprise id {e.id}")
        ent_map[e.id] = e

    edge_list = tuple(edges)
    for edge in edge_list:
        for endpoint in (edge.guarantor_id, edge.borrower_id):
            if endpoint not in ent_map:
                raise UnknownEnterprise(
                    f"edge {edge.contract_id}: unknown enterprise {endpoint}",
                    {"id": endpoint, "contract_id": edge.contract_id},
                )

    contract_map = {}
    for c in contracts:
        if c.borrower_id not in ent_map:
            raise UnknownEnterprise(
                f"contract {c.contract_id}: unknown borrower {c.borrower_id}",
                {"id": c.borrower_id, "contract_id": c.contract_id},
            )
        contract_map[c.contract_id] = c

    repayment_list = tuple(repayments)
    return GuaranteeNetwork(
        enterprises=ent_map,
        edges=edge_list,
        contracts=contract_map,
        repayments=repayment_list,
    )


def snapshot(network: GuaranteeNetwork, as_of: date) -> Snapshot:
    """Pure time slice: edges whose validity interval contains ``as_of``.

    Node set = endpoints of active edges plus borrowers with active contracts.
    """
    active = tuple(e for e in network.edges if e.active_at(as_of))
    nodes = set()
    for e in active:
        nodes.add(e.guarantor_id)
        nodes.add(e.borrower_id)
    for c in network.contracts.values():
        if c.active_at(as_of):
            nodes.add(c.borrower_id)
    return Snapshot(as_of=as_of, nodes=frozenset(nodes), edges=active)


def diff_snapshots(network: GuaranteeNetwork, t1: date, t2: date) -> NetworkDiff:
    if t1 > t2:
        raise BadRange(f"t1 {t1} after t2 {t2}")
    s1 = snapshot(network, t1)
    s2 = snapshot(network, t2)
    e1, e2 = set(s1.edges), set(s2.edges)
    return NetworkDiff(
        added_nodes=frozenset(s2.nodes - s1.nodes),
        removed_nodes=frozenset(s1.nodes - s2.nodes),
        added_edges=frozenset(e2 - e1),
        removed_edges=frozenset(e1 - e2),
    )


def apply_diff(snap: Snapshot, diff: NetworkDiff, as_of: date) -> Snapshot:
    """Apply a diff to a snapshot; used to check the diff/apply round trip."""
    nodes = (set(snap.nodes) | set(diff.added_nodes)) - set(diff.removed_nodes)
    edges = [e for e in snap.edges if e not in diff.removed_edges]
    edges.extend(sorted(diff.added_edges, key=lambda e: (e.contract_id, e.guarantor_id, e.borrower_id)))
    return Snapshot(as_of=as_of, nodes=frozenset(nodes), edges=tuple(edges))


def simple_view(snap: Snapshot, mode: str = "directed") -> SimpleGraph:
    """Collapse parallel edges; undirected mode symmetrizes endpoint pairs."""
    if mode not in ("directed", "undirected"):
        raise ValueError(f"mode must be directed|undirected, got {mode!r}")
    directed = mode == "directed"
    weights = {}
    for e in snap.edges:
        key = (e.guarantor_id, e.borrower_id)
        if not directed:
            key = tuple(sorted(key))
        weights[key] = weights.get(key, 0.0) + e.guarantee_amount
    return SimpleGraph(directed=directed, nodes=tuple(sorted(snap.nodes)), weights=weights)


def defaulted_enterprises(network: GuaranteeNetwork, before: Optional[date] = None) -> frozenset:
    """Enterprises with at least one defaulted repayment (optionally dated < before)."""
    by_contract = {}
    for r in network.repayments:
        if r.default_flag and (before is None or r.due_date < before):
            by_contract.setdefault(r.contract_id, True)
    out = set()
    for cid in by_contract:
        c = network.contracts.get(cid)
        if c is not None:
            out.add(c.borrower_id)
    return frozenset(out)
