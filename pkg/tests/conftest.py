import random
from datetime import date, timedelta

import pytest

from glens.graphcore import (
    Enterprise,
    GuaranteeEdge,
    LoanContract,
    RepaymentEvent,
    build_network,
    snapshot,
)

DAY0 = date(2013, 1, 1)


def make_network(edge_pairs, defaults=(), amounts=None, node_ids=None,
                 valid_from=DAY0, valid_to=None):
    """Small test network from (guarantor, borrower) pairs.

    Every node gets one loan contract; nodes listed in ``defaults`` get one
    defaulted repayment on it.
    """
    nodes = set(node_ids or ())
    for g, b in edge_pairs:
        nodes.add(g)
        nodes.add(b)
    enterprises = [Enterprise(id=n, registered_capital=100.0, sector="trade")
                   for n in sorted(nodes)]
    edges = []
    for i, (g, b) in enumerate(edge_pairs):
        amount = amounts[i] if amounts else 10.0
        edges.append(GuaranteeEdge(g, b, amount, f"c_{g}_{b}_{i}", valid_from, valid_to))
    contracts = []
    repayments = []
    for n in sorted(nodes):
        cid = f"loan_{n}"
        due = valid_from + timedelta(days=180)
        contracts.append(LoanContract(cid, n, 100.0, valid_from, ((due, 50.0),)))
        defaulted = n in defaults
        repayments.append(RepaymentEvent(cid, due,
                                         None if defaulted else due,
                                         0.0 if defaulted else 50.0,
                                         defaulted))
    return build_network(enterprises, edges, contracts, repayments)


def make_snapshot(edge_pairs, **kwargs):
    as_of = kwargs.pop("as_of", DAY0 + timedelta(days=90))
    return snapshot(make_network(edge_pairs, **kwargs), as_of)


# Propagation illustration: E guarantees C, D, F, G, H; C and D guarantee B;
# B guarantees A. Default at A can reach B, C, D, E but never F, G, H.
FIG7_EDGES = [
    ("B", "A"),
    ("C", "B"),
    ("D", "B"),
    ("E", "C"),
    ("E", "D"),
    ("E", "F"),
    ("E", "G"),
    ("E", "H"),
]


@pytest.fixture
def fig7_network():
    return make_network(FIG7_EDGES)


@pytest.fixture
def fig7_snapshot(fig7_network):
    return snapshot(fig7_network, DAY0 + timedelta(days=90))


def random_digraph_pairs(rng, n, p):
    nodes = [f"n{i:02d}" for i in range(n)]
    return [(u, v) for u in nodes for v in nodes if u != v and rng.random() < p]


@pytest.fixture
def rng():
    return random.Random(12345)
