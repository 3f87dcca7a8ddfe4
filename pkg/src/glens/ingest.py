"""Load and join the nine loan-record tables into a GuaranteeNetwork.

Input layout: a directory holding a ``manifest.json`` mapping table names to
relative CSV paths, one comma-delimited UTF-8 file per table with a header
row, ISO-8601 dates, money as plain decimal strings.

Also houses the synthetic table generator used for demos and tests: it plants
communities, guarantee circles and motif instances, simulates a default
cascade along the reverse guarantee direction, and emits a ground-truth
ledger alongside the tables.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Optional

from .errors import InfeasibleConfig, MissingTable, ParseError, UnknownEnterprise
from .graphcore import (
    Enterprise,
    GuaranteeEdge,
    GuaranteeNetwork,
    LoanContract,
    RepaymentEvent,
    build_network,
)

TABLE_NAMES = (
    "customer_profile",
    "loan_account",
    "repayment_status",
    "guarantee_profile",
    "customer_credit",
    "loan_contract",
    "guarantee_relationship",
    "guarantee_contract",
    "default_status",
)

# column -> parser kind per table; "date?" and "str?" admit empty cells
SCHEMAS = {
    "customer_profile": [
        ("customer_id", "str"),
        ("business_nature", "str"),
        ("registered_capital", "money"),
        ("enterprise_scale", "str"),
        ("employee_count", "int"),
        ("sector", "str"),
    ],
    "loan_account": [
        ("contract_id", "str"),
        ("customer_id", "str"),
        ("capital_return_type", "str"),
        ("interest_return_type", "str"),
    ],
    "repayment_status": [
        ("contract_id", "str"),
        ("due_date", "date"),
        ("due_amount", "money"),
        ("paid_date", "date?"),
        ("paid_amount", "money"),
        ("default_flag", "bool"),
    ],
    "guarantee_profile": [
        ("customer_id", "str"),
        ("record_date", "date"),
        ("deposit_balance", "money"),
    ],
    "customer_credit": [
        ("customer_id", "str"),
        ("credit_rating", "int"),
    ],
    "loan_contract": [
        ("contract_id", "str"),
        ("customer_id", "str"),
        ("loan_amount", "money"),
        ("start_date", "date"),
    ],
    "guarantee_relationship": [
        ("guarantee_contract_id", "str"),
        ("guarantor_id", "str"),
        ("borrower_id", "str"),
    ],
    "guarantee_contract": [
        ("guarantee_contract_id", "str"),
        ("loan_contract_id", "str"),
        ("guarantee_amount", "money"),
        ("valid_from", "date"),
        ("valid_to", "date?"),
    ],
    "default_status": [
        ("customer_id", "str"),
        ("default_count", "int"),
        ("first_default_date", "date?"),
    ],
}


@dataclass
class TableSet:
    tables: dict  # table name -> list of row dicts

    def __getitem__(self, name):
        return self.tables[name]

    def row_counts(self):
        return {name: len(rows) for name, rows in self.tables.items()}


@dataclass
class OverallStats:
    customer_count: int
    guarantee_relation_count: int
    contract_count: int
    repayment_count: int
    default_count: int
    default_rate_per_repayment: Optional[float]
    default_rate_per_contract: Optional[float]

    def as_dict(self):
        def sig4(x):
            return None if x is None else float(f"{x:.4g}")

        return {
            "customer_count": self.customer_count,
            "guarantee_relation_count": self.guarantee_relation_count,
            "contract_count": self.contract_count,
            "repayment_count": self.repayment_count,
            "default_count": self.default_count,
            "default_rate_per_repayment": sig4(self.default_rate_per_repayment),
            "default_rate_per_contract": sig4(self.default_rate_per_contract),
        }


def _parse_cell(kind, raw, table, rownum, column):
    raw = raw.strip()
    try:
        if kind == "str":
            if raw == "":
                raise ValueError("empty")
            return raw
        if kind == "str?":
            return raw or None
        if kind == "int":
            return int(raw)
        if kind == "money":
            return float(raw)
        if kind == "date":
            return date.fromisoformat(raw)
        if kind == "date?":
            return date.fromisoformat(raw) if raw else None
        if kind == "bool":
            if raw in ("0", "1"):
                return raw == "1"
            raise ValueError("expected 0 or 1")
    except ValueError as exc:
        raise ParseError(table, rownum, column, f"{raw!r}: {exc}") from None
    raise ParseError(table, rownum, column, f"unknown kind {kind}")


def load_tables(source) -> TableSet:
    """Read a manifest directory into a typed, validated TableSet."""
    source = Path(source)
    manifest_path = source / "manifest.json"
    if not manifest_path.exists():
        raise MissingTable(f"no manifest.json in {source}")
    manifest = json.loads(manifest_path.read_text())

    tables = {}
    for name in TABLE_NAMES:
        if name not in manifest:
            raise MissingTable(f"manifest missing table {name!r}")
        path = source / manifest[name]
        if not path.exists():
            raise MissingTable(f"table {name!r}: file {path} not found")
        schema = SCHEMAS[name]
        rows = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for i, raw in enumerate(reader, start=2):  # header is line 1
                row = {}
                for column, kind in schema:
                    if raw.get(column) is None:
                        raise ParseError(name, i, column, "missing column")
                    row[column] = _parse_cell(kind, raw[column], name, i, column)
                rows.append(row)
        tables[name] = rows
    return TableSet(tables=tables)


def write_tables(tables: TableSet, dest) -> None:
    """Write a TableSet as manifest + CSVs (inverse of load_tables)."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    manifest = {name: f"{name}.csv" for name in TABLE_NAMES}
    (dest / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for name in TABLE_NAMES:
        schema = SCHEMAS[name]
        with (dest / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([c for c, _ in schema])
            for row in tables[name]:
                out = []
                for column, kind in schema:
                    v = row[column]
                    if v is None:
                        out.append("")
                    elif kind == "bool":
                        out.append("1" if v else "0")
                    elif kind == "money":
                        out.append(f"{v:.2f}")
                    else:
                        out.append(str(v))
                writer.writerow(out)


def join_to_network(tables: TableSet) -> GuaranteeNetwork:
    """Join the nine tables on customer id / contract id into a network.

    Customer id links profile, credit, deposit and default tables; contract id
    links loan, guarantee and repayment tables.
    """
    credit = {r["customer_id"]: r["credit_rating"] for r in tables["customer_credit"]}
    deposits = {}
    for r in tables["guarantee_profile"]:
        deposits.setdefault(r["customer_id"], []).append((r["record_date"], r["deposit_balance"]))
    for series in deposits.values():
        series.sort()

    enterprises = []
    for r in tables["customer_profile"]:
        cid = r["customer_id"]
        enterprises.append(
            Enterprise(
                id=cid,
                business_nature=r["business_nature"],
                registered_capital=r["registered_capital"],
                enterprise_scale=r["enterprise_scale"],
                employee_count=r["employee_count"],
                sector=r["sector"],
                credit_rating=credit.get(cid, 0),
                deposit_series=tuple(deposits.get(cid, ())),
            )
        )

    account = {r["contract_id"]: r for r in tables["loan_account"]}
    installments = {}
    for r in tables["repayment_status"]:
        installments.setdefault(r["contract_id"], []).append((r["due_date"], r["due_amount"]))
    for plan in installments.values():
        plan.sort()

    contracts = []
    for r in tables["loan_contract"]:
        acct = account.get(r["contract_id"], {})
        contracts.append(
            LoanContract(
                contract_id=r["contract_id"],
                borrower_id=r["customer_id"],
                loan_amount=r["loan_amount"],
                start_date=r["start_date"],
                installments=tuple(installments.get(r["contract_id"], ())),
                capital_return_type=acct.get("capital_return_type", ""),
                interest_return_type=acct.get("interest_return_type", ""),
            )
        )
    contract_ids = {c.contract_id for c in contracts}

    gcontract = {r["guarantee_contract_id"]: r for r in tables["guarantee_contract"]}
    edges = []
    for r in tables["guarantee_relationship"]:
        gc = gcontract.get(r["guarantee_contract_id"])
        if gc is None:
            raise UnknownEnterprise(
                f"guarantee_relationship row references guarantee contract "
                f"{r['guarantee_contract_id']!r} absent from guarantee_contract table",
                {"tables": ["guarantee_relationship", "guarantee_contract"]},
            )
        if gc["loan_contract_id"] not in contract_ids:
            raise UnknownEnterprise(
                f"guarantee_contract {gc['guarantee_contract_id']!r} references loan "
                f"contract {gc['loan_contract_id']!r} absent from loan_contract table",
                {"tables": ["guarantee_contract", "loan_contract"]},
            )
        edges.append(
            GuaranteeEdge(
                guarantor_id=r["guarantor_id"],
                borrower_id=r["borrower_id"],
                guarantee_amount=gc["guarantee_amount"],
                contract_id=gc["loan_contract_id"],
                valid_from=gc["valid_from"],
                valid_to=gc["valid_to"],
            )
        )

    repayments = [
        RepaymentEvent(
            contract_id=r["contract_id"],
            due_date=r["due_date"],
            paid_date=r["paid_date"],
            paid_amount=r["paid_amount"],
            default_flag=r["default_flag"],
        )
        for r in tables["repayment_status"]
    ]
    return build_network(enterprises, edges, contracts, repayments)


def overall_stats(tables: TableSet) -> OverallStats:
    """Corpus-level counts and default rates.

    Two denominators are reported because the source material is ambiguous:
    defaults over repayments and defaults over contracts.
    """
    repayments = tables["repayment_status"]
    defaults = sum(1 for r in repayments if r["default_flag"])
    n_rep = len(repayments)
    n_con = len(tables["loan_contract"])
    return OverallStats(
        customer_count=len(tables["customer_profile"]),
        guarantee_relation_count=len(tables["guarantee_relationship"]),
        contract_count=n_con,
        repayment_count=n_rep,
        default_count=defaults,
        default_rate_per_repayment=(defaults / n_rep) if n_rep else None,
        default_rate_per_contract=(defaults / n_con) if n_con else None,
    )


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

SECTORS = ("manufacturing", "trade", "construction", "logistics", "services", "agri")
SCALES = ("micro", "small", "medium")
NATURES = ("private", "collective", "joint_venture")


@dataclass
class SyntheticConfig:
    community_count: int = 4
    community_size_range: tuple = (8, 16)
    intra_density: float = 0.15
    inter_density: float = 0.05
    mutual_pairs: int = 0
    revolving_cycles: int = 0
    revolving_length_range: tuple = (3, 5)
    stars: int = 0
    star_borrowers: int = 3
    joint_liability: int = 0
    joint_guarantors: int = 2
    # each motif: adjacency as list of (i, j) slot pairs, guarantor -> borrower
    planted_motifs: tuple = ()
    planted_motif_count: int = 1
    contagion_seed_fraction: float = 0.1
    default_propagation_probability: float = 0.5
    distressed_default_rate: float = 0.85
    healthy_default_rate: float = 0.02
    span_start: date = date(2012, 1, 1)
    span_end: date = date(2014, 12, 31)
    seed: int = 0

    def validate(self):
        for d in (self.intra_density, self.inter_density,
                  self.contagion_seed_fraction, self.default_propagation_probability,
                  self.distressed_default_rate, self.healthy_default_rate):
            if not 0.0 <= d <= 1.0:
                raise InfeasibleConfig(f"probability out of [0,1]: {d}")
        if self.community_size_range[0] < 2:
            raise InfeasibleConfig("communities need at least 2 nodes")
        if self.span_end <= self.span_start:
            raise InfeasibleConfig("empty date span")
        for motif in self.planted_motifs:
            k = max(max(i, j) for i, j in motif) + 1
            if k > self.community_size_range[0]:
                raise InfeasibleConfig(
                    f"planted motif needs {k} nodes, smallest community has "
                    f"{self.community_size_range[0]}"
                )


@dataclass
class GroundTruth:
    communities: dict = field(default_factory=dict)  # label -> [node ids]
    mutual_pairs: list = field(default_factory=list)
    revolving_cycles: list = field(default_factory=list)
    stars: list = field(default_factory=list)  # {"center": id, "borrowers": [...]}
    joint_liability: list = field(default_factory=list)
    motif_embeddings: list = field(default_factory=list)  # {"adjacency": [...], "nodes": [...]}
    cascade_seeds: list = field(default_factory=list)
    distressed: list = field(default_factory=list)
    cascade_trace: list = field(default_factory=list)  # [borrower, guarantor] hops
    node_count: int = 0
    edge_count: int = 0

    def as_dict(self):
        return {
            "communities": self.communities,
            "mutual_pairs": self.mutual_pairs,
            "revolving_cycles": self.revolving_cycles,
            "stars": self.stars,
            "joint_liability": self.joint_liability,
            "motif_embeddings": self.motif_embeddings,
            "cascade_seeds": self.cascade_seeds,
            "distressed": self.distressed,
            "cascade_trace": self.cascade_trace,
            "node_count": self.node_count,
            "edge_count": self.edge_count,
        }


def generate_synthetic(config: SyntheticConfig):
    """Generate a TableSet with planted structure; returns (TableSet, GroundTruth).

    Deterministic for a fixed seed. Planted circles and motifs live on
    dedicated nodes that receive no random edges, so every ledger entry is
    recoverable verbatim by the detectors.
    """
    config.validate()
    rng = random.Random(config.seed)
    truth = GroundTruth()

    next_id = [0]

    def fresh_node():
        nid = f"E{next_id[0]:05d}"
        next_id[0] += 1
        return nid

    # --- community scaffolding -------------------------------------------
    communities = []
    for c in range(config.community_count):
        size = rng.randint(*config.community_size_range)
        members = [fresh_node() for _ in range(size)]
        communities.append(members)
        truth.communities[f"C{c}"] = list(members)

    edge_pairs = []  # ordered (guarantor, borrower), deduplicated
    seen_pairs = set()

    def add_pair(g, b):
        if g == b or (g, b) in seen_pairs:
            return False
        seen_pairs.add((g, b))
        edge_pairs.append((g, b))
        return True

    for members in communities:
        # spanning path keeps each community weakly connected
        for a, b in zip(members, members[1:]):
            add_pair(a, b)
        for g in members:
            for b in members:
                if g != b and rng.random() < config.intra_density:
                    add_pair(g, b)

    all_random_nodes = [n for members in communities for n in members]
    n_inter = int(round(config.inter_density * len(all_random_nodes)))
    for _ in range(n_inter):
        g, b = rng.sample(all_random_nodes, 2)
        add_pair(g, b)

    # --- planted structures on dedicated nodes ---------------------------
    planted = set()

    def planted_nodes(k, community_idx):
        nodes = [fresh_node() for _ in range(k)]
        truth.communities[f"C{community_idx}"].extend(nodes)
        planted.update(nodes)
        return nodes

    for i in range(config.mutual_pairs):
        a, b = planted_nodes(2, i % config.community_count)
        add_pair(a, b)
        add_pair(b, a)
        truth.mutual_pairs.append([a, b])

    for i in range(config.revolving_cycles):
        length = rng.randint(*config.revolving_length_range)
        cyc = planted_nodes(length, i % config.community_count)
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            add_pair(a, b)
        truth.revolving_cycles.append(list(cyc))

    for i in range(config.stars):
        nodes = planted_nodes(1 + config.star_borrowers, i % config.community_count)
        center, leaves = nodes[0], nodes[1:]
        for leaf in leaves:
            add_pair(center, leaf)
        truth.stars.append({"center": center, "borrowers": list(leaves)})

    for i in range(config.joint_liability):
        nodes = planted_nodes(1 + config.joint_guarantors, i % config.community_count)
        borrower, guarantors = nodes[0], nodes[1:]
        for g in guarantors:
            add_pair(g, borrower)
        truth.joint_liability.append({"borrower": borrower, "guarantors": list(guarantors)})

    for m, motif in enumerate(config.planted_motifs):
        k = max(max(i, j) for i, j in motif) + 1
        for copy in range(config.planted_motif_count):
            nodes = planted_nodes(k, (m + copy) % config.community_count)
            for i, j in motif:
                add_pair(nodes[i], nodes[j])
            truth.motif_embeddings.append(
                {"adjacency": [list(p) for p in motif], "nodes": list(nodes)}
            )

    all_nodes = [f"E{i:05d}" for i in range(next_id[0])]
    truth.node_count = len(all_nodes)
    truth.edge_count = len(edge_pairs)

    # --- default cascade: borrower -> guarantor spread --------------------
    guarantors_of = {}
    for g, b in edge_pairs:
        guarantors_of.setdefault(b, []).append(g)
    borrowers = sorted({b for _, b in edge_pairs})
    n_seeds = max(1, int(round(config.contagion_seed_fraction * len(borrowers)))) if borrowers else 0
    seeds = rng.sample(borrowers, min(n_seeds, len(borrowers))) if borrowers else []
    distressed = set(seeds)
    frontier = list(seeds)
    while frontier:
        node = frontier.pop(0)
        for g in sorted(guarantors_of.get(node, ())):
            if g not in distressed and rng.random() < config.default_propagation_probability:
                distressed.add(g)
                truth.cascade_trace.append([node, g])
                frontier.append(g)
    truth.cascade_seeds = sorted(seeds)
    truth.distressed = sorted(distressed)

    # --- tables -----------------------------------------------------------
    span_days = (config.span_end - config.span_start).days
    tables = {name: [] for name in TABLE_NAMES}

    for nid in all_nodes:
        tables["customer_profile"].append({
            "customer_id": nid,
            "business_nature": rng.choice(NATURES),
            "registered_capital": round(rng.uniform(50, 5000), 2),
            "enterprise_scale": rng.choice(SCALES),
            "employee_count": rng.randint(5, 500),
            "sector": rng.choice(SECTORS),
        })
        tables["customer_credit"].append({
            "customer_id": nid,
            "credit_rating": rng.randint(1, 10),
        })
        balance = rng.uniform(100, 2000)
        drift = rng.uniform(0.7, 1.1) if nid not in distressed else rng.uniform(0.3, 0.8)
        for q in range(4):
            tables["guarantee_profile"].append({
                "customer_id": nid,
                "record_date": config.span_start + timedelta(days=q * 90),
                "deposit_balance": round(balance * (drift ** q), 2),
            })

    contract_seq = [0]
    contracts_of = {}

    def make_contract(borrower):
        cid = f"L{contract_seq[0]:06d}"
        contract_seq[0] += 1
        if borrower in planted:
            # guarantees piggyback on the borrower's contract span; a planted
            # structure is only recoverable whole if its edges overlap in time
            start = config.span_start + timedelta(days=rng.randint(0, 30))
            amount = round(rng.uniform(10, 1000), 2)
            n_inst = max(2, (span_days - 60) // 90)
        else:
            start = config.span_start + timedelta(days=rng.randint(0, max(1, span_days - 360)))
            amount = round(rng.uniform(10, 1000), 2)
            n_inst = rng.randint(2, 6)
        per = round(amount / n_inst * rng.uniform(1.0, 1.15), 2)
        tables["loan_contract"].append({
            "contract_id": cid, "customer_id": borrower,
            "loan_amount": amount, "start_date": start,
        })
        tables["loan_account"].append({
            "contract_id": cid, "customer_id": borrower,
            "capital_return_type": rng.choice(("bullet", "amortized")),
            "interest_return_type": rng.choice(("monthly", "quarterly")),
        })
        is_distressed = borrower in distressed
        p_default = config.distressed_default_rate if is_distressed else config.healthy_default_rate
        for k in range(n_inst):
            due = start + timedelta(days=90 * (k + 1))
            defaulted = rng.random() < p_default
            if defaulted:
                paid_date, paid = None, 0.0
            else:
                paid_date, paid = due - timedelta(days=rng.randint(0, 5)), per
            tables["repayment_status"].append({
                "contract_id": cid, "due_date": due, "due_amount": per,
                "paid_date": paid_date, "paid_amount": paid,
                "default_flag": defaulted,
            })
        contracts_of.setdefault(borrower, []).append((cid, start, start + timedelta(days=90 * n_inst)))
        return cid

    for nid in all_nodes:
        for _ in range(rng.randint(1, 2)):
            make_contract(nid)

    gc_seq = [0]
    for g, b in edge_pairs:
        cid, start, end = rng.choice(contracts_of[b])
        gcid = f"G{gc_seq[0]:06d}"
        gc_seq[0] += 1
        tables["guarantee_contract"].append({
            "guarantee_contract_id": gcid,
            "loan_contract_id": cid,
            "guarantee_amount": round(rng.uniform(10, 500), 2),
            "valid_from": start,
            "valid_to": end,
        })
        tables["guarantee_relationship"].append({
            "guarantee_contract_id": gcid,
            "guarantor_id": g,
            "borrower_id": b,
        })

    default_dates = {}
    default_counts = {}
    contract_owner = {r["contract_id"]: r["customer_id"] for r in tables["loan_contract"]}
    for r in tables["repayment_status"]:
        if r["default_flag"]:
            owner = contract_owner[r["contract_id"]]
            default_counts[owner] = default_counts.get(owner, 0) + 1
            if owner not in default_dates or r["due_date"] < default_dates[owner]:
                default_dates[owner] = r["due_date"]
    for nid in all_nodes:
        tables["default_status"].append({
            "customer_id": nid,
            "default_count": default_counts.get(nid, 0),
            "first_default_date": default_dates.get(nid),
        })

    return TableSet(tables=tables), truth


def write_ground_truth(truth: GroundTruth, dest) -> None:
    Path(dest).write_text(json.dumps(truth.as_dict(), indent=2, default=str))
