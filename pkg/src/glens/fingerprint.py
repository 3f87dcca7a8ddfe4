"""Content fingerprints for cache coherence and determinism checks."""

from __future__ import annotations

import hashlib
import json


def _digest(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def network_fingerprint(network) -> str:
    payload = {
        "enterprises": sorted(network.enterprises),
        "edges": sorted(
            (e.guarantor_id, e.borrower_id, e.contract_id, str(e.valid_from),
             str(e.valid_to), round(e.guarantee_amount, 6))
            for e in network.edges
        ),
        "contracts": sorted(
            (c.contract_id, c.borrower_id, round(c.loan_amount, 6), str(c.start_date))
            for c in network.contracts.values()
        ),
        "repayments": sorted(
            (r.contract_id, str(r.due_date), str(r.paid_date),
             round(r.paid_amount, 6), r.default_flag)
            for r in network.repayments
        ),
    }
    return _digest(payload)


def partition_fingerprint(partition) -> str:
    return _digest({"labels": dict(sorted(partition.labels.items())),
                    "revision": partition.revision})


def propagation_fingerprint(result) -> str:
    return _digest({"seed": result.seed,
                    "paths": [list(p) for p in result.paths],
                    "truncated": result.truncated})
