"""Record live API payloads into JSON fixtures for the frontend tests.

Run from the repository root after installing the Python package:

    python3 frontend/scripts/record_fixtures.py

The frontend consumes the service over HTTP only; these fixtures freeze a
known dataset's payloads so the UI contract tests run without a server.
"""

import itertools
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import FIG7_EDGES, make_network  # noqa: E402

from glens.service import create_app  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def service_edges():
    edges = []
    for group in (["n1", "n2", "n3", "n4"], ["n5", "n6", "n7", "n8"]):
        for u, v in itertools.combinations(group, 2):
            edges.append((u, v))
    edges.append(("n4", "n5"))
    return edges + FIG7_EDGES


def dump(name, payload):
    path = FIXTURES / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(ROOT)}")


def adjacency(snapshot_payload):
    adj = {}
    for e in snapshot_payload["edges"]:
        adj.setdefault(e["guarantor"], set()).add(e["borrower"])
        adj.setdefault(e["borrower"], set()).add(e["guarantor"])
    return adj


def sole_neighbour_community(adj, labels, node):
    own = labels[node]
    others = {labels[m] for m in adj[node]} - {own}
    assert len(others) == 1, f"{node} borders {others}"
    return own, others.pop()


def record_replay(client):
    """Drive the scripted gesture sequence and log every request/response."""
    steps = []

    def call(method, path, body=None):
        if method == "POST":
            r = client.post(path, json=body)
        else:
            r = client.get(path)
        assert r.status_code < 300, r.text
        entry = {"method": method, "path": path, "response": r.json()}
        if body is not None:
            entry["body"] = body
        steps.append(entry)
        return r.json()

    created = client.post("/api/v1/sessions", json={})
    assert created.status_code == 201
    session = created.json()
    sid = session["session_id"]

    snapshot_payload = client.get("/api/v1/network/snapshot").json()
    adj = adjacency(snapshot_payload)
    labels = {n: l for n, l in
              client.get(f"/api/v1/communities?session_id={sid}").json()["labels"].items()}

    edits = f"/api/v1/sessions/{sid}/edits"
    refresh = f"/api/v1/communities?session_id={sid}"

    gestures = []

    # spanner double-click on n4: merge its community with the one it borders
    own, other = sole_neighbour_community(adj, labels, "n4")
    gestures.append({"kind": "merge", "node": "n4"})
    call("POST", edits, {"op": "merge", "a": own, "b": other})
    labels = call("GET", refresh)["labels"]

    # double-click the n4-n5 edge: split the merged community along it
    assert labels["n4"] == labels["n5"]
    gestures.append({"kind": "split", "edge": ["n4", "n5"]})
    call("POST", edits, {"op": "split", "community": labels["n4"],
                         "cut_edges": [["n4", "n5"]]})
    labels = call("GET", refresh)["labels"]

    # spanner single-click on n4: move it into the bordering community
    own, other = sole_neighbour_community(adj, labels, "n4")
    gestures.append({"kind": "reassign", "node": "n4"})
    call("POST", edits, {"op": "reassign", "node": "n4", "target": other})
    labels = call("GET", refresh)["labels"]

    # click edge B->A in the propagation view: cut it
    gestures.append({"kind": "cut", "edge": ["B", "A"]})
    call("POST", edits, {"op": "cut", "edge": ["B", "A"]})
    call("GET", refresh)

    final = client.get(f"/api/v1/sessions/{sid}").json()
    dump("replay.json", {
        "session": session,
        "snapshot": snapshot_payload,
        "initial_labels": {n: labels for n, labels in sorted(
            client.get("/api/v1/communities").json()["labels"].items())},
        "gestures": gestures,
        "steps": steps,
        "final_revision": final["revision"],
        "final_fingerprint": final["session_fingerprint"],
    })


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    net = make_network(service_edges(), defaults={"n1", "A"})
    client = TestClient(create_app(net))

    dump("snapshot.json", client.get("/api/v1/network/snapshot").json())
    dump("metrics.json", client.get("/api/v1/metrics").json())
    dump("communities.json", client.get("/api/v1/communities").json())
    dump("treemap.json", client.get("/api/v1/treemap").json())
    dump("propagation_A.json", client.get("/api/v1/propagation/A").json())

    # a rejected edit, for the inline-error rendering test
    sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
    r = client.post(f"/api/v1/sessions/{sid}/edits",
                    json={"op": "reassign", "node": "A", "target": 0})
    assert r.status_code == 422
    dump("edit_rejection.json", {"status": r.status_code, "body": r.json()})

    record_replay(client)

    # dedicated flow network: A's guarantors back it with amounts 100 and 50
    flow_net = make_network([("C", "A"), ("B", "A")], amounts=[100.0, 50.0])
    flow_client = TestClient(create_app(flow_net))
    dump("sankey_A.json", flow_client.get("/api/v1/sankey/A").json())


if __name__ == "__main__":
    main()
