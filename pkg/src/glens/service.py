"""HTTP JSON API: read-only analytics plus editing sessions and jobs.

Single-dataset process. Sessions hold a snapshot date, an editable partition
and a cut overlay; jobs run long computations (census, match, rolling
prediction, importance) on a small worker pool with cooperative cancellation.
Every response echoes the dataset fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, timezone
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from . import __version__, community, contagion, patterns, riskmodel
from .errors import (
    GlensError,
    UnknownJob,
    UnknownNode,
    UnknownSession,
)
from .fingerprint import network_fingerprint, partition_fingerprint
from .graphcore import GuaranteeNetwork, diff_snapshots, snapshot
from .metrics import METRIC_KINDS, assemble_heatmap, compute_centralities, default_rate_histogram

NOT_FOUND_CODES = {"unknown_node", "unknown_edge", "unknown_job", "unknown_session",
                   "unknown_enterprise", "missing_table"}


class Session:
    def __init__(self, network: GuaranteeNetwork, as_of: date):
        self.id = uuid.uuid4().hex
        self.as_of = as_of
        self.snapshot = snapshot(network, as_of)
        self.partition = community.detect_communities(self.snapshot)
        self.cuts = contagion.CutSession(self.snapshot, session_id=self.id)
        self.motif: Optional[patterns.Motif] = None
        self.created = datetime.now(timezone.utc).isoformat()
        self.lock = threading.Lock()  # serializes edits within the session

    def fingerprint(self) -> str:
        payload = {
            "partition": partition_fingerprint(self.partition),
            "cuts": sorted(list(e) for e in self.cuts.removed_edges),
            "motif": self.motif.canonical_code if self.motif else None,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class Job:
    KINDS = ("census", "match", "rolling_predict", "importance")

    def __init__(self, kind, params):
        self.id = uuid.uuid4().hex
        self.kind = kind
        self.params = params
        self.state = "queued"
        self.progress = 0.0
        self.result = None
        self.error = None
        self.cancel_event = threading.Event()

    def tick(self, done, total):
        self.progress = max(self.progress, done / total if total else 1.0)
        return not self.cancel_event.is_set()

    def as_dict(self):
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state,
            "progress": self.progress,
            "result": self.result,
            "error": self.error,
        }


def _edge_payload(e):
    return {
        "guarantor": e.guarantor_id,
        "borrower": e.borrower_id,
        "amount": e.guarantee_amount,
        "contract_id": e.contract_id,
        "valid_from": e.valid_from.isoformat(),
        "valid_to": e.valid_to.isoformat() if e.valid_to else None,
    }


def _stats_payload(cs):
    return {
        "label": cs.label,
        "firms": cs.firms,
        "default_firms": cs.default_firms,
        "ratio_default_firms": cs.ratio_default_firms,
        "ratio_default_amount": cs.ratio_default_amount,
        "spanners": cs.spanners,
        "neighbour_communities": cs.neighbour_communities,
        "total_loan_amount": cs.total_loan_amount,
        "total_default_amount": cs.total_default_amount,
    }


def create_app(network: GuaranteeNetwork) -> FastAPI:
    app = FastAPI(title="glens", version=__version__)
    state = app.state
    state.network = network
    state.fingerprint = network_fingerprint(network)
    state.sessions = {}
    state.jobs = {}
    state.pool = ThreadPoolExecutor(max_workers=2)
    state.last_rolling = None
    span = network.date_span()
    state.default_date = span[1] if span else date.today()

    @app.exception_handler(GlensError)
    async def glens_error_handler(request: Request, exc: GlensError):
        status = 404 if exc.code in NOT_FOUND_CODES else 422
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "detail": exc.detail},
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content={"code": "invalid_argument", "message": str(exc), "detail": {}},
        )

    def respond(payload):
        payload["fingerprint"] = state.fingerprint
        return payload

    def parse_date(raw) -> date:
        if raw is None:
            return state.default_date
        return date.fromisoformat(raw)

    def get_session(session_id) -> Session:
        sess = state.sessions.get(session_id)
        if sess is None:
            raise UnknownSession(f"no session {session_id}")
        return sess

    # -- health and raw network -------------------------------------------
    @app.get("/api/v1/health")
    def health():
        return respond({"status": "ok", "version": __version__})

    @app.get("/api/v1/network/snapshot")
    def network_snapshot(date: Optional[str] = None):
        snap = snapshot(state.network, parse_date(date))
        return respond({
            "as_of": snap.as_of.isoformat(),
            "nodes": sorted(snap.nodes),
            "edges": [_edge_payload(e) for e in snap.edges],
        })

    @app.get("/api/v1/evolution/diff")
    def evolution_diff(from_: Optional[str] = Query(None, alias="from"),
                       to: Optional[str] = None):
        return _diff_impl(from_, to)

    def _diff_impl(from_raw, to_raw):
        d = diff_snapshots(state.network, parse_date(from_raw), parse_date(to_raw))
        return respond({
            "added_nodes": sorted(d.added_nodes),
            "removed_nodes": sorted(d.removed_nodes),
            "added_edges": [_edge_payload(e) for e in sorted(d.added_edges, key=lambda e: e.contract_id)],
            "removed_edges": [_edge_payload(e) for e in sorted(d.removed_edges, key=lambda e: e.contract_id)],
        })

    # -- metrics ----------------------------------------------------------
    def metrics_for(as_of):
        return compute_centralities(snapshot(state.network, as_of))

    @app.get("/api/v1/metrics")
    def metrics_endpoint(date: Optional[str] = None, kind: Optional[str] = None):
        m = metrics_for(parse_date(date))
        if kind is not None and kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {kind!r}")
        rows = {}
        for node, nm in sorted(m.items()):
            if kind:
                rows[node] = nm.get(kind)
            else:
                rows[node] = {k: nm.get(k) for k in METRIC_KINDS}
        return respond({"kind": kind, "metrics": rows})

    @app.get("/api/v1/metrics/histogram")
    def metrics_histogram(kind: str = "authority", bins: int = 10,
                          date: Optional[str] = None):
        as_of = parse_date(date)
        from .graphcore import defaulted_enterprises
        m = metrics_for(as_of)
        hist = default_rate_histogram(m, defaulted_enterprises(state.network), kind, bins)
        return respond({
            "kind": hist.kind,
            "bin_edges": list(hist.bin_edges),
            "counts": list(hist.counts),
            "default_counts": list(hist.default_counts),
            "rates": list(hist.rates),
        })

    # -- sessions and edits ------------------------------------------------
    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: dict):
        as_of = parse_date(body.get("date"))
        sess = Session(state.network, as_of)
        state.sessions[sess.id] = sess
        return respond({
            "session_id": sess.id,
            "date": as_of.isoformat(),
            "revision": sess.partition.revision,
            "session_fingerprint": sess.fingerprint(),
        })

    def session_view(sess: Session):
        stats = community.community_stats(sess.partition, sess.snapshot, state.network)
        layout = community.treemap_layout(stats)
        return {
            "session_id": sess.id,
            "revision": sess.partition.revision,
            "session_fingerprint": sess.fingerprint(),
            "communities": {
                str(l): _stats_payload(cs) for l, cs in sorted(stats.items())
            },
            "treemap": {str(l): list(r) for l, r in layout.rects.items()},
            "cuts": sorted(list(e) for e in sess.cuts.removed_edges),
            "motif": sess.motif.as_dict() if sess.motif else None,
        }

    @app.get("/api/v1/sessions/{session_id}")
    def read_session(session_id: str):
        return respond(session_view(get_session(session_id)))

    @app.post("/api/v1/sessions/{session_id}/edits")
    def apply_edit(session_id: str, body: dict):
        sess = get_session(session_id)
        with sess.lock:
            op = body.get("op")
            if op == "merge":
                sess.partition = community.merge(sess.partition, sess.snapshot,
                                                int(body["a"]), int(body["b"]))
            elif op == "reassign":
                sess.partition = community.reassign(sess.partition, sess.snapshot,
                                                    body["node"], int(body["target"]))
            elif op == "split":
                sess.partition = community.split(
                    sess.partition, sess.snapshot, int(body["community"]),
                    [tuple(e) for e in body["cut_edges"]],
                )
            elif op == "cut":
                sess.cuts.apply_cut(tuple(body["edge"]))
            elif op == "revert":
                sess.cuts.revert_cut(tuple(body["edge"]))
            elif op == "motif_edit":
                base = (sess.motif if body.get("motif") is None
                        else patterns.Motif.from_edges(body["motif"]["edges"]))
                if base is None:
                    raise ValueError("no motif to edit")
                kind, pair = body["edit"]
                sess.motif = patterns.edit_motif(base, (kind, tuple(pair)))
            else:
                raise ValueError(f"unknown edit op {op!r}")
            return respond(session_view(sess))

    # -- communities, treemap, radar (stateless variants) ------------------
    @app.get("/api/v1/communities")
    def communities_endpoint(date: Optional[str] = None, session_id: Optional[str] = None):
        if session_id:
            sess = get_session(session_id)
            part, snap = sess.partition, sess.snapshot
        else:
            snap = snapshot(state.network, parse_date(date))
            part = community.detect_communities(snap)
        stats = community.community_stats(part, snap, state.network)
        return respond({
            "labels": {n: l for n, l in sorted(part.labels.items())},
            "communities": {str(l): _stats_payload(cs) for l, cs in sorted(stats.items())},
            "revision": part.revision,
        })

    @app.get("/api/v1/treemap")
    def treemap_endpoint(date: Optional[str] = None, session_id: Optional[str] = None):
        if session_id:
            sess = get_session(session_id)
            part, snap = sess.partition, sess.snapshot
        else:
            snap = snapshot(state.network, parse_date(date))
            part = community.detect_communities(snap)
        stats = community.community_stats(part, snap, state.network)
        layout = community.treemap_layout(stats)
        return respond({
            "size_measure": layout.size_measure,
            "rects": {str(l): list(r) for l, r in layout.rects.items()},
            "rates": {str(l): stats[l].ratio_default_firms for l in stats},
        })

    @app.get("/api/v1/radar/{community_label}")
    def radar_endpoint(community_label: int, date: Optional[str] = None,
                       session_id: Optional[str] = None):
        if session_id:
            sess = get_session(session_id)
            part, snap = sess.partition, sess.snapshot
        else:
            snap = snapshot(state.network, parse_date(date))
            part = community.detect_communities(snap)
        profiles = community.radar_profiles(part, state.network, snap)
        if community_label not in profiles:
            raise UnknownNode(f"no community {community_label}")
        prof = profiles[community_label]
        return respond({
            "label": prof.label,
            "raw": prof.raw,
            "normalized": prof.normalized,
            "warnings": list(prof.warnings),
        })

    # -- circles, propagation, sankey --------------------------------------
    @app.get("/api/v1/circles")
    def circles_endpoint(maxlen: int = 8, date: Optional[str] = None):
        snap = snapshot(state.network, parse_date(date))
        circles = patterns.detect_circles(snap, max_cycle_len=maxlen)
        return respond({
            "mutual": [list(c) for c in circles.mutual],
            "revolving": [list(c) for c in circles.revolving],
            "stars": [{"center": c, "borrowers": list(bs)} for c, bs in circles.stars],
            "joint_liability": [{"borrower": b, "guarantors": list(gs)}
                                for b, gs in circles.joint_liability],
            "truncated": circles.truncated,
        })

    @app.get("/api/v1/propagation/{node}")
    def propagation_endpoint(node: str, maxlen: int = 8,
                             date: Optional[str] = None,
                             session_id: Optional[str] = None):
        if session_id:
            res = get_session(session_id).cuts.enumerate_paths(node, maxlen)
        else:
            snap = snapshot(state.network, parse_date(date))
            res = contagion.enumerate_paths(snap, node, maxlen)
        return respond({
            "seed": res.seed,
            "paths": [list(p) for p in res.paths],
            "truncated": res.truncated,
            "occurrences": res.occurrences,
            "importance": res.importance,
        })

    @app.get("/api/v1/sankey/{node}")
    def sankey_endpoint(node: str, maxlen: int = 8, date: Optional[str] = None,
                        session_id: Optional[str] = None):
        if session_id:
            flow = get_session(session_id).cuts.sankey_flow(node, maxlen)
        else:
            snap = snapshot(state.network, parse_date(date))
            flow = contagion.sankey_flow(snap, node, maxlen)
        return respond({
            "focus": flow.focus,
            "nodes": list(flow.nodes),
            "links": [{"source": s, "target": t, "value": v} for s, t, v in flow.links],
            "provided": flow.provided,
            "received": flow.received,
        })

    # -- heatmap ------------------------------------------------------------
    @app.get("/api/v1/heatmap")
    def heatmap_endpoint():
        if state.last_rolling is None:
            return respond({"rows": [], "columns": [], "cells": {}})
        grid = assemble_heatmap(state.last_rolling)
        return respond({
            "rows": list(grid.rows),
            "columns": [c.isoformat() for c in grid.columns],
            "cells": {f"{e}|{w.isoformat()}": p for (e, w), p in sorted(grid.cells.items())},
        })

    # -- jobs ---------------------------------------------------------------
    def run_job(job: Job):
        if job.cancel_event.is_set():
            job.state = "cancelled"
            return
        job.state = "running"
        try:
            params = job.params
            as_of = parse_date(params.get("date"))
            snap = snapshot(state.network, as_of)
            if job.kind == "census":
                res = patterns.motif_census(snap, int(params.get("k", 4)), tick=job.tick)
                job.result = {
                    "k": res.k,
                    "counts": {str(code): c for code, c in sorted(res.counts.items())},
                    "partial": res.truncated,
                }
            elif job.kind == "match":
                motif = patterns.Motif.from_edges(params["motif"]["edges"])
                res = patterns.match_motif(snap, motif, tick=job.tick)
                report = patterns.motif_report(motif, res.embeddings, state.network)
                job.result = {
                    "motif": motif.as_dict(),
                    "embeddings": [list(e) for e in res.embeddings],
                    "partial": res.truncated,
                    "report": report.as_row(),
                }
            elif job.kind == "rolling_predict":
                span = state.network.date_span()
                plan = riskmodel.build_windows(
                    span[0], span[1],
                    int(params.get("width_months", 3)),
                    int(params.get("stride_months", 3)),
                )
                rr = riskmodel.rolling_predict(state.network, plan)
                state.last_rolling = rr.predictions
                job.progress = 1.0
                job.result = {
                    "predictions": [[e, w.isoformat(), p] for e, w, p in rr.predictions],
                    "reports": [
                        {"window": r.window_id, "auc": r.auc, "precision": r.precision,
                         "recall": r.recall, "tp": r.tp, "fp": r.fp, "tn": r.tn, "fn": r.fn}
                        for r in rr.reports
                    ],
                    "skipped": [list(s) for s in rr.skipped],
                }
            elif job.kind == "importance":
                imp, occ, truncated = contagion.propagation_importance(
                    snap, int(params.get("maxlen", 8))
                )
                job.result = {"importance": imp, "occurrences": occ, "partial": truncated}
            job.progress = 1.0
            job.state = "cancelled" if job.cancel_event.is_set() else "done"
        except Exception as exc:  # surfaces via the job payload, not a 500
            job.state = "failed"
            job.error = {"code": getattr(exc, "code", "internal"), "message": str(exc)}

    @app.post("/api/v1/jobs", status_code=201)
    def submit_job(body: dict):
        kind = body.get("kind")
        if kind not in Job.KINDS:
            raise ValueError(f"job kind must be one of {Job.KINDS}")
        job = Job(kind, body.get("params", {}))
        state.jobs[job.id] = job
        state.pool.submit(run_job, job)
        return respond({"job_id": job.id, "state": job.state})

    @app.get("/api/v1/jobs/{job_id}")
    def poll_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"no job {job_id}")
        return respond(job.as_dict())

    @app.delete("/api/v1/jobs/{job_id}")
    def cancel_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"no job {job_id}")
        job.cancel_event.set()
        if job.state == "queued":
            job.state = "cancelled"
        return respond({"job_id": job.id, "state": job.state})

    return app


def serve(network: GuaranteeNetwork, port: int = 8080, host: str = "127.0.0.1"):
    import uvicorn

    app = create_app(network)
    uvicorn.run(app, host=host, port=port)
