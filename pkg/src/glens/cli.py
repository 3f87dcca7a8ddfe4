"""Batch workflows: ingest, generate, analyze, serve.

Dataset root comes from --data or the GLENS_DATA environment variable and
must hold a manifest.json plus the nine CSV tables. Reports write a
delimited or JSON file via --output; commands with a natural figure also
render a PNG next to it (disable with --no-figure).
"""

from __future__ import annotations

import json
import sys
from datetime import date
from pathlib import Path

import click

from . import community as community_mod
from . import contagion as contagion_mod
from . import ingest as ingest_mod
from . import metrics as metrics_mod
from . import patterns as patterns_mod
from . import riskmodel as riskmodel_mod
from .errors import GlensError
from .fingerprint import network_fingerprint
from .graphcore import defaulted_enterprises, snapshot


def _load_network(data_dir):
    if data_dir is None:
        raise click.UsageError("no dataset: pass --data or set GLENS_DATA")
    tables = ingest_mod.load_tables(data_dir)
    return ingest_mod.join_to_network(tables), tables


def _emit(rows, columns, output, fmt):
    """Write a report either as CSV rows or a JSON array of objects."""
    if fmt == "json":
        payload = json.dumps([dict(zip(columns, r)) for r in rows], indent=2, default=str)
        if output:
            Path(output).write_text(payload + "\n")
        else:
            click.echo(payload)
    else:
        import csv as csvlib

        fh = open(output, "w", newline="") if output else sys.stdout
        try:
            writer = csvlib.writer(fh)
            writer.writerow(columns)
            writer.writerows(rows)
        finally:
            if output:
                fh.close()


def _figure_path(output):
    return str(Path(output).with_suffix(".png")) if output else None


def _parse_date(raw, network):
    if raw:
        return date.fromisoformat(raw)
    span = network.date_span()
    return span[1] if span else date.today()


data_option = click.option("--data", envvar="GLENS_DATA", type=click.Path(exists=True),
                           help="Dataset root (manifest.json + tables).")
output_option = click.option("--output", type=click.Path(), default=None)
format_option = click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                             default="csv")
date_option = click.option("--date", "as_of", default=None,
                           help="Snapshot date (ISO); defaults to the dataset's last date.")
figure_option = click.option("--figure/--no-figure", default=True,
                             help="Render a PNG next to --output.")


@click.group()
def main():
    """Guarantee-network risk analytics."""


@main.command()
@click.argument("manifest_dir", type=click.Path(exists=True))
def ingest(manifest_dir):
    """Validate a dataset directory and print its fingerprint."""
    network, tables = _load_network(manifest_dir)
    click.echo(json.dumps({
        "fingerprint": network_fingerprint(network),
        "row_counts": tables.row_counts(),
        "nodes": len(network.enterprises),
        "edges": len(network.edges),
    }, indent=2))


@main.command()
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--dest", type=click.Path(), required=True)
def generate(config_file, dest):
    """Generate a synthetic dataset from a JSON config into DEST."""
    raw = json.loads(Path(config_file).read_text())
    for key in ("span_start", "span_end"):
        if key in raw:
            raw[key] = date.fromisoformat(raw[key])
    for key in ("community_size_range", "revolving_length_range"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if "planted_motifs" in raw:
        raw["planted_motifs"] = tuple(
            tuple(tuple(e) for e in motif) for motif in raw["planted_motifs"]
        )
    config = ingest_mod.SyntheticConfig(**raw)
    tables, truth = ingest_mod.generate_synthetic(config)
    ingest_mod.write_tables(tables, dest)
    ingest_mod.write_ground_truth(truth, Path(dest) / "ground_truth.json")
    click.echo(f"wrote {truth.node_count} enterprises / {truth.edge_count} guarantees to {dest}")


@main.command()
@data_option
@output_option
@format_option
def stats(data, output, fmt):
    """Overall dataset statistics."""
    _, tables = _load_network(data)
    d = ingest_mod.overall_stats(tables).as_dict()
    _emit([list(d.values())], list(d.keys()), output, fmt)


@main.command()
@data_option
@output_option
@format_option
@date_option
@figure_option
@click.option("--hist-kind", default="authority", help="Metric for the histogram figure.")
@click.option("--bins", default=10)
def centrality(data, output, fmt, as_of, figure, hist_kind, bins):
    """Per-node centrality table for a snapshot."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    m = metrics_mod.compute_centralities(snap)
    rows = [[n] + [m[n].get(k) for k in metrics_mod.METRIC_KINDS] for n in sorted(m)]
    _emit(rows, ["node"] + list(metrics_mod.METRIC_KINDS), output, fmt)
    if figure and output:
        hist = metrics_mod.default_rate_histogram(
            m, defaulted_enterprises(network), hist_kind, bins
        )
        from .plots import render_histogram

        render_histogram(hist, _figure_path(output))


@main.command()
@data_option
@output_option
@format_option
@date_option
@figure_option
@click.option("--walk-steps", default=4)
def communities(data, output, fmt, as_of, figure, walk_steps):
    """Detect communities and report their statistics."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    part = community_mod.detect_communities(snap, walk_steps)
    stats_map = community_mod.community_stats(part, snap, network)
    columns = ["community", "firms", "default_firms", "ratio_default_firms_pct",
               "ratio_default_amount_pct", "spanners", "neighbour_communities",
               "total_loan_amount", "total_default_amount"]
    rows = []
    for label, cs in sorted(stats_map.items()):
        rows.append([
            label, cs.firms, cs.default_firms,
            community_mod.round_percent(cs.ratio_default_firms or 0.0),
            community_mod.round_percent(cs.ratio_default_amount)
            if cs.ratio_default_amount is not None else None,
            cs.spanners, cs.neighbour_communities,
            round(cs.total_loan_amount, 2), round(cs.total_default_amount, 2),
        ])
    _emit(rows, columns, output, fmt)
    if figure and output:
        from .plots import render_treemap

        layout = community_mod.treemap_layout(stats_map)
        render_treemap(layout, stats_map, _figure_path(output))


@main.command()
@data_option
@output_option
@format_option
@date_option
@click.option("--k", default=4, type=click.IntRange(3, 5))
def census(data, output, fmt, as_of, k):
    """Motif census of the snapshot."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    res = patterns_mod.motif_census(snap, k)
    rows = [[code, count] for code, count in sorted(res.counts.items())]
    _emit(rows, ["canonical_code", "count"], output, fmt)
    if res.truncated:
        click.echo("warning: census truncated by budget", err=True)


@main.command()
@data_option
@output_option
@format_option
@date_option
@click.option("--motif-file", type=click.Path(exists=True), required=True,
              help='JSON {"edges": [[0,1],...]} guarantor->borrower slot pairs.')
def match(data, output, fmt, as_of, motif_file):
    """Match a motif against the snapshot and report default statistics."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    spec = json.loads(Path(motif_file).read_text())
    motif = patterns_mod.Motif.from_edges(spec["edges"])
    res = patterns_mod.match_motif(snap, motif)
    report = patterns_mod.motif_report(motif, res.embeddings, network)
    row = report.as_row()
    _emit([list(row.values())], list(row.keys()), output, fmt)


@main.command()
@data_option
@output_option
@format_option
@date_option
@click.option("--maxlen", default=8)
def circles(data, output, fmt, as_of, maxlen):
    """Detect guarantee circles (mutual/revolving/star/joint liability)."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    cs = patterns_mod.detect_circles(snap, max_cycle_len=maxlen)
    rows = []
    for c in cs.mutual:
        rows.append(["mutual", " ".join(c)])
    for c in cs.revolving:
        rows.append(["revolving", " ".join(c)])
    for center, bs in cs.stars:
        rows.append(["star", " ".join((center,) + bs)])
    for b, gs in cs.joint_liability:
        rows.append(["joint_liability", " ".join((b,) + gs)])
    _emit(rows, ["kind", "members"], output, fmt)


@main.command()
@data_option
@output_option
@format_option
@figure_option
@click.option("--width-months", default=3)
@click.option("--stride-months", default=3)
@click.option("--grace-days", default=0)
def predict(data, output, fmt, figure, width_months, stride_months, grace_days):
    """Rolling default prediction over the dataset's full span."""
    network, _ = _load_network(data)
    span = network.date_span()
    plan = riskmodel_mod.build_windows(span[0], span[1], width_months, stride_months)
    result = riskmodel_mod.rolling_predict(network, plan, grace_days=grace_days)
    rows = [[e, w.isoformat(), round(p, 6)] for e, w, p in result.predictions]
    _emit(rows, ["enterprise", "window_end", "probability"], output, fmt)
    for r in result.reports:
        click.echo(f"window {r.window_id}: auc={r.auc} precision={r.precision} "
                   f"recall={r.recall}", err=True)
    if figure and output and result.predictions:
        from .plots import render_heatmap

        render_heatmap(metrics_mod.assemble_heatmap(result.predictions), _figure_path(output))


@main.command()
@data_option
@output_option
@format_option
@date_option
@click.option("--seed", required=True, help="Seed (defaulting) enterprise id.")
@click.option("--maxlen", default=8)
def paths(data, output, fmt, as_of, seed, maxlen):
    """Enumerate default-propagation paths from a seed."""
    network, _ = _load_network(data)
    snap = snapshot(network, _parse_date(as_of, network))
    res = contagion_mod.enumerate_paths(snap, seed, maxlen)
    rows = [[i, " ".join(p)] for i, p in enumerate(res.paths)]
    _emit(rows, ["path_id", "nodes"], output, fmt)
    if res.truncated:
        click.echo("warning: enumeration truncated by caps", err=True)


@main.command()
@data_option
@click.option("--port", default=8080)
@click.option("--host", default="127.0.0.1")
def serve(data, port, host):
    """Run the HTTP JSON API."""
    from .service import serve as run_service

    network, _ = _load_network(data)
    run_service(network, port=port, host=host)


def cli_entry():  # pragma: no cover
    try:
        main()
    except GlensError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    cli_entry()
