"""End-to-end acceptance checks, one per guaranteed property.

Each test carries its own wall-clock budget; the numeric fixtures mirror the
published aggregate figures this engine is expected to reproduce.
"""

import itertools
import random
import time
from datetime import date, timedelta

import numpy as np
import pytest

from glens.community import Partition, community_stats, round_percent
from glens.contagion import CutSession, contagion_set, enumerate_paths
from glens.fingerprint import partition_fingerprint, propagation_fingerprint
from glens.graphcore import snapshot
from glens.ingest import SyntheticConfig, TABLE_NAMES, TableSet, generate_synthetic, join_to_network, overall_stats
from glens.metrics import compute_centralities
from glens.patterns import Motif, detect_circles, enumerate_motif_classes, match_motif, motif_census, motif_report, rank_motifs
from glens.riskmodel import (
    BoostParams,
    FeatureEncoder,
    auc_score,
    build_windows,
    extract_features,
    label_defaults,
    rolling_predict,
    train,
    window_population,
)
from glens.errors import DegenerateLabels, NoActiveLoan

from conftest import FIG7_EDGES, make_network, make_snapshot, random_digraph_pairs
from test_metrics import (
    betweenness_by_pair_summation,
    core_numbers_by_peeling,
    harmonic_closeness_by_bfs,
    pagerank_linear_solve,
)
from test_patterns import (
    all_simple_cycles_brute,
    canonical_by_permutation,
    census_brute,
    weakly_connected,
)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            elapsed = time.monotonic() - self.start
            assert elapsed < self.seconds, f"took {elapsed:.1f}s, budget {self.seconds}s"


def test_motif_class_enumeration_counts():
    with Budget(60):
        assert len(enumerate_motif_classes(3)) == 13
        assert len(enumerate_motif_classes(4)) == 199
        assert len(enumerate_motif_classes(5)) == 9364


def test_corpus_default_rate_fixture():
    with Budget(5):
        tables = {name: [] for name in TABLE_NAMES}
        tables["repayment_status"] = [
            {"contract_id": f"c{i}", "default_flag": i < 5911} for i in range(87307)
        ]
        tables["loan_contract"] = [{"contract_id": f"c{i}"} for i in range(30000)]
        stats = overall_stats(TableSet(tables=tables))
        assert stats.default_count == 5911
        assert stats.repayment_count == 87307
        assert abs(stats.default_rate_per_repayment * 100 - 6.77) <= 0.01


def test_community_default_percent_rounding():
    with Budget(5):
        sizes = {1: 44, 2: 1071, 3: 48}
        defaults_per = {1: 14, 2: 733, 3: 48}
        node_ids, defaults, labels = [], set(), {}
        for label, size in sizes.items():
            for i in range(size):
                nid = f"g{label}_{i:04d}"
                node_ids.append(nid)
                labels[nid] = label
                if i < defaults_per[label]:
                    defaults.add(nid)
        net = make_network([], defaults=defaults, node_ids=node_ids)
        snap = snapshot(net, date(2013, 4, 1))
        stats = community_stats(Partition(labels=labels), snap, net)
        assert round_percent(stats[1].ratio_default_firms) == 32
        assert round_percent(stats[2].ratio_default_firms) == 68
        assert round_percent(stats[3].ratio_default_firms) == 100


def test_motif_priority_ranking_fixture():
    with Budget(5):
        # three disjoint firm groups: 4 firms / 4 defaults, 10/9, 4/3
        groups = {
            "a": (4, 4),
            "b": (10, 9),
            "c": (4, 3),
        }
        edges, defaults, embeddings = [], set(), {}
        for tag, (firms, n_def) in groups.items():
            ids = [f"{tag}{i}" for i in range(firms)]
            edges.extend((ids[0], other) for other in ids[1:])
            defaults.update(ids[:n_def])
            embeddings[tag] = tuple(ids)
        net = make_network(edges, defaults=defaults)
        motif = Motif.from_edges([(0, 1)])
        reports = {tag: motif_report(motif, (emb,), net)
                   for tag, emb in embeddings.items()}
        pcts = {tag: r.as_row()["ratio_default_firms_pct"] for tag, r in reports.items()}
        assert pcts == {"a": 100, "b": 90, "c": 75}
        ranked = rank_motifs(list(reports.values()))
        assert [len(r.covered_firms) for r in ranked] == [4, 10, 4]
        assert ranked[0] is reports["a"]
        assert ranked[1] is reports["b"]
        assert ranked[2] is reports["c"]


def test_centralities_match_bruteforce_on_200_graphs():
    rng = random.Random(20240501)
    with Budget(120):
        checked = 0
        while checked < 200:
            n = rng.randrange(4, 51)
            pairs = random_digraph_pairs(rng, n, rng.uniform(0.03, 0.25))
            if not pairs:
                continue
            checked += 1
            snap = make_snapshot(pairs)
            nodes = sorted(snap.nodes)
            m = compute_centralities(snap)

            pr = pagerank_linear_solve(set(pairs), nodes)
            core = core_numbers_by_peeling(pairs, nodes)
            bc = betweenness_by_pair_summation(pairs, nodes)
            cl = harmonic_closeness_by_bfs(pairs, nodes)
            for v in nodes:
                assert abs(m[v].pagerank - pr[v]) < 1e-9
                assert m[v].kshell == core[v]
                assert abs(m[v].betweenness - bc[v]) < 1e-9
                assert abs(m[v].closeness - cl[v]) < 1e-9

            idx = {v: i for i, v in enumerate(nodes)}
            a = np.zeros((len(nodes), len(nodes)))
            for u, v in set(pairs):
                a[idx[u], idx[v]] = 1.0
            hub = np.array([m[v].hub for v in nodes])
            auth = np.array([m[v].authority for v in nodes])
            re_auth = a.T @ hub
            if np.linalg.norm(re_auth) > 0:
                re_auth /= np.linalg.norm(re_auth)
            re_hub = a @ re_auth
            if np.linalg.norm(re_hub) > 0:
                re_hub /= np.linalg.norm(re_hub)
            assert np.abs(re_hub - hub).max() < 1e-8
            assert np.abs(re_auth - auth).max() < 1e-8


def test_pattern_detectors_match_bruteforce():
    rng = random.Random(31337)
    with Budget(120):
        for _ in range(20):
            n = rng.randrange(4, 13)
            pairs = random_digraph_pairs(rng, n, rng.uniform(0.08, 0.3))
            if not pairs:
                continue
            snap = make_snapshot(pairs)

            max_len = min(n, 7)
            cs = detect_circles(snap, max_cycle_len=max_len)
            got = set(cs.mutual) | set(cs.revolving)
            assert got == all_simple_cycles_brute(pairs, max_len)

            for k in (3, 4):
                res = motif_census(snap, k)
                brute = census_brute(set(pairs), k)
                assert sorted(res.counts.values()) == sorted(brute.values())

            motif = Motif.from_edges([(0, 1), (1, 2)])
            res = match_motif(snap, motif)
            target = canonical_by_permutation(3, [(0, 1), (1, 2)])
            pset = set(pairs)
            expected = set()
            for combo in itertools.combinations(sorted(snap.nodes), 3):
                induced = [(a, b) for a, b in pset if a in combo and b in combo]
                if not weakly_connected(combo, induced):
                    continue
                idx = {x: i for i, x in enumerate(combo)}
                relabeled = [(idx[a], idx[b]) for a, b in induced]
                if canonical_by_permutation(3, relabeled) == target:
                    expected.add(combo)
            assert set(res.embeddings) == expected


def test_contagion_reachability_fixture():
    with Budget(1):
        snap = make_snapshot(FIG7_EDGES)
        reached = contagion_set(snap, "A")
        assert reached == frozenset({"B", "C", "D", "E"})
        assert not reached & {"F", "G", "H"}


def test_no_temporal_leakage_over_50_probes():
    from glens.graphcore import GuaranteeEdge, LoanContract, RepaymentEvent, build_network

    with Budget(60):
        cfg = SyntheticConfig(community_count=3, community_size_range=(6, 8), seed=5)
        base = join_to_network(generate_synthetic(cfg)[0])
        plan = build_windows(*base.date_span(), 4, 4)
        wt = plan.tuples[1]
        cutoff = wt.predict.end  # everything at/after this date must be invisible

        def pipeline(net):
            m_train = compute_centralities(snapshot(net, wt.train.end - timedelta(days=1)))
            m_score = compute_centralities(snapshot(net, cutoff - timedelta(days=1)))
            vecs, labels = [], []
            for ent in window_population(net, wt.train):
                try:
                    vecs.append(extract_features(net, ent, wt.train.end, m_train))
                except NoActiveLoan:
                    continue
                labels.append(label_defaults(net, ent, wt.observe))
            score = {}
            for ent in window_population(net, wt.predict):
                try:
                    score[ent] = extract_features(net, ent, cutoff, m_score).values
                except NoActiveLoan:
                    continue
            enc = FeatureEncoder().fit(vecs)
            model = train(enc.transform(vecs), np.array(labels, float),
                          BoostParams(rounds=5, max_depth=2))
            return ([v.values for v in vecs], labels, score, model.fingerprint())

        base_out = pipeline(base)
        rng = random.Random(41)
        ents = sorted(base.enterprises)
        contracts = list(base.contracts.values())
        for probe in range(50):
            edges = list(base.edges)
            cons = list(contracts)
            reps = list(base.repayments)
            offset = timedelta(days=rng.randrange(0, 120))  # includes the cutoff itself
            kind = probe % 3
            if kind == 0:
                victim = rng.choice(cons)
                reps.append(RepaymentEvent(victim.contract_id, cutoff + offset,
                                           None, 0.0, True))
            elif kind == 1:
                g, b = rng.sample(ents, 2)
                edges.append(GuaranteeEdge(g, b, 500.0, rng.choice(cons).contract_id,
                                           cutoff + offset))
            else:
                borrower = rng.choice(ents)
                cid = f"future_{probe}"
                start = cutoff + offset
                cons.append(LoanContract(cid, borrower, 300.0, start,
                                         ((start + timedelta(days=90), 300.0),)))
                reps.append(RepaymentEvent(cid, start + timedelta(days=90),
                                           None, 0.0, True))
            mutated = build_network(list(base.enterprises.values()), edges, cons, reps)
            assert pipeline(mutated) == base_out


def test_boosting_guarantees():
    with Budget(180):
        # objective never increases across rounds, on 20 random datasets
        for seed in range(20):
            gen = np.random.default_rng(seed)
            x = gen.normal(size=(120, 6))
            y = (x[:, 0] + gen.normal(scale=1.5, size=120) > 0).astype(float)
            if y.sum() in (0, len(y)):
                continue
            model = train(x, y, BoostParams(rounds=30))
            obj = model.training_objective
            assert all(b <= a + 1e-9 for a, b in zip(obj, obj[1:]))

        # extreme shrinkage forces all leaf contributions to vanish
        gen = np.random.default_rng(99)
        x = gen.normal(size=(150, 5))
        y = (x[:, 0] > 0).astype(float)
        heavy = train(x, y, BoostParams(rounds=10, lam=1e9))
        assert all(abs(w) < 1e-6 for w in heavy.leaf_weights())

        # planted-signal rolling run is predictive end to end
        cfg = SyntheticConfig(community_count=8, community_size_range=(12, 18),
                              contagion_seed_fraction=0.2,
                              distressed_default_rate=0.9,
                              healthy_default_rate=0.01, seed=2024)
        net = join_to_network(generate_synthetic(cfg)[0])
        plan = build_windows(*net.date_span(), 3, 3)
        result = rolling_predict(net, plan, BoostParams(rounds=40))
        aucs = [r.auc for r in result.reports if r.auc is not None]
        assert aucs
        assert float(np.mean(aucs)) > 0.80

        # the same protocol with shuffled training labels collapses to chance
        cache = {}

        def metrics_at(cut):
            if cut not in cache:
                cache[cut] = compute_centralities(snapshot(net, cut - timedelta(days=1)))
            return cache[cut]

        rng = random.Random(77)
        shuffled_aucs = []
        for wt in plan.tuples:
            vecs, labels = [], []
            for ent in window_population(net, wt.train):
                try:
                    vecs.append(extract_features(net, ent, wt.train.end,
                                                 metrics_at(wt.train.end)))
                except NoActiveLoan:
                    continue
                labels.append(label_defaults(net, ent, wt.observe))
            if not vecs:
                continue
            rng.shuffle(labels)
            enc = FeatureEncoder().fit(vecs)
            try:
                model = train(enc.transform(vecs), np.array(labels, float),
                              BoostParams(rounds=40))
            except DegenerateLabels:
                continue
            svecs, sents = [], []
            for ent in window_population(net, wt.predict):
                try:
                    svecs.append(extract_features(net, ent, wt.predict.end,
                                                  metrics_at(wt.predict.end)))
                except NoActiveLoan:
                    continue
                sents.append(ent)
            probs = model.predict_proba(enc.transform(svecs))
            truth = [label_defaults(net, e, wt.evaluate) for e in sents]
            score = auc_score(truth, probs)
            if score is not None:
                shuffled_aucs.append(score)
        assert 0.45 <= float(np.mean(shuffled_aucs)) <= 0.55


def test_thirty_edit_replay_is_deterministic():
    from glens.community import detect_communities, find_spanners, merge, reassign, replay, split
    from glens.errors import NotACut, NotAdjacent, NotASpanner, NotNeighbours
    from glens.graphcore import simple_view

    with Budget(10):
        cfg = SyntheticConfig(community_count=5, community_size_range=(8, 12), seed=13)
        net = join_to_network(generate_synthetic(cfg)[0])
        mid = net.date_span()[0] + timedelta(days=400)
        snap = snapshot(net, mid)
        initial = detect_communities(snap)
        cut_log = []
        cuts = CutSession(snap)
        undirected = simple_view(snap, "undirected")
        directed_pairs = sorted(simple_view(snap, "directed").weights)
        rng = random.Random(2718)
        current = initial
        ops = 0
        while ops < 30:
            choice = rng.choice(["merge", "reassign", "split", "cut"])
            try:
                if choice == "merge":
                    labels = sorted(set(current.labels.values()))
                    if len(labels) < 2:
                        continue
                    a, b = rng.sample(labels, 2)
                    current = merge(current, snap, a, b)
                elif choice == "reassign":
                    spanners = find_spanners(current, snap)
                    if not spanners:
                        continue
                    node = rng.choice(sorted(spanners))
                    current = reassign(current, snap, node, rng.choice(spanners[node]))
                elif choice == "split":
                    labels = sorted(set(current.labels.values()))
                    label = rng.choice(labels)
                    members = set(current.members(label))
                    inside = [e for e in undirected.weights
                              if e[0] in members and e[1] in members]
                    if not inside:
                        continue
                    current = split(current, snap, label,
                                    rng.sample(inside, min(2, len(inside))))
                else:
                    edge = rng.choice(directed_pairs)
                    if edge in cuts.removed_edges:
                        continue
                    cuts.apply_cut(edge)
                    cut_log.append(edge)
            except (NotNeighbours, NotASpanner, NotAdjacent, NotACut):
                continue
            ops += 1

        seed_node = sorted(snap.nodes)[0]
        want_partition = partition_fingerprint(current)
        want_paths = propagation_fingerprint(cuts.enumerate_paths(seed_node))

        replayed = replay(initial, snap, current.history)
        assert partition_fingerprint(replayed) == want_partition
        fresh_cuts = CutSession(snap)
        for edge in cut_log:
            fresh_cuts.apply_cut(edge)
        assert propagation_fingerprint(fresh_cuts.enumerate_paths(seed_node)) == want_paths


def test_planted_structures_fully_recovered():
    with Budget(120):
        feed_forward = ((0, 1), (0, 2), (1, 2))
        cfg = SyntheticConfig(
            community_count=4, community_size_range=(10, 14),
            mutual_pairs=3, revolving_cycles=2, revolving_length_range=(3, 5),
            stars=2, star_borrowers=3, joint_liability=2, joint_guarantors=2,
            planted_motifs=(feed_forward,), planted_motif_count=3, seed=99,
        )
        tables, truth = generate_synthetic(cfg)
        net = join_to_network(tables)
        mid = net.date_span()[0] + timedelta(days=400)
        snap = snapshot(net, mid)

        circles = detect_circles(snap, max_cycle_len=8)
        mutual = set(circles.mutual)
        for a, b in truth.mutual_pairs:
            assert tuple(sorted((a, b))) in mutual

        def rotate_to_min(cycle):
            i = cycle.index(min(cycle))
            return tuple(cycle[i:] + cycle[:i])

        revolving = set(circles.revolving)
        for cycle in truth.revolving_cycles:
            assert rotate_to_min(list(cycle)) in revolving

        for star in truth.stars:
            assert any(center == star["center"] and set(star["borrowers"]) <= set(bs)
                       for center, bs in circles.stars)
        for jl in truth.joint_liability:
            assert any(b == jl["borrower"] and set(jl["guarantors"]) <= set(gs)
                       for b, gs in circles.joint_liability)

        embeddings = set(match_motif(snap, Motif.from_edges(feed_forward)).embeddings)
        for planted in truth.motif_embeddings:
            assert tuple(sorted(planted["nodes"])) in embeddings
