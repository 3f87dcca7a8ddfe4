import random
from datetime import date, timedelta

import numpy as np
import pytest

from glens.errors import DegenerateLabels, NoActiveLoan, SchemaMismatch, SpanTooShort
from glens.graphcore import Enterprise, GuaranteeEdge, LoanContract, RepaymentEvent, build_network
from glens.riskmodel import (
    BoostParams,
    BoostedModel,
    FeatureEncoder,
    Window,
    auc_score,
    build_windows,
    evaluate,
    extract_features,
    label_defaults,
    rolling_predict,
    train,
)


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

def test_monthly_windows_over_a_year():
    plan = build_windows(date(2013, 1, 1), date(2014, 12, 31),
                         width_months=3, stride_months=1)
    # train+observe+evaluate span 9 months; last tuple starts 2014-03
    assert len(plan.tuples) == 15
    first = plan.tuples[0]
    assert first.train == Window(date(2013, 1, 1), date(2013, 4, 1))
    assert first.observe == Window(date(2013, 4, 1), date(2013, 7, 1))
    assert first.predict == first.observe
    assert first.evaluate == Window(date(2013, 7, 1), date(2013, 10, 1))


def test_windows_are_half_open():
    w = Window(date(2013, 1, 1), date(2013, 4, 1))
    assert w.contains(date(2013, 1, 1))
    assert not w.contains(date(2013, 4, 1))


def test_span_too_short():
    with pytest.raises(SpanTooShort):
        build_windows(date(2013, 1, 1), date(2013, 6, 1), width_months=3)


def test_month_end_clamping():
    plan = build_windows(date(2013, 1, 31), date(2014, 12, 31),
                         width_months=1, stride_months=1)
    assert plan.tuples[0].train.end == date(2013, 2, 28)


# ---------------------------------------------------------------------------
# features, labels, leakage
# ---------------------------------------------------------------------------

def feature_fixture_network(extra_repayment=None, extra_edge=None):
    ents = [Enterprise(id="a", registered_capital=50.0, sector="trade"),
            Enterprise(id="b", registered_capital=70.0, sector="trade")]
    contracts = [
        LoanContract("c1", "a", 100.0, date(2013, 1, 1),
                     ((date(2013, 3, 1), 50.0), (date(2013, 9, 1), 50.0))),
        LoanContract("c2", "b", 200.0, date(2013, 1, 1),
                     ((date(2013, 12, 1), 200.0),)),
    ]
    repayments = [
        RepaymentEvent("c1", date(2013, 3, 1), None, 0.0, True),
        RepaymentEvent("c2", date(2013, 12, 1), date(2013, 12, 1), 200.0, False),
    ]
    if extra_repayment:
        repayments.append(extra_repayment)
    edges = [GuaranteeEdge("b", "a", 80.0, "c1", date(2013, 1, 1))]
    if extra_edge:
        edges.append(extra_edge)
    return build_network(ents, edges, contracts, repayments)


def test_feature_values():
    net = feature_fixture_network()
    vec = extract_features(net, "a", date(2013, 6, 1))
    v = vec.values
    assert v["cb_default_count"] == 1.0
    assert v["cb_default_amount"] == 50.0
    assert v["al_active_amount"] == 100.0
    assert v["ns_authority"] > 0.0  # a is guaranteed by b


def test_no_active_loan_raises():
    net = feature_fixture_network()
    with pytest.raises(NoActiveLoan):
        extract_features(net, "a", date(2014, 6, 1))


def test_future_repayment_invisible():
    cutoff = date(2013, 6, 1)
    base = extract_features(feature_fixture_network(), "a", cutoff)
    poisoned = feature_fixture_network(
        extra_repayment=RepaymentEvent("c1", date(2013, 9, 1), None, 0.0, True))
    assert extract_features(poisoned, "a", cutoff).values == base.values


def test_future_guarantee_invisible():
    cutoff = date(2013, 6, 1)
    base = extract_features(feature_fixture_network(), "a", cutoff)
    future = feature_fixture_network(
        extra_edge=GuaranteeEdge("b", "a", 999.0, "c1", date(2013, 8, 1)))
    assert extract_features(future, "a", cutoff).values == base.values
    # the same edge placed before the cutoff does move network features
    past = feature_fixture_network(
        extra_edge=GuaranteeEdge("a", "b", 999.0, "c2", date(2013, 2, 1)))
    assert extract_features(past, "a", cutoff).values != base.values


def test_label_defaults_grace_days():
    ents = [Enterprise(id="a")]
    contracts = [LoanContract("c1", "a", 100.0, date(2013, 1, 1),
                              ((date(2013, 3, 1), 100.0),))]
    late = [RepaymentEvent("c1", date(2013, 3, 1), date(2013, 3, 6), 100.0, False)]
    net = build_network(ents, [], contracts, late)
    w = Window(date(2013, 2, 1), date(2013, 4, 1))
    assert label_defaults(net, "a", w, grace_days=0)
    assert not label_defaults(net, "a", w, grace_days=7)
    # due date outside the window never counts
    assert not label_defaults(net, "a", Window(date(2013, 4, 1), date(2013, 6, 1)))


def test_encoder_unseen_category_is_nan():
    from glens.riskmodel import FeatureVector, ALL_FIELDS

    def vec(sector):
        values = {f: 0.0 for f in ALL_FIELDS}
        values.update(business_nature="x", enterprise_scale="s", sector=sector,
                      al_capital_return_type="r", al_interest_return_type="r")
        return FeatureVector("e", date(2013, 1, 1), values)

    enc = FeatureEncoder().fit([vec("trade"), vec("agri")])
    x = enc.transform([vec("trade"), vec("mystery")])
    sector_col = x[:, list(ALL_FIELDS).index("sector")]
    assert not np.isnan(sector_col[0])
    assert np.isnan(sector_col[1])


# ---------------------------------------------------------------------------
# boosting
# ---------------------------------------------------------------------------

def separable_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 4))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(float)
    return x, y


def test_objective_non_increasing():
    x, y = separable_data()
    model = train(x, y, BoostParams(rounds=40))
    obj = model.training_objective
    for a, b in zip(obj, obj[1:]):
        assert b <= a + 1e-9


def test_separable_auc_high():
    x, y = separable_data()
    model = train(x, y, BoostParams(rounds=60))
    assert auc_score(y, model.predict_proba(x)) > 0.95


def test_extreme_regularization_shrinks_leaves():
    x, y = separable_data()
    model = train(x, y, BoostParams(rounds=10, lam=1e9))
    for wgt in model.leaf_weights():
        assert abs(wgt) < 1e-6


def test_degenerate_labels_rejected():
    x, _ = separable_data(50)
    with pytest.raises(DegenerateLabels):
        train(x, np.ones(50))


def test_training_deterministic():
    x, y = separable_data()
    m1 = train(x, y, BoostParams(rounds=20))
    m2 = train(x, y, BoostParams(rounds=20))
    assert m1.fingerprint() == m2.fingerprint()
    assert np.array_equal(m1.predict_proba(x), m2.predict_proba(x))


def test_missing_values_routed():
    rng = np.random.default_rng(3)
    x, y = separable_data(300, seed=3)
    x[rng.random(x.shape) < 0.2] = np.nan
    model = train(x, y, BoostParams(rounds=40))
    probs = model.predict_proba(x)
    assert np.isfinite(probs).all()
    assert auc_score(y, probs) > 0.8


def test_model_serialization_round_trip():
    x, y = separable_data(100, seed=5)
    model = train(x, y, BoostParams(rounds=15))
    clone = BoostedModel.from_dict(model.as_dict())
    assert np.allclose(model.predict_proba(x), clone.predict_proba(x))
    assert clone.fingerprint() == model.fingerprint()


def test_schema_mismatch():
    x, y = separable_data(80)
    model = train(x, y)
    with pytest.raises(SchemaMismatch):
        model.predict_proba(np.zeros((3, 7)))


def test_empty_model_predicts_half():
    x, y = separable_data(50)
    model = train(x, y, BoostParams(rounds=0))
    assert np.allclose(model.predict_proba(x), 0.5)


def test_auc_score_basics():
    assert auc_score([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc_score([1, 1, 0, 0], [0.1, 0.2, 0.8, 0.9]) == 0.0
    assert auc_score([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5
    assert auc_score([1, 1], [0.3, 0.4]) is None


def test_evaluate_confusion_counts():
    rep = evaluate("w", [1, 1, 0, 0], [0.9, 0.2, 0.8, 0.1])
    assert (rep.tp, rep.fn, rep.fp, rep.tn) == (1, 1, 1, 1)
    assert rep.precision == 0.5 and rep.recall == 0.5


def test_shuffled_labels_near_chance():
    rng = np.random.default_rng(11)
    x, y = separable_data(400, seed=11)
    shuffled = y.copy()
    rng.shuffle(shuffled)
    model = train(x, shuffled, BoostParams(rounds=10, max_depth=2))
    holdout_x, holdout_y = separable_data(400, seed=12)
    holdout_shuffled = holdout_y.copy()
    rng.shuffle(holdout_shuffled)
    score = auc_score(holdout_shuffled, model.predict_proba(holdout_x))
    assert 0.4 < score < 0.6


# ---------------------------------------------------------------------------
# rolling pipeline
# ---------------------------------------------------------------------------

def test_rolling_predict_on_synthetic():
    from glens.ingest import SyntheticConfig, generate_synthetic, join_to_network

    cfg = SyntheticConfig(community_count=4, community_size_range=(8, 12), seed=3)
    tables, _ = generate_synthetic(cfg)
    net = join_to_network(tables)
    span = net.date_span()
    plan = build_windows(span[0], span[1], width_months=4, stride_months=4)
    result = rolling_predict(net, plan, BoostParams(rounds=25))
    assert result.predictions
    assert all(0.0 <= p <= 1.0 for _, _, p in result.predictions)
    assert len(result.reports) + len(result.skipped) <= len(plan.tuples)
    for r in result.reports:
        assert r.tp + r.fp + r.tn + r.fn > 0
