"""Default-risk prediction under the rolling-window protocol.

A window tuple is (train, observe, predict, evaluate): the model is fitted on
train-window features against observe-window labels, scores the
observe-window population (predict == observe), and is judged against
evaluate-window labels. Feature extraction is cutoff-consistent: nothing
dated at or after the cutoff may influence a feature, the categorical
encoder, or the fitted model.

The learner is a second-order gradient-boosted tree ensemble with logistic
loss, leaf-count penalty gamma and leaf-weight L2 lambda; missing values are
routed by a learned default direction per split.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional

import numpy as np

from .errors import DegenerateLabels, NoActiveLoan, SchemaMismatch, SpanTooShort
from .graphcore import GuaranteeNetwork, snapshot
from .metrics import compute_centralities

NUMERIC_FIELDS = (
    "registered_capital", "employee_count", "credit_rating",
    "cb_default_count", "cb_default_amount", "cb_total_loan_amount",
    "cb_loan_count", "cb_default_rate",
    "al_active_amount", "al_active_count",
    "ns_hub", "ns_authority", "ns_pagerank", "ns_kshell",
    "ns_eigenvector", "ns_betweenness", "ns_closeness",
)
CATEGORICAL_FIELDS = (
    "business_nature", "enterprise_scale", "sector",
    "al_capital_return_type", "al_interest_return_type",
)
ALL_FIELDS = NUMERIC_FIELDS + CATEGORICAL_FIELDS


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def _add_months(d: date, months: int) -> date:
    m = d.month - 1 + months
    y = d.year + m // 12
    m = m % 12 + 1
    day = min(d.day, [31, 29 if y % 4 == 0 and (y % 100 != 0 or y % 400 == 0) else 28,
                      31, 30, 31, 30, 31, 31, 30, 31, 30, 31][m - 1])
    return date(y, m, day)


@dataclass(frozen=True)
class Window:
    start: date  # half-open [start, end)
    end: date

    def contains(self, d: date) -> bool:
        return self.start <= d < self.end


@dataclass(frozen=True)
class WindowTuple:
    train: Window
    observe: Window
    predict: Window  # == observe: scoring features come from the labeled window
    evaluate: Window

    @property
    def window_id(self) -> str:
        return f"{self.train.start.isoformat()}..{self.evaluate.end.isoformat()}"


@dataclass(frozen=True)
class WindowPlan:
    tuples: tuple
    width_months: int
    stride_months: int


def build_windows(span_start: date, span_end: date, width_months: int = 3,
                  stride_months: int = 3) -> WindowPlan:
    tuples = []
    t = span_start
    while True:
        train = Window(t, _add_months(t, width_months))
        observe = Window(train.end, _add_months(train.end, width_months))
        evaluate = Window(observe.end, _add_months(observe.end, width_months))
        if evaluate.end > span_end:
            break
        tuples.append(WindowTuple(train=train, observe=observe,
                                  predict=observe, evaluate=evaluate))
        t = _add_months(t, stride_months)
    if not tuples:
        raise SpanTooShort(
            f"span {span_start}..{span_end} holds no "
            f"{width_months}-month train/observe/evaluate tuple"
        )
    return WindowPlan(tuples=tuple(tuples), width_months=width_months,
                      stride_months=stride_months)


# ---------------------------------------------------------------------------
# Features and labels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureVector:
    enterprise_id: str
    cutoff: date
    values: dict  # field -> float | str | None


def active_contracts(network: GuaranteeNetwork, enterprise: str, cutoff: date):
    """Contracts of the enterprise in execution strictly before the cutoff."""
    out = []
    for c in network.contracts.values():
        if c.borrower_id == enterprise and c.start_date < cutoff and c.end_date >= cutoff:
            out.append(c)
    return out


def window_population(network: GuaranteeNetwork, window: Window):
    """Enterprises with a loan in execution at some point inside the window."""
    out = set()
    for c in network.contracts.values():
        if c.start_date < window.end and c.end_date >= window.start:
            out.add(c.borrower_id)
    return sorted(out)


def extract_features(network: GuaranteeNetwork, enterprise: str, cutoff: date,
                     node_metrics: Optional[dict] = None) -> FeatureVector:
    """Hybrid feature vector; every field depends only on records dated < cutoff."""
    actives = active_contracts(network, enterprise, cutoff)
    if not actives:
        raise NoActiveLoan(f"{enterprise} has no loan in execution at {cutoff}")
    ent = network.enterprises[enterprise]

    own_contracts = [c for c in network.contracts.values()
                     if c.borrower_id == enterprise and c.start_date < cutoff]
    own_ids = {c.contract_id for c in own_contracts}
    past = [r for r in network.repayments
            if r.contract_id in own_ids and r.due_date < cutoff]
    defaults = [r for r in past if r.default_flag]
    default_amount = 0.0
    plans = {c.contract_id: dict(c.installments) for c in own_contracts}
    for r in defaults:
        default_amount += plans.get(r.contract_id, {}).get(r.due_date, 0.0)

    if node_metrics is None:
        node_metrics = compute_centralities(snapshot(network, cutoff - timedelta(days=1)))
    nm = node_metrics.get(enterprise)

    values = {
        "business_nature": ent.business_nature,
        "registered_capital": ent.registered_capital,
        "enterprise_scale": ent.enterprise_scale,
        "employee_count": float(ent.employee_count),
        "sector": ent.sector,
        "credit_rating": float(ent.credit_rating),
        "cb_default_count": float(len(defaults)),
        "cb_default_amount": default_amount,
        "cb_total_loan_amount": sum(c.loan_amount for c in own_contracts),
        "cb_loan_count": float(len(own_contracts)),
        "cb_default_rate": (len(defaults) / len(past)) if past else 0.0,
        "al_active_amount": sum(c.loan_amount for c in actives),
        "al_active_count": float(len(actives)),
        "al_capital_return_type": actives[0].capital_return_type,
        "al_interest_return_type": actives[0].interest_return_type,
        "ns_hub": nm.hub if nm else 0.0,
        "ns_authority": nm.authority if nm else 0.0,
        "ns_pagerank": nm.pagerank if nm else 0.0,
        "ns_kshell": float(nm.kshell) if nm else 0.0,
        "ns_eigenvector": nm.eigenvector if nm else 0.0,
        "ns_betweenness": nm.betweenness if nm else 0.0,
        "ns_closeness": nm.closeness if nm else 0.0,
    }
    return FeatureVector(enterprise_id=enterprise, cutoff=cutoff, values=values)


def label_defaults(network: GuaranteeNetwork, enterprise: str, window: Window,
                   grace_days: int = 0) -> bool:
    """True iff an installment due inside the window is unpaid or paid late."""
    own = {c.contract_id for c in network.contracts.values() if c.borrower_id == enterprise}
    for r in network.repayments:
        if r.contract_id in own and window.contains(r.due_date):
            if r.paid_date is None or (r.paid_date - r.due_date).days > grace_days:
                return True
    return False


@dataclass
class FeatureEncoder:
    """Ordinal encoder with a frozen dictionary built from training rows only."""
    categories: dict = field(default_factory=dict)  # field -> {value: code}

    def fit(self, vectors):
        for f in CATEGORICAL_FIELDS:
            seen = sorted({v.values[f] for v in vectors if v.values[f] not in (None, "")})
            self.categories[f] = {val: i for i, val in enumerate(seen)}
        return self

    def transform(self, vectors) -> np.ndarray:
        rows = np.empty((len(vectors), len(ALL_FIELDS)))
        for i, v in enumerate(vectors):
            for j, f in enumerate(NUMERIC_FIELDS):
                val = v.values[f]
                rows[i, j] = np.nan if val is None else float(val)
            for j, f in enumerate(CATEGORICAL_FIELDS):
                code = self.categories.get(f, {}).get(v.values[f])
                rows[i, len(NUMERIC_FIELDS) + j] = np.nan if code is None else float(code)
        return rows

    def as_dict(self):
        return {"categories": self.categories}


# ---------------------------------------------------------------------------
# Boosted trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    gamma: float = 0.0
    lam: float = 1.0
    positive_weight: Optional[float] = None  # None -> negatives/positives


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _leaf(weight):
    return {"leaf": weight}


def _build_tree(x, g, h, depth, max_depth, gamma, lam):
    G, H = g.sum(), h.sum()
    if depth >= max_depth or len(g) < 2:
        return _leaf(-G / (H + lam))
    best = None  # (gain, feature, threshold, missing_left)
    n_features = x.shape[1]
    for f in range(n_features):
        col = x[:, f]
        missing = np.isnan(col)
        present = ~missing
        if not present.any():
            continue
        vals = col[present]
        order = np.argsort(vals, kind="stable")
        sorted_vals = vals[order]
        gp, hp = g[present][order], h[present][order]
        g_cum, h_cum = np.cumsum(gp), np.cumsum(hp)
        g_miss, h_miss = g[missing].sum(), h[missing].sum()
        distinct = np.nonzero(np.diff(sorted_vals) > 0)[0]
        for cut in distinct:
            thr = (sorted_vals[cut] + sorted_vals[cut + 1]) / 2.0
            gl, hl = g_cum[cut], h_cum[cut]
            gr, hr = g_cum[-1] - gl, h_cum[-1] - hl
            for missing_left in (True, False):
                if missing_left:
                    gl2, hl2, gr2, hr2 = gl + g_miss, hl + h_miss, gr, hr
                else:
                    gl2, hl2, gr2, hr2 = gl, hl, gr + g_miss, hr + h_miss
                gain = 0.5 * (gl2 * gl2 / (hl2 + lam) + gr2 * gr2 / (hr2 + lam)
                              - G * G / (H + lam)) - gamma
                key = (-gain, f, thr, not missing_left)
                if gain > 1e-12 and (best is None or key < best[0]):
                    best = (key, f, thr, missing_left)
    if best is None:
        return _leaf(-G / (H + lam))
    _, f, thr, missing_left = best
    col = x[:, f]
    missing = np.isnan(col)
    go_left = np.where(missing, missing_left, col < thr)
    return {
        "feature": int(f),
        "threshold": float(thr),
        "missing_left": bool(missing_left),
        "left": _build_tree(x[go_left], g[go_left], h[go_left], depth + 1, max_depth, gamma, lam),
        "right": _build_tree(x[~go_left], g[~go_left], h[~go_left], depth + 1, max_depth, gamma, lam),
    }


def _tree_predict(tree, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        node = tree
        while "leaf" not in node:
            v = x[i, node["feature"]]
            if np.isnan(v):
                node = node["left"] if node["missing_left"] else node["right"]
            else:
                node = node["left"] if v < node["threshold"] else node["right"]
        out[i] = node["leaf"]
    return out


def _tree_leaves(tree):
    if "leaf" in tree:
        return [tree["leaf"]]
    return _tree_leaves(tree["left"]) + _tree_leaves(tree["right"])


@dataclass
class BoostedModel:
    trees: list
    params: BoostParams
    n_features: int
    encoder: Optional[FeatureEncoder] = None
    training_objective: list = field(default_factory=list)  # per round, incl. round 0

    def leaf_weights(self):
        return [w for t in self.trees for w in _tree_leaves(t)]

    def margin(self, x: np.ndarray) -> np.ndarray:
        z = np.zeros(x.shape[0])
        for tree in self.trees:
            z += self.params.learning_rate * _tree_predict(tree, x)
        return z

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise SchemaMismatch(
                f"expected {self.n_features} features, got {x.shape[1] if x.ndim == 2 else 'non-2d'}"
            )
        return _sigmoid(self.margin(x))

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"trees": self.trees, "n_features": self.n_features,
             "encoder": self.encoder.as_dict() if self.encoder else None},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def as_dict(self):
        return {
            "version": 1,
            "trees": self.trees,
            "n_features": self.n_features,
            "params": {
                "rounds": self.params.rounds, "max_depth": self.params.max_depth,
                "learning_rate": self.params.learning_rate,
                "gamma": self.params.gamma, "lam": self.params.lam,
                "positive_weight": self.params.positive_weight,
            },
            "encoder": self.encoder.as_dict() if self.encoder else None,
        }

    @classmethod
    def from_dict(cls, data):
        enc = None
        if data.get("encoder"):
            enc = FeatureEncoder(categories=data["encoder"]["categories"])
        return cls(
            trees=data["trees"],
            params=BoostParams(**data["params"]),
            n_features=data["n_features"],
            encoder=enc,
        )


def _objective(y, w, z, trees, gamma, lam, leaf_scale=1.0):
    """Weighted logloss plus complexity of the applied (shrunk) leaf weights."""
    p = _sigmoid(z)
    eps = 1e-15
    loss = -(w * (y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))).sum()
    reg = 0.0
    for t in trees:
        leaves = _tree_leaves(t)
        reg += gamma * len(leaves)
        reg += 0.5 * lam * sum((leaf_scale * v) ** 2 for v in leaves)
    return loss + reg


def train(x: np.ndarray, y: np.ndarray, params: BoostParams = BoostParams(),
          encoder: Optional[FeatureEncoder] = None) -> BoostedModel:
    """Fit the ensemble; deterministic for fixed inputs.

    Rounds that would increase the regularized objective are discarded and
    training stops there, so the recorded objective is non-increasing.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    pos, neg = int(y.sum()), int((1 - y).sum())
    if pos == 0 or neg == 0:
        raise DegenerateLabels(f"need both classes, got {pos} positives / {neg} negatives")
    pw = params.positive_weight if params.positive_weight is not None else neg / pos
    w = np.where(y == 1, pw, 1.0)

    model = BoostedModel(trees=[], params=params, n_features=x.shape[1], encoder=encoder)
    z = np.zeros(len(y))
    obj = _objective(y, w, z, model.trees, params.gamma, params.lam,
                     params.learning_rate)
    model.training_objective.append(obj)
    for _ in range(params.rounds):
        p = _sigmoid(z)
        g = w * (p - y)
        h = np.maximum(w * p * (1 - p), 1e-16)
        tree = _build_tree(x, g, h, 0, params.max_depth, params.gamma, params.lam)
        z_new = z + params.learning_rate * _tree_predict(tree, x)
        obj_new = _objective(y, w, z_new, model.trees + [tree], params.gamma,
                             params.lam, params.learning_rate)
        if obj_new > obj + 1e-9:
            break
        model.trees.append(tree)
        z, obj = z_new, obj_new
        model.training_objective.append(obj)
    return model


def predict(model: BoostedModel, x: np.ndarray) -> np.ndarray:
    return model.predict_proba(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationReport:
    window_id: str
    auc: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    tp: int
    fp: int
    tn: int
    fn: int


def auc_score(y, scores) -> Optional[float]:
    """Rank-statistic AUC with midrank tie handling."""
    y = np.asarray(y, dtype=float)
    scores = np.asarray(scores, dtype=float)
    pos, neg = int(y.sum()), int(len(y) - y.sum())
    if pos == 0 or neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = ranks[y == 1].sum()
    return (pos_rank_sum - pos * (pos + 1) / 2) / (pos * neg)


def evaluate(window_id, y, scores, threshold=0.5) -> EvaluationReport:
    y = np.asarray(y, dtype=bool)
    pred = np.asarray(scores) >= threshold
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    tn = int((~pred & ~y).sum())
    fn = int((~pred & y).sum())
    return EvaluationReport(
        window_id=window_id,
        auc=auc_score(y, scores),
        precision=(tp / (tp + fp)) if tp + fp else None,
        recall=(tp / (tp + fn)) if tp + fn else None,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


@dataclass
class RollingResult:
    predictions: list  # (enterprise, window_end_date, probability)
    reports: list
    models: dict  # window_id -> BoostedModel
    skipped: list  # (window_id, reason)


def rolling_predict(network: GuaranteeNetwork, plan: WindowPlan,
                    params: BoostParams = BoostParams(), grace_days: int = 0) -> RollingResult:
    """Train/score/evaluate every window tuple of the plan."""
    result = RollingResult(predictions=[], reports=[], models={}, skipped=[])
    metrics_cache = {}

    def metrics_at(cutoff):
        if cutoff not in metrics_cache:
            metrics_cache[cutoff] = compute_centralities(
                snapshot(network, cutoff - timedelta(days=1))
            )
        return metrics_cache[cutoff]

    for wt in plan.tuples:
        train_pop = window_population(network, wt.train)
        train_cut = wt.train.end
        vectors, labels = [], []
        for ent in train_pop:
            try:
                vec = extract_features(network, ent, train_cut, metrics_at(train_cut))
            except NoActiveLoan:
                continue
            vectors.append(vec)
            labels.append(label_defaults(network, ent, wt.observe, grace_days))
        if not vectors:
            result.skipped.append((wt.window_id, "empty training population"))
            continue
        encoder = FeatureEncoder().fit(vectors)
        x = encoder.transform(vectors)
        y = np.array(labels, dtype=float)
        try:
            model = train(x, y, params, encoder)
        except DegenerateLabels as exc:
            warnings.warn(f"window {wt.window_id} skipped: {exc}")
            result.skipped.append((wt.window_id, str(exc)))
            continue
        result.models[wt.window_id] = model

        score_cut = wt.predict.end
        score_pop = window_population(network, wt.predict)
        score_vectors, score_ents = [], []
        for ent in score_pop:
            try:
                vec = extract_features(network, ent, score_cut, metrics_at(score_cut))
            except NoActiveLoan:
                continue
            score_vectors.append(vec)
            score_ents.append(ent)
        if not score_vectors:
            continue
        probs = model.predict_proba(encoder.transform(score_vectors))
        for ent, p in zip(score_ents, probs):
            result.predictions.append((ent, wt.predict.end, float(p)))
        eval_labels = [label_defaults(network, ent, wt.evaluate, grace_days)
                       for ent in score_ents]
        result.reports.append(evaluate(wt.window_id, eval_labels, probs))
    return result
