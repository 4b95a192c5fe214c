"""Per-event binary actionable predictors: boosted gain-ratio decision trees.

One model is trained per event type on a balanced corpus. Trees split numeric
features by threshold and categorical features by value subset; split choice
is information-gain-ratio. Stages are combined AdaBoost.M1-style: misclassified
rows are exponentially up-weighted and each stage votes with weight
ln((1-err)/err). Training is fully deterministic for a given corpus/config.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Corpus
from .dom import FEATURE_KINDS, FEATURE_NAMES, EventType, FeatureVector
from .errors import DataError, EmptyClassError, ModelFormatError, SchemaMismatchError

MODEL_SCHEMA_VERSION = 1

_GAIN_EPS = 1e-12
# Stage weight assigned when a tree reaches zero weighted error.
_ZERO_ERROR_ALPHA = math.log((1.0 - 1e-10) / 1e-10)

_CATEGORICAL_IDX = tuple(
    i for i, n in enumerate(FEATURE_NAMES) if FEATURE_KINDS[n] in ("str", "bool")
)
_NUMERIC_IDX = tuple(
    i for i, n in enumerate(FEATURE_NAMES) if FEATURE_KINDS[n] in ("float", "int")
)


@dataclass(frozen=True)
class TrainConfig:
    boosting_rounds: int = 10
    min_leaf_size: int = 5
    max_depth: int = 20

    def __post_init__(self) -> None:
        if self.boosting_rounds < 1 or self.min_leaf_size < 1 or self.max_depth < 1:
            raise DataError("boosting_rounds, min_leaf_size and max_depth must be >= 1")


@dataclass
class TreeLeaf:
    label: bool
    probability: float  # weighted probability of `label` among rows that land here
    share: float  # fraction of the stage's training rows that land here
    samples: int


@dataclass
class TreeSplit:
    feature: int  # index into FEATURE_NAMES
    threshold: float | None  # numeric: value <= threshold goes left
    subset: frozenset | None  # categorical: value in subset goes left
    left: "TreeSplit | TreeLeaf"
    right: "TreeSplit | TreeLeaf"
    majority_left: bool  # where the larger half of training rows went
    samples: int


@dataclass
class DecisionTree:
    root: TreeSplit | TreeLeaf

    def route(self, values: Sequence, vocab_sets: dict[int, frozenset]) -> TreeLeaf:
        """Walk one row to its leaf. Categorical values never seen in training
        follow the majority child."""
        node = self.root
        while isinstance(node, TreeSplit):
            v = values[node.feature]
            if node.threshold is not None:
                go_left = float(v) <= node.threshold
            elif v in node.subset:  # type: ignore[operator]
                go_left = True
            elif v in vocab_sets.get(node.feature, frozenset()):
                go_left = False
            else:
                go_left = node.majority_left
            node = node.left if go_left else node.right
        return node


def ensemble_score(votes: Sequence[bool], weights: Sequence[float]) -> float:
    """Weight-normalized positive vote share; unweighted mean if all weights
    are zero. Monotone in every individual vote."""
    total = float(sum(weights))
    if total <= 0.0:
        return sum(1.0 for v in votes if v) / len(votes)
    return sum(w for v, w in zip(votes, weights) if v) / total


@dataclass
class BoostedTreeModel:
    """Boosted ensemble for one event type over the fixed 68-feature schema."""

    event: EventType
    trees: list[tuple[DecisionTree, float]]
    boosting_rounds: int
    feature_schema: tuple[str, ...]
    vocab: dict[int, list]  # categorical feature index -> training values
    stage_usage: list[dict[int, float]]  # per stage: feature -> row share routed through it
    config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= len(self.trees) <= self.boosting_rounds:
            raise DataError(
                f"ensemble size {len(self.trees)} outside [1, {self.boosting_rounds}]"
            )
        if any(w < 0 for _, w in self.trees):
            raise DataError("stage weights must be non-negative")
        self._vocab_sets = {i: frozenset(vals) for i, vals in self.vocab.items()}

    def predict(self, fv: FeatureVector) -> tuple[bool, float]:
        """(label, score): score is the weighted vote in [0, 1]; ties at the
        0.5 threshold classify as actionable."""
        values = fv.values()
        votes = [tree.route(values, self._vocab_sets).label for tree, _ in self.trees]
        score = ensemble_score(votes, [w for _, w in self.trees])
        return (score >= 0.5, score)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts (actionable = positive class) plus derived metrics."""

    tp: int
    fp: int
    fn: int
    tn: int

    @staticmethod
    def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return ClassMetrics(precision, recall, f)

    @property
    def actionable(self) -> ClassMetrics:
        return self._prf(self.tp, self.fp, self.fn)

    @property
    def non_actionable(self) -> ClassMetrics:
        # The negative class's true positives are the positive class's true negatives.
        return self._prf(self.tn, self.fn, self.fp)


def _entropy(w_pos: np.ndarray, w_tot: np.ndarray) -> np.ndarray:
    """Binary entropy of weighted class shares; 0 where a side is empty/pure."""
    w_tot = np.asarray(w_tot, dtype=np.float64)
    w_pos = np.asarray(w_pos, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(w_tot > 0, w_pos / np.maximum(w_tot, 1e-300), 0.0)
        q = 1.0 - p
        h = -(np.where(p > 0, p * np.log2(np.maximum(p, 1e-300)), 0.0)
              + np.where(q > 0, q * np.log2(np.maximum(q, 1e-300)), 0.0))
    return np.maximum(h, 0.0)


class _TreeBuilder:
    """Grows one weighted tree and, as a side effect of the build, routes every
    training row so the stage's predictions and feature usage come for free."""

    def __init__(
        self,
        numeric: dict[int, np.ndarray],
        codes: dict[int, np.ndarray],
        vocab: dict[int, list],
        y: np.ndarray,
        cfg: TrainConfig,
    ):
        self.numeric = numeric
        self.codes = codes
        self.vocab = vocab
        self.y = y
        self.cfg = cfg
        self.n = len(y)

    def build(self, weights: np.ndarray) -> tuple[DecisionTree, np.ndarray, dict[int, float]]:
        self.weights = weights
        self.preds = np.zeros(self.n, dtype=bool)
        self.used: dict[int, np.ndarray] = {}
        root = self._grow(np.arange(self.n), 0)
        usage = {f: float(mask.mean()) for f, mask in self.used.items() if mask.any()}
        return DecisionTree(root), self.preds, usage

    def _leaf(self, idx: np.ndarray) -> TreeLeaf:
        w = self.weights[idx]
        w_pos = float(w[self.y[idx]].sum())
        w_tot = float(w.sum())
        # tie -> actionable; the tolerance keeps exact ties from resolving on
        # float-summation dust (ten 0.05s do not sum to exactly 0.5)
        label = w_pos - (w_tot - w_pos) >= -1e-12 * max(w_tot, 1.0)
        prob = (w_pos if label else w_tot - w_pos) / w_tot if w_tot > 0 else 0.5
        self.preds[idx] = label
        return TreeLeaf(label=label, probability=prob, share=len(idx) / self.n, samples=len(idx))

    def _grow(self, idx: np.ndarray, depth: int) -> TreeSplit | TreeLeaf:
        y_sub = self.y[idx]
        if (
            depth >= self.cfg.max_depth
            or len(idx) < 2 * self.cfg.min_leaf_size
            or y_sub.all()
            or not y_sub.any()
        ):
            return self._leaf(idx)

        w_sub = self.weights[idx]
        w_tot = float(w_sub.sum())
        w_pos = float(w_sub[y_sub].sum())
        h_parent = float(_entropy(np.array(w_pos), np.array(w_tot)))

        best = None  # (gain_ratio, feature, kind, payload, left_mask)
        for f in _NUMERIC_IDX:
            found = self._numeric_split(f, idx, y_sub, w_sub, w_tot, w_pos, h_parent)
            if found and (best is None or found[0] > best[0] + _GAIN_EPS):
                best = found
        for f in _CATEGORICAL_IDX:
            found = self._categorical_split(f, idx, y_sub, w_sub, w_tot, w_pos, h_parent)
            if found and (best is None or found[0] > best[0] + _GAIN_EPS):
                best = found

        if best is None:
            return self._leaf(idx)

        _, feature, kind, payload, left_mask = best
        used = self.used.setdefault(feature, np.zeros(self.n, dtype=bool))
        used[idx] = True
        left_idx = idx[left_mask]
        right_idx = idx[~left_mask]
        return TreeSplit(
            feature=feature,
            threshold=payload if kind == "num" else None,
            subset=payload if kind == "cat" else None,
            left=self._grow(left_idx, depth + 1),
            right=self._grow(right_idx, depth + 1),
            majority_left=len(left_idx) >= len(right_idx),
            samples=len(idx),
        )

    def _score(self, wl, wpl, w_tot, w_pos, h_parent):
        """(gain, gain_ratio) arrays for candidate left sides."""
        wr = w_tot - wl
        wpr = w_pos - wpl
        child = (wl * _entropy(wpl, wl) + wr * _entropy(wpr, wr)) / w_tot
        gain = h_parent - child
        split_info = _entropy(wl, np.full_like(wl, w_tot))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(split_info > 0, gain / np.maximum(split_info, 1e-300), 0.0)
        return gain, ratio

    def _numeric_split(self, f, idx, y_sub, w_sub, w_tot, w_pos, h_parent):
        vals = self.numeric[f][idx]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cuts = np.nonzero(sv[:-1] != sv[1:])[0]
        n_candidates = len(cuts)
        if n_candidates == 0:
            return None
        left_n = cuts + 1
        keep = (left_n >= self.cfg.min_leaf_size) & (
            len(idx) - left_n >= self.cfg.min_leaf_size
        )
        cuts = cuts[keep]
        if len(cuts) == 0:
            return None
        sw = w_sub[order]
        sy = y_sub[order]
        cw = np.cumsum(sw)
        cwp = np.cumsum(sw * sy)
        gain, _ = self._score(cw[cuts], cwp[cuts], w_tot, w_pos, h_parent)
        # threshold chosen by max gain within the feature, earliest cut on ties
        j = int(np.argmax(gain))
        # MDL-style correction: a feature offering many thresholds must buy its
        # extra degrees of freedom, or every continuous column looks predictive
        adjusted = float(gain[j]) - math.log2(n_candidates) / len(idx)
        if adjusted <= _GAIN_EPS:
            return None
        threshold = float((sv[cuts[j]] + sv[cuts[j] + 1]) / 2.0)
        left_mask = vals <= threshold
        wl = float(cw[cuts[j]])
        split_info = float(_entropy(np.array(wl), np.array(w_tot)))
        if split_info <= 0:
            return None
        return (adjusted / split_info, f, "num", threshold, left_mask)

    def _categorical_split(self, f, idx, y_sub, w_sub, w_tot, w_pos, h_parent):
        codes = self.codes[f][idx]
        k = len(self.vocab[f])
        cnt = np.bincount(codes, minlength=k)
        present = np.nonzero(cnt > 0)[0]
        if len(present) < 2:
            return None
        w_per = np.bincount(codes, weights=w_sub, minlength=k)[present]
        wp_per = np.bincount(codes[y_sub], weights=w_sub[y_sub], minlength=k)[present]
        # order categories by positive fraction (optimal scan for binary targets)
        frac = wp_per / np.maximum(w_per, 1e-300)
        order = np.lexsort((present, frac))
        ordered_codes = present[order]
        ccnt = np.cumsum(cnt[present][order])[:-1]
        keep = (ccnt >= self.cfg.min_leaf_size) & (len(idx) - ccnt >= self.cfg.min_leaf_size)
        if not keep.any():
            return None
        cw = np.cumsum(w_per[order])[:-1]
        cwp = np.cumsum(wp_per[order])[:-1]
        gain, ratio = self._score(cw, cwp, w_tot, w_pos, h_parent)
        gain = np.where(keep, gain, -1.0)
        j = int(np.argmax(gain))
        if gain[j] <= _GAIN_EPS:
            return None
        left_codes = ordered_codes[: j + 1]
        subset = frozenset(self.vocab[f][c] for c in left_codes)
        left_mask = np.isin(codes, left_codes)
        return (float(ratio[j]), f, "cat", subset, left_mask)


def _matrices(rows) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray], dict[int, list]]:
    columns = list(zip(*(r.features.values() for r in rows)))
    numeric: dict[int, np.ndarray] = {}
    codes: dict[int, np.ndarray] = {}
    vocab: dict[int, list] = {}
    for f in _NUMERIC_IDX:
        numeric[f] = np.asarray(columns[f], dtype=np.float64)
    for f in _CATEGORICAL_IDX:
        values = sorted(set(columns[f]))
        vocab[f] = values
        index = {v: i for i, v in enumerate(values)}
        codes[f] = np.fromiter((index[v] for v in columns[f]), dtype=np.int64, count=len(rows))
    return numeric, codes, vocab


def train(
    train_corpus: Corpus,
    event: EventType,
    config: TrainConfig | None = None,
    seed: int = 0,
) -> BoostedTreeModel:
    """Fit the boosted ensemble for `event` on an (ideally balanced) corpus.

    Deterministic for a fixed (corpus, config, seed). Raises EmptyClassError
    when the corpus holds a single class for the event.
    """
    cfg = config or TrainConfig()
    rows = train_corpus.rows
    y = np.fromiter(
        (event in (r.effective_labels or set()) for r in rows), dtype=bool, count=len(rows)
    )
    if len(rows) == 0 or y.all() or not y.any():
        raise EmptyClassError(f"training corpus must contain both classes for {event.value}")

    numeric, codes, vocab = _matrices(rows)
    builder = _TreeBuilder(numeric, codes, vocab, y, cfg)

    n = len(rows)
    weights = np.full(n, 1.0 / n)
    trees: list[tuple[DecisionTree, float]] = []
    stage_usage: list[dict[int, float]] = []
    for _ in range(cfg.boosting_rounds):
        tree, preds, usage = builder.build(weights)
        mis = preds != y
        err = float(weights[mis].sum())
        if err <= _GAIN_EPS:
            trees.append((tree, _ZERO_ERROR_ALPHA))
            stage_usage.append(usage)
            break
        if err >= 0.5:
            if not trees:  # keep something rather than an empty ensemble
                trees.append((tree, 0.0))
                stage_usage.append(usage)
            break
        alpha = math.log((1.0 - err) / err)
        trees.append((tree, alpha))
        stage_usage.append(usage)
        weights = weights * np.exp(alpha * mis)
        weights = weights / weights.sum()

    return BoostedTreeModel(
        event=event,
        trees=trees,
        boosting_rounds=cfg.boosting_rounds,
        feature_schema=FEATURE_NAMES,
        vocab=vocab,
        stage_usage=stage_usage,
        config=cfg,
        seed=seed,
    )


def predict(model: BoostedTreeModel, fv: FeatureVector) -> tuple[bool, float]:
    """Function form of BoostedTreeModel.predict."""
    return model.predict(fv)


def evaluate(model: BoostedTreeModel, test_corpus: Corpus, event: EventType) -> EvalReport:
    """Confusion counts over every row of an (unbalanced) test corpus."""
    if not test_corpus.rows:
        raise DataError("cannot evaluate on an empty corpus")
    tp = fp = fn = tn = 0
    for row in test_corpus.rows:
        predicted = model.predict(row.features)[0]
        actual = event in (row.effective_labels or set())
        if predicted and actual:
            tp += 1
        elif predicted and not actual:
            fp += 1
        elif not predicted and actual:
            fn += 1
        else:
            tn += 1
    return EvalReport(tp=tp, fp=fp, fn=fn, tn=tn)


def predictor_importance(model: BoostedTreeModel) -> dict[str, float]:
    """Feature -> percentage of training rows routed through a split on it,
    averaged over boosting stages; descending."""
    n_stages = len(model.stage_usage)
    agg = {name: 0.0 for name in model.feature_schema}
    for usage in model.stage_usage:
        for f, share in usage.items():
            agg[model.feature_schema[f]] += share
    scores = {name: 100.0 * total / n_stages for name, total in agg.items()}
    order = sorted(
        scores, key=lambda name: (-scores[name], model.feature_schema.index(name))
    )
    return {name: scores[name] for name in order}


def _node_records(root: TreeSplit | TreeLeaf) -> list[dict]:
    records: list[dict] = []

    def visit(node) -> int:
        node_id = len(records)
        records.append({})
        if isinstance(node, TreeLeaf):
            records[node_id] = {
                "kind": "leaf",
                "label": node.label,
                "probability": node.probability,
                "share": node.share,
                "samples": node.samples,
            }
        else:
            rec = {
                "kind": "split",
                "feature": node.feature,
                "majority_left": node.majority_left,
                "samples": node.samples,
            }
            if node.threshold is not None:
                rec["threshold"] = node.threshold
            else:
                rec["subset"] = sorted(node.subset)  # type: ignore[arg-type]
            records[node_id] = rec
            rec["left"] = visit(node.left)
            rec["right"] = visit(node.right)
        return node_id

    visit(root)
    return records


def _node_from_records(records: list[dict], node_id: int) -> TreeSplit | TreeLeaf:
    rec = records[node_id]
    if rec["kind"] == "leaf":
        return TreeLeaf(
            label=bool(rec["label"]),
            probability=float(rec["probability"]),
            share=float(rec["share"]),
            samples=int(rec["samples"]),
        )
    return TreeSplit(
        feature=int(rec["feature"]),
        threshold=float(rec["threshold"]) if "threshold" in rec else None,
        subset=frozenset(rec["subset"]) if "subset" in rec else None,
        left=_node_from_records(records, rec["left"]),
        right=_node_from_records(records, rec["right"]),
        majority_left=bool(rec["majority_left"]),
        samples=int(rec["samples"]),
    )


def save_model(model: BoostedTreeModel, path: str | Path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "event": model.event.value,
        "feature_schema": list(model.feature_schema),
        "config": {
            "boosting_rounds": model.config.boosting_rounds,
            "min_leaf_size": model.config.min_leaf_size,
            "max_depth": model.config.max_depth,
            "seed": model.seed,
        },
        "vocab": {str(f): values for f, values in sorted(model.vocab.items())},
        "stage_usage": [
            {str(f): share for f, share in sorted(usage.items())}
            for usage in model.stage_usage
        ],
        "trees": [
            {"weight": weight, "nodes": _node_records(tree.root)}
            for tree, weight in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> BoostedTreeModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file {path} is truncated or not valid JSON: {exc}") from exc
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported model schema_version {doc.get('schema_version')!r}")
    schema = tuple(doc.get("feature_schema", ()))
    if len(schema) != len(FEATURE_NAMES) or schema != FEATURE_NAMES:
        raise SchemaMismatchError(
            f"model feature schema has {len(schema)} entries and does not match "
            f"the {len(FEATURE_NAMES)}-feature schema"
        )
    try:
        event = EventType(doc["event"])
        cfg_doc = doc["config"]
        cfg = TrainConfig(
            boosting_rounds=int(cfg_doc["boosting_rounds"]),
            min_leaf_size=int(cfg_doc["min_leaf_size"]),
            max_depth=int(cfg_doc["max_depth"]),
        )
        vocab = {int(f): list(values) for f, values in doc["vocab"].items()}
        stage_usage = [
            {int(f): float(share) for f, share in usage.items()}
            for usage in doc["stage_usage"]
        ]
        trees = [
            (DecisionTree(_node_from_records(t["nodes"], 0)), float(t["weight"]))
            for t in doc["trees"]
        ]
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"model file {path} is malformed: {exc}") from exc
    return BoostedTreeModel(
        event=event,
        trees=trees,
        boosting_rounds=cfg.boosting_rounds,
        feature_schema=schema,
        vocab=vocab,
        stage_usage=stage_usage,
        config=cfg,
        seed=int(cfg_doc.get("seed", 0)),
    )
