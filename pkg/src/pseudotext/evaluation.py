"""Privacy-leakage measurement and the desk-scale syntheticity classifier."""

from __future__ import annotations

import base64
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from pseudotext.corpus import Document, EntityCategory
from pseudotext.textmatch import contains_word_bounded

ORIGINAL = "original"
REWRITTEN = "rewritten"

# Table layout order for reports.
_CATEGORY_COLUMNS = (EntityCategory.PER, EntityCategory.ORG, EntityCategory.LOC)


# ---------------------------------------------------------------------------
# Leakage


@dataclass(frozen=True)
class CategoryLeakage:
    leaked: int
    total: int

    @property
    def rate(self) -> float:
        return 100.0 * self.leaked / self.total if self.total else 0.0


@dataclass
class LeakageReport:
    per_category: dict[EntityCategory, CategoryLeakage]
    micro_mean: float
    macro_mean: float

    def to_json_dict(self) -> dict:
        """One table row: PER/ORG/LOC columns plus both means. A comparison
        table is just {system_name: report.to_json_dict()}."""
        row: dict = {}
        for category in _CATEGORY_COLUMNS:
            cell = self.per_category[category]
            row[category.value] = {
                "leaked": cell.leaked,
                "total": cell.total,
                "rate": round(cell.rate, 4),
            }
        row["micro_mean"] = round(self.micro_mean, 4)
        row["macro_mean"] = round(self.macro_mean, 4)
        return row


def leakage_report(
    gold_docs: Iterable[Document],
    rewritten_docs: Iterable[Document],
    fold_case: bool = False,
) -> LeakageReport:
    """Fraction of gold entities whose surface still occurs (word-bounded,
    case-sensitive unless fold_case) in the paired rewritten text.

    Every gold span counts once, so repeated mentions weigh by occurrence.
    The micro mean is entity-weighted; the macro mean averages the rates of
    categories that actually have entities.
    """
    gold_by_id = {doc.id: doc for doc in gold_docs}
    rewritten_by_id = {doc.id: doc for doc in rewritten_docs}
    missing = sorted(set(gold_by_id) ^ set(rewritten_by_id))
    if missing:
        raise ValueError(f"corpora do not share document ids; unmatched: {missing}")

    leaked = {category: 0 for category in EntityCategory}
    total = {category: 0 for category in EntityCategory}
    for doc_id, gold in gold_by_id.items():
        if gold.gold_spans is None:
            raise ValueError(f"doc {doc_id}: gold corpus carries no entity annotations")
        rewritten_text = rewritten_by_id[doc_id].text
        for span in gold.gold_spans:
            total[span.category] += 1
            if contains_word_bounded(rewritten_text, span.surface, fold_case=fold_case):
                leaked[span.category] += 1

    per_category = {
        category: CategoryLeakage(leaked[category], total[category])
        for category in EntityCategory
    }
    grand_total = sum(total.values())
    micro = 100.0 * sum(leaked.values()) / grand_total if grand_total else 0.0
    populated = [per_category[c].rate for c in EntityCategory if per_category[c].total]
    macro = sum(populated) / len(populated) if populated else 0.0
    return LeakageReport(per_category, micro, macro)


# ---------------------------------------------------------------------------
# Syntheticity classifier


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1  # decayed as lr / sqrt(step)
    epochs: int = 20
    batch_size: int = 32
    hash_bits: int = 18

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid training configuration")
        if not 1 <= self.hash_bits <= 30:
            raise ValueError("hash_bits out of range")


@dataclass
class SyntheticityModel:
    weights: np.ndarray
    bias: float
    config: TrainConfig
    loss_history: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1] if self.loss_history else float("nan")


def hashed_ngrams(text: str, hash_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Character 2/3/4-gram counts hashed into a fixed-width index space."""
    width = 1 << hash_bits
    raw: dict[int, float] = {}
    for n in (2, 3, 4):
        for i in range(len(text) - n + 1):
            index = zlib.crc32(text[i : i + n].encode("utf-8")) % width
            raw[index] = raw.get(index, 0.0) + 1.0
    if not raw:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    indices = np.fromiter(raw.keys(), dtype=np.int64, count=len(raw))
    counts = np.fromiter(raw.values(), dtype=np.float64, count=len(raw))
    return indices, counts


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _dataset_loss(
    features: list[tuple[np.ndarray, np.ndarray]],
    labels: np.ndarray,
    weights: np.ndarray,
    bias: float,
) -> float:
    eps = 1e-12
    losses = np.empty(len(features))
    for i, (indices, counts) in enumerate(features):
        p = _sigmoid(float(weights[indices] @ counts) + bias)
        losses[i] = -(labels[i] * np.log(p + eps) + (1 - labels[i]) * np.log(1 - p + eps))
    return float(losses.mean())


def train_syntheticity(
    corpus: Sequence[tuple[str, str]],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> SyntheticityModel:
    """Fit logistic-regression weights with mini-batch SGD on hashed n-gram
    counts; rewritten is the positive class. Deterministic for a given seed;
    the per-epoch dataset loss is kept on the model."""
    labels_seen = {label for _, label in corpus}
    if labels_seen - {ORIGINAL, REWRITTEN}:
        raise ValueError(f"unknown labels: {sorted(labels_seen - {ORIGINAL, REWRITTEN})}")
    if labels_seen != {ORIGINAL, REWRITTEN}:
        raise ValueError("training corpus must contain both labels")

    features = [hashed_ngrams(text, config.hash_bits) for text, _ in corpus]
    labels = np.array([1.0 if label == REWRITTEN else 0.0 for _, label in corpus])
    weights = np.zeros(1 << config.hash_bits)
    bias = 0.0
    rng = np.random.default_rng(seed)
    step = 0
    loss_history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(features))
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start : batch_start + config.batch_size]
            step += 1
            lr = config.learning_rate / np.sqrt(step)
            scores = np.array(
                [float(weights[features[i][0]] @ features[i][1]) + bias for i in batch]
            )
            errors = _sigmoid(scores) - labels[batch]
            scale = lr / len(batch)
            for err, i in zip(errors, batch):
                indices, counts = features[i]
                np.subtract.at(weights, indices, scale * err * counts)
            bias -= lr * float(errors.mean())
        loss_history.append(_dataset_loss(features, labels, weights, bias))
    return SyntheticityModel(weights, bias, config, loss_history)


def classify_syntheticity(model: SyntheticityModel, text: str) -> tuple[str, float]:
    """(label, probability of the rewritten class)."""
    indices, counts = hashed_ngrams(text, model.config.hash_bits)
    score = float(model.weights[indices] @ counts) + model.bias if len(indices) else model.bias
    probability = float(_sigmoid(score))
    return (REWRITTEN if probability > 0.5 else ORIGINAL), probability


# ---------------------------------------------------------------------------
# Precision / recall / F


@dataclass(frozen=True)
class PrfResult:
    precision: float
    recall: float
    f_score: float
    degenerate: bool = False  # some denominator was zero

    def to_json_dict(self) -> dict:
        return {
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "f_score": round(self.f_score, 4),
            "degenerate": self.degenerate,
        }


def prf(predictions: Sequence[str], gold: Sequence[str]) -> PrfResult:
    """Percent precision/recall/F for the rewritten class."""
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    tp = sum(1 for p, g in zip(predictions, gold) if p == REWRITTEN and g == REWRITTEN)
    fp = sum(1 for p, g in zip(predictions, gold) if p == REWRITTEN and g != REWRITTEN)
    fn = sum(1 for p, g in zip(predictions, gold) if p != REWRITTEN and g == REWRITTEN)
    degenerate = False
    if tp + fp:
        precision = 100.0 * tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn:
        recall = 100.0 * tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall:
        f_score = 2 * precision * recall / (precision + recall)
    else:
        f_score, degenerate = 0.0, True
    return PrfResult(precision, recall, f_score, degenerate)


# ---------------------------------------------------------------------------
# Serialization

_MODEL_FORMAT = "pseudotext-synth-model"
_MODEL_VERSION = 1


def save_model(model: SyntheticityModel, path: str | Path) -> None:
    payload = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "hash_bits": model.config.hash_bits,
        "config": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "hash_bits": model.config.hash_bits,
        },
        "bias": model.bias,
        "loss_history": model.loss_history,
        "weights_dtype": "float64",
        "weights_b64": base64.b64encode(model.weights.astype(np.float64).tobytes()).decode(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> SyntheticityModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != _MODEL_FORMAT or payload.get("version") != _MODEL_VERSION:
        raise ValueError(f"{path}: not a version-{_MODEL_VERSION} {_MODEL_FORMAT} file")
    config = TrainConfig(**payload["config"])
    weights = np.frombuffer(base64.b64decode(payload["weights_b64"]), dtype=np.float64).copy()
    if len(weights) != 1 << config.hash_bits:
        raise ValueError(f"{path}: weight vector length does not match hash width")
    return SyntheticityModel(weights, payload["bias"], config, payload.get("loss_history", []))


# ---------------------------------------------------------------------------
# Labeled corpus IO


def read_labeled_jsonl(raw: str | IO[str]) -> list[tuple[str, str]]:
    """One {"text", "label"} object per line, label original|rewritten."""
    if hasattr(raw, "read"):
        raw = raw.read()
    items: list[tuple[str, str]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise ValueError(f"line {lineno}: text: missing or not a string")
        if obj.get("label") not in (ORIGINAL, REWRITTEN):
            raise ValueError(f"line {lineno}: label: expected original|rewritten")
        items.append((obj["text"], obj["label"]))
    return items


def write_labeled_jsonl(items: Iterable[tuple[str, str]]) -> str:
    return "".join(
        json.dumps({"text": text, "label": label}, ensure_ascii=False, separators=(",", ":"))
        + "\n"
        for text, label in items
    )
