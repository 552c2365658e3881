import math
import random
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotext.corpus import Document, EntityCategory, EntitySpan
from pseudotext.detect import OracleDetector
from pseudotext.evaluation import (
    ORIGINAL,
    REWRITTEN,
    TrainConfig,
    classify_syntheticity,
    hashed_ngrams,
    leakage_report,
    load_model,
    prf,
    read_labeled_jsonl,
    save_model,
    train_syntheticity,
    write_labeled_jsonl,
)
from pseudotext.rewrite import rewrite_corpus
from pseudotext.synthdata import fuzz_corpus

PER, LOC, ORG = EntityCategory.PER, EntityCategory.LOC, EntityCategory.ORG


def mkspan(start, end, category, text):
    return EntitySpan(start, end, category, text[start:end])


def brute_force_leakage(gold_docs, rewritten_docs, fold_case=False):
    """Independent oracle: regex word-boundary scan over every (span, text)
    pair, counting per category."""
    rewritten_by_id = {d.id: d.text for d in rewritten_docs}
    leaked = {c: 0 for c in EntityCategory}
    total = {c: 0 for c in EntityCategory}
    for doc in gold_docs:
        text = rewritten_by_id[doc.id]
        for span in doc.gold_spans:
            total[span.category] += 1
            flags = re.IGNORECASE if fold_case else 0
            pattern = r"(?<!\w)" + re.escape(span.surface) + r"(?!\w)"
            if re.search(pattern, text, flags):
                leaked[span.category] += 1
    return leaked, total


class TestLeakageReport:
    def test_forced_half_leak(self):
        gold_text = "Sarah lives in London"
        gold = Document("d", gold_text, gold_spans=[
            mkspan(0, 5, PER, gold_text), mkspan(15, 21, LOC, gold_text),
        ])
        rewritten = Document("d", "Sophie lives in London")
        report = leakage_report([gold], [rewritten])
        assert report.per_category[PER].rate == 0.0
        assert report.per_category[LOC].rate == 100.0
        assert report.micro_mean == 50.0

    def test_sanitized_corpus_never_leaks(self, fixture_kg):
        docs = fuzz_corpus(30, seed=2)
        rewritten, _ = rewrite_corpus(docs, OracleDetector(), "sanitize")
        report = leakage_report(docs, [r.to_document() for r in rewritten])
        assert report.micro_mean == 0.0
        assert all(cell.leaked == 0 for cell in report.per_category.values())

    def test_matches_brute_force_oracle_on_mixed_fixture(self):
        texts = [
            ("a", "Anna met Bob in Kyiv", [(0, 4, PER), (9, 12, PER), (16, 20, LOC)],
             "Anna met PERSON_2 in Kyiv"),
            ("b", "Acme hired Anna", [(0, 4, ORG), (11, 15, PER)],
             "Zorg hired Clara"),
            ("c", "Bob, Bob and Anna", [(0, 3, PER), (5, 8, PER), (13, 17, PER)],
             "Bob, PERSON_1 and PERSON_2"),
        ]
        gold_docs, rewritten_docs = [], []
        for doc_id, text, spans, new_text in texts:
            gold_docs.append(Document(doc_id, text, gold_spans=[
                mkspan(s, e, c, text) for s, e, c in spans
            ]))
            rewritten_docs.append(Document(doc_id, new_text))
        report = leakage_report(gold_docs, rewritten_docs)
        leaked, total = brute_force_leakage(gold_docs, rewritten_docs)
        for category in EntityCategory:
            assert report.per_category[category].leaked == leaked[category]
            assert report.per_category[category].total == total[category]
        # hand count: doc a leaks Anna; doc c leaks both Bob spans via the
        # surviving first mention
        assert report.per_category[PER].leaked == 3
        assert report.per_category[PER].total == 6
        assert report.per_category[LOC].leaked == 1

    def test_word_boundary_and_case_sensitivity(self):
        text = "Ann is here"
        gold = Document("d", text, gold_spans=[mkspan(0, 3, PER, text)])
        assert leakage_report([gold], [Document("d", "Annual report")]).micro_mean == 0.0
        assert leakage_report([gold], [Document("d", "ann is ann")]).micro_mean == 0.0
        assert leakage_report(
            [gold], [Document("d", "ann is ann")], fold_case=True
        ).micro_mean == 100.0

    def test_id_mismatch_listed(self):
        gold = Document("a", "x", gold_spans=[])
        with pytest.raises(ValueError, match=r"\['a', 'b'\]"):
            leakage_report([gold], [Document("b", "y")])

    def test_json_row_layout(self):
        text = "Sarah lives"
        gold = Document("d", text, gold_spans=[mkspan(0, 5, PER, text)])
        row = leakage_report([gold], [Document("d", "Sarah lives")]).to_json_dict()
        assert list(row) == ["PER", "ORG", "LOC", "micro_mean", "macro_mean"]
        assert row["PER"] == {"leaked": 1, "total": 1, "rate": 100.0}


@given(st.integers(0, 2**31 - 1))
def test_leakage_invariants_on_random_corpora(seed):
    rng = random.Random(seed)
    docs = fuzz_corpus(rng.randint(1, 6), seed=seed)
    # randomly corrupt the rewriting: keep some surfaces, replace others
    rewritten = []
    for doc in docs:
        text = doc.text
        for span in reversed(doc.gold_spans or []):
            if rng.random() < 0.5:
                text = text[: span.start] + "GONE" + text[span.end :]
        rewritten.append(Document(doc.id, text))
    report = leakage_report(docs, rewritten)
    rates = [c.rate for c in report.per_category.values() if c.total]
    for cell in report.per_category.values():
        assert 0 <= cell.rate <= 100 and cell.leaked <= cell.total
    if rates:
        assert min(rates) - 1e-9 <= report.micro_mean <= max(rates) + 1e-9
        assert min(rates) - 1e-9 <= report.macro_mean <= max(rates) + 1e-9
    leaked, total = brute_force_leakage(docs, rewritten)
    assert {c: report.per_category[c].leaked for c in EntityCategory} == leaked
    assert {c: report.per_category[c].total for c in EntityCategory} == total


# ---------------------------------------------------------------------------
# Syntheticity classifier


def separable_corpus(n=60):
    originals = [(f"report {i} from London about trade volume", ORIGINAL) for i in range(n)]
    rewritten = [(f"report {i} from PERSON_1 about trade volume", REWRITTEN) for i in range(n)]
    return originals + rewritten


class TestTraining:
    def test_separable_fixture_reaches_perfect_training_accuracy(self):
        corpus = separable_corpus()
        model = train_syntheticity(corpus, TrainConfig(epochs=20), seed=0)
        predictions = [classify_syntheticity(model, text)[0] for text, _ in corpus]
        assert predictions == [label for _, label in corpus]

    def test_loss_non_increasing_on_separable_fixture(self):
        model = train_syntheticity(separable_corpus(), TrainConfig(epochs=20), seed=0)
        assert all(b <= a + 1e-9 for a, b in zip(model.loss_history, model.loss_history[1:]))

    def test_shuffled_labels_stay_at_chance(self):
        rng = random.Random(4)
        words = "alpha beta gamma delta epsilon zeta eta theta koi lambda".split()
        texts = [" ".join(rng.choice(words) for _ in range(12)) for _ in range(2000)]
        labels = [rng.choice((ORIGINAL, REWRITTEN)) for _ in range(2000)]
        corpus = list(zip(texts, labels))
        model = train_syntheticity(corpus[:1000], TrainConfig(epochs=5), seed=0)
        held = corpus[1000:]
        accuracy = sum(
            classify_syntheticity(model, text)[0] == label for text, label in held
        ) / len(held)
        assert 0.45 <= accuracy <= 0.55

    def test_duplicated_corpus_keeps_decision_signs(self):
        corpus = separable_corpus(30)
        base = train_syntheticity(corpus, TrainConfig(epochs=10), seed=0)
        doubled = train_syntheticity(corpus * 2, TrainConfig(epochs=10), seed=0)
        texts = [text for text, _ in corpus]
        assert [classify_syntheticity(base, t)[0] for t in texts] == [
            classify_syntheticity(doubled, t)[0] for t in texts
        ]

    def test_deterministic_given_seed(self):
        corpus = separable_corpus(20)
        a = train_syntheticity(corpus, TrainConfig(epochs=3), seed=9)
        b = train_syntheticity(corpus, TrainConfig(epochs=3), seed=9)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    def test_single_class_corpus_rejected(self):
        with pytest.raises(ValueError, match="both labels"):
            train_syntheticity([("x", ORIGINAL)], TrainConfig(epochs=1))

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown labels"):
            train_syntheticity([("x", "weird"), ("y", ORIGINAL)], TrainConfig(epochs=1))


class TestClassify:
    def test_zero_weight_model_gives_exactly_half(self):
        model__ = train_syntheticity(separable_corpus(5), TrainConfig(epochs=1), seed=0)
        zero = model__.__class__(np.zeros_like(model__.weights), 0.0, model__.config)
        assert classify_syntheticity(zero, "whatever text")[1] == 0.5

    def test_empty_text_scores_bias_only(self):
        model = train_syntheticity(separable_corpus(10), TrainConfig(epochs=2), seed=0)
        _, probability = classify_syntheticity(model, "")
        assert probability == pytest.approx(1 / (1 + math.exp(-model.bias)))

    def test_trained_positive_is_confident(self):
        model = train_syntheticity(separable_corpus(), TrainConfig(epochs=20), seed=0)
        label, probability = classify_syntheticity(model, "report 3 from PERSON_1 about trade volume")
        assert label == REWRITTEN and probability > 0.9


class TestPrf:
    def test_perfect(self):
        result = prf([REWRITTEN, ORIGINAL], [REWRITTEN, ORIGINAL])
        assert (result.precision, result.recall, result.f_score) == (100.0, 100.0, 100.0)
        assert not result.degenerate

    def test_all_predicted_original(self):
        result = prf([ORIGINAL, ORIGINAL], [REWRITTEN, ORIGINAL])
        assert result.recall == 0.0 and result.f_score == 0.0
        assert result.degenerate

    def test_hand_counted_case(self):
        # TP=3 FP=1 FN=1
        predictions = [REWRITTEN] * 4 + [ORIGINAL]
        gold = [REWRITTEN] * 3 + [ORIGINAL] + [REWRITTEN]
        result = prf(predictions, gold)
        assert (result.precision, result.recall, result.f_score) == (75.0, 75.0, 75.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prf([REWRITTEN], [REWRITTEN, ORIGINAL])

    @given(st.lists(st.tuples(st.sampled_from([ORIGINAL, REWRITTEN]),
                              st.sampled_from([ORIGINAL, REWRITTEN])), max_size=30),
           st.randoms(use_true_random=False))
    def test_permutation_invariant(self, pairs, rng):
        shuffled = list(pairs)
        rng.shuffle(shuffled)
        base = prf([p for p, _ in pairs], [g for _, g in pairs])
        perm = prf([p for p, _ in shuffled], [g for _, g in shuffled])
        assert base == perm


class TestModelSerialization:
    def test_round_trip_preserves_predictions(self, tmp_path):
        model = train_syntheticity(separable_corpus(20), TrainConfig(epochs=5), seed=1)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        for text in ("report 1 from London about trade volume", "PERSON_1 did things", ""):
            assert classify_syntheticity(model, text) == classify_syntheticity(loaded, text)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "other", "version": 99}', encoding="utf-8")
        with pytest.raises(ValueError, match="not a version"):
            load_model(path)


class TestLabeledCorpusIO:
    def test_round_trip(self):
        items = [("hello", ORIGINAL), ("PERSON_1 spoke", REWRITTEN)]
        assert read_labeled_jsonl(write_labeled_jsonl(items)) == items

    def test_bad_label_names_line(self):
        with pytest.raises(ValueError, match="line 2: label"):
            read_labeled_jsonl('{"text":"a","label":"original"}\n{"text":"b","label":"x"}\n')


def test_hashed_ngram_properties():
    indices, counts = hashed_ngrams("abcd", 10)
    # 3 bigrams + 2 trigrams + 1 quadgram
    assert counts.sum() == 6
    assert (indices < 1 << 10).all()
    empty_indices, empty_counts = hashed_ngrams("a", 10)  # too short for any gram
    assert len(empty_indices) == 0 and len(empty_counts) == 0
