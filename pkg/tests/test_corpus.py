import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotext.corpus import (
    ConllParseError,
    Document,
    EntityCategory,
    EntitySpan,
    JsonlSchemaError,
    check_spans,
    parse_conll,
    read_jsonl,
    write_conll,
    write_jsonl,
)


def spans_of(doc):
    return [(s.start, s.end, s.category.value, s.surface) for s in doc.gold_spans]


class TestParseConll:
    def test_single_entity_sentence(self):
        docs = parse_conll("John NNP B-NP B-PER\nruns VBZ B-VP O\n")
        assert len(docs) == 1
        assert docs[0].text == "John runs"
        assert spans_of(docs[0]) == [(0, 4, "PER", "John")]

    def test_multi_token_entity_merges_bio_run(self):
        raw = (
            "-DOCSTART- -X- -X- O\n"
            "\n"
            "Acme NNP B-NP B-ORG\n"
            "Corp NNP I-NP I-ORG\n"
            "shares NNS I-NP O\n"
            "\n"
            "up RB B-ADVP O\n"
            "today NN B-NP O\n"
        )
        docs = parse_conll(raw)
        assert len(docs) == 1
        assert docs[0].text == "Acme Corp shares\nup today"
        # hand-merged run: "Acme Corp" covers offsets 0..9
        assert spans_of(docs[0]) == [(0, 9, "ORG", "Acme Corp")]

    def test_misc_runs_are_dropped(self):
        docs = parse_conll("Dutch NNP B-NP B-MISC\nguilder NN I-NP O\n")
        assert docs[0].gold_spans == []

    def test_iob1_initial_i_tag_opens_run(self):
        docs = parse_conll("Leeds NNP B-NP I-ORG\nUnited NNP I-NP I-ORG\n")
        assert spans_of(docs[0]) == [(0, 12, "ORG", "Leeds United")]

    def test_iob1_adjacent_entities_split_on_b_tag(self):
        raw = "Foo NNP B-NP I-PER\nBar NNP I-NP B-PER\n"
        docs = parse_conll(raw)
        assert spans_of(docs[0]) == [(0, 3, "PER", "Foo"), (4, 7, "PER", "Bar")]

    def test_category_change_without_b_splits_runs(self):
        raw = "Paris NNP B-NP I-LOC\nMetro NNP I-NP I-ORG\n"
        docs = parse_conll(raw)
        assert spans_of(docs[0]) == [(0, 5, "LOC", "Paris"), (6, 11, "ORG", "Metro")]

    def test_docstart_splits_documents(self):
        raw = (
            "-DOCSTART- -X- -X- O\n\n"
            "one CD B-NP O\n\n"
            "-DOCSTART- -X- -X- O\n\n"
            "two CD B-NP O\n"
        )
        docs = parse_conll(raw)
        assert [doc.text for doc in docs] == ["one", "two"]
        assert [doc.id for doc in docs] == ["conll-0001", "conll-0002"]

    def test_stream_without_docstart_is_one_document(self):
        docs = parse_conll("a DT B-NP O\n\nb NN B-NP O\n")
        assert len(docs) == 1
        assert docs[0].text == "a\nb"

    def test_wrong_column_count_names_line(self):
        with pytest.raises(ConllParseError, match="line 2"):
            parse_conll("ok NNP B-NP O\nbroken NNP O\n")

    def test_unknown_tag_rejected(self):
        with pytest.raises(ConllParseError, match="line 1.*B-DATE"):
            parse_conll("today NN B-NP B-DATE\n")

    def test_empty_input(self):
        assert parse_conll("") == []


class TestConllRoundTrip:
    def test_reparse_preserves_spans_and_text(self):
        raw = (
            "-DOCSTART- -X- -X- O\n\n"
            "EU NNP B-NP I-ORG\n"
            "rejects VBZ B-VP O\n"
            "German JJ B-NP I-MISC\n"
            "call NN I-NP O\n"
            "\n"
            "Peter NNP B-NP I-PER\n"
            "Blackburn NNP I-NP I-PER\n"
        )
        first = parse_conll(raw)
        second = parse_conll(write_conll(first))
        assert [doc.text for doc in first] == [doc.text for doc in second]
        assert [spans_of(a) for a in first] == [spans_of(b) for b in second]

    def test_serialization_is_bio2(self):
        docs = parse_conll("Foo NNP B-NP I-PER\nBar NNP I-NP I-PER\n")
        out = write_conll(docs)
        assert "Foo -X- -X- B-PER" in out
        assert "Bar -X- -X- I-PER" in out

    def test_misaligned_span_rejected(self):
        doc = Document("d", "Johnson spoke", gold_spans=[EntitySpan(0, 4, EntityCategory.PER, "John")])
        with pytest.raises(ValueError, match="aligned"):
            write_conll([doc])


class TestJsonl:
    def test_minimal_document(self):
        docs = read_jsonl('{"id":"d1","text":"hi"}\n')
        assert docs == [Document("d1", "hi", gold_spans=None)]

    def test_surface_mismatch_is_schema_error(self):
        line = '{"id":"d1","text":"hi there","entities":[{"start":0,"end":2,"category":"PER","surface":"xx"}]}'
        with pytest.raises(JsonlSchemaError, match="line 1.*entities"):
            read_jsonl(line)

    def test_error_names_line_and_field(self):
        with pytest.raises(JsonlSchemaError, match="line 2: text"):
            read_jsonl('{"id":"a","text":"x"}\n{"id":"b"}\n')

    def test_duplicate_id_rejected(self):
        with pytest.raises(JsonlSchemaError, match="duplicate"):
            read_jsonl('{"id":"a","text":"x"}\n{"id":"a","text":"y"}\n')

    def test_invalid_json_names_line(self):
        with pytest.raises(JsonlSchemaError, match="line 1"):
            read_jsonl("{nope}\n")

    def test_overlapping_entities_rejected(self):
        line = (
            '{"id":"d","text":"abcdef","entities":['
            '{"start":0,"end":4,"category":"PER","surface":"abcd"},'
            '{"start":2,"end":6,"category":"LOC","surface":"cdef"}]}'
        )
        with pytest.raises(JsonlSchemaError, match="overlap"):
            read_jsonl(line)

    def test_three_doc_fixture_round_trips_byte_identically(self):
        docs = [
            Document("a", "Anna met Bo", gold_spans=[
                EntitySpan(0, 4, EntityCategory.PER, "Anna"),
                EntitySpan(9, 11, EntityCategory.PER, "Bo"),
            ]),
            Document("b", "plain text without entities", gold_spans=[]),
            Document("c", "no annotations at all"),
        ]
        first = write_jsonl(docs)
        second = write_jsonl(read_jsonl(first))
        assert first == second
        # normalization: reordered keys and whitespace collapse to one form
        noisy = '{"text": "hi", "id": "d1"}\n'
        assert write_jsonl(read_jsonl(noisy)) == '{"id":"d1","text":"hi"}\n'


# -- properties ---------------------------------------------------------------

_token = st.text(alphabet="abcdefgXYZ", min_size=1, max_size=6)
_tag = st.sampled_from(
    ["O", "O", "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "B-MISC", "I-MISC"]
)


@st.composite
def conll_streams(draw):
    n_sentences = draw(st.integers(1, 4))
    lines = []
    for _ in range(n_sentences):
        for _ in range(draw(st.integers(1, 6))):
            token, tag = draw(_token), draw(_tag)
            lines.append(f"{token} X X {tag}")
        lines.append("")
    return "\n".join(lines)


@given(conll_streams())
def test_parsed_spans_always_valid(raw):
    for doc in parse_conll(raw):
        check_spans(doc.gold_spans, doc.text)
        for span in doc.gold_spans:
            assert doc.text[span.start : span.end] == span.surface


@given(conll_streams())
def test_conll_round_trip_idempotent(raw):
    first = parse_conll(raw)
    second = parse_conll(write_conll(first))
    assert [doc.text for doc in first] == [doc.text for doc in second]
    assert [spans_of(a) for a in first] == [spans_of(b) for b in second]
