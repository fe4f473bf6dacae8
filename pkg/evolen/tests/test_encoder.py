"""
test_encoder.py - Scored vocabulary, DP segmentation and tokenizer files
"""

import json
import random

import pytest

from evolen.core.encoder import (
    ScoredVocabulary,
    TokenTrie,
    build_scored_vocab,
    encode_corpus,
    encode_dp,
    encode_tokens,
    load_tokenizer,
    read_tokenizer,
    save_tokenizer,
    serialize_tokenizer,
    total_score,
    write_spans_tsv,
)
from evolen.core.errors import TokenizerFormatError, ValidationError
from evolen.core.merge import MergeReport
from evolen.core.models import SequenceRecord

BASES = ["A", "C", "G", "T"]


def best_by_enumeration(tokens, sequence, p):
    """Highest Σ|t|^p over every segmentation of sequence into tokens"""
    best = -1
    stack = [(0, 0)]
    while stack:
        pos, score = stack.pop()
        if pos == len(sequence):
            best = max(best, score)
            continue
        for token in tokens:
            if sequence.startswith(token, pos):
                stack.append((pos + len(token), score + len(token) ** p))
    return best


def test_motif_stays_whole():
    vocab = ScoredVocabulary(BASES + ["TAAT", "TAATTAA"], 2)
    spans = encode_dp(vocab, "TAATTAA")
    assert [s.token for s in spans] == ["TAATTAA"]
    assert total_score(vocab, spans) == 49


@pytest.mark.parametrize("p", [1, 2])
def test_tie_prefers_longer_final_token(p):
    vocab = ScoredVocabulary(["A", "C", "G", "T", "AT"], p)
    assert encode_tokens(vocab, "ATAT") == ["AT", "AT"]
    assert total_score(vocab, encode_dp(vocab, "ATAT")) == (8 if p == 2 else 4)


def test_n_spans_are_separate_and_unscored():
    vocab = ScoredVocabulary(BASES + ["AC"], 2)
    spans = encode_dp(vocab, "ACNNAC")
    assert [(s.token, s.start, s.end) for s in spans] == [
        ("AC", 0, 2), ("N", 2, 3), ("N", 3, 4), ("AC", 4, 6),
    ]
    assert total_score(vocab, spans) == 8


def test_empty_and_all_n_inputs():
    vocab = ScoredVocabulary(BASES, 2)
    assert encode_dp(vocab, "") == []
    assert encode_tokens(vocab, "NNN") == ["N", "N", "N"]


def test_illegal_character():
    with pytest.raises(ValidationError):
        encode_dp(ScoredVocabulary(BASES, 2), "ACXG")


def test_spans_cover_the_input_exactly():
    rng = random.Random(5)
    vocab = ScoredVocabulary(BASES + ["AC", "ACG", "GT", "TTT", "CA"], 2)
    for _ in range(50):
        sequence = "".join(rng.choice("ACGTN") for _ in range(rng.randint(0, 40)))
        spans = encode_dp(vocab, sequence)
        assert "".join(s.token for s in spans) == sequence
        assert all(a.end == b.start for a, b in zip(spans, spans[1:]))
        assert all(sequence[s.start:s.end] == s.token for s in spans)


def test_dp_matches_exhaustive_enumeration():
    rng = random.Random(2024)
    for _ in range(1000):
        p = rng.choice([1, 2])
        extra = {"".join(rng.choice("ACGT") for _ in range(rng.randint(2, 6)))
                 for _ in range(rng.randint(0, 36))}
        tokens = BASES + sorted(extra)
        vocab = ScoredVocabulary(tokens, p)
        sequence = "".join(rng.choice("ACGT") for _ in range(rng.randint(1, 14)))
        assert total_score(vocab, encode_dp(vocab, sequence)) == best_by_enumeration(tokens, sequence, p)


def test_trie_reports_every_prefix_match():
    trie = TokenTrie(["A", "AC", "ACG", "CG"])
    assert list(trie.match_lengths("ACGT", 0, 4)) == [1, 2, 3]
    assert list(trie.match_lengths("ACGT", 1, 4)) == [2]
    assert list(trie.match_lengths("ACGT", 0, 2)) == [1, 2]


def test_vocabulary_requires_bases():
    with pytest.raises(ValidationError):
        ScoredVocabulary(["A", "C", "G"], 2)
    with pytest.raises(ValidationError):
        ScoredVocabulary(BASES + ["AN"], 2)
    with pytest.raises(ValidationError):
        ScoredVocabulary(BASES, 3)


def test_scores_follow_the_exponent():
    report = MergeReport(6, (4, 2, 0, 0), ("A", "C", "G", "T", "ACGT", "GG"))
    assert build_scored_vocab(report, 2).entries[4:] == [("ACGT", 16), ("GG", 4)]
    assert build_scored_vocab(report, 1).entries[4:] == [("ACGT", 4), ("GG", 2)]


class TestTokenizerFile:
    vocab = ScoredVocabulary(BASES + ["TAATTAA", "GC"], 2, config_hash="abc123")

    def test_serialize_then_load(self, tmp_path):
        assert load_tokenizer(serialize_tokenizer(self.vocab)) == self.vocab
        path = tmp_path / "tokenizer.json"
        save_tokenizer(self.vocab, str(path))
        assert read_tokenizer(str(path)) == self.vocab
        assert path.read_bytes() == serialize_tokenizer(self.vocab)

    def test_layout(self):
        data = json.loads(serialize_tokenizer(self.vocab))
        assert data["version"] == 1
        assert data["kind"] == "tokenizer"
        assert data["length_exponent"] == 2
        assert data["config_hash"] == "abc123"
        assert data["tokens"][4] == {"token": "TAATTAA", "score": 49}

    def edited(self, change):
        data = json.loads(serialize_tokenizer(self.vocab))
        change(data)
        return json.dumps(data)

    def test_version_mismatch(self):
        with pytest.raises(TokenizerFormatError):
            load_tokenizer(self.edited(lambda d: d.update(version=2)))

    def test_score_mismatch(self):
        def bump(d):
            d["tokens"][5]["score"] = 5
        with pytest.raises(TokenizerFormatError):
            load_tokenizer(self.edited(bump))

    def test_duplicate_token(self):
        def duplicate(d):
            d["tokens"].append({"token": "GC", "score": 4})
        with pytest.raises(TokenizerFormatError):
            load_tokenizer(self.edited(duplicate))

    def test_checksum_failure(self):
        def swap(d):
            d["tokens"][4], d["tokens"][5] = d["tokens"][5], d["tokens"][4]
        with pytest.raises(TokenizerFormatError):
            load_tokenizer(self.edited(swap))

    def test_not_json(self):
        with pytest.raises(TokenizerFormatError):
            load_tokenizer(b"\x00not json")


def test_corpus_encoding_is_thread_invariant():
    rng = random.Random(9)
    vocab = ScoredVocabulary(BASES + ["AC", "GT", "ACGT", "TTA", "CCC"], 2)
    records = [SequenceRecord(f"s{i}", "".join(rng.choice("ACGTN") for _ in range(200)))
               for i in range(40)]
    serial = encode_corpus(vocab, records, threads=1)
    assert [record_id for record_id, _ in serial] == [r.id for r in records]
    assert encode_corpus(vocab, records, threads=3) == serial


def test_spans_tsv(tmp_path):
    vocab = ScoredVocabulary(BASES + ["AC"], 2)
    results = encode_corpus(vocab, [SequenceRecord("s1", "ACNG")])
    path = tmp_path / "spans.tsv"
    write_spans_tsv(results, str(path))
    assert path.read_text().splitlines() == [
        "seq_id\tstart\tend\ttoken",
        "s1\t0\t2\tAC",
        "s1\t2\t3\tN",
        "s1\t3\t4\tG",
    ]
