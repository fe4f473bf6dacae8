"""
encoder.py - Length-aware scored vocabulary and dynamic-programming segmentation

Every token t scores |t|^p (p = 2 by default, p = 1 for the linear-length
ablation). Scores are integers, so the DP objective is exact.
"""

import csv
import hashlib
import json
import logging
from multiprocessing import Pool
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from tqdm import tqdm

from evolen.core.errors import TokenizerFormatError, ValidationError
from evolen.core.merge import MergeReport
from evolen.core.models import BASE_TOKENS, FORMAT_VERSION, NUCLEOTIDES, SequenceRecord

# Set up logger for this module
logger = logging.getLogger(__name__)

LENGTH_EXPONENTS = (1, 2)

_END = ""


class TokenSpan(NamedTuple):
    """A token placed on its input sequence, 0-based half-open"""

    token: str
    start: int
    end: int


class TokenTrie:
    """
    Character trie over the vocabulary

    match_lengths() reports every vocabulary token that is a prefix of the
    text at a position, in O(max_token_len) steps.
    """

    def __init__(self, tokens: Iterable[str] = ()):
        self.root: Dict[str, dict] = {}
        for token in tokens:
            self.insert(token)

    def insert(self, token: str) -> None:
        node = self.root
        for char in token:
            node = node.setdefault(char, {})
        node[_END] = True

    def match_lengths(self, text: str, start: int, end: int) -> Iterator[int]:
        node = self.root
        for k in range(start, end):
            node = node.get(text[k])
            if node is None:
                return
            if _END in node:
                yield k - start + 1


class ScoredVocabulary:
    """
    The serialized tokenizer: tokens in merge order, each scored |t|^p
    """

    def __init__(self, tokens: Sequence[str], length_exponent: int = 2,
                 config_hash: Optional[str] = None):
        if length_exponent not in LENGTH_EXPONENTS:
            raise ValidationError(f"length_exponent must be 1 or 2, got {length_exponent}")
        tokens = tuple(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValidationError("vocabulary contains duplicate tokens")
        for token in tokens:
            if not token or set(token) - set(NUCLEOTIDES):
                raise ValidationError(f"token '{token}' is not a string over A, C, G, T")
        missing = set(BASE_TOKENS) - set(tokens)
        if missing:
            raise ValidationError(f"vocabulary lacks base tokens: {''.join(sorted(missing))}")
        self.tokens = tokens
        self.length_exponent = length_exponent
        self.config_hash = config_hash
        self.token_set = frozenset(tokens)
        self.max_token_len = max(len(t) for t in tokens)
        self.trie = TokenTrie(tokens)

    def score(self, token: str) -> int:
        return len(token) ** self.length_exponent

    @property
    def entries(self) -> List[Tuple[str, int]]:
        return [(t, self.score(t)) for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_set

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoredVocabulary):
            return NotImplemented
        return (self.tokens == other.tokens
                and self.length_exponent == other.length_exponent
                and self.config_hash == other.config_hash)

    def __repr__(self) -> str:
        return (f"ScoredVocabulary(size={len(self.tokens)}, p={self.length_exponent}, "
                f"max_token_len={self.max_token_len})")


def build_scored_vocab(report: Union[MergeReport, Sequence[str]], length_exponent: int = 2,
                       config_hash: Optional[str] = None) -> ScoredVocabulary:
    """
    Score every merged token |t|^p and build the prefix lookup
    """
    tokens = report.final_tokens if isinstance(report, MergeReport) else tuple(report)
    vocab = ScoredVocabulary(tokens, length_exponent, config_hash)
    logger.info(f"Built scored vocabulary: {len(vocab)} tokens, p={length_exponent}, "
                f"max token length {vocab.max_token_len}")
    return vocab


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def _segment_run(vocab: ScoredVocabulary, sequence: str, start: int, end: int,
                 spans: List[TokenSpan]) -> None:
    """
    Optimal segmentation of sequence[start:end] (no N inside)

    best[i] is the top score of the first i bases; last[i] is the length of
    the final token of that segmentation. On equal scores the longer final
    token wins.
    """
    n = end - start
    p = vocab.length_exponent
    best = [-1] * (n + 1)
    last = [0] * (n + 1)
    best[0] = 0
    match_lengths = vocab.trie.match_lengths
    limit = vocab.max_token_len
    for j in range(n):
        base = best[j]
        if base < 0:
            continue
        for length in match_lengths(sequence, start + j, min(end, start + j + limit)):
            i = j + length
            candidate = base + length ** p
            if candidate > best[i] or (candidate == best[i] and length > last[i]):
                best[i] = candidate
                last[i] = length
    if best[n] < 0:
        raise ValidationError(f"sequence segment at {start} cannot be segmented")

    pieces = []
    i = n
    while i > 0:
        length = last[i]
        pieces.append(TokenSpan(sequence[start + i - length:start + i], start + i - length, start + i))
        i -= length
    spans.extend(reversed(pieces))


def encode_dp(vocab: ScoredVocabulary, sequence: str) -> List[TokenSpan]:
    """
    Segment a sequence into contiguous vocabulary tokens of maximal total score

    Each maximal {A,C,G,T} run is segmented independently; every N becomes
    its own single-character span and is excluded from the objective.

    Raises:
        ValidationError: a character outside {A,C,G,T,N}
    """
    spans: List[TokenSpan] = []
    run_start = 0
    for i, char in enumerate(sequence):
        if char == "N":
            if run_start < i:
                _segment_run(vocab, sequence, run_start, i, spans)
            spans.append(TokenSpan("N", i, i + 1))
            run_start = i + 1
        elif char not in NUCLEOTIDES:
            raise ValidationError(f"illegal character '{char}' at position {i}")
    if run_start < len(sequence):
        _segment_run(vocab, sequence, run_start, len(sequence), spans)
    return spans


def encode_tokens(vocab: ScoredVocabulary, sequence: str) -> List[str]:
    """Token strings of the optimal segmentation, N spans included"""
    return [span.token for span in encode_dp(vocab, sequence)]


def total_score(vocab: ScoredVocabulary, spans: Iterable[TokenSpan]) -> int:
    """Objective value of a segmentation; N spans score nothing"""
    return sum(vocab.score(s.token) for s in spans if s.token != "N")


_worker_vocab: Optional[ScoredVocabulary] = None


def _init_worker(vocab: ScoredVocabulary) -> None:
    global _worker_vocab
    _worker_vocab = vocab


def _encode_worker(item: Tuple[str, str]) -> Tuple[str, List[TokenSpan]]:
    record_id, bases = item
    return record_id, encode_dp(_worker_vocab, bases)


def encode_corpus(vocab: ScoredVocabulary, records: Sequence[SequenceRecord], threads: int = 1,
                  show_progress: bool = False) -> List[Tuple[str, List[TokenSpan]]]:
    """
    Encode many records; output order follows input order for any thread count
    """
    items = [(r.id, r.bases) for r in records]
    if threads > 1 and len(items) > 1:
        chunksize = max(1, len(items) // (threads * 4))
        with Pool(threads, initializer=_init_worker, initargs=(vocab,)) as pool:
            results = list(tqdm(pool.imap(_encode_worker, items, chunksize=chunksize),
                                total=len(items), disable=not show_progress, desc="encode"))
    else:
        results = [(record_id, encode_dp(vocab, bases))
                   for record_id, bases in tqdm(items, disable=not show_progress, desc="encode")]
    logger.info(f"Encoded {len(results)} sequences into "
                f"{sum(len(spans) for _, spans in results)} spans")
    return results


def write_spans_tsv(results: Iterable[Tuple[str, List[TokenSpan]]], path: str) -> None:
    """
    Write encoded spans as TSV: seq_id, start, end, token
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["seq_id", "start", "end", "token"])
        for record_id, spans in results:
            for span in spans:
                writer.writerow([record_id, span.start, span.end, span.token])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _checksum(length_exponent: int, entries: Sequence[Tuple[str, int]]) -> str:
    payload = json.dumps(
        {"length_exponent": length_exponent, "tokens": [[t, s] for t, s in entries]},
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def serialize_tokenizer(vocab: ScoredVocabulary) -> bytes:
    """
    Encode a tokenizer as JSON bytes; identical vocabularies give identical bytes
    """
    entries = vocab.entries
    data = {
        "version": FORMAT_VERSION,
        "kind": "tokenizer",
        "length_exponent": vocab.length_exponent,
        "config_hash": vocab.config_hash,
        "checksum": _checksum(vocab.length_exponent, entries),
        "tokens": [{"token": t, "score": s} for t, s in entries],
    }
    return (json.dumps(data, indent=2) + "\n").encode("utf-8")


def load_tokenizer(data: Union[bytes, str]) -> ScoredVocabulary:
    """
    Decode a tokenizer produced by serialize_tokenizer

    Raises:
        TokenizerFormatError: invalid JSON, version mismatch, duplicate
            tokens, a score different from |t|^p, or a checksum failure
    """
    try:
        parsed = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise TokenizerFormatError(f"tokenizer is not valid JSON: {e}")
    if not isinstance(parsed, dict):
        raise TokenizerFormatError("tokenizer must be a JSON object")
    if parsed.get("version") != FORMAT_VERSION:
        raise TokenizerFormatError(
            f"tokenizer version {parsed.get('version')} does not match {FORMAT_VERSION}"
        )
    if parsed.get("kind", "tokenizer") != "tokenizer":
        raise TokenizerFormatError(f"expected a tokenizer, found kind={parsed.get('kind')}")

    exponent = parsed.get("length_exponent")
    if exponent not in LENGTH_EXPONENTS:
        raise TokenizerFormatError(f"invalid length_exponent {exponent}")
    try:
        entries = [(entry["token"], entry["score"]) for entry in parsed["tokens"]]
    except (KeyError, TypeError):
        raise TokenizerFormatError("malformed token list")

    seen = set()
    for token, score in entries:
        if token in seen:
            raise TokenizerFormatError(f"duplicate token '{token}'")
        seen.add(token)
        if score != len(token) ** exponent:
            raise TokenizerFormatError(
                f"token '{token}' has score {score}, expected {len(token) ** exponent}"
            )
    if parsed.get("checksum") != _checksum(exponent, entries):
        raise TokenizerFormatError("tokenizer checksum does not match its contents")

    try:
        return ScoredVocabulary([t for t, _ in entries], exponent, parsed.get("config_hash"))
    except ValidationError as e:
        raise TokenizerFormatError(str(e))


def save_tokenizer(vocab: ScoredVocabulary, path: str) -> None:
    with open(path, "wb") as f:
        f.write(serialize_tokenizer(vocab))


def read_tokenizer(path: str) -> ScoredVocabulary:
    with open(path, "rb") as f:
        return load_tokenizer(f.read())
