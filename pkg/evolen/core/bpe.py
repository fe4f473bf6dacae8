"""
bpe.py - Byte-pair-encoding trainer over nucleotide sequence pools

Sequences are independent training units and N is a hard boundary: a
sequence is split at every N before training, so no token contains N.
The most frequent adjacent pair is merged at each step; ties go to the
lexicographically smallest merged string (then the smallest left symbol).
"""

import heapq
import json
import logging
from collections import Counter
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from tqdm import tqdm

from evolen.core.errors import TokenizerFormatError, ValidationError
from evolen.core.models import BASE_TOKENS, FORMAT_VERSION, SequencePool, SequenceRecord

# Set up logger for this module
logger = logging.getLogger(__name__)

DEFAULT_MIN_FREQUENCY = 2

Pair = Tuple[str, str]


@dataclass(frozen=True)
class BpeVocabulary:
    """
    A trained BPE vocabulary

    tokens are in creation order (A, C, G, T, then one token per new merged
    string); merges hold every merge step in order; frequencies align with
    tokens (base tokens: character counts, merged tokens: pair count at the
    step that created them).
    """

    tokens: Tuple[str, ...]
    merges: Tuple[Pair, ...]
    category_label: str
    frequencies: Tuple[int, ...]

    def __post_init__(self):
        if tuple(self.tokens[:4]) != BASE_TOKENS:
            raise ValidationError("the first four tokens must be A, C, G, T")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValidationError("vocabulary contains duplicate tokens")
        if len(self.frequencies) != len(self.tokens):
            raise ValidationError("frequencies must align with tokens")
        known = set(BASE_TOKENS)
        created = list(BASE_TOKENS)
        for left, right in self.merges:
            if left not in known or right not in known:
                raise ValidationError(f"merge ({left}, {right}) uses a token not created earlier")
            merged = left + right
            if merged not in known:
                known.add(merged)
                created.append(merged)
        if tuple(created) != tuple(self.tokens):
            raise ValidationError("tokens do not match the merge list")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_set

    @property
    def token_set(self) -> frozenset:
        return frozenset(self.tokens)

    def frequency_map(self) -> Dict[str, int]:
        return dict(zip(self.tokens, self.frequencies))

    def to_dict(self) -> Dict[str, object]:
        return {
            "version": FORMAT_VERSION,
            "kind": "bpe",
            "category_label": self.category_label,
            "length_exponent": None,
            "tokens": [{"token": t, "frequency": f} for t, f in zip(self.tokens, self.frequencies)],
            "merges": [[left, right] for left, right in self.merges],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "BpeVocabulary":
        if data.get("version") != FORMAT_VERSION:
            raise TokenizerFormatError(f"unsupported vocabulary version {data.get('version')}")
        if data.get("kind") != "bpe":
            raise TokenizerFormatError(f"expected a BPE vocabulary, found kind={data.get('kind')}")
        try:
            return cls(
                tuple(entry["token"] for entry in data["tokens"]),
                tuple((left, right) for left, right in data["merges"]),
                data.get("category_label", ""),
                tuple(int(entry["frequency"]) for entry in data["tokens"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise TokenizerFormatError(f"malformed vocabulary file: {e}")
        except ValidationError as e:
            raise TokenizerFormatError(str(e))


def save_bpe(vocab: BpeVocabulary, path: str) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(vocab.to_dict(), f, indent=2)
        f.write("\n")


def load_bpe(path: str) -> BpeVocabulary:
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise TokenizerFormatError(f"{path} is not valid JSON: {e}")
    return BpeVocabulary.from_dict(data)


def base_vocabulary(label: str = "") -> BpeVocabulary:
    """The four-token vocabulary with no merges, used for a pool with no sequences"""
    return BpeVocabulary(BASE_TOKENS, (), label, (0,) * len(BASE_TOKENS))


def split_fragments(bases: str) -> List[str]:
    """Split a sequence at N characters, dropping empty pieces"""
    return [piece for piece in bases.split("N") if piece]


def merge_symbols(symbols: Sequence[str], left: str, right: str) -> List[str]:
    """Apply one merge left to right without overlaps"""
    merged = left + right
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _pairs(symbols: Sequence[str]) -> List[Pair]:
    return list(zip(symbols, symbols[1:]))


def _count_chunk(chunk: List[Tuple[str, int]]) -> Counter:
    counts = Counter()
    for word, count in chunk:
        for pair in zip(word, word[1:]):
            counts[pair] += count
    return counts


def count_pairs(words: Sequence[Tuple[str, int]], threads: int = 1) -> Counter:
    """
    Count adjacent character pairs over (word, multiplicity) items

    With threads > 1 the words are split into contiguous chunks counted in
    worker processes; the chunk counters are summed in chunk order.
    """
    if threads <= 1 or len(words) < 2 * threads:
        return _count_chunk(list(words))
    size = -(-len(words) // threads)
    chunks = [list(words[i:i + size]) for i in range(0, len(words), size)]
    with Pool(threads) as pool:
        partial_counts = pool.map(_count_chunk, chunks)
    total = Counter()
    for counts in partial_counts:
        total.update(counts)
    return total


def _pool_sequences(pool: Union[SequencePool, Iterable[SequenceRecord], Iterable[str]]) -> List[str]:
    items = pool.sequences if isinstance(pool, SequencePool) else pool
    return [item.bases if isinstance(item, SequenceRecord) else item for item in items]


class BpeTrainer:
    """
    Incremental BPE trainer

    Pair counts are maintained incrementally: after each merge only the
    words containing the merged pair are rewritten, and a lazy max-heap
    keyed on (-count, merged string, left symbol) yields the next merge.
    """

    def __init__(self, target_size: int, min_frequency: int = DEFAULT_MIN_FREQUENCY,
                 label: str = "", threads: int = 1, show_progress: bool = False):
        if target_size < 4:
            raise ValidationError(f"target_size must be >= 4, got {target_size}")
        if min_frequency < 1:
            raise ValidationError(f"min_frequency must be >= 1, got {min_frequency}")
        self.target_size = target_size
        self.min_frequency = min_frequency
        self.label = label
        self.threads = threads
        self.show_progress = show_progress
        self.words: List[str] = []
        self.symbols: List[List[str]] = []

    def fit(self, pool: Union[SequencePool, Iterable[SequenceRecord], Iterable[str]]) -> BpeVocabulary:
        """
        Train on a sequence pool (or any iterable of records or strings)
        """
        label = self.label or (pool.category if isinstance(pool, SequencePool) else "")
        sequences = _pool_sequences(pool)
        if not sequences:
            raise ValidationError("cannot train on an empty pool")

        word_counts = Counter()
        base_counts = Counter()
        for bases in sequences:
            for fragment in split_fragments(bases):
                word_counts[fragment] += 1
                base_counts.update(fragment)

        self.words = sorted(word_counts)
        counts = [word_counts[w] for w in self.words]
        self.symbols = [list(w) for w in self.words]
        logger.info(f"Training BPE '{label}' on {len(sequences)} sequences "
                    f"({len(self.words)} distinct fragments), target size {self.target_size}")

        pair_counts = count_pairs(list(zip(self.words, counts)), self.threads)
        where: Dict[Pair, set] = {}
        for idx, symbols in enumerate(self.symbols):
            for pair in _pairs(symbols):
                where.setdefault(pair, set()).add(idx)

        heap = [(-c, a + b, a, b) for (a, b), c in pair_counts.items()]
        heapq.heapify(heap)

        tokens = list(BASE_TOKENS)
        frequencies = [base_counts[t] for t in BASE_TOKENS]
        known = set(tokens)
        merges: List[Pair] = []

        progress = tqdm(total=self.target_size - len(tokens), disable=not self.show_progress,
                        desc=f"bpe {label}".strip())
        while len(tokens) < self.target_size:
            best = self._pop_best(heap, pair_counts)
            if best is None:
                logger.warning(f"BPE '{label}' stopped at {len(tokens)} tokens: "
                               f"no pair occurs {self.min_frequency} or more times")
                break
            (left, right), count = best
            merged = left + right
            merges.append((left, right))
            if merged not in known:
                known.add(merged)
                tokens.append(merged)
                frequencies.append(count)
                progress.update(1)
            logger.debug(f"merge {len(merges)}: {left} + {right} -> {merged} ({count})")
            self._apply(left, right, counts, pair_counts, where, heap)
        progress.close()

        logger.info(f"BPE '{label}' finished with {len(tokens)} tokens after {len(merges)} merges")
        return BpeVocabulary(tuple(tokens), tuple(merges), label, tuple(frequencies))

    def _pop_best(self, heap, pair_counts: Counter) -> Optional[Tuple[Pair, int]]:
        while heap:
            neg_count, _, left, right = heapq.heappop(heap)
            count = pair_counts.get((left, right), 0)
            if count != -neg_count:
                continue
            if count < self.min_frequency:
                return None
            return (left, right), count
        return None

    def _apply(self, left: str, right: str, counts: List[int], pair_counts: Counter,
               where: Dict[Pair, set], heap) -> None:
        delta = Counter()
        for idx in sorted(where.pop((left, right), ())):
            old = self.symbols[idx]
            new = merge_symbols(old, left, right)
            if len(new) == len(old):
                continue
            multiplicity = counts[idx]
            old_pairs = _pairs(old)
            new_pairs = _pairs(new)
            for pair in old_pairs:
                delta[pair] -= multiplicity
            for pair in new_pairs:
                delta[pair] += multiplicity
            for pair in set(old_pairs) - set(new_pairs):
                holders = where.get(pair)
                if holders is not None:
                    holders.discard(idx)
            for pair in new_pairs:
                where.setdefault(pair, set()).add(idx)
            self.symbols[idx] = new

        for pair, change in sorted(delta.items()):
            if change == 0:
                continue
            value = pair_counts.get(pair, 0) + change
            if value <= 0:
                pair_counts.pop(pair, None)
                where.pop(pair, None)
            else:
                pair_counts[pair] = value
                heapq.heappush(heap, (-value, pair[0] + pair[1], pair[0], pair[1]))

    def final_symbols(self) -> Dict[str, List[str]]:
        """Segmentation of every distinct training fragment after training"""
        return {word: list(symbols) for word, symbols in zip(self.words, self.symbols)}


def train_bpe(pool: Union[SequencePool, Iterable[SequenceRecord], Iterable[str]], target_size: int,
              min_frequency: int = DEFAULT_MIN_FREQUENCY, label: str = "",
              threads: int = 1, show_progress: bool = False) -> BpeVocabulary:
    """
    Train a BPE vocabulary of at most target_size tokens on a pool

    Training stops early when no adjacent pair occurs at least
    min_frequency times.

    Raises:
        ValidationError: empty pool or target_size < 4
    """
    trainer = BpeTrainer(target_size, min_frequency, label, threads, show_progress)
    return trainer.fit(pool)


def apply_merges(vocab: BpeVocabulary, bases: str) -> List[str]:
    """
    Replay the merge list on a sequence; N characters stay single symbols
    """
    out: List[str] = []
    pieces = bases.split("N")
    for i, piece in enumerate(pieces):
        if i:
            out.append("N")
        symbols = list(piece)
        for left, right in vocab.merges:
            if len(symbols) < 2:
                break
            symbols = merge_symbols(symbols, left, right)
        out.extend(symbols)
    return out
