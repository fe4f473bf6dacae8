"""
merge.py - Conservation-prioritized merging of the three category vocabularies

Tier order:
    1. tokens shared by all three vocabularies
    2. conserved-specific tokens
    3. tokens shared by conserved and neutral but not accelerated
    4. neutral-specific tokens

Accelerated-only and (neutral and accelerated)-only tokens never enter.
"""

import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from evolen.core.bpe import BpeVocabulary
from evolen.core.errors import ValidationError
from evolen.core.models import BASE_TOKENS

# Set up logger for this module
logger = logging.getLogger(__name__)

TIER_NAMES = ("tier1", "tier2", "tier3", "tier4")


@dataclass(frozen=True)
class MergeReport:
    """
    Result of a vocabulary merge

    tier_counts holds how many tokens each tier contributed; truncated_tier is
    the first tier (1-4) that had eligible tokens left out, or None. The
    no-priority merge reports its whole output under tier 1.
    """

    target_size: int
    tier_counts: Tuple[int, int, int, int]
    final_tokens: Tuple[str, ...]
    truncated_tier: Optional[int] = None
    strategy: str = "priority"

    def __post_init__(self):
        if sum(self.tier_counts) != len(self.final_tokens):
            raise ValidationError("tier counts do not add up to the token count")
        if len(self.final_tokens) > self.target_size:
            raise ValidationError("merged vocabulary exceeds the target size")
        if len(set(self.final_tokens)) != len(self.final_tokens):
            raise ValidationError("merged vocabulary contains duplicates")
        if not set(BASE_TOKENS) <= set(self.final_tokens):
            raise ValidationError("merged vocabulary must contain A, C, G, T")

    def to_dict(self) -> Dict[str, object]:
        return {
            "strategy": self.strategy,
            "target_size": self.target_size,
            "tier_counts": dict(zip(TIER_NAMES, self.tier_counts)),
            "truncated_tier": self.truncated_tier,
            "final_size": len(self.final_tokens),
            "final_tokens": list(self.final_tokens),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "MergeReport":
        return cls(
            data["target_size"],
            tuple(data["tier_counts"][name] for name in TIER_NAMES),
            tuple(data["final_tokens"]),
            data.get("truncated_tier"),
            data.get("strategy", "priority"),
        )


def save_report(report: MergeReport, path: str) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")


def load_report(path: str) -> MergeReport:
    with open(path, "r") as f:
        return MergeReport.from_dict(json.load(f))


def _intra_tier_order(tokens: Iterable[str]) -> List[str]:
    """Longest first, then lexicographic"""
    return sorted(tokens, key=lambda t: (-len(t), t))


def priority_tiers(v_con: Iterable[str], v_neu: Iterable[str], v_acc: Iterable[str]) -> List[List[str]]:
    """
    The four ordered tiers; base tokens open tier 1
    """
    con, neu, acc = set(v_con), set(v_neu), set(v_acc)
    tier1 = con & neu & acc
    tiers = [
        [t for t in BASE_TOKENS if t in tier1] + _intra_tier_order(tier1 - set(BASE_TOKENS)),
        _intra_tier_order(con - (neu | acc)),
        _intra_tier_order((con & neu) - acc),
        _intra_tier_order(neu - (con | acc)),
    ]
    for i in range(len(tiers)):
        for j in range(i + 1, len(tiers)):
            assert not set(tiers[i]) & set(tiers[j]), "tiers must be pairwise disjoint"
    return tiers


def fill_tiers(tiers: Sequence[Sequence[str]], target_size: int, strategy: str) -> MergeReport:
    """Take whole tiers in order until target_size; truncated_tier is the first tier cut short"""
    final: List[str] = []
    tier_counts = [0, 0, 0, 0]
    truncated = None
    for number, tier in enumerate(tiers, start=1):
        room = target_size - len(final)
        taken = list(tier[:max(room, 0)])
        final.extend(taken)
        tier_counts[number - 1] = len(taken)
        if len(taken) < len(tier) and truncated is None:
            truncated = number
    if len(final) < target_size:
        logger.warning(f"All tiers exhausted: merged vocabulary has {len(final)} tokens, "
                       f"{target_size} requested")
    report = MergeReport(target_size, tuple(tier_counts), tuple(final), truncated, strategy)
    logger.info(f"Merged vocabulary ({strategy}): {len(final)} tokens, tiers {tier_counts}"
                + (f", truncated in tier {truncated}" if truncated else ""))
    return report


def _check_inputs(vocabularies: Sequence[BpeVocabulary], target_size: int) -> None:
    if target_size < 4:
        raise ValidationError(f"target_size must be >= 4, got {target_size}")
    for vocab in vocabularies:
        if not set(BASE_TOKENS) <= vocab.token_set:
            raise ValidationError(f"vocabulary '{vocab.category_label}' lacks base tokens")


def merge_vocabularies(v_con: BpeVocabulary, v_neu: BpeVocabulary, v_acc: BpeVocabulary,
                       target_size: int) -> MergeReport:
    """
    Merge three category vocabularies tier by tier up to target_size

    Within a tier tokens are ordered longest first, then lexicographically,
    so the output at size k is a prefix of the output at size k + 1.
    """
    _check_inputs((v_con, v_neu, v_acc), target_size)
    tiers = priority_tiers(v_con.tokens, v_neu.tokens, v_acc.tokens)
    return fill_tiers(tiers, target_size, "priority")


def merge_no_priority(v_con: BpeVocabulary, v_neu: BpeVocabulary, v_acc: BpeVocabulary,
                      target_size: int) -> MergeReport:
    """
    Union of the three vocabularies ordered by summed corpus frequency

    Ties go to the longer token, then lexicographic order. Base tokens are
    always kept and lead the output.
    """
    _check_inputs((v_con, v_neu, v_acc), target_size)
    totals: Dict[str, int] = {}
    for vocab in (v_con, v_neu, v_acc):
        for token, frequency in zip(vocab.tokens, vocab.frequencies):
            totals[token] = totals.get(token, 0) + frequency
    rest = sorted(
        (t for t in totals if t not in BASE_TOKENS),
        key=lambda t: (-totals[t], -len(t), t),
    )
    return fill_tiers([list(BASE_TOKENS) + rest, [], [], []], target_size, "no_priority")
