"""Evaluation suite: split accuracy, positional exact match, and the n-gram
surface metrics (BLEU-4, ROUGE-L, and an exact-match METEOR variant).

All metrics work on character tokens for CJK text and whitespace tokens for
Latin-script text; sub-query lists are compared position by position.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from .errors import MetricNotApplicableError
from .textkit import TokenMode, preferred_token_mode, tokenize

EMSubset = Literal["complete", "rewritten", "average"]

# Harmonic-mean recall weight and fragmentation penalty constants for the
# METEOR variant (exact unigram matching only).
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

_CHUNK_SEARCH_BUDGET = 250_000
_CHUNK_EXACT_TOKEN_LIMIT = 14


@dataclass(frozen=True)
class EvalInstance:
    """One scored example: predicted vs reference sub-query lists.

    ``rewrite_flags[j]`` is True when reference sub-query j needed rewriting
    (its completed form differs from the filler-stripped raw segment).
    """

    pred: tuple[str, ...]
    ref: tuple[str, ...]
    rewrite_flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.rewrite_flags) != len(self.ref):
            raise ValueError("rewrite_flags must align with the reference sub-queries")


def make_instance(pred: Sequence[str], ref: Sequence[str],
                  rewrite_flags: Optional[Sequence[bool]] = None) -> EvalInstance:
    if rewrite_flags is None:
        rewrite_flags = [False] * len(ref)
    return EvalInstance(tuple(pred), tuple(ref), tuple(bool(f) for f in rewrite_flags))


# ---------------------------------------------------------------------------
# Sentence-level metrics
# ---------------------------------------------------------------------------

def sacc(instances: Sequence[EvalInstance]) -> float:
    """Fraction of instances split into the reference number of sub-queries."""
    if not instances:
        raise ValueError("need at least one instance")
    correct = sum(1 for inst in instances if len(inst.pred) == len(inst.ref))
    return correct / len(instances)


def exact_match(instances: Sequence[EvalInstance], subset: EMSubset = "average") -> float:
    """Position-aligned exact match over reference sub-queries.

    A reference position with no predicted counterpart counts as a mismatch;
    surplus predictions are ignored. ``subset`` restricts the reference
    positions by rewrite flag; an empty subset raises
    MetricNotApplicableError rather than returning 0.
    """
    if not instances:
        raise ValueError("need at least one instance")
    if subset not in ("complete", "rewritten", "average"):
        raise ValueError(f"unknown subset: {subset!r}")
    matched = 0
    total = 0
    for inst in instances:
        for j, ref_query in enumerate(inst.ref):
            if subset == "complete" and inst.rewrite_flags[j]:
                continue
            if subset == "rewritten" and not inst.rewrite_flags[j]:
                continue
            total += 1
            if j < len(inst.pred) and inst.pred[j] == ref_query:
                matched += 1
    if total == 0:
        raise MetricNotApplicableError(f"no reference sub-queries in subset {subset!r}")
    return matched / total


def _tokens(text: str, mode: TokenMode) -> list[str]:
    if not text:
        raise ValueError("metric input must be non-empty")
    tokens = tokenize(text, mode)
    if not tokens:
        raise ValueError("metric input has no tokens")
    return tokens


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _bleu_stats(pred_tokens, ref_tokens, max_order=4):
    """(clipped matches, candidate totals) per order 1..max_order."""
    matches, totals = [], []
    for n in range(1, max_order + 1):
        pred_counts = _ngram_counts(pred_tokens, n)
        ref_counts = _ngram_counts(ref_tokens, n)
        matches.append(sum(min(c, ref_counts[g]) for g, c in pred_counts.items()))
        totals.append(max(len(pred_tokens) - n + 1, 0))
    return matches, totals


def _bleu_from_stats(matches, totals, pred_len, ref_len, smooth: bool) -> float:
    log_sum = 0.0
    for m, t in zip(matches, totals):
        if smooth and m == 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_sum += math.log(m / t)
    score = math.exp(log_sum / len(matches))
    if pred_len <= ref_len:
        score *= math.exp(1 - ref_len / pred_len)
    return min(score, 1.0)


def bleu4(pred: str, ref: str, mode: TokenMode = "character") -> float:
    """Sentence-level BLEU-4 with add-one smoothing on zero-match orders."""
    pred_tokens = _tokens(pred, mode)
    ref_tokens = _tokens(ref, mode)
    matches, totals = _bleu_stats(pred_tokens, ref_tokens)
    return _bleu_from_stats(matches, totals, len(pred_tokens), len(ref_tokens), smooth=True)


def corpus_bleu4(pairs: Sequence[tuple[str, str]], mode: TokenMode = "character") -> float:
    """Corpus-level BLEU-4 over (pred, ref) pairs, raw counts, no smoothing."""
    if not pairs:
        raise ValueError("need at least one pair")
    agg_matches = [0] * 4
    agg_totals = [0] * 4
    pred_len = ref_len = 0
    for pred, ref in pairs:
        pred_tokens = _tokens(pred, mode)
        ref_tokens = _tokens(ref, mode)
        matches, totals = _bleu_stats(pred_tokens, ref_tokens)
        for i in range(4):
            agg_matches[i] += matches[i]
            agg_totals[i] += totals[i]
        pred_len += len(pred_tokens)
        ref_len += len(ref_tokens)
    return _bleu_from_stats(agg_matches, agg_totals, pred_len, ref_len, smooth=False)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(pred: str, ref: str, mode: TokenMode = "character") -> float:
    """LCS-based F1."""
    pred_tokens = _tokens(pred, mode)
    ref_tokens = _tokens(ref, mode)
    lcs = _lcs_length(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def _min_chunks(pred: Sequence[str], ref: Sequence[str]) -> tuple[int, int]:
    """Maximum unigram matches and, among such alignments, minimum chunks.

    An alignment pairs equal tokens one-to-one; a chunk is a maximal run of
    pairs contiguous and in order on both sides. Identical sequences resolve
    immediately; short inputs are solved exactly via memoized search over
    block decompositions; longer or pathological inputs use a deterministic
    greedy longest-block cover (an upper bound on the optimum).
    """
    max_matches = sum((Counter(pred) & Counter(ref)).values())
    if max_matches == 0:
        return 0, 0
    if tuple(pred) == tuple(ref):
        return max_matches, 1
    if max(len(pred), len(ref)) > _CHUNK_EXACT_TOKEN_LIMIT:
        return max_matches, _greedy_chunks(list(pred), list(ref))

    candidates = {
        i: [j for j, token in enumerate(ref) if token == pred[i]]
        for i in range(len(pred))
    }
    full_pred = (1 << len(pred)) - 1
    full_ref = (1 << len(ref)) - 1
    memo: dict[tuple[int, int], tuple[int, int]] = {}
    nodes = 0

    def search(pm: int, rm: int) -> tuple[int, int]:
        # Returns (matches, -chunks) maximized lexicographically.
        nonlocal nodes
        if pm == 0 or rm == 0:
            return (0, 0)
        cached = memo.get((pm, rm))
        if cached is not None:
            return cached
        nodes += 1
        if nodes > _CHUNK_SEARCH_BUDGET:
            raise _BudgetExceeded
        i = (pm & -pm).bit_length() - 1
        best = search(pm & ~(1 << i), rm)  # leave token i unmatched
        for j in candidates[i]:
            if not rm >> j & 1:
                continue
            pm_left, rm_left = pm, rm
            length = 0
            while (
                i + length < len(pred)
                and j + length < len(ref)
                and pm_left >> (i + length) & 1
                and rm_left >> (j + length) & 1
                and pred[i + length] == ref[j + length]
            ):
                pm_left &= ~(1 << (i + length))
                rm_left &= ~(1 << (j + length))
                length += 1
                sub_matches, neg_chunks = search(pm_left, rm_left)
                candidate = (sub_matches + length, neg_chunks - 1)
                if candidate > best:
                    best = candidate
        memo[(pm, rm)] = best
        return best

    try:
        matches, neg_chunks = search(full_pred, full_ref)
        return matches, -neg_chunks
    except _BudgetExceeded:
        return max_matches, _greedy_chunks(list(pred), list(ref))


class _BudgetExceeded(Exception):
    pass


def _greedy_chunks(pred: list, ref: list) -> int:
    """Cover all matchable tokens with repeatedly-chosen longest blocks."""
    pred_free = [True] * len(pred)
    ref_free = [True] * len(ref)
    chunks = 0
    while True:
        best = None  # (length, i, j)
        for i in range(len(pred)):
            if not pred_free[i]:
                continue
            for j in range(len(ref)):
                if not ref_free[j] or ref[j] != pred[i]:
                    continue
                length = 0
                while (
                    i + length < len(pred)
                    and j + length < len(ref)
                    and pred_free[i + length]
                    and ref_free[j + length]
                    and pred[i + length] == ref[j + length]
                ):
                    length += 1
                if best is None or length > best[0]:
                    best = (length, i, j)
        if best is None:
            return chunks
        length, i, j = best
        for k in range(length):
            pred_free[i + k] = False
            ref_free[j + k] = False
        chunks += 1


def meteor_lite(pred: str, ref: str, mode: TokenMode = "character") -> float:
    """Exact-unigram METEOR variant.

    Matches are maximized, then chunks minimized (exactly on short inputs,
    greedily beyond ~14 tokens); F_mean weighs recall with alpha=0.9 and the
    fragmentation penalty is gamma * (chunks/matches)^beta with gamma=0.5,
    beta=3.
    """
    pred_tokens = _tokens(pred, mode)
    ref_tokens = _tokens(ref, mode)
    matches, chunks = _min_chunks(pred_tokens, ref_tokens)
    if matches == 0:
        return 0.0
    precision = matches / len(pred_tokens)
    recall = matches / len(ref_tokens)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    penalty = METEOR_GAMMA * (chunks / matches) ** METEOR_BETA
    return f_mean * (1 - penalty)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    bleu4: float
    meteor: float
    rouge_l: float
    sacc: float
    em_complete: Optional[float]
    em_rewritten: Optional[float]
    em_average: float
    n: int
    n_complete: int
    n_rewritten: int

    def to_dict(self) -> dict:
        return {
            "bleu4": self.bleu4,
            "meteor": self.meteor,
            "rouge_l": self.rouge_l,
            "sacc": self.sacc,
            "em_complete": self.em_complete,
            "em_rewritten": self.em_rewritten,
            "em_average": self.em_average,
            "n": self.n,
            "n_complete": self.n_complete,
            "n_rewritten": self.n_rewritten,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricReport":
        return cls(**{k: payload[k] for k in cls.__dataclass_fields__})

    def table_row(self, label: str = "") -> str:
        """One benchmark-style row, scores scaled to 0-100."""

        def fmt(value):
            return "  n/a" if value is None else f"{100 * value:5.2f}"

        cells = [
            f"BLEU {fmt(self.bleu4)}",
            f"METEOR {fmt(self.meteor)}",
            f"ROUGE {fmt(self.rouge_l)}",
            f"SACC {fmt(self.sacc)}",
            f"EM-Comp {fmt(self.em_complete)}",
            f"EM-Rew {fmt(self.em_rewritten)}",
            f"EM-Avg {fmt(self.em_average)}",
        ]
        prefix = f"{label:<24} " if label else ""
        return prefix + "  ".join(cells)


def concat_queries(queries: Sequence[str], delimiter: str = ";") -> str:
    """Serialize a sub-query list the way generation outputs are compared."""
    return (delimiter + " ").join(queries) + delimiter


def evaluate(
    instances: Sequence[EvalInstance],
    mode: TokenMode | Literal["auto"] = "auto",
) -> MetricReport:
    """Compute every metric over the instance list.

    BLEU is corpus-level over the delimiter-joined query sequences; ROUGE-L
    and METEOR are means of sentence scores. ``mode="auto"`` picks character
    tokens per instance when the reference contains CJK text.
    """
    if not instances:
        raise ValueError("need at least one instance")
    rouge_scores = []
    meteor_scores = []
    agg_matches = [0] * 4
    agg_totals = [0] * 4
    pred_len = ref_len = 0
    for inst in instances:
        pred_concat = concat_queries(inst.pred) if inst.pred else ""
        ref_concat = concat_queries(inst.ref)
        inst_mode: TokenMode = preferred_token_mode(ref_concat) if mode == "auto" else mode
        if not pred_concat:
            rouge_scores.append(0.0)
            meteor_scores.append(0.0)
            ref_len += len(_tokens(ref_concat, inst_mode))
            continue
        pred_tokens = _tokens(pred_concat, inst_mode)
        ref_tokens = _tokens(ref_concat, inst_mode)
        rouge_scores.append(rouge_l(pred_concat, ref_concat, inst_mode))
        meteor_scores.append(meteor_lite(pred_concat, ref_concat, inst_mode))
        matches, totals = _bleu_stats(pred_tokens, ref_tokens)
        for i in range(4):
            agg_matches[i] += matches[i]
            agg_totals[i] += totals[i]
        pred_len += len(pred_tokens)
        ref_len += len(ref_tokens)

    def em_or_none(subset: EMSubset) -> Optional[float]:
        try:
            return exact_match(instances, subset)
        except MetricNotApplicableError:
            return None

    n_complete = sum(1 for inst in instances for flag in inst.rewrite_flags if not flag)
    n_rewritten = sum(1 for inst in instances for flag in inst.rewrite_flags if flag)
    return MetricReport(
        bleu4=_bleu_from_stats(agg_matches, agg_totals, pred_len, ref_len, smooth=False)
        if pred_len
        else 0.0,
        meteor=statistics.fmean(meteor_scores),
        rouge_l=statistics.fmean(rouge_scores),
        sacc=sacc(instances),
        em_complete=em_or_none("complete"),
        em_rewritten=em_or_none("rewritten"),
        em_average=exact_match(instances, "average"),
        n=len(instances),
        n_complete=n_complete,
        n_rewritten=n_rewritten,
    )


def median_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Element-wise median across runs; None-valued cells are skipped."""
    if not reports:
        raise ValueError("need at least one report")

    def med(values):
        present = [v for v in values if v is not None]
        return statistics.median(present) if present else None

    fields = list(MetricReport.__dataclass_fields__)
    data = {f: med([getattr(r, f) for r in reports]) for f in fields}
    return MetricReport(**data)
