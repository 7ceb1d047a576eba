"""Tokenization, punctuation handling, filler-lexicon matching, and the
character n-gram language model used as the default fluency scorer."""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

from .errors import ConfigError

TokenMode = Literal["character", "whitespace"]

# Context padding / end-of-string symbols for the n-gram model. Control
# characters so they cannot collide with real query text.
START_MARKER = ""
END_MARKER = ""

_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2A6DF),
)


def tokenize(text: str, mode: TokenMode = "character") -> list[str]:
    """Split ``text`` into tokens.

    Character mode yields one token per Unicode code point, skipping
    whitespace; whitespace mode splits on runs of whitespace. Empty input
    yields an empty list.
    """
    if mode == "character":
        return [ch for ch in text if not ch.isspace()]
    if mode == "whitespace":
        return text.split()
    raise ValueError(f"unknown token mode: {mode!r}")


def strip_punctuation(text: str) -> str:
    """Remove every code point whose Unicode general category is P*.

    Covers ASCII and CJK fullwidth punctuation alike; all other code points
    are preserved in order. Idempotent.
    """
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def is_punctuation_free(text: str) -> bool:
    return all(not unicodedata.category(ch).startswith("P") for ch in text)


def preferred_token_mode(text: str) -> TokenMode:
    """Character tokens for text containing CJK ideographs, whitespace otherwise."""
    for ch in text:
        cp = ord(ch)
        for lo, hi in _CJK_RANGES:
            if lo <= cp <= hi:
                return "character"
    return "whitespace"


# ---------------------------------------------------------------------------
# Filler lexicon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LexiconEntry:
    """One text filler.

    ``junctions`` restricts the junction positions where the filler may be
    sampled: ``None`` means any junction, ``0`` the prefix slot of the first
    sub-query, ``-1`` the final junction.
    """

    text: str
    junctions: Optional[frozenset[int]] = None

    def junction0_only(self) -> bool:
        return self.junctions == frozenset({0})


class FillerLexicon:
    """Ordered collection of filler strings with junction constraints.

    Matching is longest-match-first: when two entries could match at the same
    offset, the longer one wins, so e.g. a three-character filler is never
    reported as its two-character suffix.
    """

    def __init__(self, entries: Iterable[LexiconEntry]):
        entries = tuple(entries)
        texts = [e.text for e in entries]
        if any(t == "" for t in texts):
            raise ValueError("lexicon entries must be non-empty")
        if len(set(texts)) != len(texts):
            raise ValueError("lexicon entries must be unique")
        self.entries = entries
        self._by_length = tuple(sorted(entries, key=lambda e: -len(e.text)))
        self._by_text = {e.text: e for e in entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, text: str) -> bool:
        return text in self._by_text

    def entry(self, text: str) -> LexiconEntry:
        return self._by_text[text]

    def texts(self) -> list[str]:
        return [e.text for e in self.entries]

    def longest_first(self) -> tuple[LexiconEntry, ...]:
        return self._by_length

    @classmethod
    def from_file(cls, path) -> "FillerLexicon":
        """Load a lexicon: one filler per line, optional tab-separated
        comma-joined junction indices (or ``any``)."""
        entries = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            text = parts[0]
            junctions: Optional[frozenset[int]] = None
            if len(parts) > 1 and parts[1].strip() and parts[1].strip() != "any":
                junctions = frozenset(int(p) for p in parts[1].split(","))
            entries.append(LexiconEntry(text, junctions))
        return cls(entries)

    def to_file(self, path) -> None:
        lines = []
        for e in self.entries:
            if e.junctions is None:
                lines.append(e.text)
            else:
                lines.append(e.text + "\t" + ",".join(str(j) for j in sorted(e.junctions)))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# The two first-slot fillers, the sixteen interior connectives, and the
# closing connective, in table order.
FIRST_SLOT_FILLERS = ("先", "首先")
REGULAR_FILLERS = (
    "然后", "还有", "我还想知道", "另外我想知道", "再一个就是", "以及", "和",
    "还要", "并且", "再然后", "另外", "其次", "同时", "除了这个还有", "接着",
    "紧接着", "接下来",
)
LAST_SLOT_FILLER = "最后"


def default_lexicon() -> FillerLexicon:
    """The built-in connective lexicon used for sampling and splitting."""
    entries = [LexiconEntry(t, frozenset({0})) for t in FIRST_SLOT_FILLERS]
    entries += [LexiconEntry(t) for t in REGULAR_FILLERS]
    entries.append(LexiconEntry(LAST_SLOT_FILLER, frozenset({-1})))
    return FillerLexicon(entries)


def match_fillers(text: str, lexicon: FillerLexicon) -> list[tuple[int, int, str]]:
    """Scan ``text`` left to right for lexicon entries.

    Returns non-overlapping ``(start, end, filler)`` spans in code-point
    offsets, longest match winning at each position.
    """
    matches = []
    i = 0
    n = len(text)
    by_length = lexicon.longest_first()
    while i < n:
        for entry in by_length:
            if text.startswith(entry.text, i):
                matches.append((i, i + len(entry.text), entry.text))
                i += len(entry.text)
                break
        else:
            i += 1
    return matches


# ---------------------------------------------------------------------------
# Character n-gram language model
# ---------------------------------------------------------------------------

class CharNGramLM:
    """Add-k smoothed character n-gram model.

    Each training string is padded with ``order - 1`` start markers and one
    end marker; the end-of-string transition is counted and scored like any
    other character. The vocabulary is the set of predicted symbols
    (observed characters plus the end marker), and smoothing guarantees a
    finite perplexity on out-of-vocabulary input.
    """

    def __init__(self, order: int, smoothing: float = 1.0):
        if order < 1:
            raise ValueError("order must be >= 1")
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self.order = order
        self.smoothing = smoothing
        self.counts: dict[str, dict[str, int]] = {}
        self._context_totals: dict[str, int] = {}
        self.vocabulary: set[str] = set()

    def _observe(self, context: str, char: str) -> None:
        bucket = self.counts.setdefault(context, {})
        bucket[char] = bucket.get(char, 0) + 1
        self._context_totals[context] = self._context_totals.get(context, 0) + 1
        self.vocabulary.add(char)

    def train(self, corpus: Sequence[str]) -> "CharNGramLM":
        for text in corpus:
            padded = START_MARKER * (self.order - 1) + text + END_MARKER
            for i in range(self.order - 1, len(padded)):
                self._observe(padded[i - self.order + 1:i], padded[i])
        return self

    def log_prob(self, context: str, char: str) -> float:
        k = self.smoothing
        count = self.counts.get(context, {}).get(char, 0)
        total = self._context_totals.get(context, 0)
        return math.log((count + k) / (total + k * len(self.vocabulary)))

    def perplexity(self, text: str) -> float:
        """exp of the mean negative log-likelihood per predicted symbol."""
        if not text:
            raise ValueError("perplexity of empty text is undefined")
        padded = START_MARKER * (self.order - 1) + text + END_MARKER
        nll = 0.0
        steps = 0
        for i in range(self.order - 1, len(padded)):
            nll -= self.log_prob(padded[i - self.order + 1:i], padded[i])
            steps += 1
        return math.exp(nll / steps)

    # -- persistence ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "char-ngram-lm",
            "version": 1,
            "order": self.order,
            "smoothing": self.smoothing,
            "vocabulary": sorted(self.vocabulary),
            "counts": {ctx: dict(sorted(bucket.items())) for ctx, bucket in sorted(self.counts.items())},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CharNGramLM":
        if payload.get("format") != "char-ngram-lm" or payload.get("version") != 1:
            raise ValueError("unsupported language-model dump")
        lm = cls(payload["order"], payload["smoothing"])
        lm.vocabulary = set(payload["vocabulary"])
        lm.counts = {ctx: dict(bucket) for ctx, bucket in payload["counts"].items()}
        lm._context_totals = {ctx: sum(bucket.values()) for ctx, bucket in lm.counts.items()}
        return lm

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CharNGramLM":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_char_lm(corpus: Sequence[str], n: int = 3, smoothing: float = 1.0) -> CharNGramLM:
    """Train a character n-gram model over ``corpus``.

    Raises ConfigError when the corpus is empty.
    """
    if not corpus:
        raise ConfigError("training corpus must be non-empty")
    return CharNGramLM(n, smoothing).train(corpus)


def perplexity(lm: CharNGramLM, text: str) -> float:
    return lm.perplexity(text)
