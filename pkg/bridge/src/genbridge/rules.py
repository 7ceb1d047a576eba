"""Deterministic split/delete rules for stub mode.

This is an independent implementation of the connective conventions, kept
free of any dependency on the client-side package so that agreement between
the two is a real cross-implementation check.
"""

from __future__ import annotations

DELIMITER = ";"
SEPARATOR = "; "

# Connectives. The first two may only prefix the whole query; the last one
# closes a query sequence; everything else may join any two sub-queries.
FIRST_SLOT = ("先", "首先")
CONNECTIVES = (
    "然后", "还有", "我还想知道", "另外我想知道", "再一个就是", "以及", "和",
    "还要", "并且", "再然后", "另外", "其次", "同时", "除了这个还有", "接着",
    "紧接着", "接下来", "最后",
)

_ALL = FIRST_SLOT + CONNECTIVES
_BY_LENGTH = tuple(sorted(_ALL, key=len, reverse=True))
_FIRST_SLOT_ONLY = frozenset(FIRST_SLOT)


def _match_at(text: str, offset: int) -> str | None:
    for filler in _BY_LENGTH:
        if text.startswith(filler, offset):
            return filler
    return None


def split_query(text: str) -> list[str]:
    """Cut before every connective match, longest match first.

    Matches at offset 0 and matches of first-slot-only connectives never
    open a segment; concatenating the result reproduces the input.
    """
    boundaries = []
    i = 0
    while i < len(text):
        filler = _match_at(text, i)
        if filler is None:
            i += 1
            continue
        if i > 0 and filler not in _FIRST_SLOT_ONLY:
            boundaries.append(i)
        i += len(filler)
    cuts = [0] + boundaries + [len(text)]
    return [text[cuts[k]:cuts[k + 1]] for k in range(len(cuts) - 1)]


def strip_leading(segment: str) -> str:
    filler = _match_at(segment, 0)
    return segment[len(filler):] if filler else segment


def delete_fillers(segments: list[str]) -> list[str]:
    stripped = (strip_leading(s) for s in segments)
    return [s for s in stripped if s]


def segments_of(serialized: str) -> list[str]:
    return [p.strip() for p in serialized.split(DELIMITER) if p.strip()]


def join(segments: list[str]) -> str:
    return SEPARATOR.join(segments)


def apply_task(task: str, text: str, end_to_end_behavior: str = "rule") -> str | None:
    """Stub transformation for one wire task; None means unsupported."""
    if task == "split":
        return join(split_query(text))
    if task == "delete" or task == "delete+complete":
        return join(delete_fillers(segments_of(text)))
    if task == "split+delete":
        return join(delete_fillers(split_query(text)))
    if task == "complete":
        return text
    if task == "causal_complete":
        pieces = segments_of(text)
        return pieces[-1] if pieces else text
    if task == "split+complete":
        return join(split_query(text))
    if task == "end_to_end":
        if end_to_end_behavior == "echo":
            return text
        return join(delete_fillers(split_query(text)))
    return None
