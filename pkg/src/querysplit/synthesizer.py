"""Synthetic multi-intent corpus assembly.

Connects single-intent sub-queries with junction fillers sampled from the
built-in probability tables, generates a fixed-size candidate pool per
instance, strips punctuation, and keeps the candidate a fluency scorer
ranks lowest (perplexity), together with gold segment boundaries.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from .textkit import (
    FIRST_SLOT_FILLERS,
    LAST_SLOT_FILLER,
    REGULAR_FILLERS,
    strip_punctuation,
)

# A junction draw is a filler string or None (concatenate without filler).
Filler = Optional[str]
FillerAssignment = Sequence[tuple[int, Filler]]

DEFAULT_POOL_SIZE = 10

# A printed probability column may sum slightly below one (the last-junction
# column sums to 0.9995); the residual is folded onto the no-filler outcome.
_RESIDUAL_TOLERANCE = 1e-3
_SUM_TOLERANCE = 1e-6


class ConjunctionTable:
    """Per-junction sampling distributions over fillers.

    Junction 0 is the optional prefix of the first sub-query; junction i >= 1
    precedes sub-query i. Each distribution lists ``(filler or None, prob)``
    rows; rows with probability zero are kept so every tabulated cell stays
    addressable, but they are excluded from the sampling support.
    """

    def __init__(self, distributions: Sequence[Sequence[tuple[Filler, float]]]):
        if not distributions:
            raise ValueError("table needs at least one junction")
        self.distributions: list[list[tuple[Filler, float]]] = []
        self._supports: list[list[Filler]] = []
        self._cumulative: list[list[float]] = []
        for j, rows in enumerate(distributions):
            # float drift from renormalization may leave vanishing negatives
            rows = [(f, 0.0 if -1e-9 < p < 0.0 else p) for f, p in rows]
            fillers = [f for f, _ in rows]
            if len(set(fillers)) != len(fillers):
                raise ValueError(f"junction {j}: duplicate filler rows")
            if None not in fillers:
                raise ValueError(f"junction {j}: missing the no-filler row")
            if any(p < 0 or p > 1 for _, p in rows):
                raise ValueError(f"junction {j}: probabilities must lie in [0, 1]")
            total = sum(p for _, p in rows)
            residual = 1.0 - total
            if abs(residual) > _RESIDUAL_TOLERANCE:
                raise ValueError(f"junction {j}: probabilities sum to {total:.6f}")
            if abs(residual) <= 1e-12:  # float noise, not missing table mass
                residual = 0.0
            normalized = [
                (f, max(0.0, p + residual) if f is None else p) for f, p in rows
            ]
            if abs(sum(p for _, p in normalized) - 1.0) > _SUM_TOLERANCE:
                raise ValueError(f"junction {j}: normalization failed")
            self.distributions.append(normalized)
            support = [(f, p) for f, p in normalized if p > 0.0]
            cum = []
            acc = 0.0
            for _, p in support:
                acc += p
                cum.append(acc)
            cum[-1] = 1.0
            self._supports.append([f for f, _ in support])
            self._cumulative.append(cum)

    @property
    def junction_count(self) -> int:
        return len(self.distributions)

    def probability(self, junction: int, filler: Filler) -> float:
        for f, p in self.distributions[junction]:
            if f == filler:
                return p
        return 0.0

    def support(self, junction: int) -> list[Filler]:
        return list(self._supports[junction])

    def draw(self, junction: int, rng: random.Random) -> Filler:
        cum = self._cumulative[junction]
        return self._supports[junction][bisect.bisect_right(cum, rng.random())]

    def truncated(self, junction_count: int) -> "ConjunctionTable":
        """A table over the first ``junction_count`` junctions of this one."""
        if not 1 <= junction_count <= self.junction_count:
            raise ValueError("invalid junction count for truncation")
        return ConjunctionTable(self.distributions[:junction_count])

    def without_none(self) -> "ConjunctionTable":
        """Renormalize each junction over non-empty fillers only.

        Useful for building fixtures in which every junction carries a
        visible connective.
        """
        dists = []
        for rows in self.distributions:
            mass = sum(p for f, p in rows if f is not None)
            if mass <= 0:
                raise ValueError("a junction has no non-empty filler mass")
            dists.append([(f, (p / mass if f is not None else 0.0)) for f, p in rows])
        return ConjunctionTable(dists)

    # -- persistence ---------------------------------------------------

    def to_rows(self) -> list[tuple[int, str, float]]:
        rows = []
        for j, dist in enumerate(self.distributions):
            for f, p in dist:
                rows.append((j, f if f is not None else "NONE", p))
        return rows

    def to_file(self, path) -> None:
        lines = ["junction\tfiller\tprobability"]
        for j, f, p in self.to_rows():
            lines.append(f"{j}\t{f}\t{p!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "ConjunctionTable":
        per_junction: dict[int, list[tuple[Filler, float]]] = {}
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        for line in lines[1:]:
            if not line.strip():
                continue
            j_str, filler, p_str = line.split("\t")
            filler_value: Filler = None if filler == "NONE" else filler
            per_junction.setdefault(int(j_str), []).append((filler_value, float(p_str)))
        if sorted(per_junction) != list(range(len(per_junction))):
            raise ValueError("junction indices must be contiguous from 0")
        return cls([per_junction[j] for j in range(len(per_junction))])


def _first_junction_rows() -> list[tuple[Filler, float]]:
    rows: list[tuple[Filler, float]] = [(None, 0.50)]
    rows += [(f, 0.25) for f in FIRST_SLOT_FILLERS]
    rows += [(f, 0.0) for f in REGULAR_FILLERS]
    rows.append((LAST_SLOT_FILLER, 0.0))
    return rows


def _interior_junction_rows() -> list[tuple[Filler, float]]:
    rows: list[tuple[Filler, float]] = [(None, 0.50)]
    rows += [(f, 0.0) for f in FIRST_SLOT_FILLERS]
    rows.append((REGULAR_FILLERS[0], 0.10))
    rows += [(f, 0.025) for f in REGULAR_FILLERS[1:]]
    rows.append((LAST_SLOT_FILLER, 0.0))
    return rows


def _final_junction_rows() -> list[tuple[Filler, float]]:
    rows: list[tuple[Filler, float]] = [(None, 0.50)]
    rows += [(f, 0.0) for f in FIRST_SLOT_FILLERS]
    rows.append((REGULAR_FILLERS[0], 0.10))
    rows += [(f, 0.0235) for f in REGULAR_FILLERS[1:]]
    rows.append((LAST_SLOT_FILLER, 0.0235))
    return rows


def builtin_table(query_count: int) -> ConjunctionTable:
    """The built-in conjunction distributions for 3- or 4-query instances."""
    if query_count == 3:
        dists = [_first_junction_rows(), _interior_junction_rows(), _final_junction_rows()]
    elif query_count == 4:
        dists = [
            _first_junction_rows(),
            _interior_junction_rows(),
            _interior_junction_rows(),
            _final_junction_rows(),
        ]
    else:
        raise ValueError("built-in tables exist for 3 or 4 queries only")
    return ConjunctionTable(dists)


def table_for_query_count(query_count: int) -> ConjunctionTable:
    """Built-in table for 3 or 4 queries; 2-query instances reuse the first
    two junctions of the 3-query table."""
    if query_count == 2:
        return builtin_table(3).truncated(2)
    return builtin_table(query_count)


def sample_fillers(
    table: ConjunctionTable, k: int, rng: random.Random
) -> list[tuple[int, Filler]]:
    """Draw one filler (or None) per junction, independently."""
    if k != table.junction_count:
        raise ValueError(f"junction count {k} does not match table ({table.junction_count})")
    return [(j, table.draw(j, rng)) for j in range(k)]


def _normalize_assignment(
    fillers: Union[Mapping[int, Filler], FillerAssignment], n: int
) -> list[Filler]:
    if isinstance(fillers, Mapping):
        items = sorted(fillers.items())
    else:
        items = sorted(fillers)
    if [j for j, _ in items] != list(range(n)):
        raise ValueError(f"filler assignment must cover junctions 0..{n - 1}")
    return [f for _, f in items]


def assemble(
    sub_queries: Sequence[str],
    fillers: Union[Mapping[int, Filler], FillerAssignment],
) -> tuple[str, list[int]]:
    """Concatenate sub-queries with their junction fillers.

    Returns the assembled string and the start offset of each segment, where
    segment i is ``filler_i + sub_query_i`` (an empty filler contributes
    nothing).
    """
    if len(sub_queries) < 2:
        raise ValueError("need at least two sub-queries")
    per_junction = _normalize_assignment(fillers, len(sub_queries))
    parts = []
    boundaries = []
    offset = 0
    for query, filler in zip(sub_queries, per_junction):
        boundaries.append(offset)
        segment = (filler or "") + query
        parts.append(segment)
        offset += len(segment)
    return "".join(parts), boundaries


def _strip_with_boundaries(text: str, boundaries: Sequence[int]) -> tuple[str, list[int]]:
    """strip_punctuation plus offset remapping for the given boundaries."""
    kept_before = [0] * (len(text) + 1)
    kept = 0
    stripped_chars = []
    for i, ch in enumerate(text):
        kept_before[i] = kept
        if strip_punctuation(ch):
            stripped_chars.append(ch)
            kept += 1
    kept_before[len(text)] = kept
    return "".join(stripped_chars), [kept_before[b] for b in boundaries]


@dataclass(frozen=True)
class SynthesisTrace:
    """Everything recorded while aggregating one instance."""

    source_queries: tuple[str, ...]
    fillers: tuple[tuple[int, Filler], ...]
    pool: tuple[tuple[str, float], ...]
    chosen_index: int
    boundaries: tuple[int, ...]

    @property
    def aggregated(self) -> str:
        return self.pool[self.chosen_index][0]

    def segments(self) -> list[str]:
        text = self.aggregated
        bounds = list(self.boundaries) + [len(text)]
        return [text[bounds[i]:bounds[i + 1]] for i in range(len(self.boundaries))]

    def stripped_sources(self) -> list[str]:
        return [strip_punctuation(q) for q in self.source_queries]


def synthesize(
    sub_queries: Sequence[str],
    table: ConjunctionTable,
    scorer: Callable[[str], float],
    rng: random.Random,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> SynthesisTrace:
    """Build ``pool_size`` candidates and keep the lowest-perplexity one.

    Every candidate independently resamples all junctions, is assembled,
    punctuation-stripped (boundaries remapped accordingly), and scored; ties
    break toward the lowest candidate index.
    """
    if len(sub_queries) < 2:
        raise ValueError("need at least two sub-queries")
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    candidates = []
    for _ in range(pool_size):
        assignment = sample_fillers(table, len(sub_queries), rng)
        raw, bounds = assemble(sub_queries, assignment)
        stripped, new_bounds = _strip_with_boundaries(raw, bounds)
        candidates.append((stripped, float(scorer(stripped)), assignment, new_bounds))
    chosen = 0
    for i in range(1, len(candidates)):
        if candidates[i][1] < candidates[chosen][1]:
            chosen = i
    text, ppl, assignment, bounds = candidates[chosen]
    return SynthesisTrace(
        source_queries=tuple(sub_queries),
        fillers=tuple(assignment),
        pool=tuple((c, p) for c, p, _, _ in candidates),
        chosen_index=chosen,
        boundaries=tuple(bounds),
    )
