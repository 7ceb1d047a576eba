"""Dataset records, JSON Lines persistence, deterministic splits, corpus
statistics, and a conjunction-concatenation importer for existing
single-intent corpora."""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .errors import DatasetValidationError
from .synthesizer import Filler, SynthesisTrace
from .textkit import is_punctuation_free, strip_punctuation

SCHEMA_VERSION = 1

MIN_QUERIES = 2
MAX_QUERIES = 4


@dataclass(frozen=True)
class DatasetInstance:
    """One multi-intent example with gold annotations.

    ``aggregated`` is the punctuation-free multi-intent query;
    ``raw_queries`` are its filler-stripped single-intent segments and
    ``completed_queries`` their fully executable rewrites. ``fillers`` maps
    junction index to the connective chosen there (None for direct
    concatenation) and ``boundaries`` are the code-point offsets where each
    ``filler + raw`` segment starts inside ``aggregated``.
    """

    id: str
    aggregated: str
    raw_queries: tuple[str, ...]
    completed_queries: tuple[str, ...]
    fillers: tuple[tuple[int, Filler], ...]
    rewrite_flags: tuple[bool, ...]
    domains: tuple[str, ...] = ()
    boundaries: tuple[int, ...] = ()

    def validate(self, line: Optional[int] = None) -> "DatasetInstance":
        def bad(message, field):
            raise DatasetValidationError(message, line=line, field=field)

        for field_name, texts in (
            ("id", (self.id,)),
            ("aggregated", (self.aggregated,)),
            ("raw_queries", self.raw_queries),
            ("completed_queries", self.completed_queries),
            ("fillers", tuple(f for _, f in self.fillers if f is not None)),
            ("domains", self.domains),
        ):
            # lone surrogates cannot survive the UTF-8 record format
            if any("\ud800" <= ch <= "\udfff" for text in texts for ch in text):
                bad("text contains unpaired surrogate code points", field_name)
        n = len(self.raw_queries)
        if not MIN_QUERIES <= n <= MAX_QUERIES:
            bad(f"instance must hold {MIN_QUERIES}..{MAX_QUERIES} sub-queries, got {n}",
                "raw_queries")
        if len(self.completed_queries) != n:
            bad("completed_queries length differs from raw_queries", "completed_queries")
        if len(self.rewrite_flags) != n:
            bad("rewrite_flags length differs from raw_queries", "rewrite_flags")
        if any(not q for q in self.raw_queries):
            bad("raw sub-queries must be non-empty", "raw_queries")
        if any(not q for q in self.completed_queries):
            bad("completed sub-queries must be non-empty", "completed_queries")
        for j, (raw, completed, flag) in enumerate(
            zip(self.raw_queries, self.completed_queries, self.rewrite_flags)
        ):
            if flag != (completed != raw):
                bad(f"rewrite flag {j} contradicts raw/completed texts", "rewrite_flags")
        if not is_punctuation_free(self.aggregated):
            bad("aggregated query contains punctuation", "aggregated")
        if self.boundaries:
            if len(self.boundaries) != n:
                bad("boundaries length differs from raw_queries", "boundaries")
            if self.boundaries[0] != 0:
                bad("first boundary must be 0", "boundaries")
            if list(self.boundaries) != sorted(set(self.boundaries)):
                bad("boundaries must be strictly increasing", "boundaries")
            if self.boundaries[-1] > len(self.aggregated):
                bad("boundary beyond the aggregated query", "boundaries")
        return self

    def segments(self) -> list[str]:
        """The ``filler + raw`` pieces of the aggregated query."""
        if not self.boundaries:
            fillers = dict(self.fillers)
            return [(fillers.get(i) or "") + q for i, q in enumerate(self.raw_queries)]
        bounds = list(self.boundaries) + [len(self.aggregated)]
        return [self.aggregated[bounds[i]:bounds[i + 1]] for i in range(len(self.boundaries))]

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "aggregated": self.aggregated,
            "raw": list(self.raw_queries),
            "completed": list(self.completed_queries),
            "fillers": [[i, f] for i, f in self.fillers],
            "rewrite_flags": list(self.rewrite_flags),
            "domains": list(self.domains),
            "boundaries": list(self.boundaries),
        }

    @classmethod
    def from_record(cls, record: dict, line: Optional[int] = None) -> "DatasetInstance":
        version = record.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DatasetValidationError(
                f"unsupported schema version {version!r}", line=line, field="schema_version"
            )
        try:
            instance = cls(
                id=str(record["id"]),
                aggregated=record["aggregated"],
                raw_queries=tuple(record["raw"]),
                completed_queries=tuple(record["completed"]),
                fillers=tuple((int(i), f) for i, f in record["fillers"]),
                rewrite_flags=tuple(bool(f) for f in record["rewrite_flags"]),
                domains=tuple(record.get("domains", ())),
                boundaries=tuple(int(b) for b in record.get("boundaries", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetValidationError(f"malformed record: {exc}", line=line) from exc
        return instance.validate(line=line)


def instance_from_trace(
    trace: SynthesisTrace,
    instance_id: str,
    *,
    domains: Sequence[str] = (),
    completion: Optional[Callable[[Sequence[str]], Sequence[str]]] = None,
) -> DatasetInstance:
    """Turn a synthesis trace into a dataset instance.

    ``completion`` maps the raw sub-queries to their completed forms;
    without one the instance is complete as-is (all rewrite flags False).
    """
    raw = tuple(trace.stripped_sources())
    completed = tuple(completion(raw)) if completion else raw
    flags = tuple(c != r for r, c in zip(raw, completed))
    return DatasetInstance(
        id=instance_id,
        aggregated=trace.aggregated,
        raw_queries=raw,
        completed_queries=completed,
        fillers=trace.fillers,
        rewrite_flags=flags,
        domains=tuple(domains),
        boundaries=trace.boundaries,
    ).validate()


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save(instances: Iterable[DatasetInstance], path) -> None:
    lines = [json.dumps(inst.to_record(), ensure_ascii=False) for inst in instances]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load(path) -> list[DatasetInstance]:
    instances = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetValidationError(f"invalid JSON: {exc}", line=line_no) from exc
            instances.append(DatasetInstance.from_record(record, line=line_no))
    return instances


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train: int
    valid: int
    test: int
    seed: int = 0


def split_dataset(
    instances: Sequence[DatasetInstance], spec: SplitSpec
) -> tuple[list[DatasetInstance], list[DatasetInstance], list[DatasetInstance]]:
    """Shuffle deterministically under ``spec.seed``, then partition in order."""
    total = spec.train + spec.valid + spec.test
    if total != len(instances):
        raise ValueError(
            f"split sizes sum to {total} but corpus holds {len(instances)} instances"
        )
    shuffled = list(instances)
    random.Random(spec.seed).shuffle(shuffled)
    train = shuffled[: spec.train]
    valid = shuffled[spec.train: spec.train + spec.valid]
    test = shuffled[spec.train + spec.valid:]
    return train, valid, test


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusStats:
    instance_count: int
    mean_aggregated_chars: float
    mean_subquery_count: float
    mean_completed_length_by_position: tuple[float, ...]
    incomplete_ratio: float
    domain_counts: dict
    mean_domains_per_instance: float

    def to_dict(self) -> dict:
        return {
            "instance_count": self.instance_count,
            "mean_aggregated_chars": self.mean_aggregated_chars,
            "mean_subquery_count": self.mean_subquery_count,
            "mean_completed_length_by_position": list(self.mean_completed_length_by_position),
            "incomplete_ratio": self.incomplete_ratio,
            "domain_counts": dict(self.domain_counts),
            "mean_domains_per_instance": self.mean_domains_per_instance,
        }


def stats(instances: Sequence[DatasetInstance]) -> CorpusStats:
    """Corpus statistics.

    The incomplete ratio is computed over follow-up sub-queries only (the
    initial query is excluded from the denominator).
    """
    if not instances:
        raise ValueError("need at least one instance")
    n = len(instances)
    agg_chars = sum(len(inst.aggregated) for inst in instances)
    subquery_total = sum(len(inst.raw_queries) for inst in instances)
    length_sums: list[int] = []
    length_counts: list[int] = []
    followups = 0
    rewritten = 0
    domain_counter: Counter = Counter()
    distinct_domains = 0
    for inst in instances:
        for j, completed in enumerate(inst.completed_queries):
            if j >= len(length_sums):
                length_sums.append(0)
                length_counts.append(0)
            length_sums[j] += len(completed)
            length_counts[j] += 1
        followups += len(inst.rewrite_flags) - 1
        rewritten += sum(inst.rewrite_flags[1:])
        domain_counter.update(inst.domains)
        distinct_domains += len(set(inst.domains))
    return CorpusStats(
        instance_count=n,
        mean_aggregated_chars=agg_chars / n,
        mean_subquery_count=subquery_total / n,
        mean_completed_length_by_position=tuple(
            s / c for s, c in zip(length_sums, length_counts)
        ),
        incomplete_ratio=(rewritten / followups) if followups else 0.0,
        domain_counts=dict(domain_counter),
        mean_domains_per_instance=distinct_domains / n,
    )


# ---------------------------------------------------------------------------
# Concatenation importer
# ---------------------------------------------------------------------------

def import_concat_corpus(
    single_intent_queries: Sequence[str],
    conjunction: str,
    queries_per_instance: int,
    rng: Optional[random.Random] = None,
    *,
    id_prefix: str = "concat",
) -> list[DatasetInstance]:
    """Build fixed-conjunction instances from single-intent queries.

    Queries are (optionally) shuffled, chunked into groups, punctuation-
    stripped, and joined with the one conjunction; every sub-query is already
    complete, so all rewrite flags are False.
    """
    if not conjunction:
        raise ValueError("conjunction must be non-empty")
    if not is_punctuation_free(conjunction):
        raise ValueError("conjunction must be punctuation-free")
    if queries_per_instance < MIN_QUERIES:
        raise ValueError(f"queries_per_instance must be >= {MIN_QUERIES}")
    if len(single_intent_queries) < queries_per_instance:
        raise ValueError("not enough source queries for a single instance")
    pool = [strip_punctuation(q).strip() for q in single_intent_queries]
    pool = [q for q in pool if q]
    if rng is not None:
        rng.shuffle(pool)
    instances = []
    k = queries_per_instance
    for index, start in enumerate(range(0, len(pool) - k + 1, k)):
        group = pool[start: start + k]
        fillers: list[tuple[int, Filler]] = [(0, None)]
        fillers += [(i, conjunction) for i in range(1, k)]
        parts = []
        boundaries = []
        offset = 0
        for i, query in enumerate(group):
            boundaries.append(offset)
            piece = ("" if i == 0 else conjunction) + query
            parts.append(piece)
            offset += len(piece)
        instances.append(
            DatasetInstance(
                id=f"{id_prefix}-{index:06d}",
                aggregated="".join(parts),
                raw_queries=tuple(group),
                completed_queries=tuple(group),
                fillers=tuple(fillers),
                rewrite_flags=tuple(False for _ in group),
                boundaries=tuple(boundaries),
            ).validate()
        )
    return instances
