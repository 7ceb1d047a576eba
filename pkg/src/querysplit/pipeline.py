"""The action algebra: Split, Delete, Complete, and CausalComplete composed
into configurable multi-stage pipelines.

Stages run either a deterministic rule executor or a generation backend.
The rule splitter only finds boundaries marked by a filler, so it is a floor
baseline; backend executors realize the learned variants behind the
generation wire contract.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .backends import GenerationRequest
from .errors import BackendError, ConfigError, PipelineError
from .textkit import FillerLexicon, default_lexicon, match_fillers

logger = logging.getLogger(__name__)

RULE_EXECUTOR = "rule"
DEFAULT_DELIMITER = ";"
DEFAULT_END_MARKER = "</s>"


class Action(str, Enum):
    SPLIT = "split"
    DELETE = "delete"
    COMPLETE = "complete"
    CAUSAL_COMPLETE = "causal_complete"


_ACTION_ORDER = (Action.SPLIT, Action.DELETE, Action.COMPLETE, Action.CAUSAL_COMPLETE)


def task_tag(actions: Iterable[Action]) -> str:
    """Wire task tag for a stage's action set.

    Single actions map to their own tag, the full Split+Delete+Complete set
    to ``end_to_end``, and the remaining combinations to a ``+``-joined
    compound tag in canonical action order.
    """
    actions = frozenset(actions)
    if actions == {Action.SPLIT, Action.DELETE, Action.COMPLETE}:
        return "end_to_end"
    ordered = [a.value for a in _ACTION_ORDER if a in actions]
    if not ordered:
        raise ValueError("empty action set")
    return "+".join(ordered)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stage:
    actions: frozenset
    executor: str = RULE_EXECUTOR

    @classmethod
    def of(cls, *actions: Action, executor: str = RULE_EXECUTOR) -> "Stage":
        return cls(frozenset(actions), executor)


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple[Stage, ...]
    delimiter: str = DEFAULT_DELIMITER
    end_marker: str = DEFAULT_END_MARKER

    def validate(self) -> "PipelineConfig":
        if not self.stages:
            raise ConfigError("pipeline needs at least one stage")
        if not self.delimiter:
            raise ConfigError("delimiter must be non-empty")
        seen: dict[Action, int] = {}
        for idx, stage in enumerate(self.stages):
            if not stage.actions:
                raise ConfigError(f"stage {idx} has no actions")
            for action in stage.actions:
                if not isinstance(action, Action):
                    raise ConfigError(f"stage {idx}: unknown action {action!r}")
                if action in seen:
                    raise ConfigError(f"action {action.value} appears in more than one stage")
                seen[action] = idx
            if not stage.executor:
                raise ConfigError(f"stage {idx} has no executor binding")
        if Action.SPLIT not in seen:
            raise ConfigError("pipeline must contain the split action")
        if Action.DELETE not in seen:
            raise ConfigError("pipeline must contain the delete action")
        has_complete = Action.COMPLETE in seen
        has_causal = Action.CAUSAL_COMPLETE in seen
        if has_complete == has_causal:
            raise ConfigError("pipeline must contain exactly one of complete / causal_complete")
        if has_causal:
            causal_idx = seen[Action.CAUSAL_COMPLETE]
            if causal_idx != len(self.stages) - 1:
                raise ConfigError("causal_complete must live in the final stage")
            if seen[Action.SPLIT] > causal_idx:
                raise ConfigError("causal_complete requires split in an earlier or the same stage")
        return self

    def backend_ids(self) -> set[str]:
        return {s.executor for s in self.stages if s.executor != RULE_EXECUTOR}

    # -- (de)serialization ----------------------------------------------

    def to_dict(self) -> dict:
        return {
            "stages": [
                {
                    "actions": [a.value for a in _ACTION_ORDER if a in s.actions],
                    "executor": s.executor,
                }
                for s in self.stages
            ],
            "delimiter": self.delimiter,
            "end_marker": self.end_marker,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "PipelineConfig":
        try:
            stages = tuple(
                Stage(
                    frozenset(Action(a) for a in entry["actions"]),
                    entry.get("executor", RULE_EXECUTOR),
                )
                for entry in payload["stages"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad pipeline config: {exc}") from exc
        return cls(
            stages=stages,
            delimiter=payload.get("delimiter", DEFAULT_DELIMITER),
            end_marker=payload.get("end_marker", DEFAULT_END_MARKER),
        ).validate()

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_file(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )


def end_to_end_config(executor: str = RULE_EXECUTOR) -> PipelineConfig:
    """All three actions in one generation pass."""
    return PipelineConfig(
        (Stage.of(Action.SPLIT, Action.DELETE, Action.COMPLETE, executor=executor),)
    ).validate()


def two_stage_once_config(
    split_executor: str = RULE_EXECUTOR, rewrite_executor: str = RULE_EXECUTOR
) -> PipelineConfig:
    """Split first, then delete fillers and complete in one rewrite pass."""
    return PipelineConfig(
        (
            Stage.of(Action.SPLIT, executor=split_executor),
            Stage.of(Action.DELETE, Action.COMPLETE, executor=rewrite_executor),
        )
    ).validate()


def two_stage_causal_config(
    split_executor: str = RULE_EXECUTOR, causal_executor: str = RULE_EXECUTOR
) -> PipelineConfig:
    """Split and delete first, then complete query by query over prefixes."""
    return PipelineConfig(
        (
            Stage.of(Action.SPLIT, Action.DELETE, executor=split_executor),
            Stage.of(Action.CAUSAL_COMPLETE, executor=causal_executor),
        )
    ).validate()


def combination_configs(executor: str = RULE_EXECUTOR) -> dict[str, PipelineConfig]:
    """The seven two/three-stage action arrangements, keyed by a display name."""
    sp, de, cp = Action.SPLIT, Action.DELETE, Action.COMPLETE

    def cfg(*stage_sets):
        return PipelineConfig(
            tuple(Stage(frozenset(s), executor) for s in stage_sets)
        ).validate()

    return {
        "DE->(SP+CP)": cfg({de}, {sp, cp}),
        "(DE+CP)->SP": cfg({de, cp}, {sp}),
        "(SP+DE)->CP": cfg({sp, de}, {cp}),
        "(SP+CP)->DE": cfg({sp, cp}, {de}),
        "CP->(SP+DE)": cfg({cp}, {sp, de}),
        "SP->DE->CP": cfg({sp}, {de}, {cp}),
        "SP->(DE+CP)": cfg({sp}, {de, cp}),
    }


# ---------------------------------------------------------------------------
# Segmented queries and the rule actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    text: str  # includes the leading filler, when present
    filler: Optional[str] = None

    @property
    def has_leading_filler(self) -> bool:
        return self.filler is not None


@dataclass(frozen=True)
class SegmentedQuery:
    segments: tuple[Segment, ...]

    def texts(self) -> list[str]:
        return [s.text for s in self.segments]

    def reconstruct(self) -> str:
        return "".join(s.text for s in self.segments)


def split_rule(text: str, lexicon: Optional[FillerLexicon] = None) -> SegmentedQuery:
    """Segment ``text`` at filler matches, losslessly.

    A boundary opens immediately before every filler match except matches at
    offset 0 (they flag the first segment instead) and matches of fillers
    restricted to the first slot, which never start a new segment.
    """
    lexicon = lexicon or default_lexicon()
    matches = match_fillers(text, lexicon)
    boundaries: list[tuple[int, str]] = []
    first_filler: Optional[str] = None
    for start, _end, filler in matches:
        if start == 0:
            first_filler = filler
        elif not lexicon.entry(filler).junction0_only():
            boundaries.append((start, filler))
    segments = []
    cuts = [0] + [b for b, _ in boundaries] + [len(text)]
    fillers: list[Optional[str]] = [first_filler] + [f for _, f in boundaries]
    for i in range(len(cuts) - 1):
        segments.append(Segment(text[cuts[i]:cuts[i + 1]], fillers[i]))
    return SegmentedQuery(tuple(segments))


def delete_fillers(sq: SegmentedQuery) -> list[str]:
    """Strip each segment's flagged leading filler; drop emptied segments."""
    kept = []
    for seg in sq.segments:
        text = seg.text[len(seg.filler):] if seg.filler else seg.text
        if text:
            kept.append(text)
        else:
            logger.warning("dropping segment that was entirely a filler: %r", seg.text)
    return kept


def strip_leading_filler(text: str, lexicon: Optional[FillerLexicon] = None) -> str:
    """Remove the longest lexicon entry matching at offset 0, if any."""
    lexicon = lexicon or default_lexicon()
    for entry in lexicon.longest_first():
        if text.startswith(entry.text):
            return text[len(entry.text):]
    return text


# ---------------------------------------------------------------------------
# Rule-based completion (entity carryover)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarryoverCategory:
    """One carryover rule: when a follow-up lacks any span of this category,
    inject the nearest preceding completed segment's span via ``template``."""

    name: str
    pattern: str
    template: str = "{entity}{text}"

    def regex(self) -> re.Pattern:
        return re.compile(self.pattern)


_CITIES = (
    "北京|上海|广州|深圳|南京|杭州|成都|重庆|武汉|西安|郑州|长沙|昆明|天津|苏州|"
    "青岛|大连|厦门|南昌|昭通|哈尔滨|沈阳"
)
_DATES = (
    "今天|明天|后天|大后天|昨天|前天|下周[一二三四五六日天]?|周[一二三四五六日天]|"
    "本周|下个月|这个月|[0-9０-９]+月[0-9０-９]+[号日]"
)
_VEHICLES = "高铁|火车|汽车|飞机|航班|大巴|动车|地铁|轮船"
_TITLES = "《[^》]+》|【[^】]+】"


def default_carryover() -> tuple[CarryoverCategory, ...]:
    return (
        CarryoverCategory("place", _CITIES),
        CarryoverCategory("date", _DATES),
        CarryoverCategory("vehicle", _VEHICLES),
        CarryoverCategory("media_title", _TITLES),
    )


def complete_rule(
    segments: Sequence[str],
    carryover: Optional[Sequence[CarryoverCategory]] = None,
) -> list[str]:
    """Deterministic completion baseline.

    The first segment is returned verbatim. For each later segment and each
    category in order, when the segment has no span of that category but a
    preceding completed segment does (nearest first), the found span is
    injected through the category template. Characters are only ever added.
    """
    if not segments:
        raise ValueError("need at least one segment")
    categories = default_carryover() if carryover is None else tuple(carryover)
    compiled = [(c, c.regex()) for c in categories]
    completed = [segments[0]]
    for text in segments[1:]:
        updated = text
        for category, rx in compiled:
            if rx.search(updated):
                continue
            for previous in reversed(completed):
                found = rx.search(previous)
                if found:
                    updated = category.template.format(entity=found.group(0), text=updated)
                    break
        completed.append(updated)
    return completed


# ---------------------------------------------------------------------------
# Output parsing and traces
# ---------------------------------------------------------------------------

def parse_model_output(
    raw: str,
    delimiter: str = DEFAULT_DELIMITER,
    end_marker: str = DEFAULT_END_MARKER,
) -> list[str]:
    """Best-effort parse of a generated sub-query sequence.

    Strips one trailing end marker if present, splits on the delimiter,
    trims whitespace, and drops empty pieces.
    """
    text = raw.strip()
    if end_marker and text.endswith(end_marker):
        text = text[: -len(end_marker)]
    pieces = [p.strip() for p in text.split(delimiter)] if delimiter else [text.strip()]
    return [p for p in pieces if p]


def _clean_single_output(raw: str, end_marker: str) -> str:
    text = raw.strip()
    if end_marker and text.endswith(end_marker):
        text = text[: -len(end_marker)]
    return text.strip()


@dataclass(frozen=True)
class StageSnapshot:
    stage_index: int
    actions: frozenset
    segments: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "stage": self.stage_index,
            "actions": [a.value for a in _ACTION_ORDER if a in self.actions],
            "segments": list(self.segments),
        }


@dataclass(frozen=True)
class ActionTrace:
    input_query: str
    snapshots: tuple[StageSnapshot, ...]
    final: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "input": self.input_query,
            "stages": [s.to_dict() for s in self.snapshots],
            "final": list(self.final),
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _join(segments: Sequence[str], delimiter: str) -> str:
    return (delimiter + " ").join(segments)


def causal_complete(
    segments: Sequence[str],
    backend,
    *,
    delimiter: str = DEFAULT_DELIMITER,
    end_marker: str = DEFAULT_END_MARKER,
    task: str = Action.CAUSAL_COMPLETE.value,
    max_length: int = 128,
) -> list[str]:
    """Complete query by query.

    At step t the backend sees the delimiter-joined prefix of the first t
    segments and answers with the completed form of segment t, so step t can
    never depend on later segments. A failure at step t raises PipelineError
    carrying t and the completions gathered so far.
    """
    if not segments:
        raise ValueError("need at least one segment")
    completed: list[str] = []
    for t in range(1, len(segments) + 1):
        prefix = _join(segments[:t], delimiter)
        request = GenerationRequest(task=task, input_text=prefix, max_length=max_length)
        try:
            response = backend.generate(request)
        except BackendError as exc:
            raise PipelineError(
                f"causal completion failed at step {t}: {exc}",
                step=t,
                partial=completed,
            ) from exc
        completed.append(_clean_single_output(response.output_text, end_marker))
    return completed


def _run_rule_stage(stage, state, flags, lexicon, carryover, warnings):
    """Apply a rule stage's actions in canonical order; returns (state, flags)."""
    segments = list(state)
    for action in _ACTION_ORDER:
        if action not in stage.actions:
            continue
        if action is Action.SPLIT:
            pieces: list[Segment] = []
            for text in segments:
                pieces.extend(split_rule(text, lexicon).segments)
            flags = SegmentedQuery(tuple(pieces))
            segments = flags.texts()
        elif action is Action.DELETE:
            before = len(segments)
            if flags is not None and flags.texts() == segments:
                segments = delete_fillers(flags)
            else:
                segments = [s for s in (strip_leading_filler(t, lexicon) for t in segments) if s]
            if len(segments) < before:
                warnings.append(
                    f"delete dropped {before - len(segments)} segment(s) that were entirely fillers"
                )
            flags = None
        elif action in (Action.COMPLETE, Action.CAUSAL_COMPLETE):
            # The rule completer already works query by query in order, so it
            # doubles as the causal executor.
            segments = complete_rule(segments, carryover)
    return segments, flags


def run_pipeline(
    config: PipelineConfig,
    query: str,
    backends: Optional[Mapping[str, object]] = None,
    *,
    lexicon: Optional[FillerLexicon] = None,
    carryover: Optional[Sequence[CarryoverCategory]] = None,
    max_length: int = 128,
) -> ActionTrace:
    """Run ``query`` through every stage of ``config``.

    Rule stages use the deterministic executors; backend stages serialize the
    current segments with the delimiter, call the bound backend, and parse the
    output. Every stage's result is recorded as a snapshot.
    """
    config.validate()
    if not query or not query.strip():
        raise ValueError("query must be non-empty")
    backends = backends or {}
    missing = [b for b in config.backend_ids() if b not in backends]
    if missing:
        raise ConfigError(f"unregistered backend id(s): {', '.join(sorted(missing))}")

    lexicon = lexicon or default_lexicon()
    state: list[str] = [query]
    flags: Optional[SegmentedQuery] = None
    snapshots: list[StageSnapshot] = []
    warnings: list[str] = []

    for idx, stage in enumerate(config.stages):
        if stage.executor == RULE_EXECUTOR:
            state, flags = _run_rule_stage(stage, state, flags, lexicon, carryover, warnings)
        else:
            backend = backends[stage.executor]
            try:
                if Action.CAUSAL_COMPLETE in stage.actions:
                    state = causal_complete(
                        state,
                        backend,
                        delimiter=config.delimiter,
                        end_marker=config.end_marker,
                        task=task_tag(stage.actions),
                        max_length=max_length,
                    )
                else:
                    request = GenerationRequest(
                        task=task_tag(stage.actions),
                        input_text=_join(state, config.delimiter),
                        max_length=max_length,
                    )
                    response = backend.generate(request)
                    state = parse_model_output(
                        response.output_text, config.delimiter, config.end_marker
                    )
            except PipelineError as exc:
                raise PipelineError(
                    str(exc), stage_index=idx, step=exc.step, partial=exc.partial
                ) from exc
            except BackendError as exc:
                raise PipelineError(
                    f"backend {stage.executor!r} failed at stage {idx}: {exc}",
                    stage_index=idx,
                ) from exc
            flags = None
        snapshots.append(StageSnapshot(idx, stage.actions, tuple(state)))

    if not state:
        raise PipelineError(
            "pipeline produced no sub-queries", stage_index=len(config.stages) - 1
        )
    return ActionTrace(
        input_query=query,
        snapshots=tuple(snapshots),
        final=tuple(state),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Gold generation tables
# ---------------------------------------------------------------------------

def gold_generation_table(
    instances: Iterable,
    *,
    delimiter: str = DEFAULT_DELIMITER,
    end_marker: str = DEFAULT_END_MARKER,
) -> dict[tuple[str, str], str]:
    """Build a (task, input) -> output table realizing every action exactly.

    ``instances`` need ``raw_queries``, ``completed_queries`` and ``fillers``
    attributes (see dataio.DatasetInstance). For every stage action set and
    every consistent predecessor state the table maps the serialized stage
    input to the serialized gold stage output, so a gold-oracle backend can
    stand in for a perfect model in any pipeline arrangement, including the
    causal one.
    """
    sep = delimiter + " "
    actions = (Action.SPLIT, Action.DELETE, Action.COMPLETE)
    table: dict[tuple[str, str], str] = {}

    def units(inst, deleted: bool, completed: bool) -> list[str]:
        fillers = dict(inst.fillers)
        queries = inst.completed_queries if completed else inst.raw_queries
        return [
            ("" if deleted else (fillers.get(i) or "")) + q
            for i, q in enumerate(queries)
        ]

    def rep(inst, split: bool, deleted: bool, completed: bool) -> str:
        parts = units(inst, deleted, completed)
        return sep.join(parts) if split else "".join(parts)

    def decorated(inst, split: bool, deleted: bool, completed: bool) -> str:
        body = rep(inst, split, deleted, completed)
        suffix = delimiter + " " + end_marker if split else " " + end_marker
        return body + suffix if end_marker else body

    for inst in instances:
        aggregated = getattr(inst, "aggregated", None)
        if aggregated is not None and rep(inst, False, False, False) != aggregated:
            raise ValueError(
                f"instance {getattr(inst, 'id', '?')}: aggregated query does not "
                "equal the filler-joined raw sub-queries"
            )
        for mask in range(1, 8):
            stage_set = frozenset(a for bit, a in enumerate(actions) if mask >> bit & 1)
            tag = task_tag(stage_set)
            for pre_mask in range(8):
                pre = [bool(pre_mask >> bit & 1) for bit in range(3)]
                if any(pre[bit] for bit in range(3) if mask >> bit & 1):
                    continue  # the stage's own actions must still be pending
                post = [pre[bit] or bool(mask >> bit & 1) for bit in range(3)]
                key = (tag, rep(inst, *pre))
                table[key] = decorated(inst, *post)
        # Query-by-query completion over prefixes, with and without a prior
        # delete (the latter backs a combined delete+causal stage).
        for deleted, tag in (
            (True, Action.CAUSAL_COMPLETE.value),
            (False, task_tag({Action.DELETE, Action.CAUSAL_COMPLETE})),
        ):
            prefix_units = units(inst, deleted, False)
            for t in range(1, len(prefix_units) + 1):
                key = (tag, sep.join(prefix_units[:t]))
                out = inst.completed_queries[t - 1]
                table[key] = out + (" " + end_marker if end_marker else "")
    return table
