"""BRFSS-style survey ingestion: ACE item encoding, outcome, state groups.

Everything codebook-specific (source variable names, answer codes, missing
codes, state lists) lives in an :class:`EncodingRules` object that can be
loaded from JSON; :data:`DEFAULT_RULES` encodes the ten ACE items in the
order ACEDEPRS, ACESUB, ACEPRIS, ACEDIVRC, ACEPUNCH, ACEHURT1, ACESWEAR,
ACESEX, ACEADSAF, ACEADNED.
"""
from __future__ import annotations

import copy
import csv
import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .data import Dataset
from .lattice import BinaryProfile

__all__ = [
    "IngestError",
    "Rule",
    "ItemRule",
    "EncodingRules",
    "DEFAULT_RULES",
    "SurveyRecord",
    "EncodedRecord",
    "EXCLUSION_REASONS",
    "encode_record",
    "complete_cases",
    "zero_ace_audit",
    "read_raw",
    "write_canonical",
    "read_canonical",
    "canonical_columns",
    "synthetic_survey",
]

log = logging.getLogger(__name__)

MISSING = None
EXCLUSION_REASONS = ("excluded_state", "incomplete_ace", "missing_outcome")


class IngestError(ValueError):
    """Raw input could not be parsed."""


class Rule(str, enum.Enum):
    YES_NO = "yes_no"
    ONCE_OR_MORE = "once_or_more"
    SUM_ACROSS = "sum_across"
    SAFETY_REVERSED = "safety_reversed"
    NEEDS_DIRECT = "needs_direct"


# answer code -> indicator; anything else is missing
_YES_NO = {1: 1, 2: 0}
_ONCE_OR_MORE = {1: 0, 2: 1, 3: 1}  # never / once / more than once
# never, a little, some, most, all of the time
_LOW_FREQUENCY_IS_ONE = {1: 1, 2: 1, 3: 0, 4: 0, 5: 0}
_LOW_FREQUENCY_IS_ZERO = {1: 0, 2: 0, 3: 1, 4: 1, 5: 1}


@dataclass(frozen=True)
class ItemRule:
    """One ACE coordinate.

    ``values`` maps a source's raw code to 0/1. For ``needs_direct`` the
    ``direction`` is ``"neglect"`` (rarely having needs met is the adversity)
    or ``"as_printed"`` (the opposite coding).
    """

    name: str
    rule: Rule
    sources: tuple[str, ...]
    values: Mapping[int, int] | None = None
    source_rule: Rule | None = None
    missing_codes: frozenset = frozenset()
    direction: str = "neglect"

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if self.source_rule is not None:
            object.__setattr__(self, "source_rule", Rule(self.source_rule))
        if not self.sources:
            raise ValueError(f"item {self.name} has no source variables")
        if self.rule is not Rule.SUM_ACROSS and len(self.sources) != 1:
            raise ValueError(f"item {self.name}: rule {self.rule.value} takes exactly one source")
        if self.direction not in ("neglect", "as_printed"):
            raise ValueError(f"item {self.name}: direction must be 'neglect' or 'as_printed'")
        values = self.values if self.values is not None else self._default_values()
        object.__setattr__(self, "values", {int(k): int(v) for k, v in values.items()})
        if set(self.values.values()) - {0, 1}:
            raise ValueError(f"item {self.name}: value map must produce 0 or 1")
        object.__setattr__(self, "missing_codes", frozenset(int(c) for c in self.missing_codes))

    def _default_values(self) -> dict:
        rule = self.source_rule if self.rule is Rule.SUM_ACROSS else self.rule
        if rule is None:
            raise ValueError(f"item {self.name}: sum_across needs source_rule or values")
        if rule is Rule.YES_NO:
            return _YES_NO
        if rule is Rule.ONCE_OR_MORE:
            return _ONCE_OR_MORE
        if rule is Rule.SAFETY_REVERSED:
            return _LOW_FREQUENCY_IS_ONE
        if rule is Rule.NEEDS_DIRECT:
            return _LOW_FREQUENCY_IS_ONE if self.direction == "neglect" else _LOW_FREQUENCY_IS_ZERO
        raise ValueError(f"item {self.name}: no default values for {rule.value}")

    def code(self, raw: int | None) -> int | None:
        if raw is None or raw in self.missing_codes:
            return MISSING
        return self.values.get(raw, MISSING)

    def encode(self, answers: Mapping[str, int | None]) -> int | None:
        coded = [self.code(answers.get(src)) for src in self.sources]
        if self.rule is not Rule.SUM_ACROSS:
            return coded[0]
        # any reported exposure counts even if a sibling question is missing
        if 1 in coded:
            return 1
        if MISSING in coded:
            return MISSING
        return 0

    def to_dict(self) -> dict:
        out = {"name": self.name, "rule": self.rule.value, "sources": list(self.sources),
               "values": {str(k): v for k, v in sorted(self.values.items())}}
        if self.source_rule is not None:
            out["source_rule"] = self.source_rule.value
        if self.missing_codes:
            out["missing_codes"] = sorted(self.missing_codes)
        if self.rule is Rule.NEEDS_DIRECT:
            out["direction"] = self.direction
        return out


@dataclass(frozen=True)
class EncodingRules:
    items: tuple[ItemRule, ...]
    outcome_variable: str = "ADDEPEV3"
    outcome_values: Mapping[int, int] = field(default_factory=lambda: dict(_YES_NO))
    state_variable: str = "_STATE"
    groups: Mapping[str, frozenset] = field(default_factory=dict)
    missing_codes: frozenset = frozenset({7, 9, 77, 99})

    def __post_init__(self):
        if len(self.items) != 10:
            raise ValueError(f"expected 10 ACE items, got {len(self.items)}")
        object.__setattr__(self, "missing_codes", frozenset(int(c) for c in self.missing_codes))
        object.__setattr__(self, "outcome_values", {int(k): int(v) for k, v in self.outcome_values.items()})
        object.__setattr__(self, "groups", {g: frozenset(int(s) for s in states)
                                            for g, states in self.groups.items()})
        # global missing codes apply unless the item lists its own
        items = tuple(it if it.missing_codes else _with_missing(it, self.missing_codes)
                      for it in self.items)
        object.__setattr__(self, "items", items)

    @property
    def variables(self) -> list[str]:
        names = [self.state_variable, self.outcome_variable]
        for it in self.items:
            names.extend(it.sources)
        return names

    def group_of(self, state: int | None) -> str:
        for g, states in self.groups.items():
            if state in states:
                return g
        return "excluded"

    def to_dict(self) -> dict:
        return {
            "items": [it.to_dict() for it in self.items],
            "missing_codes": sorted(self.missing_codes),
            "outcome": {"variable": self.outcome_variable,
                        "values": {str(k): v for k, v in sorted(self.outcome_values.items())}},
            "state_variable": self.state_variable,
            "groups": {g: sorted(s) for g, s in self.groups.items()},
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "EncodingRules":
        items = []
        for raw in obj["items"]:
            raw = dict(raw)
            if "values" in raw:
                raw["values"] = {int(k): int(v) for k, v in raw["values"].items()}
            raw["sources"] = tuple(raw["sources"])
            raw["missing_codes"] = frozenset(raw.get("missing_codes", ()))
            items.append(ItemRule(**raw))
        outcome = obj.get("outcome", {})
        kw = {}
        if "variable" in outcome:
            kw["outcome_variable"] = outcome["variable"]
        if "values" in outcome:
            kw["outcome_values"] = {int(k): int(v) for k, v in outcome["values"].items()}
        if "state_variable" in obj:
            kw["state_variable"] = obj["state_variable"]
        if "missing_codes" in obj:
            kw["missing_codes"] = frozenset(obj["missing_codes"])
        return cls(tuple(items), groups=obj.get("groups", {}), **kw)

    @classmethod
    def load(cls, path) -> "EncodingRules":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _with_missing(item: ItemRule, codes: frozenset) -> ItemRule:
    clone = copy.copy(item)
    object.__setattr__(clone, "missing_codes", codes)
    return clone


# FIPS codes
BLUE_STATES = {10: "Delaware", 34: "New Jersey", 41: "Oregon", 44: "Rhode Island", 51: "Virginia"}
RED_STATES = {12: "Florida", 13: "Georgia", 29: "Missouri", 32: "Nevada", 47: "Tennessee"}

DEFAULT_RULES = EncodingRules(
    items=(
        ItemRule("ACEDEPRS", Rule.YES_NO, ("ACEDEPRS",)),
        ItemRule("ACESUB", Rule.SUM_ACROSS, ("ACEDRINK", "ACEDRUGS"), source_rule=Rule.YES_NO),
        ItemRule("ACEPRIS", Rule.YES_NO, ("ACEPRISN",)),
        ItemRule("ACEDIVRC", Rule.YES_NO, ("ACEDIVRC",)),
        ItemRule("ACEPUNCH", Rule.ONCE_OR_MORE, ("ACEPUNCH",)),
        ItemRule("ACEHURT1", Rule.ONCE_OR_MORE, ("ACEHURT1",)),
        ItemRule("ACESWEAR", Rule.ONCE_OR_MORE, ("ACESWEAR",)),
        ItemRule("ACESEX", Rule.SUM_ACROSS, ("ACETOUCH", "ACETTHEM", "ACEHVSEX"),
                 source_rule=Rule.ONCE_OR_MORE),
        ItemRule("ACEADSAF", Rule.SAFETY_REVERSED, ("ACEADSAF",)),
        ItemRule("ACEADNED", Rule.NEEDS_DIRECT, ("ACEADNED",), direction="neglect"),
    ),
    groups={"blue": frozenset(BLUE_STATES), "red": frozenset(RED_STATES)},
)


@dataclass(frozen=True)
class SurveyRecord:
    state: int | None
    answers: Mapping[str, int | None]
    depression: int | None
    line: int | None = None


@dataclass(frozen=True)
class EncodedRecord:
    state: int | None
    group: str  # "red" | "blue" | "excluded"
    aces: tuple[int | None, ...]
    outcome: int | None

    @property
    def complete(self) -> bool:
        return MISSING not in self.aces

    def profile(self) -> BinaryProfile | None:
        return BinaryProfile.from_bits(self.aces) if self.complete else None


def encode_record(record: SurveyRecord, rules: EncodingRules = DEFAULT_RULES) -> EncodedRecord:
    aces = tuple(item.encode(record.answers) for item in rules.items)
    dep = record.depression
    outcome = None if dep is None or dep in rules.missing_codes else rules.outcome_values.get(dep)
    return EncodedRecord(record.state, rules.group_of(record.state), aces, outcome)


def complete_cases(records: Iterable[EncodedRecord]) -> tuple[Dataset, Counter]:
    """Keep red/blue records with all ten items and the outcome present.

    Returns the dataset and a counter of exclusions keyed by the first
    failing reason (state, then ACE items, then outcome).
    """
    reasons: Counter = Counter({r: 0 for r in EXCLUSION_REASONS})
    kept = []
    for rec in records:
        if rec.group == "excluded":
            reasons["excluded_state"] += 1
        elif not rec.complete:
            reasons["incomplete_ace"] += 1
        elif rec.outcome is None:
            reasons["missing_outcome"] += 1
        else:
            kept.append(rec)
    d = 10
    profiles = np.array([rec.profile().value for rec in kept], dtype=np.uint32)
    outcomes = np.array([rec.outcome for rec in kept], dtype=np.uint8)
    groups = np.array([rec.group for rec in kept], dtype=object)
    states = np.array([rec.state for rec in kept], dtype=object)
    return Dataset(profiles, outcomes, d, groups, states), reasons


def zero_ace_audit(records: Iterable[SurveyRecord], rules: EncodingRules = DEFAULT_RULES) -> Counter:
    """Count zero-adversity respondents per group straight from raw codes.

    A respondent qualifies when the state is in a group, the outcome is
    coded, and every source answer is one of its item's "no adversity"
    codes. This bypasses profile construction, so it cross-checks the
    all-zeros count of :func:`complete_cases`.
    """
    zero_codes = [frozenset(c for c, v in item.values.items() if v == 0) - item.missing_codes
                  for item in rules.items]
    counts: Counter = Counter()
    for rec in records:
        group = rules.group_of(rec.state)
        dep = rec.depression
        if group == "excluded" or dep in rules.missing_codes or dep not in rules.outcome_values:
            continue
        if all(rec.answers.get(src) in codes
               for item, codes in zip(rules.items, zero_codes) for src in item.sources):
            counts[group] += 1
    return counts


def _parse_code(text: str, variable: str, line: int) -> int | None:
    text = text.strip()
    if not text or text == ".":
        return None
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"line {line}: {variable}={text!r} is not a numeric code") from None
    if not math.isfinite(value) or value != int(value):
        raise IngestError(f"line {line}: {variable}={text!r} is not an integer code")
    return int(value)


def _load_layout(layout) -> dict[str, tuple[int, int]]:
    obj = json.loads(Path(layout).read_text()) if not isinstance(layout, Mapping) else layout
    cols = obj.get("columns", obj)
    return {name: (int(span[0]), int(span[1])) for name, span in cols.items()}


def read_raw(path, rules: EncodingRules = DEFAULT_RULES, layout=None,
             delimiter: str | None = None) -> Iterator[SurveyRecord]:
    """Yield survey records from a delimited file with a header row, or from
    a fixed-width file described by ``layout`` (1-based inclusive column
    spans per variable)."""
    needed = rules.variables
    with open(path, newline="") as fh:
        if layout is not None:
            spans = _load_layout(layout)
            absent = [v for v in needed if v not in spans]
            if absent:
                raise IngestError(f"layout lacks variables: {absent}")
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                row = {v: line[spans[v][0] - 1:spans[v][1]] for v in needed}
                yield _record(row, rules, line_no)
            return
        sample = fh.read(4096)
        fh.seek(0)
        if delimiter is None:
            try:
                delimiter = csv.Sniffer().sniff(sample, delimiters=",;\t|").delimiter
            except csv.Error:
                delimiter = ","
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise IngestError("line 1: empty input, expected a header row")
        absent = [v for v in needed if v not in reader.fieldnames]
        if absent:
            raise IngestError(f"line 1: header lacks variables: {absent}")
        for row in reader:
            line_no = reader.line_num
            if None in row or any(row[v] is None for v in needed):
                raise IngestError(f"line {line_no}: wrong number of fields")
            yield _record(row, rules, line_no)


def _record(row: Mapping[str, str], rules: EncodingRules, line: int) -> SurveyRecord:
    answers = {}
    for item in rules.items:
        for src in item.sources:
            answers[src] = _parse_code(row[src], src, line)
    return SurveyRecord(_parse_code(row[rules.state_variable], rules.state_variable, line), answers,
                        _parse_code(row[rules.outcome_variable], rules.outcome_variable, line), line)


def canonical_columns(dimension: int = 10) -> list[str]:
    return ["state", "group"] + [f"ace_{j}" for j in range(1, dimension + 1)] + ["depression"]


def write_canonical(data: Dataset, path) -> None:
    """Canonical CSV: state, group, ace_1..ace_d (coordinate order), depression."""
    d = data.dimension
    states = data.states if data.states is not None else [""] * len(data)
    groups = data.groups if data.groups is not None else [""] * len(data)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(canonical_columns(d))
        for i in range(len(data)):
            bits = data.profile(i).bits
            state = states[i]
            writer.writerow(["" if state is None else state, groups[i], *bits, int(data.outcomes[i])])


def read_canonical(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("line 1: empty file, expected a canonical header") from None
        aces = [h for h in header if h.startswith("ace_")]
        d = len(aces)
        if header != canonical_columns(d) or d == 0:
            raise IngestError(f"line 1: not a canonical header: {header}")
        profiles, outcomes, groups, states = [], [], [], []
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise IngestError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                bits = [int(b) for b in row[2:2 + d]]
                y = int(row[-1])
                profile = BinaryProfile.from_bits(bits).value
            except ValueError as exc:
                raise IngestError(f"line {line}: {exc}") from None
            if y not in (0, 1):
                raise IngestError(f"line {line}: depression must be 0 or 1")
            states.append(int(row[0]) if row[0].strip() else None)
            groups.append(row[1])
            profiles.append(profile)
            outcomes.append(y)
    if not profiles:
        raise IngestError("no data rows")
    return Dataset(np.array(profiles, dtype=np.uint32), np.array(outcomes, dtype=np.uint8), d,
                   np.array(groups, dtype=object), np.array(states, dtype=object))


def synthetic_survey(n: int, seed=None, rules: EncodingRules = DEFAULT_RULES,
                     missing_rate: float = 0.02, other_state_rate: float = 0.03,
                     adversity_rate: float = 0.12):
    """Codebook-valid raw rows with their known encodings.

    Each source answer is drawn as missing, an adversity code or a
    no-adversity code, and the expected encoding is built from those draws
    rather than by running the encoder. Returns ``(rows, truth)``: ``rows``
    are dicts keyed by raw variable name with string values (blank = not
    asked); ``truth`` are the matching :class:`EncodedRecord`.
    """
    rng = np.random.default_rng(seed)
    in_scope = sorted(s for states in rules.groups.values() for s in states)
    outside = [1, 6, 36, 48]  # Alabama, California, New York, Texas
    rows, truth = [], []
    for _ in range(n):
        state = int(rng.choice(outside if rng.random() < other_state_rate else in_scope))
        row = {rules.state_variable: str(state)}
        aces = []
        for item in rules.items:
            ones = sorted(c for c, v in item.values.items() if v == 1)
            zeros = sorted(c for c, v in item.values.items() if v == 0)
            drawn = []
            for src in item.sources:
                u = rng.random()
                if u < missing_rate:
                    row[src] = str(rng.choice(["", "7", "9"]))
                    drawn.append(None)
                elif u < missing_rate + adversity_rate:
                    row[src] = str(int(rng.choice(ones)))
                    drawn.append(1)
                else:
                    row[src] = str(int(rng.choice(zeros)))
                    drawn.append(0)
            aces.append(1 if 1 in drawn else (None if None in drawn else 0))
        if rng.random() < missing_rate:
            row[rules.outcome_variable], outcome = "", None
        else:
            outcome = int(rng.random() < 0.2)
            code = min(c for c, v in rules.outcome_values.items() if v == outcome)
            row[rules.outcome_variable] = str(code)
        rows.append(row)
        group = next((g for g, states in rules.groups.items() if state in states), "excluded")
        truth.append(EncodedRecord(state, group, tuple(aces), outcome))
    return rows, truth
