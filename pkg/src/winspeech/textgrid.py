"""Praat TextGrid reading and writing (long "ooTextFile" format only).

The pipeline stores its per-recording annotations in four interval tiers
named "speakers", "vad", "overlap", and "transcript"; the last two may be
empty. PointTiers and the short/binary formats are rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import TextGridError

PIPELINE_TIERS = ("speakers", "vad", "overlap", "transcript")


@dataclass(frozen=True)
class Interval:
    xmin: float
    xmax: float
    label: str


@dataclass
class Tier:
    name: str
    intervals: list[Interval] = field(default_factory=list)

    def validate(self):
        prev_end = None
        for iv in self.intervals:
            if not iv.xmin < iv.xmax:
                raise TextGridError(
                    f"tier {self.name!r}: interval has xmin >= xmax "
                    f"({iv.xmin} >= {iv.xmax})")
            if prev_end is not None and iv.xmin < prev_end - 1e-9:
                raise TextGridError(
                    f"tier {self.name!r}: overlapping intervals at {iv.xmin}")
            prev_end = iv.xmax


@dataclass
class TierSet:
    xmin: float
    xmax: float
    tiers: list[Tier] = field(default_factory=list)

    def validate(self):
        for tier in self.tiers:
            tier.validate()
            for iv in tier.intervals:
                if iv.xmin < self.xmin - 1e-9 or iv.xmax > self.xmax + 1e-9:
                    raise TextGridError(
                        f"tier {tier.name!r}: interval [{iv.xmin}, {iv.xmax}] "
                        f"outside document range [{self.xmin}, {self.xmax}]")

    def tier(self, name: str) -> Tier:
        for t in self.tiers:
            if t.name == name:
                return t
        raise KeyError(name)


class _Reader:
    """Line cursor with `key = value` field extraction and line numbers."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next_line(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise TextGridError("unexpected end of file", line=self.pos)

    def expect(self, key: str) -> str:
        line = self.next_line()
        m = re.match(rf"{re.escape(key)}\s*=\s*(.*)$", line)
        if not m:
            raise TextGridError(f"expected {key!r}, got {line!r}", line=self.pos)
        return m.group(1).strip()

    def expect_header(self, pattern: str):
        line = self.next_line()
        if not re.match(pattern, line):
            raise TextGridError(
                f"expected header matching {pattern!r}, got {line!r}",
                line=self.pos)


def _unquote(value: str, line: int) -> str:
    value = value.strip()
    if len(value) < 2 or not value.startswith('"') or not value.endswith('"'):
        raise TextGridError(f"expected quoted string, got {value!r}", line=line)
    return value[1:-1].replace('""', '"')


def _number(value: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise TextGridError(f"expected number, got {value!r}", line=line) from None


def parse_textgrid(text: str) -> TierSet:
    """Parse a long-format ooTextFile TextGrid into a TierSet."""
    r = _Reader(text)
    if _unquote(r.expect("File type"), r.pos) != "ooTextFile":
        raise TextGridError("not an ooTextFile", line=r.pos)
    if _unquote(r.expect("Object class"), r.pos) != "TextGrid":
        raise TextGridError("not a TextGrid object", line=r.pos)
    xmin = _number(r.expect("xmin"), r.pos)
    xmax = _number(r.expect("xmax"), r.pos)
    r.expect_header(r"tiers\?\s*<exists>")
    n_tiers = int(_number(r.expect("size"), r.pos))
    r.expect_header(r"item\s*\[\s*\]\s*:")

    tiers = []
    for ti in range(n_tiers):
        r.expect_header(rf"item\s*\[\s*{ti + 1}\s*\]\s*:")
        klass = _unquote(r.expect("class"), r.pos)
        if klass != "IntervalTier":
            raise TextGridError(
                f"unsupported tier class {klass!r} (only IntervalTier)",
                line=r.pos)
        name = _unquote(r.expect("name"), r.pos)
        r.expect("xmin")
        r.expect("xmax")
        n_intervals = int(_number(r.expect("intervals: size"), r.pos))
        intervals = []
        for ii in range(n_intervals):
            r.expect_header(rf"intervals\s*\[\s*{ii + 1}\s*\]\s*:")
            ixmin = _number(r.expect("xmin"), r.pos)
            ixmax = _number(r.expect("xmax"), r.pos)
            label = _unquote(r.expect("text"), r.pos)
            intervals.append(Interval(ixmin, ixmax, label))
        tiers.append(Tier(name=name, intervals=intervals))

    ts = TierSet(xmin=xmin, xmax=xmax, tiers=tiers)
    ts.validate()
    return ts


def _quote(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def serialize_textgrid(ts: TierSet) -> str:
    """Render a TierSet as a long-format TextGrid document."""
    ts.validate()
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {ts.xmin:.6f}",
        f"xmax = {ts.xmax:.6f}",
        "tiers? <exists>",
        f"size = {len(ts.tiers)}",
        "item []:",
    ]
    for ti, tier in enumerate(ts.tiers, start=1):
        out += [
            f"    item [{ti}]:",
            '        class = "IntervalTier"',
            f"        name = {_quote(tier.name)}",
            f"        xmin = {ts.xmin:.6f}",
            f"        xmax = {ts.xmax:.6f}",
            f"        intervals: size = {len(tier.intervals)}",
        ]
        for ii, iv in enumerate(tier.intervals, start=1):
            out += [
                f"        intervals [{ii}]:",
                f"            xmin = {iv.xmin:.6f}",
                f"            xmax = {iv.xmax:.6f}",
                f"            text = {_quote(iv.label)}",
            ]
    return "\n".join(out) + "\n"
