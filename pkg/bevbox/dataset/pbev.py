"""PBEV: line-oriented text format for labeled BEV samples

.. code-block:: text

    pbev 1
    sample <id> <car|pedestrian|cyclist>
    box <cx> <cy> <w> <l> <theta>
    points <n>
    <x> <y>
    ...
    end

"""

import io
import math
from typing import Iterable, List, TextIO

import numpy as np

from bevbox import utils
from bevbox.dataset.core import CLASSES, Sample
from bevbox.geometry import HALF_PI, OrientedBox


HEADER = "pbev 1"


class PbevParseError(ValueError):
    """Syntax or invariant violation in a PBEV file"""


def dump(samples: Iterable[Sample], f: TextIO) -> None:
    """Write samples to an open text stream

    Box fields keep 17 significant digits so the orientation never rounds
    out of ``(-π/2, π/2]``; point coordinates keep 9.

    """
    f.write(HEADER + "\n")
    for s in samples:
        f.write(f"sample {s.id} {s.class_label}\n")
        f.write("box " + " ".join(f"{v:.17g}" for v in s.gt.to_array()) + "\n")
        f.write(f"points {len(s.points)}\n")
        for (x, y) in s.points:
            f.write(f"{x:.9g} {y:.9g}\n")
        f.write("end\n")
    return


def dumps(samples: Iterable[Sample]) -> str:
    buffer = io.StringIO()
    dump(samples, buffer)
    return buffer.getvalue()


def write_pbev(path: str, samples: Iterable[Sample]) -> None:
    """Write samples to a PBEV file

    An existing file is replaced in one step.

    """
    utils.atomic_write_text(path, dumps(samples))
    return


class _Lines:
    """Line cursor that knows its line numbers"""

    def __init__(self, lines: List[str]):
        self.lines = lines
        self.number = 0

    def fail(self, message: str):
        raise PbevParseError(f"line {self.number}: {message}")

    def next(self, keyword: str = None, n_args: int = None) -> List[str]:
        if self.number >= len(self.lines):
            self.number += 1
            self.fail(f"unexpected end of file, expected {keyword or 'data'!r}")
        tokens = self.lines[self.number].split()
        self.number += 1
        if keyword is not None:
            if not tokens or tokens[0] != keyword:
                self.fail(f"expected {keyword!r}, got {' '.join(tokens)!r}")
            tokens = tokens[1:]
        if n_args is not None and len(tokens) != n_args:
            self.fail(f"expected {n_args} values, got {len(tokens)}")
        return tokens

    def floats(self, tokens: List[str]) -> List[float]:
        try:
            values = [float(t) for t in tokens]
        except ValueError as err:
            self.fail(str(err))
        if not all(math.isfinite(v) for v in values):
            self.fail("non-finite number")
        return values

    @property
    def exhausted(self) -> bool:
        return self.number >= len(self.lines)


def _parse_sample(cursor: _Lines) -> Sample:
    (sample_id, class_label) = cursor.next("sample", 2)
    if class_label not in CLASSES:
        cursor.fail(f"unknown class {class_label!r}")
    (cx, cy, w, l, theta) = cursor.floats(cursor.next("box", 5))
    if not -HALF_PI < theta <= HALF_PI:
        cursor.fail(f"theta {theta} outside (-pi/2, pi/2]")
    if not (w > 0 and l > 0):
        cursor.fail(f"box size must be positive, got w={w} l={l}")
    (count,) = cursor.next("points", 1)
    try:
        n = int(count)
    except ValueError:
        cursor.fail(f"invalid point count {count!r}")
    if n < 1:
        cursor.fail(f"point count must be positive, got {n}")
    points = np.array([cursor.floats(cursor.next(n_args=2)) for _ in range(n)])
    cursor.next("end", 0)
    return Sample(
        id=sample_id,
        class_label=class_label,
        points=points,
        gt=OrientedBox(cx, cy, w, l, theta)
    )


def loads(text: str) -> List[Sample]:
    """Parse PBEV text

    An empty (or all-whitespace) text holds no samples.

    """
    if not text.strip():
        return []
    cursor = _Lines(text.split("\n"))
    # A final newline leaves one empty trailing element
    if cursor.lines and cursor.lines[-1] == "":
        cursor.lines.pop()
    if cursor.next() != HEADER.split():
        cursor.fail(f"expected header {HEADER!r}")
    samples = []
    seen = set()
    while not cursor.exhausted:
        sample = _parse_sample(cursor)
        if sample.id in seen:
            cursor.fail(f"duplicate sample id {sample.id!r}")
        seen.add(sample.id)
        samples.append(sample)
    return samples


def read_pbev(path: str) -> List[Sample]:
    """Read samples from a PBEV file

    """
    with open(path, "rb") as f:
        data = f.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as err:
        line = data[:err.start].count(b"\n") + 1
        raise PbevParseError(f"line {line}: invalid UTF-8 byte {data[err.start]:#04x}") from err
    return loads(text)
