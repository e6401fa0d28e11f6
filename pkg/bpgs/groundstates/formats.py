"""
On-disk formats: solution text files, sweep CSV, JSON summaries and plot data.

Every float is written with 17 significant digits so that files re-load to
the same doubles, and every file is written to a temporary sibling first and
renamed into place, so a killed run never leaves a truncated file behind.
"""

import csv
import io
import json
import os
import pathlib
import re
import tempfile
import typing as t

import numpy as np

from .errors import InvalidArgument
from .radial import Params, RadialField, build_grid

SOLUTION_FILE = "solution.txt"
PHI_FILE = "phi.txt"
REPORT_FILE = "report.json"
SWEEP_CSV = "sweep.csv"
SWEEP_JSON = "sweep.json"
CONVERGENCE_JSON = "convergence.json"
CHECK_JSON = "check.json"

# Relative to R_max; radii are written with 17 digits.
NODE_TOLERANCE = 1e-12

HEADER_RE = re.compile(
    r"^#\s*R_max=(?P<r_max>\S+)\s+N=(?P<n>\S+)\s+p=(?P<p>\S+)\s+beta=(?P<beta>\S+)\s*$"
)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path: pathlib.Path, text: str) -> pathlib.Path:
    """Write `text` to `path` through a temporary file in the same directory."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as file:
            file.write(text)
        os.replace(tmp, path)
    except BaseException:
        pathlib.Path(tmp).unlink(missing_ok=True)
        raise
    return path


# -----------------------------------------------------------------------------
# Solution files
# -----------------------------------------------------------------------------


def solution_text(v: RadialField, params: Params) -> str:
    grid = v.grid
    lines = [f"# R_max={fmt(grid.r_max)} N={grid.n} p={fmt(params.p)} beta={fmt(params.beta)}"]
    lines.extend(f"{fmt(r)} {fmt(x)}" for r, x in zip(grid.nodes, v.values))
    return "\n".join(lines) + "\n"


def write_solution(path: pathlib.Path, v: RadialField, params: Params) -> pathlib.Path:
    return atomic_write(path, solution_text(v, params))


def parse_solution(text: str, source: str = "<string>") -> tuple[RadialField, Params]:
    """Inverse of `solution_text`."""
    lines = text.splitlines()
    if not lines:
        raise InvalidArgument(f"{source}: empty solution file")
    match = HEADER_RE.match(lines[0])
    if match is None:
        raise InvalidArgument(f"{source}: malformed header {lines[0]!r}")
    try:
        grid = build_grid(float(match["r_max"]), int(match["n"]))
        params = Params(p=float(match["p"]), beta=float(match["beta"]))
    except ValueError as e:
        raise InvalidArgument(f"{source}: malformed header value: {e}") from e
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != grid.n + 1:
        raise InvalidArgument(f"{source}: expected {grid.n + 1} rows, found {len(rows)}")
    values = np.empty(grid.n + 1)
    for i, row in enumerate(rows):
        try:
            r, value = row.split()
            values[i] = float(value)
            off_grid = abs(float(r) - grid.nodes[i]) > NODE_TOLERANCE * grid.r_max
        except ValueError as e:
            raise InvalidArgument(f"{source}: line {i + 2}: {row!r}") from e
        if off_grid:
            raise InvalidArgument(f"{source}: line {i + 2}: r={r} is not node {i} of {grid}")
    return RadialField(grid, values), params


def read_solution(path: pathlib.Path) -> tuple[RadialField, Params]:
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidArgument(f"cannot read solution file {path}: {e}") from e
    return parse_solution(text, source=str(path))


# -----------------------------------------------------------------------------
# Tables and summaries
# -----------------------------------------------------------------------------


def write_json(path: pathlib.Path, payload: t.Any) -> pathlib.Path:
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: pathlib.Path) -> t.Any:
    return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))


def csv_text(header: t.Sequence[str], rows: t.Iterable[t.Sequence[float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buffer.getvalue()


def write_csv(
    path: pathlib.Path, header: t.Sequence[str], rows: t.Iterable[t.Sequence[float]]
) -> pathlib.Path:
    return atomic_write(path, csv_text(header, rows))


def read_csv(path: pathlib.Path, header: t.Sequence[str]) -> list[dict[str, float]]:
    """Rows of a CSV written by `write_csv`; the header must match exactly."""
    with open(path, encoding="utf-8", newline="") as file:
        reader = csv.DictReader(file)
        if reader.fieldnames != list(header):
            raise InvalidArgument(f"{path}: unexpected header {reader.fieldnames}")
        try:
            return [{key: float(value) for key, value in row.items()} for row in reader]
        except (TypeError, ValueError) as e:
            raise InvalidArgument(f"{path}: malformed row: {e}") from e


def write_plot_data(
    path: pathlib.Path, xs: t.Sequence[float], ys: t.Sequence[float]
) -> pathlib.Path:
    """Two whitespace-separated columns, one point per line."""
    return atomic_write(path, "".join(f"{fmt(x)} {fmt(y)}\n" for x, y in zip(xs, ys)))
