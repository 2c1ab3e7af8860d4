"""Plot-ready CSV output. Every file starts with a format-version comment line."""
from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence

from .config import CSV_VERSION


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def render_csv(header: Sequence[str], rows: Iterable[Sequence], kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION} {kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], kind: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(header, rows, kind))


def read_csv(path):
    """(header, rows as lists of floats) from a file written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[float(x) if x != "" else math.nan for x in row] for row in reader]
    return header, rows


TRAJECTORY_HEADER = ("t", "d_AB", "d_BC", "d_AC", "J_AB", "J_BC", "J_AC", "E1", "E2", "E3", "P_A", "P_B", "P_C")


def trajectory_rows(traj, index=None):
    """Rows of the model trajectory table, optionally restricted to ``index``."""
    idx = range(len(traj.t)) if index is None else index
    pops = traj.populations
    for i in idx:
        yield (traj.t[i], traj.d_AB[i], traj.d_BC[i], traj.d_AC[i], *traj.couplings[i], *traj.energies[i], *pops[i])
