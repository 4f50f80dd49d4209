"""File formats: CSV matrices with header row and configurable NA token,
the per-column kinds sidecar, and adjacency round-trips."""

from __future__ import annotations

import csv

import numpy as np

from .errors import InputError
from .gcgm import COLUMN_KINDS, MixedData
from .graphs import Graph

DEFAULT_NA = "NA"


def write_matrix(path, m, header=None, na_token=DEFAULT_NA) -> None:
    """Comma-separated matrix with a header row; NaN cells become the NA
    token."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise InputError("write_matrix expects a 2-d array")
    if header is None:
        header = [f"V{j + 1}" for j in range(m.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in m:
            w.writerow([na_token if v != v else repr(float(v)) for v in row])


def read_matrix(path, na_token=DEFAULT_NA):
    """Read a header-row CSV into a float matrix (NA token -> NaN).
    Returns (matrix, header)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path} is empty")
    header = rows[0]
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, "
                             f"got {len(row)}")
        out = []
        for tok in row:
            tok = tok.strip()
            if tok == na_token or tok == "":
                out.append(np.nan)
            else:
                try:
                    out.append(float(tok))
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: bad number {tok!r}") from exc
        data.append(out)
    if not data:
        raise InputError(f"{path} has a header but no data rows")
    return np.array(data, dtype=float), header


def write_kinds(path, kinds) -> None:
    with open(path, "w") as fh:
        for k in kinds:
            fh.write(f"{k}\n")


def read_kinds(path) -> list:
    with open(path) as fh:
        kinds = [line.strip() for line in fh if line.strip()]
    for k in kinds:
        if k not in COLUMN_KINDS:
            raise InputError(f"{path}: unknown column kind {k!r}")
    return kinds


def read_mixed_data(data_path, kinds_path=None, na_token=DEFAULT_NA) -> MixedData:
    Y, header = read_matrix(data_path, na_token)
    if kinds_path is not None:
        kinds = read_kinds(kinds_path)
        if len(kinds) != Y.shape[1]:
            raise InputError(
                f"{kinds_path} declares {len(kinds)} kinds for {Y.shape[1]} columns")
    else:
        kinds = ["continuous"] * Y.shape[1]
    return MixedData(Y, kinds)


def write_adjacency(path, g: Graph) -> None:
    write_matrix(path, g.adjacency().astype(float))


def read_adjacency(path) -> Graph:
    m, _ = read_matrix(path)
    if np.isnan(m).any():
        raise InputError(f"{path}: adjacency matrix has missing cells")
    return Graph.from_adjacency(m != 0)
