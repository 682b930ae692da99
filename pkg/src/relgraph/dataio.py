"""Plain-text formats for graphs, labels, features, splits, embeddings and reports.

Formats
-------
edges       one undirected edge ``u v`` per line; ``#`` starts a comment
labels      one integer per line, line ``i`` is node ``i``
features    header ``N D`` then ``N`` rows of ``D`` reals (same as embeddings)
splits      one line per split: a name followed by node ids, e.g. ``train 0 4 7``
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .graphcore import LabeledGraph, build_graph


class ParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


@dataclass(frozen=True)
class DatasetBundle:
    graph_path: Path
    labels_path: Path
    features_path: Optional[Path] = None
    split_path: Optional[Path] = None

    @classmethod
    def from_prefix(cls, prefix) -> "DatasetBundle":
        prefix = str(prefix)
        feats = Path(prefix + ".features")
        split = Path(prefix + ".split")
        return cls(
            Path(prefix + ".edges"),
            Path(prefix + ".labels"),
            feats if feats.exists() else None,
            split if split.exists() else None,
        )


def _content_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def read_edges(path) -> np.ndarray:
    rows = []
    for lineno, line in _content_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(path, lineno, f"expected 2 node ids, got {len(parts)} fields")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(path, lineno, f"non-integer node id in {line!r}") from None
        if rows[-1][0] < 0 or rows[-1][1] < 0:
            raise ParseError(path, lineno, "negative node id")
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def read_labels(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ParseError(path, lineno, f"label must be an integer, got {line!r}") from None
    return np.array(out, dtype=np.int64)


def read_matrix(path) -> np.ndarray:
    """Read the ``N d`` header + rows format used for features and embeddings."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(path, 1, "header must be 'N d'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(path, 1, "header must hold two integers") from None
        rows = []
        for lineno, raw in enumerate(fh, 2):
            if not raw.strip():
                continue
            try:
                vals = [float(x) for x in raw.split()]
            except ValueError:
                raise ParseError(path, lineno, "non-numeric value") from None
            if len(vals) != d:
                raise ParseError(path, lineno, f"expected {d} values, got {len(vals)}")
            rows.append(vals)
    if len(rows) != n:
        raise ParseError(path, 1, f"header declares {n} rows, file has {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(n, d)


def write_matrix(H: np.ndarray, path, digits: int = 17) -> None:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {H.shape}")
    fmt = f"%.{digits}g"
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{H.shape[0]} {H.shape[1]}\n")
        for row in H:
            fh.write(" ".join(fmt % v for v in row) + "\n")


write_embeddings = write_matrix
read_embeddings = read_matrix


def read_splits(path, num_nodes: Optional[int] = None) -> dict:
    splits = {}
    seen = {}
    for lineno, line in _content_lines(path):
        name, *ids = line.split()
        try:
            nodes = np.array([int(x) for x in ids], dtype=np.int64)
        except ValueError:
            raise ParseError(path, lineno, "node ids must be integers") from None
        if num_nodes is not None and nodes.size and (nodes.min() < 0 or nodes.max() >= num_nodes):
            raise ParseError(path, lineno, f"node id out of range [0, {num_nodes})")
        for v in nodes:
            if v in seen:
                raise ParseError(path, lineno, f"node {v} already in split {seen[v]!r}")
            seen[v] = name
        splits[name] = nodes
    return splits


def write_splits(splits: Mapping[str, Sequence[int]], path) -> None:
    with open(path, "w", newline="\n") as fh:
        for name, nodes in splits.items():
            fh.write(" ".join([name] + [str(int(v)) for v in nodes]) + "\n")


def write_edges(g: LabeledGraph, path, include_self_loops: bool = False) -> None:
    e = g.edge_array()
    if not include_self_loops:
        e = e[e[:, 0] != e[:, 1]]
    with open(path, "w", newline="\n") as fh:
        for u, v in e:
            fh.write(f"{u} {v}\n")


def write_labels(labels, path) -> None:
    with open(path, "w", newline="\n") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")


def load_bundle(bundle: DatasetBundle, add_self_loops: bool = False) -> tuple:
    """Load a graph and its splits; returns ``(graph, splits)``."""
    labels = read_labels(bundle.labels_path)
    edges = read_edges(bundle.graph_path)
    n = len(labels)
    if edges.size and edges.max() >= n:
        raise ValueError(
            f"node count mismatch: {bundle.graph_path} references node {int(edges.max())} "
            f"but {bundle.labels_path} has {n} rows"
        )
    features = None
    if bundle.features_path is not None:
        features = read_matrix(bundle.features_path)
        if features.shape[0] != n:
            raise ValueError(
                f"node count mismatch: {bundle.features_path} has {features.shape[0]} rows, "
                f"labels have {n}"
            )
    g = build_graph(edges, labels, features=features, add_self_loops=add_self_loops)
    splits = read_splits(bundle.split_path, n) if bundle.split_path is not None else {}
    return g, splits


def write_bundle(g: LabeledGraph, prefix, splits: Optional[Mapping] = None) -> DatasetBundle:
    prefix = str(prefix)
    d = os.path.dirname(prefix)
    if d:
        os.makedirs(d, exist_ok=True)
    write_edges(g, prefix + ".edges")
    write_labels(g.labels, prefix + ".labels")
    if g.features is not None:
        write_matrix(g.features, prefix + ".features")
    if splits:
        write_splits(splits, prefix + ".split")
    return DatasetBundle.from_prefix(prefix)


def _fmt(v, digits: int) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{digits}g}"
    return str(v)


def write_csv_report(rows: Mapping[str, Sequence], path, digits: int = 12) -> None:
    """Write named columns as CSV; column order follows the mapping's order."""
    names = list(rows)
    cols = [list(rows[k]) for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
    nrows = lengths.pop() if lengths else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(nrows):
            w.writerow([_fmt(c[i], digits) for c in cols])


def read_csv_report(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        names = next(r)
        cols = {k: [] for k in names}
        for row in r:
            for k, v in zip(names, row):
                try:
                    cols[k].append(float(v))
                except ValueError:
                    cols[k].append(v)
    return cols
