import numpy as np
import pytest

from relgraph.dataio import (
    DatasetBundle,
    ParseError,
    load_bundle,
    read_csv_report,
    read_edges,
    read_labels,
    read_matrix,
    read_splits,
    write_bundle,
    write_csv_report,
    write_matrix,
)
from relgraph.graphcore import build_graph


def test_matrix_roundtrip_is_exact(tmp_path):
    H = np.random.default_rng(0).normal(size=(7, 3)) * 1e-3
    H[0, 0] = np.pi
    write_matrix(H, tmp_path / "h.txt")
    assert np.array_equal(read_matrix(tmp_path / "h.txt"), H)


def test_edges_comments_and_blank_lines(tmp_path):
    p = tmp_path / "g.edges"
    p.write_text("# header\n0 1\n\n1 2  # trailing\n")
    assert read_edges(p).tolist() == [[0, 1], [1, 2]]


@pytest.mark.parametrize("text, lineno", [("0 1\n1\n", 2), ("0 x\n", 1), ("0 -1\n", 1)])
def test_edge_parse_errors_carry_line(tmp_path, text, lineno):
    p = tmp_path / "g.edges"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        read_edges(p)
    assert exc.value.lineno == lineno


def test_label_parse_error(tmp_path):
    p = tmp_path / "l"
    p.write_text("0\n1\nfoo\n")
    with pytest.raises(ParseError, match=":3:"):
        read_labels(p)


def test_matrix_row_count_mismatch(tmp_path):
    p = tmp_path / "m"
    p.write_text("3 2\n1 2\n3 4\n")
    with pytest.raises(ParseError):
        read_matrix(p)


def test_splits_reject_overlap_and_range(tmp_path):
    p = tmp_path / "s"
    p.write_text("train 0 1\ntest 1 2\n")
    with pytest.raises(ParseError, match="already"):
        read_splits(p)
    p.write_text("train 0 9\n")
    with pytest.raises(ParseError, match="range"):
        read_splits(p, num_nodes=5)


def test_bundle_roundtrip(tmp_path):
    feats = np.arange(8, dtype=float).reshape(4, 2)
    g = build_graph([(0, 1), (1, 2), (2, 3)], [0, 0, 1, 1], features=feats)
    b = write_bundle(g, tmp_path / "d" / "toy", splits={"train": [0, 2], "test": [1, 3]})
    g2, splits = load_bundle(b)
    assert g2.edge_array().tolist() == g.edge_array().tolist()
    assert np.array_equal(g2.features, feats)
    assert splits["train"].tolist() == [0, 2]


def test_bundle_node_count_mismatch(tmp_path):
    (tmp_path / "x.edges").write_text("0 5\n")
    (tmp_path / "x.labels").write_text("0\n1\n")
    with pytest.raises(ValueError, match="node count mismatch"):
        load_bundle(DatasetBundle.from_prefix(tmp_path / "x"))


def test_csv_report_roundtrip_and_bytes(tmp_path):
    rows = {"hop": [1, 2], "value": [0.75, 1 / 3]}
    write_csv_report(rows, tmp_path / "a.csv")
    write_csv_report(rows, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_csv_report(tmp_path / "a.csv")
    assert back["hop"] == [1.0, 2.0]
    assert abs(back["value"][1] - 1 / 3) < 1e-12


def test_csv_unequal_columns(tmp_path):
    with pytest.raises(ValueError):
        write_csv_report({"a": [1], "b": [1, 2]}, tmp_path / "c.csv")
