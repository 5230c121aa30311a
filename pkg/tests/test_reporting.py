import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from models.schemas import METRIC_NAMES
from services.embedding import Embedding, bipartite_spectral_embedding, spectral_embedding
from services.errors import GraphFormatError
from services.generators import bipartite_block_model
from services.reporting import (csv_table, markdown_table, read_embedding, theory_report, write_embedding,
                                write_tables)


def _frame():
    rows = {"alpha_rel": [0.0, 0.1]}
    for m in METRIC_NAMES:
        rows[m] = [0.5, np.nan]
        rows[f"{m}_std"] = [0.0, np.nan]
        rows[f"{m}_n"] = [2, 0]
    return pd.DataFrame(rows)


def test_markdown_table():
    text = markdown_table(_frame(), ["alpha_rel"])
    lines = text.splitlines()
    assert lines[0] == "| alpha_rel | " + " | ".join(METRIC_NAMES) + " |"
    assert lines[1].count("---") == 1 + len(METRIC_NAMES)
    assert lines[2] == "| 0 | " + " | ".join(["0.50"] * len(METRIC_NAMES)) + " |"
    assert lines[3] == "| 0.1 | " + " | ".join(["NA"] * len(METRIC_NAMES)) + " |"


def test_csv_table():
    text = csv_table(_frame())
    header, first, second = text.splitlines()
    assert header.startswith("alpha_rel,H,H_std,H_n,C,")
    assert first.startswith("0.000000,0.500000,0.000000,2,")
    assert second.startswith("0.100000,NA,NA,0,")
    assert text.endswith("\n")


def test_write_tables(tmp_path):
    md, csv = write_tables(_frame(), tmp_path / "nested", "alpha_sweep", ["alpha_rel"])
    assert md.read_text() == markdown_table(_frame(), ["alpha_rel"])
    assert csv.read_text() == csv_table(_frame())


def test_embedding_file_reloads(tmp_path, toy):
    g, _ = toy
    emb = spectral_embedding(g, 2, alpha=1.0)
    path = tmp_path / "emb.csv"
    write_embedding(emb, path)
    assert path.read_text().splitlines()[0] == "node,x2,x3"
    again = read_embedding(path)
    np.testing.assert_array_equal(again.coordinates, emb.coordinates)
    np.testing.assert_array_equal(again.eigenvalues, emb.eigenvalues)
    assert again.alpha_absolute == emb.alpha_absolute
    assert again.skip_first and again.part_boundary is None
    assert again.node_names == tuple(str(i) for i in range(10))


@hsettings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=12))
def test_embedding_file_keeps_every_bit(tmp_path_factory, values):
    coords = np.array(values[: len(values) // 2 * 2]).reshape(-1, 2)
    emb = Embedding(coords, np.array([0.1 + 0.2, 1 / 3]), 1 / 7, True)
    path = tmp_path_factory.mktemp("emb") / "emb.csv"
    write_embedding(emb, path)
    again = read_embedding(path)
    np.testing.assert_array_equal(again.coordinates, coords)
    np.testing.assert_array_equal(again.eigenvalues, emb.eigenvalues)
    assert again.alpha_absolute == 1 / 7


def test_bipartite_embedding_file_keeps_boundary(tmp_path):
    b, _, _ = bipartite_block_model([3, 2], [3, 2])
    emb = bipartite_spectral_embedding(b, 1, alpha=1.0, skip_first=False)
    write_embedding(emb, tmp_path / "emb.csv")
    again = read_embedding(tmp_path / "emb.csv")
    assert again.part_boundary == 5 and again.first_index == 1


def test_embedding_without_sidecar(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text("node,x1,x2\na,1,2\nb,3,4\n")
    emb = read_embedding(path)
    assert emb.first_index == 1
    assert emb.node_names == ("a", "b")
    assert np.isnan(emb.eigenvalues).all()


@pytest.mark.parametrize("text", ["id,x2\na,1\n", "node,y\na,1\n", "node\na\n", ""])
def test_embedding_bad_header(tmp_path, text):
    path = tmp_path / "emb.csv"
    path.write_text(text)
    with pytest.raises(GraphFormatError):
        read_embedding(path)


def test_embedding_bad_sidecar(tmp_path):
    path = tmp_path / "emb.csv"
    write_embedding(Embedding(np.ones((2, 1)), np.array([0.5]), 0.0, True), path)
    (tmp_path / "emb.csv.meta").write_text("eigenvalues\n")
    with pytest.raises(GraphFormatError):
        read_embedding(path)


def test_theory_report_cliques():
    text = theory_report([5, 3, 2], 1.0)
    assert "alpha = 1, n = 10" in text
    assert "0.666667" in text and "0.833333" in text
    assert "lambda_2 = 0.7248" in text
    assert "sign split {1} | {2, 3}" in text
    assert "dim 3: {1, 2} | {3}" in text


def test_theory_report_equal_sizes_and_bipartite():
    text = theory_report([3, 3], 1.0)
    assert "skipped" in text
    text = theory_report([3, 2], 1.0, m_sizes=[3, 2])
    assert text.startswith("bipartite block model, alpha = 1")
    assert "key_small_alpha" in text and "0.859375" in text
    assert "dim 2: {1} | {2}" in text
