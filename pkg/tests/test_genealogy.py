import numpy as np
import pytest

from geneaperc.genealogy import (
    AncestorGapError,
    ChildGapError,
    MissingRootError,
    Tree,
    TreeError,
    VertexNotFoundError,
    ancestors,
    build_tree,
    complete_tree,
    descendants_count,
    format_label,
    parse_label,
    parse_text,
    path_tree,
    star,
    subtree,
)


def labels(t):
    return [format_label(lab) for lab in t.labels()]


def test_example_tree_structure(ex_tree):
    assert len(ex_tree) == 12
    assert ex_tree.n_edges == 11
    assert labels(ex_tree) == ["∅", "1", "11", "111", "112", "113", "12", "121", "2", "21", "211", "212"]
    assert list(ex_tree.generation_sizes()) == [1, 2, 3, 6]
    assert ex_tree.height == 3


def test_single_vertex_and_path():
    t = build_tree([("∅", 0)])
    assert len(t) == 1 and t.n_edges == 0
    p = build_tree([("", 1), ("1", 1), ("11", 0)])
    assert len(p) == 3 and p.n_edges == 2
    assert p == path_tree(2)


def test_build_order_independent(ex_tree):
    pairs = ex_tree.export()[::-1]
    assert build_tree(pairs) == ex_tree
    assert build_tree(pairs).digest() == ex_tree.digest()


@pytest.mark.parametrize(
    "pairs, err",
    [
        ([("1", 0)], MissingRootError),
        ([("∅", 1), ("1", 1), ("111", 0)], AncestorGapError),
        ([("∅", 1), ("1", 0), ("11", 0)], ChildGapError),
        ([("∅", 2), ("1", 0)], ChildGapError),
        ([("∅", 1), ("1", 0), ("2", 0)], ChildGapError),
    ],
)
def test_build_rejects(pairs, err):
    with pytest.raises(err):
        build_tree(pairs)


def test_negative_count_rejected():
    with pytest.raises(TreeError):
        build_tree([("∅", -1)])


def test_subtree(ex_tree):
    s = subtree(ex_tree, "1")
    assert labels(s) == ["∅", "1", "11", "12", "13", "2", "21"]
    assert subtree(ex_tree, "∅") == ex_tree
    assert len(subtree(path_tree(2), "11")) == 1
    assert descendants_count(ex_tree, "1") == 7


def test_ancestors(ex_tree):
    assert ancestors(ex_tree, "112") == [(), (1,), (1, 1)]
    assert ancestors(ex_tree, "∅") == []
    assert ancestors(path_tree(2), "11") == [(), (1,)]


def test_unknown_vertex(ex_tree):
    with pytest.raises(VertexNotFoundError):
        ex_tree.index("3")
    assert "212" in ex_tree and "213" not in ex_tree


def test_labels_roundtrip():
    assert parse_label("112") == (1, 1, 2)
    assert parse_label("1.12") == (1, 12)
    assert format_label((1, 12)) == "1.12"
    assert parse_label("∅") == ()
    with pytest.raises(TreeError):
        parse_label("10")


def test_text_roundtrip(ex_tree, tmp_path):
    assert parse_text(ex_tree.to_text()) == ex_tree
    (tmp_path / "t.txt").write_text("# comment\n" + ex_tree.to_text())
    from geneaperc.genealogy import read_tree

    assert read_tree(tmp_path / "t.txt") == ex_tree


def test_wide_tree_labels():
    t = star(12)
    assert format_label(t.label(12)) == "12."
    assert parse_label("12.") == (12,)
    assert parse_text(t.to_text()) == t
    deep = build_tree([("∅", 1), ("1", 11)] + [((1, i), 0) for i in range(1, 12)])
    assert format_label(deep.label(len(deep) - 1)) == "1.11"
    assert parse_text(deep.to_text()) == deep


def test_complete_tree_sizes():
    t = complete_tree(3, 3)
    assert len(t) == 1 + 3 + 9 + 27
    assert list(t.generation_sizes()) == [1, 3, 9, 27]
    assert (t.subtree_size[0], t.subtree_size[1]) == (40, 13)


def test_dot_output(ex_tree):
    dot = ex_tree.to_dot()
    assert dot.startswith("digraph tree {")
    assert dot.count("->") == 11


def test_from_bfs_matches_preorder(ex_tree):
    bfs_labels = sorted(ex_tree.labels(), key=lambda lab: (len(lab), lab))
    pos = {lab: i for i, lab in enumerate(bfs_labels)}
    parent = np.array([-1] + [pos[lab[:-1]] for lab in bfs_labels[1:]])
    counts = np.array([ex_tree.child_count[ex_tree.index(lab)] for lab in bfs_labels])
    assert Tree.from_bfs(parent, counts) == ex_tree
