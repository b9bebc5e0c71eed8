import pytest

from cone.communities import Community, CommunityFormatError, CommunitySet, read_communities, write_communities


def test_empty_community_rejected():
    with pytest.raises(ValueError):
        Community("c", frozenset())


def test_unknown_split_tag():
    with pytest.raises(ValueError):
        CommunitySet([], "validation")


def test_file_round_trip(tmp_path):
    ids = ("a", "b", "c", "d")
    index = {v: i for i, v in enumerate(ids)}
    cs = CommunitySet([Community("x", {0, 1}), Community("y", {1, 2, 3})])
    write_communities(cs, tmp_path / "c.txt", ids)
    back = read_communities(tmp_path / "c.txt", index)
    assert [(c.id, c.members) for c in back] == [("x", {0, 1}), ("y", {1, 2, 3})]


def test_unknown_member_named_with_line(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("x a b\ny a zz\n")
    with pytest.raises(CommunityFormatError, match=r"zz \(line 2\)"):
        read_communities(p, {"a": 0, "b": 1})


def test_nodes_union_and_check():
    cs = CommunitySet.from_sets([{0, 1}, {1, 5}])
    assert cs.nodes() == {0, 1, 5}
    with pytest.raises(ValueError):
        cs.check_nodes(5)
