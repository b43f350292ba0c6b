import itertools

import pytest

from fdq.errors import ContractError
from fdq.partition import (
    FDCandidate,
    PLI,
    build_pli,
    error_measure,
    fd_holds,
    intersect,
    pli_of,
)
from fdq.relation import Relation, load_csv


def idx(relation, name):
    return relation.attribute(name).index


def pairwise_error(relation, lhs, rhs, scope=None):
    """Direct ordered-pair count, used as an independent check."""
    rows = relation.rows
    indices = sorted(scope) if scope is not None else range(len(rows))
    n = len(indices)
    if n <= 1:
        return 0.0
    bad = 0
    for i, j in itertools.permutations(indices, 2):
        if all(rows[i][a] == rows[j][a] for a in lhs) and rows[i][rhs] != rows[j][rhs]:
            bad += 1
    return bad / (n * n - n)


class TestBuildPli:
    def test_category_clusters(self, iowa):
        pli = build_pli(iowa, idx(iowa, "Category"))
        assert pli.clusters == ((0, 2, 9), (4, 7), (5, 6))

    def test_key_attribute_strips_to_empty(self, iowa):
        assert build_pli(iowa, idx(iowa, "Sale")).clusters == ()

    def test_empty_relation(self):
        rel = load_csv(b"A\n")
        assert build_pli(rel, 0).clusters == ()

    def test_nulls_group_together(self):
        rel = load_csv(b"A,B\n,1\n,2\nx,3\n")
        assert build_pli(rel, 0).clusters == ((0, 1),)

    def test_out_of_range_attribute(self, iowa):
        with pytest.raises(ContractError):
            build_pli(iowa, 11)

    def test_invariants_enforced(self):
        with pytest.raises(ContractError):
            PLI(((3,),), 5)
        with pytest.raises(ContractError):
            PLI(((2, 1),), 5)
        with pytest.raises(ContractError):
            PLI(((0, 1), (1, 2)), 5)
        with pytest.raises(ContractError):
            PLI(((2, 3), (0, 1)), 5)


class TestIntersect:
    def test_category_with_btlvol(self, iowa):
        a = build_pli(iowa, idx(iowa, "Category"))
        b = build_pli(iowa, idx(iowa, "BtlVol"))
        assert intersect(a, b).clusters == ((2, 9), (4, 7), (5, 6))
        assert intersect(a, b).clusters == pli_of(
            iowa, [idx(iowa, "Category"), idx(iowa, "BtlVol")]
        ).clusters

    def test_commutes(self, iowa):
        names = iowa.attribute_names
        for x, y in itertools.combinations(range(len(names)), 2):
            a, b = build_pli(iowa, x), build_pli(iowa, y)
            assert intersect(a, b) == intersect(b, a)

    def test_idempotent(self, iowa):
        a = build_pli(iowa, idx(iowa, "Category"))
        assert intersect(a, a) == a

    def test_disjoint_inputs_give_empty(self):
        rel = load_csv(b"A,B\n1,5\n1,6\n2,5\n2,6\n")
        a = build_pli(rel, 0)
        b = build_pli(rel, 1)
        assert intersect(a, b).clusters == ()

    def test_size_mismatch_rejected(self):
        with pytest.raises(ContractError):
            intersect(PLI((), 3), PLI((), 4))


class TestFdHolds:
    def test_zip_determines_pack(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Zip")}), idx(iowa, "Pack"))
        assert fd_holds(iowa, cand)

    def test_address_does_not_determine_zip(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Address")}), idx(iowa, "Zip"))
        assert not fd_holds(iowa, cand)

    def test_shrinking_cluster_is_not_enough(self):
        # two clusters merge rows yet one still disagrees on B; cardinality
        # equality of the stripped partitions would wrongly say "holds"
        rel = Relation.build(
            "t",
            [("A", "integer"), ("B", "integer")],
            [[1, 1], [1, 1], [1, 2], [2, 3], [3, 3]],
        )
        cand = FDCandidate(frozenset({0}), 1)
        assert not fd_holds(rel, cand)
        assert error_measure(rel, cand) > 0

    def test_trivial_candidate_rejected_at_construction(self):
        with pytest.raises(ContractError):
            FDCandidate(frozenset({1, 2}), 1)

    def test_scoped_check(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Address")}), idx(iowa, "Zip"))
        assert not fd_holds(iowa, cand, scope={1, 2, 5, 7})
        assert fd_holds(iowa, cand, scope={0, 1, 2})


class TestErrorMeasure:
    def test_category_to_categoryname(self, iowa):
        cand = FDCandidate(
            frozenset({idx(iowa, "Category")}), idx(iowa, "CategoryName")
        )
        assert error_measure(iowa, cand) == 4 / 90

    def test_address_to_zip(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Address")}), idx(iowa, "Zip"))
        assert error_measure(iowa, cand) == 2 / 90

    def test_holding_fd_has_zero_error(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Zip")}), idx(iowa, "Pack"))
        assert error_measure(iowa, cand) == 0.0

    def test_agrees_with_pairwise_count(self, iowa):
        names = iowa.attribute_names
        for lhs_name, rhs_name in itertools.permutations(names, 2):
            lhs, rhs = [idx(iowa, lhs_name)], idx(iowa, rhs_name)
            cand = FDCandidate(frozenset(lhs), rhs)
            assert error_measure(iowa, cand) == pairwise_error(iowa, lhs, rhs)

    def test_singleton_scope_is_zero(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Address")}), idx(iowa, "Zip"))
        assert error_measure(iowa, cand, scope={3}) == 0.0

    def test_empty_scope_rejected(self, iowa):
        cand = FDCandidate(frozenset({idx(iowa, "Address")}), idx(iowa, "Zip"))
        with pytest.raises(ContractError):
            error_measure(iowa, cand, scope=set())

    def test_empty_relation_is_zero(self):
        rel = load_csv(b"A,B\n")
        assert error_measure(rel, FDCandidate(frozenset({0}), 1)) == 0.0

    def test_larger_lhs_never_increases_error(self, iowa):
        rhs = idx(iowa, "Zip")
        base = FDCandidate(frozenset({idx(iowa, "Address")}), rhs)
        for extra in range(len(iowa.schema)):
            if extra == rhs or extra == idx(iowa, "Address"):
                continue
            grown = FDCandidate(base.lhs | {extra}, rhs)
            assert error_measure(iowa, grown) <= error_measure(iowa, base)
