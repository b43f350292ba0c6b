"""Property checks over randomly generated relations, dependency sets, and
statements. Every law here is one the rest of the suite relies on pointwise;
the generators shake out the shapes the golden tests do not reach."""

from decimal import Decimal

from hypothesis import given, settings, strategies as st

from fdq.fdstore import (
    CondAnd,
    CondOr,
    ErrorLeq,
    FDEntry,
    FDSet,
    FdmlQuery,
    LhsLength,
    LhsLike,
    RhsLike,
    attr_closure,
    dumps_fdset,
    fdml_to_text,
    loads_fdset,
    parse_fdml,
)
from fdq.miner import (
    CFD,
    MiningSpec,
    brute_force_mine,
    cfd_confidence,
    cfd_support,
    mine_fds,
)
from fdq.partition import FDCandidate, error_measure, fd_holds, intersect, pli_of
from fdq.query import (
    ColumnProjection,
    DependentProjection,
    ExtendedSelect,
    FdPredicate,
    PatternTableau,
    StarProjection,
    condition_to_tableau,
    eval_dependent,
    eval_holds,
    eval_not_holds,
    eval_violates,
    execute,
    parse_extended_select,
    select_to_text,
    tableau_match_rows,
)
from fdq.relation import And, Comparison, Not, Or, Relation, eval_row_predicate
from fdq.setexpr import AllOf, AnyOf, Combine, GlobList, Star

NAMES = ("A", "B", "C", "D", "E")

common = settings(derandomize=True, deadline=None, max_examples=200)


# --- generators -----------------------------------------------------------------

@st.composite
def relations(draw, min_attrs=1, max_attrs=5, max_rows=12):
    n_attrs = draw(st.integers(min_attrs, max_attrs))
    names = NAMES[:n_attrs]
    kinds = [draw(st.sampled_from(["integer", "text"])) for _ in names]
    cells = [
        st.integers(0, 3) if kind == "integer" else st.sampled_from("abc")
        for kind in kinds
    ]
    rows = draw(st.lists(st.tuples(*cells), max_size=max_rows))
    return Relation.build("t", list(zip(names, kinds)), rows)


@st.composite
def relations_with_fd(draw, min_attrs=2):
    relation = draw(relations(min_attrs=min_attrs))
    names = list(relation.attribute_names)
    rhs = draw(st.sampled_from(names))
    pool = [n for n in names if n != rhs]
    lhs = draw(st.lists(st.sampled_from(pool), min_size=1, unique=True))
    return relation, lhs, rhs


@st.composite
def fdsets(draw):
    keys = draw(
        st.lists(
            st.tuples(
                st.lists(st.sampled_from(NAMES), min_size=1, max_size=3, unique=True),
                st.sampled_from(NAMES),
            ).filter(lambda pair: pair[1] not in pair[0]),
            max_size=8,
        )
    )
    entries = {}
    for lhs, rhs in keys:
        error = draw(st.sampled_from([0.0, 0.0, 0.25, 0.5]))
        origin = draw(st.sampled_from(["mined", "imported"]))
        entry = FDEntry(tuple(sorted(lhs)), rhs, error=error, origin=origin)
        entries[entry.key] = entry
    return FDSet(
        name=draw(st.sampled_from(["fs", "prev", "night_run"])),
        table_binding="t",
        table_fingerprint=draw(st.integers(0, 2**64 - 1)),
        entries=tuple(sorted(entries.values(), key=lambda e: e.key)),
        mined_at=draw(st.sampled_from(["", "2026-01-01T00:00:00Z"])),
    )


glob_patterns = st.sampled_from(("A", "B", "E", "*", "A*", "*B", "*o*", "Cat*"))
glob_lists = st.lists(glob_patterns, min_size=1, max_size=3).map(
    lambda ps: GlobList(tuple(ps))
)
set_exprs = st.recursive(
    glob_lists | st.just(Star()),
    lambda inner: st.tuples(st.sampled_from("+-"), inner, inner).map(
        lambda t: Combine(t[0], t[1], t[2])
    ),
    max_leaves=4,
)
lhs_constructs = set_exprs | set_exprs.map(AllOf) | set_exprs.map(AnyOf)

fdml_plain_atoms = (
    lhs_constructs.map(LhsLike)
    | set_exprs.map(RhsLike)
    | st.tuples(
        st.sampled_from(("=", "!=", "<", "<=", ">", ">=")), st.integers(0, 4)
    ).map(lambda t: LhsLength(t[0], t[1]))
)
error_atoms = st.sampled_from((0.0, 0.05, 0.5)).map(ErrorLeq)


@st.composite
def fdml_and_chains(draw):
    # at most one ERROR atom per AND-chain, per the language rule
    items = draw(st.lists(fdml_plain_atoms, min_size=1, max_size=3))
    if draw(st.booleans()):
        items.insert(draw(st.integers(0, len(items))), draw(error_atoms))
    if len(items) == 1:
        return items[0]
    return CondAnd(tuple(items))


fdml_conditions = fdml_and_chains() | st.lists(
    fdml_and_chains(), min_size=2, max_size=3
).map(lambda items: CondOr(tuple(items)))

fdml_queries = st.builds(
    FdmlQuery,
    projection=st.sampled_from(("star", "pairs")),
    source=st.sampled_from(("fs", "prev")),
    where=st.none() | fdml_conditions,
)

attr_names = st.sampled_from(NAMES)
constants = st.integers(-3, 20) | st.sampled_from(("x", "long value", "SCOTCH"))
comparisons = st.builds(
    Comparison,
    attribute=attr_names,
    op=st.sampled_from(("=", "!=", "<", "<=", ">", ">=")),
    constant=constants,
)
row_conditions = st.recursive(
    comparisons,
    lambda inner: (
        st.lists(inner, min_size=2, max_size=3).map(lambda i: And(tuple(i)))
        | st.lists(inner, min_size=2, max_size=3).map(lambda i: Or(tuple(i)))
        | inner.map(Not)
    ),
    max_leaves=5,
)


@st.composite
def fd_predicates(draw):
    lhs = tuple(draw(st.lists(attr_names, min_size=1, max_size=2, unique=True)))
    rhs = draw(attr_names)
    kind = draw(st.sampled_from(("holds", "not_holds", "violates")))
    if kind == "violates":
        return FdPredicate(
            "violates",
            lhs,
            rhs,
            error=draw(st.none() | st.sampled_from((0.0, 0.5))),
            suspect=draw(st.sampled_from(lhs)),
        )
    on = draw(st.none() | row_conditions)
    error = None
    if kind == "holds":
        error = draw(st.none() | st.sampled_from((0.0, 0.05)))
    return FdPredicate(kind, lhs, rhs, on=on, error=error)


where_trees = st.recursive(
    comparisons | fd_predicates(),
    lambda inner: (
        st.lists(inner, min_size=2, max_size=3).map(lambda i: And(tuple(i)))
        | st.lists(inner, min_size=2, max_size=3).map(lambda i: Or(tuple(i)))
    ),
    max_leaves=4,
)

projections = (
    st.just(StarProjection())
    | st.lists(attr_names, min_size=1, max_size=3, unique=True).map(
        lambda names: ColumnProjection(tuple(names))
    )
    | st.builds(
        DependentProjection,
        attributes=st.lists(attr_names, min_size=1, max_size=2, unique=True).map(
            tuple
        ),
        error=st.none() | st.sampled_from((0.0, 0.1)),
    )
)
select_statements = st.builds(
    ExtendedSelect,
    projection=projections,
    source=st.sampled_from(("t", "IOWA")),
    where=st.none() | where_trees,
)


# --- dependency predicate laws -----------------------------------------------------

@common
@given(relations_with_fd())
def test_holds_and_not_holds_partition_the_table(case):
    relation, lhs, rhs = case
    kept = eval_holds(relation, lhs, rhs)
    witnesses = eval_not_holds(relation, lhs, rhs)
    assert kept | witnesses == set(range(relation.row_count))
    assert kept & witnesses == set()


@common
@given(relations_with_fd())
def test_holds_is_idempotent_on_its_result(case):
    relation, lhs, rhs = case
    kept = sorted(eval_holds(relation, lhs, rhs))
    cleaned = relation.with_rows([relation.rows[i] for i in kept])
    assert eval_holds(cleaned, lhs, rhs) == set(range(len(kept)))


@common
@given(relations_with_fd())
def test_exact_holds_means_no_disagreeing_pair(case):
    relation, lhs, rhs = case
    kept = eval_holds(relation, lhs, rhs)
    lhs_idx = [relation.attribute(n).index for n in lhs]
    rhs_idx = relation.attribute(rhs).index
    for i in kept:
        for j in kept:
            a, b = relation.rows[i], relation.rows[j]
            if all(a[k] == b[k] for k in lhs_idx):
                assert a[rhs_idx] == b[rhs_idx]


@common
@given(relations_with_fd(), st.sampled_from((0.0, 0.01, 0.1, 0.5)))
def test_approximate_holds_is_staged(case, bound):
    relation, lhs, rhs = case
    lhs_idx = frozenset(relation.attribute(n).index for n in lhs)
    rhs_idx = relation.attribute(rhs).index
    measured = error_measure(relation, FDCandidate(lhs_idx, rhs_idx))
    kept = eval_holds(relation, lhs, rhs, error=bound)
    if measured <= bound:
        assert kept == eval_holds(relation, lhs, rhs)
    else:
        assert kept == set()


@common
@given(relations_with_fd())
def test_error_measure_shrinks_as_lhs_grows(case):
    relation, lhs, rhs = case
    rhs_idx = relation.attribute(rhs).index
    lhs_idx = [relation.attribute(n).index for n in lhs]
    others = [
        m.index
        for m in relation.schema
        if m.index != rhs_idx and m.index not in lhs_idx
    ]
    base = error_measure(relation, FDCandidate(frozenset(lhs_idx), rhs_idx))
    for extra in others:
        widened = error_measure(
            relation, FDCandidate(frozenset(lhs_idx) | {extra}, rhs_idx)
        )
        assert widened <= base + 1e-12


@common
@given(relations_with_fd())
def test_error_measure_agrees_with_pairwise_oracle(case):
    relation, lhs, rhs = case
    lhs_idx = [relation.attribute(n).index for n in lhs]
    rhs_idx = relation.attribute(rhs).index
    n = relation.row_count
    violating = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = relation.rows[i], relation.rows[j]
            if all(a[k] == b[k] for k in lhs_idx) and a[rhs_idx] != b[rhs_idx]:
                violating += 1
    expected = 0.0 if n <= 1 else violating / (n * n - n)
    measured = error_measure(relation, FDCandidate(frozenset(lhs_idx), rhs_idx))
    assert abs(measured - expected) < 1e-12
    assert fd_holds(relation, FDCandidate(frozenset(lhs_idx), rhs_idx)) == (
        violating == 0
    )


@common
@given(relations_with_fd())
def test_violates_stays_inside_conflicted_groups(case):
    relation, lhs, rhs = case
    suspect = lhs[0]
    found = eval_violates(relation, suspect, lhs, rhs, threshold=1.0)
    suspect_idx = relation.attribute(suspect).index
    group_idx = [relation.attribute(n).index for n in lhs if n != suspect] + [
        relation.attribute(rhs).index
    ]
    groups = {}
    for i in range(relation.row_count):
        key = tuple(relation.rows[i][k] for k in group_idx)
        groups.setdefault(key, set()).add(i)
    for i in found:
        key = tuple(relation.rows[i][k] for k in group_idx)
        values = {
            relation.rows[j][suspect_idx] for j in groups[key]
        } - {None}
        assert len(values) >= 2
        assert relation.rows[i][suspect_idx] is not None


@common
@given(relations(min_attrs=2, max_attrs=4, max_rows=10))
def test_dependent_matches_the_minimal_cover(relation):
    names = list(relation.attribute_names)
    x = names[: max(1, len(names) - 2)]
    mined = brute_force_mine(relation)
    expected = {e.rhs for e in mined.entries if e.lhs == tuple(sorted(x))}
    result = eval_dependent(relation, x)
    assert set(result) == expected
    order = {m.name: m.index for m in relation.schema}
    assert result == sorted(result, key=order.get)


# --- partitions ---------------------------------------------------------------------

@common
@given(relations(min_attrs=2, max_rows=14))
def test_pli_intersection_equals_combined_pli(relation):
    indexes = [m.index for m in relation.schema]
    half = max(1, len(indexes) // 2)
    a, b = indexes[:half], indexes[half:]
    combined = pli_of(relation, a + b)
    merged = intersect(pli_of(relation, a), pli_of(relation, b))
    assert combined.clusters == merged.clusters


@common
@given(relations(max_rows=14))
def test_pli_clusters_are_disjoint_and_stripped(relation):
    pli = pli_of(relation, [m.index for m in relation.schema])
    seen = set()
    for cluster in pli.clusters:
        assert len(cluster) >= 2
        assert list(cluster) == sorted(cluster)
        assert not (set(cluster) & seen)
        seen.update(cluster)


# --- mining -------------------------------------------------------------------------

@common
@given(relations(max_attrs=4, max_rows=10), st.sampled_from((0.0, 0.05, 0.2)))
def test_levelwise_mining_equals_brute_force(relation, threshold):
    spec = MiningSpec(error_threshold=threshold)
    fast = mine_fds(relation, spec)
    slow = brute_force_mine(relation, spec)
    assert [(e.key, e.error) for e in fast.entries] == [
        (e.key, e.error) for e in slow.entries
    ]


@common
@given(relations_with_fd())
def test_wildcard_cfd_confidence_is_one_exactly_when_fd_holds(case):
    relation, lhs, rhs = case
    attrs = tuple(lhs) + (rhs,)
    tableau = PatternTableau(attrs, ((None,) * len(attrs),))
    cfd = CFD(tuple(lhs), rhs, tableau)
    confidence = cfd_confidence(relation, cfd)
    assert 0.0 <= confidence <= 1.0
    lhs_idx = frozenset(relation.attribute(n).index for n in lhs)
    holds = fd_holds(relation, FDCandidate(lhs_idx, relation.attribute(rhs).index))
    assert (confidence == 1.0) == holds


@common
@given(relations_with_fd())
def test_wildcard_pattern_support_is_total(case):
    relation, lhs, rhs = case
    pattern = {name: None for name in tuple(lhs) + (rhs,)}
    support = cfd_support(relation, tuple(lhs), rhs, pattern)
    if relation.row_count:
        assert support == 1.0
    else:
        assert support == 0.0


# --- closure ------------------------------------------------------------------------

exact_fdsets = fdsets().map(
    lambda fs: FDSet(
        name=fs.name,
        table_binding=fs.table_binding,
        table_fingerprint=fs.table_fingerprint,
        entries=tuple(
            FDEntry(e.lhs, e.rhs, error=0.0, origin=e.origin) for e in fs.entries
        ),
        mined_at=fs.mined_at,
    )
)
name_sets = st.lists(st.sampled_from(NAMES), max_size=4, unique=True).map(frozenset)


@common
@given(exact_fdsets, name_sets)
def test_closure_is_extensive_and_idempotent(fdset, x):
    closed = attr_closure(x, fdset)
    assert x <= closed
    assert attr_closure(closed, fdset) == closed


@common
@given(exact_fdsets, name_sets, name_sets)
def test_closure_is_monotone(fdset, x, y):
    if not x <= y:
        x, y = x & y, x | y
    assert attr_closure(x, fdset) <= attr_closure(y, fdset)


# --- persistence and round trips ----------------------------------------------------

@common
@given(fdsets())
def test_fdset_serialization_round_trips(fdset):
    assert loads_fdset(dumps_fdset(fdset)) == fdset


@common
@given(fdml_queries)
def test_fdml_print_parse_round_trips(query):
    printed = fdml_to_text(query)
    assert parse_fdml(printed) == query
    assert fdml_to_text(parse_fdml(printed)) == printed


@common
@given(select_statements)
def test_select_print_parse_round_trips(ast):
    printed = select_to_text(ast)
    assert parse_extended_select(printed) == ast
    assert select_to_text(parse_extended_select(printed)) == printed


@common
@given(relations(max_rows=8))
def test_fingerprint_tracks_content_not_identity(relation):
    rebuilt = relation.with_rows(list(relation.rows))
    assert rebuilt.fingerprint == relation.fingerprint
    if relation.row_count:
        meta = relation.schema[0]
        old = relation.rows[0][meta.index]
        new = 99 if meta.kind == "integer" else "zz"
        rows = [
            row[: meta.index] + (new,) + row[meta.index + 1 :] if i == 0 else row
            for i, row in enumerate(relation.rows)
        ]
        if old != new:
            assert relation.with_rows(rows).fingerprint != relation.fingerprint


# --- query algebra -------------------------------------------------------------------

@common
@given(relations_with_fd(), st.integers(0, 3))
def test_where_tree_is_set_algebra_over_predicates(case, pivot):
    relation, lhs, rhs = case
    first = relation.schema[0]
    pred = FdPredicate("holds", tuple(lhs), rhs)
    comparison = Comparison(first.name, ">=", pivot if first.kind == "integer" else "b")
    kept_pred = eval_holds(relation, lhs, rhs)
    kept_cmp = eval_row_predicate(relation, comparison)
    both = execute(
        ExtendedSelect(StarProjection(), "t", And((pred, comparison))), relation
    )
    either = execute(
        ExtendedSelect(StarProjection(), "t", Or((pred, comparison))), relation
    )
    assert len(both.rows) == len(kept_pred & kept_cmp)
    assert len(either.rows) == len(kept_pred | kept_cmp)


def _typed_constant(meta, integer_pick, text_pick):
    return integer_pick if meta.kind == "integer" else text_pick


@common
@given(
    relations(min_attrs=2, max_attrs=4, max_rows=10),
    st.integers(0, 3),
    st.sampled_from("abc"),
    st.sampled_from(("=", "!=", "<", "<=", ">", ">=")),
)
def test_tableau_compilation_matches_direct_evaluation(relation, n, s, op):
    names = list(relation.attribute_names)
    lhs, rhs = names[:-1], names[-1]
    first, last = relation.schema[0], relation.schema[-1]
    condition = Or(
        (
            Comparison(first.name, op, _typed_constant(first, n, s)),
            And(
                (
                    Comparison(first.name, "!=", _typed_constant(first, n, s)),
                    Comparison(last.name, "=", _typed_constant(last, n, s)),
                )
            ),
        )
    )
    tableau = condition_to_tableau(condition, lhs, rhs, relation)
    assert tableau_match_rows(relation, tableau) == eval_row_predicate(
        relation, condition
    )
