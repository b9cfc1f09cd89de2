from __future__ import annotations

import itertools

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from katetov.engines.limits import (
    PartialMap,
    back_and_forth,
    check_partial_map,
    compose_truncations,
    continuity_probe,
    embed_endomorphisms,
    extend_partial_morphism,
    k_omega_morphism,
    retraction,
)
from katetov.engines.metric import uniform_space
from katetov.engines.structures import (
    ClassTag,
    MorphismKind,
    boolean_algebra,
    check_morphism,
    compose,
    digraph,
    empty_structure,
    graph,
    identity,
    linear_order,
    make_morphism,
    poset,
    tournament,
)
from katetov.engines.tower import TowerAddress as A
from katetov.engines.tower import TowerHandle
from katetov.errors import ContractError, StructuralError

from .strategies import endomorphisms

EMPTY = PartialMap((), ())

# windows over {c = collapse, i = identity}; a stable tail needs two identities
_WINDOWS = ["".join(w) for n in range(2, 8) for w in itertools.product("ci", repeat=n)]
STABILIZING = [w for w in _WINDOWS if w.endswith("ii")][:20]
NON_STABILIZING = [w for w in _WINDOWS if not w.endswith("ii")][::7][:20]


class TestPartialMap:
    def test_lengths_must_agree(self):
        with pytest.raises(StructuralError):
            PartialMap((A(1, 0),), ())

    def test_valid_embedding(self, graph_tower):
        m = PartialMap((A(1, 0), A(2, 2)), (A(1, 0), A(2, 2)))
        assert check_partial_map(graph_tower, graph_tower, m)

    def test_edge_to_non_edge(self, graph_tower):
        m = PartialMap((A(1, 0), A(2, 2)), (A(1, 0), A(2, 1)))
        assert not check_partial_map(graph_tower, graph_tower, m)
        # the same table is a fine homomorphism the other way round
        back = PartialMap((A(1, 0), A(2, 1)), (A(1, 0), A(2, 2)), MorphismKind.HOMOMORPHISM)
        assert check_partial_map(graph_tower, graph_tower, back)

    def test_classes_must_match(self, graph_tower):
        other = TowerHandle(digraph([]))
        assert not check_partial_map(graph_tower, other, EMPTY)


class TestBackAndForth:
    def test_three_steps(self, graph_tower):
        other = TowerHandle(graph([]))
        m = back_and_forth(graph_tower, other, EMPTY, 3)
        assert m.pairs() == [
            (A(1, 0), A(1, 0)),
            (A(2, 1), A(2, 1)),
            (A(2, 2), A(2, 2)),
        ]
        assert m.kind is MorphismKind.ISOMORPHISM
        assert check_partial_map(graph_tower, other, m)

    def test_zero_steps(self, graph_tower):
        m = back_and_forth(graph_tower, TowerHandle(graph([])), EMPTY, 0)
        assert m.size == 0

    def test_seed_is_kept(self, graph_tower):
        seed = PartialMap((A(2, 2),), (A(1, 0),))
        m = back_and_forth(graph_tower, TowerHandle(graph([])), seed, 2)
        assert m.pairs()[0] == (A(2, 2), A(1, 0))
        assert m.size == 3

    def test_towers_of_different_classes(self, graph_tower):
        with pytest.raises(ContractError):
            back_and_forth(graph_tower, TowerHandle(digraph([])), EMPTY, 1)

    def test_seed_must_be_a_partial_isomorphism(self, graph_tower):
        bad = PartialMap((A(1, 0), A(2, 1)), (A(1, 0), A(2, 2)))
        with pytest.raises(ContractError, match="partial isomorphism"):
            back_and_forth(graph_tower, graph_tower, bad, 1)

    def test_boolean_towers(self, b1):
        t = TowerHandle(b1)
        with pytest.raises(ContractError):
            back_and_forth(t, t, EMPTY, 1)


class TestKOmega:
    def test_embedding_ladder(self, k1, edge):
        f = make_morphism(k1, edge, {"a": "a"}, MorphismKind.EMBEDDING)
        ladder = k_omega_morphism(f, 2)
        assert ladder.depth == 2
        assert ladder.squares_commute()
        assert check_morphism(ladder.at(2))
        assert ladder.at(2).target.size == 70

    def test_collapse_ladder(self, path3, edge):
        f = make_morphism(path3, edge, {"a": "a", "b": "b", "c": "a"})
        ladder = k_omega_morphism(f, 1)
        assert ladder.squares_commute()
        assert ladder.at(0) is f

    def test_towers_must_match(self, k1, edge):
        f = make_morphism(k1, edge, {"a": "a"}, MorphismKind.EMBEDDING)
        with pytest.raises(ContractError):
            k_omega_morphism(f, 1, source=TowerHandle(edge))

    def test_kn_free_homomorphisms_are_refused(self):
        a = graph(["a"], n=3)
        with pytest.raises(ContractError):
            k_omega_morphism(identity(a).with_kind(MorphismKind.HOMOMORPHISM), 1)


class TestExtendPartialMorphism:
    def test_point_fixing_map_extends_to_identity(self, graph_tower):
        f = PartialMap((A(1, 0),), (A(1, 0),))
        e = extend_partial_morphism(graph_tower, f, 1)
        assert e.table == {A(1, 0): A(1, 0)}
        assert e.check()

    def test_deeper_truncation(self, graph_tower):
        f = PartialMap((A(1, 0),), (A(1, 0),))
        e = extend_partial_morphism(graph_tower, f, 2)
        assert e.table == {p: p for p in graph_tower.points(2)}
        assert e.apply(A(2, 0)) == A(1, 0)

    def test_outside_the_truncation(self, graph_tower):
        f = PartialMap((A(1, 0),), (A(1, 0),))
        e = extend_partial_morphism(graph_tower, f, 1)
        with pytest.raises(StructuralError, match="outside"):
            e.apply(A(2, 2))

    def test_invalid_map(self, graph_tower):
        f = PartialMap((A(1, 0), A(2, 2)), (A(2, 1), A(2, 2)), MorphismKind.HOMOMORPHISM)
        with pytest.raises(ContractError):
            extend_partial_morphism(graph_tower, f, 2)

    def test_boolean(self, b1):
        with pytest.raises(ContractError):
            extend_partial_morphism(TowerHandle(b1), EMPTY, 1)


class TestEmbedEndomorphisms:
    @pytest.fixture
    def pair(self):
        return graph(["a", "b"])

    @pytest.fixture
    def swap(self, pair):
        return make_morphism(pair, pair, {"a": "b", "b": "a"}, MorphismKind.ISOMORPHISM)

    def test_identity(self, pair):
        (e,) = embed_endomorphisms(pair, [identity(pair)], 1)
        assert all(k == v for k, v in e.table.items())
        assert len(e.table) == 6

    def test_swap(self, pair, swap):
        (e,) = embed_endomorphisms(pair, [swap], 1)
        assert e.apply(A(0, "a")) == A(0, "b")
        # New({a}) is element 3 and New({b}) element 5 of K(pair)
        assert e.apply(A(1, 3)) == A(1, 5)
        assert e.apply(A(1, 4)) == A(1, 4)
        assert e.check()

    def test_swap_squared_is_identity(self, pair, swap):
        e, ident = embed_endomorphisms(pair, [swap, identity(pair)], 1)
        assert compose_truncations(e, e).same_table(ident)

    def test_multiplicative(self, pair, swap):
        t = TowerHandle(pair)
        e, ee = embed_endomorphisms(pair, [swap, compose(swap, swap)], 1, tower=t)
        assert compose_truncations(e, e).same_table(ee)

    def test_tower_must_be_seeded_with_c(self, pair, swap, k1):
        with pytest.raises(ContractError):
            embed_endomorphisms(pair, [swap], 1, tower=TowerHandle(k1))

    def test_maps_must_be_endomorphisms(self, pair, k1):
        f = make_morphism(k1, pair, {"a": "a"}, MorphismKind.EMBEDDING)
        with pytest.raises(ContractError):
            embed_endomorphisms(pair, [f], 1)


def _tower(tag: ClassTag) -> TowerHandle:
    """Tower from the empty seed, expanded to depth 2."""
    t = TowerHandle(empty_structure(tag))
    t.expand(2)
    return t


@st.composite
def partial_maps(draw, t: TowerHandle, kind: MorphismKind) -> PartialMap:
    points = t.points(2)
    size = draw(st.integers(min_value=0, max_value=min(3, len(points))))
    domain = draw(st.permutations(points))[:size]
    if kind is MorphismKind.HOMOMORPHISM:
        images = draw(st.lists(st.sampled_from(points), min_size=size, max_size=size))
    else:
        images = draw(st.permutations(points))[:size]
    m = PartialMap(tuple(domain), tuple(images), kind)
    assume(check_partial_map(t, t, m))
    return m


class TestHomogeneity:
    @pytest.mark.parametrize("tag", [ClassTag.graph(), ClassTag.kn_free(3), ClassTag.linear_order()], ids=str)
    @settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow])
    @given(data=st.data())
    def test_partial_isomorphisms_extend(self, tag, data):
        t = _tower(tag)
        m = data.draw(partial_maps(t, MorphismKind.EMBEDDING))
        e = extend_partial_morphism(t, m, 2)
        assert e.check()
        for a, b in m.pairs():
            assert e.apply(a) == t.canonical(b)
        assert set(t.points(2)) <= set(e.table)

    @settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow])
    @given(data=st.data())
    def test_partial_homomorphisms_extend(self, data):
        t = _tower(ClassTag.graph())
        m = data.draw(partial_maps(t, MorphismKind.HOMOMORPHISM))
        e = extend_partial_morphism(t, m, 2)
        assert e.check()
        for a, b in m.pairs():
            assert e.apply(a) == t.canonical(b)


END_SEEDS = {
    "graph": graph(["a", "b", "c"], [("a", "b"), ("b", "c")]),
    "K3-free": graph([0, 1, 2], [(0, 1)], n=3),
    "digraph": digraph([0, 1, 2]),
    "linear-order": linear_order([0, 1, 2]),
    "poset": poset(["a", "b", "c"], [("a", "c"), ("b", "c")]),
    "tournament": tournament([0, 1, 2], [(0, 1), (1, 2), (2, 0)]),
    "boolean": boolean_algebra([0, 1, 2]),
    "metric": uniform_space(3, 2),
}


class TestEndomorphismMonoid:
    @pytest.mark.parametrize("name", sorted(END_SEEDS))
    @settings(max_examples=25, deadline=None)
    @given(data=st.data())
    def test_random_pairs(self, name, data):
        c = END_SEEDS[name]
        ends = endomorphisms(c)
        f = data.draw(st.sampled_from(ends))
        g = data.draw(st.sampled_from(ends))
        t = TowerHandle(c)
        ef, eg, egf, ident = embed_endomorphisms(c, [f, g, compose(g, f), identity(c)], 1, tower=t)
        assert compose_truncations(eg, ef).same_table(egf)
        assert all(k == v for k, v in ident.table.items())
        assert compose_truncations(ident, ef).same_table(ef)
        # distinct maps stay distinct
        assert ef.same_table(eg) == (f.images == g.images)


class TestContinuity:
    @pytest.fixture
    def collapse(self, path3):
        return make_morphism(path3, path3, {"a": "a", "b": "b", "c": "a"})

    def test_eventually_agreeing_sequence(self, path3, collapse):
        ident = identity(path3)
        r = continuity_probe(ident, [collapse, ident, ident], ["a", "c"])
        assert r.hypothesis_met
        assert r.holds
        assert r.stable_from == 1
        assert r.k_stable_from == 1

    def test_constant_sequence(self, path3):
        ident = identity(path3)
        r = continuity_probe(ident, [ident, ident], ["a"])
        assert (r.holds, r.stable_from, r.k_stable_from) == (True, 0, 0)

    def test_hypothesis_not_met(self, path3, collapse):
        r = continuity_probe(identity(path3), [collapse, collapse], ["c"])
        assert r.holds
        assert not r.hypothesis_met
        assert r.stable_from is None

    def test_alternating_sequence_has_no_tail(self, path3, collapse):
        ident = identity(path3)
        r = continuity_probe(ident, [collapse, ident] * 3, ["a", "c"])
        assert not r.hypothesis_met
        assert r.stable_from is None
        assert r.k_stable_from is None

    def test_min_tail(self, path3, collapse):
        ident = identity(path3)
        window = [collapse, ident] * 3
        assert continuity_probe(ident, window, ["a", "c"], min_tail=1).stable_from == 5
        r = continuity_probe(ident, [collapse, ident, ident, ident], ["a", "c"], min_tail=3)
        assert r.stable_from == 1
        assert continuity_probe(ident, [collapse, ident, ident], ["a", "c"], min_tail=3).stable_from is None
        with pytest.raises(ContractError):
            continuity_probe(ident, window, ["a"], min_tail=0)

    def test_disagreement_outside_s(self):
        pair = graph(["a", "b"])
        ident = identity(pair)
        fold = make_morphism(pair, pair, {"a": "a", "b": "a"})
        r = continuity_probe(ident, [fold, ident] * 3, ["a"])
        assert (r.holds, r.stable_from, r.k_stable_from) == (True, 0, 0)

    @pytest.mark.parametrize("pattern", STABILIZING)
    def test_stabilizing_sequences(self, pattern, path3, collapse):
        ident = identity(path3)
        seq = [ident if ch == "i" else collapse for ch in pattern]
        r = continuity_probe(ident, seq, ["a", "c"])
        expected = pattern.rfind("c") + 1
        assert r.hypothesis_met
        assert r.holds
        assert r.stable_from == expected
        assert r.k_stable_from == expected

    @pytest.mark.parametrize("pattern", NON_STABILIZING)
    def test_non_stabilizing_sequences(self, pattern, path3, collapse):
        ident = identity(path3)
        seq = [ident if ch == "i" else collapse for ch in pattern]
        r = continuity_probe(ident, seq, ["a", "c"])
        assert not r.hypothesis_met
        # the K side stabilizes exactly when the restriction to S does
        assert r.stable_from is None
        assert r.k_stable_from is None


class TestRetraction:
    def test_graph(self, graph_tower):
        r = retraction(graph_tower, 1)
        link = graph_tower.link(1)
        assert check_morphism(r)
        assert compose(r, link).images == link.images
        assert r.images == (0, 0, 2)

    def test_boolean(self, b1):
        t = TowerHandle(b1)
        r = retraction(t, 0)
        assert compose(r, t.link(0)).images == t.link(0).images

    def test_triangle_free_has_none(self):
        with pytest.raises(ContractError):
            retraction(TowerHandle(graph([], n=3)), 0)

    @pytest.mark.parametrize("level", [0, 1])
    def test_idempotent_and_fixes_old_points(self, graph_tower, level):
        r = retraction(graph_tower, level)
        assert r.source == r.target == graph_tower.level(level + 1)
        assert compose(r, r).images == r.images
        step = graph_tower.step(level)
        for x in step.structure.elements:
            if step.is_old(x):
                assert r.apply(x) == x

    def test_path_retraction_is_idempotent(self, path3):
        t = TowerHandle(path3)
        r = retraction(t, 0)
        assert check_morphism(r)
        assert compose(r, r).images == r.images
        assert compose(r, t.link(0)).images == t.link(0).images

    def test_new_point_may_stay(self, graph_tower):
        r = retraction(graph_tower, 1)
        # New({0}) in level 2 is adjacent only to 0 and is its own least witness
        assert r.apply(2) == 2

    def test_boolean_idempotent(self, b1):
        t = TowerHandle(b1)
        r = retraction(t, 0)
        assert compose(r, r).images == r.images
