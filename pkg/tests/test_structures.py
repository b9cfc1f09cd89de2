from __future__ import annotations

from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from katetov.engines.structures import (
    ClassKind,
    ClassTag,
    FiniteStructure,
    Morphism,
    MorphismKind,
    automorphisms,
    boolean_algebra,
    burnside_orbit_count,
    check_morphism,
    compose,
    digraph,
    empty_structure,
    enumerate_morphisms,
    enumerate_one_point_extensions,
    extend_by_type,
    extension_type_orbits,
    fresh_element,
    generated_subalgebra,
    graph,
    identity,
    inverse,
    iso_test,
    linear_order,
    make_morphism,
    max_clique_size,
    metric_space,
    pair_type,
    poset,
    preset,
    split_extension,
    substructure,
    to_networkx,
    tournament,
    validate,
    validate_extension,
)
from katetov.errors import CapacityError, ContractError, StructuralError

from .strategies import CLASS_TAGS, maps_into, small_graphs, valid


class TestClassTag:
    def test_parse_and_str(self):
        assert str(ClassTag.parse("kn-free", 3)) == "kn-free(3)"
        assert str(ClassTag.parse("metric", 2)) == "metric(q=2)"
        assert ClassTag.parse("poset").kind is ClassKind.POSET

    def test_unknown_class(self):
        with pytest.raises(ContractError, match="unknown class"):
            ClassTag.parse("hypergraph")

    def test_parameters_are_checked(self):
        with pytest.raises(ContractError):
            ClassTag.kn_free(2)
        with pytest.raises(ContractError):
            ClassTag.metric(0)
        with pytest.raises(ContractError):
            ClassTag(ClassKind.GRAPH, 3)

    def test_params(self):
        assert ClassTag.kn_free(4).params() == {"n": 4}
        assert ClassTag.metric(3).params() == {"q": 3}
        assert ClassTag.tournament().params() == {}

    def test_homomorphism_categories(self):
        assert ClassTag.graph().allows_homomorphisms
        assert not ClassTag.kn_free(3).allows_homomorphisms
        assert not ClassTag.tournament().allows_homomorphisms


class TestValidate:
    @pytest.mark.parametrize("tag", CLASS_TAGS, ids=str)
    @pytest.mark.parametrize("name", ["empty", "k1", "edge"])
    def test_presets_are_valid(self, tag, name):
        assert validate(preset(tag, name))

    def test_boolean_empty_preset_is_two_element_algebra(self):
        s = preset(ClassTag.boolean_algebra(), "empty")
        assert s.elements == ("a",)

    def test_loop(self):
        report = validate(graph(["a"], [("a", "a")]))
        assert not report
        assert "irreflexive violated" in report.first_error

    def test_triangle_in_k3_free(self):
        report = validate(graph([0, 1, 2], [(0, 1), (1, 2), (0, 2)], n=3))
        assert "K3-freeness violated" in report.first_error

    def test_triangle_allowed_in_k4_free(self):
        assert validate(graph([0, 1, 2], [(0, 1), (1, 2), (0, 2)], n=4))

    def test_digraph_two_cycle(self):
        report = validate(digraph([0, 1], [(0, 1), (1, 0)]))
        assert "antisymmetry violated" in report.first_error

    def test_tournament_needs_every_arc(self):
        report = validate(tournament([0, 1]))
        assert "tournament violated" in report.first_error

    def test_poset_transitivity(self):
        report = validate(poset(["a", "b", "c"], [("a", "b"), ("b", "c")]))
        assert "transitivity violated" in report.first_error

    def test_linear_order_totality(self):
        s = FiniteStructure(ClassTag.linear_order(), ("a", "b"), frozenset({("a", "a"), ("b", "b")}))
        assert "totality violated" in validate(s).first_error

    def test_metric_triangle(self):
        s = metric_space([0, 1, 2], [[0, "1/2", 1], ["1/2", 0, "1/4"], [1, "1/4", 0]], 4)
        assert "triangle inequality violated" in validate(s).first_error

    def test_metric_grid(self):
        s = metric_space([0, 1], [[0, "1/3"], ["1/3", 0]], 2)
        assert "grid" in validate(s).first_error

    def test_metric_distance_above_one(self):
        s = metric_space([0, 1], [[0, 2], [2, 0]], 2)
        assert "outside [0, 1]" in validate(s).first_error

    def test_boolean_needs_an_atom(self):
        assert not validate(boolean_algebra([]))
        with pytest.raises(ContractError):
            empty_structure(ClassTag.boolean_algebra())

    def test_duplicate_elements(self):
        with pytest.raises(StructuralError):
            graph(["a", "a"])


class TestPairTypes:
    def test_graph(self, edge):
        assert pair_type(edge, "a", "b") is True

    def test_order(self, chain2):
        assert pair_type(chain2, "a", "b") == (True, False)
        assert pair_type(chain2, "b", "a") == (False, True)

    def test_metric(self):
        s = metric_space([0, 1], [[0, "1/2"], ["1/2", 0]], 2)
        assert pair_type(s, 0, 1) == Fraction(1, 2)

    def test_boolean_has_none(self, b1):
        with pytest.raises(ContractError):
            pair_type(b1, "a", "a")


class TestMorphisms:
    def test_edge_collapse_is_not_a_homomorphism(self, edge, k1):
        f = Morphism(edge, k1, ("a", "a"))
        assert "collapsed" in check_morphism(f).first_error

    def test_enumerate(self, edge, k1):
        assert len(list(enumerate_morphisms(edge, edge))) == 2
        assert len(list(enumerate_morphisms(k1, edge, MorphismKind.EMBEDDING))) == 2
        assert list(enumerate_morphisms(edge, k1)) == []

    def test_non_induced_map_is_hom_but_not_embedding(self, path3):
        empty3 = graph(["a", "b", "c"])
        f = identity(empty3)
        g = Morphism(empty3, path3, ("a", "b", "c"), MorphismKind.EMBEDDING)
        assert check_morphism(Morphism(empty3, path3, ("a", "b", "c")))
        assert not check_morphism(g)
        assert check_morphism(f)

    def test_compose_takes_weakest_kind(self, edge):
        swap = make_morphism(edge, edge, {"a": "b", "b": "a"}, MorphismKind.ISOMORPHISM)
        hom = Morphism(edge, edge, ("a", "b"), MorphismKind.HOMOMORPHISM)
        h = compose(swap, hom)
        assert h.kind is MorphismKind.HOMOMORPHISM
        assert compose(swap, swap).images == identity(edge).images

    def test_inverse(self, edge, path3):
        swap = make_morphism(edge, edge, {"a": "b", "b": "a"}, MorphismKind.ISOMORPHISM)
        assert inverse(swap).images == ("b", "a")
        incl = Morphism(edge, path3, ("a", "b"), MorphismKind.EMBEDDING)
        with pytest.raises(ContractError):
            inverse(incl)

    def test_make_morphism_checks(self, edge, k1):
        with pytest.raises(StructuralError, match="not total"):
            make_morphism(edge, edge, {"a": "a"})
        with pytest.raises(ContractError):
            make_morphism(edge, k1, {"a": "a", "b": "a"})

    def test_image_outside_target(self, edge):
        with pytest.raises(StructuralError):
            check_morphism(Morphism(edge, edge, ("a", "z")))

    def test_metric_nonexpansive(self):
        x = metric_space([0, 1], [[0, "1/2"], ["1/2", 0]], 2)
        y = metric_space([0, 1], [[0, 1], [1, 0]], 2)
        assert check_morphism(Morphism(y, x, (0, 1)))
        assert "nonexpansive" in check_morphism(Morphism(x, y, (0, 1))).first_error

    def test_boolean_homomorphisms(self):
        b1, b2 = boolean_algebra(["a"]), boolean_algebra(["a", "b"])
        assert [f.images for f in enumerate_morphisms(b1, b2)] == [(0b11,)]
        assert len(list(enumerate_morphisms(b2, b1))) == 2
        assert list(enumerate_morphisms(b2, b1, MorphismKind.EMBEDDING)) == []

    def test_boolean_meets(self):
        b2 = boolean_algebra(["a", "b"])
        f = Morphism(b2, b2, (0b11, 0b01))
        assert "meets" in check_morphism(f).first_error

    def test_apply_on_boolean_carrier(self):
        b2 = boolean_algebra(["a", "b"])
        swap = Morphism(b2, b2, (0b10, 0b01), MorphismKind.ISOMORPHISM)
        assert swap.apply(0b01) == 0b10
        assert swap.apply(0b11) == 0b11

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_composition_of_homomorphisms(self, data):
        s = data.draw(small_graphs(max_size=3).filter(lambda g: g.size > 0))
        f = data.draw(maps_into(s, s).filter(valid))
        g = data.draw(maps_into(s, s).filter(valid))
        assert check_morphism(compose(g, f))
        assert compose(g, identity(s)).images == g.images
        assert compose(identity(s), f).images == f.images


class TestSubstructures:
    def test_induced(self, path3):
        sub, incl = substructure(path3, ["a", "c"])
        assert sub.relation == frozenset()
        assert check_morphism(incl)

    def test_generated_subalgebra(self):
        b3 = boolean_algebra(["a", "b", "c"])
        sub, incl = generated_subalgebra(b3, [0b001])
        assert sub.size == 2
        assert incl.images == (0b001, 0b110)
        assert check_morphism(incl)

    def test_generated_by_nothing_is_two_element(self):
        sub, _ = generated_subalgebra(boolean_algebra(["a", "b"]), [])
        assert sub.size == 1


class TestIsomorphism:
    def test_iso_test(self, edge, path3):
        other = graph(["x", "y"], [("x", "y")])
        assert iso_test(edge, other) is not None
        triangle = graph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
        assert iso_test(path3, triangle) is None

    def test_automorphisms(self, edge, path3):
        triangle = graph([0, 1, 2], [(0, 1), (1, 2), (0, 2)])
        assert len(automorphisms(edge)) == 2
        assert len(automorphisms(path3)) == 2
        assert len(automorphisms(triangle)) == 6
        assert len(automorphisms(boolean_algebra(["a", "b"]))) == 2

    def test_cap(self):
        with pytest.raises(CapacityError):
            iso_test(graph(range(4)), graph(range(4)), cap=3)

    @given(small_graphs(max_size=4), small_graphs(max_size=4))
    @settings(max_examples=60, deadline=None)
    def test_agrees_with_networkx(self, a, b):
        expected = nx.is_isomorphic(to_networkx(a), to_networkx(b))
        assert (iso_test(a, b) is not None) == expected


class TestExtensions:
    @pytest.mark.parametrize(
        "s, expected",
        [
            (graph(["a"]), 2),
            (graph(["a", "b"], [("a", "b")]), 4),
            (graph(["a", "b"], [("a", "b")], n=3), 3),
            (poset(["a"]), 3),
            (linear_order(["a"]), 2),
            (linear_order(["a", "b"]), 3),
            (tournament(["a"]), 2),
            (digraph(["a"]), 3),
            (boolean_algebra(["a"]), 1),
            (boolean_algebra(["a", "b"]), 3),
            (metric_space(["a"], [[0]], 2), 2),
            (graph([]), 1),
        ],
        ids=lambda v: v.describe() if isinstance(v, FiniteStructure) else str(v),
    )
    def test_counts_over_base(self, s, expected):
        extensions = enumerate_one_point_extensions(s)
        assert len(extensions) == expected
        for e in extensions:
            assert validate_extension(e)

    def test_orbits(self, edge):
        assert extension_type_orbits(edge) == 3
        assert burnside_orbit_count(edge) == 3
        assert extension_type_orbits(graph([])) == 1

    def test_orbits_agree_on_path(self, path3):
        assert extension_type_orbits(path3) == burnside_orbit_count(path3)

    def test_extend_by_type(self, k1):
        e = extend_by_type(k1, [True])
        assert e.extension.related("a", e.new_element)
        assert e.type_over_base() == (True,)

    def test_split_extension(self, b1):
        e = split_extension(b1, ["a"])
        assert e.extension.size == 2
        assert e.split_atoms() == ("a",)
        assert validate_extension(e)

    def test_rejects_extension_inside_image(self, k1):
        e = extend_by_type(k1, [False])
        bogus = type(e)(e.base, e.extension, e.inclusion, "a")
        assert not validate_extension(bogus)

    def test_cap(self):
        with pytest.raises(CapacityError):
            enumerate_one_point_extensions(graph(range(3)), cap=2)


class TestHelpers:
    def test_fresh_element(self, edge):
        assert fresh_element(graph([0, 1])) == 2
        assert fresh_element(edge) == "x"
        assert fresh_element(edge, avoid=["x"]) == "x1"

    def test_networkx_views(self, path3, chain2):
        assert to_networkx(path3).number_of_edges() == 2
        assert to_networkx(chain2).number_of_edges() == 1
        with pytest.raises(ContractError):
            to_networkx(metric_space([0], [[0]], 2))

    def test_max_clique(self, path3):
        assert max_clique_size(path3) == 2
        assert max_clique_size(graph([])) == 0
