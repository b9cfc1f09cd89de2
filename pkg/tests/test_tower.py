from __future__ import annotations

import pytest

from katetov.engines.classes import k_object
from katetov.engines.structures import (
    ClassTag,
    Morphism,
    MorphismKind,
    boolean_algebra,
    check_morphism,
    compose,
    empty_structure,
    graph,
    identity,
    make_morphism,
    preset,
    validate,
)
from katetov.engines.tower import (
    TowerAddress,
    TowerHandle,
    absorb_extension,
    address_resolve,
    find_witness,
    iterate,
    reachability_chain,
    verify_extension_property,
)
from katetov.errors import CapacityError, ContractError, StructuralError


class TestIterate:
    def test_graph_from_empty(self):
        assert iterate(graph([]), 2).sizes() == [0, 1, 3]

    def test_graph_level_three(self):
        assert iterate(graph([]), 3).sizes()[3] == 11

    def test_graph_from_edge(self, edge):
        assert iterate(edge, 2).sizes() == [2, 6, 70]

    def test_boolean_doubling(self, b1):
        assert iterate(b1, 3).sizes() == [1, 2, 4, 8]

    def test_depth_zero(self, path3):
        t = iterate(path3, 0)
        assert t.levels == (path3,)
        assert t.frozen_depth == 0

    def test_links_are_embeddings(self, k1):
        t = iterate(k1, 2)
        for n, link in enumerate(t.links):
            assert link.source == t.level(n)
            assert check_morphism(link)

    def test_budget_stops_expansion(self):
        t = TowerHandle(graph([]), max_elements=100)
        t.expand(3)
        with pytest.raises(CapacityError) as info:
            t.expand(4)
        assert info.value.limit == 100
        # existing levels survive
        assert t.sizes() == [0, 1, 3, 11]

    @pytest.mark.slow
    def test_graph_level_four(self):
        t = TowerHandle(graph([]), max_elements=3000)
        t.expand(4)
        assert t.sizes() == [0, 1, 3, 11, 2059]
        with pytest.raises(CapacityError):
            t.expand(5)

    def test_expansion_is_monotone(self, k1):
        t = TowerHandle(k1)
        t.expand(1)
        first = t.level(1)
        t.expand(2)
        assert t.level(1) is first

    def test_deterministic(self, edge):
        assert iterate(edge, 2).levels == iterate(edge, 2).levels

    def test_invalid_seed(self):
        with pytest.raises(ContractError):
            TowerHandle(graph(["a"], [("a", "a")]))

    def test_negative_depth(self, k1):
        with pytest.raises(StructuralError):
            TowerHandle(k1).expand(-1)


class TestAddresses:
    def test_identity_resolution(self, k1):
        t = iterate(k1, 1)
        assert address_resolve(t, TowerAddress(0, "a"), 0) == "a"

    def test_eta_action(self, k1, graph_tower):
        assert address_resolve(iterate(k1, 1), TowerAddress(0, "a"), 1) == 0
        assert address_resolve(graph_tower, TowerAddress(1, 0), 2) == 0

    def test_cannot_go_down(self, graph_tower):
        with pytest.raises(StructuralError):
            graph_tower.resolve(TowerAddress(2, 0), 1)

    def test_unknown_address(self, graph_tower):
        with pytest.raises(StructuralError, match="unknown address"):
            graph_tower.resolve(TowerAddress(1, 7), 2)

    def test_canonical(self, graph_tower):
        assert graph_tower.canonical(TowerAddress(2, 0)) == TowerAddress(1, 0)
        assert graph_tower.canonical(TowerAddress(2, 2)) == TowerAddress(2, 2)

    def test_canonical_is_idempotent(self, graph_tower):
        for n in range(3):
            for x in graph_tower.level(n).elements:
                c = graph_tower.canonical(TowerAddress(n, x))
                assert graph_tower.canonical(c) == c

    def test_points(self, graph_tower):
        assert graph_tower.fresh_elements(2) == (1, 2)
        assert graph_tower.points(2) == [TowerAddress(1, 0), TowerAddress(2, 1), TowerAddress(2, 2)]

    def test_eta_power(self, k1):
        t = iterate(k1, 2)
        assert t.eta_power(0, 2).images == (0,)
        assert t.eta_power(1, 1).images == t.level(1).elements
        with pytest.raises(StructuralError):
            t.eta_power(2, 1)

    def test_boolean_canonical(self, b1):
        t = iterate(b1, 1)
        assert t.canonical(TowerAddress(1, 0b11)) == TowerAddress(0, 0b1)
        assert t.canonical(TowerAddress(1, 0b01)) == TowerAddress(1, 0b01)
        assert t.fresh_elements(1) == (0b01, 0b10)


class TestWitness:
    def test_empty_anchors(self, graph_tower):
        assert find_witness(graph_tower, [], []) == TowerAddress(1, 0)

    def test_adjacent_and_not(self, graph_tower):
        anchor = [TowerAddress(1, 0)]
        assert find_witness(graph_tower, anchor, [True]) == TowerAddress(2, 2)
        assert find_witness(graph_tower, anchor, [False]) == TowerAddress(2, 1)

    def test_anchors_must_be_distinct(self, graph_tower):
        with pytest.raises(ContractError):
            find_witness(graph_tower, [TowerAddress(1, 0), TowerAddress(2, 0)], [True, True])

    def test_impossible_type(self):
        t = iterate(graph([0, 1], [(0, 1)], n=3), 1)
        with pytest.raises(ContractError):
            find_witness(t, [TowerAddress(0, 0), TowerAddress(0, 1)], [True, True])

    def test_boolean_towers_have_no_pair_types(self, b1):
        with pytest.raises(ContractError):
            find_witness(iterate(b1, 1), [], [])


class TestAbsorb:
    def test_isomorphism_gives_eta(self, k1):
        n, h = absorb_extension(k1, k1, identity(k1))
        assert n == 1
        assert h.images == k_object(k1).eta.images

    def test_one_point(self, k1, edge):
        g = make_morphism(k1, edge, {"a": "a"}, MorphismKind.EMBEDDING)
        n, h = absorb_extension(k1, edge, g)
        assert n == 1
        assert h.images == (0, 2)
        assert compose(h, g).images == k_object(k1).eta.images

    def test_two_steps_from_empty(self):
        empty = graph([])
        p2 = graph(["x", "y"], [("x", "y")])
        g = Morphism(empty, p2, (), MorphismKind.EMBEDDING)
        n, h = absorb_extension(empty, p2, g)
        assert n == 2
        assert check_morphism(h)
        assert h.target == iterate(empty, 2).level(2)

    def test_boolean(self, b1):
        b2 = boolean_algebra(["a", "b"])
        g = Morphism(b1, b2, (0b11,), MorphismKind.EMBEDDING)
        n, h = absorb_extension(b1, b2, g)
        assert n == 1
        assert check_morphism(h)
        assert compose(h, g).images == k_object(b1).eta.images

    def test_rejects_non_embedding(self, edge):
        empty2 = graph(["a", "b"])
        g = Morphism(empty2, edge, ("a", "b"))
        with pytest.raises(ContractError):
            absorb_extension(empty2, edge, g)

    def test_reachability_chain(self, k1, path3):
        g = make_morphism(k1, path3, {"a": "b"}, MorphismKind.EMBEDDING)
        chain = reachability_chain(g)
        assert len(chain) == 2
        assert chain[-1].extension.elements == path3.elements
        assert all(validate(e.extension) for e in chain)


class TestExtensionProperty:
    def test_graph_tower(self, graph_tower):
        report = verify_extension_property(graph_tower, 1, 1)
        assert report.passed
        assert len(report.certificates) == 3
        assert {c.witness_level for c in report.certificates} == {2}
        by_size = sorted(len(c.base) for c in report.certificates)
        assert by_size == [0, 1, 1]

    def test_empty_base_is_certified_by_isolated_vertex(self, graph_tower):
        report = verify_extension_property(graph_tower, 0, 0)
        (cert,) = report.certificates
        assert cert.base == ()
        assert cert.witness.images == (0,)

    def test_triangle_free(self):
        t = TowerHandle(graph([], n=3))
        report = verify_extension_property(t, 2, 2)
        assert report.passed
        assert len(report.certificates) == 18
        assert validate(t.level(3))

    def test_boolean(self, b1):
        t = TowerHandle(b1)
        report = verify_extension_property(t, 1, 2)
        assert report.passed
        assert len(report.certificates) == 4

    def test_witness_commutes(self, k1):
        t = TowerHandle(k1)
        report = verify_extension_property(t, 1, 1)
        link = t.link(1)
        for cert in report.certificates:
            e = cert.extension
            for addr, y in zip(cert.base, e.inclusion.images):
                assert cert.witness(y) == link(addr.element)

    def test_parallel_matches_serial(self, graph_tower):
        serial = verify_extension_property(graph_tower, 1, 1)
        parallel = verify_extension_property(graph_tower, 1, 1, jobs=2)
        assert [c.base for c in serial.certificates] == [c.base for c in parallel.certificates]

    def test_arguments(self, graph_tower):
        with pytest.raises(ContractError):
            verify_extension_property(graph_tower, -1, 1)

    def test_report(self, graph_tower):
        report = verify_extension_property(graph_tower, 1, 1)
        assert report.to_validation()

    @pytest.mark.parametrize(
        "tag", [ClassTag.graph(), ClassTag.kn_free(3), ClassTag.digraph(), ClassTag.poset()], ids=str
    )
    def test_empty_seed_towers(self, tag):
        t = TowerHandle(empty_structure(tag))
        report = verify_extension_property(t, 1, 2)
        assert report.passed, report.to_validation().first_error
        assert report.certificates
        assert {c.witness_level for c in report.certificates} == {2}
        for cert in report.certificates:
            assert check_morphism(cert.witness)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "tag", [ClassTag.graph(), ClassTag.kn_free(3), ClassTag.digraph(), ClassTag.poset()], ids=str
    )
    def test_one_point_seed_towers(self, tag):
        t = TowerHandle(preset(tag, "k1"))
        report = verify_extension_property(t, 1, 2)
        assert report.passed, report.to_validation().first_error
        assert all(len(c.base) <= 2 for c in report.certificates)
