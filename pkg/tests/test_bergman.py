from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from katetov.engines import bergman, limits
from katetov.engines.bergman import (
    ChainPoint,
    GeneratorWord,
    LiftedGenerators,
    bracket,
    bracket_power,
    build_chain,
    check_retractions,
    encode_word,
    evaluate_word,
    graph_retraction,
    jep,
    jep_map,
    sigma,
    tau,
    verify_distortion,
)
from katetov.engines.classes import k_morphism
from katetov.engines.kobject import New
from katetov.engines.limits import retraction
from katetov.engines.metric import uniform_space
from katetov.engines.structures import (
    Morphism,
    MorphismKind,
    boolean_algebra,
    check_morphism,
    compose,
    digraph,
    enumerate_morphisms,
    graph,
    identity,
    linear_order,
    make_morphism,
    metric_space,
    poset,
    tournament,
    validate,
)
from katetov.engines.tower import TowerHandle
from katetov.errors import CapacityError, ContractError

from .strategies import maps_into, small_graphs, valid


@pytest.fixture
def b2():
    return boolean_algebra(["a", "b"])


@pytest.fixture
def path_endos(path3):
    collapse = make_morphism(path3, path3, {"a": "a", "b": "b", "c": "a"})
    reflect = make_morphism(path3, path3, {"a": "c", "b": "b", "c": "a"})
    return [collapse, reflect, identity(path3)]


@pytest.fixture
def boolean_endos(b2):
    homs = list(enumerate_morphisms(b2, b2))
    return (homs * 3)[:3]


class TestJep:
    def test_graph_coproduct(self, edge, k1):
        r = jep(edge, k1)
        assert r.structure.elements == ((0, "a"), (0, "b"), (1, "a"))
        assert r.structure.relation == {frozenset({(0, "a"), (0, "b")})}
        assert r.left.images == ((0, "a"), (0, "b"))
        assert r.right.images == ((1, "a"),)
        assert r.left_retraction is None

    def test_codiagonal_retracts_both_sides(self, edge):
        r = jep(edge, edge)
        assert check_morphism(r.left_retraction)
        assert compose(r.left_retraction, r.left).images == identity(edge).images
        assert compose(r.right_retraction, r.right).images == identity(edge).images

    def test_metric_cross_distance(self):
        x = metric_space(["p"], [[0]], 2)
        r = jep(x, x)
        assert r.structure.dist((0, "p"), (1, "p")) == 1
        assert validate(r.structure)

    def test_boolean_free_product(self, b1, b2):
        r = jep(b1, b2)
        assert r.structure.elements == (("a", "a"), ("a", "b"))
        assert r.left.images == (0b11,)
        assert r.right.images == (0b01, 0b10)

    def test_boolean_fold(self, b2):
        r = jep(b2, b2)
        assert r.left_retraction.images == (0b01, 0, 0, 0b10)
        assert compose(r.left_retraction, r.left).images == identity(b2).images
        assert check_morphism(r.left_retraction)

    @pytest.mark.parametrize("s", [linear_order(["a"]), tournament(["a"]), graph(["a"], n=3)], ids=str)
    def test_unsupported_classes(self, s):
        with pytest.raises(ContractError):
            jep(s, s)

    def test_classes_must_match(self, k1):
        with pytest.raises(ContractError):
            jep(k1, digraph(["a"]))

    def test_functorial_on_maps(self):
        pair = graph(["a", "b"])
        swap = make_morphism(pair, pair, {"a": "b", "b": "a"})
        k1 = graph(["z"])
        r = jep(pair, k1)
        m = jep_map(swap, identity(k1), r, r)
        assert m.images == ((0, "b"), (0, "a"), (1, "z"))
        assert check_morphism(m)

    def test_map_needs_matching_factors(self, edge, k1):
        with pytest.raises(ContractError):
            jep_map(identity(edge), identity(edge), jep(edge, k1), jep(edge, k1))


class TestChain:
    def test_graph_sizes(self, path3):
        assert build_chain(path3, 3).sizes() == [3, 6, 9]

    def test_boolean_sizes(self, b2):
        assert build_chain(b2, 3).sizes() == [2, 4, 8]

    def test_budget(self, path3):
        with pytest.raises(CapacityError):
            build_chain(path3, 5, max_elements=10)

    def test_levels_start_at_one(self, path3):
        with pytest.raises(ContractError):
            build_chain(path3, 2).level(0)

    @pytest.mark.parametrize("name", ["path3", "b2", "uniform"])
    def test_retractions(self, name, path3, b2):
        base = {"path3": path3, "b2": b2, "uniform": uniform_space(2, 2)}[name]
        chain = build_chain(base, 3)
        assert check_retractions(chain, 3)

    def test_sigma_then_tau(self, path3):
        chain = build_chain(path3, 2)
        p = sigma(chain, ChainPoint(1, "a"))
        assert p == ChainPoint(2, (1, "a"))
        assert tau(chain, p) == ChainPoint(1, "a")

    def test_tau_on_the_first_level(self, path3):
        chain = build_chain(path3, 2)
        assert tau(chain, ChainPoint(1, "b")) == ChainPoint(1, "b")

    def test_bracket_of_identities(self, path3):
        chain = build_chain(path3, 3)
        ident = identity(path3)
        assert bracket(chain, [ident, ident, ident]).images == identity(chain.level(3)).images

    def test_empty_bracket(self, path3):
        with pytest.raises(ContractError):
            bracket(build_chain(path3, 1), [])

    def test_bracket_power_shifts_levels(self, path3):
        chain = build_chain(path3, 3)
        h = bracket_power(chain, chain.pair.right, 2)
        assert h.source == chain.level(2)
        assert h.target == chain.level(3)
        assert check_morphism(h)


class TestDistortion:
    def test_identities(self, path3):
        chain = build_chain(path3, 3)
        report = verify_distortion(chain, [identity(path3)] * 3, 2)
        assert report.passed
        assert report.checked == 9

    def test_graph_endomorphisms(self, path3, path_endos):
        report = verify_distortion(build_chain(path3, 3), path_endos, 2)
        assert report.passed, report.mismatches

    def test_boolean_endomorphisms(self, b2, boolean_endos):
        report = verify_distortion(build_chain(b2, 3), boolean_endos, 2)
        assert report.passed, report.mismatches

    def test_metric_endomorphisms(self):
        x = uniform_space(2, 2)
        swap = make_morphism(x, x, {0: 1, 1: 0})
        report = verify_distortion(build_chain(x, 3), [swap, identity(x), swap], 2)
        assert report.passed, report.mismatches

    @settings(max_examples=20, deadline=None)
    @given(st.data())
    def test_any_graph_endomorphisms(self, data):
        a = data.draw(small_graphs(max_size=2).filter(lambda g: g.size > 0))
        fseq = [data.draw(maps_into(a, a).filter(valid)) for _ in range(3)]
        assert verify_distortion(build_chain(a, 3), fseq, 2).passed

    def test_too_few_maps(self, path3):
        with pytest.raises(ContractError):
            verify_distortion(build_chain(path3, 3), [identity(path3)], 2)

    def test_maps_must_be_endomorphisms(self, path3, edge):
        f = make_morphism(path3, edge, {"a": "a", "b": "b", "c": "a"})
        with pytest.raises(ContractError):
            verify_distortion(build_chain(path3, 2), [f, f], 1)


class TestWords:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_length(self, n):
        assert len(encode_word(n)) == 2 * n + 1

    def test_reading_order(self):
        assert str(encode_word(2)) == "β τ φ σ α"

    def test_bad_index(self):
        with pytest.raises(ContractError):
            encode_word(0)

    def test_unknown_letter(self):
        with pytest.raises(ContractError):
            GeneratorWord(("α", "x"))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_graph_words(self, n, path3, path_endos):
        chain = build_chain(path3, 3)
        ev = evaluate_word(encode_word(n), chain, path_endos)
        assert ev.matches(path_endos[n - 1])
        assert ev.depth == n
        assert ev.k_depth == 1
        assert ev.beta_check

    def test_chain_only(self, path3, path_endos):
        ev = evaluate_word(encode_word(2), build_chain(path3, 2), path_endos, k_depth=0)
        assert ev.matches(path_endos[1])
        assert ev.k_depth == 0

    def test_letters_go_through_k(self, monkeypatch, path3, path_endos):
        calls = []

        def counting(f, **kwargs):
            calls.append(f)
            return k_morphism(f, **kwargs)

        monkeypatch.setattr(bergman, "k_morphism", counting)
        monkeypatch.setattr(limits, "k_morphism", counting)
        ev = evaluate_word(encode_word(2), build_chain(path3, 2), path_endos)
        assert ev.matches(path_endos[1])
        # σ, φ and τ through K^ω, β through r ∘ K(β)
        assert len(calls) >= 4
        assert any(f.source.size == 6 and f.target.size == 6 for f in calls)

    def test_beta_retracts_new_points(self, path3, path_endos):
        t = TowerHandle(path3)
        chain = build_chain(path3, 2)
        lifted = LiftedGenerators(chain, path_endos, t, 0, 1)
        b = lifted.beta(2)
        assert check_morphism(b)
        # a vertex joined to a and c in different copies folds to a common neighbour
        x = lifted.tower_over(2).step(0).element_for(New(frozenset({(0, "a"), (1, "c")})))
        assert b.apply(x) == t.link(0).apply("b")
        assert lifted.beta_check

    def test_bad_retraction_is_caught(self, path3, path_endos):
        t = TowerHandle(path3)
        lvl = t.level(1)
        constant = Morphism(lvl, lvl, (lvl.elements[0],) * lvl.size, MorphismKind.HOMOMORPHISM)
        ev = evaluate_word(encode_word(2), build_chain(path3, 2), path_endos, tower=t, retractions=[constant])
        assert not ev.beta_check
        assert not ev.matches(path_endos[1])
        good = evaluate_word(encode_word(2), build_chain(path3, 2), path_endos, tower=t, retractions=[retraction(t, 0)])
        assert good.matches(path_endos[1])

    def test_retraction_must_fit_the_tower(self, path3, path_endos):
        with pytest.raises(ContractError, match="retraction"):
            evaluate_word(encode_word(1), build_chain(path3, 1), path_endos, retractions=[identity(path3)])

    def test_tower_level_must_be_the_base(self, path3, edge, path_endos):
        with pytest.raises(ContractError, match="level 0"):
            evaluate_word(encode_word(1), build_chain(path3, 1), path_endos, tower=TowerHandle(edge))

    def test_deeper_tower_level(self, graph_tower):
        base = graph_tower.level(2)
        fseq = [identity(base), make_morphism(base, base, {0: 0, 1: 0, 2: 2})]
        ev = evaluate_word(encode_word(2), build_chain(base, 2), fseq, tower=graph_tower, level=2)
        assert ev.matches(fseq[1])
        assert ev.beta_check

    @pytest.mark.parametrize("n", [1, 2, pytest.param(3, marks=pytest.mark.slow)])
    def test_graph_words_two_levels_up(self, n, k1):
        fseq = [identity(k1)] * 3
        ev = evaluate_word(encode_word(n), build_chain(k1, 3), fseq, k_depth=2)
        assert ev.k_depth == 2
        assert ev.matches(fseq[n - 1])
        assert ev.beta_check

    @pytest.mark.parametrize("k_depth", [1, 2])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_boolean_words(self, n, k_depth, b2, boolean_endos):
        ev = evaluate_word(encode_word(n), build_chain(b2, 3), boolean_endos, k_depth=k_depth)
        assert ev.matches(boolean_endos[n - 1])
        assert ev.beta_check

    @pytest.mark.parametrize("n", [1, 2])
    def test_poset_words(self, n, chain2):
        p = poset(chain2.elements, [("a", "b")])
        collapse = make_morphism(p, p, {"a": "a", "b": "a"})
        fseq = [collapse, identity(p)]
        ev = evaluate_word(encode_word(n), build_chain(p, 2), fseq)
        assert ev.matches(fseq[n - 1])
        assert ev.beta_check

    def test_collapsing_digraph_letters_have_no_k(self):
        d = digraph(["a", "b"], [("a", "b")])
        fseq = [identity(d)] * 2
        with pytest.raises(ContractError):
            evaluate_word(encode_word(2), build_chain(d, 2), fseq)
        assert evaluate_word(encode_word(2), build_chain(d, 2), fseq, k_depth=0).matches(fseq[1])

    def test_metric_words(self):
        x = uniform_space(2, 2)
        with pytest.raises(ContractError, match="metric"):
            evaluate_word(encode_word(1), build_chain(x, 1), [identity(x)])
        assert evaluate_word(encode_word(1), build_chain(x, 1), [identity(x)], k_depth=0).matches(identity(x))

    @pytest.mark.parametrize("letters", [("β",), ("φ",), ("β", "β", "α"), ("φ", "α")])
    def test_ill_formed_words(self, letters, path3):
        with pytest.raises(ContractError):
            evaluate_word(GeneratorWord(letters), build_chain(path3, 1), [identity(path3)])

    def test_graph_retraction_needs_graphs(self):
        with pytest.raises(ContractError):
            graph_retraction(TowerHandle(digraph(["a"])), 0)
