"""Natural JEP functors, the chain L₁ ↪ L₂ ↪ ... and the strong-distortion words.

L_k = F(L_{k-1}, L) = [L, L, ..., L] (k copies, bracketed to the left) with
links λ. On its colimit:

    σ ∘ ι_n = ι_{n+1} ∘ [ρ_L, id, ..., id]
    τ ∘ ι_{n+1} = ι_n ∘ [ρ*_L, id, ..., id]
    φ(f̄) ∘ ι_n = ι_n ∘ [f₁, ..., f_n]
    β₁ = id,  β_{n+1} = λ*_L ∘ F(β_n, id_L)

so that β ∘ τⁿ ∘ φ(f̄) ∘ σⁿ ∘ ι₁ = f_{n+1}, which is what makes every
sequence of endomorphisms a word of length 2n + 1 in five generators.

Relational and metric F is the coproduct (cross distance 1 for metric
spaces) with elements ``(0, x)`` and ``(1, y)``; Boolean F is the free
product B(X) ⊗ B(Y) = B(X × Y) with atoms ``(x, y)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..errors import CapacityError, ContractError
from ..settings import DEFAULT_LEVEL_BUDGET
from ..validator import ValidationResult
from .classes import k_morphism
from .limits import k_omega_morphism, retraction
from .structures import (
    ClassKind,
    FiniteStructure,
    Morphism,
    MorphismKind,
    boolean_algebra,
    check_morphism,
    compose,
    identity,
    metric_space,
    weakest,
)
from .tower import TowerAddress, TowerHandle

logger = logging.getLogger(__name__)

JEP_CLASSES = (ClassKind.GRAPH, ClassKind.DIGRAPH, ClassKind.POSET, ClassKind.BOOLEAN_ALGEBRA, ClassKind.METRIC)
# K is defined on every letter (collapsing maps included) and a retraction exists
WORD_LIFT_CLASSES = (ClassKind.GRAPH, ClassKind.POSET, ClassKind.BOOLEAN_ALGEBRA)


# ---------------------------------------------------------------------------
# The functor F
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JepResult:
    """F(C, D) with λ_C, ρ_D and, when C = D, the retractions λ*, ρ*."""

    left_factor: FiniteStructure
    right_factor: FiniteStructure
    structure: FiniteStructure
    left: Morphism
    right: Morphism
    left_retraction: Optional[Morphism] = None
    right_retraction: Optional[Morphism] = None


def jep(c: FiniteStructure, d: FiniteStructure) -> JepResult:
    """F(C, D) for the classes with a retractive natural JEP functor.

    Raises:
        ContractError: unsupported class, or C and D from different classes.
    """
    if c.tag != d.tag:
        raise ContractError(f"F needs two structures of one class, got {c.tag} and {d.tag}")
    if c.tag.kind not in JEP_CLASSES:
        raise ContractError(f"{c.tag} has no retractive natural JEP functor here")
    if c.tag.is_boolean:
        return _free_product(c, d)
    return _coproduct(c, d)


def _coproduct(c: FiniteStructure, d: FiniteStructure) -> JepResult:
    tag = c.tag
    elems = tuple((0, x) for x in c.elements) + tuple((1, y) for y in d.elements)
    if tag.is_metric:
        n, m = c.size, d.size
        rows = []
        for i in range(n + m):
            row = []
            for j in range(n + m):
                if i < n and j < n:
                    row.append(c.distances[i][j])
                elif i >= n and j >= n:
                    row.append(d.distances[i - n][j - n])
                else:
                    row.append(1)
            rows.append(row)
        s = metric_space(elems, rows, tag.q)
    elif tag.is_graph_like:
        rel = {frozenset((0, x) for x in e) for e in c.relation} | {frozenset((1, y) for y in e) for e in d.relation}
        s = FiniteStructure(tag, elems, frozenset(rel))
    else:
        rel = {((0, a), (0, b)) for a, b in c.relation} | {((1, a), (1, b)) for a, b in d.relation}
        s = FiniteStructure(tag, elems, frozenset(rel))
    left = Morphism(c, s, tuple((0, x) for x in c.elements), MorphismKind.EMBEDDING)
    right = Morphism(d, s, tuple((1, y) for y in d.elements), MorphismKind.EMBEDDING)
    fold = None
    if c == d:
        # codiagonal
        fold = Morphism(s, c, tuple(x for _, x in elems), MorphismKind.HOMOMORPHISM)
    return JepResult(c, d, s, left, right, fold, fold)


def _free_product(c: FiniteStructure, d: FiniteStructure) -> JepResult:
    n, m = c.size, d.size
    s = boolean_algebra(tuple((x, y) for x in c.elements for y in d.elements))
    rows = tuple(sum(1 << (i * m + j) for j in range(m)) for i in range(n))
    cols = tuple(sum(1 << (i * m + j) for i in range(n)) for j in range(m))
    left = Morphism(c, s, rows, MorphismKind.EMBEDDING)
    right = Morphism(d, s, cols, MorphismKind.EMBEDDING)
    fold = None
    if c == d:
        # dual to the diagonal x ↦ (x, x)
        fold = Morphism(s, c, tuple((1 << i) if i == j else 0 for i in range(n) for j in range(m)), MorphismKind.HOMOMORPHISM)
    return JepResult(c, d, s, left, right, fold, fold)


def jep_map(f: Morphism, g: Morphism, source: JepResult, target: JepResult) -> Morphism:
    """F(f, g): F(C, D) -> F(C', D')."""
    if source.left_factor != f.source or source.right_factor != g.source:
        raise ContractError("F(f, g) needs F of the sources of f and g")
    if target.left_factor != f.target or target.right_factor != g.target:
        raise ContractError("F(f, g) needs F of the targets of f and g")
    kind = weakest(f.kind, g.kind)
    if f.source.tag.is_boolean:
        width = g.target.size
        images = []
        for x in f.source.elements:
            fx = f(x)
            for y in g.source.elements:
                gy = g(y)
                bits = 0
                for i in range(f.target.size):
                    if fx >> i & 1:
                        bits |= gy << (i * width)
                images.append(bits)
        return Morphism(source.structure, target.structure, tuple(images), kind)
    images = tuple((0, f(x)) if side == 0 else (1, g(x)) for side, x in source.structure.elements)
    return Morphism(source.structure, target.structure, images, kind)


# ---------------------------------------------------------------------------
# The chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainPoint:
    """An element (carrier element for Boolean chains) of L_level."""

    level: int
    element: Any


class JepChain:
    """L₁ = L, L_k = F(L_{k-1}, L), extended on demand."""

    def __init__(self, base: FiniteStructure, *, max_elements: int = DEFAULT_LEVEL_BUDGET):
        if base.tag.kind not in JEP_CLASSES:
            raise ContractError(f"{base.tag} has no retractive natural JEP functor here")
        self.base = base
        self.max_elements = max_elements
        self._steps: List[JepResult] = []
        self._cache: Dict[Tuple[str, int], Morphism] = {}

    @property
    def depth(self) -> int:
        return len(self._steps) + 1

    def extend(self, depth: int) -> None:
        while self.depth < depth:
            previous = self.level(self.depth)
            size = previous.size * self.base.size if self.base.tag.is_boolean else previous.size + self.base.size
            if size > self.max_elements:
                raise CapacityError(
                    f"chain level {self.depth + 1} would have {size} elements (budget {self.max_elements})",
                    size=size,
                    limit=self.max_elements,
                )
            self._steps.append(jep(previous, self.base))
            logger.debug("JEP chain level %d: %d elements", self.depth, size)

    def level(self, k: int) -> FiniteStructure:
        if k < 1:
            raise ContractError(f"chain levels start at 1, got {k}")
        self.extend(k)
        return self.base if k == 1 else self._steps[k - 2].structure

    def step(self, k: int) -> JepResult:
        """The F(L_{k-1}, L) that produced level k >= 2."""
        self.extend(k)
        return self._steps[k - 2]

    def link(self, k: int) -> Morphism:
        """λ: L_k ↪ L_{k+1}."""
        return self.step(k + 1).left

    @property
    def pair(self) -> JepResult:
        """F(L, L)."""
        return self.step(2)

    def sizes(self) -> List[int]:
        return [self.level(k).size for k in range(1, self.depth + 1)]

    # -- bracket calculus -----------------------------------------------------

    def bracket_power(self, h: Morphism, n: int) -> Morphism:
        """[h, id, ..., id] with n - 1 identities; h maps one chain level to another."""
        shift = self.level_of(h.target) - self.level_of(h.source)
        out = h
        for k in range(2, n + 1):
            a = self.level_of(out.source)
            src = self.step(a + 1)
            dst = self.step(a + 1 + shift)
            out = jep_map(out, identity(self.base), src, dst)
        return out

    def level_of(self, s: FiniteStructure) -> int:
        for k in range(1, self.depth + 1):
            if self.level(k) is s or self.level(k) == s:
                return k
        raise ContractError("structure is not a level of this chain")

    def sigma_map(self, n: int) -> Morphism:
        """L_n -> L_{n+1}."""
        key = ("sigma", n)
        if key not in self._cache:
            self._cache[key] = self.bracket_power(self.pair.right, n)
        return self._cache[key]

    def tau_map(self, n: int) -> Morphism:
        """L_{n+1} -> L_n."""
        key = ("tau", n)
        if key not in self._cache:
            self.extend(n + 1)
            rho_star = self.pair.right_retraction
            assert rho_star is not None
            self._cache[key] = self.bracket_power(rho_star, n)
        return self._cache[key]

    def beta_map(self, n: int) -> Morphism:
        """β_n: L_n -> L."""
        key = ("beta", n)
        if key not in self._cache:
            if n == 1:
                self._cache[key] = identity(self.base)
            else:
                lam_star = self.pair.left_retraction
                assert lam_star is not None
                inner = jep_map(self.beta_map(n - 1), identity(self.base), self.step(n), self.pair)
                self._cache[key] = compose(lam_star, inner)
        return self._cache[key]


def build_chain(base: FiniteStructure, n: int, *, max_elements: int = DEFAULT_LEVEL_BUDGET) -> JepChain:
    chain = JepChain(base, max_elements=max_elements)
    chain.extend(n)
    return chain


def bracket(chain: JepChain, fs: Sequence[Morphism]) -> Morphism:
    """[f₁, ..., f_k]: L_k -> L_k."""
    if not fs:
        raise ContractError("a bracket needs at least one map")
    out = fs[0]
    for k, f in enumerate(fs[1:], start=2):
        out = jep_map(out, f, chain.step(k), chain.step(k))
    return out


def bracket_power(chain: JepChain, h: Morphism, n: int) -> Morphism:
    """[h, id, ..., id] acting on level n of the chain."""
    return chain.bracket_power(h, n)


# ---------------------------------------------------------------------------
# Generators on points
# ---------------------------------------------------------------------------

def sigma(chain: JepChain, p: ChainPoint) -> ChainPoint:
    return ChainPoint(p.level + 1, chain.sigma_map(p.level).apply(p.element))


def sigma_power(chain: JepChain, p: ChainPoint, k: int) -> ChainPoint:
    for _ in range(k):
        p = sigma(chain, p)
    return p


def tau(chain: JepChain, p: ChainPoint) -> ChainPoint:
    if p.level == 1:
        # ι₁ = ι₂ ∘ λ_L
        p = ChainPoint(2, chain.link(1).apply(p.element))
    n = p.level - 1
    return ChainPoint(n, chain.tau_map(n).apply(p.element))


def tau_power(chain: JepChain, p: ChainPoint, k: int) -> ChainPoint:
    for _ in range(k):
        p = tau(chain, p)
    return p


def phi(chain: JepChain, fseq: Sequence[Morphism], p: ChainPoint) -> ChainPoint:
    """φ(f̄) at a point of L_n; needs at least n maps."""
    if len(fseq) < p.level:
        raise ContractError(f"φ at level {p.level} needs {p.level} maps, got {len(fseq)}")
    return ChainPoint(p.level, bracket(chain, fseq[: p.level]).apply(p.element))


def beta(chain: JepChain, p: ChainPoint) -> Any:
    return chain.beta_map(p.level).apply(p.element)


def _sample(base: FiniteStructure) -> Tuple[Any, ...]:
    if base.tag.is_boolean:
        return tuple(1 << i for i in range(base.size))
    return base.elements


def check_retractions(chain: JepChain, depth: int) -> ValidationResult:
    """λ*∘λ = id = ρ*∘ρ on F(L, L), and [ρ*, id]_j ∘ [ρ, id]_j = id for j < depth."""
    pair = chain.pair
    ident = identity(chain.base)
    for name, r, e in (("λ", pair.left_retraction, pair.left), ("ρ", pair.right_retraction, pair.right)):
        assert r is not None
        if compose(r, e).images != ident.images:
            return ValidationResult.fail(f"{name}* ∘ {name} is not the identity")
    for j in range(1, depth):
        back = compose(chain.tau_map(j), chain.sigma_map(j))
        if back.images != identity(chain.level(j)).images:
            return ValidationResult.fail(f"[ρ*, id] ∘ [ρ, id] is not the identity on level {j}")
    return ValidationResult.ok()


# ---------------------------------------------------------------------------
# Distortion
# ---------------------------------------------------------------------------

@dataclass
class DistortionReport:
    n_max: int
    checked: int = 0
    mismatches: List[str] = field(default_factory=list)
    depth: int = 1

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_validation(self) -> ValidationResult:
        if self.passed:
            return ValidationResult.ok()
        return ValidationResult(False, list(self.mismatches), [])


def _check_endos(base: FiniteStructure, fseq: Sequence[Morphism]) -> None:
    for i, f in enumerate(fseq, start=1):
        if f.source != base or f.target != base:
            raise ContractError(f"f{i} is not an endomorphism of the chain base")


def verify_distortion(chain: JepChain, fseq: Sequence[Morphism], n_max: int) -> DistortionReport:
    """β∘φ(f̄)∘ι₁ = f₁ and β∘τⁿ∘φ(f̄)∘σⁿ∘ι₁ = f_{n+1} for n <= n_max, pointwise on L."""
    if len(fseq) < n_max + 1:
        raise ContractError(f"need at least {n_max + 1} maps, got {len(fseq)}")
    _check_endos(chain.base, fseq)
    chain.extend(n_max + 1)
    report = DistortionReport(n_max, depth=n_max + 1)
    for v in _sample(chain.base):
        start = ChainPoint(1, v)
        got = beta(chain, phi(chain, fseq, start))
        report.checked += 1
        if got != fseq[0].apply(v):
            report.mismatches.append(f"β∘φ∘ι₁ at {v!r}: {got!r} != f1 = {fseq[0].apply(v)!r}")
        for n in range(1, n_max + 1):
            p = sigma_power(chain, start, n)
            p = phi(chain, fseq, p)
            p = tau_power(chain, p, n)
            got = beta(chain, p)
            report.checked += 1
            want = fseq[n].apply(v)
            if got != want:
                report.mismatches.append(f"β∘τ^{n}∘φ∘σ^{n}∘ι₁ at {v!r}: {got!r} != f{n + 1} = {want!r}")
    logger.info("distortion identities: %d checks, %d mismatches", report.checked, len(report.mismatches))
    return report


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

ALPHABET = ("α", "β", "σ", "τ", "φ")


@dataclass(frozen=True)
class GeneratorWord:
    """Letters in reading order; evaluation composes right to left."""

    letters: Tuple[str, ...]

    def __post_init__(self) -> None:
        bad = [x for x in self.letters if x not in ALPHABET]
        if bad:
            raise ContractError(f"unknown generator {bad[0]!r}")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return " ".join(self.letters)


def encode_word(n: int) -> GeneratorWord:
    """The word for f_n: β φ α, then β τ^m φ σ^m α for n = m + 1."""
    if n < 1:
        raise ContractError("words are indexed from n = 1")
    m = n - 1
    return GeneratorWord(("β",) + ("τ",) * m + ("φ",) + ("σ",) * m + ("α",))


@dataclass(frozen=True)
class WordEvaluation:
    """Values of a word on the points of L, read back as tower addresses."""

    word: GeneratorWord
    points: Tuple[Any, ...]
    images: Tuple[TowerAddress, ...]
    depth: int
    k_depth: int
    tower: TowerHandle = field(compare=False, repr=False)
    level: int = 0
    beta_check: ValidationResult = field(default_factory=ValidationResult.ok, compare=False)

    def matches(self, f: Morphism) -> bool:
        want = tuple(self.tower.canonical(TowerAddress(self.level, f.apply(v))) for v in self.points)
        return self.images == want


class LiftedGenerators:
    """K^d of σ, τ and φ(f̄) between the K^d(L_k), with α̃ and β̃ around them.

    α̃ sends v in L to η^d(ι₁(v)) in K^d(L₁). β̃ on K^d(L_k) is built one
    K-level at a time, β_0 = β and β_j = r_j ∘ K(β_{j-1}), where r_j is the
    retraction of level ``level + j`` of the tower over L. The whole map is
    built, so r_j also acts on New points, and every β_j is checked to be a
    homomorphism with β_j ∘ η = η ∘ β_{j-1}.
    """

    def __init__(
        self,
        chain: JepChain,
        fseq: Sequence[Morphism],
        tower: TowerHandle,
        level: int,
        k_depth: int,
        retractions: Optional[Sequence[Morphism]] = None,
    ):
        self.chain = chain
        self.fseq = fseq
        self.tower = tower
        self.level = level
        self.k_depth = k_depth
        self.retractions = retractions
        self.beta_check = ValidationResult.ok()
        self._towers: Dict[int, TowerHandle] = {}
        self._letters: Dict[Tuple[str, int], Tuple[Morphism, int]] = {}
        self._betas: Dict[int, Morphism] = {}
        self._alpha: Optional[Morphism] = None

    def tower_over(self, k: int) -> TowerHandle:
        if k not in self._towers:
            self._towers[k] = TowerHandle(self.chain.level(k), max_elements=self.chain.max_elements)
        return self._towers[k]

    def lift(self, g: Morphism, a: int, b: int) -> Morphism:
        """K^d(g) for g: L_a -> L_b."""
        if self.k_depth == 0:
            return g
        ladder = k_omega_morphism(g, self.k_depth, source=self.tower_over(a), target=self.tower_over(b))
        return ladder.at(self.k_depth)

    def alpha(self, v: Any) -> Any:
        if self._alpha is None:
            self._alpha = self.tower_over(1).eta_power(0, self.k_depth)
        return self._alpha.apply(v)

    def letter(self, name: str, k: int) -> Tuple[Morphism, int]:
        """The lifted letter on K^d(L_k) and the chain level it lands on."""
        key = (name, k)
        if key not in self._letters:
            if name == "σ":
                g, out = self.chain.sigma_map(k), k + 1
            elif name == "τ":
                if k == 1:
                    # ι₁ = ι₂ ∘ λ_L
                    g, out = compose(self.chain.tau_map(1), self.chain.link(1)), 1
                else:
                    g, out = self.chain.tau_map(k - 1), k - 1
            else:
                if len(self.fseq) < k:
                    raise ContractError(f"φ at level {k} needs {k} maps, got {len(self.fseq)}")
                g, out = bracket(self.chain, self.fseq[:k]), k
            self._letters[key] = (self.lift(g, k, out), out)
            logger.debug("lifted %s at chain level %d to K-depth %d", name, k, self.k_depth)
        return self._letters[key]

    def _retraction(self, j: int) -> Morphism:
        top = self.level + j
        r = self.retractions[j - 1] if self.retractions is not None else retraction(self.tower, top - 1)
        if r.source != self.tower.level(top) or r.target != self.tower.level(top):
            raise ContractError(f"the retraction at K-depth {j} must be a map of level {top} of the tower")
        return r

    def beta(self, k: int) -> Morphism:
        """β̃: K^d(L_k) -> level ``level + d`` of the tower over L."""
        if k in self._betas:
            return self._betas[k]
        src = self.tower_over(k)
        b = self.chain.beta_map(k)
        for j in range(1, self.k_depth + 1):
            kb = k_morphism(
                b,
                source_k=src.step(j - 1),
                target_k=self.tower.step(self.level + j - 1),
                max_elements=self.chain.max_elements,
            )
            nxt = compose(self._retraction(j), kb)
            hom = check_morphism(nxt)
            if not hom:
                self.beta_check = self.beta_check.merge(
                    ValidationResult.fail(f"β̃ on K^{j}(L_{k}) is not a homomorphism: {hom.first_error}")
                )
            left = compose(nxt, src.link(j - 1)).images
            right = compose(self.tower.link(self.level + j - 1), b).images
            if left != right:
                self.beta_check = self.beta_check.merge(
                    ValidationResult.fail(f"β̃ ∘ η != η ∘ β on K^{j}(L_{k})")
                )
            b = nxt
        self._betas[k] = b
        return b


def evaluate_word(
    word: GeneratorWord,
    chain: JepChain,
    fseq: Sequence[Morphism],
    *,
    k_depth: int = 1,
    tower: Optional[TowerHandle] = None,
    level: int = 0,
    retractions: Optional[Sequence[Morphism]] = None,
) -> WordEvaluation:
    """Evaluate a word β̃ ... α̃ on every point of L through ``k_depth`` levels of K.

    L is level ``level`` of ``tower`` (by default the tower over the chain
    base); β̃ lands ``k_depth`` levels higher and the values are compared as
    canonical addresses. ``k_depth=0`` evaluates on the chain itself.

    Raises:
        ContractError: ill-formed word, metric spaces with ``k_depth > 0``,
            or a letter K is not defined on (collapsing digraph maps).
    """
    base = chain.base
    if k_depth < 0:
        raise ContractError(f"k_depth must be non-negative, got {k_depth}")
    if base.tag.is_metric and k_depth > 0:
        raise ContractError("word evaluation needs a retraction K(L) -> L, which is not offered for metric spaces")
    _check_endos(base, fseq)
    letters = word.letters
    if len(letters) < 2 or letters[-1] != "α" or letters[0] != "β" or {"α", "β"} & set(letters[1:-1]):
        raise ContractError(f"word {word} must read β̃ ... α̃ with no inner α̃ or β̃")
    tower = tower or TowerHandle(base, max_elements=chain.max_elements)
    if tower.level(level) != base:
        raise ContractError(f"the chain is not built over level {level} of the tower")

    lifted = LiftedGenerators(chain, fseq, tower, level, k_depth, retractions)
    points = _sample(base)
    images = []
    deepest = 1
    for v in points:
        k, x = 1, lifted.alpha(v)
        for name in reversed(letters[1:-1]):
            g, k = lifted.letter(name, k)
            x = g.apply(x)
            deepest = max(deepest, k)
        y = lifted.beta(k).apply(x)
        images.append(tower.canonical(TowerAddress(level + k_depth, y)))
    logger.info("evaluated %s on %d point(s) at chain depth %d, K-depth %d", word, len(points), deepest, k_depth)
    return WordEvaluation(word, tuple(points), tuple(images), deepest, k_depth, tower, level, lifted.beta_check)


def graph_retraction(t: TowerHandle, level: int) -> Morphism:
    """Truncated r: K(L) -> L for a graph tower, an idempotent endomorphism of level ``level + 1``.

    See :func:`katetov.engines.limits.retraction`.
    """
    if t.tag.kind is not ClassKind.GRAPH:
        raise ContractError(f"graph_retraction needs a graph tower, got {t.tag}")
    return retraction(t, level)
