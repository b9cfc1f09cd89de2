#!/usr/bin/env python3
"""katetov command line.

Builds towers of Katětov iterates, verifies the extension property, extends
partial morphisms, embeds endomorphism monoids, compares the generic K with
the hand-made one, runs the metric and Bergman suites and exports artifacts.

Exit codes: 0 on a full pass, 2 when a property check finds a counterexample
(a JSON report is written), 1 on usage, configuration, format or capacity errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .engines.bergman import (
    JEP_CLASSES,
    WORD_LIFT_CLASSES,
    build_chain,
    check_retractions,
    encode_word,
    evaluate_word,
    verify_distortion,
)
from .engines.classes import k_morphism, k_object
from .engines.limits import compose_truncations, embed_endomorphisms, extend_partial_morphism
from .engines.metric import hat, is_katetov, push, sphere_k_object, uniform_space
from .engines.pushout import extension_equivalent, generic_k
from .engines.structures import (
    PRESETS,
    ClassKind,
    ClassTag,
    FiniteStructure,
    MorphismKind,
    compose,
    enumerate_morphisms,
    identity,
    preset,
)
from .engines.tower import TowerHandle, verify_extension_property
from .errors import ConfigError, KatetovError
from .parsers.json_format import (
    address_to_json,
    load_endos,
    load_partial_map,
    load_structure,
    load_tower,
    partial_map_to_json,
    structure_from_json,
)
from .settings import ENV_BUDGET, KatetovConfig, load_config
from .validator import ValidationResult
from .writers.dot import tower_level_to_dot, write_dot
from .writers.tower_json import k_object_to_json, tower_to_json, write_json, write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COUNTEREXAMPLE = 2


class UsageError(ConfigError):
    """The command line itself is malformed."""


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; 2 is reserved for counterexamples here."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """One CLI invocation, validated before any work starts."""

    command: str
    tag: ClassTag
    seed: str = "empty"
    depth: int = 2
    size_bound: int = 1
    n: int = 1
    size: int = 2
    level: Optional[int] = None
    budget: int = 50_000
    jobs: int = 1
    output: Optional[Path] = None
    fmt: str = "json"
    report_json: Optional[Path] = None
    input_path: Optional[Path] = None
    settings: KatetovConfig = field(default_factory=KatetovConfig)

    @classmethod
    def from_args(cls, args: argparse.Namespace, settings: KatetovConfig) -> RunConfig:
        """Create the run configuration from parsed CLI arguments."""
        name = args.class_name
        try:
            if name == ClassKind.KN_FREE.value:
                if args.clique is None:
                    raise ConfigError("--class kn-free needs --clique N (N >= 3)")
                tag = ClassTag.kn_free(args.clique)
            elif name == ClassKind.METRIC.value:
                tag = ClassTag.metric(args.q if args.q is not None else settings.default_q)
            else:
                tag = ClassTag.parse(name)
        except KatetovError as exc:
            raise ConfigError(str(exc)) from exc
        input_path = next(
            (getattr(args, k) for k in ("map", "maps", "seed_endos", "input") if getattr(args, k, None) is not None),
            None,
        )
        rc = cls(
            command=args.command,
            tag=tag,
            seed=args.seed,
            depth=args.depth if args.depth is not None else settings.default_depth,
            size_bound=getattr(args, "size_bound", 1),
            n=getattr(args, "n", 1),
            size=getattr(args, "size", 2),
            level=getattr(args, "level", None),
            budget=args.budget if args.budget is not None else settings.level_budget,
            jobs=args.jobs if args.jobs is not None else settings.jobs,
            output=args.output,
            fmt=getattr(args, "format", "json"),
            report_json=args.report_json,
            input_path=input_path,
            settings=settings,
        )
        rc.check()
        return rc

    def check(self) -> None:
        for name in ("budget", "jobs"):
            value = getattr(self, name)
            if value <= 0:
                raise ConfigError(f"--{name} must be positive, got {value}")
        for name in ("depth", "size_bound"):
            value = getattr(self, name)
            if value < 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be non-negative, got {value}")
        if self.n < 1:
            raise ConfigError(f"--n must be at least 1, got {self.n}")
        if self.command == "bergman-check" and self.n + 1 > self.settings.max_chain_depth:
            raise ConfigError(
                f"--n {self.n} needs a chain of depth {self.n + 1}, above bergman.max_chain_depth = {self.settings.max_chain_depth}"
            )
        if self.command in ("extend", "embed-endos", "export") and self.input_path is None:
            raise ConfigError(f"{self.command} needs an input file")

    def report_path(self) -> Path:
        if self.report_json is not None:
            return self.report_json
        if self.output is not None:
            return self.output.with_name(self.output.name + self.settings.report_suffix)
        return Path(f"{self.command}{self.settings.report_suffix}")


@dataclass
class RunOutcome:
    exit_code: int
    payload: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def load_seed(source: str, tag: ClassTag) -> FiniteStructure:
    """A preset name, inline JSON or a path to a structure file."""
    if source in PRESETS:
        return preset(tag, source)
    text = source.strip()
    if text.startswith("{"):
        try:
            s = structure_from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--seed is not valid JSON: {exc}") from exc
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"--seed {source!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
        s = load_structure(path)
    if s.tag != tag:
        raise ConfigError(f"seed is a {s.tag} structure but --class says {tag}")
    return s


def _banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def _phase(n: int, title: str) -> None:
    print()
    print(f"[Phase {n}] {title}")
    print("-" * 60)


def _mark(result: ValidationResult, label: str) -> None:
    print(f"{'✅' if result else '❌'} {label}")
    if not result:
        for err in result.errors:
            print(f"    - {err}")


def _tower(rc: RunConfig, seed: FiniteStructure) -> TowerHandle:
    return TowerHandle(seed, max_elements=rc.budget)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_build(rc: RunConfig) -> RunOutcome:
    seed = load_seed(rc.seed, rc.tag)
    _phase(1, "Tower expansion")
    t = _tower(rc, seed)
    t.expand(rc.depth)
    for n, size in enumerate(t.sizes()):
        print(f"  level {n}: {size} elements")
    _phase(2, "Output writing")
    out = rc.output or Path("tower.json")
    if not write_json(out, tower_to_json(t, rc.depth)):
        raise ConfigError(f"cannot write {out}")
    print(f"✅ {out}")
    return RunOutcome(EXIT_OK, {"sizes": t.sizes()[: rc.depth + 1], "output": str(out)})


def cmd_verify_ep(rc: RunConfig) -> RunOutcome:
    seed = load_seed(rc.seed, rc.tag)
    t = _tower(rc, seed)
    _phase(1, f"Extension property over level {rc.depth}, substructures of size <= {rc.size_bound}")
    report = verify_extension_property(t, rc.depth, rc.size_bound, jobs=rc.jobs, cap=rc.settings.extension_size_cap)
    by_base: Dict[str, int] = {}
    for cert in report.certificates:
        key = json.dumps([address_to_json(a) for a in cert.base])
        by_base[key] = by_base.get(key, 0) + 1
    for key, count in by_base.items():
        print(f"  base {key}: {count} certificate(s)")
    result = report.to_validation()
    _mark(result, f"{len(report.certificates)} extension(s) realized at level {rc.depth + 1}")
    payload: Dict[str, Any] = {"certificates": len(report.certificates), "by_base": by_base}
    if not report.passed:
        bad = report.counterexample
        assert bad is not None
        payload["counterexample"] = {
            "base": [address_to_json(a) for a in bad.base],
            "extension_type": [str(v) for v in bad.extension.type_over_base()],
            "reason": bad.reason,
        }
        return RunOutcome(EXIT_COUNTEREXAMPLE, payload)
    return RunOutcome(EXIT_OK, payload)


def cmd_extend(rc: RunConfig) -> RunOutcome:
    seed = load_seed(rc.seed, rc.tag)
    t = _tower(rc, seed)
    assert rc.input_path is not None
    m = load_partial_map(rc.input_path)
    _phase(1, f"Extending a partial {m.kind.value} of size {m.size}")
    e = extend_partial_morphism(t, m, rc.depth, margin=rc.settings.search_margin)
    result = e.check()
    for a, b in m.pairs():
        if e.apply(a) != t.canonical(b):
            result = result.merge(ValidationResult.fail(f"extension moves {a} to {e.apply(a)}, not {b}"))
    _mark(result, f"{len(e.table)} point(s), truncation depth {e.depth_in} -> {e.depth_out}")
    payload = {"depth_in": e.depth_in, "depth_out": e.depth_out, "map": partial_map_to_json(e.as_partial_map())}
    if rc.output is not None and not write_json(rc.output, payload):
        raise ConfigError(f"cannot write {rc.output}")
    if not result:
        payload["errors"] = result.errors
        return RunOutcome(EXIT_COUNTEREXAMPLE, payload)
    return RunOutcome(EXIT_OK, payload)


def cmd_embed_endos(rc: RunConfig) -> RunOutcome:
    seed = load_seed(rc.seed, rc.tag)
    t = _tower(rc, seed)
    assert rc.input_path is not None
    maps = load_endos(rc.input_path, seed)
    _phase(1, f"Embedding {len(maps)} endomorphism(s) at depth {rc.depth}")
    pool = list(maps) + [identity(seed).with_kind(MorphismKind.HOMOMORPHISM)]
    truncs = embed_endomorphisms(seed, pool, rc.depth, tower=t)
    result = ValidationResult.ok()
    for i, e in enumerate(truncs):
        check = e.check()
        if not check:
            result = result.merge(ValidationResult.fail(f"map {i}: {check.first_error}"))
    ident = truncs[-1]
    if any(k != v for k, v in ident.table.items()):
        result = result.merge(ValidationResult.fail("identity is not sent to the identity"))
    pairs = 0
    for i, g in enumerate(maps):
        for j, h in enumerate(maps):
            (gh,) = embed_endomorphisms(seed, [compose(g, h)], rc.depth, tower=t)
            pairs += 1
            if not gh.same_table(compose_truncations(truncs[i], truncs[j])):
                result = result.merge(ValidationResult.fail(f"K(g{i} ∘ g{j}) != K(g{i}) ∘ K(g{j})"))
            if g.images != h.images and truncs[i].same_table(truncs[j]):
                result = result.merge(ValidationResult.fail(f"maps {i} and {j} collapse"))
    _mark(result, f"multiplicative on {pairs} pair(s), identity-preserving, injective on the sample")
    payload: Dict[str, Any] = {"maps": len(maps), "pairs": pairs}
    if not result:
        payload["errors"] = result.errors
        return RunOutcome(EXIT_COUNTEREXAMPLE, payload)
    return RunOutcome(EXIT_OK, payload)


def cmd_generic_k(rc: RunConfig) -> RunOutcome:
    if rc.tag.kind is not ClassKind.GRAPH:
        raise ConfigError("generic-k is offered for --class graph only")
    seed = load_seed(rc.seed, rc.tag)
    _phase(1, "Iterated one-point pushouts")
    gk = generic_k(seed, cap=rc.settings.generic_k_size_cap)
    kk = k_object(seed, max_elements=rc.budget)
    same = extension_equivalent(gk, kk) and gk.structure.size == kk.structure.size
    result = ValidationResult.ok() if same else ValidationResult.fail("generic K and K realize different extension types")
    _mark(result, f"generic K has {gk.structure.size} vertices, K has {kk.structure.size}")
    payload = k_object_to_json(gk)
    if rc.output is not None and not write_json(rc.output, payload):
        raise ConfigError(f"cannot write {rc.output}")
    return RunOutcome(EXIT_OK if same else EXIT_COUNTEREXAMPLE, {"sizes": [gk.structure.size, kk.structure.size]})


def cmd_metric_demo(rc: RunConfig) -> RunOutcome:
    if not rc.tag.is_metric:
        raise ConfigError("metric-demo needs --class metric")
    q = rc.tag.q
    if q > rc.settings.sphere_q_cap or rc.size > rc.settings.sphere_size_cap:
        raise ConfigError(f"metric-demo is capped at q <= {rc.settings.sphere_q_cap} and size <= {rc.settings.sphere_size_cap}")
    # the default seed stands for a uniform space of --size points
    space = uniform_space(rc.size, q) if rc.seed == "empty" else load_seed(rc.seed, rc.tag)
    _phase(1, f"K of a {space.size}-point space on the 1/{q} grid")
    kx = sphere_k_object(space, max_elements=rc.budget)
    print(f"  |K(X)| = {kx.structure.size}")
    result = ValidationResult.ok()
    for d in kx.descriptors[space.size:]:
        if not is_katetov(d.payload):  # type: ignore[union-attr]
            result = result.merge(ValidationResult.fail(f"{d} is not Katětov"))
    for x in space.elements:
        for y in space.elements:
            if kx.structure.dist(kx.eta(x), kx.eta(y)) != space.dist(x, y):
                result = result.merge(ValidationResult.fail(f"η is not isometric at {x!r}, {y!r}"))
    _mark(result, "K(X) consists of Katětov functions and η is isometric")

    _phase(2, "Functor laws on nonexpansive self-maps")
    laws = ValidationResult.ok()
    maps = list(enumerate_morphisms(space, space))
    for f in maps:
        for x in space.elements:
            if push(hat(space, x), f, sphere=True) != hat(space, f(x)):
                laws = laws.merge(ValidationResult.fail(f"hat({x!r}) does not push to hat(f({x!r}))"))
        for g in maps:
            for d in kx.descriptors[space.size:]:
                phi = d.payload  # type: ignore[union-attr]
                if push(push(phi, f, sphere=True), g, sphere=True) != push(phi, compose(g, f), sphere=True):
                    laws = laws.merge(ValidationResult.fail("(φ^f)^g != φ^(g∘f)"))
                    break
    for f in maps:
        kf = k_morphism(f, source_k=kx, target_k=kx, max_elements=rc.budget)
        isometric = all(
            kx.structure.dist(kf(a), kf(b)) == kx.structure.dist(a, b) for a in kx.structure.elements for b in kx.structure.elements
        )
        if isometric != f.is_injective:
            laws = laws.merge(ValidationResult.fail("K(f) is isometric exactly when f is an embedding fails"))
    _mark(laws, f"{len(maps)} self-map(s) checked")
    total = result.merge(laws)
    payload: Dict[str, Any] = {"points": space.size, "k_points": kx.structure.size, "maps": len(maps)}
    if not total:
        payload["errors"] = total.errors
        return RunOutcome(EXIT_COUNTEREXAMPLE, payload)
    return RunOutcome(EXIT_OK, payload)


def cmd_bergman_check(rc: RunConfig) -> RunOutcome:
    if rc.tag.kind not in JEP_CLASSES:
        raise ConfigError(f"bergman-check needs one of {', '.join(k.value for k in JEP_CLASSES)}")
    seed = load_seed(rc.seed, rc.tag)
    t = _tower(rc, seed)
    base = t.level(rc.depth)
    if rc.input_path is not None:
        fseq = load_endos(rc.input_path, base)
    else:
        fseq = [identity(base).with_kind(MorphismKind.HOMOMORPHISM)] * (rc.n + 1)
    if len(fseq) < rc.n + 1:
        raise ConfigError(f"--n {rc.n} needs at least {rc.n + 1} endomorphisms, got {len(fseq)}")

    _phase(1, f"JEP chain over a {base.size}-element truncation")
    chain = build_chain(base, rc.n + 1, max_elements=rc.budget)
    print(f"  chain sizes: {chain.sizes()}")
    retractions = check_retractions(chain, rc.n + 1)
    _mark(retractions, "λ*∘λ = id = ρ*∘ρ and [ρ*, id] ∘ [ρ, id] = id")

    _phase(2, "Distortion identities")
    report = verify_distortion(chain, fseq, rc.n)
    _mark(report.to_validation(), f"{report.checked} pointwise check(s) at chain depth {report.depth}")

    _phase(3, "Words over five generators")
    words = ValidationResult.ok()
    evaluated = 0
    k_depth = 1 if rc.tag.kind in WORD_LIFT_CLASSES else 0
    if k_depth == 0:
        logger.warning("K is not lifted for %s words; evaluating on the chain itself", rc.tag)
    for k in range(1, rc.n + 2):
        w = encode_word(k)
        if len(w) != 2 * k + 1:
            words = words.merge(ValidationResult.fail(f"word for f{k} has length {len(w)}"))
        if k <= 2:
            ev = evaluate_word(w, chain, fseq, k_depth=k_depth, tower=t, level=rc.depth)
            evaluated += 1
            words = words.merge(ev.beta_check)
            if not ev.matches(fseq[k - 1]):
                words = words.merge(ValidationResult.fail(f"word {w} does not evaluate to f{k}"))
        print(f"  f{k}: {w}")
    _mark(words, f"lengths 2n+1, {evaluated} word(s) evaluated at K-depth {k_depth}")

    total = retractions.merge(report.to_validation()).merge(words)
    payload: Dict[str, Any] = {
        "chain_sizes": chain.sizes(),
        "distortion_checks": report.checked,
        "mismatches": report.mismatches,
        "words_evaluated": evaluated,
        "k_depth": k_depth,
        "depth": report.depth,
    }
    if not total:
        payload["errors"] = total.errors
        return RunOutcome(EXIT_COUNTEREXAMPLE, payload)
    return RunOutcome(EXIT_OK, payload)


def cmd_export(rc: RunConfig) -> RunOutcome:
    assert rc.input_path is not None
    t = load_tower(rc.input_path, max_elements=rc.budget)
    depth = t.frozen_depth
    if t.tag != rc.tag:
        raise ConfigError(f"tower file holds a {t.tag} tower but --class says {rc.tag}")
    _phase(1, f"Export as {rc.fmt}")
    if rc.fmt == "dot":
        level = depth if rc.level is None else rc.level
        out = rc.output or Path(f"level{level}.dot")
        ok = write_dot(out, tower_level_to_dot(t, level))
    else:
        out = rc.output or Path("tower.json")
        ok = write_json(out, tower_to_json(t, depth))
    if not ok:
        raise ConfigError(f"cannot write {out}")
    print(f"✅ {out}")
    return RunOutcome(EXIT_OK, {"output": str(out), "sizes": t.sizes()})


HANDLERS = {
    "build": cmd_build,
    "verify-ep": cmd_verify_ep,
    "extend": cmd_extend,
    "embed-endos": cmd_embed_endos,
    "generic-k": cmd_generic_k,
    "metric-demo": cmd_metric_demo,
    "bergman-check": cmd_bergman_check,
    "export": cmd_export,
}


def run(rc: RunConfig) -> RunOutcome:
    _banner(f"katetov {rc.command} - {rc.tag}")
    outcome = HANDLERS[rc.command](rc)
    print()
    print("=" * 60)
    if outcome.exit_code == EXIT_OK:
        print(f"✅ {rc.command} completed")
    else:
        print(f"❌ {rc.command} found a counterexample")
    print("=" * 60)
    return outcome


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--class", dest="class_name", default="graph", help="Class name (graph, kn-free, digraph, linear-order, poset, tournament, boolean-algebra, metric)")
    common.add_argument("--clique", type=int, help="Forbidden clique size n for kn-free")
    common.add_argument("--q", type=int, help="Distance denominator for metric")
    common.add_argument("--seed", default="empty", help=f"Seed: preset ({', '.join(PRESETS)}), inline JSON or a structure file")
    common.add_argument("--depth", type=int, help="Tower depth (default from config)")
    common.add_argument("--budget", type=int, help=f"Elements per level (overrides {ENV_BUDGET})")
    common.add_argument("--jobs", type=int, help="Worker threads")
    common.add_argument("--output", type=Path, help="Output file")
    common.add_argument("--report-json", type=Path, help="Path of the JSON report")
    common.add_argument("--config", type=Path, help="Alternative YAML config")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--debug", action="store_true", help="Print tracebacks")

    parser = _ArgumentParser(
        prog="katetov",
        description="Katětov functors and Fraïssé limits at desk scale",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  katetov build --class graph --seed empty --depth 2 --output tower.json
  katetov verify-ep --class graph --depth 1 --size-bound 1
  katetov bergman-check --class graph --depth 2 --n 2 --seed-endos endos.json
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="Expand a tower and write tower.json")
    p = sub.add_parser("verify-ep", parents=[common], help="Certify the extension property")
    p.add_argument("--size-bound", type=int, default=1)
    p = sub.add_parser("extend", parents=[common], help="Extend a partial morphism")
    p.add_argument("--map", type=Path, required=True, help="Partial map JSON")
    p = sub.add_parser("embed-endos", parents=[common], help="Embed End(C) into End of the limit")
    p.add_argument("--maps", type=Path, required=True, help="Endomorphisms of the seed (JSON)")
    sub.add_parser("generic-k", parents=[common], help="Compare the generic K with K on a graph")
    p = sub.add_parser("metric-demo", parents=[common], help="Discretized metric K and its laws")
    p.add_argument("--size", type=int, default=2, help="Points of the uniform space")
    p = sub.add_parser("bergman-check", parents=[common], help="Distortion identities and words")
    p.add_argument("--n", type=int, default=1, help="Largest n in the identities")
    p.add_argument("--seed-endos", type=Path, help="Endomorphisms of the truncation (JSON)")
    p = sub.add_parser("export", parents=[common], help="Re-export a tower file")
    p.add_argument("--input", type=Path, required=True, help="tower.json")
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--level", type=int, help="Level for DOT export")
    return parser


def _configure_logging(settings: KatetovConfig, verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level, logging.INFO)
    logging.basicConfig(level=level, format=settings.log_format)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point.

    Returns:
        Exit code (0 pass, 2 counterexample, 1 error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        settings = load_config(args.config)
        _configure_logging(settings, args.verbose)
        rc = RunConfig.from_args(args, settings)
        outcome = run(rc)
    except KatetovError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        if args.debug:
            traceback.print_exc()
        return EXIT_ERROR

    if outcome.exit_code != EXIT_OK or rc.report_json is not None:
        path = rc.report_path()
        if write_report(path, rc.command, outcome.exit_code, outcome.payload):
            print(f"  → report: {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
