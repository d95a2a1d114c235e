"""Command line front end.

JSON goes to stdout and a one-line summary to stderr. Exit status is 0 on
success, 1 when a checked property fails (or a decision comes out false
for the commands that mirror a boolean), and 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import coalgebras as co
from . import harness
from . import structures as st
from .comonads import build, check_comonad_laws, legend, make_comonad, value_from_json, value_to_json
from .games import FRAGMENTS, KINDS, count_equiv, decide
from .kleisli import (
    LAW_REGISTRY,
    check_kleisli_law,
    get_law,
    instantiate,
    law_bases,
    operand_pool,
    target_structure,
    with_swapped_outputs,
)
from .spectra import char_poly
from .structures import StructureError

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj: Any, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        _write(out, text)
    else:
        print(text)


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path: str) -> st.Structure:
    return st.load_structure(path)


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc.msg})") from None


def _figure_path(report: str) -> Path:
    return Path(report).with_suffix(".png")


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(a) -> int:
    A, B = _load(a.A), _load(a.B)
    kw = {"wl": True} if a.wl else {}
    if a.wl and (a.fragment != "count" or a.kind != "pebble"):
        raise UsageError("--wl applies to the counting fragment of the pebble game")
    v = decide(a.fragment, a.kind, A, B, a.k, witness=bool(a.witness), **kw)
    if a.witness:
        _emit(v.witness, a.witness)
    _emit(v.as_dict() | {"witness": None} if a.witness else v.as_dict())
    _say(f"{a.fragment}/{a.kind}/k={a.k}: {v.result} ({v.backend})")
    return OK if v.result else FAILED


def cmd_compose(a) -> int:
    ops = [_load(p) for p in a.structures]
    op = a.op
    if op == "reduct":
        if len(ops) != 1 or not a.to_signature:
            raise UsageError("reduct takes one structure and --to-signature")
        out = st.reduct(ops[0], json.loads(a.to_signature))
    else:
        if op in ("pointed-coproduct", "merge", "vee", "disjoint-union") and len(ops) != 2:
            raise UsageError(f"{op} takes two structures")
        if op == "product":
            out = st.product(ops)
        elif op == "disjoint-union":
            out = st.disjoint_union(*ops)
        elif op == "pointed-coproduct":
            out = st.pointed_coproduct(*ops)
        elif op == "merge":
            out = st.merge_R(ops[0], ops[1], a.relation)
        else:
            out = st.vee(*ops)
    _emit(st.structure_to_obj(out), a.output)
    _say(f"{op}: {out.size} elements")
    return OK


def cmd_translate(a) -> int:
    A = _load(a.structure)
    if a.to == "equality":
        out = st.translate_equality(A)
    elif a.to == "connectivity":
        out = st.translate_connectivity(A)
    elif a.to == "global":
        out = st.translate_global(A)
    else:
        out = st.translate_weak(A, a.silent, silent=a.silent_mode)
    _emit(st.structure_to_obj(out), a.output)
    _say(f"{a.to}: signature {dict(out.signature.relations)}")
    return OK


def cmd_comonad_build(a) -> int:
    A = _load(a.structure)
    C = build(make_comonad(a.kind, a.k, a.trunc), A, guard=a.guard)
    obj = {"carrier": st.structure_to_obj(C.carrier), "legend": legend(C), "comonad": C.comonad.describe()}
    _emit(obj, a.output)
    _say(f"{a.kind}: carrier of {len(C)} elements")
    return OK


def cmd_comonad_laws(a) -> int:
    cm = make_comonad(a.kind, a.k, a.trunc)
    bases = law_bases(a.kind, a.max_size)
    reports = []
    for i, A in enumerate(bases):
        C = build(cm, A, guard=a.guard)
        reports.append(check_comonad_laws(C, bases, seed=a.seed + i, samples=a.samples).as_dict())
    passed = all(r["passed"] for r in reports)
    _emit({"comonad": cm.describe(), "bases": len(bases), "passed": passed, "reports": reports}, a.report)
    _say(f"{a.kind} k={a.k}: {'all laws hold' if passed else 'LAW FAILURE'} on {len(bases)} bases")
    return OK if passed else FAILED


def cmd_kappa_apply(a) -> int:
    law = get_law(a.law, a.k, a.trunc)
    bases = [_load(p) for p in a.structures]
    inst = instantiate(law, bases)
    try:
        x = value_from_json(json.loads(a.element))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--element is not JSON ({exc.msg})") from None
    if isinstance(x, int) and not isinstance(x, bool):
        if not 0 <= x < len(inst.source_values):
            raise UsageError(f"--element index out of range 0..{len(inst.source_values) - 1}")
        x = inst.source_values[x]
    elif x not in inst.source_values:
        raise UsageError("--element is not an element of the source carrier; pass a value or an index")
    y = law.kappa(x)
    _, index = target_structure(inst)
    _emit({"law": law.describe(), "element": value_to_json(x), "image": value_to_json(y), "target_index": index[y]})
    _say(f"{a.law}: image at target index {index[y]}")
    return OK


def cmd_kappa_check(a) -> int:
    law = get_law(a.law, a.k, a.trunc)
    pool = operand_pool(law, a.max_size)
    tuples = [list(t) for t in itertools.product(pool, repeat=law.arity)]
    if a.fault:
        inst = instantiate(law, tuples[-1])
        sv = inst.source_values
        law = with_swapped_outputs(law, sv[0], sv[-1])
    rep = check_kleisli_law(law, tuples, seed=a.seed, samples=a.samples).as_dict()
    if a.report:
        _emit(rep, a.report)
        from .plotting import law_figure

        law_figure([rep], _figure_path(a.report))
    _emit(rep)
    _say(f"{law.name}: {'axioms hold' if rep['passed'] else 'AXIOM FAILURE'} on {len(tuples)} operand tuples")
    return OK if rep["passed"] else FAILED


def _load_coalgebra(path: str, cofree: bool, kind: str, k: int) -> co.Coalgebra:
    if cofree:
        return co.cofree(build(make_comonad(kind, k), _load(path)))
    return co.coalgebra_from_obj(_load_json(path))


def cmd_coalg_check(a) -> int:
    c = co.coalgebra_from_obj(_load_json(a.coalgebra))
    chk = co.check_coalgebra(c)
    out = chk.as_dict()
    if chk.passed:
        order = co.forest_order(c)
        out["forest"] = {"pairs": [list(p) for p in order.pairs()], "depth": order.depth, "is_path": order.is_total()}
    _emit(out)
    _say(f"coalgebra: {'valid' if chk.passed else 'INVALID: ' + str(chk.failure)}")
    return OK if chk.passed else FAILED


def _lift_law(op: str, kind: str, k: int):
    if kind != "ef":
        raise UsageError("lifting is implemented for the EF comonad")
    name = {"disjoint-union": "coproduct-ef", "product": "product-ef"}.get(op)
    if name is None:
        raise UsageError("lifting supports --op disjoint-union and --op product")
    return get_law(name, k)


def cmd_coalg_lift(a) -> int:
    law = _lift_law(a.op, a.kind, a.k)
    ops = [_load_coalgebra(p, a.cofree, a.kind, a.k) for p in a.coalgebras]
    lifted = co.lifted_op(law, ops)
    obj = co.coalgebra_to_obj(lifted.coalgebra)
    obj["inclusion"] = list(lifted.inclusion)
    _emit(obj, a.output)
    _say(f"lifted {a.op}: {lifted.coalgebra.size} elements")
    return OK


def cmd_coalg_bimorph(a) -> int:
    law = _lift_law(a.op, a.kind, a.k)
    alpha = _load_coalgebra(a.alpha, a.cofree, a.kind, a.k)
    betas = [_load_coalgebra(p, a.cofree, a.kind, a.k) for p in a.betas]
    rep = co.bimorph_correspondence(alpha, betas, law, seed=a.seed, samples=a.samples)
    _emit(rep.as_dict())
    _say(f"{rep.coalgebra_morphisms} coalgebra morphisms, {rep.bimorphisms} bimorphisms")
    return OK if rep.passed else FAILED


def cmd_coalg_span(a) -> int:
    A, B = _load(a.A), _load(a.B)
    res = co.span_search(A, B, a.k, a.max_z)
    _emit(res.as_dict())
    _say(f"span of size {res.size}" if res.found else "no span within the bound")
    return OK if res.found else FAILED


def cmd_cospectral(a) -> int:
    G, H = _load(a.G), _load(a.H)
    p, q = char_poly(G), char_poly(H)
    obj = {"cospectral": p == q, "G": list(p.coefficients), "H": list(q.coefficients)}
    if a.count_k:
        obj["count_equiv"] = count_equiv("pebble", G, H, a.count_k, wl=True).result
    if a.report:
        _emit(obj, a.report)
        from .plotting import spectrum_figure

        spectrum_figure(p.coefficients, q.coefficients, (Path(a.G).stem, Path(a.H).stem), _figure_path(a.report))
    _emit(obj)
    _say(f"{p} vs {q}")
    return OK if p == q else FAILED


def cmd_fvm(a) -> int:
    case = harness.FvmCase(
        operation=a.op,
        kind=a.kind,
        fragment=a.fragment,
        k_in=a.k,
        k_out=a.k_out,
        translation=a.translation,
        sizes=a.sizes,
        samples=a.samples,
        seed=a.seed,
        budget=a.budget,
        wl=a.wl,
    )
    report = harness.run_fvm(case, search_fallback=not a.no_search)
    text = report.to_json(timing=not a.no_timing)
    if a.report:
        _write(a.report, text)
        from .plotting import fvm_figure

        title = f"{a.op} / {a.kind} / {a.fragment} / k={a.k}"
        fvm_figure(report.trace, title, _figure_path(a.report))
    print(text)
    found = bool(report.violations)
    _say(f"{report.status}: {report.premise_hits} premise hits, {len(report.violations)} violations")
    if a.expect == "counterexample":
        return OK if found else FAILED
    if a.expect == "theorem":
        return OK if report.premise_hits and not found and not report.square_failures else FAILED
    return OK if report.passed else FAILED


def cmd_laws(a) -> int:
    out: dict[str, Any] = {
        "kleisli_laws": {name: get_law(name, a.k).describe() for name in sorted(LAW_REGISTRY)},
        "fvm_cases": [
            {"operation": o, "kind": k, "fragment": f, "translation": t, "status": r.status, "statement": r.statement}
            for (o, k, f, t), r in sorted(harness.REGISTRY.items(), key=lambda kv: tuple(str(x) for x in kv[0]))
        ],
    }
    code = OK
    if a.check:
        reports = []
        for name in sorted(LAW_REGISTRY):
            law = get_law(name, a.k)
            pool = operand_pool(law, a.max_size)
            tuples = [list(t) for t in itertools.product(pool, repeat=law.arity)]
            reports.append(check_kleisli_law(law, tuples, seed=a.seed, samples=a.samples).as_dict())
        out["checks"] = reports
        if not all(r["passed"] for r in reports):
            code = FAILED
        if a.report:
            from .plotting import law_figure

            law_figure(reports, _figure_path(a.report))
    _emit(out, a.report)
    if a.report:
        _emit({"written": a.report})
    _say(f"{len(out['kleisli_laws'])} Kleisli laws, {len(out['fvm_cases'])} registered cases")
    return code


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    p = argparse.ArgumentParser(prog="fvm", description="Game comonads, composition theorems and their checks.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="decide an equivalence or preservation relation")
    c.add_argument("--fragment", choices=FRAGMENTS, required=True)
    c.add_argument("--kind", choices=KINDS, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--wl", action="store_true", help="Weisfeiler-Leman backend for pebble counting")
    c.add_argument("--witness", metavar="OUT", help="write the strategy witness to this file")
    c.add_argument("A")
    c.add_argument("B")
    c.set_defaults(fn=cmd_check)

    c = sub.add_parser("compose", parents=[common], help="apply a composition operation")
    c.add_argument("--op", required=True, choices=harness.OPERATIONS)
    c.add_argument("--relation", default="E", help="relation used by merge")
    c.add_argument("--to-signature", help='reduct target, e.g. \'{"E": 2}\'')
    c.add_argument("-o", "--output")
    c.add_argument("structures", nargs="+")
    c.set_defaults(fn=cmd_compose)

    c = sub.add_parser("translate", parents=[common], help="apply a signature translation")
    c.add_argument("--to", required=True, choices=harness.TRANSLATIONS)
    c.add_argument("--silent", default="S", help="silent relation for the weak translation")
    c.add_argument("--silent-mode", default="drop", choices=st.SILENT_MODES)
    c.add_argument("-o", "--output")
    c.add_argument("structure")
    c.set_defaults(fn=cmd_translate)

    cm = sub.add_parser("comonad", help="materialize comonads and check their laws")
    cms = cm.add_subparsers(dest="action", required=True)
    for name, fn in (("build", cmd_comonad_build), ("laws", cmd_comonad_laws)):
        c = cms.add_parser(name, parents=[common])
        c.add_argument("--kind", required=True, choices=("ef", "pebble", "modal", "cos"))
        c.add_argument("--k", type=int)
        c.add_argument("--trunc", type=int)
        c.add_argument("--guard", type=int, default=50_000)
        c.set_defaults(fn=fn)
        if name == "build":
            c.add_argument("-o", "--output")
            c.add_argument("structure")
        else:
            c.add_argument("--max-size", type=int, default=2)
            c.add_argument("--samples", type=int, default=10)
            c.add_argument("--report")

    kp = sub.add_parser("kappa", help="evaluate and check Kleisli laws")
    kps = kp.add_subparsers(dest="action", required=True)
    c = kps.add_parser("apply", parents=[common])
    c.add_argument("--law", required=True, choices=sorted(LAW_REGISTRY))
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--trunc", type=int)
    c.add_argument("--element", required=True, help="source carrier element as a JSON value, or its index")
    c.add_argument("structures", nargs="+")
    c.set_defaults(fn=cmd_kappa_apply)
    c = kps.add_parser("check", parents=[common])
    c.add_argument("--law", required=True, choices=sorted(LAW_REGISTRY))
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--trunc", type=int)
    c.add_argument("--max-size", type=int, default=2)
    c.add_argument("--samples", type=int, default=2)
    c.add_argument("--fault", action="store_true", help="swap two outputs to exercise fault detection")
    c.add_argument("--report", help="also write the JSON here and a figure next to it")
    c.set_defaults(fn=cmd_kappa_check)

    cg = sub.add_parser("coalg", help="coalgebras, lifted operations and bimorphisms")
    cgs = cg.add_subparsers(dest="action", required=True)
    c = cgs.add_parser("check", parents=[common])
    c.add_argument("coalgebra")
    c.set_defaults(fn=cmd_coalg_check)
    for name, fn in (("lift", cmd_coalg_lift), ("bimorph-count", cmd_coalg_bimorph)):
        c = cgs.add_parser(name, parents=[common])
        c.add_argument("--op", required=True, choices=("disjoint-union", "product"))
        c.add_argument("--kind", default="ef", choices=("ef",))
        c.add_argument("--k", type=int, default=1)
        c.add_argument("--cofree", action="store_true", help="inputs are structures; use their cofree coalgebras")
        c.set_defaults(fn=fn)
        if name == "lift":
            c.add_argument("-o", "--output")
            c.add_argument("coalgebras", nargs=2)
        else:
            c.add_argument("--samples", type=int, default=10)
            c.add_argument("alpha")
            c.add_argument("betas", nargs=2)
    c = cgs.add_parser("span", parents=[common], help="bounded search for a span of open pathwise-embeddings")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--max-z", type=int, default=200)
    c.add_argument("A")
    c.add_argument("B")
    c.set_defaults(fn=cmd_coalg_span)

    c = sub.add_parser("cospectral", parents=[common], help="compare characteristic polynomials")
    c.add_argument("--count-k", type=int, help="also decide pebble counting equivalence at this k (WL backend)")
    c.add_argument("--report", help="also write the JSON here and a figure next to it")
    c.add_argument("G")
    c.add_argument("H")
    c.set_defaults(fn=cmd_cospectral)

    c = sub.add_parser("fvm", parents=[common], help="run a composition-theorem property case")
    c.add_argument("--op", required=True, choices=harness.OPERATIONS)
    c.add_argument("--kind", required=True, choices=KINDS)
    c.add_argument("--fragment", required=True, choices=FRAGMENTS)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--k-out", type=int)
    c.add_argument("--translation", choices=harness.TRANSLATIONS)
    c.add_argument("--sizes", type=int)
    c.add_argument("--samples", type=int, default=200, help="premise hits to collect")
    c.add_argument("--budget", type=int, help="maximum attempts")
    c.add_argument("--wl", action="store_true")
    c.add_argument("--expect", choices=("theorem", "counterexample"))
    c.add_argument("--no-search", action="store_true", help="skip the exhaustive search for expected counterexamples")
    c.add_argument("--no-timing", action="store_true", help="omit elapsed time for byte-identical output")
    c.add_argument("--report", help="also write the JSON here and a figure next to it")
    c.set_defaults(fn=cmd_fvm)

    c = sub.add_parser("laws", parents=[common], help="list registered laws and cases")
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--check", action="store_true", help="run the axiom check on every Kleisli law")
    c.add_argument("--max-size", type=int, default=1)
    c.add_argument("--samples", type=int, default=1)
    c.add_argument("--report")
    c.set_defaults(fn=cmd_laws)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (UsageError, StructureError, OSError) as exc:
        _say(f"error: {exc}")
        return USAGE


def cli(argv: Sequence[str] | None = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
