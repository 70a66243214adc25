"""Command dispatch for the ``cfl`` entry point.

Eleven analyses over one system file each.  Exit codes: 0 when the
analysis reached a verdict (pass or fail alike), 2 when it is undecided
(a best-effort search came back empty), 1 on errors.

Chain bookkeeping differs between the reduction commands, matching how
the reductions are posed:

  * ``reduce --drop N`` freezes chain N along its curve and reports the
    system that remains;
  * ``necessity --drop N`` and ``sufficiency --chain N`` study the
    codimension-one reduction that keeps chain N live, so every OTHER
    chain is frozen (curve names come from the file's reduce blocks,
    falling back to f<j>).
"""

import argparse
import sys
import time as _time

from ..cascade import (
    CascadeError,
    necessity_check,
    reconstruct_fiber,
    reduce_along_curves,
    sufficiency_search,
    sufficiency_verify,
    truncated_euler,
)
from ..flags import analyze_flag
from ..geomcore import GeomError
from ..goursat import GoursatError, esfl_check, procedure_contact, recognize, verify_contact_coordinates
from ..symexpr import ProbeConfig, expr_of_nf, normalize, set_default_probe
from ..symexpr import NormalForm, Poly
from ..symmetry import SymmetryError, check_admissible, quotient_construct, quotient_verify, relative_goursat
from .dsl import DslError, SystemFile, load
from .report import DECIDED, UNDECIDED, Report, emit_machine, emit_text, fmt_bool, fmt_kappa, fmt_rdt

COMMANDS = (
    "flags",
    "goursat",
    "esfl",
    "symmetry",
    "quotient",
    "subconnection",
    "reduce",
    "necessity",
    "sufficiency",
    "euler",
    "reconstruct",
)


class CliError(Exception):
    pass


def _file_distribution(sf: SystemFile):
    if sf.ode or sf.pfaff:
        return sf.distribution()
    return sf.sub_connection().system().distribution()


def _file_control_system(sf: SystemFile):
    if sf.ode:
        return sf.control_system()
    if sf.subconn is not None:
        return sf.sub_connection().system()
    raise CliError("this analysis needs an ode or subconnection block")


def _side_condition(e) -> str:
    """Nonvanishing requirement on the numerator, with strictly positive
    exponential factors divided out and the leading coefficient scaled to 1."""
    num = normalize(e).nf.num
    for k in sorted(num.kernels(), key=lambda k: k.sort_key):
        if getattr(k, "name", None) != "exp":
            continue
        low = min(dict(m).get(k, 0) for m, _ in num.terms.items())
        for _ in range(low):
            num = num.exact_div(Poly.kernel(k))
    num = num * Poly.const(1 / num.leading()[1])
    return f"{expr_of_nf(NormalForm.make(num, Poly.const(1)))} != 0"


def _retained_reduction(sf: SystemFile, keep: int):
    sub = sf.sub_connection()
    if keep not in sub.jets.orders:
        raise CliError(f"no chain {keep} in this subconnection")
    dropped = {j: sf.curve_for(j) for j in sub.jets.orders if j != keep}
    if not dropped:
        raise CliError("nothing to freeze: the subconnection has a single chain")
    return sub, reduce_along_curves(sub, dropped)


def _fmt_frozen(dropped: dict) -> str:
    return ",".join(f"{j}:{name}" for j, name in sorted(dropped.items()))


# -- commands ----------------------------------------------------------------


def _cmd_flags(sf, opts):
    dist = _file_distribution(sf)
    analysis = analyze_flag(dist)
    rdt = analysis.rdt
    items = [
        ("dim", dist.chart.dim),
        ("states", len(dist.chart.states)),
        ("controls", len(dist.chart.controls)),
        ("rdt", fmt_rdt(rdt)),
        ("depth", analysis.depth),
        ("cauchy_trivial", fmt_bool(rdt[0][1] == 0)),
    ]
    return items, DECIDED


def _cmd_goursat(sf, opts):
    report = recognize(_file_distribution(sf))
    items = [("rdt", fmt_rdt(report.analysis.rdt)), ("goursat", fmt_bool(report.is_goursat))]
    if report.is_goursat:
        items.append(("kappa", fmt_kappa(report.kappa)))
    for v in report.violations:
        items.append(("violation", v))
    return items, DECIDED


def _cmd_esfl(sf, opts):
    cs = _file_control_system(sf)
    rep = esfl_check(cs)
    items = [("rdt", fmt_rdt(rep.goursat.analysis.rdt)), ("esfl", fmt_bool(rep.verdict))]
    if rep.goursat.is_goursat:
        items.insert(1, ("kappa", fmt_kappa(rep.goursat.kappa)))
    for reason in rep.reasons:
        items.append(("reason", reason))
    if rep.verdict:
        try:
            coords = procedure_contact(cs, rep.goursat, sf.hints())
        except GoursatError as exc:
            items.append(("contact", f"unavailable: {exc}"))
        else:
            items.append(("procedure", coords.procedure))
            items.append(("x", coords.x))
            for i, chain in enumerate(coords.chains, start=1):
                items.append((f"chain{i}_order", chain.order))
                for l, v in enumerate(chain.values):
                    items.append((f"chain{i}_{l}", v))
            ok, problems = verify_contact_coordinates(cs, coords)
            items.append(("contact_verified", fmt_bool(ok)))
            for p in problems:
                items.append(("contact_problem", p))
    return items, DECIDED


def _cmd_symmetry(sf, opts):
    cs = sf.control_system()
    fields = sf.symmetry_fields()
    if not fields:
        raise CliError("file declares no symmetry fields")
    rep = check_admissible(cs, fields)
    items = [("fields", ",".join(name for name, _ in sf.symmetries))]
    for (name, _), ok in zip(sf.symmetries, rep.symmetry_ok):
        items.append((f"symmetry_{name}", fmt_bool(ok)))
    items += [
        ("fixes_time", fmt_bool(all(rep.fixes_time))),
        ("closes", fmt_bool(rep.closes)),
        ("transverse", fmt_bool(rep.transverse)),
        ("locally_free", fmt_bool(rep.locally_free)),
        ("admissible", fmt_bool(rep.admissible)),
    ]
    for p in rep.problems:
        items.append(("problem", p))
    return items, DECIDED


def _cmd_quotient(sf, opts):
    cs = sf.control_system()
    fields = sf.symmetry_fields()
    if not fields:
        raise CliError("file declares no symmetry fields")
    if not sf.invariants:
        raise CliError("file declares no invariant block")
    data = quotient_construct(cs, fields, sf.invariants, dict(sf.crosssection))
    ok, problems = quotient_verify(cs, data)
    qs = data.system
    items = [("invariants", ",".join(qs.chart.states + qs.chart.controls))]
    for s in qs.chart.states:
        items.append((f"rhs_{s}", qs.rhs[s]))
    items.append(("verified", fmt_bool(ok)))
    for p in problems:
        items.append(("problem", p))
    rel = relative_goursat(cs, fields)
    items.append(("relative_rdt", fmt_rdt(rel.analysis.rdt)))
    items.append(("relative_goursat", fmt_bool(rel.is_goursat)))
    if rel.is_goursat:
        items.append(("relative_kappa", fmt_kappa(rel.kappa)))
    qrep = esfl_check(qs)
    items.append(("esfl", fmt_bool(qrep.verdict)))
    if qrep.goursat.is_goursat:
        items.append(("kappa", fmt_kappa(qrep.goursat.kappa)))
    for reason in qrep.reasons:
        items.append(("reason", reason))
    return items, DECIDED


def _cmd_subconnection(sf, opts):
    sub = sf.sub_connection()
    rel = sub.relative_recognition()
    items = [
        ("dim", sub.jets.chart.dim),
        ("r", sub.r),
        ("rdt", fmt_rdt(rel.analysis.rdt)),
        ("goursat", fmt_bool(rel.is_goursat)),
    ]
    if rel.is_goursat:
        items.append(("kappa", fmt_kappa(rel.kappa)))
    for v in rel.violations:
        items.append(("violation", v))
    return items, DECIDED


def _cmd_reduce(sf, opts):
    if opts.drop is None:
        raise CliError("reduce needs --drop N")
    sub = sf.sub_connection()
    if opts.drop not in sub.jets.orders:
        raise CliError(f"no chain {opts.drop} in this subconnection")
    fname = opts.with_name or sf.curve_for(opts.drop)
    red = reduce_along_curves(sub, {opts.drop: fname})
    items = [
        ("drop", opts.drop),
        ("curve", fname),
        ("codimension", red.spec.codimension),
    ]
    for b, q in enumerate(red.p_bar, start=1):
        items.append((f"pbar{b}", q))
    rep = esfl_check(red.system)
    items.append(("rdt", fmt_rdt(rep.goursat.analysis.rdt)))
    if rep.goursat.is_goursat:
        items.append(("kappa", fmt_kappa(rep.goursat.kappa)))
    items.append(("esfl", fmt_bool(rep.verdict)))
    for reason in rep.reasons:
        items.append(("reason", reason))
    return items, DECIDED


def _cmd_necessity(sf, opts):
    if opts.drop is None:
        raise CliError("necessity needs --drop N (the chain kept live)")
    sub, red = _retained_reduction(sf, opts.drop)
    rep = necessity_check(red)
    items = [
        ("retain", opts.drop),
        ("frozen", _fmt_frozen(red.spec.dropped)),
        ("pbar", red.p_bar[0]),
        ("euler", rep.euler),
    ]
    for name in rep.offenders:
        items.append(("offender", name))
    items.append(("degenerate", fmt_bool(rep.degenerate)))
    items.append(("necessity", "PASS" if rep.verdict else "FAIL"))
    items.append(("note", "necessary condition only: PASS does not certify linearizability"))
    if rep.verdict:
        items.append(("side_condition", _side_condition(rep.euler)))
    return items, DECIDED


def _cmd_sufficiency(sf, opts):
    if opts.chain is None:
        raise CliError("sufficiency needs --chain N (the chain kept live)")
    sub = sf.sub_connection()
    if opts.chain not in sub.jets.orders:
        raise CliError(f"no chain {opts.chain} in this subconnection")
    dec = sufficiency_search(sub, opts.chain)
    items = [("chain", opts.chain)]
    if dec is None:
        items.append(("sufficiency", "INCONCLUSIVE"))
        items.append(("note", "no total-derivative presentation found; absence is not refutation"))
        return items, UNDECIDED
    for l, a in dec.parts:
        items.append((f"A{l}", a))
    ok, problems = sufficiency_verify(sub, opts.chain, dec.parts)
    items.append(("verified", fmt_bool(ok)))
    for p in problems:
        items.append(("problem", p))
    items.append(("sufficiency", "PASS"))
    if len(sub.jets.orders) > 1:
        _, red = _retained_reduction(sf, opts.chain)
        rep = necessity_check(red)
        if rep.verdict:
            items.append(("side_condition", _side_condition(rep.euler)))
    return items, DECIDED


def _cmd_euler(sf, opts):
    if opts.chain is None:
        raise CliError("euler needs --chain N (the chain kept live)")
    sub, red = _retained_reduction(sf, opts.chain)
    sigma = red.jets.orders[opts.chain]
    e = truncated_euler(red.jets, opts.chain, sigma, red.p_bar[0])
    items = [
        ("chain", opts.chain),
        ("frozen", _fmt_frozen(red.spec.dropped)),
        ("pbar", red.p_bar[0]),
        ("order", sigma),
        ("euler", e),
    ]
    return items, DECIDED


def _cmd_reconstruct(sf, opts):
    sub = sf.sub_connection()
    missing = [i for i in sub.jets.orders if i not in sf.flatfns]
    if missing:
        raise CliError(f"missing flatfn for chains {missing}")
    if sf.grid is None:
        raise CliError("missing grid line")
    if len(sf.eps0) != sub.r:
        raise CliError(f"eps0 needs {sub.r} entries")
    t0, t1, steps = sf.grid
    res = reconstruct_fiber(sub, dict(sf.flatfns), sf.eps0, float(t0), float(t1), steps)
    items = []
    for i in sorted(sf.flatfns):
        items.append((f"flatfn_{i}", normalize(sf.flatfns[i])))
    items += [("t0", float(t0)), ("t1", float(t1)), ("steps", steps)]
    for name, v in zip(sub.jets.fiber, res.final):
        items.append((f"final_{name}", repr(v)))
    items.append(("residual", repr(res.residual)))
    return items, DECIDED


_DISPATCH = {
    "flags": _cmd_flags,
    "goursat": _cmd_goursat,
    "esfl": _cmd_esfl,
    "symmetry": _cmd_symmetry,
    "quotient": _cmd_quotient,
    "subconnection": _cmd_subconnection,
    "reduce": _cmd_reduce,
    "necessity": _cmd_necessity,
    "sufficiency": _cmd_sufficiency,
    "euler": _cmd_euler,
    "reconstruct": _cmd_reconstruct,
}

_ERRORS = (CliError, DslError, CascadeError, GeomError, GoursatError, SymmetryError)


def run(command: str, sf: SystemFile, opts) -> Report:
    if command not in _DISPATCH:
        raise CliError(f"unknown command {command!r}")
    items, status = _DISPATCH[command](sf, opts)
    return Report(
        command=command,
        system=sf.name,
        seed=opts.seed,
        items=tuple((k, str(v)) for k, v in items),
        status=status,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfl",
        description="linearizability analyses for control systems and contact sub-connections",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "flags": "derived flag and refined derived type",
        "goursat": "Goursat bundle recognition",
        "esfl": "static feedback linearization test, with contact coordinates when it passes",
        "symmetry": "admissibility screen for the file's symmetry fields",
        "quotient": "construct and verify the symmetry quotient",
        "subconnection": "recognition of the file's contact sub-connection",
        "reduce": "freeze chain N (--drop N) along its curve and analyze the rest",
        "necessity": "Euler-operator necessity test on the reduction keeping chain N live (--drop N)",
        "sufficiency": "total-derivative decomposition search keeping chain N live (--chain N)",
        "euler": "truncated Euler operator of the frozen p on chain N (--chain N)",
        "reconstruct": "integrate the fiber along the file's flat functions",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("file")
        p.add_argument("--drop", type=int, default=None, metavar="N")
        p.add_argument("--with", dest="with_name", default=None, metavar="NAME")
        p.add_argument("--chain", type=int, default=None, metavar="N")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--probes", type=int, default=5)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--format", choices=("text", "machine"), default="text")
        p.add_argument("--out", default=None, metavar="PATH")
    return parser


def main(argv=None) -> int:
    opts = _build_parser().parse_args(argv)
    set_default_probe(ProbeConfig(seed=opts.seed, points=opts.probes, tol=opts.tol))
    started = _time.monotonic()
    try:
        sf = load(opts.file)
        rep = run(opts.command, sf, opts)
    except _ERRORS as exc:
        print(f"cfl: error: {exc}", file=sys.stderr)
        return 1
    if opts.format == "machine":
        text = emit_machine(rep)
    else:
        text = emit_text(rep, elapsed=_time.monotonic() - started)
    if opts.out:
        with open(opts.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if rep.status == DECIDED else 2


if __name__ == "__main__":
    raise SystemExit(main())
