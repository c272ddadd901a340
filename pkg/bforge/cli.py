import functools
import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import click

from . import costs, fixtures
from .classical import (
    ReversibleMap,
    classical_schmidt_rank,
    synthesize,
    table_from_text,
)
from .entpower import fixture_inputs, maximize, output_entanglement
from .enums import EntCase, Mode, OutputFormat, ProtocolId, Regime, Side
from .errors import BforgeError, InputError, InvalidInput, VerificationFailed
from .groups import pauli_group, trivial_group
from .linalg import BipartiteOp, operator_schmidt, schmidt_rank
from .locc import ProtocolTrace, verify_channel
from .protocols import (
    run_controlled,
    run_group,
    run_local,
    run_permutation_loose,
    run_permutation_types,
    run_rank3_group,
    run_teleport,
    run_two_level,
)
from .schemas import (
    AnalysisOut,
    CostReportOut,
    EntPowerOut,
    SynthesisOut,
    TraceOut,
    dump_operator,
    load_operator,
)
from .structure import (
    block_profile,
    detect_controlled,
    direct_sum_decompose,
    loose_type_partition,
    partial_transpose_check,
    permutation_type_partitions,
    rank3_standard_form,
    traits,
)
from .util import DEFAULT_TOL, EntPowerConfig, SimConfig, Tolerances, write_json

EXIT_VERIFY = 2
EXIT_INPUT = 3

SIM_PROTOCOLS = [
    str(p) for p in ProtocolId if p not in (ProtocolId.TWO_LEVEL_MIXED, ProtocolId.NONE)
]
GROUPS = ["pauli", "trivial", "rank3"]


def pos_float(ctx, param, val: Optional[float]) -> Optional[float]:
    if val is not None and not val > 0:
        raise click.BadParameter("value must be positive", ctx, param)
    return val


def pos_int(ctx, param, val: Optional[int]) -> Optional[int]:
    if val is not None and val < 1:
        raise click.BadParameter("value must be positive", ctx, param)
    return val


def str2params(ctx, param, val_list: Tuple[str, ...]) -> Dict[str, str]:
    params = {}
    for val in val_list:
        key, sep, value = val.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected key=value, got {val}", ctx, param)
        params[key] = value
    return params


def str2side(ctx, param, val: Optional[str]) -> Optional[Side]:
    if val is None or isinstance(val, Side):
        return val
    try:
        return Side[val.upper()]
    except KeyError:
        raise click.BadParameter(f"Invalid side: {val}", ctx, param)


def guarded(func: Callable) -> Callable:
    """Map library errors onto the exit code contract"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except VerificationFailed as e:
            click.echo(f"verification failed: {e}", err=True)
            ctx.exit(EXIT_VERIFY)
        except InvalidInput as e:
            click.echo(f"invalid input: {e}", err=True)
            ctx.exit(EXIT_INPUT)

    return wrapper


def emit(ctx: click.Context, payload: dict, text: str) -> None:
    out = ctx.obj["out"]
    if ctx.obj["format"] is OutputFormat.JSON:
        click.echo(write_json(payload, out))
        return
    if out is not None:
        Path(out).write_text(text + "\n")
    click.echo(text)


def operator_from(
    op_file: Optional[str], fixture_name: Optional[str], params: Dict[str, str]
) -> BipartiteOp:
    if (op_file is None) == (fixture_name is None):
        raise InputError("operator", "give exactly one of an operator file or --fixture")
    if op_file is not None:
        return load_operator(op_file)
    return fixtures.fixture(fixture_name, **params)


def operator_options(func: Callable) -> Callable:
    func = click.option(
        "--param",
        "-p",
        "params",
        multiple=True,
        callback=str2params,
        help="fixture parameter as key=value",
    )(func)
    func = click.option("--fixture", "fixture_name", help="use a named fixture")(func)
    func = click.argument("op_file", required=False, type=click.Path(exists=True))(func)
    return func


@click.group("bipartite operator analysis")
@click.option("--tol", type=float, callback=pos_float, help="override every cutoff tolerance")
@click.option("--seed", type=int, default=0, show_default=True, help="seed for sampling")
@click.option("--out", type=click.Path(), help="also write the result to this file")
@click.option(
    "--format",
    "fmt",
    type=click.Choice([str(f) for f in OutputFormat]),
    default=str(OutputFormat.JSON),
    show_default=True,
)
@click.option("--verbose", "-v", "log_level", flag_value=logging.INFO, help="set log level to info")
@click.option("--debug", "-D", "log_level", flag_value=logging.DEBUG, help="set log level to debug")
@click.pass_context
def main(
    ctx: click.Context,
    tol: Optional[float],
    seed: int,
    out: Optional[str],
    fmt: str,
    log_level: int,
):
    if log_level:
        logging.getLogger("root").setLevel(log_level)
        logging.debug(f"params: {json.dumps({k: repr(v) for k, v in ctx.params.items()})}")
    ctx.ensure_object(dict)
    ctx.obj.update(tol=DEFAULT_TOL.scaled(tol), seed=seed, out=out, format=OutputFormat(fmt))


def _coefficients(u: BipartiteOp, tol: float) -> List[float]:
    return [float(c) for c in operator_schmidt(u, tol).coefficients]


@main.command("analyze")
@operator_options
@click.pass_context
@guarded
def analyze(ctx: click.Context, op_file, fixture_name, params):
    """Schmidt rank, block structure and cost recommendation of an operator"""
    tol: Tolerances = ctx.obj["tol"]
    u = operator_from(op_file, fixture_name, params)
    rank = schmidt_rank(u, tol.rank)
    out = {
        "dA": u.dA,
        "dB": u.dB,
        "schmidt_rank": rank,
        "coefficients": _coefficients(u, tol.rank),
        "traits": str(traits(u, tol.rank)),
        "unitary": u.is_unitary(tol.unitary),
    }
    notes = []
    if out["unitary"]:
        profile = block_profile(u, tol.rank)
        out["nonzero_blocks"] = profile.nonzero_block_grid.tolist()
        out["controlled_from"] = [
            str(s) for s in Side if detect_controlled(u, s, tol.rank) is not None
        ]
        out["direct_sum_a"] = [list(i) for i, _ in direct_sum_decompose(u, Side.A, tol.rank)]
        out["direct_sum_b"] = [list(i) for i, _ in direct_sum_decompose(u, Side.B, tol.rank)]
        if profile.is_permutation:
            report = permutation_type_partitions(u, tol.rank)
            out["input_types_a"] = report.input_a.n_classes
            out["relative_output_types_a"] = report.relative_output_a
            out["output_types_b"] = report.output_b.n_classes
            out["loose_types"] = tuple(
                loose_type_partition(u, s, tol.rank).n_classes for s in (Side.A, Side.B)
            )
        if rank == 3 and "A" in out["controlled_from"]:
            try:
                notes.append(f"rank-3 standard form: {rank3_standard_form(u, tol).kind}")
            except BforgeError as e:
                notes.append(f"rank-3 standard form not found: {e}")
        out["partial_transpose_holds"] = partial_transpose_check(u, tol=tol.rank).holds
        out["recommendation"] = costs.recommend(u, tol).as_dict()
    else:
        notes.append("operator is not unitary; structure analysis skipped")
    out["notes"] = notes
    result = AnalysisOut(**out)

    lines = [
        f"dims {u.dA} x {u.dB}, Schmidt rank {rank}",
        f"traits: {result.traits}",
    ]
    if result.controlled_from:
        lines.append(f"controlled from: {', '.join(result.controlled_from)}")
    if result.input_types_a is not None:
        lines.append(
            f"types: {result.input_types_a} input A, {result.relative_output_types_a} relative"
            f" output A, {result.output_types_b} output B, loose {result.loose_types}"
        )
    if result.recommendation is not None:
        rec = result.recommendation
        lines.append(f"recommended: {rec.applicable_protocol} with {rec.ebits:.6g} ebits")
    lines.extend(notes)
    emit(ctx, result.dict(), "\n".join(lines))


def _cost_text(report: costs.CostReport) -> str:
    lines = [
        f"{report.ebits:.6g} ebits, {report.cbits:.6g} cbits"
        f" via {report.source} [{report.protocol_name}] = {report.expr}"
    ]
    for alt in report.alternatives[1:]:
        lines.append(f"  alt {alt.source}: {alt.ebits:.6g} ebits = {alt.expr}")
    lines.extend(report.notes)
    return "\n".join(lines)


@main.command("bound")
@click.option("--controlled", type=int, callback=pos_int, help="number of controlled terms")
@click.option("--rank3", type=(int, int), default=None, help="dA dB of a rank-3 controlled unitary")
@click.option("--permutation-rank", type=int, callback=pos_int, help="Schmidt rank")
@click.option("--classical-rank", type=int, callback=pos_int, help="Schmidt rank of a map")
@click.option(
    "--regime",
    type=click.Choice([str(r) for r in Regime]),
    default=str(Regime.RESTORE),
    show_default=True,
)
@operator_options
@click.pass_context
@guarded
def bound(
    ctx: click.Context,
    controlled: Optional[int],
    rank3: Optional[Tuple[int, int]],
    permutation_rank: Optional[int],
    classical_rank: Optional[int],
    regime: str,
    op_file,
    fixture_name,
    params,
):
    """Closed-form cost bounds, or the cheapest construction for an operator"""
    given = [controlled, rank3, permutation_rank, classical_rank, op_file or fixture_name]
    if sum(g is not None for g in given) != 1:
        raise InputError("bound", "choose exactly one kind of bound")
    if classical_rank is not None:
        restore = Regime(regime) is Regime.RESTORE
        count = costs.bound_classical(classical_rank, restore)
        payload = {"schmidt_rank": classical_rank, "regime": regime, "nonlocal_cnots": count}
        emit(ctx, payload, f"{count} nonlocal CNOTs ({regime})")
        return
    if controlled is not None:
        report = costs.bound_controlled(controlled)
    elif rank3 is not None:
        report = costs.bound_rank3(*rank3)
    elif permutation_rank is not None:
        report = costs.bound_permutation(permutation_rank)
    else:
        report = costs.recommend(operator_from(op_file, fixture_name, params), ctx.obj["tol"])
    emit(ctx, CostReportOut(**report.as_dict()).dict(), _cost_text(report))


def _run_protocol(
    protocol: ProtocolId,
    u: BipartiteOp,
    side: Optional[Side],
    n_terms: Optional[int],
    group: str,
    mixed: bool,
    config: SimConfig,
) -> ProtocolTrace:
    if protocol is ProtocolId.CT:
        return run_controlled(u, side=side, config=config)
    if protocol is ProtocolId.CT_EXT:
        if n_terms is None:
            raise InputError("simulate", "ct-ext needs --n-terms")
        return run_controlled(u, side=side, n_terms=n_terms, config=config)
    if protocol is ProtocolId.TWO_LEVEL:
        return run_two_level(u, mixed_sides=mixed, config=config)
    if protocol is ProtocolId.GROUP:
        if group == "rank3":
            return run_rank3_group(u, config=config)
        side = side or Side.A
        d = u.dA if side is Side.A else u.dB
        rep = pauli_group(d) if group == "pauli" else trivial_group(d)
        return run_group(u, rep, side, config=config)
    if protocol is ProtocolId.PTL2:
        return run_permutation_types(u, config=config)
    if protocol is ProtocolId.PTL3:
        return run_permutation_loose(u, config=config)
    if protocol is ProtocolId.TELEPORT:
        return run_teleport(u, config=config)
    return run_local(u, config=config)


@main.command("simulate")
@click.option("--protocol", type=click.Choice(SIM_PROTOCOLS), required=True)
@click.option("--side", callback=str2side, help="controlling side, A or B")
@click.option("--n-terms", type=int, callback=pos_int, help="terms for ct-ext")
@click.option("--group", type=click.Choice(GROUPS), default="pauli", show_default=True)
@click.option("--mixed", is_flag=True, help="two-level pieces may be controlled from either side")
@click.option(
    "--mode",
    type=click.Choice([str(m) for m in Mode]),
    default=str(Mode.ENUMERATE),
    show_default=True,
)
@click.option("--verify", is_flag=True, help="exit 2 unless every branch implements the operator")
@operator_options
@click.pass_context
@guarded
def simulate(
    ctx: click.Context,
    protocol: str,
    side: Optional[Side],
    n_terms: Optional[int],
    group: str,
    mixed: bool,
    mode: str,
    verify: bool,
    op_file,
    fixture_name,
    params,
):
    """Run one LOCC protocol exactly and report its ledger"""
    tol: Tolerances = ctx.obj["tol"]
    u = operator_from(op_file, fixture_name, params)
    config = SimConfig(mode=Mode(mode), seed=ctx.obj["seed"])
    trace = _run_protocol(ProtocolId(protocol), u, side, n_terms, group, mixed, config)
    check = verify_channel(trace, u, tol.channel)
    payload = trace.as_dict()
    payload["events"] = [
        {"kind": e.kind, "party": None if e.party is None else str(e.party), "detail": e.detail}
        for e in trace.events
    ]
    payload["check"] = check.as_dict()
    lines = [
        f"{trace.protocol}: {trace.ebits:.6g} ebits, {trace.cbits:.6g} cbits,"
        f" {len(trace.branches)} branch(es)",
        f"max Choi distance {check.max_distance:.3e}, ancilla residual"
        f" {check.ancilla_residual:.3e}: {'pass' if check.passed else 'FAIL'}",
    ]
    emit(ctx, TraceOut(**payload).dict(), "\n".join(lines))
    if verify and not check.passed:
        click.echo("verification failed: channel mismatch", err=True)
        ctx.exit(EXIT_VERIFY)


@main.command("entpower")
@click.option("--restarts", type=int, callback=pos_int, default=64, show_default=True)
@click.option("--max-iter", type=int, callback=pos_int, default=2000, show_default=True)
@click.option("--ancilla-dims", type=(int, int), default=None, help="ancilla dims on A and B")
@click.option(
    "--case",
    type=click.Choice([str(c) for c in EntCase]),
    help="evaluate the closed-form input of a family instead of optimizing",
)
@operator_options
@click.pass_context
@guarded
def entpower(
    ctx: click.Context,
    restarts: int,
    max_iter: int,
    ancilla_dims: Optional[Tuple[int, int]],
    case: Optional[str],
    op_file,
    fixture_name,
    params,
):
    """Largest entanglement the operator creates from product inputs"""
    u = operator_from(op_file, fixture_name, params)
    if case is not None:
        case_params = {k: int(v) for k, v in params.items()} if fixture_name else {}
        ent_case = EntCase(case)
        inp = fixture_inputs(ent_case, u if ent_case is EntCase.III else None, **case_params)
        value = output_entanglement(u, inp)
        payload = {
            "best_value": value,
            "restarts": 0,
            "converged": True,
            "history": [value],
            **inp.as_dict(),
        }
    else:
        config = EntPowerConfig(
            restarts=restarts, max_iter=max_iter, seed=ctx.obj["seed"], ancilla_dims=ancilla_dims
        )
        result = maximize(u, config)
        payload = {
            "best_value": result.best_value,
            "restarts": result.restarts,
            "converged": result.converged,
            "history": list(result.history),
            **result.best_input.as_dict(),
        }
    model = EntPowerOut(**payload)
    emit(ctx, model.dict(), f"{model.best_value:.9f} ebits (converged: {model.converged})")


BUILTIN_MAPS: Dict[str, Tuple[int, int, Callable[[int, int], Tuple[int, int]]]] = {
    "identity": (1, 1, lambda a, b: (a, b)),
    "cnot": (1, 1, lambda a, b: (a, a ^ b)),
    "dcnot": (1, 1, lambda a, b: (b, a ^ b)),
    "swap": (1, 1, lambda a, b: (b, a)),
    "toffoli": (2, 1, lambda a, b: (a, b ^ (a == 3))),
}


@main.command("synthesize")
@click.argument("table_file", required=False, type=click.Path(exists=True))
@click.option("--n-a", type=int, help="bits held by A")
@click.option("--n-b", type=int, help="bits held by B")
@click.option("--builtin", type=click.Choice(sorted(BUILTIN_MAPS)), help="use a built-in map")
@click.option(
    "--regime",
    type=click.Choice([str(r) for r in Regime]),
    default=str(Regime.RESTORE),
    show_default=True,
)
@click.pass_context
@guarded
def synthesize_cmd(
    ctx: click.Context,
    table_file: Optional[str],
    n_a: Optional[int],
    n_b: Optional[int],
    builtin: Optional[str],
    regime: str,
):
    """Local reversible gates plus nonlocal CNOTs for a reversible map"""
    if (table_file is None) == (builtin is None):
        raise InputError("synthesize", "give exactly one of a truth table file or --builtin")
    if builtin is not None:
        m = ReversibleMap.from_function(*BUILTIN_MAPS[builtin])
    else:
        if n_a is None or n_b is None:
            raise InputError("synthesize", "a truth table needs --n-a and --n-b")
        m = table_from_text(Path(table_file).read_text(), n_a, n_b)
    tol: Tolerances = ctx.obj["tol"]
    s = synthesize(m, Regime(regime), tol.rank)
    rank = classical_schmidt_rank(m, tol.rank)
    payload = s.as_dict()
    payload["schmidt_rank"] = rank
    payload["bound"] = costs.bound_classical(rank, s.regime is Regime.RESTORE)
    model = SynthesisOut(**payload)
    emit(
        ctx,
        model.dict(),
        f"{model.nonlocal_count} nonlocal CNOTs ({model.construction}, bound {model.bound})",
    )


def _extra_params(args: List[str]) -> Dict[str, str]:
    params = {}
    it = iter(args)
    for arg in it:
        if not arg.startswith("--"):
            raise InputError("fixtures", f"unexpected argument {arg}")
        key, sep, value = arg[2:].partition("=")
        if not sep:
            value = next(it, None)
            if value is None:
                raise InputError("fixtures", f"missing value for --{key}")
        params[key.replace("-", "_")] = value
    return params


@main.command(
    "fixtures", context_settings={"ignore_unknown_options": True, "allow_extra_args": True}
)
@click.option("--name", help="fixture to build; lists the fixtures when omitted")
@click.pass_context
@guarded
def fixtures_cmd(ctx: click.Context, name: Optional[str]):
    """Build a named fixture; its parameters follow as --key value"""
    if name is None:
        payload = {
            key: {"params": sorted(info.params), "doc": info.doc}
            for key, info in sorted(fixtures.FIXTURES.items())
        }
        text = "\n".join(
            f"{key}({', '.join(sorted(info.params))}): {info.doc}"
            for key, info in sorted(fixtures.FIXTURES.items())
        )
        emit(ctx, payload, text)
        return
    u = fixtures.fixture(name, **_extra_params(ctx.args))
    text = f"{name}: {u.dA} x {u.dB}, Schmidt rank {schmidt_rank(u)}"
    emit(ctx, dump_operator(u), text)


class Check:
    def __init__(self, name: str, expected, actual, ok: bool) -> None:
        self.name = name
        self.expected = expected
        self.actual = actual
        self.ok = ok

    def as_dict(self) -> dict:
        return {"name": self.name, "expected": self.expected, "actual": self.actual, "ok": self.ok}


def _close(name: str, expected: float, actual: float, tol: float = 1e-9) -> Check:
    return Check(name, expected, actual, abs(expected - actual) <= tol)


def _protocol_check(name: str, trace: ProtocolTrace, u: BipartiteOp, ebits: float) -> Check:
    check = verify_channel(trace, u)
    ok = check.passed and abs(trace.ebits - ebits) <= 1e-9
    return Check(name, ebits, trace.ebits, ok)


def acceptance_checks() -> List[Check]:
    checks = []
    for name, want in [("swap", 4), ("dcnot", 4), ("cnot", 2), ("example4", 4)]:
        got = schmidt_rank(fixtures.fixture(name))
        checks.append(Check(f"schmidt_rank {name}", want, got, got == want))

    cnot = fixtures.cnot()
    checks.append(_protocol_check("ct cnot", run_controlled(cnot), cnot, 1.0))
    checks.append(
        _protocol_check("ct-ext cnot", run_controlled(cnot, n_terms=3), cnot, math.log2(3))
    )
    u = fixtures.uketbra11()
    checks.append(_protocol_check("two-level uketbra11", run_two_level(u), u, 2.0))
    checks.append(
        _protocol_check("group cnot pauli", run_group(cnot, pauli_group(2), Side.A), cnot, 2.0)
    )
    u = fixtures.example4()
    checks.append(_protocol_check("ptl2 example4", run_permutation_types(u), u, math.log2(12)))
    u = fixtures.swap()
    trace = run_permutation_loose(u)
    ok = verify_channel(trace, u).passed and trace.ebits <= 8 * schmidt_rank(u) - 8
    checks.append(Check("ptl3 swap", 8 * 4 - 8, trace.ebits, ok))

    bells = list(costs.bell_numbers(7)[1:7])
    want = [1, 2, 5, 15, 52, 203]
    checks.append(Check("bell 1..6", want, bells, bells == want))
    checks.append(_close("bound_permutation(3)", 2.0, costs.bound_permutation(3).ebits))
    checks.append(
        _close("bound_permutation(4)", math.log2(1664), costs.bound_permutation(4).ebits)
    )
    crossover = costs.permutation_crossover(1100)
    checks.append(Check("permutation crossover below 1100", None, crossover, crossover is None))

    i1 = output_entanglement(fixtures.case_i1(), fixture_inputs(EntCase.I1))
    checks.append(_close("entpower I.1", math.log2(9) - 16 / 9, i1, 1e-12))
    i3 = output_entanglement(fixtures.case_i3(), fixture_inputs(EntCase.I3))
    checks.append(_close("entpower I.3", math.log2(3), i3, 1e-12))
    u = fixtures.uketbra11()
    iii = output_entanglement(u, fixture_inputs(EntCase.III, u))
    checks.append(_close("entpower III", math.log2(3), iii, 1e-12))
    best = maximize(cnot, EntPowerConfig(restarts=12, max_iter=800, seed=1)).best_value
    checks.append(_close("entpower cnot", 1.0, best, 1e-5))

    for name, (n_a, n_b, func) in sorted(BUILTIN_MAPS.items()):
        m = ReversibleMap.from_function(n_a, n_b, func)
        rank = classical_schmidt_rank(m)
        for regime in Regime:
            s = synthesize(m, regime)
            limit = costs.bound_classical(rank, regime is Regime.RESTORE)
            count = s.nonlocal_count
            checks.append(Check(f"synthesize {name} {regime}", limit, count, count <= limit))
    return checks


@main.command("report")
@click.pass_context
@guarded
def report(ctx: click.Context):
    """Evaluate the reproduction checks and print them as a table"""
    checks = acceptance_checks()
    width = max(len(c.name) for c in checks)
    lines = [f"{'name':<{width}}  expected  actual  ok"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.expected}  {c.actual}  {'yes' if c.ok else 'NO'}")
    emit(ctx, {"checks": [c.as_dict() for c in checks]}, "\n".join(lines))
    failed = [c.name for c in checks if not c.ok]
    if failed:
        logging.warning(f"report: failed checks {failed}")
        ctx.exit(EXIT_VERIFY)
