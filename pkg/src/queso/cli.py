"""Command-line entry point: ``queso {synth,optimize,verify,fidelity}``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .circuit import Circuit, GateInstance, QasmError, emit_qasm, parse_qasm
from .field import FieldError
from .gateset import GatesetError, load_gateset_arg
from .optimizer import BeamConfig, BeamStats, DeviceModel, OptimizeError, cost, fidelity, max_beam
from .oracle import max_delta, unitary
from .params import ANGLE_PERIOD, ParamExpr, normalize_angle
from .pathsum import PathSumError
from .polyrep import PolyError
from .synthesizer import RuleFileError, SynthConfig, rules_to_json, synthesize, load_rules
from .verifier import COUNTEREXAMPLE, EQUIVALENT, VerifyError, pit_check

log = logging.getLogger("queso")

EXIT_OK = 0
EXIT_DIFFERENT = 1
EXIT_ERROR = 2

DEFAULTS = {
    "gateset": "nam",
    "max_qubits": 3,
    "max_size": 3,
    "symbolic_max_qubits": None,
    "symbolic_max_size": 3,
    "rules": None,
    "queue_size": 8000,
    "timeout": None,
    "cost": "total",
    "device": None,
    "seed": 0,
    "jobs": None,
    "output": None,
    "manifest": None,
    "json": False,
}
# fields that never influence outputs and are left out of the reproducibility record
_VOLATILE = ("jobs", "json", "config", "manifest")


class CliError(Exception):
    pass


def _default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file of option values (or a previous run manifest)")
    p.add_argument("--seed", type=int, default=S, help="seed for every random choice (default 0)")
    p.add_argument("--jobs", type=int, default=S, help="worker processes (default: available cores)")
    p.add_argument("--json", action="store_true", default=S, help="machine-readable output on stdout")
    p.add_argument("--manifest", default=S, help="where to write the run manifest")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    ap = argparse.ArgumentParser(prog="queso", description="Rewrite-rule synthesis and circuit optimization.")
    ap.add_argument("--version", action="version", version=f"queso {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a rewrite-rule file")
    _add_common(p)
    p.add_argument("--gateset", default=S, help="builtin name (nam, ibm, rigetti, ion) or gate-set JSON path")
    p.add_argument("--max-qubits", type=int, default=S)
    p.add_argument("--max-size", type=int, default=S)
    p.add_argument("--symbolic-max-qubits", type=int, default=S)
    p.add_argument("--symbolic-max-size", type=int, default=S)
    p.add_argument("--timeout", type=float, default=S, help="seconds before enumeration stops")
    p.add_argument("-o", "--output", default=S, help="rule file to write (default rules.json)")

    p = sub.add_parser("optimize", help="optimize a QASM circuit with a rule file")
    _add_common(p)
    p.add_argument("input", help="OpenQASM 2 file")
    p.add_argument("--rules", default=S, help="rule file from `queso synth`")
    p.add_argument("--queue-size", type=int, default=S, help="beam capacity (default 8000)")
    p.add_argument("--timeout", type=float, default=S, help="search time limit in seconds (default 3600)")
    p.add_argument("--cost", choices=["total", "2q", "no-rz"], default=S)
    p.add_argument("--device", default=S, help="device model for fidelity: toronto, aspen11, aria or a JSON path")
    p.add_argument("-o", "--output", default=S, help="optimized QASM file (default: stdout)")

    p = sub.add_parser("verify", help="check two QASM circuits for equivalence")
    _add_common(p)
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--gateset", default=S)

    p = sub.add_parser("fidelity", help="static fidelity estimate of a QASM circuit")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--device", default=S)
    p.add_argument("--gateset", default=S)
    return ap


def resolve_options(ns: argparse.Namespace) -> dict:
    """Merge defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS)
    given = vars(ns)
    if "config" in given:
        try:
            cfg = json.loads(Path(given["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {given['config']}: {exc}") from exc
        if isinstance(cfg, dict) and "config" in cfg and "command" in cfg:
            cfg = cfg["config"]
        if not isinstance(cfg, dict):
            raise CliError("config file must hold a JSON object")
        # positional arguments and the command always come from the command line
        cfg = {k: v for k, v in cfg.items() if k not in ("command", "input", "a", "b")}
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if k != "config"})
    if opts["jobs"] is None:
        opts["jobs"] = _default_jobs()
    if opts["jobs"] < 1:
        raise CliError("--jobs must be >= 1")
    return opts


def _snapshot(opts: dict) -> dict:
    return {k: v for k, v in sorted(opts.items()) if k not in _VOLATILE}


def _write_manifest(opts: dict, timings: dict, outputs: dict, extra: dict) -> str | None:
    path = opts.get("manifest")
    if path is None and opts.get("output"):
        path = str(opts["output"]) + ".manifest.json"
    if path is None:
        return None
    body = {"command": opts["command"], "config": _snapshot(opts), "seed": opts["seed"],
            "version": __version__, "timings": timings, "outputs": outputs, **extra}
    Path(path).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    return path


def _read_qasm(path: str, gateset) -> Circuit:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    try:
        return parse_qasm(text, gateset)
    except QasmError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _emit(opts: dict, result: dict, text: str) -> None:
    if opts["json"]:
        print(json.dumps(result, indent=1, sort_keys=True))
    elif text:
        print(text)


# -- commands -------------------------------------------------------------------

def cmd_synth(opts: dict) -> int:
    gs = load_gateset_arg(opts["gateset"])
    cfg = SynthConfig(gs, opts["max_qubits"], opts["max_size"], opts["symbolic_max_qubits"],
                      opts["symbolic_max_size"], opts["seed"], timeout=opts["timeout"], jobs=opts["jobs"])
    t0 = time.monotonic()
    res, rules = synthesize(cfg)
    elapsed = time.monotonic() - t0
    out = opts["output"] or "rules.json"
    opts["output"] = out
    Path(out).write_text(rules_to_json(rules, gs, {"config": cfg.snapshot(), "version": __version__}))
    nsym = sum(1 for r in rules if r.is_symbolic)
    classes = sum(len(p.class_list()) for p in res.all_pifs())
    result = {"rules": len(rules), "symbolic": nsym, "classes": classes, "elapsed": elapsed,
              "failure_bound": float(res.failure_bound), "timed_out": res.timed_out, "output": out}
    result["manifest"] = _write_manifest(opts, {"total": elapsed}, {"rules": out},
                                         {"failure_bound": str(res.failure_bound)})
    _emit(opts, result, f"{len(rules)} rules ({nsym} symbolic) from {classes} classes in {elapsed:.2f}s"
                        f"{' [timed out]' if res.timed_out else ''} -> {out}")
    return EXIT_OK


def cmd_optimize(opts: dict) -> int:
    if not opts["rules"]:
        raise CliError("optimize needs --rules")
    try:
        rs = load_rules(opts["rules"])
    except (OSError, RuleFileError) as exc:
        raise CliError(str(exc)) from exc
    if rs.gateset is None:
        raise CliError(f"rule file {opts['rules']} does not embed its gate set")
    c = _read_qasm(opts["input"], rs.gateset)
    device = DeviceModel.load(opts["device"]) if opts["device"] else None
    timeout = 3600.0 if opts["timeout"] is None else opts["timeout"]
    bc = BeamConfig(opts["queue_size"], timeout, opts["cost"], opts["seed"], opts["jobs"])
    st = BeamStats()
    best = max_beam(c, rs.rules, bc, rs.gateset, st)
    text = emit_qasm(best, rs.gateset)
    result = {"cost_before": st.initial_cost, "cost_after": st.final_cost, "gates_before": c.size,
              "gates_after": best.size, "expanded": st.expanded, "timed_out": st.timed_out,
              "elapsed": st.elapsed, "cost": bc.cost}
    if device is not None:
        result["fidelity_before"] = fidelity(c, device)
        result["fidelity_after"] = fidelity(best, device)
    outputs = {}
    if opts["output"]:
        Path(opts["output"]).write_text(text)
        outputs["circuit"] = opts["output"]
        result["output"] = opts["output"]
    else:
        result["qasm"] = text
    result["manifest"] = _write_manifest(opts, {"search": st.elapsed}, outputs, {"gateset": rs.gateset_id})
    summary = f"cost {st.initial_cost} -> {st.final_cost} ({bc.cost})"
    if device is not None:
        summary += f"; fidelity {result['fidelity_before']:.6f} -> {result['fidelity_after']:.6f}"
    if opts["output"]:
        _emit(opts, result, summary)
    else:
        _emit(opts, result, text.rstrip("\n"))
        if not opts["json"]:
            print(summary, file=sys.stderr)
    return EXIT_OK


def _is_exact(x: float) -> bool:
    # slot coefficients are multiples of 1/2, so multiples of pi/2 keep every phase in the field
    q = x / (math.pi / 2)
    return abs(q - round(q)) < 1e-12


def abstract_angles(c1: Circuit, c2: Circuit) -> tuple[Circuit, Circuit, dict]:
    """Replace angles that are not multiples of pi/2 by fresh variables, one per distinct value."""
    used = set(c1.param_vars()) | set(c2.param_vars())
    nxt = max(used, default=0) + 1
    table: dict[int, int] = {}

    def conv(c: Circuit) -> Circuit:
        nonlocal nxt
        gates = []
        for g in c.gates:
            ps = []
            for p in g.params:
                if isinstance(p, ParamExpr) or _is_exact(float(p)):
                    ps.append(p)
                    continue
                key = round(normalize_angle(float(p)) / 1e-10) % round(ANGLE_PERIOD / 1e-10)
                if key not in table:
                    table[key] = nxt
                    nxt += 1
                ps.append(ParamExpr.var(table[key]))
            gates.append(GateInstance(g.name, g.qubits, tuple(ps), g.label))
        return Circuit(c.n, tuple(gates), c.creg)

    a, b = conv(c1), conv(c2)
    return a, b, {v: k * 1e-10 for k, v in table.items()}


def cmd_verify(opts: dict) -> int:
    gs = load_gateset_arg(opts["gateset"])
    c1, c2 = _read_qasm(opts["a"], gs), _read_qasm(opts["b"], gs)
    if c1.n != c2.n:
        raise CliError(f"qubit-count mismatch: {c1.n} vs {c2.n}")
    a, b, table = abstract_angles(c1, c2)
    t0 = time.monotonic()
    try:
        out = None
        if set(a.param_vars()) == set(b.param_vars()):
            out = pit_check(a, b, gs, seed=opts["seed"], max_qubits=max(3, a.n))
        elif not table:
            raise CliError("circuits are over different parameter variables")
        if out is not None and (out.equivalent or not table):
            result = {"method": "pit", **out.to_json()}
        else:
            # the abstraction may have hidden a relation between concrete angles
            d = max_delta(unitary(c1), unitary(c2))
            result = {"method": "numeric", "verdict": EQUIVALENT if d < 1e-9 else COUNTEREXAMPLE,
                      "max_delta": d}
    except VerifyError as exc:
        raise CliError(str(exc)) from exc
    result["abstracted_angles"] = len(table)
    result["elapsed"] = time.monotonic() - t0
    result["manifest"] = _write_manifest(opts, {"total": result["elapsed"]}, {}, {})
    eq = result["verdict"] == EQUIVALENT
    if eq and result["method"] == "pit":
        text = f"Equivalent (failure probability <= {result['failure_bound_float']:.3g})"
    elif eq:
        text = f"Equivalent (numeric, max |delta| = {result['max_delta']:.3g})"
    elif result["method"] == "pit":
        vals = ", ".join(f"{k}={v}" for k, v in result["valuation"].items())
        text = f"Counterexample\n  valuation: {vals}\n  values: {result['values'][0]} != {result['values'][1]}"
    else:
        text = f"Counterexample (numeric, max |delta| = {result['max_delta']:.3g})"
    _emit(opts, result, text)
    return EXIT_OK if eq else EXIT_DIFFERENT


def cmd_fidelity(opts: dict) -> int:
    if not opts["device"]:
        raise CliError("fidelity needs --device")
    gs = load_gateset_arg(opts["gateset"])
    c = _read_qasm(opts["input"], gs)
    d = DeviceModel.load(opts["device"])
    f = fidelity(c, d)
    result = {"device": d.name, "fidelity": f, "gates": c.size, "cost_total": cost(c, "total"),
              "cost_2q": cost(c, "2q")}
    result["manifest"] = _write_manifest(opts, {}, {}, {})
    _emit(opts, result, f"{f:.12g}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "optimize": cmd_optimize, "verify": cmd_verify, "fidelity": cmd_fidelity}


def main(argv=None) -> int:
    level = os.environ.get("QUESO_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        opts = resolve_options(ns)
        return COMMANDS[opts["command"]](opts)
    except (CliError, FieldError, GatesetError, OptimizeError, RuleFileError, PathSumError, PolyError,
            ValueError, OSError) as exc:
        print(f"queso: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
