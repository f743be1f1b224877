"""Command-line front end: ``qds <command> MODEL [options]``.

Exit codes: 0 success, 2 when the analysis verdict is "not stabilizable" or
Blocked (a result, not a crash), 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import basins as basins_mod
from . import dynamics, synthesis
from .blocks import check_s_invariance, openloop_feasibility
from .config import load_config, set_tolerances
from .corpus import BUILDERS, load_bundled
from .did import compute_did, dcm
from .model import ModelError, QdsModel, load_model_file
from .spectral import gas_verdict

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


class CliError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def resolve_model(ref: str) -> QdsModel:
    """A file path, or the stem of a bundled model (``examples/nv_reduced.json`` works)."""
    p = Path(ref)
    if p.is_file():
        return load_model_file(p)
    stem = p.stem if p.suffix == ".json" else p.name
    if stem in BUILDERS:
        return load_bundled(stem)
    raise CliError(f"model: no file {ref!r} and no bundled model named {stem!r} "
                   f"(bundled: {', '.join(sorted(BUILDERS))})")


def parse_u(model: QdsModel, text: str | None) -> np.ndarray:
    if text is None or text.strip() == "":
        return model.zeros()
    parts = [p for p in text.replace(" ", "").split(",") if p]
    named = {}
    vals = []
    for p in parts:
        if "=" in p:
            k, v = p.split("=", 1)
            named[k] = float(v)
        else:
            vals.append(float(p))
    if named:
        u = model.zeros()
        names = model.control_names
        for k, v in named.items():
            if k not in names:
                raise CliError(f"model: unknown control {k!r}; controls are {names}")
            u[names.index(k)] = v
        return u
    if len(vals) != model.n_controls:
        raise CliError(f"model: --u needs {model.n_controls} values "
                       f"({', '.join(model.control_names) or 'no controls'}), got {len(vals)}")
    return np.array(vals, dtype=float)


def local_maxima(x, y, rtol: float = 1e-9) -> list[tuple[float, float]]:
    """Interior local maxima of y(x); a flat run (equal within rtol) counts once, at its midpoint."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    scale = max(np.abs(y).max(), 1e-300) if y.size else 1.0
    runs = []  # (start, end) of plateaus of equal value
    i = 0
    while i < len(y):
        j = i
        while j + 1 < len(y) and abs(y[j + 1] - y[i]) <= rtol * scale:
            j += 1
        runs.append((i, j))
        i = j + 1
    out = []
    for k, (a, b) in enumerate(runs):
        if k == 0 or k == len(runs) - 1:
            continue
        if y[runs[k - 1][0]] < y[a] and y[runs[k + 1][0]] < y[a]:
            out.append((0.5 * (x[a] + x[b]), float(y[a])))
    return out


def _c(z: complex):
    z = complex(z)
    return z.real if abs(z.imag) < 1e-12 else [z.real, z.imag]


def _mat(x: np.ndarray, digits: int = 6):
    return [[_c(np.round(v, digits)) for v in row] for row in np.asarray(x)]


def _emit(args, payload: dict, text: str, rows: list[dict] | None = None) -> None:
    fmt = args.format
    if fmt == "json":
        out = json.dumps(payload, indent=1, default=_json_default)
    elif fmt == "csv":
        rows = rows if rows is not None else [{k: v for k, v in payload.items()
                                              if not isinstance(v, (list, dict))}]
        out = _csv(rows)
    else:
        out = text
    dest = getattr(args, "out", None)
    if dest and fmt != "text":
        Path(dest).write_text(out + ("" if out.endswith("\n") else "\n"), encoding="utf-8")
    else:
        print(out)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _fmt_u(model: QdsModel, u) -> str:
    if model.n_controls == 0:
        return "(no controls)"
    return ", ".join(f"{n}={v:.6g}" for n, v in zip(model.control_names, u))


def _target(model: QdsModel):
    if model.target is None:
        raise CliError("model: the model file has no target subspace")
    return model.target


# ------------------------------------------------------------------ commands

def cmd_analyze(args) -> int:
    model = resolve_model(args.model)
    target = _target(model)
    feas = openloop_feasibility(model, target)
    payload = {"model": model.name, "feasibility": feas.kind, "reason": feas.reason}
    lines = [f"model: {model.name}  (n={model.dim}, controls: {', '.join(model.control_names) or 'none'})",
             f"open-loop feasibility: {feas.kind}" + (f" ({feas.reason})" if feas.reason else "")]
    if feas.blocked:
        payload["verdict"] = "Blocked"
        lines.append("verdict: Blocked")
        _emit(args, payload, "\n".join(lines))
        return EXIT_VERDICT
    c = synthesis.ControlSet.parse(model, args.range)
    inv = synthesis.invariance_set(model, target, c)
    payload["invariance_set"] = {"empty": inv.empty, "residual": inv.residual,
                                 "dimension": None if inv.empty else int(inv.directions.shape[1])}
    if inv.empty:
        lines.append(f"invariance set: empty ({inv.reason})")
        payload["verdict"] = "not exactly stabilizable; practical stabilization available"
        lines.append(f"verdict: {payload['verdict']}")
        lines.append("  (run `qds synthesize --practical` for the corrected-Hamiltonian analysis)")
        _emit(args, payload, "\n".join(lines))
        return EXIT_VERDICT
    lines.append(f"invariance set: affine, dimension {inv.directions.shape[1]} "
                 f"(residual {inv.residual:.2e})")
    if args.u is not None:
        u = parse_u(model, args.u)
        rep = check_s_invariance(model, u, target)
        did = compute_did(model, u, target, check=False) if rep.invariant else None
        ok = bool(rep.invariant and did.success)
        payload.update(u=u, invariant=rep.invariant, gas=ok)
        lines.append(f"at u = {_fmt_u(model, u)}: invariant={rep.invariant} gas={ok}")
    else:
        out = synthesis.synthesize(model, target, c, args.seed)
        ok = out.status == synthesis.STABILIZED
        payload.update(u=out.u, synthesis=out.status, reason=out.reason)
        lines.append(f"synthesis (seed {args.seed}): {out.status}"
                     + (f" at u = {_fmt_u(model, out.u)}" if ok else f" ({out.reason})"))
    payload["verdict"] = "stabilizable" if ok else "not stabilizable"
    lines.append(f"verdict: {payload['verdict']}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_did(args) -> int:
    model = resolve_model(args.model)
    u = parse_u(model, args.u)
    did = compute_did(model, u, _target(model))
    steps = [{"index": s.index, "dim": s.dim, "kind": s.split_kind, "final": s.final,
              "basis": _mat(s.basin)} for s in did.steps]
    payload = {"model": model.name, "u": u, "success": did.success, "dims": did.dims,
               "block_sizes": did.block_sizes, "steps": steps, "failure": did.failure_reason}
    lines = [f"DID of {model.name} at u = {_fmt_u(model, u)}: "
             + ("success" if did.success else "FAILED"),
             f"block sizes (S first): {did.block_sizes}"]
    for s in did.steps:
        lines.append(f"  T{s.index}: dim {s.dim}  {s.split_kind}" + ("  (final)" if s.final else ""))
    if not did.success:
        lines.append(f"  {did.failure_reason}")
    if did.success and args.dcm:
        m, _ = dcm(model, u, did)
        payload["dcm"] = _mat(m, 4)
        lines.append("DCM (H + sum L in the DID basis):")
        lines.append(np.array2string(np.round(m, 4), max_line_width=200))
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if did.success else EXIT_VERDICT


def cmd_speed(args) -> int:
    model = resolve_model(args.model)
    u = parse_u(model, args.u)
    rep = gas_verdict(model, u, _target(model))
    payload = {"model": model.name, "u": u, "lambda0": rep.lambda0, "gas": rep.gas,
               "indeterminate": rep.indeterminate}
    text = f"lambda0 = {rep.lambda0:.10g}\ngas = {str(rep.gas).lower()}"
    if rep.indeterminate:
        text += "\nwarning: lambda0 lies in the indeterminate band"
    _emit(args, payload, text)
    return EXIT_OK if rep.gas else EXIT_VERDICT


def cmd_basins(args) -> int:
    model = resolve_model(args.model)
    u = parse_u(model, args.u)
    did = compute_did(model, u, _target(model))
    if not did.success:
        raise CliError(f"basins: {did.failure_reason}")
    classes = basins_mod.classify(model, u, did)
    bn = basins_mod.bottleneck(model, u, did, classes)
    rows = [{"basin": c.index, "kind": c.kind, "rate": c.rate,
             "source": "L" if c.kind in basins_mod.NOISE_KINDS else "H",
             "singulars": " ".join(f"{s:.6g}" for s in c.singulars)} for c in classes]
    payload = {"model": model.name, "u": u, "basins": rows,
               "bottleneck": {"gamma_min": bn.gamma_min, "basin": bn.basin_index,
                              "limited_by": bn.limited_by,
                              "dissipative_limit": bn.dissipative_limit,
                              "dissipative_basin": bn.dissipative_index}}
    lines = [f"basins of {model.name} at u = {_fmt_u(model, u)}:"]
    for r in rows:
        extra = f"  singulars [{r['singulars']}]" if r["singulars"] else ""
        lines.append(f"  T{r['basin']}: {r['kind']:<11} rate_{r['source']} = {r['rate']:.6g}{extra}")
    lines.append(f"bottleneck: gamma_min = {bn.gamma_min:.6g} at T{bn.basin_index} "
                 f"({bn.limited_by}); {bn.note}")
    if bn.dissipative_limit is not None:
        lines.append(f"slowest dissipative link: {bn.dissipative_limit:.6g} at T{bn.dissipative_index}")
    _emit(args, payload, "\n".join(lines), rows)
    return EXIT_OK


def _parse_grid(model: QdsModel, specs) -> dict[str, np.ndarray]:
    grid = {}
    for spec in specs:
        name, _, body = spec.partition("=")
        if name not in model.control_names:
            raise CliError(f"sweep: unknown control {name!r}; controls are {model.control_names}")
        if ":" in body:
            lo, hi, steps = body.split(":")
            n = int(steps)
            if n < 1:
                raise CliError("sweep: grid needs at least one step")
            grid[name] = np.linspace(float(lo), float(hi), n)
        else:
            grid[name] = np.array([float(v) for v in body.split(",") if v])
        if grid[name].size == 0:
            raise CliError(f"sweep: empty grid for {name}")
    if not grid:
        raise CliError("sweep: give at least one --grid NAME=lo:hi:steps")
    return grid


def cmd_sweep(args) -> int:
    model = resolve_model(args.model)
    target = _target(model)
    base = parse_u(model, args.u)
    grid = _parse_grid(model, args.grid)
    names = model.control_names
    outputs = [o.strip() for o in args.outputs.split(",") if o.strip()]
    rows = []
    for combo in itertools.product(*grid.values()):
        u = base.copy()
        for k, v in zip(grid, combo):
            u[names.index(k)] = v
        row = {n: float(x) for n, x in zip(names, u)}
        rep = gas_verdict(model, u, target)
        if "lambda0" in outputs:
            row["lambda0"] = rep.lambda0
        if "gas" in outputs:
            row["gas"] = str(rep.gas).lower()
        if "bottleneck" in outputs:
            did = compute_did(model, u, target, check=False)
            row["bottleneck"] = basins_mod.bottleneck(model, u, did).gamma_min if did.success else ""
        rows.append(row)
    if args.format == "text" and not args.out:
        args.format = "csv"
    if args.out and args.format == "text":
        args.format = "csv"
    text = _csv(rows)
    _emit(args, {"model": model.name, "rows": rows}, text, rows)
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    model = resolve_model(args.model)
    target = _target(model)
    c = synthesis.ControlSet.parse(model, args.range)
    if args.practical:
        try:
            out = synthesis.practical_stabilize(model, target, c, args.seed)
        except synthesis.NonUniqueSteadyState as exc:
            out = exc.outcome
            out.reason = str(exc)
    else:
        out = synthesis.synthesize(model, target, c, args.seed)
    payload = {"model": model.name, "status": out.status, "u": out.u, "reason": out.reason,
               "seed": args.seed, "samples": len(out.samples)}
    lines = [f"synthesis for {model.name} (seed {args.seed}): {out.status}"]
    if out.u is not None and out.status != synthesis.INFEASIBLE:
        lines.append(f"  u = {_fmt_u(model, out.u)}")
        rep = gas_verdict(model, out.u, target) if out.status == synthesis.STABILIZED else None
        if rep is not None:
            payload["lambda0"] = rep.lambda0
            lines.append(f"  DID block sizes {out.did.block_sizes}; spectral check lambda0 = "
                         f"{rep.lambda0:.6g} (gas={str(rep.gas).lower()})")
    if out.reason:
        lines.append(f"  {out.reason}")
    if out.status == synthesis.PRACTICAL:
        bg = out.details["bound_vs_gap"]
        payload.update(bound=out.bound, gap=bg["gap"], fidelity=out.fidelity,
                       unique=out.details["kernel_dim"] == 1)
        lines.append(f"  |Delta L| bound 2|H~_P| = {out.bound:.6g}; corrected-generator gap = "
                     f"{bg['gap']:.6g}")
        lines.append(f"  steady state unique: {out.details['kernel_dim'] == 1}; "
                     f"fidelity to target = {out.fidelity:.6g}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if out.status in (synthesis.STABILIZED, synthesis.PRACTICAL) else EXIT_VERDICT


def _rho0(model: QdsModel, spec: str) -> np.ndarray:
    if spec == "mixed":
        return dynamics.maximally_mixed(model.dim)
    p = Path(spec)
    if not p.is_file():
        raise CliError(f"simulate: --rho0 must be 'mixed' or a file, got {spec!r}")
    if p.suffix == ".npy":
        rho = np.load(p)
    else:
        data = json.loads(p.read_text(encoding="utf-8"))
        rho = np.array([[complex(*v) if isinstance(v, list) else v for v in row] for row in data],
                       dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise CliError(f"simulate: rho0 has shape {rho.shape}, model dimension is {model.dim}")
    return rho


def cmd_simulate(args) -> int:
    model = resolve_model(args.model)
    target = _target(model)
    u = parse_u(model, args.u)
    dt = args.dt if args.dt else dynamics.suggest_dt(model, u)
    traj = dynamics.integrate(model, u, _rho0(model, args.rho0), args.tmax, dt,
                              record_every=args.every)
    rows = [{"t": float(t), "r_population": dynamics.r_population(r, target),
             "fidelity_to_target": dynamics.fidelity_to_target(r, target),
             "trace_drift": float(d)} for t, r, d in zip(traj.times, traj.states, traj.trace_drift)]
    if args.format == "text":
        args.format = "csv"
    _emit(args, {"model": model.name, "u": u, "dt": dt, "rows": rows}, _csv(rows), rows)
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model JSON file or bundled model name")
    common.add_argument("--u", help="controls as a comma list (or name=value pairs)")
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--config", help="TOML file with tolerance overrides")

    p = argparse.ArgumentParser(prog="qds", description="Stabilization analysis of Markovian "
                                "open quantum systems under Hamiltonian control.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="feasibility, invariance and GAS verdict")
    a.add_argument("--range", action="append", help="control set override NAME=lo:hi[,lo:hi]")
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("did", parents=[common], help="dissipation-induced decomposition")
    d.add_argument("--dcm", action="store_true", help="also print the connection matrix")
    d.set_defaults(func=cmd_did)

    s = sub.add_parser("speed", parents=[common], help="asymptotic convergence speed lambda0")
    s.set_defaults(func=cmd_speed)

    b = sub.add_parser("basins", parents=[common], help="basin classes, rates and bottleneck")
    b.set_defaults(func=cmd_basins)

    w = sub.add_parser("sweep", parents=[common], help="lambda0 / gas over a control grid (CSV)")
    w.add_argument("--grid", action="append", required=True, help="NAME=lo:hi:steps or NAME=v1,v2")
    w.add_argument("--outputs", default="lambda0,gas", help="comma list from lambda0,gas,bottleneck")
    w.add_argument("--out", help="write the table here instead of stdout")
    w.set_defaults(func=cmd_sweep)

    y = sub.add_parser("synthesize", parents=[common], help="search for stabilizing controls")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--practical", action="store_true", help="practical stabilization")
    y.add_argument("--range", action="append", help="control set override NAME=lo:hi[,lo:hi]")
    y.set_defaults(func=cmd_synthesize)

    m = sub.add_parser("simulate", parents=[common], help="integrate the master equation (CSV)")
    m.add_argument("--rho0", default="mixed", help="'mixed' or a .npy/.json density matrix")
    m.add_argument("--tmax", type=float, default=10.0)
    m.add_argument("--dt", type=float, default=None, help="step (default: from the generator norm)")
    m.add_argument("--every", type=int, default=1, help="record every k-th step")
    m.add_argument("--out", help="write the CSV here instead of stdout")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    previous = None
    try:
        if args.config:
            previous = set_tolerances(load_config(args.config))
        return args.func(args)
    except CliError as exc:
        print(f"qds {exc}", file=sys.stderr)
    except (ModelError, KeyError) as exc:
        print(f"qds model: {exc}", file=sys.stderr)
    except (synthesis.Blocked, synthesis.IterationCapExceeded, synthesis.NoStabilizingSet) as exc:
        print(f"qds synthesis: {exc}", file=sys.stderr)
        if isinstance(exc, synthesis.Blocked):
            return EXIT_VERDICT
    except dynamics.StepTooLarge as exc:
        print(f"qds dynamics: {exc}", file=sys.stderr)
    except (ValueError, OSError) as exc:
        mod = type(exc).__module__.replace("qds.", "") if type(exc).__module__.startswith("qds") else "qds"
        print(f"qds {mod}: {exc}", file=sys.stderr)
    finally:
        if previous is not None:
            set_tolerances(previous)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
