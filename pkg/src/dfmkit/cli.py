"""Command-line entry point: ``dfmkit <command> ...`` (or ``python -m dfmkit``).

Exit codes: 0 success, 1 claim or validation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import claims as claims_mod
from .bloch import MODES, PAPER_15, PAPER_16, build_bilinear, coordinate_labels
from .errors import DfmError, ParseError
from .geometry import DfmSpec, dfm_dimension, table_generate, tangent_dimension
from .lindblad import ControlSchedule, LindbladModel, PiecewiseConstant, Tolerances, propagate
from .modelfile import ModelFile, load_model
from .presets import PRESET_INITIAL_STATES, PRESETS, get_preset
from .reachability import CONSTANT, STOCHASTIC, degree0_check, reachability_distribution
from .spectral import BlockSelection, eigenvalue_preservation_report, spectral_blocks

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config": self.config,
            "config_digest": self.digest,
            "results": self.results,
            "checks": self.checks,
            "elapsed_s": round(self.elapsed, 3),
        }
        return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable)

    def to_text(self, body: str) -> str:
        lines = [f"$ {self.command}", f"config digest: {self.digest}", body.rstrip()]
        if self.checks:
            lines.append("checks:")
            lines += [f"  {k}: {v}" for k, v in self.checks.items()]
        lines.append(f"elapsed: {self.elapsed:.3f} s")
        return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return str(v)


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _int_list(text: str) -> list[int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _flatten(lists) -> list:
    return [x for part in lists or [] for x in part]


def _load(args) -> ModelFile:
    if args.model:
        return load_model(args.model)
    model = get_preset(args.preset)
    return ModelFile(model, (False,) * len(model.jumps), PRESET_INITIAL_STATES.get(args.preset), PAPER_16)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", type=Path, help="JSON model file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in model")


def _emit(report: RunReport, body: str, as_json: bool, out=None) -> None:
    out = out or sys.stdout
    out.write(report.to_json() + "\n" if as_json else report.to_text(body))


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    t_start = time.perf_counter()
    if args.t_final <= 0:
        raise ParseError("--t-final must be positive")
    mf = _load(args)
    model = mf.model
    if args.rates is not None:
        rates = _flatten(args.rates)
        model = LindbladModel(model.H0, model.controls, model.jumps, tuple(rates))
    elif any(mf.stochastic):
        raise ParseError("model has stochastic rates; pass --rates to simulate a deterministic schedule")
    rho0 = mf.initial_state
    if args.initial_diag is not None:
        rho0 = np.diag(_flatten(args.initial_diag)).astype(complex)
    if rho0 is None:
        raise ParseError("no initial state: add 'initial_state' to the model or pass --initial-diag")
    u = _flatten(args.u) if args.u is not None else [0.0] * len(model.controls)
    tol = Tolerances(hermiticity=args.hermiticity_tol, trace=args.trace_tol, psd=args.psd_tol)
    t_grid = np.linspace(0.0, args.t_final, args.steps + 1)
    traj = propagate(model, rho0, ControlSchedule.constant(u) if u else None, t_grid, args.dt, tol)
    keep = _flatten(args.keep) if args.keep else [0]
    sel = BlockSelection(keep)
    rep = eigenvalue_preservation_report(traj, sel, args.cluster_tol, args.preserve_tol)

    n = model.n
    header = ["t"] + [f"lambda_{i + 1}" for i in range(n)] + [f"dev_block_{k}" for k in sorted(sel.keep)]
    rows = []
    for j, rho in enumerate(traj.states):
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1]
        rows.append([_fmt(traj.t[j])] + [_fmt(x) for x in w] + [_fmt(d) for d in rep.deviations[j]])
    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    spec0 = spectral_blocks(traj.states[0], args.cluster_tol)
    report = RunReport(
        " ".join(args.argv),
        {"model": str(args.model or args.preset), "t_final": args.t_final, "steps": args.steps,
         "dt": args.dt, "keep": sorted(sel.keep), "u": u, "rates": model.rates_at(0.0).tolist()},
    )
    report.results = {
        "initial_blocks": [[_fmt(b.value), b.multiplicity] for b in spec0.blocks],
        "preserved_values": [_fmt(v) for v in rep.reference_values],
        "max_deviation": _fmt(rep.max_deviation),
        "kbar_multiplicity_changed": bool(np.any(rep.multiplicity_changed)),
        "tracking_failures": [msg for _, msg in rep.tracking_failures],
        "df_compatible": rep.df_compatible,
    }
    report.checks = {
        "invariant_violations": len(traj.violations),
        "trace_error_final": _fmt(abs(np.trace(traj.states[-1]).real - 1.0)),
    }
    report.elapsed = time.perf_counter() - t_start
    verdict = "DF-compatible" if rep.df_compatible else "NOT DF-compatible"
    body = "\n".join([
        "initial blocks (value, multiplicity): "
        + ", ".join(f"({b.value:.6g}, {b.multiplicity})" for b in spec0.blocks),
        f"preserved blocks: {sorted(sel.keep)}",
        f"max deviation of preserved eigenvalues: {rep.max_deviation:.3e} (tol {args.preserve_tol:g})",
        f"free-block multiplicities changed: {bool(np.any(rep.multiplicity_changed))}",
        f"verdict: {verdict}",
        f"csv: {args.output}" if args.output else "csv: not written (use --output)",
    ])
    _emit(report, body, args.json)
    return EXIT_OK


# -- dfm-dim ----------------------------------------------------------------

def cmd_dfm_dim(args) -> int:
    t_start = time.perf_counter()
    if args.n < 2:
        raise ParseError("--n must be at least 2")
    report = RunReport(" ".join(args.argv), {"n": args.n, "k": args.k, "kbar": args.kbar, "all": args.all})
    if args.k is None:
        if args.kbar:
            raise ParseError("--kbar needs --k")
        rows = table_generate(args.n, include_redundant=args.all)
        report.results = {"rows": [[list(r.kept), list(r.free), r.dimension] for r in rows]}
        width = max(12, 2 * args.n + 3)
        lines = [f"{'{m_k : k in K}':<{width}} {'{m_k : k in Kbar}':<{width}} dim"]
        for r in rows:
            a, b = r.format_sets()
            lines.append(f"{a:<{width}} {b:<{width}} {r.dimension}")
        body = "\n".join(lines)
    else:
        spec = DfmSpec(args.k, args.kbar).check_n(args.n)
        dim = dfm_dimension(spec)
        tan = tangent_dimension(spec)
        report.results = {"dimension": dim, "tangent_construction_dimension": tan}
        body = str(dim)
        if tan != dim:
            body += f"\n(multiplicity-preserving tangent construction gives {tan})"
    report.elapsed = time.perf_counter() - t_start
    _emit(report, body, args.json)
    return EXIT_OK


# -- bloch-build ------------------------------------------------------------

def cmd_bloch_build(args) -> int:
    t_start = time.perf_counter()
    mf = _load(args)
    mode = args.mode or mf.mode
    bm = build_bilinear(mf.model, mode)
    mats = {"A": bm.A, **{f"B[{lab}]": b for lab, b in zip(bm.control_labels, bm.B)},
            **{f"G[{lab}]": g for lab, g in zip(bm.jump_labels, bm.G)}}
    props = {}
    for name, m in mats.items():
        props[name] = {
            "skew_symmetric": bool(np.max(np.abs(m + m.T)) <= 1e-12),
            "symmetric": bool(np.max(np.abs(m - m.T)) <= 1e-12),
            "diagonal": bool(np.max(np.abs(m - np.diag(np.diag(m)))) == 0.0),
            "zero": bool(not np.any(m)),
        }
    report = RunReport(" ".join(args.argv), {"model": str(args.model or args.preset), "mode": mode})
    report.results = {"N": bm.N, "coordinates": coordinate_labels(mf.n, mode), "properties": props}
    if args.output:
        doc = {"mode": mode, "N": bm.N, "coordinates": coordinate_labels(mf.n, mode),
               "matrices": {k: v.tolist() for k, v in mats.items()}}
        Path(args.output).write_text(json.dumps(doc, indent=1))
    report.elapsed = time.perf_counter() - t_start
    lines = [f"mode {mode}, N = {bm.N}"]
    for name, p in props.items():
        flags = [k for k, v in p.items() if v] or ["general"]
        lines.append(f"  {name}: {', '.join(flags)}")
    _emit(report, "\n".join(lines), args.json)
    return EXIT_OK


# -- reach ------------------------------------------------------------------

def cmd_reach(args) -> int:
    t_start = time.perf_counter()
    mf = _load(args)
    mode = args.mode or mf.mode
    bm = build_bilinear(mf.model, mode)
    rates = None
    if args.variant == CONSTANT:
        if args.rates is not None:
            rates = _flatten(args.rates)
        elif args.equal_rates:
            rates = [1.0] * len(bm.G)
        elif any(mf.stochastic) or any(isinstance(r, PiecewiseConstant) for r in mf.model.rates):
            raise ParseError("constant variant needs --rates or --equal-rates for this model")
        else:
            rates = mf.model.rates_at(0.0).tolist()
    res = reachability_distribution(bm, args.variant, rates=rates, rank_tol=args.rank_tol, max_iter=args.max_iter)
    deg0_mode = PAPER_15 if mode != "pauli_full" else mode
    try:
        bm0 = bm if deg0_mode == mode else build_bilinear(mf.model, deg0_mode)
    except DfmError:
        bm0, deg0_mode = bm, mode
    deg0 = degree0_check(bm0.A, bm0.B)
    report = RunReport(
        " ".join(args.argv),
        {"model": str(args.model or args.preset), "mode": mode, "variant": args.variant,
         "rates": rates, "rank_tol": args.rank_tol, "max_iter": args.max_iter},
    )
    report.results = {
        "dimension": res.dimension,
        "stable": res.stable,
        "iterations": res.iterations,
        "provenance": [[p.iteration, p.operator, p.source, f"{p.residual_norm:.6e}"] for p in res.provenance],
        "degree0_mode": deg0_mode,
        "degree0_common_eigenvectors": len(deg0.vectors),
    }
    report.checks = {"warnings": res.warnings,
                     "smallest_singular_value": f"{res.smallest_singular_value:.6e}"}
    report.elapsed = time.perf_counter() - t_start
    lines = [f"dim V = {res.dimension}",
             f"variant: {args.variant}, mode: {mode}, iterations: {res.iterations}, "
             f"{'stabilised' if res.stable else 'NOT stabilised'}",
             "generators (iteration, bracket partner, source generator, residual):"]
    for k, p in enumerate(res.provenance):
        src = "seed" if p.source < 0 else f"V{p.source}"
        lines.append(f"  V{k}: it {p.iteration}, {p.operator} with {src}, residual {p.residual_norm:.3e}")
    lines.append(f"degree-0 common real eigenvectors ({deg0_mode}): {len(deg0.vectors)}")
    _emit(report, "\n".join(lines), args.json)
    return EXIT_OK if res.stable else EXIT_FAIL


# -- verify -----------------------------------------------------------------

def cmd_verify(args) -> int:
    t_start = time.perf_counter()
    results = claims_mod.run_claims(args.preset)
    report = RunReport(" ".join(args.argv), {"preset": args.preset})
    report.results = {"claims": claims_mod.claims_to_json(results)}
    report.checks = {"passed": sum(c.passed for c in results), "failed": sum(not c.passed for c in results)}
    report.elapsed = time.perf_counter() - t_start
    lines = []
    for c in results:
        lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: expected {c.expected}, observed {c.observed}"
                     + (f" ({c.detail})" if c.detail else ""))
    _emit(report, "\n".join(lines), args.json)
    return EXIT_OK if all(c.passed for c in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfmkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="propagate a model and monitor preserved eigenvalue blocks")
    _add_model_args(p)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--steps", type=int, default=100, help="number of output intervals")
    p.add_argument("--dt", type=float, default=1e-3, help="RK4 substep")
    p.add_argument("--keep", type=_int_list, action="append", help="preserved block indices at t=0 (default 0)")
    p.add_argument("--u", type=_float_list, action="append", help="constant control values")
    p.add_argument("--rates", type=_float_list, action="append", help="override jump rates")
    p.add_argument("--initial-diag", type=_float_list, action="append")
    p.add_argument("--cluster-tol", type=float, default=1e-8)
    p.add_argument("--preserve-tol", type=float, default=1e-8)
    p.add_argument("--hermiticity-tol", type=float, default=1e-10)
    p.add_argument("--trace-tol", type=float, default=1e-9)
    p.add_argument("--psd-tol", type=float, default=1e-8)
    p.add_argument("--output", type=Path, help="CSV trajectory summary")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dfm-dim", help="DFM dimensions (full table or one entry)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=_int_list, action="append", help="preserved block multiplicities")
    p.add_argument("--kbar", type=_int_list, action="append", help="free block multiplicities")
    p.add_argument("--all", action="store_true", help="include rows whose single free eigenvalue is fixed by the trace")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_dfm_dim)

    p = sub.add_parser("bloch-build", help="build the bilinear coherence-vector model")
    _add_model_args(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--output", type=Path, help="write matrices as JSON")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bloch_build)

    p = sub.add_parser("reach", help="degree-1 reachability distribution")
    _add_model_args(p)
    p.add_argument("--variant", choices=(STOCHASTIC, CONSTANT), default=STOCHASTIC)
    p.add_argument("--rates", type=_float_list, action="append")
    p.add_argument("--equal-rates", action="store_true")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--rank-tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=64)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("verify", help="check the reference two-qubit claims")
    p.add_argument("preset")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args.argv = ["dfmkit", *argv]
    if getattr(args, "kbar", None) is not None or getattr(args, "k", None) is not None:
        args.k = _flatten(args.k) if args.k is not None else None
        args.kbar = _flatten(args.kbar)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DfmError as exc:
        code = EXIT_INPUT if isinstance(exc, ValueError) else EXIT_FAIL
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
