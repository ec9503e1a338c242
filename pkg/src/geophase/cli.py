"""Command-line front end: ``geophase <verb> [--config FILE] [options]``.

Exit status: 0 success, 2 invalid input, 3 a required phase is undefined,
4 a self-test criterion failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (PHASE_MODES, ExperimentConfig, build_path, build_state, emit_config, parse_config,
                     pseudopure_params, scan_axis)
from .errors import GeophaseError, SchemaError, ValidationError
from .evolution import TimeGrid, build_parallel_family, compute_trajectory, parallel_transport_unitary
from .interferometer import (conditional_circuit_readout, fit_interferogram, interferogram, interferogram_csv,
                             l2_arm_operators, purify_density, purify_pseudopure)
from .linalg import OrthonormalBasis, PhaseResult, cyclic_shift_unitary
from .phases import compute_phase, gauge_invariance_report
from .pseudopure import (PseudopureParams, figure1_csv, figure1_data, gamma1_arctan, gamma1_closed,
                         gamma2_argument, gamma2_closed, l1_nodal_eta, l1_nodal_residual, l2_nodal_eta_squared)
from .selftest import run_selftest

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNDEFINED = 3
EXIT_SELFTEST = 4

VERB_MODES = {
    "compute": PHASE_MODES + ("pseudopure-closed",),
    "scan": ("nodal-scan",),
    "figure1": ("figure1",),
    "interfere": ("interfere",),
    "selftest": ("selftest",),
}


# -- output helpers --------------------------------------------------------


def provenance(cfg: ExperimentConfig) -> dict:
    return {"tool": "geophase", "version": __version__, "config_sha256": cfg.digest(), "mode": cfg.mode,
            "grid": cfg.grid, "nodal_tol": cfg.nodal_tol, "degeneracy_tol": cfg.degeneracy_tol, "seed": cfg.seed}


def provenance_lines(cfg: ExperimentConfig) -> list[str]:
    """CSV comment lines (without the leading ``# ``)."""
    return [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in provenance(cfg).items()]


def _complex(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def phase_record(res: PhaseResult) -> dict:
    rec = {"defined": res.defined, "raw_trace": _complex(res.raw_trace), "magnitude": res.magnitude}
    rec["phase"] = _complex(res.phase) if res.defined else None
    rec["angle"] = res.angle if res.defined else None
    if res.links:
        rec["links"] = [_complex(z) for z in res.links]
    return rec


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_text(payload: dict) -> str:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    return text + "\n"


def _finite(x: float):
    return x if math.isfinite(x) else None


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _fmt(x) -> str:
    return "" if x is None else "%.17g" % x


# -- runners ---------------------------------------------------------------


def run_compute(cfg: ExperimentConfig, out_dir: Path, workers: int) -> int:
    if cfg.mode == "pseudopure-closed":
        return _run_pseudopure(cfg, out_dir)
    path = build_path(cfg)
    target = build_state(cfg)
    grid = TimeGrid.uniform(path.duration, cfg.grid)
    result = compute_phase(cfg.mode, path, target, cfg.indices, grid, cfg.nodal_tol)
    payload = {"provenance": provenance(cfg), "indices": list(cfg.indices), "result": phase_record(result)}
    if "gauge_check" in cfg.options:
        gc = cfg.options["gauge_check"]
        rep = gauge_invariance_report(path, target, cfg.indices, gc["trials"], cfg.seed, kind=cfg.mode,
                                      gauge=gc["kind"], grid=grid, nodal_tol=cfg.nodal_tol)
        payload["gauge_check"] = {"kind": gc["kind"], "trials": rep.trials, "excluded": rep.excluded,
                                  "max_deviation": _finite(rep.max_deviation)}
    written = _write(out_dir, f"{cfg.output}.json", _json_text(payload))
    state = f"phase {result.phase.real:+.12f}{result.phase.imag:+.12f}i" if result.defined else "phase undefined"
    print(f"{cfg.mode} {tuple(cfg.indices)}: {state} (|trace| = {result.magnitude:.3e}) -> {written}")
    if cfg.require_defined and not result.defined:
        return EXIT_UNDEFINED
    return EXIT_OK


def _run_pseudopure(cfg: ExperimentConfig, out_dir: Path) -> int:
    pp = pseudopure_params(cfg)
    g1n = gamma1_closed(pp, cfg.nodal_tol)
    g1m = gamma1_closed(pp, cfg.nodal_tol, state="m")
    g2 = gamma2_closed(pp, cfg.nodal_tol)
    payload = {
        "provenance": provenance(cfg),
        "params": dataclasses.asdict(pp),
        "gamma1_n": phase_record(g1n),
        "gamma1_m": phase_record(g1m),
        "gamma2": phase_record(g2),
        "gamma2_argument": gamma2_argument(pp),
        "l1_nodal_residual": l1_nodal_residual(pp),
    }
    den = (pp.N - 2) * (1 - pp.epsilon) + pp.eta * (2 + (pp.N - 2) * pp.epsilon) * math.cos(pp.omega / 2)
    payload["gamma1_arctan"] = _complex(gamma1_arctan(pp)) if den != 0 else None
    if pp.N >= 3:
        payload["l1_nodal_eta_at_2pi"] = l1_nodal_eta(pp.N, pp.epsilon)
    try:
        payload["l2_nodal_eta_squared"] = l2_nodal_eta_squared(pp.N, pp.epsilon, pp.omega)
    except ArithmeticError:
        payload["l2_nodal_eta_squared"] = None
    written = _write(out_dir, f"{cfg.output}.json", _json_text(payload))
    print(f"pseudopure-closed N={pp.N}: gamma1 defined={g1n.defined}, gamma2 defined={g2.defined} -> {written}")
    if cfg.require_defined and not (g1n.defined and g2.defined):
        return EXIT_UNDEFINED
    return EXIT_OK


def _scan_row(args):
    kind, N, omega, eps, etas = args
    rows = []
    for eta in etas:
        pp = PseudopureParams(N, float(eps), float(eta), omega)
        res = l1_nodal_residual(pp) if kind == "l1" else abs(gamma2_argument(pp))
        rows.append((float(eps), float(eta), res))
    if kind == "l1":
        analytic = l1_nodal_eta(N, float(eps)) if N >= 3 else None
    else:
        try:
            e2 = l2_nodal_eta_squared(N, float(eps), omega)
        except ArithmeticError:
            e2 = None
        analytic = None if e2 is None else math.sqrt(e2)
    best = min(rows, key=lambda r: r[2])
    return rows, (float(eps), best[1], best[2], analytic)


def run_scan(cfg: ExperimentConfig, out_dir: Path, workers: int) -> int:
    scan = cfg.options["scan"]
    eps_axis, eta_axis = scan_axis(scan["epsilon"]), scan_axis(scan["eta"])
    for name, axis, lo in (("scan.epsilon", eps_axis, 0.0), ("scan.eta", eta_axis, -1e-15)):
        if axis.min() <= lo or axis.max() > 1:
            bound = "(0, 1]" if name == "scan.epsilon" else "[0, 1]"
            raise SchemaError(f"axis must lie within {bound}", field=name)
    if scan["kind"] == "l1" and cfg.N < 3:
        raise SchemaError("the l1 nodal curve needs N >= 3", field="N")
    cells = [(scan["kind"], cfg.N, scan["omega"], eps, eta_axis) for eps in eps_axis]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(_scan_row, cells))
    head = [f"# {line}" for line in provenance_lines(cfg)]
    grid_lines = head + ["epsilon,eta,residual"]
    curve_lines = head + ["epsilon,eta_min,residual_min,eta_analytic"]
    for rows, (eps, eta_min, res_min, analytic) in results:
        grid_lines += [f"{_fmt(e)},{_fmt(h)},{_fmt(r)}" for e, h, r in rows]
        curve_lines.append(f"{_fmt(eps)},{_fmt(eta_min)},{_fmt(res_min)},{_fmt(analytic)}")
    a = _write(out_dir, f"{cfg.output}.csv", "\n".join(grid_lines) + "\n")
    b = _write(out_dir, f"{cfg.output}_minima.csv", "\n".join(curve_lines) + "\n")
    print(f"nodal-scan ({scan['kind']}, N={cfg.N}): {len(eps_axis)}x{len(eta_axis)} cells -> {a}, {b}")
    return EXIT_OK


def figure1_text(cfg: ExperimentConfig) -> str:
    f = cfg.options["figure1"]
    table = figure1_data(f["N_values"], np.linspace(0.0, 1.0, f["eta_points"]), f["resolution"])
    return figure1_csv(table, comments=provenance_lines(cfg))


def run_figure1(cfg: ExperimentConfig, out_dir: Path, workers: int) -> int:
    written = _write(out_dir, f"{cfg.output}.csv", figure1_text(cfg))
    print(f"figure1: N = {cfg.options['figure1']['N_values']} -> {written}")
    return EXIT_OK


def run_interfere(cfg: ExperimentConfig, out_dir: Path, workers: int) -> int:
    opts = cfg.options["interfere"]
    n, m = opts["n"], opts["m"]
    path = build_path(cfg)
    rho0 = build_state(cfg)
    traj = compute_trajectory(path, TimeGrid.uniform(path.duration, cfg.grid))
    rho_n = rho0.conjugated(np.linalg.matrix_power(cyclic_shift_unitary(rho0.basis), n))
    if "pseudopure" in cfg.state:
        pp = cfg.state["pseudopure"]
        u_par, _ = build_parallel_family(path, rho_n, trajectory=traj)
        pur = purify_pseudopure(cfg.N, pp["epsilon"], (pp["n"] + n) % cfg.N)
        basis = OrthonormalBasis.computational(cfg.N)
        kind = "degenerate"
    else:
        kind = "mixed" if rho0.is_nondegenerate() else "degenerate"
        if kind == "mixed":
            u_par = parallel_transport_unitary(path, rho_n.basis, trajectory=traj)
        else:
            u_par, _ = build_parallel_family(path, rho_n, trajectory=traj)
        pur = purify_density(rho_n)
        basis = rho_n.basis
    ops = l2_arm_operators(u_par, basis, n, m)
    chis = np.linspace(0.0, 2 * math.pi, opts["chi_points"], endpoint=False)
    arms = interferogram(pur, *ops, chis=chis)
    circuit = conditional_circuit_readout(pur, *ops, chis=chis)
    fit_arms, fit_circuit = fit_interferogram(arms), fit_interferogram(circuit)
    engine = compute_phase(kind, path, rho0, (n, m), nodal_tol=cfg.nodal_tol, trajectory=traj)
    head = provenance_lines(cfg)
    a = _write(out_dir, f"{cfg.output}.csv", interferogram_csv(arms, head))
    b = _write(out_dir, f"{cfg.output}_circuit.csv", interferogram_csv(circuit, head))

    def rec(fit):
        return {"shift": _finite(fit.shift), "visibility": _finite(fit.visibility), "mean": fit.mean,
                "defined": fit.defined}

    payload = {"provenance": provenance(cfg), "indices": [n, m], "fit": rec(fit_arms),
               "circuit_fit": rec(fit_circuit), "engine": phase_record(engine)}
    c = _write(out_dir, f"{cfg.output}_fit.json", _json_text(payload))
    shift = f"{fit_arms.shift:+.10f}" if fit_arms.defined else "undefined"
    print(f"interfere ({n},{m}): shift {shift}, visibility {fit_arms.visibility:.6f} -> {a}, {b}, {c}")
    if cfg.require_defined and not fit_arms.defined:
        return EXIT_UNDEFINED
    return EXIT_OK


def run_selftest_mode(cfg: ExperimentConfig, out_dir: Path, workers: int) -> int:
    results = run_selftest(cfg.options["selftest"]["criteria"], cfg.seed, workers)
    for r in results:
        print(r.line())
    n_pass = sum(r.passed for r in results)
    print(f"selftest: {n_pass}/{len(results)} criteria passed")
    payload = {"provenance": provenance(cfg), "passed": n_pass, "failed": len(results) - n_pass,
               "criteria": [{"number": r.number, "name": r.name, "passed": r.passed, "value": _finite(r.value),
                             "bound": r.bound, "detail": r.detail} for r in results]}
    _write(out_dir, f"{cfg.output}.json", _json_text(payload))
    return EXIT_OK if n_pass == len(results) else EXIT_SELFTEST


RUNNERS = {"compute": run_compute, "scan": run_scan, "figure1": run_figure1, "interfere": run_interfere,
           "selftest": run_selftest_mode}


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geophase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"geophase {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in RUNNERS:
        p = sub.add_parser(verb)
        p.add_argument("--config", type=Path, help="JSON experiment configuration")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
        p.add_argument("--workers", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--seed", type=int, help="override the configuration seed")
        p.add_argument("--grid", type=int, help="override the number of time steps")
        p.add_argument("--tol", type=float, help="override the nodal tolerance")
    return parser


def load_config(verb: str, config_path: Path | None, seed: int | None) -> ExperimentConfig:
    if config_path is None:
        if verb == "figure1":
            return parse_config('{"mode": "figure1"}')
        if verb == "selftest":
            return parse_config(json.dumps({"mode": "selftest", "seed": 0 if seed is None else seed}))
        raise SchemaError(f"'{verb}' needs --config")
    try:
        text = config_path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {config_path}: {exc.strerror}") from None
    if seed is not None:
        raw = json.loads(text) if text.strip().startswith("{") else None
        if isinstance(raw, dict) and "seed" not in raw:
            raw["seed"] = seed
            text = json.dumps(raw, indent=2)
    return parse_config(text)


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise SchemaError("seed must be an unsigned 64-bit integer", field="seed")
        changes["seed"] = args.seed
    if args.grid is not None:
        if args.grid < 1:
            raise SchemaError("grid must be a positive number of steps", field="grid")
        changes["grid"] = args.grid
    if args.tol is not None:
        if not args.tol > 0:
            raise SchemaError("tolerance must be positive", field="tolerances.nodal")
        changes["nodal_tol"] = args.tol
    if not changes:
        return cfg
    # re-parse so the overridden document is validated and hashed like any other
    return parse_config(emit_config(dataclasses.replace(cfg, **changes)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = apply_overrides(load_config(args.verb, args.config, args.seed), args)
        if cfg.mode not in VERB_MODES[args.verb]:
            raise SchemaError(f"verb '{args.verb}' does not run mode {cfg.mode!r}; "
                              f"expected one of {list(VERB_MODES[args.verb])}", field="mode")
        return RUNNERS[args.verb](cfg, args.out, args.workers)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GeophaseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
