"""Command-line runner.

    fraburgers <evolve|steady|decay|stability|degiorgi|verify> --config PATH
               [--out DIR] [--override-gate] [--emit-plots]

Each run directory gets ``manifest.json`` (written before the run and
finalized after) plus the CSV artifacts of the subcommand.  Exit codes:
0 all checks pass, 1 a check failed, 2 configuration error, 3 smallness
gate failed, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    cordoba_family,
    decay_experiment,
    fit_level_constant,
    level_scale,
    level_set_energy,
    linf_bound_check,
    random_perturbation,
    exponent_condition,
    split_diagnostic,
    stability_experiment,
    window_cap,
)
from .config import RunConfig, load
from .errors import ConfigError, ContractViolation, FraburgersError, SmallnessGateError
from .evolution import integrate
from .forcing import generate_forcing
from .inequalities import ratio_family
from .persist import RunWriter
from .spectral import Params, RealField, forward, is_mean_zero, random_band_field, sobolev_norm
from .steady import picard_solve, smallness_gate, steady_via_time_integral, uniqueness_probe
from .suite import embedding_scale_defect, property_suite

OUT_ENV = "FRABURGERS_OUT"
COMMANDS = ("evolve", "steady", "decay", "stability", "degiorgi", "verify")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_GATE, EXIT_NUMERIC = 0, 1, 2, 3, 4

CONTRACTION_LIMIT = 0.6
SCALE_INVARIANCE_TOL = 1e-4
CORDOBA_TOL = 1e-8


class Run:
    """Mutable run record: checks, summary values and phase timings."""

    def __init__(self, command: str, cfg: RunConfig, writer: RunWriter, override_gate=False,
                 emit_plots=False):
        self.command = command
        self.cfg = cfg
        self.writer = writer
        self.override_gate = override_gate
        self.emit_plots = emit_plots
        self.checks: dict[str, bool] = {}
        self.summary: dict[str, float] = {}
        self.timings: dict[str, float] = {}
        self.gate = None
        self.status = "running"
        self.error = None

    @contextmanager
    def phase(self, name):
        t = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    def manifest(self) -> dict:
        return {
            "artifact_version": __version__,
            "command": self.command,
            "config_text": self.cfg.text,
            "config": self.cfg.echo(),
            "smallness": None if self.gate is None else asdict(self.gate),
            "override_gate": self.override_gate,
            "status": self.status,
            "checks": self.checks,
            "summary": self.summary,
            "timings": self.timings,
            "artifacts": list(self.writer.written),
            "error": self.error,
        }

    def save(self):
        self.writer.json("manifest.json", _jsonable(self.manifest()))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return obj


def _forcing(cfg: RunConfig, p: Params | None = None) -> RealField:
    return generate_forcing(cfg.forcing, cfg.grid, p or cfg.params)


def _initial(cfg, amplitude, seed, k_max) -> RealField:
    if amplitude == 0:
        return cfg.grid.zeros()
    g = cfg.grid
    return random_band_field(g, np.random.default_rng(seed), g.k_min, k_max) * amplitude


def _gate(run: Run, f: RealField):
    run.gate = smallness_gate(f, run.cfg.params)
    run.summary["gate_value"] = run.gate.gate_value
    run.save()
    if not run.gate.passed and not run.override_gate:
        raise SmallnessGateError(run.gate)


def _steady_state(run: Run, f: RealField):
    c = run.cfg.steady
    with run.phase("picard"):
        U, trace = picard_solve(
            f, run.cfg.params, tol=c.tol, max_iter=c.max_iter,
            enforce_gate=not run.override_gate,
        )
    return U, trace


# ------------------------------------------------------------ subcommands


def run_evolve(run: Run):
    cfg, p, c = run.cfg, run.cfg.params, run.cfg.evolve
    f = _forcing(cfg)
    run.gate = smallness_gate(f, p) if p.alpha < p.alpha_limit else None
    u0 = _initial(cfg, c.u0_amplitude, c.u0_seed, c.u0_k_max)
    with run.phase("integrate"):
        traj, ledger = integrate(forward(u0), forward(f), p, stride=c.stride)
    run.writer.rows("ledger.csv", ledger.rows)
    run.writer.trajectory("trajectory.csv", traj)
    mean = ledger.column("mean")
    t = ledger.column("t")
    run.check("ledger_inequality", ledger.all_ok)
    run.check("mean_conservation", np.all(np.abs(mean - mean[0]) <= 1e-9 * (1 + t)))
    run.check(
        "dissipation_nondecreasing",
        np.all(np.diff(ledger.column("diss_acc")) >= 0)
        and np.all(np.diff(ledger.column("visc_acc")) >= 0),
    )
    run.summary["ledger_worst_margin"] = ledger.worst_margin()
    if run.emit_plots:
        run.writer.xy("l2_sq.dat", t, ledger.column("l2_sq"))


def run_steady(run: Run):
    cfg, p, c = run.cfg, run.cfg.params, run.cfg.steady
    f = _forcing(cfg)
    _gate(run, f)
    U, trace = _steady_state(run, f)
    run.writer.rows("trace.csv", trace.rows)
    run.writer.table("steady.csv", ["x", "U"], zip(cfg.grid.x, U.values))
    last = trace.rows[-1]
    run.check("converged", trace.converged)
    run.check("contraction", trace.max_ratio(2) <= CONTRACTION_LIMIT)
    run.check("h_half_bound", trace.bound_ok())
    run.check("residual", last.residual <= 10 * c.tol)
    run.check("zero_mode", is_mean_zero(forward(U).coeffs, 1e-13))
    run.summary.update(
        iterations=len(trace.rows), final_residual=last.residual,
        max_ratio=trace.max_ratio(2),
    )
    with run.phase("time_integral"):
        Ut = steady_via_time_integral(
            forward(U), forward(f), p, tail_tol=c.tail_tol, max_time=c.max_time
        )
    diff = sobolev_norm(forward(U) - Ut, 0.0)
    u_l2 = sobolev_norm(forward(U), 0.0)
    run.summary["dual_route_diff"] = diff
    run.check("dual_route", diff <= max(1e-4 * u_l2, 10 * (c.tol + c.tail_tol)))
    with run.phase("uniqueness"):
        probe = uniqueness_probe(
            U, f, p, c.n_perturb, tol=c.tol, seed=c.perturb_seed, workers=c.workers
        )
    if probe.restarts:
        run.writer.rows("restarts.csv", probe.restarts)
    run.summary["uniqueness_spread"] = probe.spread
    run.check("uniqueness", not probe.failures and probe.spread <= 10 * c.tol)
    if run.emit_plots:
        run.writer.xy("steady.dat", cfg.grid.x, U.values)


def run_decay(run: Run):
    cfg, p, c = run.cfg, run.cfg.params, run.cfg.decay
    f = _forcing(cfg)
    _gate(run, f)
    U, _ = _steady_state(run, f)
    window = None
    if c.window_end != "auto":
        window = (c.window_start, c.window_end)
    elif c.window_start > 0:
        window = (c.window_start, min(p.t_end, window_cap(cfg.grid, p)))
    with run.phase("decay"):
        rep = decay_experiment(
            U, f, p, window=window, slack=c.slack, stride=c.stride,
            enforce_gate=not run.override_gate,
        )
    run.writer.rows("decay.csv", rep.rows)
    split = split_diagnostic(rep.trajectory, p)
    run.writer.rows("split.csv", split.rows)
    exponent, exp_ok = exponent_condition(p.alpha, p.eps)
    run.check("decay_bound", rep.all_ok)
    run.check("exponent_condition", exp_ok)
    worst = 0.0
    for row, l2 in zip(split.rows, rep.rows):
        total = l2.l2**2
        if total > 0:
            worst = max(worst, abs(row.low_energy + row.high_energy - total) / total)
    run.check("split_partition", worst <= 1e-12)
    run.summary.update(
        fit_exponent=rep.fit_exponent, bound_exponent=exponent,
        window_start=rep.window[0], window_end=rep.window[1],
    )
    if run.emit_plots:
        run.writer.xy("decay.dat", [r.t for r in rep.rows], [r.l2 for r in rep.rows])


def run_stability(run: Run):
    cfg, p, c = run.cfg, run.cfg.params, run.cfg.stability
    f = _forcing(cfg)
    _gate(run, f)
    U, _ = _steady_state(run, f)
    theta = random_perturbation(
        cfg.grid, p, c.theta_fraction * sobolev_norm(forward(U), 0.0), seed=c.theta_seed
    )
    with run.phase("stability"):
        rep = stability_experiment(U, theta, f, p, stride=c.stride)
    run.writer.rows("stability.csv", rep.rows)
    run.check("ledger", rep.ledger_ok)
    run.check("monotone", rep.monotone)
    run.check("threshold", rep.final_ratio <= c.threshold)
    run.summary.update(final_ratio=rep.final_ratio, max_step_growth=rep.max_step_growth)
    if run.emit_plots:
        run.writer.xy(
            "w_l2.dat", [r.t for r in rep.rows], [math.sqrt(r.w_l2_sq) for r in rep.rows]
        )


def run_degiorgi(run: Run):
    cfg, c = run.cfg, run.cfg.degiorgi
    p = run.cfg.params
    if p.t_end < c.t0:
        raise ConfigError(f"params.t_end={p.t_end} is shorter than degiorgi.t0={c.t0}")
    f = _forcing(cfg)
    u0 = _initial(cfg, c.u0_amplitude, c.u0_seed, c.u0_k_max)
    with run.phase("integrate"):
        traj, _ = integrate(forward(u0), forward(f), p, stride=c.stride)
    with run.phase("level_sets"):
        base = level_set_energy(traj, c.t0, 0.0, 0, f, tol=c.tol)
        scale = level_scale(base.E0, c.t0, f)
        const = c.level_constant
        if const == "auto":
            const = fit_level_constant([traj], c.t0, c.n_max, f, target=c.target)
        rep = level_set_energy(traj, c.t0, const * scale, c.n_max, f, tol=c.tol)
    run.writer.rows("levelset.csv", rep.rows)
    run.writer.rows("level_checks.csv", rep.checks)
    run.check("level_inequality", not rep.violations)
    run.check("level_decreasing", rep.decreasing())
    run.check("level_threshold", rep.rows[-1].E_n <= c.target * rep.E0)
    with run.phase("cordoba"):
        fam = cordoba_family(cfg.grid, p.alpha, seed=c.u0_seed)
    run.writer.table("cordoba.csv", ["lhs", "rhs", "h_half_sq"], fam)
    run.check("cordoba", all(l >= r - CORDOBA_TOL * n for l, r, n in fam))
    linf = linf_bound_check(traj, u0, f)
    run.writer.rows("linf.csv", linf.rows)
    run.check("linf_finite", math.isfinite(linf.max_ratio))
    run.summary.update(
        M=rep.M, level_constant=const, E0=rep.E0, linf_max_ratio=linf.max_ratio
    )


def run_verify(run: Run):
    cfg, p, c = run.cfg, run.cfg.params, run.cfg.verify
    with run.phase("properties"):
        results = property_suite(cfg.grid, p, seed=c.seed)
    run.writer.rows("properties.csv", results)
    for r in results:
        run.check(r.name, r.ok)
    with run.phase("ratios"):
        fam = ratio_family(cfg.grid, p, size=c.family_size, seed=c.seed, lp=c.lp)
    run.writer.table(
        "ratios.csv",
        ["sample", "embedding", "interpolation", "product"],
        ([i, r.embedding, r.interpolation, r.product] for i, r in enumerate(fam.reports)),
    )
    run.check("ratio_maxima_finite", fam.all_finite())
    scale = embedding_scale_defect(cfg.grid, p, lp=c.lp)
    run.check("embedding_scale_invariance", scale <= SCALE_INVARIANCE_TOL)
    run.summary.update({f"max_{k}": v for k, v in fam.maxima().items()})
    run.summary["embedding_scale_defect"] = scale


RUNNERS = {
    "evolve": run_evolve,
    "steady": run_steady,
    "decay": run_decay,
    "stability": run_stability,
    "degiorgi": run_degiorgi,
    "verify": run_verify,
}


def execute(command: str, cfg: RunConfig, out_dir, override_gate=False, emit_plots=False) -> tuple[int, Run]:
    """Run one subcommand into ``out_dir``; returns (exit code, run record)."""
    writer = RunWriter(out_dir)
    run = Run(command, cfg, writer, override_gate, emit_plots)
    run.save()
    code = EXIT_OK
    try:
        RUNNERS[command](run)
        run.status = "pass" if all(run.checks.values()) else "fail"
        code = EXIT_OK if run.status == "pass" else EXIT_CHECK
    except SmallnessGateError as exc:
        run.status, run.error, code = "gate_failed", str(exc), EXIT_GATE
    except (ConfigError, ContractViolation) as exc:
        run.status, run.error, code = "config_error", f"{type(exc).__name__}: {exc}", EXIT_CONFIG
    except FraburgersError as exc:
        run.status, run.error, code = "numerical_error", f"{type(exc).__name__}: {exc}", EXIT_NUMERIC
    run.save()
    return code, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraburgers", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<command> or ./runs/<command>)")
    ap.add_argument("--override-gate", action="store_true",
                    help="run solvers even if the smallness gate fails")
    ap.add_argument("--emit-plots", action="store_true",
                    help="also write two-column .dat files for gnuplot")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or str(Path(os.environ.get(OUT_ENV, "runs")) / args.command)
    code, run = execute(args.command, cfg, out, args.override_gate, args.emit_plots)
    for name, ok in run.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"{args.command}: {run.status} -> {out}")
    if run.error:
        print(run.error, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
