"""Command-line harness: simulate, tomogram, reconstruct, figures, validate.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 invariant
breach.  Every emitted file embeds the configuration hash; writes are atomic
(write-then-rename) and deterministic given config + seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np
from scipy.integrate import quad

from . import __version__
from .benchmark import benchmark_mec_model, unit_lambda, unit_lambda_integral
from .config import ExperimentConfig, load_config
from .core import CumulantState, MecModel
from .dynamics import evolve, make_propagators, trajectory_csv
from .errors import ConfigError, GspError, InvariantBreach
from .reconstruct import run_full_reconstruction
from .tomography import (
    LINE_DIAG,
    LINE_P,
    LINE_Q,
    default_covariance_xs,
    default_first_cumulant_xs,
    line_moments,
    points_to_json,
    radon_gaussian,
    sample_tomogram,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _run_dir(cfg: ExperimentConfig) -> str:
    return os.path.join(cfg.output.directory, f"run-{cfg.hash()}")


def _resolve_mec(cfg: ExperimentConfig, h) -> MecModel:
    if cfg.model.kind == "benchmark":
        return benchmark_mec_model(h)
    if not cfg.model.factory:
        raise ConfigError("custom models need model.factory = 'module:callable'")
    module_name, _, attr = cfg.model.factory.partition(":")
    if not module_name or not attr:
        raise ConfigError("model.factory must look like 'module:callable'")
    import importlib

    try:
        factory = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load model factory: {exc}") from exc
    mec = factory(h)
    if not isinstance(mec, MecModel):
        raise ConfigError("model.factory must return a MecModel")
    return mec


def cmd_simulate(cfg: ExperimentConfig) -> int:
    h = cfg.hamiltonian.build()
    mec = _resolve_mec(cfg, h)
    probe = cfg.probe.build()
    tip_sets = cfg.model.tip_sets
    if tip_sets is None:
        tip_sets = (tuple(cfg.model.ground_truth(h).to_vector()),)
    out = os.path.join(_run_dir(cfg), "trajectories")
    for idx, tips in enumerate(tip_sets):
        traj = evolve(probe, h, mec, np.asarray(tips), cfg.t_grid())
        text = trajectory_csv(
            traj,
            h,
            tip_names=mec.tip_names,
            extra_header=[f"config_hash: {cfg.hash()}"],
        )
        path = os.path.join(out, f"trajectory_{idx:03d}.csv")
        _atomic_write(path, text)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_tomogram(cfg: ExperimentConfig) -> int:
    h = cfg.hamiltonian.build()
    mec = _resolve_mec(cfg, h)
    probe = cfg.probe.build()
    tips = np.asarray(cfg.model.ground_truth(h).to_vector()) if cfg.model.kind == "benchmark" else None
    if tips is None:
        raise ConfigError("tomogram emission is wired to the benchmark ground truth")
    seed = cfg.noise.seeds[0]
    times = sorted({cfg.schedule.t1, cfg.schedule.t2})
    traj = evolve(probe, h, mec, tips, times)
    out = os.path.join(_run_dir(cfg), "tomograms")
    count = 0
    for t_i in times:
        state = traj.state_at(t_i)
        for tag, line in (("q", LINE_Q), ("p", LINE_P), ("diag", LINE_DIAG)):
            mean, spread = line_moments(state, h, line)
            if tag == "diag":
                xs = default_covariance_xs(mean, math.sqrt(spread))
            else:
                xs = default_first_cumulant_xs(math.sqrt(spread), mean)
            pts = sample_tomogram(state, h, line, xs, cfg.noise.sigma, rng_seed=seed + count)
            doc = json.loads(points_to_json(line, pts, cfg.noise.sigma, seed + count))
            doc["config_hash"] = cfg.hash()
            doc["time"] = t_i
            path = os.path.join(out, f"t{t_i:g}_{tag}.json")
            _atomic_write(path, json.dumps(doc, indent=2))
            print(f"wrote {path}")
            count += 1
    return EXIT_OK


def _report_row(report, elapsed):
    tips = report.tips_found
    return (
        f"{report.method:<13} {report.total_points:>6}   "
        f"{tips['alpha_sq']:.6g}  {tips['omega_c']:.6g}  "
        f"{tips['kT_over_hbar_omega']:.6g}   "
        f"{max(abs(v) for v in report.residuals.values()):.2e}  {elapsed * 1e3:7.1f} ms"
    )


def cmd_reconstruct(cfg: ExperimentConfig) -> int:
    if cfg.model.kind != "benchmark":
        raise ConfigError("reconstruction solvers are specific to the benchmark model")
    h = cfg.hamiltonian.build()
    tips = cfg.model.ground_truth(h)
    schedule = cfg.schedule.build()
    probe = cfg.probe.build()
    methods = ("integral", "differential") if cfg.method == "both" else (cfg.method,)
    out = os.path.join(_run_dir(cfg), "reports")

    print("method        points   alpha_sq   omega_c   kT/(hw)     |resid|    wall")
    for method in methods:
        started = time.perf_counter()
        report = run_full_reconstruction(
            method,
            tips,
            h,
            schedule,
            noise_sigma=cfg.noise.sigma,
            seed=cfg.noise.seeds[0],
            rotating_frame=cfg.rotating_frame and method == "integral",
            probe=probe,
        )
        elapsed = time.perf_counter() - started
        doc = json.loads(report.to_json())
        doc["config_hash"] = cfg.hash()
        path = os.path.join(out, f"report_{method}.json")
        _atomic_write(path, json.dumps(doc, indent=2))
        print(_report_row(report, elapsed))
        print(f"wrote {path}")
    if cfg.method == "both":
        print(
            "comparison: the integral route spends fewer tomographic points; "
            "the differential route trades extra points for purely algebraic "
            "inversion."
        )
    return EXIT_OK


def cmd_figures(cfg: ExperimentConfig) -> int:
    if cfg.model.kind != "benchmark":
        raise ConfigError("figure data generation is specific to the benchmark model")
    h = cfg.hamiltonian.build()
    tips = cfg.model.ground_truth(h)
    schedule = cfg.schedule.build()
    out = os.path.join(_run_dir(cfg), "figures")
    methods = ("integral", "differential") if cfg.method == "both" else (cfg.method,)
    ws = np.geomspace(0.05 * h.omega, 100.0 * h.omega, 256)

    for method in methods:
        curves = {}
        for label, t_i in (("t1", schedule.t1), ("t2", schedule.t2)):
            if method == "integral":
                measured = float(
                    tips.alpha_sq * unit_lambda_integral(tips.omega_c, h, t_i)
                )
                denom = unit_lambda_integral(ws, h, t_i)
            else:
                measured = float(tips.alpha_sq * unit_lambda(tips.omega_c, h, t_i))
                denom = unit_lambda(ws, h, t_i)
            with np.errstate(all="ignore"):
                alpha_curve = measured / denom
            curves[label] = alpha_curve
            rows = ["# config_hash: " + cfg.hash(), "omega_c_over_omega,alpha_sq"]
            rows += [
                f"{w / h.omega:.10g},{a:.10g}" for w, a in zip(ws, alpha_curve)
            ]
            path = os.path.join(out, f"{method}_curve_{label}.csv")
            _atomic_write(path, "\n".join(rows) + "\n")
            print(f"wrote {path}")

        report = run_full_reconstruction(
            method,
            tips,
            h,
            schedule,
            noise_sigma=0.0,
            seed=cfg.noise.seeds[0],
            probe=cfg.probe.build(),
        )
        doc = {
            "config_hash": cfg.hash(),
            "method": method,
            "intersection": {
                "omega_c_over_omega": report.tips_found["omega_c"] / h.omega,
                "alpha_sq": report.tips_found["alpha_sq"],
            },
        }
        path = os.path.join(out, f"{method}_intersection.json")
        _atomic_write(path, json.dumps(doc, indent=2))
        print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig) -> int:
    """Run the invariant suite on the configured experiment."""
    h = cfg.hamiltonian.build()
    mec = _resolve_mec(cfg, h)
    probe = cfg.probe.build()
    tips = np.asarray(cfg.model.ground_truth(h).to_vector())
    failures = []

    def check(name, ok, detail=""):
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    traj = evolve(probe, h, mec, tips, cfg.t_grid())
    rs = np.array([st.rs_value for st in traj.samples])
    check(
        "uncertainty bound along trajectory",
        bool(np.all(rs >= 0.25 - 1e-6)),
        f"min x0*x1-x2^2 = {rs.min():.6f}",
    )

    zero = MecModel(
        lambda_=lambda t, p: 0.0,
        d_qq=lambda t, p: 0.0,
        d_pp=lambda t, p: 0.0,
        d_qp=lambda t, p: 0.0,
        tip_names=(),
    )
    closed = evolve(probe, h, zero, (), cfg.t_grid())
    inv = np.array([st.rs_value for st in closed.samples])
    drift = float(np.max(np.abs(inv - inv[0])))
    check("symplectic invariant conserved (closed dynamics)", drift <= 1e-8, f"drift {drift:.2e}")

    state = traj.samples[-1]
    worst = 0.0
    for line in (LINE_Q, LINE_P, LINE_DIAG):
        mean, spread = line_moments(state, h, line)
        width = 12.0 * math.sqrt(spread)
        total, _ = quad(
            lambda x: radon_gaussian(state, h, line, x), mean - width, mean + width
        )
        worst = max(worst, abs(total - 1.0))
    check("tomogram normalization", worst <= 1e-8, f"max |int - 1| = {worst:.2e}")

    if cfg.model.kind == "benchmark":
        bt = cfg.model.ground_truth(h)
        if not bt.high_temperature_form_ok:
            print(
                "NOTE  kT/(hbar omega) < 2: the high-temperature diffusion "
                "form is outside its comfort zone"
            )

    if failures:
        raise InvariantBreach("; ".join(failures))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsptomo",
        description=(
            "Gaussian-probe simulator and parameter-reconstruction suite for "
            "time-local open-system dynamics"
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "evolve the probe and write trajectory CSV files"),
        ("tomogram", "emit sampled tomogram point sets as JSON"),
        ("reconstruct", "run the full reconstruction pipeline and write reports"),
        ("figures", "emit coupling-curve CSVs and their intersection"),
        ("validate", "run the invariant suite on a configuration"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="PATH", default=None)
        cmd.add_argument("--seed", type=int, default=None, metavar="N")
        cmd.add_argument(
            "--method", choices=("integral", "differential", "both"), default=None
        )
        cmd.add_argument("--noise-sigma", type=float, default=None, metavar="X")
        cmd.add_argument("--out", default=None, metavar="DIR")
        cmd.add_argument("--rotating-frame", action="store_true")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "tomogram": cmd_tomogram,
    "reconstruct": cmd_reconstruct,
    "figures": cmd_figures,
    "validate": cmd_validate,
}


def _error_record(code: int, exc: BaseException) -> None:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "method": args.method,
        "seed": args.seed,
        "noise_sigma": args.noise_sigma,
        "out": args.out,
        "rotating_frame": args.rotating_frame,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        _error_record(EXIT_CONFIG, exc)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _error_record(EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except InvariantBreach as exc:
        _error_record(EXIT_INVARIANT, exc)
        return EXIT_INVARIANT
    except GspError as exc:
        _error_record(EXIT_SOLVER, exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
