"""``qnpu-lab <experiment> --config <path> [--out <dir>] [--seed <u64>]``.

Each run writes ``<experiment>.csv`` and ``<experiment>.manifest.json`` into
the output directory. Exit status is 0 on success, 1 when the experiment
fails at run time and 2 when the command line or the config cannot be
parsed.

numpy is imported lazily so that ``QNPU_LAB_THREADS`` can cap the BLAS and
OpenMP pools before they are created.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from importlib import metadata

from .config import EXPERIMENTS, parse_config
from .errors import ConfigError, QnpuLabError

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class RunFailure(Exception):
    pass


def apply_thread_cap(environ=os.environ) -> int | None:
    raw = environ.get("QNPU_LAB_THREADS")
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise RunFailure(f"QNPU_LAB_THREADS must be a positive integer, got {raw!r}")
    for var in THREAD_VARS:
        environ[var] = str(n)
    return n


def fmt(v) -> str:
    """17 significant digits for floats, plain text for everything else."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    try:
        import numpy as np

        if isinstance(v, np.integer):
            return str(int(v))
        if isinstance(v, np.floating):
            return "%.17g" % float(v)
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise RunFailure(f"row width {len(r)} does not match header width {len(header)}")
        w.writerow([fmt(v) for v in r])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


# --------------------------------------------------------------------------
# experiment bodies; each returns (header, rows, summary)


def _grid(cfg):
    from .grid import build_grid

    return build_grid(cfg["grid.n"], cfg["grid.a"], cfg["grid.b"])


def _potentials(cfg) -> list:
    """``[(label, potential)]``; only ``disordered`` with several ``m`` gives more than one."""
    from .grid import BichromaticPotential, HarmonicPotential
    from .sampling import disordered_potential

    kind = cfg["potential.kind"]
    if kind == "harmonic":
        return [("", HarmonicPotential(cfg["potential.center"], cfg["potential.strength"]))]
    if kind == "bichromatic":
        s2 = cfg["potential.s2"]
        if s2 is None:
            s2 = cfg["potential.s1"] / cfg["potential.ratio"]
        return [("", BichromaticPotential(cfg["potential.s1"], s2, cfg["potential.kappa1"], cfg["potential.kappa2"]))]
    if kind == "disordered":
        return [(m, disordered_potential(m, cfg["potential.ratio"], cfg["potential.s1"]))
                for m in cfg["potential.m"]]
    if kind == "zero":
        return [("", None)]
    raise RunFailure(f"unhandled potential kind {kind!r}")  # pragma: no cover


def run_scan_cost(cfg, seed):
    from .optimize import scan_single_param, cost
    from .ansatz import AnsatzSpec

    grid = _grid(cfg)
    (_, pot), = _potentials(cfg)
    lams, reports = scan_single_param(grid, pot, cfg["g"], cfg["scan.step"])
    mode = cfg["scan.mode"]
    if mode != "exact":
        spec = AnsatzSpec(2, kind="single")
        reports = [
            cost(spec, [lam], grid, pot, cfg["g"], mode="sampled" if mode == "sampled" else "exact",
                 shots=cfg["scan.shots"], seed=(seed + i) % 2**64, path="circuit" if mode == "circuit" else "algebraic")
            for i, lam in enumerate(lams)
        ]
    rows = [(float(l), r.energies.K, r.energies.P, r.energies.I, r.total) for l, r in zip(lams, reports)]
    best = min(range(len(rows)), key=lambda i: rows[i][4])
    return ["lambda", "K", "P", "I", "total"], rows, {"lambda_min": rows[best][0], "cost_min": rows[best][4]}


def run_solve_gpe(cfg, seed):
    import math

    from .grid import eval_potential, imaginary_time_ground_state

    grid = _grid(cfg)
    (_, pot), = _potentials(cfg)
    gs = imaginary_time_ground_state(grid, pot, cfg["g"], dt=cfg["solver.dt"], tol=cfg["solver.tol"],
                                     max_iters=cfg["solver.max_iters"], scheme=cfg["solver.scheme"])
    values, _, _ = eval_potential(pot, grid)
    x = grid.x
    f = gs.psi / math.sqrt(grid.h)
    rows = [(k, float(x[k]), float(values[k]), float(f[k].real), float(abs(f[k]) ** 2)) for k in range(grid.N)]
    e = gs.energies
    summary = {"energy": gs.energy, "K": e.K, "P": e.P, "I": e.I, "mu": gs.mu, "residual": gs.residual,
               "iterations": gs.iterations, "scheme": gs.scheme}
    return ["k", "x", "V", "f", "density"], rows, summary


def run_fit_fidelity(cfg, seed):
    from .grid import imaginary_time_ground_state
    from .mps import ipr, s_max
    from .optimize import mps_curve, representation_curve

    grid = _grid(cfg)
    rows = []
    summary = {}
    for label, pot in _potentials(cfg):
        gs = imaginary_time_ground_state(grid, pot, cfg["g"])
        if cfg["fit.family"] == "brickwall":
            curve = representation_curve(gs.psi, cfg["fit.depths"], sweeps=cfg["fit.sweeps"], tol=cfg["fit.tol"])
        else:
            curve = mps_curve(gs.psi, cfg["fit.chis"], sweeps=cfg["fit.sweeps"])
        for size, count, eps in curve:
            rows.append((label, cfg["fit.family"], size, count, float(eps)))
        summary[str(label) or "target"] = {"ipr": ipr(gs.psi), "s_max": s_max(gs.psi)}
    return ["m", "family", "size", "param_count", "eps_R"], rows, summary


def run_mps_compile(cfg, seed):
    from .mps import compiled_fidelity, mps_to_circuit, random_mps
    from .qnpu import rng_from_seed

    rng = rng_from_seed(seed)
    rows = []
    worst = 1.0
    for n in cfg["mps.n"]:
        for chi in cfg["mps.chi"]:
            for i in range(cfg["mps.count"]):
                m = random_mps(n, chi, rng, real=cfg["mps.real"])
                comp = mps_to_circuit(m)
                fid = compiled_fidelity(m, comp)
                worst = min(worst, fid)
                rows.append((n, chi, i, float(fid), len(comp.unitaries), comp.depth_two_qubit))
    return ["n", "chi", "index", "fidelity", "unitaries", "two_qubit_gates"], rows, {"worst_fidelity": worst}


def run_sampling_analysis(cfg, seed):
    import numpy as np

    from .grid import imaginary_time_ground_state
    from .qnpu import rng_from_seed
    from .sampling import compute_constants, predict_errors, sample_expectation

    grid = _grid(cfg)
    (_, pot), = _potentials(cfg)
    g = cfg["g"]
    gs = imaginary_time_ground_state(grid, pot, g)
    br = gs.energies
    M, reps = cfg["sampling.shots"], cfg["sampling.repeats"]
    rng = rng_from_seed(seed)
    pred = predict_errors(br, grid, g, br.alpha, M)
    est = {
        "K": (1.0 - sample_expectation(br.sigma_K, M, rng, size=reps)) / br.h**2,
        "P": br.alpha * sample_expectation(br.sigma_P, M, rng, size=reps),
        "I": g / (2.0 * br.h) * sample_expectation(br.sigma_I, M, rng, size=reps),
    }
    exact = {"K": br.K, "P": br.P, "I": br.I}
    rows = []
    for q in ("K", "P", "I"):
        std = float(np.std(est[q], ddof=1))
        rows.append((q, M, reps, exact[q], float(np.mean(est[q])), std, pred[q][0], pred[q][1]))
    summary = {}
    kappa1 = getattr(pot, "kappa1", None)
    if kappa1 is not None and br.P != 0:
        c = compute_constants(gs.psi, grid, pot, g, kappa1)
        summary = {"C_P": c.C_P, "C_K": c.C_K, "C_I": c.C_I, "N_min": c.N_min, "n_min": c.n_min}
    header = ["quantity", "shots", "repeats", "exact", "mean", "empirical_std", "predicted_std", "predicted_rel"]
    return header, rows, summary


def run_burgers_evolve(cfg, seed):
    import numpy as np

    from .burgers import direct_euler, evolve, stable_tau

    grid = _grid(cfg)
    nu = cfg["burgers.nu"]
    if cfg["burgers.init"] == "sine":
        f0 = cfg["burgers.offset"] + cfg["burgers.amplitude"] * np.sin(2 * np.pi * cfg["burgers.mode"]
                                                                         * (grid.x - grid.a) / grid.length)
    else:
        f0 = np.array(cfg["burgers.values"], dtype=float)
    tau = cfg["burgers.tau"]
    if tau is None:
        tau = 0.5 * stable_tau(grid, nu)
        if not np.isfinite(tau):
            raise RunFailure("burgers.tau is required when burgers.nu <= 0")
    states = evolve(f0, grid, nu, tau, cfg["burgers.steps"], budget=cfg["burgers.budget"])
    ref = direct_euler(f0, grid, nu, tau, cfg["burgers.steps"])
    rows = [(s.t, s.lambda0, *(float(v) for v in s.f)) for s in states]
    dev = max(float(np.abs(s.f - r).max()) for s, r in zip(states, ref))
    header = ["t", "lambda0"] + [f"f_{k}" for k in range(grid.N)]
    return header, rows, {"tau": tau, "max_abs_deviation_from_dense_euler": dev}


RUNNERS = {
    "scan-cost": run_scan_cost,
    "solve-gpe": run_solve_gpe,
    "fit-fidelity": run_fit_fidelity,
    "mps-compile": run_mps_compile,
    "sampling-analysis": run_sampling_analysis,
    "burgers-evolve": run_burgers_evolve,
}


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _fail(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _fail("UsageError", message)
        raise SystemExit(2)


def _u64(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnpu-lab", description="Run one variational nonlinear-solver experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="flat dotted key = value file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=_u64, default=None, help="overrides the config's seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _fail("ConfigError", f"cannot read config: {exc.strerror}", path=args.config)
        return 2
    try:
        cfg = parse_config(text, args.experiment)
    except ConfigError as exc:
        _fail("ConfigError", str(exc), path=args.config, line=exc.line, column=exc.column)
        return 2
    seed = args.seed if args.seed is not None else cfg["seed"]
    try:
        threads = apply_thread_cap()
        os.makedirs(args.out, exist_ok=True)
        t0 = time.perf_counter()
        header, rows, summary = RUNNERS[args.experiment](cfg, seed)
        wall = time.perf_counter() - t0
        csv_path = os.path.join(args.out, f"{args.experiment}.csv")
        write_csv(csv_path, header, rows)
        manifest = {
            "experiment": args.experiment,
            "config": cfg.raw,
            "resolved_config": cfg.values,
            "config_path": os.path.abspath(args.config),
            "seed": seed,
            "threads": threads,
            "versions": _versions(),
            "wall_time_s": wall,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "csv": os.path.basename(csv_path),
            "rows": len(rows),
            "summary": summary,
        }
        with open(os.path.join(args.out, f"{args.experiment}.manifest.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    except (QnpuLabError, RunFailure, ValueError, ArithmeticError, OSError) as exc:
        _fail(type(exc).__name__, str(exc), experiment=args.experiment)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
