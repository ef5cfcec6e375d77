"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary (and to stderr as it happens), then asserts the same condition.
Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from conftest import record
from oracles import adder_resources, dft_matrix, fdm_laplacian, shift_down

from qnpu_lab.ansatz import AnsatzSpec, prepare_ansatz
from qnpu_lab.burgers import direct_euler, euler_target, evolve, richardson_slope, stable_tau
from qnpu_lab.cli import main as cli_main
from qnpu_lab.config import parse_config
from qnpu_lab.grid import HarmonicPotential, build_grid, imaginary_time_ground_state, laplacian_spectrum
from qnpu_lab.mps import compiled_fidelity, ipr, mps_to_circuit, random_mps, s_max
from qnpu_lab.optimize import brickwall_positions, fit_brickwall, maximize_fidelity, representation_curve, \
    scan_single_param
from qnpu_lab.qnpu import (
    OVERLAP_KINDS,
    adder_counts,
    adder_matrix_blocks,
    build_adder,
    kinetic_qnpu,
    nonlinear_qnpu,
    overlap_qnpu,
    potential_qnpu,
    readout_amplitude,
)
from qnpu_lab.sampling import detect_nmin, disordered_potential, scaling_slopes, scaling_table
from qnpu_lab.statevector import Circuit, prepare, state_prep_gate
from qnpu_lab import cli

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def verdict(num, title, ok, detail=""):
    record(num, title, bool(ok), detail)
    assert ok, detail


def test_01_single_parameter_scan():
    t0 = time.perf_counter()
    G = build_grid(2)
    pot = HarmonicPotential(0.5, 2000.0)
    worst_dens, worst_lam = 0.0, 0.0
    for g in (10.0, 1e4):
        lams, reps = scan_single_param(G, pot, g, step=0.1)
        i = int(np.argmin([r.total for r in reps]))
        psi = prepare_ansatz(AnsatzSpec(2, kind="single"), [lams[i]])
        oracle = imaginary_time_ground_state(G, pot, g).psi
        worst_dens = max(worst_dens, float(np.abs(np.abs(psi) ** 2 - np.abs(oracle) ** 2).max()))
        fine, freps = scan_single_param(G, pot, g, step=0.01)
        j = int(np.argmin([r.total for r in freps]))
        worst_lam = max(worst_lam, abs(lams[i] - fine[j]))
    wall = time.perf_counter() - t0
    ok = worst_dens < 0.02 and worst_lam <= 0.1 + 1e-12 and wall < 1.0
    verdict(1, "single-parameter scan vs oracle", ok,
            f"max density gap {worst_dens:.4f}, lambda gap {worst_lam:.2f}, {wall:.2f}s")


def test_02_adder():
    t0 = time.perf_counter()
    err, counts_ok = 0.0, True
    for n in range(1, 7):
        on, off, leak = adder_matrix_blocks(n)
        err = max(err, np.abs(on - shift_down(1 << n)).max(), np.abs(off - np.eye(1 << n)).max(), leak)
        counts_ok &= adder_counts(build_adder(n)) == adder_resources(n)
    wall = time.perf_counter() - t0
    verdict(2, "adder is the cyclic shift", err < 1e-12 and counts_ok and wall < 1.0,
            f"max error {err:.1e}, counts {'match' if counts_ok else 'differ'}, {wall:.2f}s")


def test_03_laplacian_diagonalization():
    err = 0.0
    for n in range(2, 7):
        N = 1 << n
        F = dft_matrix(N)
        lap = F.conj().T @ np.diag(laplacian_spectrum(N)) @ F / N**2
        err = max(err, np.abs(lap - fdm_laplacian(N)).max())
    verdict(3, "QFT diagonalizes the FDM Laplacian", err < 1e-9, f"max error {err:.1e}")


def _random_prep(n, rng, complex_=True):
    v = rng.normal(size=1 << n) + (1j * rng.normal(size=1 << n) if complex_ else 0)
    return Circuit(n).append(state_prep_gate(v, range(n)))


def test_04_qnpu_paths_agree():
    rng = np.random.default_rng(2024)
    worst = {}
    for i in range(100):
        n = 1 + i % 6
        prep = _random_prep(n, rng)
        vals = {
            "kinetic": kinetic_qnpu(prep, build_grid(n)).discrepancy,
            "potential": potential_qnpu(prep, _random_prep(n, rng, False), float(rng.uniform(0.5, 5))).discrepancy,
            "nonlinear": nonlinear_qnpu(prep).discrepancy,
        }
        k = int(rng.integers(1 << n))
        vals["readout"] = max(
            abs(readout_amplitude(prep, k, part) - readout_amplitude(prep, k, part, path="algebraic"))
            for part in ("real", "imaginary"))
        tilde = _random_prep(n, rng)
        for kind in OVERLAP_KINDS:
            vals[f"overlap {kind}"] = overlap_qnpu(tilde, prep, kind).discrepancy
        for key, v in vals.items():
            worst[key] = max(worst.get(key, 0.0), v)
    top = max(worst.values())
    verdict(4, "QNPU circuit and algebraic paths agree", top < 1e-9,
            f"worst {max(worst, key=worst.get)} {top:.1e} over 100 preparations each")


def test_05_mps_compilation():
    rng = np.random.default_rng(55)
    worst, counts_ok = 1.0, True
    for chi in (2, 4):
        for n in range(4, 11):
            for _ in range(100):
                m = random_mps(n, chi, rng)
                comp = mps_to_circuit(m)
                worst = min(worst, compiled_fidelity(m, comp))
                if chi == 2:
                    counts_ok &= len(comp.unitaries) == n - 1 and comp.depth_two_qubit == n - 1
                else:
                    counts_ok &= len(comp.unitaries) == n - 2 and comp.depth_two_qubit == 5 * (n - 2) + 1
                    counts_ok &= all(u.shape == (8, 8) for u in comp.unitaries)
    verdict(5, "MPS compilation", worst >= 1 - 1e-9 and counts_ok,
            f"worst fidelity 1 - {1 - worst:.1e}, counts {'match' if counts_ok else 'differ'}")


def test_06_sampling_error_laws():
    ranges = {"C_P": (64.3, 67.2), "C_K": (2.24, 2.30), "C_I": (2.58, 6.88)}
    seen = {k: [] for k in ranges}
    worst_std = 0.0
    for idx, (m, g) in enumerate([(m, g) for m in (16, 32, 64, 128) for g in (10, 50)]):
        text = (f"grid.n = 13\npotential.kind = disordered\npotential.m = {m}\ng = {g}\n"
                "sampling.shots = 10000\nsampling.repeats = 500\n")
        _, rows, summary = cli.run_sampling_analysis(parse_config(text, "sampling-analysis"), seed=100 + idx)
        for key in ranges:
            seen[key].append(summary[key])
        for _, _, _, _, _, emp, pred, _ in rows:
            if pred > 0:
                worst_std = max(worst_std, abs(emp / pred - 1.0))
    bad = []
    for key, (lo, hi) in ranges.items():
        vals = [round(v, 4) for v in seen[key]]
        if min(seen[key]) < lo or max(seen[key]) > hi:
            bad.append(f"{key} spans [{min(vals)}, {max(vals)}] outside [{lo}, {hi}]")
    if worst_std > 0.15:
        bad.append(f"empirical std off by {worst_std:.1%}")
    detail = "; ".join(bad) if bad else \
        ", ".join(f"{k} in [{min(v):.3f}, {max(v):.3f}]" for k, v in seen.items())
    verdict(6, "sampling constants and error laws", not bad, detail + f"; worst std deviation {worst_std:.1%}")


def test_07_scaling_detection():
    expected = {16: 6, 32: 7, 64: 8, 128: 9}
    got, worst_slope = {}, 0.0
    for m, want in expected.items():
        for g in (10.0, 50.0):
            pot = disordered_potential(m)
            tab = scaling_table(pot, g, range(4, 14))
            n0 = detect_nmin(pot, g, range(4, 14), table=tab)
            got[(m, g)] = n0
            sk, si = scaling_slopes(tab, n0)
            worst_slope = max(worst_slope, abs(sk + 2), abs(si + 1))
    ok = all(got[(m, g)] == expected[m] for m, g in got) and worst_slope <= 0.3
    verdict(7, "n_min detection and post-threshold slopes", ok,
            f"n_min {sorted(set(got.values()))}, worst slope deviation {worst_slope:.3f}")


def test_08_fidelity_sweeps():
    rng = np.random.default_rng(8)
    worst_drop = 0.0
    for n in range(3, 9):
        psi = rng.normal(size=1 << n)
        psi /= np.linalg.norm(psi)
        tr = np.array(maximize_fidelity(psi, brickwall_positions(n, 3), sweeps=10, record=True).trace)
        worst_drop = max(worst_drop, float(-np.diff(tr).min(initial=0.0)))
    worst_fid = 1.0
    for n in range(3, 9):
        for _ in range(5):
            m = random_mps(n, 2, rng, real=True)
            target = prepare(mps_to_circuit(m).circuit).real
            res = fit_brickwall(target, n, n - 1, sweeps=50, record=True)
            worst_drop = max(worst_drop, float(-np.diff(res.trace).min(initial=0.0)))
            worst_fid = min(worst_fid, res.fidelity)
    ok = worst_drop <= 1e-12 and worst_fid >= 1 - 1e-8
    verdict(8, "fidelity sweeps monotone and bond-2 targets recovered", ok,
            f"largest drop {worst_drop:.1e}, worst recovery 1 - {1 - worst_fid:.1e}")


def _log_vs_power(kappas, counts):
    lk, c = np.log(kappas), np.asarray(counts, float)
    lin = np.polyval(np.polyfit(lk, c, 1), lk)
    powr = np.exp(np.polyval(np.polyfit(lk, np.log(c), 1), lk))
    return float(np.sum((lin - c) ** 2)), float(np.sum((powr - c) ** 2))


@pytest.mark.slow
def test_09_representation_trends():
    G = build_grid(13)
    ms = (32, 64, 128)
    problems = []
    iprs, ents, iprs_weak, needed = [], [], [], []
    for m in ms:
        gs = imaginary_time_ground_state(G, disordered_potential(m), 50.0)
        iprs.append(ipr(gs.psi))
        ents.append(s_max(gs.psi))
        weak = imaginary_time_ground_state(G, disordered_potential(m, ratio=200.0), 50.0)
        iprs_weak.append(ipr(weak.psi))
        curve = representation_curve(gs.psi, range(1, 8), sweeps=600, tol=1e-11)
        eps = [e for _, _, e in curve]
        if not all(b < a for a, b in zip(eps, eps[1:])):
            problems.append(f"eps_R not strictly decreasing for m={m}")
        hit = [c for _, c, e in curve if e <= 0.05]
        needed.append(hit[0] if hit else None)
    if not all(b < a for a, b in zip(iprs, iprs[1:])):
        problems.append("IPR not decreasing")
    if not all(b > a for a, b in zip(ents, ents[1:])):
        problems.append("S_max not increasing")
    spread = (max(iprs_weak) - min(iprs_weak)) / min(iprs_weak)
    if spread >= 0.2:
        problems.append(f"weak-disorder IPR varies by {spread:.1%}")
    if None in needed:
        problems.append("eps_R <= 0.05 not reached")
    else:
        if not all(b >= a for a, b in zip(needed, needed[1:])):
            problems.append("required parameter count decreases")
        r_log, r_pow = _log_vs_power([2 * math.pi * m for m in ms], needed)
        if not r_log < r_pow:
            problems.append(f"log fit residual {r_log:.3g} not below power fit {r_pow:.3g}")
    detail = "; ".join(problems) if problems else (
        f"IPR {[round(v, 4) for v in iprs]}, S_max {[round(v, 3) for v in ents]}, "
        f"weak spread {spread:.1%}, counts for eps_R<=0.05 {needed}")
    verdict(9, "representation trends", not problems, detail)


def test_10_burgers():
    f = lambda x: np.sin(2 * math.pi * x) + 0.3 * np.cos(4 * math.pi * x) + 0.1
    nu = 0.05
    worst_step, worst_norm, worst_traj = 0.0, 0.0, 0.0
    for n in (2, 3, 4):
        G = build_grid(n)
        tau = 0.2 * stable_tau(G, nu)
        states = evolve(f(G.x), G, nu, tau, 20)
        ref = direct_euler(f(G.x), G, nu, tau, 20)
        for prev, cur in zip(states, states[1:]):
            worst_step = max(worst_step, float(np.abs(cur.f - euler_target(prev, tau)).max()))
        for s, r in zip(states, ref):
            worst_norm = max(worst_norm, abs(s.lambda0**2 - float(s.f @ s.f)) / max(s.lambda0**2, 1e-300))
            worst_traj = max(worst_traj, float(np.abs(s.f - r).max()))
    G = build_grid(3)
    _, _, slope = richardson_slope(f(G.x), G, nu, 0.25 * stable_tau(G, nu), 8, variational=True)
    ok = worst_step < 1e-6 and worst_norm < 1e-12 and abs(slope - 1.0) <= 0.2
    verdict(10, "variational Burgers evolution", ok,
            f"per-step error {worst_step:.1e}, norm mismatch {worst_norm:.1e}, "
            f"trajectory gap {worst_traj:.1e}, Richardson slope {slope:.3f}")


def test_11_cli_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("QNPU_LAB_THREADS", raising=False)
    configs = {
        "scan-cost": "scan-cost", "solve-gpe": "solve-gpe", "fit-fidelity": "fit-fidelity-quick",
        "mps-compile": "mps-compile", "sampling-analysis": "sampling-analysis", "burgers-evolve": "burgers-evolve",
    }
    differing = []
    for exp, cfg in configs.items():
        outs = []
        for run in ("a", "b"):
            rc = cli_main([exp, "--config", str(CONFIGS / f"{cfg}.cfg"), "--out", str(tmp_path / run),
                           "--seed", "12345"])
            assert rc == 0
            outs.append((tmp_path / run / f"{exp}.csv").read_bytes())
        if outs[0] != outs[1]:
            differing.append(exp)
    verdict(11, "CLI re-runs are byte-identical", not differing,
            f"differs: {differing}" if differing else f"{len(configs)} experiments")
