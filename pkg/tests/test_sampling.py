import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import NMIN_TABLE

from qnpu_lab.errors import DetectionError, InvalidArgument, PreconditionError
from qnpu_lab.grid import (
    EnergyBreakdown,
    HarmonicPotential,
    TabulatedPotential,
    build_grid,
    imaginary_time_ground_state,
)
from qnpu_lab.sampling import (
    compute_constants,
    detect_nmin,
    disordered_potential,
    l_min,
    n_min_for,
    predict_errors,
    sample_expectation,
    sample_sigma_z,
    sampled_energies,
    sampling_reports,
    scaling_slopes,
    scaling_table,
)


def test_sigma_z_extremes():
    assert sample_sigma_z(1.0, 100, 0) == 1.0
    assert sample_sigma_z(0.0, 100, 0) == -1.0
    M = 10**6
    assert abs(sample_sigma_z(0.5, M, 3)) < 5 / math.sqrt(M)
    with pytest.raises(InvalidArgument):
        sample_sigma_z(1.5, 10, 0)
    with pytest.raises(InvalidArgument):
        sample_sigma_z(0.5, 0, 0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.95, 0.95), st.integers(0, 2**63))
def test_sigma_z_std_matches_binomial_law(sigma, seed):
    M = 400
    draws = sample_expectation(sigma, M, seed, size=1000)
    expect = math.sqrt(1 - sigma**2) / math.sqrt(M)
    assert np.std(draws, ddof=1) == pytest.approx(expect, rel=0.1)


def test_sampling_is_seed_deterministic():
    a = sample_expectation(0.3, 1000, 42, size=5)
    b = sample_expectation(0.3, 1000, 42, size=5)
    np.testing.assert_array_equal(a, b)


def _breakdown(sk, sp, si, alpha=10.0, h=0.25, g=2.0):
    return EnergyBreakdown((1 - sk) / h**2, alpha * sp, g / (2 * h) * si, sk, sp, si, alpha, h, g)


def test_predict_errors_formulas():
    G = build_grid(2)
    br = _breakdown(0.5, 1.0, 0.3)
    pred = predict_errors(br, G, 2.0, 10.0, 100)
    assert pred["P"][0] == 0.0  # deterministic outcome
    assert pred["K"][0] == pytest.approx(16 * math.sqrt(1 - 0.25) / 10)
    assert pred["I"][0] == pytest.approx(0.5 * 2.0 * 4 * math.sqrt(1 - 0.09) / 10)
    assert pred["K"][1] == pytest.approx(pred["K"][0] / br.K)
    with pytest.raises(PreconditionError):
        predict_errors(_breakdown(1.5, 0.0, 0.0), G, 2.0, 10.0, 100)


def test_reports_carry_both_views():
    br = _breakdown(0.5, 0.2, 0.3)
    reps = sampling_reports(br, build_grid(2), 1000, 1)
    assert [r.quantity for r in reps] == ["K", "P", "I"]
    est = sampled_energies(br, 1000, 1)
    assert reps[0].estimate == est["K"]


def test_nmin_rule():
    for m, n in NMIN_TABLE.items():
        Nmin, nmin = n_min_for(2 * math.pi * m)
        assert nmin == n and Nmin == pytest.approx(4 * m)
    assert l_min(2 * math.pi) == pytest.approx(0.25)


def test_constants_special_cases():
    G = build_grid(3)
    # potential spike under a basis state: alpha = |P| so C_P vanishes
    spike = np.zeros(8)
    spike[2] = 7.0
    psi = np.zeros(8)
    psi[2] = 1.0
    c = compute_constants(psi, G, TabulatedPotential(spike), 1.0, kappa1=2 * math.pi)
    assert c.C_P == 0.0
    psi = np.ones(8) / math.sqrt(8)
    with pytest.raises(PreconditionError):
        compute_constants(psi, G, TabulatedPotential(np.zeros(8)), 1.0, kappa1=1.0)
    with pytest.raises(InvalidArgument):
        compute_constants(psi, G, HarmonicPotential(0.5, 1.0), 1.0)


@pytest.mark.parametrize("m,n_range", [(16, range(5, 12)), (32, range(5, 13))])
def test_detect_nmin_examples(m, n_range):
    assert detect_nmin(disordered_potential(m), 10.0, n_range) == NMIN_TABLE[m]


def test_detect_nmin_flat_is_degenerate():
    assert detect_nmin(None, 0.0, range(3, 8)) == 3


def test_detect_nmin_failure_and_validation():
    # a table that never settles into the expected slopes
    table = {n: (1 - 2.0**-n, 0.5) for n in range(4, 10)}
    with pytest.raises(DetectionError):
        detect_nmin(None, 1.0, range(4, 10), table=table)
    with pytest.raises(InvalidArgument):
        detect_nmin(None, 1.0, range(4, 6))
    with pytest.raises(InvalidArgument):
        detect_nmin(None, 1.0, [4, 5, 7, 8])


def test_post_threshold_slopes_and_potential_convergence():
    pot = disordered_potential(16)
    ns = range(4, 12)
    tab = scaling_table(pot, 50.0, ns)
    n0 = detect_nmin(pot, 50.0, ns, table=tab)
    sk, si = scaling_slopes(tab, n0)
    assert abs(sk + 2) < 0.3 and abs(si + 1) < 0.3
    sp = [imaginary_time_ground_state(build_grid(n), pot, 50.0).energies.sigma_P for n in range(n0, 12)]
    diffs = np.abs(np.diff(sp))
    assert np.all(np.diff(diffs) < 0)


def test_relative_errors_grow_linearly_with_grid():
    pot = disordered_potential(16)
    n0 = NMIN_TABLE[16]
    ns = np.arange(n0, n0 + 4)
    relK, relI = [], []
    for n in ns:
        G = build_grid(int(n))
        gs = imaginary_time_ground_state(G, pot, 50.0)
        pred = predict_errors(gs.energies, G, 50.0, gs.energies.alpha, 10**4)
        relK.append(pred["K"][1])
        relI.append(pred["I"][1])
    sK = np.polyfit(np.log2(2.0**ns), np.log2(relK), 1)[0]
    sI = np.polyfit(np.log2(2.0**ns), np.log2(relI), 1)[0]
    assert sK == pytest.approx(1.0, rel=0.2)
    assert sI == pytest.approx(1.0, rel=0.2)
