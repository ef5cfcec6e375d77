"""Shot-noise model for ancilla measurements and the resulting error laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DetectionError, InvalidArgument, PreconditionError
from .grid import (
    BichromaticPotential,
    EnergyBreakdown,
    GridSpec,
    build_grid,
    discrete_energies,
    imaginary_time_ground_state,
)
from .qnpu import rng_from_seed

SLOPE_TOL = 0.3


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return rng_from_seed(seed_or_rng)


def sample_sigma_z(p_plus: float, M: int, seed, size=None):
    """Mean of ``M`` outcomes ``+-1`` with ``P(+1) = p_plus``.

    ``size`` draws that many independent means at once.
    """
    if not 0.0 <= p_plus <= 1.0:
        raise InvalidArgument(f"p_plus must lie in [0, 1], got {p_plus}")
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    k = _rng(seed).binomial(int(M), p_plus, size=size)
    return (2.0 * k - M) / M


def sample_expectation(sigma: float, M: int, seed, size=None):
    """Sampled ancilla average for an exact expectation ``sigma``."""
    p = min(max(0.5 * (1.0 + sigma), 0.0), 1.0)
    return sample_sigma_z(p, M, seed, size)


@dataclass
class SamplingReport:
    quantity: str
    M: int
    estimate: float
    exact: float
    predicted_abs_error: float
    predicted_rel_error: float
    constant: float | None = None


def _check_sigma(s):
    if abs(s) > 1.0 + 1e-12:
        raise PreconditionError(f"ancilla expectation {s} outside [-1, 1]")
    return min(abs(s), 1.0)


def predict_errors(br: EnergyBreakdown, grid: GridSpec, g: float, alpha: float, M: int) -> dict:
    """Absolute and relative one-sigma errors of K, P and I from ``M`` shots each."""
    inv = grid.N / grid.length
    sq = lambda s: math.sqrt(1.0 - _check_sigma(s) ** 2) / math.sqrt(M)
    abs_err = {
        "P": abs(alpha) * sq(br.sigma_P),
        "K": inv**2 * sq(br.sigma_K),
        "I": 0.5 * abs(g) * inv * sq(br.sigma_I),
    }
    vals = {"P": br.P, "K": br.K, "I": br.I}
    rel = {k: (abs_err[k] / abs(vals[k]) if vals[k] != 0 else math.inf) for k in abs_err}
    return {k: (abs_err[k], rel[k]) for k in abs_err}


def sampled_energies(br: EnergyBreakdown, M: int, seed) -> dict:
    """One sampled estimate of each energy term from its ancilla statistics."""
    rng = _rng(seed)
    sk = float(sample_expectation(br.sigma_K, M, rng))
    sp = float(sample_expectation(br.sigma_P, M, rng))
    si = float(sample_expectation(br.sigma_I, M, rng))
    return {
        "K": (1.0 - sk) / br.h**2,
        "P": br.alpha * sp,
        "I": br.g / (2.0 * br.h) * si,
        "sigma_K": sk,
        "sigma_P": sp,
        "sigma_I": si,
    }


def sampling_reports(br: EnergyBreakdown, grid: GridSpec, M: int, seed) -> list:
    est = sampled_energies(br, M, seed)
    pred = predict_errors(br, grid, br.g, br.alpha, M)
    exact = {"K": br.K, "P": br.P, "I": br.I}
    return [SamplingReport(q, M, est[q], exact[q], *pred[q]) for q in ("K", "P", "I")]


# --------------------------------------------------------------------------
# constants


def l_min(kappa1: float) -> float:
    """Shortest length to resolve: a quarter of the shortest wavelength."""
    return (2.0 * math.pi / abs(kappa1)) / 4.0


def n_min_for(kappa1: float, length: float = 1.0) -> tuple[float, int]:
    Nmin = length / l_min(kappa1)
    return Nmin, int(math.ceil(math.log2(Nmin) - 1e-12))


@dataclass
class Constants:
    C_P: float
    C_K: float
    C_I: float
    N_min: float
    n_min: int


def compute_constants(psi, grid: GridSpec, pot, g: float, kappa1: float | None = None) -> Constants:
    """Prefactors of the relative error laws.

    ``C_I`` is evaluated with ``I = g N sum |psi_k|^4`` (twice the energy
    term), the normalization under which the interaction error law is
    stated.
    """
    br = discrete_energies(psi, grid, pot, g)
    if kappa1 is None:
        kappa1 = getattr(pot, "kappa1", None)
    if kappa1 is None:
        raise InvalidArgument("kappa1 is required to fix the resolution length")
    if br.P == 0:
        raise PreconditionError("C_P is undefined for a vanishing potential energy")
    Nmin, nmin = n_min_for(kappa1, grid.length)
    lm = l_min(kappa1)
    C_P = math.sqrt(max(br.alpha**2 / br.P**2 - 1.0, 0.0))
    C_K = math.sqrt(2.0) / (lm * math.sqrt(br.K)) if br.K > 0 else math.inf
    I_err = g * grid.N * br.sigma_I
    C_I = g * Nmin / (2.0 * grid.length * I_err) if I_err != 0 else math.inf
    return Constants(C_P, C_K, C_I, Nmin, nmin)


# --------------------------------------------------------------------------
# scaling detection


def disordered_potential(m: int, ratio: float = 2.0, s1: float | None = None) -> BichromaticPotential:
    """Bichromatic lattice with ``kappa1 = 2 pi m`` and ``s1`` growing like ``m**2``."""
    if s1 is None:
        s1 = 5e3 * (m / 16.0) ** 2
    return BichromaticPotential.from_ratio(s1, ratio, 2.0 * math.pi * m)


def scaling_table(pot, g: float, n_values, a: float = 0.0, b: float = 1.0) -> dict:
    """``sigma_K`` and ``sigma_I`` of oracle ground states for each ``n``."""
    out = {}
    for n in n_values:
        grid = build_grid(n, a, b)
        gs = imaginary_time_ground_state(grid, pot, g)
        out[n] = (gs.energies.sigma_K, gs.energies.sigma_I)
    return out


def detect_nmin(pot, g: float, n_range, table: dict | None = None, tol: float = SLOPE_TOL,
                span: int = 2) -> int:
    """Smallest ``n`` from which ``1 - sigma_K ~ 4**-n`` and ``sigma_I ~ 2**-n``.

    Slopes are measured over windows ``n -> n + span`` (divided by ``span``);
    every window starting at or beyond the returned ``n`` must give ``-2``
    for ``log2(1 - sigma_K)`` and ``-1`` for ``log2(sigma_I)`` within ``tol``.
    The two-step default smooths the single transition step right at the
    resolution threshold, where ``sigma_I`` overshoots. When ``1 - sigma_K``
    vanishes identically (flat solutions) the scaling is degenerate and the
    smallest ``n`` is returned.
    """
    ns = sorted(int(n) for n in n_range)
    if len(ns) < 4:
        raise InvalidArgument("n_range must span at least 4 values")
    if any(b - a != 1 for a, b in zip(ns, ns[1:])):
        raise InvalidArgument("n_range must be contiguous")
    if span < 1 or span > len(ns) - 2:
        raise InvalidArgument(f"span must lie in [1, {len(ns) - 2}]")
    if table is None:
        table = scaling_table(pot, g, ns)
    one_minus = np.array([1.0 - table[n][0] for n in ns])
    sig_i = np.array([table[n][1] for n in ns])
    if np.all(np.abs(one_minus) < 1e-13):
        return ns[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        lk = np.log2(one_minus)
        li = np.log2(sig_i)
    ok = []
    for i in range(len(ns) - span):
        dk = (lk[i + span] - lk[i]) / span
        di = (li[i + span] - li[i]) / span
        ok.append(bool(np.isfinite(dk) and np.isfinite(di) and abs(dk + 2) <= tol and abs(di + 1) <= tol))
    # at least two windows are needed to call it asymptotic
    for i in range(len(ok) - 1):
        if all(ok[i:]):
            return ns[i]
    raise DetectionError("no asymptotic scaling window found in the given range")


def scaling_slopes(table: dict, n_from: int) -> tuple[float, float]:
    """Least-squares slopes of ``log2(1 - sigma_K)`` and ``log2(sigma_I)`` for ``n >= n_from``."""
    ns = np.array(sorted(n for n in table if n >= n_from))
    lk = np.log2([1.0 - table[n][0] for n in ns])
    li = np.log2([table[n][1] for n in ns])
    return float(np.polyfit(ns, lk, 1)[0]), float(np.polyfit(ns, li, 1)[0])
