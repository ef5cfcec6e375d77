"""Periodic finite-difference grids, potentials and discrete GP energies.

Amplitudes are stored as ``psi_k = sqrt(h) f_k`` so that a normalized state
vector has unit Euclidean norm independent of the grid spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .errors import ConvergenceError, InvalidArgument, PreconditionError

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
NORM_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    n: int
    a: float = 0.0
    b: float = 1.0

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.N)


def build_grid(n: int, a: float = 0.0, b: float = 1.0) -> GridSpec:
    if int(n) != n or n < 1:
        raise InvalidArgument(f"qubit count must be an integer >= 1, got {n}")
    if not b > a:
        raise InvalidArgument(f"interval must satisfy b > a, got [{a}, {b})")
    return GridSpec(int(n), float(a), float(b))


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class HarmonicPotential:
    """``V(x) = strength * (x - center)**2``."""

    center: float
    strength: float

    def __call__(self, x):
        return self.strength * (np.asarray(x, dtype=float) - self.center) ** 2


@dataclass(frozen=True)
class BichromaticPotential:
    """Two incommensurate sine lattices ``s1 sin(k1 x) + s2 sin(k2 x)``.

    When ``kappa2`` is omitted it defaults to ``2 kappa1 / (1 + sqrt 5)``.
    """

    s1: float
    s2: float
    kappa1: float
    kappa2: float | None = None

    @property
    def k2(self) -> float:
        return 2.0 * self.kappa1 / (1.0 + math.sqrt(5.0)) if self.kappa2 is None else self.kappa2

    @classmethod
    def from_ratio(cls, s1: float, ratio: float, kappa1: float, kappa2: float | None = None):
        return cls(s1, s1 / ratio, kappa1, kappa2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.s1 * np.sin(self.kappa1 * x) + self.s2 * np.sin(self.k2 * x)


@dataclass(frozen=True)
class TabulatedPotential:
    values: tuple = field(default=())

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(float(v) for v in np.ravel(values)))

    def __call__(self, x):
        x = np.asarray(x)
        if len(self.values) != x.size:
            raise InvalidArgument(
                f"tabulated potential has {len(self.values)} values, grid has {x.size} points"
            )
        return np.array(self.values, dtype=float)


PotentialSpec = HarmonicPotential | BichromaticPotential | TabulatedPotential


def zero_potential(grid: GridSpec) -> TabulatedPotential:
    return TabulatedPotential(np.zeros(grid.N))


def eval_potential(spec: PotentialSpec | None, grid: GridSpec):
    """Return ``(values, alpha, tilde_values)`` with ``values = alpha * tilde_values``.

    ``tilde_values`` has unit Euclidean norm unless the potential vanishes
    identically, in which case ``alpha`` is 0 and ``tilde_values`` is all zero.
    """
    values = np.zeros(grid.N) if spec is None else np.asarray(spec(grid.x), dtype=float)
    alpha = float(np.linalg.norm(values))
    tilde = values / alpha if alpha > 0 else np.zeros_like(values)
    return values, alpha, tilde


# --------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class EnergyBreakdown:
    K: float
    P: float
    I: float
    sigma_K: float
    sigma_P: float
    sigma_I: float
    alpha: float
    h: float
    g: float

    @property
    def total(self) -> float:
        return self.K + self.P + self.I


def laplacian_matrix(N: int, h: float = 1.0, sparse: bool = False):
    """Periodic three-point second difference ``(S + S^T - 2 Id) / h**2``."""
    if sparse:
        main = -2.0 * np.ones(N)
        off = np.ones(N - 1)
        L = sp.diags([off, main, off], [-1, 0, 1], format="lil")
        if N > 2:
            L[0, N - 1] += 1.0
            L[N - 1, 0] += 1.0
        else:
            L[0, 1] += 1.0
            L[1, 0] += 1.0
        return L.tocsr() / h**2
    S = np.roll(np.eye(N), 1, axis=1)  # (S psi)_k = psi_{k+1}
    return (S + S.T - 2.0 * np.eye(N)) / h**2


def shift_matrix(N: int) -> np.ndarray:
    """Cyclic down-shift ``(S psi)_k = psi_{k+1}``."""
    return np.roll(np.eye(N), 1, axis=1)


def _check_state(psi, grid: GridSpec) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape != (grid.N,):
        raise InvalidArgument(f"state has shape {psi.shape}, grid needs ({grid.N},)")
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise PreconditionError(f"state must be normalized, |psi|^2 = {norm!r}")
    return psi


def discrete_energies(psi, grid: GridSpec, pot: PotentialSpec | None, g: float) -> EnergyBreakdown:
    psi = _check_state(psi, grid)
    h = grid.h
    values, alpha, tilde = eval_potential(pot, grid)
    up = np.roll(psi, -1)
    down = np.roll(psi, 1)
    K = float((-0.5 / h**2) * np.vdot(psi, up - 2.0 * psi + down).real)
    dens = np.abs(psi) ** 2
    sigma_K = float(np.vdot(psi, up).real)
    sigma_P = float(np.dot(tilde, dens)) if alpha > 0 else 0.0
    sigma_I = float(np.sum(dens**2))
    return EnergyBreakdown(
        K=K,
        P=float(np.dot(values, dens)),
        I=g / (2.0 * h) * sigma_I,
        sigma_K=sigma_K,
        sigma_P=sigma_P,
        sigma_I=sigma_I,
        alpha=alpha,
        h=h,
        g=float(g),
    )


def laplacian_spectrum(N: int, length: float = 1.0) -> np.ndarray:
    """Eigenvalues ``2 (N/l)^2 (cos(2 pi k / N) - 1)`` of the periodic Laplacian."""
    if N < 1 or N & (N - 1):
        raise InvalidArgument(f"N must be a power of two, got {N}")
    k = np.arange(N)
    return 2.0 * (N / length) ** 2 * (np.cos(2.0 * np.pi * k / N) - 1.0)


def gp_apply(psi, grid: GridSpec, values, g: float):
    """Apply the discrete GP operator ``-1/2 Lap + V + g |f|^2`` to ``psi``."""
    h = grid.h
    lap = (np.roll(psi, -1) - 2.0 * psi + np.roll(psi, 1)) / h**2
    return -0.5 * lap + (values + (g / h) * np.abs(psi) ** 2) * psi


# --------------------------------------------------------------------------
# imaginary time oracle


@dataclass
class GroundState:
    psi: np.ndarray
    energy: float
    energies: EnergyBreakdown
    mu: float
    residual: float
    iterations: int
    scheme: str


def _solve_cyclic_tridiag(diag: np.ndarray, off: float, rhs: np.ndarray) -> np.ndarray:
    """Solve a periodic tridiagonal system with constant off-diagonal (Sherman-Morrison)."""
    N = diag.size
    if N <= 2:
        A = np.diag(diag).astype(float)
        if N == 2:
            A[0, 1] = A[1, 0] = 2.0 * off
        return np.linalg.solve(A, rhs)
    gamma = -diag[0]
    d = diag.astype(float).copy()
    d[0] -= gamma
    d[-1] -= off * off / gamma
    ab = np.zeros((3, N))
    ab[0, 1:] = off
    ab[1] = d
    ab[2, :-1] = off
    u = np.zeros(N)
    u[0] = gamma
    u[-1] = off
    sol = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + off / gamma * y[-1]
    vz = z[0] + off / gamma * z[-1]
    return y - (vy / (1.0 + vz)) * z


def _newton_polish(psi, grid, values, g, tol, max_steps=30):
    """Newton iterations on ``H[psi] psi = mu psi, |psi| = 1`` (real states)."""
    N, h = grid.N, grid.h
    T = -0.5 * laplacian_matrix(N, h, sparse=True)
    eye = sp.identity(N, format="csr")
    res = np.inf
    mu = 0.0
    for _ in range(max_steps):
        Hm = T + sp.diags(values + (g / h) * psi**2)
        Hp = Hm @ psi
        mu = float(psi @ Hp)
        r = Hp - mu * psi
        res = float(np.linalg.norm(r))
        if res < tol * max(1.0, abs(mu)):
            break
        J = Hm + sp.diags(2.0 * (g / h) * psi**2) - mu * eye
        A = sp.bmat([[J, -psi[:, None]], [-psi[None, :], None]], format="csc")
        step = spla.spsolve(A, np.concatenate([-r, [0.5 * (psi @ psi - 1.0)]]))
        if not np.all(np.isfinite(step)):
            break
        psi = psi + step[:N]
        psi /= np.linalg.norm(psi)
    return psi, mu, res


def _gauge(psi):
    s = psi.sum()
    phase = s / abs(s) if abs(s) > 1e-300 else 1.0
    out = psi / phase
    return out.real.copy() if np.allclose(out.imag, 0.0, atol=1e-14) else out


def imaginary_time_ground_state(
    grid: GridSpec,
    pot: PotentialSpec | None,
    g: float,
    dt: float | None = None,
    tol: float = 1e-12,
    max_iters: int = 200_000,
    scheme: str = "implicit",
    psi0=None,
    polish: bool = True,
) -> GroundState:
    """Normalized imaginary-time relaxation to the discrete GP ground state.

    ``scheme="explicit"`` steps ``psi <- normalize(psi - dt H[psi] psi)``.
    ``scheme="implicit"`` solves ``(1 + dt (H[psi] - V_min)) psi' = psi`` each
    step (backward Euler with the nonlinearity lagged); it has the same fixed
    points but tolerates ``dt`` of order one, which large grids need.

    Iteration stops once the relative energy change per step falls below
    ``tol``. With ``polish`` the iterate is then refined by Newton's method on
    the stationarity conditions; a polished state is only accepted when it is
    strictly positive, which for ``g >= 0`` certifies the global minimum.
    Raises ConvergenceError (carrying the last iterate) if ``max_iters`` is
    exhausted.
    """
    if scheme not in ("explicit", "implicit"):
        raise InvalidArgument(f"unknown scheme {scheme!r}")
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    N, h = grid.N, grid.h
    values, _, _ = eval_potential(pot, grid)
    vmin = float(values.min())
    kin = 0.5 / h**2
    if dt is None:
        if scheme == "explicit":
            bound = 4.0 * kin + float(np.abs(values).max()) + abs(g) / h
            dt = min(0.1 * h**2, 0.5 / bound)
        else:
            dt = 1.0
    if dt <= 0:
        raise InvalidArgument("dt must be positive")

    psi = np.ones(N) / math.sqrt(N) if psi0 is None else np.array(psi0, dtype=float)
    psi = psi / np.linalg.norm(psi)

    def energy(p):
        dens = p * p
        lap = np.roll(p, -1) - 2.0 * p + np.roll(p, 1)
        return -kin * float(p @ lap) + float(values @ dens) + g / (2.0 * h) * float(dens @ dens)

    E_old = energy(psi)
    stage_tol = 1e-4 if (polish and scheme == "implicit") else None
    it = 0
    while True:
        converged = False
        while it < max_iters:
            it += 1
            if scheme == "explicit":
                new = psi - dt * gp_apply(psi, grid, values, g)
            else:
                diag = 1.0 + dt * (2.0 * kin + values - vmin + (g / h) * psi**2)
                new = _solve_cyclic_tridiag(diag, -dt * kin, psi)
            new /= np.linalg.norm(new)
            E = energy(new)
            psi = new
            if stage_tol is not None:
                Hp = gp_apply(psi, grid, values, g)
                mu = float(psi @ Hp)
                if np.linalg.norm(Hp - mu * psi) < stage_tol * max(1.0, abs(mu)):
                    converged = True
                    break
            elif abs(E - E_old) < tol * max(1.0, abs(E)):
                converged = True
                break
            E_old = E
        if not converged:
            raise ConvergenceError(
                f"imaginary time evolution did not converge in {max_iters} steps",
                last=_gauge(psi),
                iterations=it,
            )
        if not polish:
            break
        cand, mu, res = _newton_polish(psi.copy(), grid, values, g, tol=1e-11)
        cand = _gauge(cand)
        if res < 1e-9 * max(1.0, abs(mu)) and (g < 0 or cand.min() > 0):
            psi = cand
            break
        if stage_tol is None or stage_tol < 1e-12:
            # polishing failed to certify; fall back to the relaxed iterate
            break
        stage_tol /= 100.0

    psi = _gauge(psi)
    Hp = gp_apply(psi, grid, values, g)
    mu = float(np.vdot(psi, Hp).real)
    res = float(np.linalg.norm(Hp - mu * psi))
    br = discrete_energies(psi, grid, pot, g)
    return GroundState(psi, br.total, br, mu, res, it, scheme)
