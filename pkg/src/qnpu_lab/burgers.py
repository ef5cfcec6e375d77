"""Variational explicit Euler stepping of the viscous Burgers equation.

The function is carried as ``f = lambda0 |psi(params)>`` with a unit-norm
circuit state. Each step fits ``lambda0'`` and ``params'`` to the explicit
Euler image ``(1 + tau O) f`` with ``O = nu Lap - D_f Nabla``, using
periodic second differences for ``Lap`` and central differences for
``Nabla``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ansatz import AnsatzSpec, build_ansatz, param_count, prepare_ansatz, tree_angles
from .errors import InvalidArgument, PreconditionError
from .grid import GridSpec
from .optimize import _period, coordinate_descent
from .qnpu import OVERLAP_KINDS, overlap_algebraic, overlap_qnpu


def laplacian(f, h):
    return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / h**2


def nabla(f, h):
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * h)


def burgers_rhs(f, grid: GridSpec, nu: float) -> np.ndarray:
    """``nu Lap f - f * Nabla f`` on the periodic grid."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.N,):
        raise InvalidArgument(f"f has shape {f.shape}, grid needs ({grid.N},)")
    return nu * laplacian(f, grid.h) - f * nabla(f, grid.h)


def stable_tau(grid: GridSpec, nu: float) -> float:
    return math.inf if nu <= 0 else grid.h**2 / (2.0 * nu)


def _check_tau(tau, grid, nu):
    if tau <= 0:
        raise InvalidArgument("tau must be positive")
    if tau > stable_tau(grid, nu) * (1 + 1e-12):
        raise PreconditionError(f"tau = {tau} exceeds the explicit stability bound {stable_tau(grid, nu)}")


def euler_step(f, grid: GridSpec, nu: float, tau: float) -> np.ndarray:
    return np.asarray(f, dtype=float) + tau * burgers_rhs(f, grid, nu)


def direct_euler(f, grid: GridSpec, nu: float, tau: float, steps: int) -> np.ndarray:
    """Dense explicit Euler trajectory, shape ``(steps + 1, N)``."""
    _check_tau(tau, grid, nu)
    out = np.empty((steps + 1, grid.N))
    out[0] = f
    for s in range(steps):
        out[s + 1] = euler_step(out[s], grid, nu, tau)
    return out


@dataclass
class BurgersState:
    lambda0: float
    params: np.ndarray
    grid: GridSpec
    nu: float
    t: float
    spec: AnsatzSpec

    @property
    def psi(self) -> np.ndarray:
        return prepare_ansatz(self.spec, self.params).real

    @property
    def f(self) -> np.ndarray:
        return self.lambda0 * self.psi


def initial_state(f0, grid: GridSpec, nu: float, spec: AnsatzSpec | None = None,
                  budget: int = 20000) -> BurgersState:
    """Encode ``f0`` as ``lambda0 |psi>``.

    The tree ansatz is loaded exactly; other families are fitted by
    coordinate descent on the infidelity.
    """
    f0 = np.asarray(f0, dtype=float)
    if spec is None:
        spec = AnsatzSpec(grid.n, kind="tree")
    lam = float(np.linalg.norm(f0))
    if lam == 0:
        return BurgersState(0.0, np.zeros(param_count(spec)), grid, nu, 0.0, spec)
    psi = f0 / lam
    if spec.kind == "tree":
        lead = psi[np.flatnonzero(np.abs(psi) > 1e-15)[0]]
        if lead < 0:
            psi, lam = -psi, -lam
        return BurgersState(lam, tree_angles(psi), grid, nu, 0.0, spec)
    fid = lambda v: -abs(float(psi @ prepare_ansatz(spec, v).real))
    x, best, *_ = coordinate_descent(fid, np.zeros(param_count(spec)), _period(spec), budget)
    sgn = np.sign(psi @ prepare_ansatz(spec, x).real) or 1.0
    return BurgersState(lam * sgn, x, grid, nu, 0.0, spec)


def euler_overlaps(psi_tilde, psi, path: str = "algebraic", preps=None) -> dict:
    """Real parts of ``<psi~|W|psi>`` for every overlap kind."""
    if path == "algebraic":
        return {k: overlap_algebraic(psi_tilde, psi, k).real for k in OVERLAP_KINDS}
    if path != "circuit" or preps is None:
        raise InvalidArgument("circuit path needs the two preparation circuits")
    prep_tilde, prep = preps
    return {k: overlap_qnpu(prep_tilde, prep, k, path="circuit").sigma_z for k in OVERLAP_KINDS}


def euler_projection(ov: dict, lambda_tilde: float, grid: GridSpec, nu: float, tau: float) -> float:
    """``Re <(1 + tau O) psi~ | psi>`` assembled from the overlaps.

    Uses ``O^dag = nu Lap + lambda~ Nabla D^dag`` with
    ``Lap = (A + A^dag - 2) / h**2`` and ``Nabla = (A - A^dag) / 2h``.
    """
    h = grid.h
    lap = (ov["A"] + ov["Adag"] - 2.0 * ov["id"]) / h**2
    nab_d = (ov["AD"] - ov["AdagD"]) / (2.0 * h)
    return ov["id"] + tau * (nu * lap + lambda_tilde * nab_d)


def euler_target(prev: BurgersState, tau: float) -> np.ndarray:
    return euler_step(prev.f, prev.grid, prev.nu, tau)


def euler_cost(lambda0: float, params, prev: BurgersState, tau: float, path: str = "algebraic") -> float:
    """``|lambda0|^2 - 2 lambda0 lambda~ Re<(1 + tau O) psi~|psi> + |(1 + tau O) f~|^2``.

    The constant makes the cost equal ``|lambda0 psi - (1 + tau O) f~|^2``.
    """
    if tau <= 0:
        raise InvalidArgument("tau must be positive")
    psi = prepare_ansatz(prev.spec, params).real
    preps = (build_ansatz(prev.spec, prev.params), build_ansatz(prev.spec, params))
    ov = euler_overlaps(prev.psi, psi, path, preps)
    proj = euler_projection(ov, prev.lambda0, prev.grid, prev.nu, tau)
    const = float(np.sum(euler_target(prev, tau) ** 2))
    return lambda0**2 - 2.0 * lambda0 * prev.lambda0 * proj + const


def best_lambda0(params, prev: BurgersState, tau: float, path: str = "algebraic") -> float:
    """Closed-form minimizer ``lambda~ Re<(1 + tau O) psi~|psi>`` of the quadratic cost."""
    psi = prepare_ansatz(prev.spec, params).real
    preps = (build_ansatz(prev.spec, prev.params), build_ansatz(prev.spec, params))
    ov = euler_overlaps(prev.psi, psi, path, preps)
    return prev.lambda0 * euler_projection(ov, prev.lambda0, prev.grid, prev.nu, tau)


def variational_euler_step(prev: BurgersState, tau: float, budget: int = 20000,
                           tol: float = 1e-15) -> BurgersState:
    """Fit ``(lambda0, params)`` at ``t + tau``.

    ``lambda0`` is eliminated in closed form, leaving ``-(lambda~ proj)^2``
    to be minimized over the parameters, warm started from ``prev``.
    """
    _check_tau(tau, prev.grid, prev.nu)
    if prev.lambda0 == 0.0:
        return replace(prev, t=prev.t + tau, params=prev.params.copy())
    psi_t = prev.psi
    h = prev.grid.h
    nu = prev.nu
    lt = prev.lambda0
    # (1 + tau O) psi~ as a vector, so each evaluation is one dot product
    w = psi_t + tau * (nu * laplacian(psi_t, h) - lt * psi_t * nabla(psi_t, h))

    def reduced(v):
        proj = float(w @ prepare_ansatz(prev.spec, v).real)
        return -proj * proj

    x, *_ = coordinate_descent(reduced, prev.params, _period(prev.spec), budget, tol=tol)
    lam = best_lambda0(x, prev, tau)
    if lam < 0 and prev.spec.kind == "tree":
        # R_y(theta + 2 pi) = -R_y(theta) on the root keeps lambda0 >= 0
        x = x.copy()
        x[0] += 2.0 * math.pi
        lam = -lam
    return BurgersState(lam, x, prev.grid, prev.nu, prev.t + tau, prev.spec)


def evolve(f0, grid: GridSpec, nu: float, tau: float, steps: int, spec: AnsatzSpec | None = None,
           budget: int = 20000) -> list:
    """Variational trajectory ``[state_0, ..., state_steps]``."""
    _check_tau(tau, grid, nu)
    states = [initial_state(f0, grid, nu, spec, budget)]
    for _ in range(steps):
        states.append(variational_euler_step(states[-1], tau, budget))
    return states


def richardson_slope(f0, grid: GridSpec, nu: float, tau: float, steps: int, variational: bool = True,
                     spec: AnsatzSpec | None = None, budget: int = 20000) -> tuple[float, float, float]:
    """Observed order from runs with ``tau``, ``tau/2`` and ``tau/4`` to the same final time.

    Returns ``(d1, d2, log2(d1 / d2))`` where ``d1 = |f_tau - f_tau/2|`` and
    ``d2 = |f_tau/2 - f_tau/4|`` at ``t = steps * tau``. A first-order scheme
    gives a slope near 1.
    """
    ends = []
    for k in range(3):
        t_k, s_k = tau / 2**k, steps * 2**k
        if variational:
            ends.append(evolve(f0, grid, nu, t_k, s_k, spec, budget)[-1].f)
        else:
            ends.append(direct_euler(f0, grid, nu, t_k, s_k)[-1])
    d1 = float(np.linalg.norm(ends[0] - ends[1]))
    d2 = float(np.linalg.norm(ends[1] - ends[2]))
    return d1, d2, math.log2(d1 / d2)
