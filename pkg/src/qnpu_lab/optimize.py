"""Cost assembly, parameter optimization and fidelity fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .ansatz import AnsatzSpec, brickwall_layout, build_ansatz, param_count, prepare_ansatz
from .errors import InvalidArgument, PreconditionError
from .grid import EnergyBreakdown, GridSpec, discrete_energies, eval_potential
from .mps import bond_param_count, mps_from_dense, mps_to_circuit
from .qnpu import kinetic_qnpu, nonlinear_qnpu, potential_qnpu, rng_from_seed
from .sampling import sample_expectation
from .statevector import Circuit, Gate, apply_gate, init_basis, prepare, state_prep_gate


@dataclass
class CostReport:
    energies: EnergyBreakdown
    params: np.ndarray
    evaluations: int = 1
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.energies.total


def _sampled_breakdown(br: EnergyBreakdown, shots: int, seed) -> EnergyBreakdown:
    rng = rng_from_seed(seed)
    sk = float(sample_expectation(br.sigma_K, shots, rng))
    sp = float(sample_expectation(br.sigma_P, shots, rng)) if br.alpha > 0 else 0.0
    si = float(sample_expectation(br.sigma_I, shots, rng))
    return EnergyBreakdown(
        K=(1.0 - sk) / br.h**2, P=br.alpha * sp, I=br.g / (2.0 * br.h) * si,
        sigma_K=sk, sigma_P=sp, sigma_I=si, alpha=br.alpha, h=br.h, g=br.g,
    )


def _circuit_breakdown(prep: Circuit, grid: GridSpec, pot, g: float) -> EnergyBreakdown:
    values, alpha, tilde = eval_potential(pot, grid)
    sk = kinetic_qnpu(prep, grid, path="circuit").sigma_z
    if alpha > 0:
        vprep = Circuit(grid.n).append(state_prep_gate(tilde, range(grid.n)))
        sp = potential_qnpu(prep, vprep, alpha, path="circuit").sigma_z
    else:
        sp = 0.0
    si = nonlinear_qnpu(prep, path="circuit").sigma_z
    h = grid.h
    return EnergyBreakdown(K=(1.0 - sk) / h**2, P=alpha * sp, I=g / (2.0 * h) * si,
                           sigma_K=sk, sigma_P=sp, sigma_I=si, alpha=alpha, h=h, g=float(g))


def cost(spec: AnsatzSpec, params, grid: GridSpec, pot, g: float, mode: str = "exact",
         shots: int | None = None, seed=None, path: str = "algebraic") -> CostReport:
    """Energy of the ansatz state.

    ``mode="exact"`` uses exact ancilla expectations, either from the
    amplitudes (``path="algebraic"``) or by simulating the QNPU circuits
    (``path="circuit"``). ``mode="sampled"`` replaces each expectation by
    an average over ``shots`` ancilla measurements.
    """
    if spec.n != grid.n:
        raise InvalidArgument(f"ansatz has {spec.n} qubits, grid has {grid.n}")
    params = np.asarray(params, dtype=float).ravel()
    prep = build_ansatz(spec, params)
    if path == "circuit":
        br = _circuit_breakdown(prep, grid, pot, g)
    elif path == "algebraic":
        br = discrete_energies(prepare(prep), grid, pot, g)
    else:
        raise InvalidArgument("path must be 'algebraic' or 'circuit'")
    if mode == "sampled":
        if shots is None or seed is None:
            raise InvalidArgument("sampled mode needs shots and seed")
        br = _sampled_breakdown(br, int(shots), seed)
    elif mode != "exact":
        raise InvalidArgument("mode must be 'exact' or 'sampled'")
    return CostReport(br, params)


def scan_single_param(grid: GridSpec, pot, g: float, step: float = 0.1,
                      lo: float = 0.0, hi: float = 2 * math.pi):
    """Exact cost of the one-parameter ansatz on ``lo, lo + step, ...`` below ``hi``."""
    spec = AnsatzSpec(2, kind="single")
    lams = lo + step * np.arange(int(math.ceil((hi - lo) / step - 1e-9)))
    reports = [cost(spec, [lam], grid, pot, g) for lam in lams]
    return lams, reports


def _period(spec: AnsatzSpec) -> float:
    # R_y angles are 4 pi periodic, Givens angles 2 pi
    return 4 * math.pi if spec.kind in ("single", "tree") else 2 * math.pi


class _BudgetExhausted(Exception):
    pass


def coordinate_descent(f, x0, period: float, budget: int = 20000, scan_points: int = 24,
                       tol: float = 1e-13, max_sweeps: int = 500):
    """Cyclic coordinate descent with a golden-section line search per coordinate.

    Each coordinate is first scanned on ``scan_points`` equally spaced values
    across one ``period`` to bracket the minimum, which golden-section search
    then refines. A coordinate only moves when ``f`` decreases, so the best
    value never increases. ``budget`` caps the number of evaluations.

    Returns ``(x, f(x), evaluations, converged, history)``.
    """
    if budget < 1:
        raise InvalidArgument("budget must be >= 1")
    x = np.array(x0, dtype=float).ravel()
    evals = 0

    def fc(v):
        nonlocal evals
        if evals >= budget:
            raise _BudgetExhausted
        evals += 1
        return float(f(v))

    best = fc(x)
    history = [best]
    converged = False
    step = period / scan_points
    offsets = step * np.arange(-(scan_points // 2), scan_points - scan_points // 2)
    try:
        for _ in range(max_sweeps):
            start = best
            for i in range(x.size):
                def fi(t, i=i):
                    y = x.copy()
                    y[i] = t
                    return fc(y)

                ts = x[i] + offsets
                vals = np.array([best if o == 0 else fi(t) for o, t in zip(offsets, ts)])
                j = int(np.argmin(vals))
                t_best, f_best = ts[j], vals[j]
                try:
                    res = minimize_scalar(fi, bracket=(ts[j] - step, ts[j], ts[j] + step),
                                          method="golden", options={"xtol": 1e-12})
                    if res.fun < f_best:
                        t_best, f_best = float(res.x), float(res.fun)
                except ValueError:
                    pass  # bracket not valid, keep the scan point
                if f_best < best:
                    x[i] = t_best
                    best = f_best
            history.append(best)
            if start - best <= tol * max(1.0, abs(best)):
                converged = True
                break
    except _BudgetExhausted:
        converged = False
    return x, best, evals, converged, history


def minimize_cost(spec: AnsatzSpec, grid: GridSpec, pot, g: float, init=None, budget: int = 20000,
                  scan_points: int = 24, tol: float = 1e-13, max_sweeps: int = 500,
                  restarts: int = 0, seed=None) -> CostReport:
    """Minimize the exact energy over the ansatz parameters by :func:`coordinate_descent`.

    ``restarts`` extra runs start from uniformly random angles drawn with
    ``seed``; each run gets the full ``budget`` and the lowest energy wins.
    Running out of ``budget`` returns the best point flagged unconverged.
    """
    npar = param_count(spec)
    x0 = np.zeros(npar) if init is None else np.array(init, dtype=float).ravel()
    if x0.size != npar:
        raise InvalidArgument(f"init has {x0.size} entries, ansatz needs {npar}")
    if restarts < 0:
        raise InvalidArgument("restarts must be >= 0")
    period = _period(spec)

    def energy(v):
        return discrete_energies(prepare_ansatz(spec, v), grid, pot, g).total

    starts = [x0]
    if restarts:
        rng = rng_from_seed(0 if seed is None else seed)
        starts += [rng.uniform(0.0, period, size=npar) for _ in range(restarts)]
    best = None
    for start in starts:
        x, fx, evals, conv, hist = coordinate_descent(energy, start, period, budget, scan_points,
                                                      tol, max_sweeps)
        if best is None or fx < best[1]:
            best = (x, fx, evals, conv, hist)
    x, _, evals, conv, hist = best
    br = discrete_energies(prepare_ansatz(spec, x), grid, pot, g)
    return CostReport(br, x, evals, conv, hist)


# --------------------------------------------------------------------------
# fidelity sweeps


@dataclass
class FitResult:
    gates: list
    fidelity: float
    sweeps: int
    param_count: int
    trace: list = field(default_factory=list)

    @property
    def eps_R(self) -> float:
        return 1.0 - self.fidelity


def brickwall_positions(n: int, d: int) -> list:
    return [pair for _, pair, _ in brickwall_layout(n, d)]


def staircase_positions(n: int, chi: int) -> list:
    """Block positions of the compiled MPS staircase, in application order."""
    s = min(max(0, math.ceil(math.log2(chi))) if chi > 1 else 0, n - 1)
    pos = [tuple(range(j - 1 - s, j)) for j in range(n, s + 1, -1)]
    pos.append(tuple(range(0, s + 1)))
    return pos


def _best_gate(env: np.ndarray, real: bool) -> np.ndarray:
    """Gate maximizing ``Re tr(U env)``: ``U = V^dag W^dag`` for ``env = W S V``."""
    u, s, vh = np.linalg.svd(env)
    w = vh.conj().T @ u.conj().T
    return w.real if real else w


def _environment(a: np.ndarray, b: np.ndarray, targets, n: int) -> np.ndarray:
    """``R[x, y] = sum_rest a[x, rest] conj(b[y, rest])`` over the ``targets`` qubits."""
    m = len(targets)
    rest = [q for q in range(n) if q not in targets]
    perm = list(targets) + rest
    A = np.transpose(a.reshape((2,) * n), perm).reshape(1 << m, -1)
    B = np.transpose(b.reshape((2,) * n), perm).reshape(1 << m, -1)
    return A @ B.conj().T


def maximize_fidelity(target, positions: list, gates: list | None = None, sweeps: int = 50,
                      real: bool | None = None, tol: float = 1e-12, record: bool = False) -> FitResult:
    """Maximize ``|<target| G_L ... G_1 |0>|`` one gate at a time.

    ``positions`` lists the qubits of each gate in application order. Each
    update replaces one gate by the SVD optimum of its environment, so the
    fidelity never decreases. Sweeps alternate direction. With ``record``
    the fidelity after every single update is kept in ``trace``.
    """
    target = np.asarray(target, dtype=complex)
    nrm = np.linalg.norm(target)
    if abs(nrm - 1.0) > 1e-8:
        raise PreconditionError("target must be normalized")
    n = target.size.bit_length() - 1
    if real is None:
        real = bool(np.allclose(target.imag, 0.0))
    if gates is None:
        gates = [np.eye(1 << len(p)) for p in positions]
    gates = [np.array(g, dtype=float if real else complex) for g in gates]
    L = len(positions)
    mk = lambda i: Gate(gates[i], positions[i])

    def forward_states():
        st = [init_basis(n, 0)]
        for i in range(L):
            st.append(apply_gate(st[-1], mk(i), n))
        return st

    def backward_states():
        st = [None] * (L + 1)
        st[L] = target.copy()
        for i in range(L - 1, -1, -1):
            st[i] = apply_gate(st[i + 1], Gate(gates[i].conj().T, positions[i]), n)
        return st

    fid = abs(np.vdot(target, forward_states()[-1]))
    trace = [fid] if record else []
    done = 0
    for sweep in range(sweeps):
        old = fid
        if sweep % 2 == 0:
            back = backward_states()
            a = init_basis(n, 0)
            for i in range(L):
                gates[i] = _best_gate(_environment(a, back[i + 1], positions[i], n), real)
                a = apply_gate(a, mk(i), n)
                if record:
                    trace.append(abs(np.vdot(back[i + 1], a)))
            fid = abs(np.vdot(target, a))
        else:
            fwd = forward_states()
            b = target.copy()
            for i in range(L - 1, -1, -1):
                gates[i] = _best_gate(_environment(fwd[i], b, positions[i], n), real)
                b = apply_gate(b, Gate(gates[i].conj().T, positions[i]), n)
                if record:
                    trace.append(abs(np.vdot(b, fwd[i])))
            fid = abs(np.vdot(b, init_basis(n, 0)))
        done = sweep + 1
        if fid - old < tol:
            break
    return FitResult(gates, float(min(fid, 1.0)), done, 0, trace)


def _swap_pair(mat: np.ndarray) -> np.ndarray:
    """Exchange the roles of the two qubits of a two-qubit gate."""
    p = [0, 2, 1, 3]
    return mat[np.ix_(p, p)]


def staircase_init(target, d: int) -> list | None:
    """Brick-wall gates reproducing the bond-2 truncation of ``target``.

    The truncated MPS is compiled from the right, which yields a staircase
    with gate ``k`` on pair ``(k, k+1)`` applied in increasing ``k``; gate
    ``k`` sits in column ``k + 1``, so this needs ``d >= n - 1``. All other
    gates start as identities. Returns None when the layout does not fit.
    """
    target = np.asarray(target)
    n = target.size.bit_length() - 1
    if n < 2 or d < n - 1:
        return None
    rev = np.transpose(target.reshape((2,) * n), list(range(n))[::-1]).ravel()
    comp = mps_to_circuit(mps_from_dense(rev, 2))
    if comp.s != 1:
        return None
    real = np.allclose(target.imag, 0.0)
    pos = brickwall_positions(n, d)
    gates = [np.eye(4) for _ in pos]
    for g in comp.circuit.gates:
        a, b = g.targets
        pair = (n - 1 - b, n - 1 - a)
        mat = _swap_pair(g.matrix)
        col = pair[0] + 1
        idx = next(i for i, (c, p, _) in enumerate(brickwall_layout(n, d)) if c == col and p == pair)
        gates[idx] = mat.real if real else mat
    return gates


def fit_brickwall(target, n: int, d: int, sweeps: int = 200, init_gates="auto", tol: float = 1e-12,
                  record: bool = False) -> FitResult:
    """SVD sweeps over a depth-``d`` brick-wall.

    ``init_gates="auto"`` starts from :func:`staircase_init` when the depth
    allows and from identities otherwise; None forces identities.
    """
    pos = brickwall_positions(n, d)
    if isinstance(init_gates, str):
        if init_gates != "auto":
            raise InvalidArgument("init_gates must be 'auto', None or a gate list")
        init_gates = staircase_init(target, d)
    res = maximize_fidelity(target, pos, init_gates, sweeps=sweeps, tol=tol, record=record)
    res.param_count = param_count(AnsatzSpec(n, d))
    return res


def fit_staircase(target, chi: int, sweeps: int = 100, tol: float = 1e-12) -> FitResult:
    """Fit the bond-``chi`` staircase, warm started from the truncated SVD MPS."""
    target = np.asarray(target)
    n = target.size.bit_length() - 1
    m = mps_from_dense(target, chi)
    comp = mps_to_circuit(m)
    pos = [g.targets for g in comp.circuit.gates]
    s = min(max(0, math.ceil(math.log2(chi))) if chi > 1 else 0, n - 1)
    if len(pos) != n - s or any(len(p) != s + 1 for p in pos):
        # truncated bonds collapsed below chi; fall back to the generic layout
        pos = staircase_positions(n, chi)
        init = None
    else:
        init = [g.matrix.real if np.allclose(target.imag, 0) else g.matrix for g in comp.circuit.gates]
    res = maximize_fidelity(target, pos, init, sweeps=sweeps, tol=tol)
    res.param_count = bond_param_count(n, chi)
    return res


def representation_curve(target, depths, sweeps: int = 200, tol: float = 1e-10) -> list:
    """``(d, param_count, eps_R)`` for brick-walls of increasing depth.

    Each depth starts from the previous optimum padded with identity gates,
    so ``eps_R`` cannot increase with depth.
    """
    target = np.asarray(target)
    n = target.size.bit_length() - 1
    rows = []
    prev = None
    prev_d = 0
    for d in sorted(depths):
        init = None
        if prev is not None:
            init = list(prev.gates) + [np.eye(4)] * (len(brickwall_positions(n, d)) - len(prev.gates))
        res = fit_brickwall(target, n, d, sweeps=sweeps, init_gates=init, tol=tol)
        rows.append((d, res.param_count, res.eps_R))
        prev, prev_d = res, d
    return rows


def mps_curve(target, chis, sweeps: int = 100) -> list:
    """``(chi, param_count, eps_R)`` for the staircase family."""
    return [(chi, *(lambda r: (r.param_count, r.eps_R))(fit_staircase(target, chi, sweeps))) for chi in chis]
