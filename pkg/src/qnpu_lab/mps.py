"""Matrix product states, analytic function MPS and MPS-to-circuit compilation.

Tensors use the layout ``(left bond, physical, right bond)``; site ``j``
(0-based) is qubit ``j`` of the amplitude-encoded state, so the physical
index of site 0 is the most significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFunctionError, DimensionMismatch, InvalidArgument
from .statevector import Circuit, Gate, H, complete_unitary, phase, prepare

DENSE_MAX_QUBITS = 24


@dataclass
class MPS:
    tensors: list = field(default_factory=list)

    def __post_init__(self):
        self.tensors = [np.asarray(t, dtype=complex) for t in self.tensors]
        if not self.tensors:
            raise InvalidArgument("an MPS needs at least one tensor")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionMismatch("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.ndim != 3 or a.shape[1] != 2 or a.shape[2] != b.shape[0]:
                raise DimensionMismatch("adjacent bond dimensions do not match")

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bonds(self) -> list:
        """Bond dimensions ``[1, D_1, ..., D_{n-1}, 1]``."""
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def chi(self) -> int:
        return max(self.bonds)


def random_mps(n: int, chi: int, rng: np.random.Generator, real: bool = False) -> MPS:
    tensors = []
    for j in range(n):
        dl = 1 if j == 0 else chi
        dr = 1 if j == n - 1 else chi
        t = rng.normal(size=(dl, 2, dr))
        if not real:
            t = t + 1j * rng.normal(size=(dl, 2, dr))
        tensors.append(t)
    return MPS(tensors)


def mps_norm(m: MPS) -> float:
    env = np.ones((1, 1), dtype=complex)
    for t in m.tensors:
        env = np.einsum("ab,aqc,bqd->cd", env, t.conj(), t)
    return float(math.sqrt(max(env[0, 0].real, 0.0)))


def mps_to_dense(m: MPS, normalize: bool = True):
    """Contract the chain; returns ``(psi, norm)`` with ``psi`` unit-norm."""
    if m.n > DENSE_MAX_QUBITS:
        raise InvalidArgument(f"dense contraction limited to {DENSE_MAX_QUBITS} qubits")
    psi = m.tensors[0].reshape(2, -1)
    for t in m.tensors[1:]:
        psi = (psi @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
    psi = psi.ravel()
    nrm = float(np.linalg.norm(psi))
    if normalize:
        if nrm == 0:
            raise DegenerateFunctionError("MPS has zero norm")
        psi = psi / nrm
    return psi, nrm


def mps_from_dense(psi, chi: int | None = None) -> MPS:
    """Left-to-right SVD factorization, truncated to bond ``chi`` if given."""
    psi = np.asarray(psi, dtype=complex)
    n = psi.size.bit_length() - 1
    tensors = []
    rest = psi.reshape(1, -1)
    dl = 1
    for _ in range(n - 1):
        mat = rest.reshape(dl * 2, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = int(np.sum(s > 1e-14 * max(s[0], 1e-300))) or 1
        if chi is not None:
            keep = min(keep, chi)
        tensors.append(u[:, :keep].reshape(dl, 2, keep))
        rest = s[:keep, None] * vh[:keep]
        dl = keep
    tensors.append(rest.reshape(dl, 2, 1))
    return MPS(tensors)


def scale_mps(m: MPS, c) -> MPS:
    ts = list(m.tensors)
    ts[0] = ts[0] * c
    return MPS(ts)


def mps_sum(terms) -> MPS:
    """Block-diagonal sum of MPS of equal length, ``[(coef, mps), ...]``."""
    terms = [(c, m) for c, m in terms]
    n = terms[0][1].n
    if any(m.n != n for _, m in terms):
        raise DimensionMismatch("summed MPS must have the same length")
    out = []
    for j in range(n):
        blocks = [m.tensors[j] * (c if j == 0 else 1.0) for c, m in terms]
        if j == 0:
            out.append(np.concatenate(blocks, axis=2))
        elif j == n - 1:
            out.append(np.concatenate(blocks, axis=0))
        else:
            dl = sum(b.shape[0] for b in blocks)
            dr = sum(b.shape[2] for b in blocks)
            t = np.zeros((dl, 2, dr), dtype=complex)
            i0 = k0 = 0
            for b in blocks:
                t[i0:i0 + b.shape[0], :, k0:k0 + b.shape[2]] = b
                i0 += b.shape[0]
                k0 += b.shape[2]
            out.append(t)
    if n == 1:
        out = [sum(m.tensors[0] * c for c, m in terms)]
    return MPS(out)


def mps_plane_wave(kappa: float, n: int) -> MPS:
    """Bond-1 MPS of ``exp(i kappa x_k) / sqrt(2**n)`` with ``x_k = k / 2**n``."""
    tensors = []
    for j in range(1, n + 1):
        t = np.array([1.0, np.exp(1j * kappa * 2.0 ** (-j))]) / math.sqrt(2.0)
        tensors.append(t.reshape(1, 2, 1))
    return MPS(tensors)


def _normalized(m: MPS, what: str) -> MPS:
    nrm = mps_norm(m)
    if nrm < 1e-12:
        raise DegenerateFunctionError(f"{what} vanishes on every grid point")
    return scale_mps(m, 1.0 / nrm)


def mps_sine(kappa: float, n: int) -> MPS:
    """Bond-2 MPS proportional to ``sin(kappa x_k)``, unit norm."""
    m = mps_sum([(-0.5j, mps_plane_wave(kappa, n)), (0.5j, mps_plane_wave(-kappa, n))])
    return _normalized(m, "sine")


def mps_two_sines(s1: float, s2: float, kappa1: float, kappa2: float, n: int) -> MPS:
    """Bond-4 MPS proportional to ``s1 sin(k1 x) + s2 sin(k2 x)``.

    Terms with a zero amplitude are dropped, so ``s2 = 0`` gives bond 2.
    """
    terms = []
    for s, k in ((s1, kappa1), (s2, kappa2)):
        if s != 0:
            terms += [(-0.5j * s, mps_plane_wave(k, n)), (0.5j * s, mps_plane_wave(-k, n))]
    if not terms:
        raise DegenerateFunctionError("both sine amplitudes are zero")
    return _normalized(mps_sum(terms), "sum of sines")


def plane_wave_circuit(kappa: float, n: int) -> Circuit:
    """Hadamards followed by phase gates ``R_phi`` with ``phi_j = kappa 2**-j``."""
    circ = Circuit(n)
    for j in range(n):
        circ.append(H(j))
        circ.append(phase(j, kappa * 2.0 ** (-(j + 1))))
    return circ


# --------------------------------------------------------------------------
# compilation


@dataclass
class CompiledMps:
    circuit: Circuit
    depth_two_qubit: int
    norm_factor: float
    s: int
    unitaries: list


def left_canonical(m: MPS):
    """QR sweep with non-negative ``R`` diagonals.

    Returns the isometries ``Q_j`` (shape ``(D_{j-1}, 2, D_j)``) and the
    final scalar, which is the norm of ``m``.
    """
    qs = []
    carry = np.ones((1, 1), dtype=complex)
    for t in m.tensors:
        t = np.tensordot(carry, t, axes=(1, 0))
        dl, _, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl * 2, dr))
        d = np.diag(r)
        ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
        q = q * ph[None, :]
        r = ph.conj()[:, None] * r
        qs.append(q.reshape(dl, 2, q.shape[1]))
        carry = r
    return qs, float(carry[0, 0].real)


def two_qubit_count(n: int, s: int) -> int:
    """Two-qubit gates needed for the staircase of ``n - s`` blocks on ``s + 1`` qubits."""
    if s == 0:
        return 0
    if s == 1:
        return n - 1
    if s == 2:
        return 5 * (n - 2) + 1
    m = s + 1
    per_block = math.ceil(23 / 48 * 4**m - 1.5 * 2**m + 4 / 3)
    return (n - s) * per_block


def mps_to_circuit(m: MPS) -> CompiledMps:
    """Staircase of ``n - s`` unitaries on ``s + 1`` neighbouring qubits.

    ``s = ceil(log2 chi)``. Unitary ``U_j`` (1-based ``j``) acts on qubits
    ``j-1-s .. j-1``; its input column ``(0, alpha_j)`` maps to the
    isometry ``Q_j[(alpha_{j-1}, q_j), alpha_j]``. The first ``s + 1`` sites
    are merged into a single leading block. Blocks run from ``j = n`` down.
    """
    n = m.n
    if n < 2:
        raise InvalidArgument("compilation needs n >= 2")
    qs, nrm = left_canonical(m)
    if nrm < 1e-14:
        raise DegenerateFunctionError("cannot compile a zero-norm MPS")
    s = max(0, math.ceil(math.log2(m.chi))) if m.chi > 1 else 0
    s = min(s, n - 1)
    chit = 1 << s
    circ = Circuit(n)
    unitaries = []
    for j in range(n, s + 1, -1):
        q = qs[j - 1]
        dl, _, dr = q.shape
        v = np.zeros((chit, 2, dr), dtype=complex)
        v[:dl] = q
        u = complete_unitary(v.reshape(2 * chit, dr))
        unitaries.append(u)
        circ.append(Gate(u, tuple(range(j - 1 - s, j)), name="U"))
    lead = qs[0].reshape(2, -1)
    for q in qs[1:s + 1]:
        lead = (lead @ q.reshape(q.shape[0], -1)).reshape(-1, q.shape[2])
    u = complete_unitary(lead)
    unitaries.append(u)
    circ.append(Gate(u, tuple(range(0, s + 1)), name="U"))
    return CompiledMps(circ, two_qubit_count(n, s), nrm, s, unitaries)


def compiled_fidelity(m: MPS, compiled: CompiledMps) -> float:
    psi, _ = mps_to_dense(m)
    return abs(np.vdot(psi, prepare(compiled.circuit)))


# --------------------------------------------------------------------------
# probabilistic trig states


@dataclass
class TrigOutcome:
    branch: str
    state: np.ndarray | None
    probability: float
    probabilities: dict
    states: dict


def trig_circuit(kappa: float, n: int) -> Circuit:
    """Ancilla (qubit ``n``) interferes plane waves of ``+kappa`` and ``-kappa``."""
    circ = Circuit(n, 1)
    anc = n
    circ.append(H(anc))
    for j in range(n):
        circ.append(H(j))
        phi = kappa * 2.0 ** (-(j + 1))
        circ.append(phase(j, phi).with_control(anc, 1))
        circ.append(phase(j, -phi).with_control(anc, 0))
    circ.append(H(anc))
    return circ


def generate_trig_state(kappa: float, n: int, seed=None) -> TrigOutcome:
    """Branch ``cos`` (ancilla 0) or ``sin`` (ancilla 1) of :func:`trig_circuit`.

    Both branch probabilities are reported. With a seed the branch is drawn
    at random, otherwise the more likely branch is returned.
    """
    full = prepare(trig_circuit(kappa, n)).reshape(1 << n, 2)
    probs, states = {}, {}
    for b, name in ((0, "cos"), (1, "sin")):
        amp = full[:, b]
        p = float(np.vdot(amp, amp).real)
        probs[name] = p
        states[name] = amp / math.sqrt(p) if p > 1e-14 else None
    if seed is None:
        branch = "cos" if probs["cos"] >= probs["sin"] else "sin"
    else:
        from .qnpu import rng_from_seed

        branch = "sin" if rng_from_seed(seed).random() < probs["sin"] else "cos"
    return TrigOutcome(branch, states[branch], probs[branch], probs, states)


# --------------------------------------------------------------------------
# diagnostics


def ipr(psi) -> float:
    """Inverse participation ratio ``(N sum |psi_k|^4)**-1``."""
    p = np.abs(np.asarray(psi)) ** 2
    return float(1.0 / (p.size * np.sum(p * p)))


def entanglement_entropies(psi) -> np.ndarray:
    """Von Neumann entropy (natural log) at each of the ``n - 1`` cuts."""
    psi = np.asarray(psi)
    n = psi.size.bit_length() - 1
    out = np.zeros(max(n - 1, 0))
    for cut in range(1, n):
        sv = np.linalg.svd(psi.reshape(1 << cut, -1), compute_uv=False)
        p = sv**2
        p = p[p > 1e-300]
        p = p / p.sum()
        out[cut - 1] = float(-np.sum(p * np.log(p)))
    return out


def s_max(psi) -> float:
    e = entanglement_entropies(psi)
    return float(max(e.max(), 0.0)) if e.size else 0.0


def mps_param_count(m: MPS) -> int:
    total = 0
    b = m.bonds
    for j in range(m.n):
        dl, dr = b[j], b[j + 1]
        total += dl * dr * 2 - dr * (dr + 1) // 2
    return total


def bond_param_count(n: int, chi: int) -> int:
    """Parameters of an ``n``-site MPS with bonds capped at ``chi``."""
    bonds = [min(chi, 2**j, 2 ** (n - j)) for j in range(n + 1)]
    return sum(bonds[j] * bonds[j + 1] * 2 - bonds[j + 1] * (bonds[j + 1] + 1) // 2 for j in range(n))
