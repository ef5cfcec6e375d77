"""Ancilla-based measurement networks (QNPUs) and the adder.

Every QNPU here is a generalized Hadamard test: the ancilla is put in
``|+>``, the network prepares ``|chi_0>`` on the ancilla-0 branch and
``|chi_1>`` on the ancilla-1 branch, and a final Hadamard gives
``<sigma_z> = Re <chi_0|chi_1>``. Each entry point also evaluates the same
quantity directly from the amplitudes so the two paths can be compared.

Qubit layout: data registers first, then the QNPU ancilla, then work
ancillas of the adder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument
from .grid import GridSpec, laplacian_spectrum
from .statevector import (
    CNOT,
    Circuit,
    Gate,
    H,
    X,
    ancilla_sigma_z,
    apply_circuit,
    init_basis,
    prepare,
    qft,
    ry_matrix,
    toffoli,
)

PATHS = ("circuit", "algebraic", "both")


@dataclass
class QnpuResult:
    sigma_z: float
    algebraic: float
    path: str
    value: float | None = None  # derived physical quantity, when one applies

    @property
    def discrepancy(self) -> float:
        return abs(self.sigma_z - self.algebraic)


def rng_from_seed(seed) -> np.random.Generator:
    """Counter-based 64-bit generator used for all shot sampling."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


# --------------------------------------------------------------------------
# adder


def adder_work_count(n: int) -> int:
    return max(n - 2, 0)


def build_adder(n: int) -> Circuit:
    """Controlled cyclic decrement ``|j> -> |j - 1 mod 2**n>``.

    Acting on amplitudes this is the shift ``(A psi)_k = psi_{k+1}``.
    Qubits ``0..n-1`` hold the register (qubit 0 most significant), qubit
    ``n`` is the control port and qubits ``n+1..2n-2`` are work ancillas that
    start and end in ``|0>``. Work ancilla ``a_j`` holds
    ``c AND NOT q_n AND ... AND NOT q_{n-j+1}`` (1-based register labels).
    """
    if n < 1:
        raise InvalidArgument(f"adder needs n >= 1, got {n}")
    w = adder_work_count(n)
    circ = Circuit(n, 1 + w)
    c = n
    q = lambda j: j - 1  # 1-based register label -> qubit index
    a = lambda j: c if j == 0 else n + j  # a_0 is the control itself
    if n == 1:
        return circ.append(CNOT(c, q(1)))
    if n == 2:
        circ.append(toffoli(c, q(2), q(1), (1, 0)))
        return circ.append(CNOT(c, q(2)))
    for j in range(1, n - 1):
        circ.append(toffoli(a(j - 1), q(n - j + 1), a(j), (1, 0)))
    circ.append(toffoli(a(n - 2), q(2), q(1), (1, 0)))
    for i in range(2, n - 1):
        j = n - i
        circ.append(CNOT(a(j), q(i)))
        if j > 1:
            circ.append(toffoli(a(j - 1), q(n - j + 1), a(j), (1, 0)))
    circ.append(toffoli(c, q(n), q(n - 1), (1, 0)))
    circ.append(toffoli(c, q(n), a(1), (1, 0)))
    circ.append(CNOT(c, q(n)))
    return circ


def adder_counts(circ: Circuit) -> dict:
    return {
        "ancillas": circ.n_ancilla - 1,
        "cnot": circ.count("CNOT"),
        "toffoli": circ.count("TOFFOLI"),
    }


def shift_up(psi) -> np.ndarray:
    """Algebraic adder ``(A psi)_k = psi_{k+1}``."""
    return np.roll(psi, -1)


def _adder_into(n: int, register: list, control: int, work: list, n_total_reg, n_total_anc,
                inverse=False) -> Circuit:
    circ = build_adder(n)
    if inverse:
        circ = circ.inverse()
    mapping = list(register) + [control] + list(work)
    return circ.embedded(mapping, n_total_reg, n_total_anc)


# --------------------------------------------------------------------------
# helpers


def _check_prep(prep: Circuit) -> int:
    if prep.n_ancilla != 0:
        raise InvalidArgument("preparation circuits must not use ancillas")
    return prep.n_register


def _place(circ: Circuit, offset: int, n_reg: int, n_anc: int) -> Circuit:
    return circ.embedded([offset + i for i in range(circ.n_qubits)], n_reg, n_anc)


def _resolve(path):
    if path not in PATHS:
        raise InvalidArgument(f"path must be one of {PATHS}")
    return path in ("circuit", "both"), path in ("algebraic", "both")


def _finish(circuit_sigma, algebraic, path, value_fn):
    sigma = circuit_sigma if circuit_sigma is not None else algebraic
    if algebraic is None:
        algebraic = sigma
    return QnpuResult(float(sigma), float(algebraic), path, value_fn(sigma))


def _hadamard_test(circ: Circuit, anc: int) -> float:
    return ancilla_sigma_z(prepare(circ), anc)


# --------------------------------------------------------------------------
# ground-state QNPUs


def kinetic_circuit(prep: Circuit) -> tuple[Circuit, int]:
    n = _check_prep(prep)
    w = adder_work_count(n)
    anc = n
    circ = Circuit(n, 1 + w)
    circ.extend(_place(prep, 0, n, 1 + w).gates)
    circ.append(H(anc))
    circ.extend(_adder_into(n, range(n), anc, range(n + 1, n + 1 + w), n, 1 + w).gates)
    circ.append(H(anc))
    return circ, anc


def kinetic_qnpu(prep: Circuit, grid: GridSpec, path: str = "both") -> QnpuResult:
    """``sigma_z = Re <psi|A|psi>`` and ``K = (1 - sigma_z) / h**2``."""
    use_c, use_a = _resolve(path)
    n = _check_prep(prep)
    if n != grid.n:
        raise DimensionMismatch(f"prep has {n} qubits, grid has {grid.n}")
    sig_c = alg = None
    if use_c:
        circ, anc = kinetic_circuit(prep)
        sig_c = _hadamard_test(circ, anc)
    if use_a:
        psi = prepare(prep)
        alg = float(np.vdot(psi, shift_up(psi)).real)
    return _finish(sig_c, alg, path, lambda s: (1.0 - s) / grid.h**2)


def potential_circuit(prep: Circuit, pot_circuit: Circuit) -> tuple[Circuit, int]:
    n = _check_prep(prep)
    if _check_prep(pot_circuit) != n:
        raise DimensionMismatch("potential register size differs from the state register")
    anc = 2 * n
    circ = Circuit(2 * n, 1)
    circ.extend(_place(prep, 0, 2 * n, 1).gates)
    circ.append(H(anc))
    circ.extend(_place(pot_circuit, n, 2 * n, 1).controlled(anc).gates)
    for j in range(n):
        circ.append(toffoli(anc, j, n + j))
    circ.append(H(anc))
    return circ, anc


def potential_qnpu(prep: Circuit, pot_circuit: Circuit, alpha: float, path: str = "both") -> QnpuResult:
    """``sigma_z = sum_k V~_k |psi_k|^2`` and ``P = alpha sigma_z``."""
    use_c, use_a = _resolve(path)
    sig_c = alg = None
    if use_c:
        circ, anc = potential_circuit(prep, pot_circuit)
        sig_c = _hadamard_test(circ, anc)
    if use_a:
        if pot_circuit.n_register != prep.n_register:
            raise DimensionMismatch("potential register size differs from the state register")
        psi = prepare(prep)
        vt = prepare(pot_circuit)
        alg = float(np.dot(vt, np.abs(psi) ** 2).real)
    return _finish(sig_c, alg, path, lambda s: alpha * s)


def nonlinear_circuit(prep: Circuit) -> tuple[Circuit, int]:
    n = _check_prep(prep)
    anc = 3 * n
    circ = Circuit(3 * n, 1)
    circ.extend(_place(prep, 0, 3 * n, 1).gates)
    circ.append(H(anc))
    circ.extend(_place(prep, n, 3 * n, 1).controlled(anc).gates)
    circ.extend(_place(prep.conj(), 2 * n, 3 * n, 1).controlled(anc).gates)
    for j in range(n):
        circ.append(toffoli(anc, j, n + j))
        circ.append(toffoli(anc, j, 2 * n + j))
    circ.append(H(anc))
    return circ, anc


def nonlinear_qnpu(prep: Circuit, path: str = "both") -> QnpuResult:
    """``sigma_z = sum_k |psi_k|^4``; callers scale by ``g / 2h``."""
    use_c, use_a = _resolve(path)
    sig_c = alg = None
    if use_c:
        circ, anc = nonlinear_circuit(prep)
        sig_c = _hadamard_test(circ, anc)
    if use_a:
        psi = prepare(prep)
        alg = float(np.sum(np.abs(psi) ** 4))
    return _finish(sig_c, alg, path, lambda s: s)


# --------------------------------------------------------------------------
# reduced-hardware sampling


def diagonal_sampling(state, diag, shots: int, seed) -> float:
    """Mean of ``diag[k]`` over ``shots`` computational-basis samples of ``state``."""
    state = np.asarray(state)
    diag = np.asarray(diag, dtype=float)
    if diag.shape != state.shape:
        raise DimensionMismatch("diagonal and state lengths differ")
    if shots < 1:
        raise InvalidArgument("shots must be >= 1")
    p = np.abs(state) ** 2
    p = p / p.sum()
    counts = rng_from_seed(seed).multinomial(int(shots), p)
    return float(counts @ diag / shots)


def laplace_sampling(state, shots: int, seed, length: float = 1.0) -> float:
    """Estimate ``<psi|Lap|psi>`` by sampling in the Fourier basis."""
    state = np.asarray(state)
    spec = laplacian_spectrum(state.size, length)
    return diagonal_sampling(qft(state), spec, shots, seed)


def laplace_expectation(state, length: float = 1.0) -> float:
    phi = qft(state)
    return float(np.abs(phi) ** 2 @ laplacian_spectrum(phi.size, length))


# --------------------------------------------------------------------------
# readout


def readout_circuit(prep: Circuit, thetas, imaginary: bool = False) -> tuple[Circuit, int]:
    """Branch 0 rotates ``|0...0>`` by ``R_y(theta_j)``, branch 1 runs ``prep``."""
    n = _check_prep(prep)
    anc = n
    circ = Circuit(n, 1)
    circ.append(H(anc))
    circ.append(X(anc))
    for j, th in enumerate(thetas):
        if th != 0.0:
            circ.append(Gate(ry_matrix(th), (j,), (anc,), name="RY"))
    circ.append(X(anc))
    circ.extend(_place(prep, 0, n, 1).controlled(anc).gates)
    if imaginary:
        circ.append(Gate(np.diag([1.0, np.exp(-0.5j * math.pi)]), (anc,), name="P"))
    circ.append(H(anc))
    return circ, anc


def readout_amplitude(prep: Circuit, k: int, part: str = "real", path: str = "circuit") -> float:
    n = _check_prep(prep)
    if not 0 <= k < (1 << n):
        raise InvalidArgument(f"index {k} out of range for {n} qubits")
    if part not in ("real", "imaginary"):
        raise InvalidArgument("part must be 'real' or 'imaginary'")
    if path == "algebraic":
        amp = prepare(prep)[k]
        return float(amp.real if part == "real" else amp.imag)
    bits = [(k >> (n - 1 - j)) & 1 for j in range(n)]
    circ, anc = readout_circuit(prep, [math.pi * b for b in bits], imaginary=(part == "imaginary"))
    return _hadamard_test(circ, anc)


def coarse_average_readout(prep: Circuit, coarse_bits: int, path: str = "circuit") -> np.ndarray:
    """Readout with ``pi/2`` rotations on the ``n - coarse_bits`` least significant qubits.

    Entry ``c`` equals ``2**(-m/2) sum_{fine} Re psi_{c 2**m + fine}`` with
    ``m = n - coarse_bits``.
    """
    n = _check_prep(prep)
    if not 1 <= coarse_bits <= n:
        raise InvalidArgument(f"coarse_bits must be in [1, {n}]")
    m = n - coarse_bits
    if path == "algebraic":
        psi = prepare(prep).real.reshape(1 << coarse_bits, 1 << m)
        return psi.sum(axis=1) / 2.0 ** (m / 2.0)
    out = np.empty(1 << coarse_bits)
    for c in range(1 << coarse_bits):
        bits = [(c >> (coarse_bits - 1 - j)) & 1 for j in range(coarse_bits)]
        thetas = [math.pi * b for b in bits] + [math.pi / 2.0] * m
        circ, anc = readout_circuit(prep, thetas)
        out[c] = _hadamard_test(circ, anc)
    return out


# --------------------------------------------------------------------------
# controlled overlaps for time stepping

OVERLAP_KINDS = ("id", "A", "Adag", "AD", "AdagD")


def overlap_circuit(prep_tilde: Circuit, prep: Circuit, kind: str) -> tuple[Circuit, int]:
    """Hadamard test for ``Re <psi~| W |psi>``.

    ``kind`` selects ``W``: identity, ``A``, ``A^dag``, ``A D^dag`` or
    ``A^dag D^dag`` where ``D = diag(psi~)``. Branch 0 runs the
    anti-controlled ``U~``; branch 1 runs the controlled ``U`` followed by
    the controlled operator. The diagonal factor pairs the register with a
    second copy holding ``U~*|0>`` through ancilla-controlled CNOTs.
    """
    if kind not in OVERLAP_KINDS:
        raise InvalidArgument(f"kind must be one of {OVERLAP_KINDS}")
    n = _check_prep(prep)
    if _check_prep(prep_tilde) != n:
        raise DimensionMismatch("the two preparations act on different registers")
    with_d = kind.endswith("D")
    with_a = kind != "id"
    nreg = 2 * n if with_d else n
    anc = nreg
    w = adder_work_count(n) if with_a else 0
    nanc = 1 + w
    circ = Circuit(nreg, nanc)
    circ.append(H(anc))
    circ.extend(_place(prep_tilde, 0, nreg, nanc).controlled(anc, 0).gates)
    circ.extend(_place(prep, 0, nreg, nanc).controlled(anc).gates)
    if with_d:
        circ.extend(_place(prep_tilde.conj(), n, nreg, nanc).controlled(anc).gates)
        for j in range(n):
            circ.append(toffoli(anc, j, n + j))
    if with_a:
        inv = kind.startswith("Adag")
        circ.extend(_adder_into(n, range(n), anc, range(nreg + 1, nreg + 1 + w), nreg, nanc,
                                inverse=inv).gates)
    circ.append(H(anc))
    return circ, anc


def overlap_algebraic(psi_tilde, psi, kind: str) -> complex:
    if kind not in OVERLAP_KINDS:
        raise InvalidArgument(f"kind must be one of {OVERLAP_KINDS}")
    v = np.asarray(psi, dtype=complex)
    if kind.endswith("D"):
        v = np.conj(psi_tilde) * v
    if kind.startswith("Adag"):
        v = np.roll(v, 1)
    elif kind.startswith("A"):
        v = np.roll(v, -1)
    return complex(np.vdot(psi_tilde, v))


def overlap_qnpu(prep_tilde: Circuit, prep: Circuit, kind: str, path: str = "both") -> QnpuResult:
    use_c, use_a = _resolve(path)
    sig_c = alg = None
    if use_c:
        circ, anc = overlap_circuit(prep_tilde, prep, kind)
        sig_c = _hadamard_test(circ, anc)
    if use_a:
        alg = overlap_algebraic(prepare(prep_tilde), prepare(prep), kind).real
    return _finish(sig_c, alg, path, lambda s: s)


def adder_matrix_blocks(n: int):
    """Dense action of :func:`build_adder` on the register for control 1 and 0.

    Also returns the largest amplitude leaked out of the all-zero work
    ancilla subspace, which must vanish.
    """
    circ = build_adder(n)
    N = 1 << n
    nanc = circ.n_ancilla
    on = np.zeros((N, N), dtype=complex)
    off = np.zeros((N, N), dtype=complex)
    leak = 0.0
    for j in range(N):
        for cval, blk in ((1, on), (0, off)):
            state = init_basis(circ.n_qubits, (j << nanc) | (cval << (nanc - 1)))
            out = apply_circuit(state, circ).reshape(N, 2, -1)
            blk[:, j] = out[:, cval, 0]
            rest = out.copy()
            rest[:, cval, 0] = 0
            leak = max(leak, float(np.abs(rest).max()))
    return on, off, leak
