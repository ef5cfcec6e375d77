"""Dense state-vector simulation.

States are plain complex numpy arrays of length ``2**nq``. Qubit 0 is the
most significant bit of the basis index, so ``k = sum_j q_j 2**(nq-1-j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidArgument

UNITARY_TOL = 1e-10


def num_qubits(state) -> int:
    size = np.asarray(state).shape[0]
    nq = size.bit_length() - 1
    if size < 1 or (1 << nq) != size:
        raise DimensionMismatch(f"state length {size} is not a power of two")
    return nq


@dataclass
class Gate:
    matrix: np.ndarray
    targets: tuple
    controls: tuple = ()
    control_values: tuple | None = None
    name: str = "U"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.targets = tuple(int(t) for t in self.targets)
        self.controls = tuple(int(c) for c in self.controls)
        if self.control_values is None:
            self.control_values = (1,) * len(self.controls)
        self.control_values = tuple(int(v) for v in self.control_values)
        m = len(self.targets)
        if self.matrix.shape != (1 << m, 1 << m):
            raise DimensionMismatch(
                f"gate {self.name} has matrix {self.matrix.shape} for {m} targets"
            )
        if len(set(self.targets)) != m or set(self.targets) & set(self.controls):
            raise InvalidArgument(f"gate {self.name}: targets and controls must be distinct")
        if len(set(self.controls)) != len(self.controls):
            raise InvalidArgument(f"gate {self.name}: repeated control qubit")
        if len(self.control_values) != len(self.controls):
            raise InvalidArgument(f"gate {self.name}: control_values length mismatch")
        err = np.abs(self.matrix.conj().T @ self.matrix - np.eye(1 << m)).max()
        if err > UNITARY_TOL:
            raise InvalidArgument(f"gate {self.name} is not unitary (error {err:.2e})")

    @property
    def qubits(self) -> tuple:
        return self.targets + self.controls

    def inverse(self) -> "Gate":
        return Gate(self.matrix.conj().T, self.targets, self.controls, self.control_values,
                    self.name + "^-1" if not self.name.endswith("^-1") else self.name[:-3])

    def conj(self) -> "Gate":
        return Gate(self.matrix.conj(), self.targets, self.controls, self.control_values, self.name + "*")

    def with_control(self, qubit: int, value: int = 1) -> "Gate":
        return Gate(self.matrix, self.targets, self.controls + (qubit,),
                    self.control_values + (value,), self.name)

    def remap(self, mapping) -> "Gate":
        return Gate(self.matrix, [mapping[t] for t in self.targets],
                    [mapping[c] for c in self.controls], self.control_values, self.name)


@dataclass
class Circuit:
    n_register: int
    n_ancilla: int = 0
    gates: list = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return self.n_register + self.n_ancilla

    def _check(self, gate: Gate):
        if max(gate.qubits) >= self.n_qubits or min(gate.qubits) < 0:
            raise InvalidArgument(
                f"gate {gate.name} on qubits {gate.qubits} outside a {self.n_qubits}-qubit circuit"
            )

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def inverse(self) -> "Circuit":
        return Circuit(self.n_register, self.n_ancilla, [g.inverse() for g in reversed(self.gates)])

    def conj(self) -> "Circuit":
        return Circuit(self.n_register, self.n_ancilla, [g.conj() for g in self.gates])

    def embedded(self, mapping: Sequence[int], n_register: int, n_ancilla: int = 0) -> "Circuit":
        """Relabel qubit ``i`` as ``mapping[i]`` inside a larger circuit."""
        out = Circuit(n_register, n_ancilla)
        return out.extend(g.remap(mapping) for g in self.gates)

    def controlled(self, qubit: int, value: int = 1) -> "Circuit":
        return Circuit(self.n_register, self.n_ancilla,
                       [g.with_control(qubit, value) for g in self.gates])

    def count(self, name: str | None = None, n_controls: int | None = None) -> int:
        return sum(
            1 for g in self.gates
            if (name is None or g.name == name) and (n_controls is None or len(g.controls) == n_controls)
        )

    def __len__(self):
        return len(self.gates)


# --------------------------------------------------------------------------
# gate library

_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]])
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1, -1])


def H(q) -> Gate:
    return Gate(_H, (q,), name="H")


def X(q) -> Gate:
    return Gate(_X, (q,), name="X")


def Y(q) -> Gate:
    return Gate(_Y, (q,), name="Y")


def Z(q) -> Gate:
    return Gate(_Z, (q,), name="Z")


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]])


def RY(q, theta) -> Gate:
    return Gate(ry_matrix(theta), (q,), name="RY")


def RZ(q, theta) -> Gate:
    return Gate(np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]), (q,), name="RZ")


def phase(q, phi) -> Gate:
    """``R_phi = diag(1, exp(i phi))``."""
    return Gate(np.diag([1.0, np.exp(1j * phi)]), (q,), name="P")


def CNOT(c, t, value: int = 1) -> Gate:
    return Gate(_X, (t,), (c,), (value,), name="CNOT")


def toffoli(c1, c2, t, values=(1, 1)) -> Gate:
    return Gate(_X, (t,), (c1, c2), tuple(values), name="TOFFOLI")


def SWAP(a, b) -> Gate:
    m = np.eye(4)[[0, 2, 1, 3]]
    return Gate(m, (a, b), name="SWAP")


def unitary(matrix, targets, name="U") -> Gate:
    return Gate(matrix, tuple(targets), name=name)


def complete_unitary(columns: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a square unitary.

    Extra columns come from modified Gram-Schmidt against the canonical
    basis vectors in index order, so the result is deterministic.
    """
    cols = np.asarray(columns, dtype=complex)
    if cols.ndim == 1:
        cols = cols[:, None]
    dim, r = cols.shape
    basis = [cols[:, i] for i in range(r)]
    for e in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[e] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis:
                v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
    if len(basis) != dim:
        raise InvalidArgument("could not complete columns to a unitary")
    return np.column_stack(basis)


def state_prep_gate(psi, targets, name="PREP") -> Gate:
    """A unitary on ``targets`` whose first column is the normalized vector ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise InvalidArgument("cannot prepare the zero vector")
    return Gate(complete_unitary(psi / nrm), tuple(targets), name=name)


# --------------------------------------------------------------------------
# simulation


def init_basis(n: int, k: int = 0) -> np.ndarray:
    if n < 0 or not 0 <= k < (1 << n):
        raise InvalidArgument(f"basis index {k} out of range for {n} qubits")
    out = np.zeros(1 << n, dtype=complex)
    out[k] = 1.0
    return out


def apply_gate(state: np.ndarray, gate: Gate, nq: int | None = None, inplace: bool = False) -> np.ndarray:
    if nq is None:
        nq = num_qubits(state)
    if max(gate.qubits) >= nq:
        raise DimensionMismatch(f"gate {gate.name} touches qubit {max(gate.qubits)} of {nq}")
    out = state if inplace else np.array(state, dtype=complex)
    psi = out.reshape((2,) * nq)
    idx = [slice(None)] * nq
    for c, v in zip(gate.controls, gate.control_values):
        idx[c] = v
    idx = tuple(idx)
    sub = psi[idx]
    # axis of each target once the fixed control axes are dropped
    kept = [q for q in range(nq) if q not in gate.controls]
    axes = [kept.index(t) for t in gate.targets]
    m = len(gate.targets)
    mat = gate.matrix.reshape((2,) * (2 * m))
    new = np.tensordot(mat, sub, axes=(list(range(m, 2 * m)), axes))
    psi[idx] = np.moveaxis(new, list(range(m)), axes)
    return out


def apply_circuit(state: np.ndarray, circuit: Circuit) -> np.ndarray:
    nq = num_qubits(state)
    if nq != circuit.n_qubits:
        raise DimensionMismatch(f"state has {nq} qubits, circuit needs {circuit.n_qubits}")
    out = np.array(state, dtype=complex)
    for g in circuit.gates:
        apply_gate(out, g, nq, inplace=True)
    return out


def prepare(circuit: Circuit) -> np.ndarray:
    """Run the circuit on ``|0...0>`` and return the full state."""
    return apply_circuit(init_basis(circuit.n_qubits, 0), circuit)


def prepare_register(circuit: Circuit) -> np.ndarray:
    """Run a circuit whose ancillas return to ``|0>`` and return the register state."""
    full = prepare(circuit).reshape(1 << circuit.n_register, 1 << circuit.n_ancilla)
    leak = np.linalg.norm(full[:, 1:])
    if leak > 1e-9:
        raise InvalidArgument(f"ancillas not restored to |0> (leakage {leak:.2e})")
    return full[:, 0].copy()


def circuit_matrix(circuit: Circuit) -> np.ndarray:
    """Dense unitary of ``circuit`` (column ``j`` is the image of ``|j>``)."""
    nq = circuit.n_qubits
    dim = 1 << nq
    mat = np.eye(dim, dtype=complex)
    # simulate all columns at once by carrying the column index as an extra axis
    psi = mat.reshape((2,) * nq + (dim,))
    for g in circuit.gates:
        flat = psi.reshape(dim * dim)
        _apply_batched(flat, g, nq, dim)
    return mat


def _apply_batched(flat, gate, nq, batch):
    psi = flat.reshape((2,) * nq + (batch,))
    idx = [slice(None)] * (nq + 1)
    for c, v in zip(gate.controls, gate.control_values):
        idx[c] = v
    idx = tuple(idx)
    sub = psi[idx]
    kept = [q for q in range(nq + 1) if q not in gate.controls]
    axes = [kept.index(t) for t in gate.targets]
    m = len(gate.targets)
    mat = gate.matrix.reshape((2,) * (2 * m))
    new = np.tensordot(mat, sub, axes=(list(range(m, 2 * m)), axes))
    psi[idx] = np.moveaxis(new, list(range(m)), axes)


def inner(u, v) -> complex:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise DimensionMismatch(f"inner product of shapes {u.shape} and {v.shape}")
    return complex(np.vdot(u, v))


def probabilities(state) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


def ancilla_sigma_z(state, ancilla_index: int) -> float:
    nq = num_qubits(state)
    if not 0 <= ancilla_index < nq:
        raise InvalidArgument(f"qubit {ancilla_index} out of range for {nq} qubits")
    p = probabilities(state).reshape(1 << ancilla_index, 2, -1)
    return float(p[:, 0, :].sum() - p[:, 1, :].sum())


def qft(state) -> np.ndarray:
    """``phi_j = N**-0.5 sum_k exp(+2 pi i j k / N) psi_k``."""
    psi = np.asarray(state, dtype=complex)
    return np.fft.ifft(psi, norm="ortho")


def iqft(state) -> np.ndarray:
    return np.fft.fft(np.asarray(state, dtype=complex), norm="ortho")


def qft_matrix(n: int) -> np.ndarray:
    N = 1 << n
    j = np.arange(N)
    return np.exp(2j * np.pi * np.outer(j, j) / N) / math.sqrt(N)


def qft_circuit(n: int) -> Circuit:
    """Hadamard and controlled-phase network realizing :func:`qft` on ``n`` qubits."""
    circ = Circuit(n)
    for j in range(n):
        circ.append(H(j))
        for k in range(j + 1, n):
            circ.append(phase(j, math.pi / (1 << (k - j))).with_control(k))
    for j in range(n // 2):
        circ.append(SWAP(j, n - 1 - j))
    return circ
