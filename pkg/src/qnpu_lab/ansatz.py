"""Variational circuit families and their parameter layouts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument
from .statevector import CNOT, RY, Circuit, Gate, X, prepare, ry_matrix

FIRST_PAIRS = ((0, 1), (1, 2), (2, 3))
ALL_PAIRS = tuple(itertools.combinations(range(4), 2))


@dataclass(frozen=True)
class AnsatzSpec:
    """``kind`` is "brickwall", "single" (one-parameter two-qubit circuit) or
    "tree" (uniformly controlled R_y tree reaching every real state)."""

    n: int
    d: int = 1
    real_valued: bool = True
    kind: str = "brickwall"

    def __post_init__(self):
        if self.kind not in ("brickwall", "single", "tree"):
            raise InvalidArgument(f"unknown ansatz kind {self.kind!r}")
        if self.kind == "brickwall":
            if self.n < 2:
                raise InvalidArgument("brick-wall ansatz needs n >= 2")
            if self.d < 1:
                raise InvalidArgument("brick-wall depth must be >= 1")
        if self.kind == "single" and self.n != 2:
            raise InvalidArgument("the single-parameter ansatz acts on 2 qubits")
        if self.kind == "tree" and self.n < 1:
            raise InvalidArgument("tree ansatz needs n >= 1")


def column_pairs(n: int, column: int) -> list:
    """Qubit pairs of brick-wall column ``column`` (1-based)."""
    start = 0 if column % 2 == 1 else 1
    return [(q, q + 1) for q in range(start, n - 1, 2)]


def brickwall_layout(n: int, d: int) -> list:
    """``(column, pair, n_params)`` for every gate in column-major order."""
    out = []
    for c in range(1, d + 1):
        for pair in column_pairs(n, c):
            out.append((c, pair, 3 if c == 1 else 6))
    return out


def param_count(spec: AnsatzSpec) -> int:
    if not spec.real_valued:
        raise InvalidArgument("parameter counting is only defined for real gates")
    if spec.kind == "single":
        return 1
    if spec.kind == "tree":
        return (1 << spec.n) - 1
    return sum(p for _, _, p in brickwall_layout(spec.n, spec.d))


def givens(dim: int, a: int, b: int, theta: float) -> np.ndarray:
    """Rotation in the (a, b) plane sending ``e_a`` to ``cos e_a + sin e_b``."""
    g = np.eye(dim)
    c, s = np.cos(theta), np.sin(theta)
    g[a, a] = c
    g[b, b] = c
    g[b, a] = s
    g[a, b] = -s
    return g


def first_column_gate(theta) -> np.ndarray:
    """3-angle real gate; its first column is a hyperspherical point of S^3."""
    m = np.eye(4)
    for (a, b), t in zip(FIRST_PAIRS, theta):
        m = givens(4, a, b, t) @ m
    return m


def so4_gate(theta) -> np.ndarray:
    """6-angle Givens product covering SO(4); identity at zero."""
    m = np.eye(4)
    for (a, b), t in zip(ALL_PAIRS, theta):
        m = givens(4, a, b, t) @ m
    return m


def build_brickwall(spec: AnsatzSpec, params) -> Circuit:
    params = np.asarray(params, dtype=float).ravel()
    npar = param_count(spec)
    if params.size != npar:
        raise DimensionMismatch(f"brick-wall ({spec.n}, {spec.d}) needs {npar} params, got {params.size}")
    circ = Circuit(spec.n)
    pos = 0
    for c, pair, k in brickwall_layout(spec.n, spec.d):
        theta = params[pos:pos + k]
        pos += k
        mat = first_column_gate(theta) if k == 3 else so4_gate(theta)
        circ.append(Gate(mat, pair, name="G"))
    return circ


def build_single_param(lam: float) -> Circuit:
    """Two-qubit, one-parameter real circuit; ``lam = 0`` prepares ``|00>``."""
    circ = Circuit(2)
    circ.extend([X(0), X(1), RY(0, lam), RY(1, lam), CNOT(0, 1), X(0)])
    return circ


def build_tree(n: int, params) -> Circuit:
    """Binary tree of uniformly controlled R_y rotations.

    Node ``(level j, prefix p)`` splits the amplitude of prefix ``p`` between
    its two children, so ``2**n - 1`` angles reach every real normalized
    state. All-zero angles give ``|0...0>``.
    """
    params = np.asarray(params, dtype=float).ravel()
    if params.size != (1 << n) - 1:
        raise DimensionMismatch(f"tree ansatz on {n} qubits needs {(1 << n) - 1} params")
    circ = Circuit(n)
    pos = 0
    for j in range(n):
        for prefix in range(1 << j):
            bits = tuple((prefix >> (j - 1 - i)) & 1 for i in range(j))
            g = Gate(ry_matrix(params[pos]), (j,), tuple(range(j)), bits, name="RY")
            circ.append(g)
            pos += 1
    return circ


def tree_state(n: int, params) -> np.ndarray:
    """Amplitudes of :func:`build_tree` without simulating the circuit."""
    params = np.asarray(params, dtype=float).ravel()
    if params.size != (1 << n) - 1:
        raise DimensionMismatch(f"tree ansatz on {n} qubits needs {(1 << n) - 1} params")
    amp = np.ones(1)
    pos = 0
    for j in range(n):
        th = params[pos:pos + (1 << j)] / 2.0
        amp = np.stack([amp * np.cos(th), amp * np.sin(th)], axis=1).ravel()
        pos += 1 << j
    return amp


def tree_angles(psi) -> np.ndarray:
    """Angles of :func:`build_tree` preparing the real vector ``psi``.

    Exact up to a global sign: the tree can only produce states whose first
    non-zero amplitude is positive.
    """
    psi = np.asarray(psi, dtype=float)
    n = psi.size.bit_length() - 1
    out = []
    for j in range(n):
        blocks = psi.reshape(1 << j, 2, -1)
        for prefix in range(1 << j):
            left = blocks[prefix, 0]
            right = blocks[prefix, 1]
            a = _signed_norm(left)
            b = _signed_norm(right)
            out.append(2.0 * np.arctan2(b, a))
        # normalize children so deeper angles see unit-norm subtrees
        psi = _descend(psi, j)
    return np.array(out)


def _signed_norm(v):
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    lead = v[np.flatnonzero(np.abs(v) > 1e-15 * nv)[0]]
    return nv if lead >= 0 else -nv


def _descend(psi, j):
    blocks = psi.reshape(1 << (j + 1), -1).copy()
    for r in range(blocks.shape[0]):
        s = _signed_norm(blocks[r])
        if s != 0:
            blocks[r] /= s
    return blocks.ravel()


def build_ansatz(spec: AnsatzSpec, params) -> Circuit:
    if spec.kind == "single":
        params = np.asarray(params, dtype=float).ravel()
        if params.size != 1:
            raise DimensionMismatch("single-parameter ansatz takes exactly one parameter")
        return build_single_param(float(params[0]))
    if spec.kind == "tree":
        return build_tree(spec.n, params)
    return build_brickwall(spec, params)


def prepare_ansatz(spec: AnsatzSpec, params) -> np.ndarray:
    if spec.kind == "tree":
        return tree_state(spec.n, params).astype(complex)
    return prepare(build_ansatz(spec, params))
