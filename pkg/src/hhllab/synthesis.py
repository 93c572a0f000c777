"""Lowering of arbitrary unitaries to single-qubit rotations and CX.

Every routine returns ``(gates, phase)`` where ``phase`` is the global phase
that must be added for exact (not merely projective) equivalence.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg

from .circuit import Circuit, Gate, apply_gate, gate

ANGLE_ATOL = 1e-12


def _wrap(theta: float) -> tuple[float, float]:
    """Reduce a rotation angle to (-pi, pi]; return (angle, extra global phase).

    ``R(theta + 2 pi) = -R(theta)`` for RX/RY/RZ.
    """
    k = np.round(theta / (2 * np.pi))
    reduced = theta - 2 * np.pi * k
    if reduced <= -np.pi:
        reduced += 2 * np.pi
        k -= 1
    return float(reduced), float(np.pi * (k % 2))


def _rot(label: str, theta: float, q: int) -> tuple[list[Gate], float]:
    theta, ph = _wrap(theta)
    if abs(theta) < ANGLE_ATOL:
        return [], ph
    return [gate(label, q, param=theta)], ph


# --- one qubit -----------------------------------------------------------

def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """Return ``(phase, beta, gamma, delta)`` with ``u = e^{i phase} RZ(beta) RY(gamma) RZ(delta)``."""
    det = np.linalg.det(u)
    v = u / np.sqrt(det)
    gamma = 2 * np.arctan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[0, 0]) < 1e-14:
        plus, minus = 0.0, 2 * np.angle(v[1, 0])
    elif abs(v[1, 0]) < 1e-14:
        plus, minus = 2 * np.angle(v[1, 1]), 0.0
    else:
        plus, minus = 2 * np.angle(v[1, 1]), 2 * np.angle(v[1, 0])
    beta, delta = (plus + minus) / 2, (plus - minus) / 2
    rec = _rz(beta) @ _ry(gamma) @ _rz(delta)
    k = np.unravel_index(np.argmax(np.abs(rec)), rec.shape)
    ph = float(np.angle(u[k] / rec[k]))
    return ph, float(beta), float(gamma), float(delta)


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def one_qubit(u: np.ndarray, q: int) -> tuple[list[Gate], float]:
    ph, beta, gamma, delta = zyz_angles(u)
    gates: list[Gate] = []
    for label, theta in (("RZ", delta), ("RY", gamma), ("RZ", beta)):
        g, extra = _rot(label, theta, q)
        gates += g
        ph += extra
    return gates, ph


def controlled_one_qubit(u: np.ndarray, control: int, target: int) -> tuple[list[Gate], float]:
    """Two-CX construction ``C-U = P(alpha)_c . A X B X C`` with ``ABC = I``."""
    alpha, beta, gamma, delta = zyz_angles(u)
    seq = [
        ("RZ", (delta - beta) / 2),
        None,
        ("RZ", -(delta + beta) / 2), ("RY", -gamma / 2),
        None,
        ("RY", gamma / 2), ("RZ", beta),
    ]
    gates: list[Gate] = []
    ph = 0.0
    for item in seq:
        if item is None:
            gates.append(gate("CX", control, target))
            continue
        # A, B, C act unconditionally, so a sign from wrapping is a true global phase
        g, extra = _rot(item[0], item[1], target)
        gates += g
        ph += extra
    a = float(np.angle(np.exp(1j * alpha)))
    if abs(a) >= ANGLE_ATOL:
        gates.append(gate("PHASE", control, param=a))
    return gates, ph


# --- uniformly controlled rotations ----------------------------------------

def _gray(i: int) -> int:
    return i ^ (i >> 1)


def ucr(axis: str, angles: Sequence[float], controls: Sequence[int], target: int) -> list[Gate]:
    """Uniformly controlled rotation about Y or Z.

    Applies ``R(angles[c])`` to ``target`` where ``c`` is the value of the
    control register (``controls[0]`` least significant).  Uses the Gray-code
    scheme with ``2^k`` rotations and ``2^k`` CX gates; zero or uniform angle
    vectors collapse to no gates or a single rotation.
    """
    label = {"Y": "RY", "Z": "RZ"}[axis.upper()]
    theta = np.asarray(angles, dtype=float)
    k = len(controls)
    if theta.size != 1 << k:
        raise ValueError(f"expected {1 << k} angles for {k} controls, got {theta.size}")
    if np.all(np.abs(theta) < ANGLE_ATOL):
        return []
    if k == 0 or np.all(np.abs(theta - theta[0]) < ANGLE_ATOL):
        return [gate(label, target, param=float(theta[0]))]
    n = 1 << k
    idx = np.arange(n)
    gray = idx ^ (idx >> 1)
    parity = np.array([[bin(c & g).count("1") & 1 for g in gray] for c in idx])
    m = 1.0 - 2.0 * parity
    alpha = m.T @ theta / n
    gates: list[Gate] = []
    for i in range(n):
        if abs(alpha[i]) >= ANGLE_ATOL:
            gates.append(gate(label, target, param=float(alpha[i])))
        changed = _gray(i) ^ _gray((i + 1) % n)
        gates.append(gate("CX", controls[changed.bit_length() - 1], target))
    return gates


# --- two qubits ------------------------------------------------------------

_MAGIC = np.array([[1, 1j, 0, 0], [0, 0, 1j, 1], [0, 0, 1j, -1], [1, -1j, 0, 0]], dtype=complex) / np.sqrt(2)
_MAGIC_DAG = _MAGIC.conj().T
_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# XX, YY, ZZ are diagonal in the magic basis; rows of this matrix are their diagonals plus identity
_INTERACTION_BASIS = np.array(
    [np.real(np.diag(_MAGIC_DAG @ np.kron(_PAULI[p], _PAULI[p]) @ _MAGIC)) for p in "XYZ"] + [np.ones(4)]
)


def local_unitary(gates: Sequence[Gate], qubits: Sequence[int]) -> np.ndarray:
    """Matrix of a gate list restricted to ``qubits`` (``qubits[0]`` least significant)."""
    n = len(qubits)
    index = {q: i for i, q in enumerate(qubits)}
    cols = np.eye(1 << n, dtype=complex)
    out = np.empty_like(cols)
    local = [g.remap(index) for g in gates]
    for j in range(1 << n):
        psi = cols[:, j]
        for g in local:
            psi = apply_gate(psi, g, n)
        out[:, j] = psi
    return out


def _factor_kron(k: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Split ``k = e^{i phase} kron(a, b)`` with ``a, b`` in SU(2)."""
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = u[:, 0].reshape(2, 2) * np.sqrt(s[0])
    b = vh[0].reshape(2, 2) * np.sqrt(s[0])
    a = a / np.sqrt(np.linalg.det(a))
    b = b / np.sqrt(np.linalg.det(b))
    rec = np.kron(a, b)
    i = np.unravel_index(np.argmax(np.abs(rec)), rec.shape)
    return a, b, float(np.angle(k[i] / rec[i]))


def _simultaneous_real_diag(m: np.ndarray) -> np.ndarray:
    """Real orthogonal ``p`` (det +1) diagonalising symmetric unitary ``m``."""
    rng = np.random.default_rng(1234)
    for _ in range(16):
        c = rng.normal()
        _, p = np.linalg.eigh(m.real + c * m.imag)
        d = p.T @ m @ p
        if np.allclose(d, np.diag(np.diag(d)), atol=1e-9):
            if np.linalg.det(p) < 0:
                p[:, 0] *= -1
            return p
    raise np.linalg.LinAlgError("failed to diagonalise symmetric unitary")


def kak(u: np.ndarray):
    """Cartan decomposition of a two-qubit unitary.

    Returns ``(phase, (a1, b1), (x, y, z), (a2, b2))`` with
    ``u = e^{i phase} kron(a1, b1) exp(i(x XX + y YY + z ZZ)) kron(a2, b2)``.
    """
    det = np.linalg.det(u)
    ph = float(np.angle(det)) / 4
    us = u * np.exp(-1j * ph)
    up = _MAGIC_DAG @ us @ _MAGIC
    p = _simultaneous_real_diag(up.T @ up)
    d2 = np.diag(p.T @ up.T @ up @ p)
    theta = np.angle(d2) / 2
    # det(up) = 1 forces sum(theta) = 0 mod pi; pick branch so Q comes out in SO(4)
    if np.real(np.exp(1j * theta.sum())) < 0:
        theta[0] += np.pi
    dmat = np.diag(np.exp(1j * theta))
    q = up @ p @ dmat.conj()
    q = q.real
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
        theta[0] += np.pi
    k1 = _MAGIC @ q @ _MAGIC_DAG
    k2 = _MAGIC @ p.T @ _MAGIC_DAG
    x, y, z, g = np.linalg.solve(_INTERACTION_BASIS.T, theta)
    a1, b1, p1 = _factor_kron(k1)
    a2, b2, p2 = _factor_kron(k2)
    return ph + g + p1 + p2, (a1, b1), (float(x), float(y), float(z)), (a2, b2)


def _interaction_circuit(x: float, y: float, z: float, q0: int, q1: int) -> tuple[list[Gate], float]:
    """Three-CX circuit for ``exp(i(x XX + y YY + z ZZ))``."""
    gates: list[Gate] = []
    ph = 0.0

    def rot(label, t, q):
        nonlocal ph
        g, e = _rot(label, t, q)
        gates.extend(g)
        ph += e

    # powers of Paulis written as rotations: P**s = e^{i pi s/2} R_P(pi s)
    a = -2 * x / np.pi + 0.5
    b = -2 * y / np.pi + 0.5
    c = -2 * z / np.pi + 0.5
    rot("RX", np.pi * 0.5, q0)
    ph += np.pi * 0.25
    gates.append(gate("CX", q0, q1))
    rot("RX", np.pi * a, q0)
    rot("RY", np.pi * b, q1)
    ph += np.pi * (a + b) / 2
    gates.append(gate("CX", q1, q0))
    rot("RX", -np.pi * 0.5, q1)
    rot("RZ", np.pi * c, q1)
    ph += np.pi * (c - 0.5) / 2
    gates.append(gate("CX", q0, q1))
    return gates, ph


def two_qubit(u: np.ndarray, qubits: Sequence[int]) -> tuple[list[Gate], float]:
    """At most three CX plus single-qubit rotations.  ``qubits[0]`` is the low local bit."""
    lo, hi = qubits
    ph, (a1, b1), (x, y, z), (a2, b2) = kak(u)
    gates: list[Gate] = []
    for m, q in ((b2, lo), (a2, hi)):
        g, e = one_qubit(m, q)
        gates += g
        ph += e
    g, e = _interaction_circuit(x, y, z, lo, hi)
    gates += g
    ph += e
    for m, q in ((b1, lo), (a1, hi)):
        g, e = one_qubit(m, q)
        gates += g
        ph += e
    # pin the global phase exactly against the target matrix
    rec = local_unitary(gates, qubits)
    k = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    ph = float(np.angle(u[k] / rec[k]))
    if not np.allclose(rec * np.exp(1j * ph), u, atol=1e-8):
        raise np.linalg.LinAlgError("two-qubit synthesis failed to reproduce the target")
    return gates, ph


# --- Shannon decomposition ---------------------------------------------------

def _demultiplex(a: np.ndarray, b: np.ndarray):
    """``diag(a, b) = (I x v) (d (+) d^*) (I x w)``."""
    t, v = scipy.linalg.schur(a @ b.conj().T, output="complex")
    d = np.sqrt(np.diag(t))
    w = (d[:, None] * v.conj().T) @ b
    return v, d, w


def unitary(u: np.ndarray, qubits: Sequence[int]) -> tuple[list[Gate], float]:
    """Lower an arbitrary unitary on ``qubits`` (``qubits[0]`` least significant)."""
    n = len(qubits)
    if u.shape != (1 << n, 1 << n):
        raise ValueError("matrix does not match qubit count")
    if n == 1:
        return one_qubit(u, qubits[0])
    if n == 2:
        return two_qubit(u, qubits)
    half = 1 << (n - 1)
    low, msb = list(qubits[:-1]), qubits[-1]
    (u1, u2), theta, (v1h, v2h) = scipy.linalg.cossin(u, p=half, q=half, separate=True)
    gates: list[Gate] = []
    ph = 0.0

    def multiplexed(x0, x1):
        nonlocal ph
        if np.allclose(x0, x1, atol=1e-13):
            g, e = unitary(x0, low)
            gates.extend(g)
            ph += e
            return
        v, d, w = _demultiplex(x0, x1)
        g, e = unitary(w, low)
        gates.extend(g)
        ph += e
        gates.extend(ucr("Z", -2 * np.angle(d), low, msb))
        g, e = unitary(v, low)
        gates.extend(g)
        ph += e

    multiplexed(v1h, v2h)
    gates.extend(ucr("Y", 2 * theta, low, msb))
    multiplexed(u1, u2)
    return gates, ph


def controlled_matrix(m: np.ndarray, n_controls: int) -> np.ndarray:
    """Local matrix of ``m`` controlled on ``n_controls`` high qubits (all ones)."""
    k = m.shape[0]
    full = np.eye(k << n_controls, dtype=complex)
    full[-k:, -k:] = m
    return full


# --- state preparation -----------------------------------------------------------

def state_prep(b) -> Circuit:
    """Multiplexed RY/RZ cascade preparing ``b`` from ``|0...0>`` exactly.

    Magnitudes are loaded from the most significant qubit down; phases are
    peeled pairwise from qubit 0 upward and the remaining scalar becomes the
    circuit's global phase.
    """
    b = np.asarray(b, dtype=complex).reshape(-1)
    n = int(np.log2(b.size))
    if b.size != 1 << n or n < 1:
        raise ValueError(f"state length {b.size} must be a power of two >= 2")
    if abs(np.linalg.norm(b) - 1) > 1e-9:
        raise ValueError(f"vector is not normalised (norm {np.linalg.norm(b):.12f})")
    circ = Circuit(n)
    mags = np.abs(b)
    for m in range(n - 1, -1, -1):
        blocks = mags.reshape(-1, 2, 1 << m)  # [parent, bit m, lower bits]
        w = np.linalg.norm(blocks, axis=2)
        angles = 2 * np.arctan2(w[:, 1], w[:, 0])
        circ.extend(ucr("Y", angles, list(range(m + 1, n)), m))
    omega = np.where(mags > 0, np.angle(b), 0.0)
    for m in range(n):
        pairs = omega.reshape(-1, 2)
        circ.extend(ucr("Z", pairs[:, 1] - pairs[:, 0], list(range(m + 1, n)), m))
        omega = pairs.mean(axis=1)
    circ.global_phase = float(omega[0])
    return circ
