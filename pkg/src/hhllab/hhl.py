"""HHL circuit synthesis and exact simulation.

Register layout for ``n_d`` data and ``n_c`` clock qubits::

    data    0 .. n_d-1
    clock   n_d .. n_d+n_c-1   (clock qubit j controls U^(2^j))
    ancilla n_d+n_c            (most significant qubit)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg, synthesis
from .circuit import Circuit, QuantumState, ZeroProbabilityError, gate, is_unitary, run, unitary_gate
from .linalg import LinearSystem


def select_clock_qubits(n_d: int, kappa: float, has_negative: bool) -> int:
    """Default clock register size: ``max(n_d + 1, ceil(log2(kappa + 1)))`` plus a sign qubit."""
    if kappa < 1 or n_d < 1:
        raise ValueError("need kappa >= 1 and n_d >= 1")
    return max(n_d + 1, math.ceil(math.log2(kappa + 1))) + (1 if has_negative else 0)


def select_evolution_time(eig_max_abs: float, n_c: int, signed: bool) -> float:
    """Scale ``t`` so the largest eigenvalue lands on the top representable phase."""
    if eig_max_abs <= 0:
        raise ValueError("eig_max_abs must be positive")
    if signed:
        return math.pi * (1 - 2.0 ** -(n_c - 1)) / eig_max_abs
    return 2 * math.pi * (1 - 2.0 ** -n_c) / eig_max_abs


def anchored_time(eigenvalue: float, n_c: int, k: int) -> float:
    """Evolution time placing ``eigenvalue`` exactly on clock value ``k``."""
    if eigenvalue == 0 or not 0 < abs(k) < 1 << n_c:
        raise ValueError("need a nonzero eigenvalue and 0 < |k| < 2^n_c")
    return 2 * math.pi * k / ((1 << n_c) * eigenvalue)


def clock_eigenvalues(n_c: int, t: float, signed: bool) -> np.ndarray:
    """Eigenvalue estimate encoded by each clock value ``k`` (two's complement if signed)."""
    k = np.arange(1 << n_c, dtype=float)
    if signed:
        k = np.where(k >= 1 << (n_c - 1), k - (1 << n_c), k)
    return 2 * np.pi * k / ((1 << n_c) * t)


def default_c_const(n_c: int, t: float) -> float:
    return 2 * np.pi / ((1 << n_c) * t)


@dataclass(frozen=True)
class HHLConfig:
    n_c: int
    t: float
    c_const: float
    signed: bool = False

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.c_const <= 0:
            raise ValueError("c_const must be positive")
        if self.signed and self.n_c < 2:
            raise ValueError("signed encoding needs at least two clock qubits")

    @classmethod
    def for_system(cls, system: LinearSystem, n_c: int | None = None, t: float | None = None,
                   c_const: float | None = None) -> HHLConfig:
        """Fill unset parameters from the system's spectrum."""
        m = linalg.metrics(system.a)
        signed = m["has_negative"]
        if n_c is None:
            n_c = select_clock_qubits(system.n_qubits, m["condition_number"], signed)
        if t is None:
            t = select_evolution_time(m["eig_max_abs"], n_c, signed)
        if c_const is None:
            c_const = default_c_const(n_c, t)
        return cls(n_c=n_c, t=t, c_const=c_const, signed=signed)


def qft(qubits: Sequence[int], n_qubits: int | None = None) -> Circuit:
    """Quantum Fourier transform ``|j> -> sum_k e^{2 pi i jk/2^n}|k>/sqrt(2^n)`` on ``qubits``."""
    n = len(qubits)
    circ = Circuit(n_qubits if n_qubits is not None else max(qubits) + 1)
    for i in range(n - 1, -1, -1):
        circ.append(gate("H", qubits[i]))
        for m in range(i - 1, -1, -1):
            circ.append(gate("PHASE", qubits[m], qubits[i], param=math.pi / (1 << (i - m))))
    for i in range(n // 2):
        circ.append(gate("SWAP", qubits[i], qubits[n - 1 - i]))
    return circ


def qpe(u, n_c: int, data_qubits: Sequence[int], clock_qubits: Sequence[int] | None = None,
        n_qubits: int | None = None, power: Callable[[int], np.ndarray] | None = None) -> Circuit:
    """Phase estimation of ``u`` on ``data_qubits`` into an ``n_c``-qubit clock.

    Each controlled ``U^(2^j)`` is a single dense gate; ``power(p)`` may supply
    an exact ``U^p`` (defaults to repeated squaring of ``u``).
    """
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("qpe requires a unitary")
    data_qubits = list(data_qubits)
    if clock_qubits is None:
        start = max(data_qubits) + 1
        clock_qubits = list(range(start, start + n_c))
    clock_qubits = list(clock_qubits)
    if len(clock_qubits) != n_c:
        raise ValueError("clock register size does not match n_c")
    width = n_qubits if n_qubits is not None else max(data_qubits + clock_qubits) + 1
    circ = Circuit(width)
    for q in clock_qubits:
        circ.append(gate("H", q))
    for j, q in enumerate(clock_qubits):
        p = 1 << j
        up = power(p) if power is not None else np.linalg.matrix_power(u, p)
        circ.append(unitary_gate(up, data_qubits, (q,), base=u if p > 1 else None, power=p))
    inv = qft(clock_qubits, width).inverse()
    circ.compose(inv)
    return circ


def eigen_inversion(n_c: int, t: float, c_const: float, signed: bool,
                    clock_qubits: Sequence[int] | None = None, ancilla: int | None = None,
                    n_qubits: int | None = None) -> Circuit:
    """Uniformly controlled RY on the ancilla with angle ``2 arcsin(C / lambda(k))``."""
    lam = clock_eigenvalues(n_c, t, signed)
    ratio = np.zeros_like(lam)
    nz = lam != 0
    ratio[nz] = c_const / lam[nz]
    if np.any(np.abs(ratio) > 1 + 1e-12):
        worst = float(np.min(np.abs(lam[nz])))
        raise ValueError(f"c_const={c_const:.6g} exceeds smallest representable |lambda|={worst:.6g}")
    angles = 2 * np.arcsin(np.clip(ratio, -1, 1))
    if clock_qubits is None:
        clock_qubits = list(range(n_c))
    if ancilla is None:
        ancilla = max(clock_qubits) + 1
    circ = Circuit(n_qubits if n_qubits is not None else ancilla + 1)
    circ.extend(synthesis.ucr("Y", angles, list(clock_qubits), ancilla))
    return circ


def layout(n_d: int, n_c: int) -> tuple[list[int], list[int], int]:
    data = list(range(n_d))
    clock = list(range(n_d, n_d + n_c))
    return data, clock, n_d + n_c


def build(system: LinearSystem, config: HHLConfig) -> Circuit:
    """Full HHL circuit: state preparation, QPE, inversion, inverse QPE."""
    if not linalg.is_hermitian(system.a):
        raise ValueError("HHL needs a Hermitian matrix; prepare the system first")
    n_d = system.n_qubits
    if system.dim != 1 << n_d:
        raise ValueError("system dimension must be a power of two")
    data, clock, anc = layout(n_d, config.n_c)
    width = anc + 1
    circ = Circuit(width)
    circ.compose(synthesis.state_prep(system.b))
    u = linalg.unitary_exp(system.a, config.t)
    estimate = qpe(u, config.n_c, data, clock, width,
                   power=lambda p: linalg.unitary_exp(system.a, p * config.t))
    circ.compose(estimate)
    circ.compose(eigen_inversion(config.n_c, config.t, config.c_const, config.signed, clock, anc, width))
    circ.compose(estimate.inverse())
    return circ


@dataclass
class HHLSolution:
    state_solution: np.ndarray
    success_probability: float
    norm_estimate: float
    recovered_vector: np.ndarray
    state_error: float
    vector_error: float
    clock_residual: float
    config: HHLConfig
    n_d: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_d": self.n_d,
            "n_c": self.config.n_c,
            "t": self.config.t,
            "c_const": self.config.c_const,
            "signed": self.config.signed,
            "success_probability": self.success_probability,
            "norm_estimate": self.norm_estimate,
            "state_error": self.state_error,
            "vector_error": self.vector_error,
            "clock_residual": self.clock_residual,
            "recovered_vector": [[float(z.real), float(z.imag)] for z in self.recovered_vector],
        }


class InversionFailed(ZeroProbabilityError):
    pass


def extract(state: QuantumState, n_d: int, n_c: int) -> tuple[np.ndarray, float, float]:
    """Split the final state into (data slice at ancilla=1/clock=0, Pr(ancilla=1), clock residual)."""
    amps = state.amplitudes.reshape(2, 1 << n_c, 1 << n_d)  # [ancilla, clock, data]
    branch = amps[1]
    p_success = float(np.sum(np.abs(branch) ** 2))
    data = branch[0]
    residual = p_success - float(np.sum(np.abs(data) ** 2))
    return data, p_success, max(residual, 0.0)


def solve(system: LinearSystem, config: HHLConfig, circuit: Circuit | None = None) -> HHLSolution:
    circ = circuit if circuit is not None else build(system, config)
    n_d = system.n_qubits
    state = run(circ)
    data, p_success, residual = extract(state, n_d, config.n_c)
    slice_norm = float(np.linalg.norm(data))
    if p_success < 1e-12 or slice_norm < 1e-12:
        raise InversionFailed(
            f"success probability {p_success:.3e}: inversion constant too small or b orthogonal to solution space")
    x_state = data / slice_norm
    norm_estimate = math.sqrt(p_success) / config.c_const
    x_exact = linalg.classical_solve(system)
    x_exact_state = x_exact / np.linalg.norm(x_exact)
    recovered = system.restore(norm_estimate * x_state)
    reference = system.restore(x_exact)
    return HHLSolution(
        state_solution=x_state,
        success_probability=p_success,
        norm_estimate=norm_estimate,
        recovered_vector=recovered,
        state_error=float(np.linalg.norm(x_exact_state - x_state)),
        vector_error=float(np.linalg.norm(reference - recovered)),
        clock_residual=residual,
        config=config,
        n_d=n_d,
    )


class HHLSolver:
    """Callable linear-solver backend that routes each system through HHL.

    ``n_c`` (and optionally ``t``/``c_const``) is fixed; unset values are
    derived per system from its spectrum.
    """

    def __init__(self, n_c: int | None = None, t: float | None = None, c_const: float | None = None):
        self.n_c, self.t, self.c_const = n_c, t, c_const
        self.last: HHLSolution | None = None

    def __call__(self, system: LinearSystem) -> np.ndarray:
        config = HHLConfig.for_system(system, self.n_c, self.t, self.c_const)
        self.last = solve(system, config)
        return self.last.recovered_vector


def classical_solver(system: LinearSystem) -> np.ndarray:
    return system.restore(linalg.classical_solve(system))
