"""Gates, circuits and an exact dense statevector simulator.

Qubit 0 is the least significant bit of a basis index.  A gate's matrix acts on
its ``targets`` with ``targets[0]`` as the least significant local bit, and is
applied only on the subspace where every control qubit is ``|1>``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNITARY_ATOL = 1e-10

_S2 = 1 / np.sqrt(2)

FIXED_GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "TDG": np.array([[1, 0], [0, np.exp(-1j * np.pi / 4)]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
# labels whose matrix is X / Z acting on the target of a controlled gate
_CONTROLLED_ALIASES = {"CX": "X", "CZ": "Z", "CCX": "X", "CCZ": "Z"}
_INVERSE_LABEL = {"S": "SDG", "SDG": "S", "T": "TDG", "TDG": "T"}
ROTATIONS = ("RX", "RY", "RZ", "PHASE")


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def phase(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


_ROTATION_MATRIX = {"RX": rx, "RY": ry, "RZ": rz, "PHASE": phase}


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class Gate:
    """A unitary on ``targets``, optionally controlled on ``controls``.

    ``base``/``power`` mark a gate whose matrix is ``base ** power``; lowering
    passes expand it into ``power`` copies of the lowered ``base``.
    """

    label: str
    matrix: np.ndarray
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    base: np.ndarray | None = None
    power: int = 1

    def __post_init__(self):
        k = len(self.targets)
        if k == 0:
            raise ValueError(f"{self.label}: gate needs at least one target")
        if len(set(self.targets) | set(self.controls)) != k + len(self.controls):
            raise ValueError(f"{self.label}: targets {self.targets} and controls {self.controls} overlap")
        if self.matrix.shape != (1 << k, 1 << k):
            raise ValueError(f"{self.label}: matrix shape {self.matrix.shape} does not fit {k} target(s)")
        if not is_unitary(self.matrix):
            raise ValueError(f"{self.label}: matrix is not unitary")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def inverse(self) -> Gate:
        label = _INVERSE_LABEL.get(self.label, self.label)
        base = None if self.base is None else self.base.conj().T
        return Gate(label, self.matrix.conj().T, self.targets, self.controls,
                    tuple(-p for p in self.params), base, self.power)

    def remap(self, mapping: Sequence[int]) -> Gate:
        return Gate(self.label, self.matrix, tuple(mapping[q] for q in self.targets),
                    tuple(mapping[q] for q in self.controls), self.params, self.base, self.power)

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return bool(np.all(np.abs(m - np.diag(np.diag(m))) <= 1e-12))


def gate(label: str, *qubits: int, param: float | None = None) -> Gate:
    """Build a named gate.  For controlled kinds the controls come first."""
    label = label.upper()
    if label in ROTATIONS:
        if param is None:
            raise ValueError(f"{label} requires an angle")
        *ctrl, tgt = qubits
        return Gate(label, _ROTATION_MATRIX[label](param), (tgt,), tuple(ctrl), (float(param),))
    if label in _CONTROLLED_ALIASES:
        *ctrl, tgt = qubits
        return Gate(label, FIXED_GATES[_CONTROLLED_ALIASES[label]], (tgt,), tuple(ctrl))
    if label == "SWAP":
        a, b = qubits
        return Gate("SWAP", FIXED_GATES["SWAP"], (a, b))
    if label in FIXED_GATES:
        *ctrl, tgt = qubits
        return Gate(label, FIXED_GATES[label], (tgt,), tuple(ctrl))
    raise ValueError(f"unknown gate label {label!r}")


def unitary_gate(matrix, targets: Iterable[int], controls: Iterable[int] = (),
                 base: np.ndarray | None = None, power: int = 1) -> Gate:
    return Gate("UNITARY", np.asarray(matrix, dtype=complex), tuple(targets), tuple(controls), (), base, power)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    global_phase: float = 0.0

    def append(self, g: Gate) -> Circuit:
        for q in g.qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"{g.label} touches qubit {q} outside 0..{self.n_qubits - 1}")
        self.gates.append(g)
        return self

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        for g in gates:
            self.append(g)
        return self

    def compose(self, other: Circuit) -> Circuit:
        if other.n_qubits > self.n_qubits:
            raise ValueError("cannot compose a wider circuit into a narrower one")
        self.extend(other.gates)
        self.global_phase += other.global_phase
        return self

    def inverse(self) -> Circuit:
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)], -self.global_phase)

    def copy(self) -> Circuit:
        return Circuit(self.n_qubits, list(self.gates), self.global_phase)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> QuantumState:
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_vector(cls, vec) -> QuantumState:
        v = np.asarray(vec, dtype=complex).reshape(-1)
        n = int(np.log2(v.size))
        if v.size != 1 << n:
            raise ValueError(f"state length {v.size} is not a power of two")
        if abs(np.linalg.norm(v) - 1) > 1e-9:
            raise ValueError(f"state is not normalised (norm {np.linalg.norm(v):.12f})")
        return cls(n, v.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def apply_gate(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    """Apply ``g`` to a flat amplitude vector of ``n`` qubits, returning a new vector."""
    c, k = len(g.controls), len(g.targets)
    # tensor axis of qubit q is n-1-q; controls first, then targets MSB-first
    order = [n - 1 - q for q in g.controls] + [n - 1 - q for q in reversed(g.targets)]
    rest = [ax for ax in range(n) if ax not in order]
    perm = order + rest
    t = psi.reshape((2,) * n).transpose(perm).reshape(1 << c, 1 << k, -1).copy()
    t[-1] = g.matrix @ t[-1]
    out = t.reshape((2,) * n).transpose(np.argsort(perm))
    return out.reshape(-1)


def run(circuit: Circuit, initial: QuantumState | None = None) -> QuantumState:
    n = circuit.n_qubits
    if initial is None:
        initial = QuantumState.zero(n)
    if initial.n_qubits != n:
        raise ValueError(f"initial state has {initial.n_qubits} qubits, circuit has {n}")
    psi = initial.amplitudes.astype(complex, copy=True)
    for g in circuit.gates:
        psi = apply_gate(psi, g, n)
    if circuit.global_phase:
        psi *= np.exp(1j * circuit.global_phase)
    return QuantumState(n, psi)


class ZeroProbabilityError(ValueError):
    pass


def postselect(state: QuantumState, qubit: int, outcome: int) -> tuple[QuantumState, float]:
    """Project ``qubit`` onto ``outcome`` and renormalise."""
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    idx = np.arange(state.amplitudes.size)
    keep = ((idx >> qubit) & 1) == outcome
    amps = np.where(keep, state.amplitudes, 0)
    p = float(np.sum(np.abs(amps) ** 2))
    if p < 1e-12:
        raise ZeroProbabilityError(f"outcome {outcome} on qubit {qubit} has probability {p:.3e}")
    return QuantumState(state.n_qubits, amps / np.sqrt(p)), p


def fidelity(a: QuantumState | np.ndarray, b: QuantumState | np.ndarray) -> float:
    """``|<a|b>|`` for normalised states; insensitive to global phase."""
    va = a.amplitudes if isinstance(a, QuantumState) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, QuantumState) else np.asarray(b)
    return float(abs(np.vdot(va, vb)))


def stats(circuit: Circuit) -> dict:
    """Depth (ASAP layering), gate totals and per-label counts."""
    level = [0] * circuit.n_qubits
    by_label: Counter[str] = Counter()
    two_qubit = 0
    depth = 0
    for g in circuit.gates:
        qs = g.qubits
        d = 1 + max(level[q] for q in qs)
        for q in qs:
            level[q] = d
        depth = max(depth, d)
        by_label[g.label] += 1
        if len(qs) == 2:
            two_qubit += 1
    return {
        "depth": depth,
        "total_gates": len(circuit.gates),
        "two_qubit_gates": two_qubit,
        "by_label": dict(sorted(by_label.items())),
    }


# --- serialisation -------------------------------------------------------

def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def circuit_to_dict(circuit: Circuit) -> dict:
    gates = []
    for g in circuit.gates:
        entry: dict = {"label": g.label, "targets": list(g.targets), "controls": list(g.controls)}
        if g.label == "UNITARY":
            if g.base is not None and g.power > 1:
                entry["base"] = _encode_matrix(g.base)
                entry["power"] = g.power
            else:
                entry["matrix"] = _encode_matrix(g.matrix)
        elif g.params:
            entry["params"] = list(g.params)
        gates.append(entry)
    return {"n_qubits": circuit.n_qubits, "global_phase": circuit.global_phase, "gates": gates}


def circuit_from_dict(data: dict) -> Circuit:
    circ = Circuit(int(data["n_qubits"]), global_phase=float(data.get("global_phase", 0.0)))
    for i, entry in enumerate(data["gates"]):
        label = entry["label"].upper()
        targets = [int(q) for q in entry["targets"]]
        controls = [int(q) for q in entry.get("controls", [])]
        try:
            if label == "UNITARY":
                if "base" in entry:
                    base = _decode_matrix(entry["base"])
                    power = int(entry["power"])
                    g = unitary_gate(np.linalg.matrix_power(base, power), targets, controls, base, power)
                else:
                    g = unitary_gate(_decode_matrix(entry["matrix"]), targets, controls)
            elif label == "SWAP":
                g = gate("SWAP", *targets)
                if controls:
                    g = Gate("SWAP", g.matrix, g.targets, tuple(controls))
            else:
                params = entry.get("params") or [None]
                g = gate(label, *controls, *targets, param=params[0])
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"gate {i} ({label}): {exc}") from exc
        circ.append(g)
    return circ


def dump_circuit(circuit: Circuit, path) -> None:
    with open(path, "w") as fh:
        json.dump(circuit_to_dict(circuit), fh, indent=1)


def load_circuit(path) -> Circuit:
    with open(path) as fh:
        return circuit_from_dict(json.load(fh))
