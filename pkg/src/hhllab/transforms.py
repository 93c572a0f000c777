"""Circuit rewriting passes: lowering to {1-qubit, CX} and gate fusion."""
from __future__ import annotations

import numpy as np

from . import synthesis
from .circuit import Circuit, Gate, gate, stats, unitary_gate

IDENTITY_ATOL = 1e-12
MAX_SYNTH_QUBITS = 12


class UndecomposableError(ValueError):
    """A gate could not be lowered (too wide for dense synthesis, or numerically failed)."""

_KEEP_1Q = {"H", "X", "Y", "Z", "S", "SDG", "T", "TDG", "RX", "RY", "RZ", "PHASE"}


def _lower(g: Gate) -> tuple[list[Gate], float]:
    """Lower one gate (ignoring ``power``) to a local gate list plus global phase."""
    nc, nt = len(g.controls), len(g.targets)
    if nc == 0 and nt == 1:
        if g.label in _KEEP_1Q:
            return [g], 0.0
        return synthesis.one_qubit(g.matrix, g.targets[0])
    if g.label in ("CX", "X") and nc == 1 and nt == 1:
        return [gate("CX", g.controls[0], g.targets[0])], 0.0
    if g.label == "SWAP" and nc == 0:
        a, b = g.targets
        return [gate("CX", a, b), gate("CX", b, a), gate("CX", a, b)], 0.0
    if nc == 1 and nt == 1:
        return synthesis.controlled_one_qubit(g.matrix, g.controls[0], g.targets[0])
    qubits = list(g.targets) + list(g.controls)
    if len(qubits) > MAX_SYNTH_QUBITS:
        raise UndecomposableError(f"{g.label} on {len(qubits)} qubits exceeds the {MAX_SYNTH_QUBITS}-qubit synthesis limit")
    try:
        return synthesis.unitary(synthesis.controlled_matrix(g.matrix, nc), qubits)
    except np.linalg.LinAlgError as exc:
        raise UndecomposableError(f"{g.label} on {qubits}: {exc}") from exc


def decompose(circuit: Circuit) -> Circuit:
    """Lower every gate to single-qubit gates and CX.

    Gates carrying ``base``/``power`` become ``power`` repetitions of the
    lowered ``base``; each distinct base is synthesised once.
    """
    out = Circuit(circuit.n_qubits, global_phase=circuit.global_phase)
    cache: dict[tuple, tuple[list[Gate], float]] = {}
    for g in circuit.gates:
        if g.base is not None and g.power > 1:
            unit = Gate(g.label, g.base, g.targets, g.controls)
            key = (g.base.tobytes(), g.targets, g.controls)
            if key not in cache:
                cache[key] = _lower(unit)
            seq, ph = cache[key]
            for _ in range(g.power):
                out.gates.extend(seq)
            out.global_phase += g.power * ph
        else:
            seq, ph = _lower(g)
            out.gates.extend(seq)
            out.global_phase += ph
    return out


def _is_identity(m: np.ndarray) -> bool:
    """Identity up to a global phase."""
    return abs(m[0, 1]) <= IDENTITY_ATOL and abs(m[1, 0]) <= IDENTITY_ATOL and abs(m[0, 0] - m[1, 1]) <= IDENTITY_ATOL


def _is_diag(m: np.ndarray) -> bool:
    return abs(m[0, 1]) <= IDENTITY_ATOL and abs(m[1, 0]) <= IDENTITY_ATOL


def _is_x_type(m: np.ndarray) -> bool:
    """``a I + b X``, i.e. commutes with X."""
    return abs(m[0, 0] - m[1, 1]) <= IDENTITY_ATOL and abs(m[0, 1] - m[1, 0]) <= IDENTITY_ATOL


def _is_cx(g: Gate) -> bool:
    return g.label in ("CX", "X") and len(g.controls) == 1 and len(g.targets) == 1


def _commutes(m: np.ndarray, g: Gate, q: int) -> bool:
    if _is_diag(m) and (g.is_diagonal or q in g.controls):
        return True
    return _is_cx(g) and q == g.targets[0] and _is_x_type(m)


def fuse(circuit: Circuit) -> Circuit:
    """Merge single-qubit runs, cancel CX pairs and slide commuting gates past CX.

    Each qubit keeps a pending accumulated 2x2 matrix.  A multi-qubit gate
    flushes the pending matrix of every qubit it touches unless the matrix
    commutes with the gate: diagonal on a control (or with a diagonal gate),
    or of X type on a CX target.  Two identical CX gates with nothing emitted
    between them on either qubit cancel.  The result equals the input up to
    global phase.
    """
    n = circuit.n_qubits
    pending: list[np.ndarray | None] = [None] * n
    source: list[Gate | None] = [None] * n
    count = [0] * n
    emitted: list[Gate | None] = []
    history: list[list[int]] = [[] for _ in range(n)]  # indices into ``emitted`` per qubit

    def emit(g: Gate) -> None:
        for q in g.qubits:
            history[q].append(len(emitted))
        emitted.append(g)

    def flush(q: int) -> None:
        m = pending[q]
        if m is not None and not _is_identity(m):
            emit(source[q] if count[q] == 1 else unitary_gate(m, (q,)))
        pending[q], source[q], count[q] = None, None, 0

    for g in circuit.gates:
        if not g.controls and len(g.targets) == 1:
            q = g.targets[0]
            pending[q] = g.matrix if pending[q] is None else g.matrix @ pending[q]
            source[q] = g
            count[q] += 1
            continue
        for q in g.qubits:
            m = pending[q]
            if m is not None and not _commutes(m, g, q):
                flush(q)
        if _is_cx(g):
            c, t = g.controls[0], g.targets[0]
            if history[c] and history[t] and history[c][-1] == history[t][-1]:
                prev = emitted[history[c][-1]]
                if _is_cx(prev) and prev.controls == g.controls and prev.targets == g.targets:
                    emitted[history[c].pop()] = None
                    history[t].pop()
                    continue
        emit(g)
    for q in range(n):
        flush(q)
    return Circuit(n, [g for g in emitted if g is not None], global_phase=circuit.global_phase)


STATS_COLUMNS = ("n_d", "n_c", "depth", "gates", "two_qubit_gates", "gates_after_fusion", "reduction_pct")


def stats_row(lowered: Circuit, n_d: int, n_c: int) -> tuple:
    """One row of circuit statistics (``STATS_COLUMNS`` order) for a lowered circuit."""
    st = stats(lowered)
    fused = len(fuse(lowered).gates)
    total = st["total_gates"]
    reduction = 100.0 * (1 - fused / total) if total else 0.0
    return (n_d, n_c, st["depth"], total, st["two_qubit_gates"], fused, reduction)
