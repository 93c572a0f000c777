import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hhllab import circuit as C
from hhllab.circuit import Circuit, QuantumState, ZeroProbabilityError, gate, run, stats, unitary_gate
from oracles import circuit_unitary, haar_unitary, random_circuit, random_state

SQ2 = 1 / np.sqrt(2)


class TestGate:
    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="not unitary"):
            unitary_gate(np.array([[1, 1], [0, 1]]), (0,))

    def test_rejects_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            gate("CX", 1, 1)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            unitary_gate(np.eye(4), (0,))

    def test_rotation_requires_angle(self):
        with pytest.raises(ValueError):
            gate("RZ", 0)

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            gate("FOO", 0)

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            Circuit(2).append(gate("H", 2))

    @pytest.mark.parametrize("label", ["H", "X", "Y", "Z", "S", "SDG", "T", "TDG"])
    def test_inverse_of_fixed(self, label):
        g = gate(label, 0)
        assert np.allclose(g.inverse().matrix @ g.matrix, np.eye(2))

    @pytest.mark.parametrize("label", ["RX", "RY", "RZ", "PHASE"])
    def test_inverse_of_rotation(self, label):
        g = gate(label, 0, param=0.37)
        inv = g.inverse()
        assert inv.params == (-0.37,)
        assert np.allclose(inv.matrix @ g.matrix, np.eye(2))

    def test_rotation_matrices(self):
        assert np.allclose(C.rz(np.pi / 2) * np.exp(1j * np.pi / 4), C.FIXED_GATES["S"])
        assert np.allclose(C.phase(np.pi / 4), C.FIXED_GATES["T"])
        assert np.allclose(C.rx(np.pi), -1j * C.FIXED_GATES["X"])
        assert np.allclose(C.ry(np.pi), -1j * C.FIXED_GATES["Y"])

    def test_diagonal_flag(self):
        assert gate("RZ", 0, param=0.3).is_diagonal
        assert gate("CZ", 0, 1).is_diagonal
        assert not gate("H", 0).is_diagonal


class TestRun:
    def test_hadamard(self):
        out = run(Circuit(1, [gate("H", 0)]))
        assert np.allclose(out.amplitudes, [SQ2, SQ2])

    def test_little_endian(self):
        out = run(Circuit(2, [gate("X", 0)]))
        assert np.allclose(out.amplitudes, [0, 1, 0, 0])

    def test_bell(self):
        init = QuantumState.from_vector([SQ2, SQ2, 0, 0])
        out = run(Circuit(2, [gate("CX", 0, 1)]), init)
        assert np.allclose(out.amplitudes, [SQ2, 0, 0, SQ2])

    def test_multi_target_order(self):
        # targets[0] is the local least significant bit
        u = np.zeros((4, 4))
        u[[1, 0, 3, 2], [0, 1, 2, 3]] = 1  # X on the local LSB
        out = run(Circuit(3, [unitary_gate(u, (2, 0))]))
        assert np.allclose(out.amplitudes, np.eye(8)[4])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            run(Circuit(2), QuantumState.zero(3))

    def test_global_phase(self):
        out = run(Circuit(1, global_phase=np.pi / 2))
        assert np.allclose(out.amplitudes, [1j, 0])

    def test_unnormalised_state_rejected(self):
        with pytest.raises(ValueError):
            QuantumState.from_vector([1, 1])

    def test_matches_kronecker_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 6))
            circ = random_circuit(n, 30, rng)
            psi = random_state(1 << n, rng)
            out = run(circ, QuantumState.from_vector(psi))
            assert np.allclose(out.amplitudes, circuit_unitary(circ) @ psi, atol=1e-10)

    @given(st.integers(1, 8), st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_norm_preserved(self, n, seed):
        rng = np.random.default_rng(seed)
        out = run(random_circuit(n, 40, rng), QuantumState.from_vector(random_state(1 << n, rng)))
        assert abs(out.norm() - 1) <= 1e-9


class TestPostselect:
    def test_plus_state(self):
        out, p = C.postselect(QuantumState.from_vector([SQ2, SQ2]), 0, 1)
        assert p == pytest.approx(0.5)
        assert np.allclose(out.amplitudes, [0, 1])

    def test_product_state(self, rng):
        psi = random_state(2, rng)
        state = QuantumState.from_vector(np.kron([0, 1], psi))
        out, p = C.postselect(state, 1, 1)
        assert p == pytest.approx(1)
        assert np.allclose(out.amplitudes, np.kron([0, 1], psi))

    def test_zero_probability(self):
        with pytest.raises(ZeroProbabilityError, match="qubit 0"):
            C.postselect(QuantumState.zero(1), 0, 1)

    def test_bad_outcome(self):
        with pytest.raises(ValueError):
            C.postselect(QuantumState.zero(1), 0, 2)


class TestStats:
    def test_empty(self):
        s = stats(Circuit(3))
        assert (s["depth"], s["total_gates"], s["two_qubit_gates"]) == (0, 0, 0)

    def test_small(self):
        s = stats(Circuit(2, [gate("H", 0), gate("H", 1), gate("CX", 0, 1)]))
        assert (s["depth"], s["total_gates"], s["two_qubit_gates"]) == (2, 3, 1)
        assert s["by_label"] == {"CX": 1, "H": 2}

    def test_depth_invariant_under_relabelling(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 7))
            circ = random_circuit(n, 30, rng)
            perm = [int(q) for q in rng.permutation(n)]
            relabelled = Circuit(n, [g.remap(perm) for g in circ.gates])
            assert stats(relabelled)["depth"] == stats(circ)["depth"]


class TestSerialisation:
    def test_round_trip(self, rng, tmp_path):
        circ = random_circuit(4, 40, rng)
        circ.global_phase = 0.25
        circ.append(unitary_gate(np.linalg.matrix_power(haar_unitary(2, rng), 1), (0,)))
        base = haar_unitary(4, rng)
        circ.append(unitary_gate(np.linalg.matrix_power(base, 4), (0, 1), (3,), base=base, power=4))
        path = tmp_path / "c.json"
        C.dump_circuit(circ, path)
        back = C.load_circuit(path)
        assert np.allclose(circuit_unitary(back), circuit_unitary(circ), atol=1e-10)
        assert back.gates[-1].power == 4

    def test_schema(self, rng):
        jsonschema = pytest.importorskip("jsonschema")
        from importlib import resources

        schema = json.loads(resources.files("hhllab.data").joinpath("schemas/circuit.schema.json").read_text())
        jsonschema.validate(C.circuit_to_dict(random_circuit(3, 20, rng)), schema)

    def test_bad_gate_reports_index(self):
        with pytest.raises(ValueError, match="gate 1"):
            C.circuit_from_dict({"n_qubits": 1, "gates": [{"label": "H", "targets": [0]},
                                                          {"label": "RZ", "targets": [0]}]})
