"""Acceptance gate: one test per criterion, run at the stated tolerances.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
"""
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhllab import fuse, decompose, heat, hhl, linalg, powerflow as pf, resources as rs
from hhllab.circuit import QuantumState, fidelity, run, stats
from hhllab.hhl import HHLConfig
from oracles import circuit_unitary, exact_phase_system, random_circuit, random_state, round_half_up
from test_powerflow import finite_difference_jacobian


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def heat3():
    return heat.heat_matrix(heat.HeatSpec(3, 0.00016))


@pytest.fixture(scope="module")
def jacobian_system():
    return pf.jacobian(pf.bundled_case())


def test_c01_layout_formula():
    pairs = {9: 28, 10: 30, 11: 33, 8: 25}
    with Timer() as tm:
        got = {n: rs.layout(n) for n in pairs}
    assert got == pairs
    assert tm.elapsed < 1e-3


def test_c02_sparsity_reproduction():
    with Timer() as tm:
        got = {l: round_half_up(100 * linalg.sparsity(heat.heat_matrix(heat.HeatSpec(l, r)).a), 3)
               for l, r in ((3, 0.00016), (5, 0.00064))}
    assert got == {3: 82.813, 5: 88.281}
    assert tm.elapsed < 1.0


def test_c03_clock_qubit_rule(jacobian_system):
    for kappa in np.linspace(5.950, 5.970, 21):
        assert hhl.select_clock_qubits(4, float(kappa), True) == 6
    m = linalg.metrics(jacobian_system.a)
    assert hhl.select_clock_qubits(jacobian_system.n_qubits, m["condition_number"], m["has_negative"]) == 6


def test_c04_hhl_exact_phase_oracle():
    rng = np.random.default_rng(4)
    fixtures = [(n_d, n_c, signed) for n_d in (1, 2, 3, 4) for n_c in (2, 3, 4) for signed in (False, True)
                if not (signed and n_c == 2)]
    assert len(fixtures) >= 20
    with Timer() as tm:
        for n_d, n_c, signed in fixtures:
            s, lam, v, t = exact_phase_system(n_d, n_c, signed, rng)
            sol = hhl.solve(s, HHLConfig(n_c, t, 1.0, signed))
            assert sol.state_error <= 1e-6, (n_d, n_c, signed)
            expected = np.sum(np.abs(v.conj().T @ s.b) ** 2 / lam ** 2)  # C = 1
            assert abs(sol.success_probability - expected) <= 1e-8, (n_d, n_c, signed)
    assert tm.elapsed < 60


def test_c05_qpe_cost_doubling(heat3):
    totals = {}
    with Timer() as tm:
        for n_c in range(3, 8):
            cfg = HHLConfig.for_system(heat3, n_c=n_c)
            totals[n_c] = stats(decompose(hhl.build(heat3, cfg)))["total_gates"]
    for n_c in range(3, 7):
        ratio = totals[n_c + 1] / totals[n_c]
        assert 1.7 <= ratio <= 2.3, (n_c, ratio)
    assert tm.elapsed < 300


def test_c06_newton_raphson_convergence():
    case = pf.bundled_case()
    with Timer() as tm:
        traces = {"classical": pf.nr_solve(case, hhl.classical_solver)}
        for n_c in range(4, 8):
            traces[n_c] = pf.nr_solve(case, hhl.HHLSolver(n_c=n_c))
    ref = traces["classical"]
    for key, trace in traces.items():
        assert trace.converged, key
        assert trace.records[-1].mismatch_inf_norm < 1e-8, key
        assert np.max(np.abs(trace.v_mag - ref.v_mag)) <= 1e-6, key
        assert np.max(np.abs(trace.theta - ref.theta)) <= 1e-6, key
    assert tm.elapsed < 600


def test_c07_fusion_soundness(heat3, jacobian_system):
    rng = np.random.default_rng(7)
    with Timer() as tm:
        for _ in range(50):
            n = int(rng.integers(1, 11))
            circ = random_circuit(n, 60, rng)
            out = fuse(circ)
            psi = QuantumState.from_vector(random_state(1 << n, rng))
            assert fidelity(run(out, psi), run(circ, psi)) >= 1 - 1e-9
        for system, n_c in ((heat3, 3), (jacobian_system, 4)):
            lowered = decompose(hhl.build(system, HHLConfig.for_system(system, n_c=n_c)))
            out = fuse(lowered)
            assert fidelity(run(out), run(lowered)) >= 1 - 1e-9
            reduction = 1 - len(out) / len(lowered)
            assert reduction >= 0.30, reduction
    assert tm.elapsed < 300


def test_c08_simulator_oracle():
    rng = np.random.default_rng(8)
    circuits = [random_circuit(int(rng.integers(1, 6)), 30, rng) for _ in range(60)]
    s, *_ = exact_phase_system(1, 2, False, rng)
    circuits.append(hhl.build(s, HHLConfig(2, 2 * np.pi / 4, 1.0)))
    with Timer() as tm:
        for circ in circuits:
            u = circuit_unitary(circ)
            dim = 1 << circ.n_qubits
            for k in range(dim):
                basis = np.zeros(dim, dtype=complex)
                basis[k] = 1
                out = run(circ, QuantumState.from_vector(basis)).amplitudes
                assert np.max(np.abs(out - u[:, k])) <= 1e-10
    assert tm.elapsed < 60


def test_c09_resource_growth_trends(jacobian_system):
    with Timer() as tm:
        sweep = rs.sweep_nc(jacobian_system, range(3, 7), rs.qubit_preset("ns-1e-4"), budget=0.01)
    for key in ("runtime", "logical_cycles", "t_states"):
        fit = sweep.fits[key]
        assert fit["r2"] >= 0.98, (key, fit)
        assert 0.23 <= fit["slope"] <= 0.42, (key, fit)
    assert tm.elapsed < 300


@settings(max_examples=500, deadline=None)
@given(
    t1=st.integers(min_value=1, max_value=10**9),
    t_growth=st.floats(min_value=1.0, max_value=10.0),
    extra=st.floats(min_value=1e-6, max_value=10.0),
    runtime1=st.floats(min_value=1e-6, max_value=1e4),
    duration=st.floats(min_value=1e-7, max_value=1.0),
    batch=st.integers(min_value=1, max_value=16),
)
def test_c10_t_factory_tradeoff(t1, t_growth, extra, runtime1, duration, batch):
    t2 = max(t1, int(t1 * t_growth))
    runtime2 = runtime1 * (t2 / t1) * (1 + extra)  # runtime grows strictly faster than T states
    assert rs.t_factory_count(t2, duration, batch, runtime2) <= rs.t_factory_count(t1, duration, batch, runtime1)


def test_c11_jacobian_gradient_check():
    case = pf.bundled_case()
    with Timer() as tm:
        gap = np.max(np.abs(pf.jacobian_matrix(case) - finite_difference_jacobian(case, h=1e-7)))
    assert gap <= 1e-6
    assert tm.elapsed < 1.0
