import json

import numpy as np
import pytest

from hhllab import hhl, linalg, powerflow as pf
from hhllab.powerflow import Bus, PowerFlowCase


def two_bus(theta2=-0.1):
    y = np.array([[-10j, 10j], [10j, -10j]])
    buses = (Bus(1, "slack", v_mag=1.0, theta=0.0), Bus(2, "PQ", v_mag=1.0, theta=theta2))
    return PowerFlowCase(buses, y)


def random_case(rng, n):
    y = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.7:
                ys = 1 / complex(rng.uniform(0.01, 0.1), rng.uniform(0.05, 0.5))
                y[i, i] += ys
                y[j, j] += ys
                y[i, j] -= ys
                y[j, i] -= ys
    y += np.diag(1j * rng.uniform(0, 0.1, n))
    kinds = ["slack"] + [str(rng.choice(["PV", "PQ"])) for _ in range(n - 1)]
    buses = tuple(Bus(i, k, rng.normal(), rng.normal(), rng.uniform(0.9, 1.1), rng.uniform(-0.3, 0.3))
                  for i, k in enumerate(kinds))
    return PowerFlowCase(buses, y)


class TestCase:
    def test_bundled_shape(self):
        case = pf.bundled_case()
        assert len(case.buses) == 4
        assert case.n_unknowns == 5
        n_gen = sum(b.kind != "PQ" for b in case.buses)
        assert case.n_unknowns == 2 * (len(case.buses) - 1) - (n_gen - 1)

    def test_single_slack_required(self):
        with pytest.raises(ValueError, match="slack"):
            PowerFlowCase((Bus(1, "PQ"), Bus(2, "PQ")), np.eye(2))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            PowerFlowCase((Bus(1, "slack"), Bus(2, "XX")), np.eye(2))

    def test_y_shape(self):
        with pytest.raises(ValueError):
            PowerFlowCase((Bus(1, "slack"),), np.eye(2))

    def test_explicit_y_bus(self):
        data = {"buses": [{"id": 1, "kind": "slack"}, {"id": 2, "kind": "PQ"}],
                "y_bus": [[[0, -10], [0, 10]], [[0, 10], [0, -10]]]}
        case = pf.case_from_dict(data)
        assert np.allclose(case.y_bus, [[-10j, 10j], [10j, -10j]])

    def test_admittance_rows_sum_to_shunts(self):
        branches = [{"from": 1, "to": 2, "r": 0.01, "x": 0.1, "b": 0.02}]
        y = pf.admittance(2, branches, {1: 0, 2: 1})
        assert np.allclose(y.sum(axis=1), [0.01j, 0.01j])


class TestInjections:
    def test_flat_start_balanced(self):
        g = np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]])
        case = PowerFlowCase((Bus(1, "slack"), Bus(2, "PQ"), Bus(3, "PQ")), g.astype(complex))
        p, q = pf.power_injections(case)
        assert np.allclose(p, 0) and np.allclose(q, 0)

    def test_two_bus(self):
        p, q = pf.power_injections(two_bus())
        assert p[0] == pytest.approx(10 * np.sin(0.1))
        assert p[1] == pytest.approx(-10 * np.sin(0.1))

    def test_slack_only(self):
        case = PowerFlowCase((Bus(1, "slack", v_mag=1.05),), np.array([[0.5 - 2j]]))
        p, q = pf.power_injections(case)
        s = 1.05 * np.conj((0.5 - 2j) * 1.05)
        assert p[0] == pytest.approx(s.real) and q[0] == pytest.approx(s.imag)

    def test_trig_matches_complex(self, rng):
        for _ in range(100):
            case = random_case(rng, int(rng.integers(2, 7)))
            p1, q1 = pf.power_injections(case)
            p2, q2 = pf.power_injections_trig(case)
            assert np.allclose(p1, p2, atol=1e-10) and np.allclose(q1, q2, atol=1e-10)


def finite_difference_jacobian(case, h=1e-7):
    vm, va = case.v_mag.copy(), case.theta.copy()
    pvpq, pq = case.pvpq, case.pq
    n = len(pvpq) + len(pq)
    j = np.zeros((n, n))
    for col in range(n):
        plus_vm, plus_va, minus_vm, minus_va = vm.copy(), va.copy(), vm.copy(), va.copy()
        if col < len(pvpq):
            plus_va[pvpq[col]] += h
            minus_va[pvpq[col]] -= h
        else:
            plus_vm[pq[col - len(pvpq)]] += h
            minus_vm[pq[col - len(pvpq)]] -= h
        j[:, col] = (pf.mismatch(case, plus_vm, plus_va) - pf.mismatch(case, minus_vm, minus_va)) / (2 * h)
    return j


class TestJacobian:
    def test_matches_finite_differences_bundled(self):
        case = pf.bundled_case()
        assert np.max(np.abs(pf.jacobian_matrix(case) - finite_difference_jacobian(case))) <= 1e-6

    def test_matches_finite_differences_random(self, rng):
        for _ in range(20):
            case = random_case(rng, int(rng.integers(2, 6)))
            assert np.allclose(pf.jacobian_matrix(case), finite_difference_jacobian(case), atol=1e-5)

    def test_prepared_system(self):
        s = pf.jacobian(pf.bundled_case())
        assert s.hermitized and s.dim == 16 and s.original_dim == 5
        assert linalg.is_hermitian(s.a)

    def test_condition_number(self):
        kappa = linalg.metrics(pf.jacobian(pf.bundled_case()).a)["condition_number"]
        assert 5.5 <= kappa <= 6.5

    def test_newton_direction(self):
        case = pf.bundled_case()
        s = pf.jacobian(case)
        dx = s.restore(linalg.classical_solve(s)).real
        assert np.allclose(pf.jacobian_matrix(case) @ dx, -pf.mismatch(case))

    def test_padding_fill_inside_spectrum(self):
        j = pf.jacobian_matrix(pf.bundled_case())
        sv = np.linalg.svd(j, compute_uv=False)
        assert sv.min() <= pf.padding_fill(j) <= sv.max()


class TestNewtonRaphson:
    def test_classical_converges_quadratically(self):
        trace = pf.nr_solve(pf.bundled_case(), hhl.classical_solver)
        assert trace.converged
        norms = [r.mismatch_inf_norm for r in trace.records]
        assert norms[-1] < 1e-8
        logs = np.log10(norms)
        # locally quadratic: each log-norm roughly doubles once in the basin
        for a, b in zip(logs[1:-1], logs[2:]):
            assert b <= 1.5 * a

    def test_already_solved(self):
        case = pf.bundled_case()
        trace = pf.nr_solve(case, hhl.classical_solver)
        solved = case.with_voltages(trace.v_mag, trace.theta)
        again = pf.nr_solve(solved, hhl.classical_solver)
        assert again.converged and again.iterations_used <= 1

    def test_hhl_matches_classical(self):
        case = pf.bundled_case()
        ref = pf.nr_solve(case, hhl.classical_solver)
        solver = hhl.HHLSolver(n_c=5)
        trace = pf.nr_solve(case, solver)
        assert trace.converged
        assert np.allclose(trace.v_mag, ref.v_mag, atol=1e-6)
        assert np.allclose(trace.theta, ref.theta, atol=1e-6)
        assert all(np.isfinite(r.state_error) for r in trace.records[1:])

    def test_divergence_carries_trace(self):
        def bad_solver(system):
            return 1e4 * np.ones(system.original_dim)

        with pytest.raises(pf.PowerFlowDiverged) as info:
            pf.nr_solve(pf.bundled_case(), bad_solver)
        assert len(info.value.trace.records) >= 2

    def test_max_iter_exhausted(self):
        trace = pf.nr_solve(pf.bundled_case(), hhl.classical_solver, max_iter=1)
        assert not trace.converged and trace.iterations_used == 1

    def test_trace_rows(self):
        trace = pf.nr_solve(pf.bundled_case(), hhl.classical_solver)
        rows = trace.rows()
        assert len(rows) == len(trace.records) and len(rows[0]) == len(pf.NRTrace.CSV_COLUMNS)
        assert rows[0][0] == 0

    def test_invalid_max_iter(self):
        with pytest.raises(ValueError):
            pf.nr_solve(pf.bundled_case(), hhl.classical_solver, max_iter=0)


def test_load_case(tmp_path):
    data = {"buses": [{"id": 1, "kind": "slack"}, {"id": 2, "kind": "PQ", "P_spec": -0.5}],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 0.1}]}
    path = tmp_path / "case.json"
    path.write_text(json.dumps(data))
    case = pf.load_case(path)
    assert case.p_spec[1] == -0.5
    assert pf.nr_solve(case, hhl.classical_solver).converged
