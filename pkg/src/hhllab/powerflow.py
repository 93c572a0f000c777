"""AC power flow in polar coordinates with a pluggable Newton-Raphson linear solver."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable

import numpy as np

from . import linalg
from .linalg import LinearSystem, SingularMatrixError

SLACK, PV, PQ = "slack", "PV", "PQ"
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    p_spec: float = 0.0
    q_spec: float = 0.0
    v_mag: float = 1.0
    theta: float = 0.0


@dataclass(frozen=True, eq=False)
class PowerFlowCase:
    buses: tuple[Bus, ...]
    y_bus: np.ndarray
    tolerance: float = 1e-8

    def __post_init__(self):
        kinds = [b.kind for b in self.buses]
        if kinds.count(SLACK) != 1:
            raise ValueError(f"expected exactly one slack bus, found {kinds.count(SLACK)}")
        bad = set(kinds) - {SLACK, PV, PQ}
        if bad:
            raise ValueError(f"unknown bus kinds {sorted(bad)}")
        if self.y_bus.shape != (len(self.buses), len(self.buses)):
            raise ValueError("admittance matrix does not match bus count")

    @property
    def pvpq(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.kind != SLACK], dtype=int)

    @property
    def pq(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.kind == PQ], dtype=int)

    @property
    def n_unknowns(self) -> int:
        return len(self.pvpq) + len(self.pq)

    @property
    def v_mag(self) -> np.ndarray:
        return np.array([b.v_mag for b in self.buses])

    @property
    def theta(self) -> np.ndarray:
        return np.array([b.theta for b in self.buses])

    @property
    def p_spec(self) -> np.ndarray:
        return np.array([b.p_spec for b in self.buses])

    @property
    def q_spec(self) -> np.ndarray:
        return np.array([b.q_spec for b in self.buses])

    def with_voltages(self, v_mag, theta) -> PowerFlowCase:
        buses = tuple(replace(b, v_mag=float(v), theta=float(t)) for b, v, t in zip(self.buses, v_mag, theta))
        return replace(self, buses=buses)


def admittance(n_bus: int, branches, index: dict[int, int]) -> np.ndarray:
    """Bus admittance from pi-model branches ``{from, to, r, x, b}`` (b = total charging)."""
    y = np.zeros((n_bus, n_bus), dtype=complex)
    for br in branches:
        f, t = index[int(br["from"])], index[int(br["to"])]
        ys = 1 / complex(br["r"], br["x"])
        half = 0.5j * br.get("b", 0.0)
        y[f, f] += ys + half
        y[t, t] += ys + half
        y[f, t] -= ys
        y[t, f] -= ys
    return y


def case_from_dict(data: dict) -> PowerFlowCase:
    buses = tuple(
        Bus(int(b["id"]), b["kind"], float(b.get("P_spec", 0.0)), float(b.get("Q_spec", 0.0)),
            float(b.get("v_mag", 1.0)), float(b.get("theta", 0.0)))
        for b in data["buses"]
    )
    index = {b.id: i for i, b in enumerate(buses)}
    if "y_bus" in data:
        y = np.array([[complex(re, im) for re, im in row] for row in data["y_bus"]], dtype=complex)
    else:
        y = admittance(len(buses), data["branches"], index)
    return PowerFlowCase(buses, y, float(data.get("tolerance", 1e-8)))


def load_case(path) -> PowerFlowCase:
    with open(path) as fh:
        return case_from_dict(json.load(fh))


def bundled_case() -> PowerFlowCase:
    """Four buses, two generators (slack + one PV), five unknowns."""
    text = resources.files("hhllab.data").joinpath("case4.json").read_text()
    return case_from_dict(json.loads(text))


# --- power equations --------------------------------------------------------

def power_injections(case: PowerFlowCase, v_mag=None, theta=None) -> tuple[np.ndarray, np.ndarray]:
    """``S_k = V_k conj(sum_j Y_kj V_j)``; returns ``(P, Q)``."""
    vm = case.v_mag if v_mag is None else np.asarray(v_mag, dtype=float)
    va = case.theta if theta is None else np.asarray(theta, dtype=float)
    v = vm * np.exp(1j * va)
    s = v * np.conj(case.y_bus @ v)
    return s.real, s.imag


def power_injections_trig(case: PowerFlowCase, v_mag=None, theta=None) -> tuple[np.ndarray, np.ndarray]:
    """Explicit double sum with ``G = Re(Y)``, ``B = Im(Y)``."""
    vm = case.v_mag if v_mag is None else np.asarray(v_mag, dtype=float)
    va = case.theta if theta is None else np.asarray(theta, dtype=float)
    g, b = case.y_bus.real, case.y_bus.imag
    n = len(vm)
    p, q = np.zeros(n), np.zeros(n)
    for k in range(n):
        for j in range(n):
            d = va[k] - va[j]
            vv = vm[k] * vm[j]
            p[k] += vv * (g[k, j] * np.cos(d) + b[k, j] * np.sin(d))
            q[k] += vv * (g[k, j] * np.sin(d) - b[k, j] * np.cos(d))
    return p, q


def mismatch(case: PowerFlowCase, v_mag=None, theta=None) -> np.ndarray:
    """``[P_calc - P_spec]`` over PV+PQ buses stacked on ``[Q_calc - Q_spec]`` over PQ buses."""
    p, q = power_injections(case, v_mag, theta)
    return np.concatenate([(p - case.p_spec)[case.pvpq], (q - case.q_spec)[case.pq]])


def jacobian_matrix(case: PowerFlowCase, v_mag=None, theta=None) -> np.ndarray:
    """Analytic partials of the mismatch w.r.t. ``[theta(PV+PQ); |V|(PQ)]``."""
    vm = case.v_mag if v_mag is None else np.asarray(v_mag, dtype=float)
    va = case.theta if theta is None else np.asarray(theta, dtype=float)
    g, b = case.y_bus.real, case.y_bus.imag
    p, q = power_injections(case, vm, va)
    d = va[:, None] - va[None, :]
    cos, sin = np.cos(d), np.sin(d)
    vv = vm[:, None] * vm[None, :]

    dp_dth = vv * (g * sin - b * cos)
    dq_dth = -vv * (g * cos + b * sin)
    dp_dv = vm[:, None] * (g * cos + b * sin)
    dq_dv = vm[:, None] * (g * sin - b * cos)
    diag = np.arange(len(vm))
    dp_dth[diag, diag] = -q - b.diagonal() * vm ** 2
    dq_dth[diag, diag] = p - g.diagonal() * vm ** 2
    dp_dv[diag, diag] = p / vm + g.diagonal() * vm
    dq_dv[diag, diag] = q / vm - b.diagonal() * vm

    pvpq, pq = case.pvpq, case.pq
    return np.block([
        [dp_dth[np.ix_(pvpq, pvpq)], dp_dv[np.ix_(pvpq, pq)]],
        [dq_dth[np.ix_(pq, pvpq)], dq_dv[np.ix_(pq, pq)]],
    ])


def padding_fill(j: np.ndarray) -> float:
    """Diagonal value for padded coordinates: mean |J_kk|, which sits inside J's singular range."""
    return float(np.mean(np.abs(np.diag(j))))


def jacobian(case: PowerFlowCase, v_mag=None, theta=None) -> LinearSystem:
    """Newton system ``J dx = -mismatch``, padded and Hermitized for HHL."""
    j = jacobian_matrix(case, v_mag, theta)
    rhs = -mismatch(case, v_mag, theta)
    if np.linalg.matrix_rank(j) < j.shape[0]:
        raise SingularMatrixError("power-flow Jacobian is singular")
    return linalg.prepare(j, rhs, fill=padding_fill(j))


# --- Newton-Raphson ---------------------------------------------------------------

@dataclass
class NRRecord:
    iteration: int
    mismatch_inf_norm: float
    state_error: float = float("nan")
    vector_error: float = float("nan")
    linear_system_condition: float = float("nan")


@dataclass
class NRTrace:
    records: list[NRRecord] = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    v_mag: np.ndarray | None = None
    theta: np.ndarray | None = None

    CSV_COLUMNS = ("iteration", "mismatch_inf_norm", "state_error", "vector_error", "linear_system_condition")

    def rows(self) -> list[tuple]:
        return [tuple(getattr(r, c) for c in self.CSV_COLUMNS) for r in self.records]


class PowerFlowDiverged(RuntimeError):
    def __init__(self, message: str, trace: NRTrace):
        super().__init__(message)
        self.trace = trace


def nr_solve(case: PowerFlowCase, solver: Callable[[LinearSystem], np.ndarray], max_iter: int = 50) -> NRTrace:
    """Full-step Newton-Raphson; ``solver`` maps a prepared system to the update in original coordinates.

    Stops when ``||[dP; dQ]||_inf < case.tolerance``.  A solver exposing a
    ``last`` attribute with ``state_error``/``vector_error`` (see
    :class:`hhllab.hhl.HHLSolver`) has those diagnostics recorded.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    vm, va = case.v_mag.copy(), case.theta.copy()
    pvpq, pq = case.pvpq, case.pq
    trace = NRTrace()
    f = mismatch(case, vm, va)
    trace.records.append(NRRecord(0, float(np.max(np.abs(f)))))
    for it in range(1, max_iter + 1):
        if trace.records[-1].mismatch_inf_norm < case.tolerance:
            trace.converged = True
            break
        try:
            system = jacobian(case, vm, va)
        except SingularMatrixError as exc:
            raise PowerFlowDiverged(f"iteration {it}: {exc}", trace) from exc
        cond = linalg.metrics(system.a)["condition_number"]
        dx = np.real(solver(system))
        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        f = mismatch(case, vm, va)
        rec = NRRecord(it, float(np.max(np.abs(f))), linear_system_condition=cond)
        last = getattr(solver, "last", None)
        if last is not None:
            rec.state_error, rec.vector_error = last.state_error, last.vector_error
        trace.records.append(rec)
        trace.iterations_used = it
        if not np.isfinite(rec.mismatch_inf_norm) or rec.mismatch_inf_norm > DIVERGENCE_LIMIT:
            trace.v_mag, trace.theta = vm, va
            raise PowerFlowDiverged(f"iteration {it}: mismatch {rec.mismatch_inf_norm:.3e}", trace)
    else:
        trace.converged = trace.records[-1].mismatch_inf_norm < case.tolerance
    trace.v_mag, trace.theta = vm, va
    return trace
