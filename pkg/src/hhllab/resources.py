"""Surface-code resource accounting for lowered circuits.

Counts logical operations, converts them into T states, logical cycles and
runtime, and sizes T factories and physical-qubit footprints.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuit import Circuit, stats

ANGLE_ATOL = 1e-12
T_STATES_PER_T = 1
T_STATES_PER_CCZ = 4
T_STATES_PER_ROTATION = 18


@dataclass(frozen=True)
class QubitParams:
    name: str
    t_meas: float  # seconds
    t_1q: float
    t_2q: float
    t_tgate: float
    e_meas: float
    e_1q: float
    e_2q: float
    e_tgate: float

    def __post_init__(self):
        for k in ("t_meas", "t_1q", "t_2q", "t_tgate"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be positive")
        for k in ("e_meas", "e_1q", "e_2q", "e_tgate"):
            if not 0 < getattr(self, k) < 1:
                raise ValueError(f"{k} must lie in (0, 1)")


PRESETS = {
    "ns-1e-4": QubitParams("ns-1e-4", 100e-9, 50e-9, 50e-9, 50e-9, 1e-4, 1e-4, 1e-4, 1e-4),
    "us-1e-4": QubitParams("us-1e-4", 100e-6, 100e-6, 100e-6, 100e-6, 1e-4, 1e-4, 1e-4, 1e-6),
}


def qubit_preset(name: str) -> QubitParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown qubit preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class QECSpec:
    """Surface code.  One logical cycle lasts ``(c_2q t_2q + c_meas t_meas) * distance``."""

    distance: int = 7
    phys_per_logical: int = 98
    logical_error_rate: float = 3e-10
    threshold: float = 0.01
    cycle_2q: float = 4.0
    cycle_meas: float = 2.0

    def cycle_time(self, qp: QubitParams) -> float:
        return (self.cycle_2q * qp.t_2q + self.cycle_meas * qp.t_meas) * self.distance


@dataclass(frozen=True)
class TFactorySpec:
    """Distillation unit.  ``duration_cycles`` is measured in logical cycles."""

    duration_cycles: float = 6.0
    phys_qubits: int = 3000
    states_per_batch: int = 1
    output_error_coeff: float = 35.0

    def __post_init__(self):
        if self.duration_cycles <= 0 or self.phys_qubits <= 0 or self.states_per_batch <= 0:
            raise ValueError("factory parameters must be positive")

    def duration(self, qp: QubitParams, qec: QECSpec) -> float:
        return self.duration_cycles * qec.cycle_time(qp)

    def output_error(self, qp: QubitParams) -> float:
        return self.output_error_coeff * qp.e_tgate ** 3


@dataclass(frozen=True)
class ErrorBudget:
    total: float

    def __post_init__(self):
        if not 0 < self.total < 1:
            raise ValueError("error budget must lie in (0, 1)")

    @property
    def logical_part(self) -> float:
        return self.total / 3

    @property
    def distill_part(self) -> float:
        return self.total / 3

    @property
    def synthesis_part(self) -> float:
        return self.total / 3


@dataclass
class LogicalCounts:
    n_alg: int
    t_gates: int = 0
    ccz_ccix: int = 0
    rotations: int = 0
    clifford: int = 0
    logical_depth: int = 0


def specs_from_config(cfg: dict) -> tuple[QECSpec, TFactorySpec, float]:
    """``(qec, factory, rotation_cycles)`` from ``{"qec": {...}, "factory": {...}, "rotation_cycles": x}``."""
    try:
        qec = QECSpec(**cfg.get("qec", {}))
        factory = TFactorySpec(**cfg.get("factory", {}))
    except TypeError as exc:
        raise ValueError(f"bad estimator configuration: {exc}") from None
    return qec, factory, float(cfg.get("rotation_cycles", 1.0))


class NotDecomposedError(ValueError):
    pass


def _angle_class(theta: float) -> str:
    """'clifford' for multiples of pi/2, 't' for odd multiples of pi/4, else 'rotation'."""
    q = theta / (np.pi / 4)
    k = round(q)
    if abs(q - k) * (np.pi / 4) > ANGLE_ATOL:
        return "rotation"
    return "clifford" if k % 2 == 0 else "t"


_CLIFFORD_LABELS = {"H", "X", "Y", "Z", "S", "SDG", "CX", "CZ", "SWAP", "I"}


def logical_counts(circuit: Circuit) -> LogicalCounts:
    counts = LogicalCounts(n_alg=circuit.n_qubits, logical_depth=stats(circuit)["depth"])
    for g in circuit.gates:
        label = g.label
        if label == "UNITARY":
            raise NotDecomposedError("circuit contains raw UNITARY gates; run decompose() first")
        if label in ("T", "TDG"):
            counts.t_gates += 1
        elif label in ("CCZ", "CCX") or (label in ("X", "Z") and len(g.controls) == 2):
            counts.ccz_ccix += 1
        elif label in ("RX", "RY", "RZ", "PHASE"):
            if g.controls:
                raise NotDecomposedError(f"controlled {label} must be decomposed first")
            kind = _angle_class(g.params[0])
            if kind == "rotation":
                counts.rotations += 1
            elif kind == "t":
                counts.t_gates += 1
            else:
                counts.clifford += 1
        elif label in _CLIFFORD_LABELS and len(g.controls) <= 1:
            counts.clifford += 1
        else:
            raise NotDecomposedError(f"gate {label} with {len(g.controls)} controls is not a logical primitive")
    return counts


def t_state_count(counts: LogicalCounts) -> int:
    return (T_STATES_PER_T * counts.t_gates + T_STATES_PER_CCZ * counts.ccz_ccix
            + T_STATES_PER_ROTATION * counts.rotations)


def layout(n_alg: int) -> int:
    """Logical qubits after 2-D nearest-neighbour layout: ``2n + ceil(sqrt(8n)) + 1``."""
    if n_alg < 1:
        raise ValueError("n_alg must be >= 1")
    r = math.isqrt(8 * n_alg)
    return 2 * n_alg + (r if r * r == 8 * n_alg else r + 1) + 1


def t_factory_count(t_states: int, factory_duration: float, states_per_batch: int, runtime: float) -> int:
    if t_states == 0:
        return 0
    if runtime <= 0:
        raise ValueError("runtime must be positive")
    return math.ceil(t_states * factory_duration / (states_per_batch * runtime))


@dataclass
class ResourceReport:
    n_alg: int
    n_after: int
    phys_alg: int
    phys_factories: int
    phys_total: int
    t_states: int
    t_factories: int
    logical_cycles: int
    runtime: float
    min_logical_error_rate: float
    min_tstate_error_rate: float | None
    logical_error_ok: bool
    tstate_error_ok: bool | None
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(circuit_or_counts, qubit_params: QubitParams, qec: QECSpec | None = None,
             factory: TFactorySpec | None = None, budget: ErrorBudget | float = 0.01,
             rotation_cycles: float = 1.0) -> ResourceReport:
    """Resource report for a lowered circuit (or precomputed :class:`LogicalCounts`).

    Logical cycles are the logical depth plus ``rotation_cycles`` per
    arbitrary-angle rotation.
    """
    qec = qec or QECSpec()
    factory = factory or TFactorySpec()
    if not isinstance(budget, ErrorBudget):
        budget = ErrorBudget(float(budget))
    counts = circuit_or_counts if isinstance(circuit_or_counts, LogicalCounts) else logical_counts(circuit_or_counts)
    n_after = layout(counts.n_alg)
    t_states = t_state_count(counts)
    cycles = int(counts.logical_depth + math.ceil(rotation_cycles * counts.rotations))
    runtime = cycles * qec.cycle_time(qubit_params)
    if runtime <= 0:
        raise ValueError("circuit has zero runtime")
    n_fact = t_factory_count(t_states, factory.duration(qubit_params, qec), factory.states_per_batch, runtime)
    phys_alg = n_after * qec.phys_per_logical
    phys_fact = n_fact * factory.phys_qubits
    min_logical = budget.logical_part / (n_after * cycles)
    min_t = budget.distill_part / t_states if t_states else None
    return ResourceReport(
        n_alg=counts.n_alg,
        n_after=n_after,
        phys_alg=phys_alg,
        phys_factories=phys_fact,
        phys_total=phys_alg + phys_fact,
        t_states=t_states,
        t_factories=n_fact,
        logical_cycles=cycles,
        runtime=runtime,
        min_logical_error_rate=min_logical,
        min_tstate_error_rate=min_t,
        logical_error_ok=qec.logical_error_rate <= min_logical,
        tstate_error_ok=None if min_t is None else factory.output_error(qubit_params) <= min_t,
        counts=asdict(counts),
    )


SWEEP_COLUMNS = ("n_c", "runtime_s", "logical_cycles", "t_states", "t_factories", "phys_alg",
                 "phys_factories", "phys_total", "min_logical_rate", "min_tstate_rate")


def sweep_row(n_c: int, r: ResourceReport) -> tuple:
    return (n_c, r.runtime, r.logical_cycles, r.t_states, r.t_factories, r.phys_alg,
            r.phys_factories, r.phys_total, r.min_logical_error_rate, r.min_tstate_error_rate)


def log_fit(xs, ys) -> dict | None:
    """Least-squares line through ``(x, log10 y)``; ``None`` for fewer than two points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        return None
    ly = np.log10(ys)
    slope, intercept = np.polyfit(xs, ly, 1)
    resid = ly - (slope * xs + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


@dataclass
class Sweep:
    rows: list[tuple]
    reports: dict[int, ResourceReport]
    fits: dict[str, dict | None]


def sweep_nc(system, n_c_range, qubit_params: QubitParams, qec: QECSpec | None = None,
             factory: TFactorySpec | None = None, budget: ErrorBudget | float = 0.01,
             jobs: int = 1, rotation_cycles: float = 1.0) -> Sweep:
    """Build, lower and estimate one HHL circuit per clock size."""
    n_cs = sorted(int(n) for n in n_c_range)
    if not n_cs:
        raise ValueError("empty n_c range")
    jobs_in = [(system, n) for n in n_cs]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_counts = list(pool.map(_counts_job, jobs_in))
    else:
        all_counts = [_counts_job(a) for a in jobs_in]
    reports = {n: estimate(c, qubit_params, qec, factory, budget, rotation_cycles)
               for n, c in zip(n_cs, all_counts)}
    rows = [sweep_row(n, reports[n]) for n in n_cs]
    fits = {
        "runtime": log_fit(n_cs, [reports[n].runtime for n in n_cs]),
        "logical_cycles": log_fit(n_cs, [reports[n].logical_cycles for n in n_cs]),
        "t_states": log_fit(n_cs, [max(reports[n].t_states, 1) for n in n_cs]),
    }
    return Sweep(rows, reports, fits)


def _counts_job(args):
    from . import hhl
    from .transforms import decompose

    system, n_c = args
    cfg = hhl.HHLConfig.for_system(system, n_c=n_c)
    return logical_counts(decompose(hhl.build(system, cfg)))
