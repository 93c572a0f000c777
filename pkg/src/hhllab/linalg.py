"""Dense complex linear algebra used throughout the HHL pipeline.

Systems are carried as :class:`LinearSystem` values that remember how they were
reshaped (normalisation, identity padding, Hermitian doubling) so a solution of
the processed system can be mapped back to the caller's coordinates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

HERMITIAN_ATOL = 1e-12
NNZ_ATOL = 1e-14


class SingularMatrixError(ValueError):
    """Raised when a matrix is numerically singular."""


class NotHermitianError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError("matrix must have positive dimension")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.all(np.abs(a - a.conj().T) <= atol))


def _require_hermitian(a: np.ndarray) -> np.ndarray:
    a = as_matrix(a)
    if not is_hermitian(a):
        dev = float(np.max(np.abs(a - a.conj().T)))
        raise NotHermitianError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e})")
    return a


def next_pow2(n: int) -> int:
    return 1 << max(1, int(np.ceil(np.log2(max(n, 2)))))


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """A (possibly reshaped) linear system ``a @ x = b``.

    ``b`` is unit-norm; ``b_norm`` is the norm of the caller's right-hand side.
    ``solution_slice`` locates the original unknowns inside the processed
    solution vector.
    """

    a: np.ndarray
    b: np.ndarray
    original_dim: int
    hermitized: bool = False
    padded_dim: int = 0
    b_norm: float = 1.0
    solution_slice: tuple[int, int] = (0, 0)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.dim))

    def restore(self, y: np.ndarray, scale: bool = True) -> np.ndarray:
        """Map a solution of the processed system back to original coordinates."""
        y = np.asarray(y, dtype=complex)
        lo, hi = self.solution_slice
        x = y[lo:hi]
        return x * self.b_norm if scale else x.copy()


def make_system(a, b) -> LinearSystem:
    """Wrap ``a x = b`` with ``b`` normalised; no reshaping."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match matrix dim {a.shape[0]}")
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        raise ValueError("right-hand side is the zero vector")
    n = a.shape[0]
    return LinearSystem(a=a, b=b / norm, original_dim=n, padded_dim=n, b_norm=norm, solution_slice=(0, n))


def hermitize(a, b=None) -> LinearSystem:
    """Embed a non-Hermitian system in the doubled Hermitian block system.

    The block matrix is ``[[0, A], [A^H, 0]]`` with right-hand side ``[b; 0]``;
    its solution is ``[0; x]`` so the original unknowns sit in the lower half.
    Hermitian inputs are returned unchanged (apart from normalisation).
    """
    system = a if isinstance(a, LinearSystem) else make_system(a, b)
    if is_hermitian(system.a):
        return system
    n = system.dim
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, n:] = system.a
    big[n:, :n] = system.a.conj().T
    rhs = np.concatenate([system.b, np.zeros(n, dtype=complex)])
    lo, hi = system.solution_slice
    return replace(system, a=big, b=rhs, hermitized=True, padded_dim=2 * n, solution_slice=(lo + n, hi + n))


def pad_to_pow2(system: LinearSystem, fill: float = 1.0) -> LinearSystem:
    """Embed the matrix top-left in a ``2^k`` identity (scaled by ``fill``) and zero-pad ``b``."""
    n = system.dim
    m = next_pow2(n)
    if m == n:
        return system
    big = np.eye(m, dtype=complex) * fill
    big[:n, :n] = system.a
    rhs = np.zeros(m, dtype=complex)
    rhs[:n] = system.b
    return replace(system, a=big, b=rhs, padded_dim=m)


def prepare(a, b, fill: float = 1.0) -> LinearSystem:
    """Normalise, pad and (if needed) Hermitize a system for HHL consumption.

    Non-Hermitian matrices are padded to a power of two first and doubled
    afterwards, so a 5x5 system becomes 8x8 and then 16x16.
    """
    system = pad_to_pow2(make_system(a, b), fill=fill)
    if not is_hermitian(system.a):
        system = hermitize(system)
    return system


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray


def eig_hermitian(a) -> EigenDecomposition:
    a = _require_hermitian(a)
    h = (a + a.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return EigenDecomposition(values=w, vectors=v)


def unitary_exp(a, t: float) -> np.ndarray:
    """Return ``exp(i t A)`` for Hermitian ``A`` via its eigenbasis."""
    e = eig_hermitian(a)
    return (e.vectors * np.exp(1j * t * e.values)) @ e.vectors.conj().T


def sparsity(a) -> float:
    a = np.asarray(a)
    nnz = int(np.count_nonzero(np.abs(a) > NNZ_ATOL))
    return 1.0 - nnz / a.size


def metrics(a) -> dict[str, float]:
    e = eig_hermitian(a)
    mags = np.abs(e.values)
    lo, hi = float(mags.min()), float(mags.max())
    if hi == 0.0 or lo < 1e-14 * hi:
        raise SingularMatrixError(f"matrix is singular (|lambda|_min = {lo:.3e}, |lambda|_max = {hi:.3e})")
    return {
        "condition_number": hi / lo,
        "sparsity": sparsity(a),
        "eig_min_abs": lo,
        "eig_max_abs": hi,
        "has_negative": bool(np.any(e.values < 0)),
    }


def classical_solve(system: LinearSystem | np.ndarray, b=None) -> np.ndarray:
    """Solve the processed system by LU with partial pivoting.

    Accepts either a :class:`LinearSystem` (returns the processed-space solution
    for its unit-norm ``b``) or a raw ``(a, b)`` pair.
    """
    if isinstance(system, LinearSystem):
        a, rhs = system.a, system.b
    else:
        a, rhs = as_matrix(system), np.asarray(b, dtype=complex)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # singularity is raised below
            lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularMatrixError(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), rhs)
