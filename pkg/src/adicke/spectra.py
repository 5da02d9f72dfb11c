"""Eigendecomposition, Fock-cutoff convergence and ground-state properties."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from adicke.model import (
    ModelParams,
    OperatorMatrix,
    build_hamiltonian,
    enumerate_basis,
    hamiltonian_band,
    observable_matrix,
)

DEFAULT_TOL = 1e-8
DEFAULT_CEILING = 5000
GROWTH = 1.5


class EigensolverError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    """The Fock cutoff hit its ceiling before the requested levels settled."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    params: ModelParams | None
    parity: int | None
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    converged_count: int = 0
    tolerance: float = 0.0

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1:
            raise ValueError("eigenvalues must be one-dimensional")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be ascending")
        object.__setattr__(self, "eigenvalues", ev)
        if self.eigenvectors is not None and self.eigenvectors.shape[1] != len(ev):
            raise ValueError("eigenvector columns must align with eigenvalues")

    @property
    def n_max(self):
        return None if self.params is None else self.params.n_max

    def __len__(self):
        return len(self.eigenvalues)


def _band_from_dense(a: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(np.triu(a, 1))
    u = int((cols - rows).max()) if len(rows) else 0
    band = np.zeros((u + 1, a.shape[0]))
    for d in range(u + 1):
        band[u - d, d:] = np.diagonal(a, d)
    return band


def diagonalize(matrix, want_vectors: bool = False, count: int | None = None) -> SpectralData:
    """Full (or lowest ``count``) spectrum of a real symmetric matrix.

    Eigenvalue-only requests go through the symmetric band solver, which is
    much cheaper for the narrow-band Hamiltonians built here; eigenvector
    requests use the dense divide-and-conquer driver.
    """
    if isinstance(matrix, OperatorMatrix):
        a = matrix.entries
        params, parity = matrix.basis.params, matrix.basis.parity
    else:
        a = np.asarray(matrix, dtype=float)
        params, parity = None, None
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not symmetric")
    dim = a.shape[0]
    if count is not None:
        count = min(int(count), dim)
    try:
        if want_vectors:
            subset = None if count is None or count == dim else (0, count - 1)
            vals, vecs = sla.eigh(a, subset_by_index=subset, driver=None if subset else "evd")
        else:
            vals, vecs = _band_eigenvalues(_band_from_dense(a), count), None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigensolver failed on {dim}x{dim} matrix (params={params}, parity={parity}): {exc}") from exc
    return SpectralData(params, parity, vals, vecs, converged_count=len(vals))


def _band_eigenvalues(band: np.ndarray, count: int | None = None) -> np.ndarray:
    dim = band.shape[1]
    # Bisection for a subset only pays off for a small fraction of the spectrum.
    if count is None or count > dim // 20:
        vals = sla.eig_banded(band, eigvals_only=True, check_finite=False)
        return vals if count is None else vals[:count]
    return sla.eig_banded(band, eigvals_only=True, select="i", select_range=(0, count - 1), check_finite=False)


def sector_eigenvalues(params: ModelParams, parity: int = 1, count: int | None = None) -> np.ndarray:
    """Lowest ``count`` eigenvalues at the explicit cutoff in ``params``."""
    basis = enumerate_basis(params, parity)
    try:
        return _band_eigenvalues(hamiltonian_band(basis), count)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"band eigensolver failed (dim={basis.dim}, params={params}): {exc}") from exc


def initial_cutoff(params: ModelParams, k: int) -> int:
    return max(1, math.ceil(4 * k / (params.two_j + 1)))


def next_cutoff(n_max: int) -> int:
    return max(n_max + 1, math.ceil(GROWTH * n_max))


def converge_cutoff(params: ModelParams, parity: int = 1, k: int = 1000, tol: float = DEFAULT_TOL,
                    ceiling: int = DEFAULT_CEILING, want_vectors: bool = False,
                    start: int | None = None) -> SpectralData:
    """Grow n_max by x1.5 until the lowest ``k`` levels move by at most ``tol``.

    The returned spectrum is taken at the smaller cutoff of the first
    agreeing pair, so ``params.n_max`` of the result is the resolved cutoff.
    ``start`` overrides the default first cutoff 4k/(2j+1).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    cutoff = start if start is not None else initial_cutoff(params, k)
    prev = prev_full = prev_cutoff = None
    while True:
        if cutoff > ceiling:
            tried = f"last tried n_max={prev_cutoff}" if prev_cutoff is not None else "no cutoff held enough states"
            raise ConvergenceError(
                f"lowest {k} levels not converged to {tol:g} below n_max ceiling {ceiling} "
                f"({tried}) for {params}")
        trial = params.with_cutoff(cutoff)
        if _sector_dim(trial, parity) >= k:
            full = sector_eigenvalues(trial, parity, _probe_count(trial, parity, k))
            vals = full[:k]
            if prev is not None and np.max(np.abs(vals - prev)) <= tol:
                break
            prev, prev_full, prev_cutoff = vals, full, cutoff
        cutoff = next_cutoff(cutoff)

    resolved = params.with_cutoff(prev_cutoff)
    if want_vectors:
        spec = diagonalize(build_hamiltonian(enumerate_basis(resolved, parity)), want_vectors=True)
    elif len(prev_full) == _sector_dim(resolved, parity):
        spec = SpectralData(resolved, parity, prev_full)
    else:
        spec = SpectralData(resolved, parity, sector_eigenvalues(resolved, parity))
    return SpectralData(resolved, parity, spec.eigenvalues, spec.eigenvectors, converged_count=k, tolerance=tol)


def _probe_count(params: ModelParams, parity: int, k: int) -> int | None:
    # Whole spectrum unless only a handful of levels is needed.
    return None if k > _sector_dim(params, parity) // 20 else k


def _sector_dim(params: ModelParams, parity: int | None) -> int:
    total = (params.n_max + 1) * (params.two_j + 1)
    if parity is None:
        return total
    # The (n, k) grid has as many even as odd n + k sites, plus one extra even
    # site when both extents are odd.
    extra = 1 if (params.n_max % 2 == 0 and params.two_j % 2 == 0) else 0
    return total // 2 + (extra if parity == 1 else 0)


def resolve_params(params: ModelParams, parity: int = 1, k: int = 1, tol: float = DEFAULT_TOL,
                   ceiling: int = DEFAULT_CEILING) -> ModelParams:
    if not params.auto_cutoff:
        return params
    return converge_cutoff(params, parity, k, tol, ceiling).params


TIE = 0


def _ground(params: ModelParams, parity: int, tol: float, ceiling: int, want_vectors: bool):
    if params.auto_cutoff:
        return converge_cutoff(params, parity, 1, tol, ceiling, want_vectors=want_vectors)
    basis = enumerate_basis(params, parity)
    if want_vectors:
        return diagonalize(build_hamiltonian(basis), want_vectors=True, count=1)
    return SpectralData(params, parity, sector_eigenvalues(params, parity, 1), converged_count=1)


def ground_state_parity_check(params: ModelParams, tol: float = DEFAULT_TOL,
                              ceiling: int = DEFAULT_CEILING, tie_tol: float = 1e-10) -> int:
    """Sector (+1 or -1) holding the global ground state, or ``TIE`` (0).

    Sector minima closer than ``tie_tol`` are reported as a tie.
    """
    e_plus = _ground(params, 1, tol, ceiling, False).eigenvalues[0]
    e_minus = _ground(params, -1, tol, ceiling, False).eigenvalues[0]
    if abs(e_plus - e_minus) <= tie_tol:
        return TIE
    return 1 if e_plus < e_minus else -1


def order_parameter(params: ModelParams, tol: float = DEFAULT_TOL, ceiling: int = DEFAULT_CEILING) -> float:
    """<a^dag a>/j in the ground state; ties are resolved to the positive sector."""
    parity = ground_state_parity_check(params, tol, ceiling) or 1
    spec = _ground(params, parity, tol, ceiling, True)
    vec = spec.eigenvectors[:, 0]
    basis = enumerate_basis(spec.params, parity)
    return float(vec @ (basis.n * vec)) / params.j


def number_expectations(spec: SpectralData) -> np.ndarray:
    """<a^dag a> in every eigenvector of ``spec``."""
    if spec.eigenvectors is None:
        raise ValueError("eigenvectors required")
    basis = enumerate_basis(spec.params, spec.parity)
    number = observable_matrix(basis, "number").entries.diagonal()
    return np.einsum("i,ia,ia->a", number, spec.eigenvectors, spec.eigenvectors)
