"""Maximum eigenstate overlap with an integrable reference Hamiltonian.

For each target eigenstate |n2> the measure is the largest squared projection
onto a reference eigenspace.  Reference eigenvalues closer than the
degeneracy tolerance are grouped, which makes the result independent of the
arbitrary basis LAPACK picks inside a degenerate subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from adicke.model import ModelParams, build_hamiltonian, enumerate_basis
from adicke.spectra import DEFAULT_CEILING, DEFAULT_TOL, SpectralData, converge_cutoff, diagonalize


@dataclass(frozen=True, eq=False)
class OverlapResult:
    reference: ModelParams | None
    target: ModelParams | None
    max_overlap: np.ndarray = field(repr=False)
    eigenspace_index: np.ndarray = field(repr=False)
    target_energies: np.ndarray = field(repr=False)
    completeness: np.ndarray = field(repr=False)
    degeneracy_tol: float = 0.0
    n_eigenspaces: int = 0


def group_eigenspaces(eigenvalues: np.ndarray, tol: float) -> np.ndarray:
    """Label ascending eigenvalues so that gaps <= tol share a label."""
    gaps = np.diff(eigenvalues)
    return np.concatenate([[0], np.cumsum(gaps > tol)]).astype(np.int64)


def max_overlap(reference: SpectralData, target: SpectralData, degeneracy_tol: float | None = None,
                count: int | None = None) -> OverlapResult:
    """Per target state, the largest squared projection on a reference eigenspace.

    ``count`` limits the target states to the lowest ones (default: the
    target's converged levels).  ``degeneracy_tol`` defaults to 1e-9 times
    the reference spectral width.
    """
    if reference.eigenvectors is None or target.eigenvectors is None:
        raise ValueError("both spectra need eigenvectors")
    qr, qt = reference.eigenvectors, target.eigenvectors
    if qr.shape[0] != qt.shape[0]:
        raise ValueError(f"basis mismatch: reference dimension {qr.shape[0]} vs target {qt.shape[0]}")
    if reference.params is not None and target.params is not None:
        rp, tp = reference.params, target.params
        if rp.j != tp.j or rp.n_max != tp.n_max or reference.parity != target.parity:
            raise ValueError("reference and target must share j, n_max and parity sector")
    ev = reference.eigenvalues
    if degeneracy_tol is None:
        width = float(ev[-1] - ev[0]) if len(ev) > 1 else 0.0
        degeneracy_tol = 1e-9 * max(width, 1.0)
    labels = group_eigenspaces(ev, degeneracy_tol)
    n_groups = int(labels[-1]) + 1

    if count is None:
        count = target.converged_count or qt.shape[1]
    count = min(count, qt.shape[1])
    amp2 = (qr.T @ qt[:, :count]) ** 2
    weight = np.zeros((n_groups, count))
    np.add.at(weight, labels, amp2)
    best = np.argmax(weight, axis=0)
    m = weight[best, np.arange(count)]
    return OverlapResult(reference.params, target.params, np.minimum(m, 1.0), best,
                         target.eigenvalues[:count], weight.sum(axis=0), degeneracy_tol, n_groups)


def hose_taylor_fraction(result: OverlapResult, threshold: float = 0.5) -> float:
    """Fraction of target states whose best reference overlap exceeds ``threshold``."""
    if len(result.max_overlap) == 0:
        return float("nan")
    return float(np.mean(result.max_overlap > threshold))


def shared_cutoff_pair(reference: ModelParams, target: ModelParams, k: int, parity: int = 1,
                       tol: float = DEFAULT_TOL, ceiling: int = DEFAULT_CEILING):
    """Eigensystems of both Hamiltonians at one common cutoff.

    Each cutoff is resolved for its own lowest ``k`` levels (unless given
    explicitly); the larger wins and both are rebuilt there.
    """
    if reference.j != target.j:
        raise ValueError("reference and target must share j")
    cutoffs = []
    for p in (reference, target):
        cutoffs.append(p.n_max if not p.auto_cutoff else converge_cutoff(p, parity, k, tol, ceiling).params.n_max)
    n_max = max(cutoffs)
    out = []
    for p in (reference, target):
        fixed = p.with_cutoff(n_max)
        s = diagonalize(build_hamiltonian(enumerate_basis(fixed, parity)), want_vectors=True)
        out.append(SpectralData(fixed, parity, s.eigenvalues, s.eigenvectors, converged_count=min(k, len(s)),
                                tolerance=tol))
    return out[0], out[1]
