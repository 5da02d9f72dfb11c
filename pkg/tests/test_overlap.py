import numpy as np
import pytest
from scipy.stats import ortho_group

from adicke.model import ModelParams, build_hamiltonian, enumerate_basis
from adicke.overlap import group_eigenspaces, hose_taylor_fraction, max_overlap, shared_cutoff_pair
from adicke.spectra import SpectralData, diagonalize


def eig(params, parity=1):
    s = diagonalize(build_hamiltonian(enumerate_basis(params, parity)), want_vectors=True)
    return SpectralData(params, parity, s.eigenvalues, s.eigenvectors, converged_count=len(s))


def test_identity_gives_ones():
    a = eig(ModelParams(1, 1, 0.4, 0.3, 2, 20))
    res = max_overlap(a, a)
    np.testing.assert_allclose(res.max_overlap, 1, atol=1e-12)
    assert hose_taylor_fraction(res) == 1.0


def test_identity_with_degenerate_reference():
    # uncoupled resonant spectrum is heavily degenerate; grouping keeps the overlap at 1
    a = eig(ModelParams(1, 1, 0, 0, 3, 15))
    res = max_overlap(a, a)
    assert res.n_eigenspaces < len(a)
    np.testing.assert_allclose(res.max_overlap, 1, atol=1e-12)


def test_completeness():
    a = eig(ModelParams(1, 1, 0, 0, 2, 25))
    b = eig(ModelParams(1, 1, 0.7, 0.2, 2, 25))
    res = max_overlap(a, b)
    assert np.max(np.abs(res.completeness - 1)) < 1e-10


def test_rotation_inside_degenerate_subspace_is_invisible():
    a = eig(ModelParams(1, 1, 0, 0, 2, 12))
    b = eig(ModelParams(1, 1, 0.3, 0.3, 2, 12))
    labels = group_eigenspaces(a.eigenvalues, 1e-9)
    q = a.eigenvectors.copy()
    rng = np.random.default_rng(1)
    for lab in np.unique(labels):
        idx = np.where(labels == lab)[0]
        if len(idx) > 1:
            q[:, idx] = q[:, idx] @ ortho_group.rvs(len(idx), random_state=rng)
    rotated = SpectralData(a.params, 1, a.eigenvalues, q, converged_count=len(a))
    np.testing.assert_allclose(max_overlap(rotated, b).max_overlap, max_overlap(a, b).max_overlap, atol=1e-12)


def test_basis_mismatch():
    a = eig(ModelParams(1, 1, 0, 0, 2, 10))
    b = eig(ModelParams(1, 1, 0.2, 0.2, 2, 11))
    with pytest.raises(ValueError):
        max_overlap(a, b)


def test_sector_mismatch():
    a = eig(ModelParams(1, 1, 0, 0, 2, 10), 1)
    b = eig(ModelParams(1, 1, 0.2, 0.2, 2, 10), -1)
    with pytest.raises(ValueError):
        max_overlap(a, b)


def test_missing_vectors():
    a = eig(ModelParams(1, 1, 0, 0, 2, 10))
    bare = SpectralData(a.params, 1, a.eigenvalues)
    with pytest.raises(ValueError):
        max_overlap(a, bare)


def test_tiny_coupling_keeps_overlaps():
    ref, tgt = shared_cutoff_pair(ModelParams(1, 1, 0, 0, 10), ModelParams(1, 1, 1e-6, 1e-6, 10), k=200)
    res = max_overlap(ref, tgt)
    assert np.all(res.max_overlap > 0.999)


def test_random_rotation_fraction_near_zero():
    d = 1000
    rng = np.random.default_rng(4)
    ref = SpectralData(None, None, np.arange(d, dtype=float), np.eye(d), converged_count=d)
    tgt = SpectralData(None, None, np.arange(d, dtype=float), ortho_group.rvs(d, random_state=rng), converged_count=d)
    res = max_overlap(ref, tgt)
    assert hose_taylor_fraction(res) == 0.0
    assert np.median(res.max_overlap) < 20 / d


def test_fraction_falls_along_dicke_line():
    fractions = []
    for g in (0.05, 0.2, 0.5):
        ref, tgt = shared_cutoff_pair(ModelParams(1, 1, 0, 0, 10), ModelParams(1, 1, g, g, 10), k=200)
        res = max_overlap(ref, tgt)
        fractions.append(hose_taylor_fraction(res))
        if g == 0.5:
            assert np.mean(res.max_overlap[:20] < 0.5) > 0.5
    assert fractions[0] > fractions[1] > fractions[2]


def test_shared_cutoff_rejects_different_j():
    with pytest.raises(ValueError):
        shared_cutoff_pair(ModelParams(1, 1, 0, 0, 2), ModelParams(1, 1, 0.1, 0.1, 3), k=10)
