"""Truncated parity-sector bases and matrices of the anisotropic Dicke model.

The Hamiltonian is

    H = w a^dag a + w0 Jz + g1/sqrt(2j) (a^dag J- + a J+) + g2/sqrt(2j) (a^dag J+ + a J-)

written in the product basis |n> (x) |j, m>.  Parity exp(i pi [a^dag a + Jz + j])
is conserved, so every matrix is built inside one sector of fixed
(-1)^(n + m + j).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

AUTO = "auto"


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings plus the Fock cutoff.

    ``n_max`` is either a non-negative int or ``"auto"``; the latter is
    resolved by :func:`adicke.spectra.converge_cutoff`.
    """

    omega: float = 1.0
    omega0: float = 1.0
    g1: float = 0.0
    g2: float = 0.0
    j: float = 0.5
    n_max: int | str = AUTO

    def __post_init__(self):
        two_j = 2 * float(self.j)
        if two_j <= 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ValueError(f"j must be a positive half-integer, got {self.j!r}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega!r}")
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("couplings g1, g2 must be non-negative")
        if self.n_max != AUTO:
            if isinstance(self.n_max, bool) or int(self.n_max) != self.n_max or self.n_max < 0:
                raise ValueError(f"n_max must be a non-negative integer or 'auto', got {self.n_max!r}")
            object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "j", round(two_j) / 2)

    @property
    def two_j(self) -> int:
        return int(round(2 * self.j))

    @property
    def auto_cutoff(self) -> bool:
        return self.n_max == AUTO

    def with_cutoff(self, n_max) -> "ModelParams":
        return replace(self, n_max=n_max)

    def as_dict(self) -> dict:
        return {"omega": self.omega, "omega0": self.omega0, "g1": self.g1,
                "g2": self.g2, "j": self.j, "n_max": self.n_max}


def parity_of(n, m, j):
    """(-1)^(n + m + j) for integer ``n`` and half-integer ``m``."""
    k = np.rint(np.asarray(n) + np.asarray(m) + j).astype(np.int64)
    return np.where(k % 2 == 0, 1, -1)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Canonically ordered (ascending n, then m) basis of one parity sector.

    ``parity=None`` gives the full two-sector basis in the same ordering; it
    exists for checking the block structure and the full spectrum.
    """

    params: ModelParams
    parity: int | None
    n: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.n)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def states(self) -> list[tuple[int, float]]:
        return [(int(a), float(b)) for a, b in zip(self.n, self.m)]

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        """Map (n, 2m) -> position; 2m keeps the keys integral."""
        return {(int(a), int(round(2 * b))): i for i, (a, b) in enumerate(zip(self.n, self.m))}

    def same_space(self, other: "SectorBasis") -> bool:
        return (self.parity == other.parity and self.params.j == other.params.j
                and self.params.n_max == other.params.n_max)


def enumerate_basis(params: ModelParams, parity: int | None = 1) -> SectorBasis:
    if params.auto_cutoff:
        raise ValueError("enumerate_basis needs an explicit n_max; resolve 'auto' first")
    if parity not in (1, -1, None):
        raise ValueError(f"parity must be +1, -1 or None, got {parity!r}")
    two_j = params.two_j
    n_grid, k_grid = np.meshgrid(np.arange(params.n_max + 1), np.arange(two_j + 1), indexing="ij")
    n_all = n_grid.ravel()
    k_all = k_grid.ravel()  # k = m + j
    if parity is not None:
        keep = ((n_all + k_all) % 2 == 0) if parity == 1 else ((n_all + k_all) % 2 == 1)
        n_all, k_all = n_all[keep], k_all[keep]
    m_all = k_all - params.j
    return SectorBasis(params, parity, n_all.astype(np.int64), m_all.astype(float))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    basis: SectorBasis
    entries: np.ndarray = field(repr=False)
    label: str = ""

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _ladder(j, m, sign):
    """Coefficient of J(+/-)|j,m> = sqrt(j(j+1) - m(m +/- 1)) |j, m +/- 1>."""
    return np.sqrt(np.maximum(j * (j + 1) - m * (m + sign), 0.0))


def coupling_elements(basis: SectorBasis):
    """Upper-off-diagonal (row, col, value) triples of the light-matter terms.

    Only the raising-photon halves a^dag J- and a^dag J+ are enumerated; their
    Hermitian partners are the transposed entries.  Moves past n_max are
    dropped (hard cutoff).
    """
    p = basis.params
    j = p.j
    n, m = basis.n, basis.m
    k = np.rint(m + j).astype(np.int64)
    lookup = np.full((p.n_max + 2, p.two_j + 3), -1, dtype=np.int64)
    lookup[n, k + 1] = np.arange(basis.dim)
    scale = 1.0 / np.sqrt(2 * j)
    rows, cols, vals = [], [], []
    for g, sign in ((p.g1, -1), (p.g2, +1)):
        if g == 0:
            continue
        amp = g * scale * np.sqrt(n + 1.0) * _ladder(j, m, sign)
        tgt = lookup[n + 1, k + 1 + sign]
        ok = (tgt >= 0) & (amp != 0)
        rows.append(np.nonzero(ok)[0])
        cols.append(tgt[ok])
        vals.append(amp[ok])
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def diagonal_energies(basis: SectorBasis) -> np.ndarray:
    p = basis.params
    return p.omega * basis.n + p.omega0 * basis.m


def build_hamiltonian(basis: SectorBasis) -> OperatorMatrix:
    h = np.diag(diagonal_energies(basis))
    rows, cols, vals = coupling_elements(basis)
    # g1 and g2 moves reach distinct targets, so no pair is written twice.
    h[rows, cols] = vals
    h[cols, rows] = vals
    return OperatorMatrix(basis, h, "H")


def hamiltonian_band(basis: SectorBasis) -> np.ndarray:
    """The Hamiltonian in LAPACK upper symmetric band storage.

    Row ``u - d`` of the result holds the d-th superdiagonal, with ``u`` the
    bandwidth, as expected by :func:`scipy.linalg.eig_banded`.
    """
    rows, cols, vals = coupling_elements(basis)
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    offsets = hi - lo
    u = int(offsets.max()) if len(offsets) else 0
    band = np.zeros((u + 1, basis.dim))
    band[u] = diagonal_energies(basis)
    band[u - offsets, hi] = vals
    return band


OBSERVABLES = ("number", "jz", "number_plus_shift")


def observable_matrix(basis: SectorBasis, which: str = "number", shift: float = 100.0) -> OperatorMatrix:
    if which == "number":
        d = basis.n.astype(float)
    elif which == "jz":
        d = basis.m.copy()
    elif which == "number_plus_shift":
        d = basis.n + float(shift)
    else:
        raise ValueError(f"unsupported observable {which!r}; choose from {OBSERVABLES}")
    return OperatorMatrix(basis, np.diag(d), which)


def symmetry_partner(params: ModelParams) -> ModelParams:
    """Image under Jy -> -Jy, Jz -> -Jz: swaps g1 and g2 and flips w0."""
    return replace(params, omega0=-params.omega0, g1=params.g2, g2=params.g1)
