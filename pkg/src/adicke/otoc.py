"""Thermal out-of-time-order correlator evaluated in the energy eigenbasis.

    F(t) = Re Tr(rho V W(t) V W(t)),    rho = exp(-beta H) / Z,

which equals the Hermitian-symmetrized four-point function for Hermitian V
and W.  In the eigenbasis W(t)_ab = exp(i (E_a - E_b) t) W_ab, so only the
phase factors are complex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from adicke.model import ModelParams, OperatorMatrix, build_hamiltonian, enumerate_basis, observable_matrix
from adicke.spectra import (
    DEFAULT_CEILING,
    DEFAULT_TOL,
    SpectralData,
    converge_cutoff,
    diagonalize,
)

TAIL_TOL = 1e-8


class TailWeightError(RuntimeError):
    """Boltzmann weight outside the converged levels is above tolerance."""


@dataclass(frozen=True, eq=False)
class ThermalEnsemble:
    """Boltzmann weights over a sector spectrum.

    ``weights`` are shifted by the ground energy, ``exp(-beta (E - E0))``, so
    they stay finite at low temperature; ``log_z`` is the unshifted log of Z.
    """

    beta: float
    weights: np.ndarray = field(repr=False)
    log_z: float
    shift: float = 0.0
    tail_fraction: float = 0.0

    @property
    def z(self) -> float:
        return math.exp(self.log_z)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def thermal_ensemble(spec: SpectralData, beta: float = 0.1, tail_tol: float = TAIL_TOL,
                     extra_tail: float = 0.0) -> ThermalEnsemble:
    """Weights over the whole spectrum of ``spec``.

    The tail (levels at or above ``spec.converged_count``, plus any
    ``extra_tail`` fraction estimated beyond the truncation) must stay below
    ``tail_tol``; otherwise the cutoff has to grow.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    e = spec.eigenvalues
    e0 = float(e[0])
    w = np.exp(-beta * (e - e0))
    total = w.sum()
    converged = spec.converged_count or len(e)
    tail = float(w[converged:].sum() / total) + extra_tail
    if tail > tail_tol:
        raise TailWeightError(
            f"Boltzmann tail {tail:.3g} beyond the {converged} converged levels exceeds {tail_tol:g}; "
            "raise the level count / cutoff")
    return ThermalEnsemble(float(beta), w, math.log(total) - beta * e0, e0, tail)


@dataclass(frozen=True, eq=False)
class OtocSeries:
    times: np.ndarray
    F: np.ndarray
    deficit: np.ndarray
    params: ModelParams | None = None
    beta: float | None = None
    observable: str = ""
    metadata: dict = field(default_factory=dict)


def _dense(op) -> np.ndarray:
    return op.entries if isinstance(op, OperatorMatrix) else np.asarray(op, dtype=float)


def to_eigenbasis(spec: SpectralData, op) -> np.ndarray:
    a = _dense(op)
    q = spec.eigenvectors
    if np.count_nonzero(a - np.diag(np.diagonal(a))) == 0:
        return q.T @ (np.diagonal(a)[:, None] * q)
    return q.T @ a @ q


def otoc_f(spec: SpectralData, ensemble: ThermalEnsemble, V, W=None, times=(0.0,)) -> OtocSeries:
    if spec.eigenvectors is None:
        raise ValueError("OTOC needs eigenvectors")
    v = to_eigenbasis(spec, V)
    w = v if W is None else to_eigenbasis(spec, W)
    e = spec.eigenvalues
    p = ensemble.probabilities
    times = np.atleast_1d(np.asarray(times, dtype=float))

    def f_at(t):
        if t == 0.0:
            x = v @ w
            return float(np.einsum("a,ab,ba->", p, x, x))
        dphase = np.subtract.outer(e, e) * t
        wc, ws = w * np.cos(dphase), w * np.sin(dphase)
        xr, xi = v @ wc, v @ ws
        # Re Tr(rho X X) with X = xr + i xi
        return float(np.einsum("a,ab,ba->", p, xr, xr) - np.einsum("a,ab,ba->", p, xi, xi))

    f = np.array([f_at(t) for t in times])
    f0 = f_at(0.0)
    if f0 == 0:
        raise ValueError("F(0) vanishes; the deficit 1 - F(t)/F(0) is undefined")
    deficit = 1.0 - f / f0
    deficit[times == 0.0] = 0.0
    meta = {"trace": "positive-parity sector" if spec.parity == 1 else f"parity {spec.parity} sector",
            "F0": f0, "levels": len(e), "converged_levels": spec.converged_count,
            "tail_fraction": ensemble.tail_fraction}
    return OtocSeries(times, f, deficit, spec.params, ensemble.beta, getattr(V, "label", ""), meta)


def level_count_estimate(params: ModelParams, beta: float, tail_tol: float = TAIL_TOL) -> int:
    """Rough number of sector levels within the Boltzmann-relevant window."""
    density = (params.two_j + 1) / (2 * params.omega)
    span = math.log(density / (beta * tail_tol)) / beta + params.two_j * abs(params.omega0)
    return max(8, math.ceil(density * span))


def certified_thermal_spectrum(params: ModelParams, beta: float = 0.1, tail_tol: float = TAIL_TOL,
                               tol: float = DEFAULT_TOL, ceiling: int = DEFAULT_CEILING,
                               min_cutoff: int | None = None):
    """Converged positive-sector eigensystem whose Boltzmann tail is below ``tail_tol``.

    The weight beyond the converged levels is estimated from the truncated
    spectrum itself plus a flat-density continuation
    rho e^(-beta E_k) / beta above the last converged level E_k, with rho
    the larger of the measured top-of-window density and (2j+1)/(2 omega).
    Returns ``(spectrum, ensemble)``.
    """
    if beta <= 0:
        raise TailWeightError("an infinite-temperature trace cannot be certified on a truncated space")
    k = level_count_estimate(params, beta, tail_tol)
    while True:
        trial = converge_cutoff(params, 1, k, tol, ceiling, start=min_cutoff)
        extra = _continuation_tail(trial, beta, k)
        e = trial.eigenvalues
        w = np.exp(-beta * (e - e[0]))
        if w[k:].sum() / w.sum() + extra <= tail_tol:
            break
        k = math.ceil(1.5 * k)
    full = diagonalize(build_hamiltonian(enumerate_basis(trial.params, 1)), want_vectors=True)
    spec = SpectralData(trial.params, 1, full.eigenvalues, full.eigenvectors, converged_count=k, tolerance=tol)
    return spec, thermal_ensemble(spec, beta, tail_tol, extra_tail=_continuation_tail(spec, beta, k))


def _continuation_tail(spec: SpectralData, beta: float, k: int) -> float:
    e = spec.eigenvalues
    p = spec.params
    top = e[max(0, k - max(10, k // 10)):k]
    measured = (len(top) - 1) / (top[-1] - top[0]) if len(top) > 1 and top[-1] > top[0] else 0.0
    density = max(measured, (p.two_j + 1) / (2 * p.omega))
    log_z = math.log(np.exp(-beta * (e - e[0])).sum()) - beta * e[0]
    return density * math.exp(-beta * e[k - 1] - log_z) / beta


def otoc_deficit_at(params: ModelParams, beta: float = 0.1, t: float = 100.0, shift: float = 100.0,
                    window: float = 0.0, samples: int = 21, tail_tol: float = TAIL_TOL,
                    tol: float = DEFAULT_TOL, ceiling: int = DEFAULT_CEILING,
                    min_cutoff: int | None = None) -> tuple[float, OtocSeries]:
    """1 - F(t)/F(0) with W = V = a^dag a + shift, end to end.

    With ``window > 0`` the deficit is averaged over ``samples`` equally spaced
    times in [t - window, t + window].  Returns ``(deficit, series)``.
    """
    spec, ens = certified_thermal_spectrum(params, beta, tail_tol, tol, ceiling, min_cutoff)
    basis = enumerate_basis(spec.params, 1)
    v = observable_matrix(basis, "number_plus_shift", shift)
    times = np.linspace(t - window, t + window, samples) if window > 0 else np.array([t])
    series = otoc_f(spec, ens, v, None, times)
    series.metadata.update({"shift": shift, "n_max": spec.params.n_max, "window": window})
    return float(series.deficit.mean()), series
