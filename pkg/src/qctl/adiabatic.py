"""Smooth spectral paths and the explicit adiabatic reference flow.

Given a slow skew-Hermitian generator A(tau), the Hermitian family iA(tau)
is diagonalized on a uniform grid and the eigenvector columns are glued by
discrete parallel transport: each column keeps the branch with maximal
overlap against the previous sample and is re-phased so that overlap is
real positive.  Gapless (crossing) paths are rejected, not tracked.

The reference flow built from the path is

    Upsilon_eps(tau) = P(tau) exp(-i/eps Int Lambda) exp(Int D) P(0)*,

with D the diagonal part of (dP*/dtau) P.  Because the columns of P are
unit vectors, <p_j, p_j'> is purely imaginary; the finite-difference real
part is discretization noise (O(h) at the one-sided endpoints) and is
dropped so that the stored D is exactly imaginary and Upsilon exactly
unitary on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .schrodinger import Generator
from .smallmat import ContractViolationError, eig_hermitian

DEFAULT_GRID = 4096


class GapViolationError(RuntimeError):
    """The spectral gap dropped to or below the configured floor."""


@dataclass(frozen=True)
class SpectralPath:
    """Eigenvalue and continuity-fixed eigenvector samples on a uniform grid."""

    taus: np.ndarray          # (M+1,)
    lambdas: np.ndarray       # (M+1, n) ascending per sample
    vectors: np.ndarray       # (M+1, n, n), column j pairs with lambdas[:, j]
    gap_min: float

    @property
    def dim(self) -> int:
        return self.lambdas.shape[1]

    @property
    def grid_size(self) -> int:
        return len(self.taus) - 1

    def lambda_sup(self) -> float:
        return float(np.max(np.abs(self.lambdas)))


@dataclass(frozen=True)
class AdiabaticReference:
    """A spectral path with the drift diagonal D and cumulative integrals."""

    path: SpectralPath
    D: np.ndarray             # (M+1, n), purely imaginary entries
    int_lambda: np.ndarray    # (M+1, n), trapezoid cumulative of Lambda
    int_D: np.ndarray         # (M+1, n), trapezoid cumulative of D

    def interpolators(self) -> tuple[Callable, Callable, float]:
        """(P(tau), Gamma(tau) = Int Lambda, sup|Lambda|) with linear
        interpolation between grid samples; for conjugating fast fields."""
        path = self.path
        m = path.grid_size

        def locate(taus):
            x = np.clip(np.asarray(taus, dtype=float), 0.0, 1.0) * m
            i0 = np.minimum(x.astype(np.int64), m - 1)
            return i0, (x - i0)

        def p_fn(taus):
            i0, w = locate(taus)
            return (path.vectors[i0] * (1.0 - w)[..., None, None]
                    + path.vectors[i0 + 1] * w[..., None, None])

        def gamma_fn(taus):
            i0, w = locate(taus)
            return self.int_lambda[i0] * (1.0 - w)[..., None] + self.int_lambda[i0 + 1] * w[..., None]

        return p_fn, gamma_fn, path.lambda_sup()


def spectral_path(gen: Generator, grid_size: int = DEFAULT_GRID, gap_floor: float = 0.0,
                  context: str = "") -> SpectralPath:
    """Pointwise eigendecomposition of iA(tau) with parallel-transported columns.

    Raises GapViolationError (naming the offending tau) if the minimal
    pairwise eigenvalue separation does not exceed ``gap_floor``.  Intended
    for slow generators; the grid must resolve the eigenvector rotation.
    """
    if grid_size < 64:
        raise ContractViolationError(f"grid_size must be >= 64, got {grid_size}")
    taus = np.linspace(0.0, 1.0, grid_size + 1)
    h = gen.sample(taus)
    lam, vec = np.linalg.eigh(1j * h)

    scale = max(1.0, float(np.max(np.abs(h))))
    recon = (vec * lam[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))
    err = float(np.max(np.abs(recon - 1j * h)))
    if err > 1e-9 * scale:
        raise ContractViolationError(f"eigendecomposition reconstruction defect {err:.2e}")

    # discrete parallel transport: keep branch pairing, re-phase overlaps positive
    for m in range(1, grid_size + 1):
        overlaps = np.sum(np.conj(vec[m - 1]) * vec[m], axis=0)
        if np.min(np.abs(overlaps)) <= 0.5:
            t_bad = taus[m]
            raise GapViolationError(
                f"eigenvector branch continuity lost near tau = {t_bad:.6f}"
                + (f" ({context})" if context else "")
                + "; refine the grid or check the gap"
            )
        vec[m] *= (np.conj(overlaps) / np.abs(overlaps))[None, :]

    gaps = np.diff(lam, axis=1)
    m_min, j_min = np.unravel_index(np.argmin(gaps), gaps.shape)
    gap_min = float(gaps[m_min, j_min])
    if gap_min <= gap_floor:
        raise GapViolationError(
            f"spectral gap {gap_min:.6g} at tau = {taus[m_min]:.6f} does not exceed "
            f"floor {gap_floor:g}" + (f" ({context})" if context else "")
        )
    return SpectralPath(taus=taus, lambdas=lam, vectors=vec, gap_min=gap_min)


def diagonal_drift(path: SpectralPath) -> AdiabaticReference:
    """Drift diagonal D = diag((dP*/dtau) P) and cumulative trapezoid integrals.

    dP*/dtau uses centered differences (second-order one-sided stencils at
    the endpoints).  The real part of the diagonal is dropped; see module
    docstring.
    """
    taus, lam, p = path.taus, path.lambdas, path.vectors
    dt = taus[1] - taus[0]
    pd = np.conj(np.swapaxes(p, -1, -2))
    dpd = np.empty_like(pd)
    dpd[1:-1] = (pd[2:] - pd[:-2]) / (2.0 * dt)
    dpd[0] = (-3.0 * pd[0] + 4.0 * pd[1] - pd[2]) / (2.0 * dt)
    dpd[-1] = (3.0 * pd[-1] - 4.0 * pd[-2] + pd[-3]) / (2.0 * dt)
    diag = np.einsum("mjk,mkj->mj", dpd, p)
    d = 1j * np.imag(diag)

    int_lam = np.zeros_like(lam)
    int_d = np.zeros_like(d)
    int_lam[1:] = np.cumsum(0.5 * (lam[1:] + lam[:-1]) * dt, axis=0)
    int_d[1:] = np.cumsum(0.5 * (d[1:] + d[:-1]) * dt, axis=0)
    return AdiabaticReference(path=path, D=d, int_lambda=int_lam, int_D=int_d)


def adiabatic_reference_flow(ref: AdiabaticReference, epsilon: float, tau: float) -> np.ndarray:
    """Upsilon_eps(tau) = P(tau) exp(-i/eps Int Lambda) exp(Int D) P(0)*.

    Exact (and unitary up to rounding) on grid points; linear interpolation
    of the cumulative integrals and of P between them.  The accumulated
    phase Int Lambda / eps is kept as a real number and only reduced at
    exponentiation.
    """
    if not (0.0 <= tau <= 1.0):
        raise ContractViolationError(f"tau must be in [0, 1], got {tau}")
    path = ref.path
    m = path.grid_size
    x = tau * m
    i0 = min(int(x), m - 1)
    w = x - i0
    if w == 0.0:
        p_t = path.vectors[i0]
        il = ref.int_lambda[i0]
        idd = ref.int_D[i0]
    else:
        p_t = path.vectors[i0] * (1.0 - w) + path.vectors[i0 + 1] * w
        il = ref.int_lambda[i0] * (1.0 - w) + ref.int_lambda[i0 + 1] * w
        idd = ref.int_D[i0] * (1.0 - w) + ref.int_D[i0 + 1] * w
    phases = np.exp(-1j * il / epsilon) * np.exp(idd)
    return (p_t * phases[None, :]) @ np.conj(path.vectors[0].T)


def reference_flow_path(ref: AdiabaticReference, epsilon: float, taus) -> np.ndarray:
    """Stacked Upsilon_eps at several tau values."""
    return np.stack([adiabatic_reference_flow(ref, epsilon, float(t)) for t in np.atleast_1d(taus)])


def uniform_gap_check(family: Callable[[float], Generator], delta_grid,
                      grid_size: int = DEFAULT_GRID, gap_floor: float = 0.0) -> float:
    """Min over the delta grid of each member's spectral gap minimum.

    Raises GapViolationError naming (delta, tau) on the first violation.
    """
    deltas = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    if deltas.size == 0:
        raise ContractViolationError("delta grid must be nonempty")
    worst = np.inf
    for delta in deltas:
        path = spectral_path(family(float(delta)), grid_size, gap_floor,
                             context=f"delta = {delta:g}")
        worst = min(worst, path.gap_min)
    return float(worst)
