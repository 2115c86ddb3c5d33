"""Dense complex linear algebra for small (n <= 16) quantum systems.

Everything here operates on plain numpy arrays: states are unit complex
vectors, operators are stacked ``(..., n, n)`` complex matrices.  All
functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

MAX_DIM = 16

SKEW_TOL = 1e-12
HERM_TOL = 1e-12
STATE_NORM_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-10


class ContractViolationError(ValueError):
    """An input failed a structural precondition (skewness, norm, shape)."""


class SpectralDecomposition(NamedTuple):
    """Eigenpairs of a Hermitian matrix, eigenvalues ascending.

    ``vectors[:, j]`` is the unit eigenvector paired with ``values[j]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def _entry_scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)


def hermiticity_defect(m: np.ndarray) -> float:
    """Max-entry norm of M - M*, relative to max(1, |M|_max)."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) / _entry_scale(m))


def skewness_defect(m: np.ndarray) -> float:
    """Max-entry norm of M + M*, relative to max(1, |M|_max)."""
    m = np.asarray(m)
    return float(np.max(np.abs(m + np.conj(np.swapaxes(m, -1, -2)))) / _entry_scale(m))


def check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ContractViolationError(f"{name}: expected square matrices, got shape {m.shape}")
    n = m.shape[-1]
    if not 2 <= n <= MAX_DIM:
        raise ContractViolationError(f"{name}: dimension {n} outside [2, {MAX_DIM}]")
    if not np.all(np.isfinite(m.view(float))):
        raise ContractViolationError(f"{name}: non-finite entries")
    return m


def as_state(vec, n: int | None = None) -> np.ndarray:
    """Validate a quantum state: complex vector, unit norm within 1e-9."""
    psi = np.asarray(vec, dtype=complex)
    if psi.ndim != 1:
        raise ContractViolationError(f"state must be a vector, got shape {psi.shape}")
    if n is not None and psi.shape[0] != n:
        raise ContractViolationError(f"state has dimension {psi.shape[0]}, expected {n}")
    if not np.all(np.isfinite(psi.view(float))):
        raise ContractViolationError("state has non-finite entries")
    nrm = float(np.linalg.norm(psi))
    if abs(nrm - 1.0) > STATE_NORM_TOL:
        raise ContractViolationError(f"state norm {nrm!r} deviates from 1 by more than {STATE_NORM_TOL}")
    return psi


def basis_state(n: int, j: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[j] = 1.0
    return e


def _pauli_components(h: np.ndarray):
    """Split stacked Hermitian 2x2 matrices into (a, bx, by, bz) real fields."""
    a = 0.5 * np.real(h[..., 0, 0] + h[..., 1, 1])
    bz = 0.5 * np.real(h[..., 0, 0] - h[..., 1, 1])
    bx = np.real(h[..., 0, 1])
    by = -np.imag(h[..., 0, 1])
    return a, bx, by, bz


def _expm_pauli(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i*dt*H) for stacked Hermitian 2x2 H, via the closed-form rotation.

    This is the propagation hot path: cos/sin of the rotation angle instead
    of an eigensolve, exactly unitary up to rounding.
    """
    a, bx, by, bz = _pauli_components(h)
    r = np.sqrt(bx * bx + by * by + bz * bz)
    c = np.cos(dt * r)
    safe = np.where(r > 0.0, r, 1.0)
    s = np.where(r > 0.0, np.sin(dt * r) / safe, dt)
    phase = np.exp(-1j * dt * a)
    u = np.empty(np.broadcast(a, r).shape + (2, 2), dtype=complex)
    u[..., 0, 0] = phase * (c - 1j * s * bz)
    u[..., 0, 1] = phase * (-1j * s * (bx - 1j * by))
    u[..., 1, 0] = phase * (-1j * s * (bx + 1j * by))
    u[..., 1, 1] = phase * (c + 1j * s * bz)
    return u


def expm_skew(g: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Unitary exp(dt*G) of a skew-Hermitian G (or stack of them).

    2x2 inputs use the closed-form rotation; larger dimensions go through a
    Hermitian eigendecomposition of iG.
    """
    g = check_square(g, "expm_skew input")
    if not np.isfinite(dt):
        raise ContractViolationError("expm_skew: dt must be finite")
    defect = skewness_defect(g)
    if defect > SKEW_TOL:
        raise ContractViolationError(f"expm_skew: input is not skew-Hermitian (defect {defect:.2e})")
    h = 1j * g
    if g.shape[-1] == 2:
        return _expm_pauli(h, dt)
    lam, vec = np.linalg.eigh(h)
    phases = np.exp(-1j * dt * lam)
    return (vec * phases[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


def eig_hermitian(h: np.ndarray) -> SpectralDecomposition:
    """Ascending eigenvalues and unitary eigenvectors of a Hermitian matrix."""
    h = check_square(h, "eig_hermitian input")
    defect = hermiticity_defect(h)
    if defect > HERM_TOL:
        raise ContractViolationError(f"eig_hermitian: input is not Hermitian (defect {defect:.2e})")
    lam, vec = np.linalg.eigh(h)
    recon = (vec * lam[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))
    scale = max(float(np.max(np.abs(h))), np.finfo(float).tiny)
    err = float(np.max(np.abs(recon - h)))
    if err > RECONSTRUCTION_TOL * scale:
        raise ContractViolationError(f"eig_hermitian: reconstruction defect {err:.2e} exceeds tolerance")
    return SpectralDecomposition(values=lam, vectors=vec)


def dist_up_to_phase(x, y) -> float:
    """Distance min over theta of |x - e^{i theta} y| = sqrt(2 - 2|<x,y>|).

    Zero iff the states coincide up to a global phase; at most sqrt(2).
    """
    x = as_state(x)
    y = as_state(y)
    if x.shape != y.shape:
        raise ContractViolationError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    overlap = abs(np.vdot(x, y))
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * min(overlap, 1.0))))


def fidelity(x, y) -> float:
    """Squared overlap |<x, y>|^2 of two unit states."""
    x = as_state(x)
    y = as_state(y)
    if x.shape != y.shape:
        raise ContractViolationError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(min(abs(np.vdot(x, y)) ** 2, 1.0))


def operator_norm(m: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(m, dtype=complex), 2))
