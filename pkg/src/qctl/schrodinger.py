"""Unitary propagation of tau-dependent skew-Hermitian generators.

The integrator is the exponential midpoint rule
``psi_{k+1} = exp(h * G(tau_k + h/2)) psi_k``: exactly norm-preserving,
second order, and well behaved on oscillatory right-hand sides as long as
the step resolves the fastest frequency.  Step sizes are derived from the
generator's declared ``freq_bound``, never estimated from samples.

Within a stored segment the step unitaries are contracted pairwise (a
balanced product tree) instead of one-by-one; the result is the same
ordered product up to floating-point reassociation and the whole batch
stays in vectorized numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .smallmat import ContractViolationError, as_state, check_square, expm_skew, skewness_defect

DEFAULT_STEP_CAP = 10**8
DEFAULT_CHECKPOINTS = 2048
_BATCH = 1 << 16


class StepLimitError(RuntimeError):
    """The step-count cap was exceeded; the message names the configuration."""


class IntegratorError(RuntimeError):
    """A propagation violated one of its posterior guarantees."""


@dataclass(frozen=True)
class Generator:
    """A tau-dependent skew-Hermitian matrix field on [0, 1].

    ``sample`` must accept a float array of shape (N,) and return the stacked
    matrices with shape (N, dim, dim).  ``freq_bound`` is an upper bound on
    the fastest angular frequency present in the dynamics (sample oscillation
    and state rotation rate combined, units 1/tau); constructors compute it
    analytically because estimating it from samples is unreliable for
    near-cancelling phases.
    """

    dim: int
    sample: Callable[[np.ndarray], np.ndarray]
    freq_bound: float
    label: str = ""

    def __post_init__(self):
        if not (isinstance(self.dim, int) and 2 <= self.dim <= 16):
            raise ContractViolationError(f"generator dimension {self.dim} outside [2, 16]")
        fb = self.freq_bound
        if not (isinstance(fb, (int, float)) and math.isfinite(fb) and fb >= 0.0):
            raise ContractViolationError(f"freq_bound must be finite and >= 0, got {fb!r}")

    @classmethod
    def from_scalar(cls, fn: Callable[[float], np.ndarray], dim: int, freq_bound: float,
                    label: str = "") -> "Generator":
        """Wrap a scalar tau -> matrix callable into a batched sampler."""

        def sample(taus: np.ndarray) -> np.ndarray:
            return np.stack([np.asarray(fn(float(t)), dtype=complex) for t in np.atleast_1d(taus)])

        return cls(dim=dim, sample=sample, freq_bound=freq_bound, label=label)

    def __add__(self, other: "Generator") -> "Generator":
        if self.dim != other.dim:
            raise ContractViolationError(f"dimension mismatch: {self.dim} vs {other.dim}")
        a, b = self.sample, other.sample
        return Generator(
            dim=self.dim,
            sample=lambda taus: a(taus) + b(taus),
            freq_bound=self.freq_bound + other.freq_bound,
            label=f"({self.label})+({other.label})" if self.label or other.label else "",
        )

    def scaled(self, c: float) -> "Generator":
        s = self.sample
        return Generator(
            dim=self.dim,
            sample=lambda taus: c * s(taus),
            freq_bound=abs(c) * self.freq_bound,
            label=f"{c!r}*({self.label})" if self.label else "",
        )


@dataclass(frozen=True)
class StepPolicy:
    """Step-size policy: resolve the fastest period with >= n_osc steps.

    The effective step is ``min(h_max, 2*pi / (freq_bound * n_osc))`` (then
    shrunk so the horizon divides evenly).  ``richardson_check`` reruns the
    propagation at half step and records the final-state deviation.
    """

    n_osc: int = 16
    h_max: float = 1e-3
    richardson_check: bool = False
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self):
        if self.n_osc < 4:
            raise ContractViolationError(f"n_osc must be >= 4, got {self.n_osc}")
        if not (self.h_max > 0.0 and math.isfinite(self.h_max)):
            raise ContractViolationError(f"h_max must be positive and finite, got {self.h_max}")
        if self.step_cap < 1:
            raise ContractViolationError("step_cap must be positive")

    def max_step(self, freq_bound: float) -> float:
        if not math.isfinite(freq_bound):
            raise ContractViolationError(f"freq_bound is not finite: {freq_bound!r}")
        if freq_bound > 0.0:
            return min(self.h_max, 2.0 * math.pi / (freq_bound * self.n_osc))
        return self.h_max

    def plan(self, freq_bound: float, tau_final: float, label: str = "",
             multiple_of: int = 1) -> tuple[int, float]:
        """Number of steps and exact step for the horizon; enforces the cap."""
        h0 = self.max_step(freq_bound)
        n = max(1, math.ceil(tau_final / h0))
        n = multiple_of * math.ceil(n / multiple_of)
        if n > self.step_cap:
            raise StepLimitError(
                f"propagation needs {n} steps (cap {self.step_cap})"
                + (f" for {label}" if label else "")
            )
        return n, tau_final / n


@dataclass(frozen=True)
class Trajectory:
    """States stored on a strictly increasing tau grid, grid[0] = 0."""

    taus: np.ndarray
    states: np.ndarray
    params_tag: str
    h: float
    n_steps: int
    richardson_error: float | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def _chain_matmul(mats: np.ndarray) -> np.ndarray:
    """Ordered product mats[-1] @ ... @ mats[0] by pairwise halving."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            body, tail = mats[:-1], mats[-1:]
        else:
            body, tail = mats, None
        body = body[1::2] @ body[0::2]
        mats = body if tail is None else np.concatenate([body, tail])
    return mats[0]


def _step_unitaries(gen: Generator, mids: np.ndarray, h: float) -> np.ndarray:
    g = check_square(gen.sample(mids), f"generator samples ({gen.label or 'unlabeled'})")
    if g.shape != mids.shape + (gen.dim, gen.dim):
        raise ContractViolationError(
            f"sampler returned shape {g.shape}, expected {mids.shape + (gen.dim, gen.dim)}"
        )
    defect = skewness_defect(g)
    if defect > 1e-12:
        raise ContractViolationError(
            f"generator samples not skew-Hermitian (defect {defect:.2e},"
            f" {gen.label or 'unlabeled'})"
        )
    return expm_skew(g, h)


def _segment_products(gen: Generator, n_steps: int, h: float, boundaries: np.ndarray) -> list[np.ndarray]:
    """Products of step unitaries over each [boundaries[i], boundaries[i+1]) segment."""
    out = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        seg = np.eye(gen.dim, dtype=complex)
        for k0 in range(int(lo), int(hi), _BATCH):
            k1 = min(int(hi), k0 + _BATCH)
            mids = (np.arange(k0, k1, dtype=float) + 0.5) * h
            seg = _chain_matmul(_step_unitaries(gen, mids, h)) @ seg
        out.append(seg)
    return out


def _stored_boundaries(n_steps: int, sample_stride: int | None, checkpoints: int | None) -> np.ndarray:
    if sample_stride is not None and checkpoints is not None:
        raise ContractViolationError("pass sample_stride or checkpoints, not both")
    if sample_stride is not None:
        if sample_stride < 1:
            raise ContractViolationError("sample_stride must be >= 1")
        idx = np.arange(0, n_steps + 1, sample_stride)
        if idx[-1] != n_steps:
            idx = np.append(idx, n_steps)
        return idx
    n_check = min(n_steps, checkpoints if checkpoints is not None else DEFAULT_CHECKPOINTS)
    return np.rint(np.linspace(0, n_steps, n_check + 1)).astype(np.int64)


def propagate(gen: Generator, psi0, tau_final: float = 1.0,
              policy: StepPolicy = StepPolicy(), sample_stride: int | None = None,
              *, checkpoints: int | None = None, params_tag: str = "") -> Trajectory:
    """Propagate psi0 from tau=0 to tau_final, storing a strided subsample.

    With ``checkpoints`` the step count is rounded up so stored points sit on
    a uniform grid (convenient for comparing runs); with ``sample_stride``
    every stride-th state plus the final one is stored.  Norm drift beyond
    1e-9 raises, all stored states are unit up to that tolerance.
    """
    psi0 = as_state(psi0, gen.dim)
    if not (0.0 < tau_final <= 1.0):
        raise ContractViolationError(f"tau_final must be in (0, 1], got {tau_final}")
    multiple = 1
    if sample_stride is None:
        n0, _ = policy.plan(gen.freq_bound, tau_final, gen.label)
        multiple = min(n0, checkpoints if checkpoints is not None else DEFAULT_CHECKPOINTS)
    n_steps, h = policy.plan(gen.freq_bound, tau_final, gen.label, multiple_of=multiple)
    boundaries = _stored_boundaries(n_steps, sample_stride, checkpoints)

    def run(n: int, dt: float, bnds: np.ndarray) -> np.ndarray:
        states = [psi0.copy()]
        psi = psi0.copy()
        for seg in _segment_products(gen, n, dt, bnds):
            psi = seg @ psi
            states.append(psi)
        return np.array(states)

    states = run(n_steps, h, boundaries)
    rich = None
    if policy.richardson_check:
        fine = run(2 * n_steps, h / 2.0, 2 * boundaries)
        rich = float(np.max(np.linalg.norm(states - fine, axis=1)))
    traj = Trajectory(
        taus=boundaries * h,
        states=states,
        params_tag=params_tag or gen.label,
        h=h,
        n_steps=n_steps,
        richardson_error=rich,
    )
    drift = traj.norm_drift()
    if drift > 1e-9:
        raise IntegratorError(f"norm drift {drift:.2e} exceeds 1e-9 ({gen.label})")
    return traj


def flow_path(gen: Generator, tau_final: float = 1.0, policy: StepPolicy = StepPolicy(),
              checkpoints: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Flow (fundamental unitary) of dX/dtau = G X at uniform checkpoints.

    Returns ``(taus, mats)`` with ``mats[k]`` the flow at ``taus[k]`` and
    ``mats[0] = Id``.
    """
    if not (0.0 < tau_final <= 1.0):
        raise ContractViolationError(f"tau_final must be in (0, 1], got {tau_final}")
    n0, _ = policy.plan(gen.freq_bound, tau_final, gen.label)
    multiple = min(n0, checkpoints)
    n_steps, h = policy.plan(gen.freq_bound, tau_final, gen.label, multiple_of=multiple)
    boundaries = _stored_boundaries(n_steps, None, checkpoints)
    mats = [np.eye(gen.dim, dtype=complex)]
    for seg in _segment_products(gen, n_steps, h, boundaries):
        mats.append(seg @ mats[-1])
    return boundaries * h, np.array(mats)


def flow(gen: Generator, tau_final: float = 1.0, policy: StepPolicy = StepPolicy()) -> np.ndarray:
    """Flow at tau_final (the propagated identity matrix)."""
    _, mats = flow_path(gen, tau_final, policy, checkpoints=1)
    return mats[-1]


def variation_check(gen_a: Generator, gen_b: Generator, tau_final: float = 1.0,
                    policy: StepPolicy = StepPolicy()) -> float:
    """Residual of the flow factorization Flow(A+B) = P W.

    P is the flow of A and W the flow of tau -> P(tau)* B(tau) P(tau); the
    identity is exact, so the return value measures integrator error only
    (<= 1e-6 for smooth bounded inputs at the default policy).
    """
    taus, resid = variation_residual_path(gen_a, gen_b, tau_final, policy, checkpoints=1)
    return float(resid[-1])


def variation_residual_path(gen_a: Generator, gen_b: Generator, tau_final: float = 1.0,
                            policy: StepPolicy = StepPolicy(), checkpoints: int = 64
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Per-checkpoint residual |Flow(A+B)(tau) - P_tau W_tau|."""
    if gen_a.dim != gen_b.dim:
        raise ContractViolationError(f"dimension mismatch: {gen_a.dim} vs {gen_b.dim}")
    dim = gen_a.dim
    fb = gen_a.freq_bound + gen_b.freq_bound
    n0, _ = policy.plan(fb, tau_final)
    multiple = min(n0, checkpoints)
    n_steps, h = policy.plan(fb, tau_final, multiple_of=multiple)
    boundaries = _stored_boundaries(n_steps, None, checkpoints)

    full = np.eye(dim, dtype=complex)
    p = np.eye(dim, dtype=complex)
    w = np.eye(dim, dtype=complex)
    residuals = [0.0]
    taus_out = boundaries * h
    next_b = 1
    for k0 in range(0, n_steps, _BATCH):
        k1 = min(n_steps, k0 + _BATCH)
        mids = (np.arange(k0, k1, dtype=float) + 0.5) * h
        # P on the h/2 grid so its value at each step midpoint is available
        sub = (np.arange(2 * k0, 2 * k1, dtype=float) + 0.5) * (h / 2.0)
        u_half = _step_unitaries(gen_a, sub, h / 2.0)
        u_full = _step_unitaries(gen_a + gen_b, mids, h)
        b_mid = gen_b.sample(mids)
        for i in range(k1 - k0):
            p_mid = u_half[2 * i] @ p
            conj = np.conj(p_mid.T) @ b_mid[i] @ p_mid
            w = expm_skew(conj, h) @ w
            p = u_half[2 * i + 1] @ p_mid
            full = u_full[i] @ full
            k = k0 + i + 1
            while next_b < len(boundaries) and boundaries[next_b] == k:
                residuals.append(float(np.linalg.norm(full - p @ w, 2)))
                next_b += 1
    return taus_out, np.array(residuals)
