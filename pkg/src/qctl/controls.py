"""Chirped control pulses for driven two-level systems.

A pulse is built from a smooth envelope/phase profile ``(v, phi)`` on
tau in [0, 1] and scale parameters ``(epsilon, alpha, E, delta)``.  The
real control is

    u(tau) = (2/eps) v(tau) cos(2 E tau / eps^(alpha+1) + phi(tau)/eps)

and all carrier phases here are multiples of the half-angle

    Theta(tau) = E tau / eps^(alpha+1) + phi(tau) / (2 eps).

Sign conventions are fixed by requiring the rotating-frame change of
variables to be an exact algebraic identity: with the diagonal frame
U(tau) = diag(e^{+i Theta}, e^{-i Theta}),

    U G_lab U* + (dU/dtau) U*  =  (1/eps) A + B_eps,

where A = -i [[-phi'/2, v], [v, phi'/2]] is the slow rotating-frame
generator and B_eps the zero-diagonal counter-rotating remainder with
carrier e^{4 i Theta}.  The co-rotating complex control compatible with
the same frame is w = (v/eps) e^{-2 i Theta}.

Carrier arguments reach ~1e5 rad at eps = 0.01, where naive double
evaluation of the linear phase loses ~11 bits; the linear part is reduced
mod 2*pi in extended precision before any cos/exp.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .schrodinger import Generator
from .smallmat import ContractViolationError

_LD = np.longdouble
_TWO_PI_LD = 2 * _LD(np.pi)


def wrap_linear_phase(rate: float | np.longdouble, taus, dtype=float) -> np.ndarray:
    """(rate * tau) mod 2*pi, accumulated in extended precision."""
    t = np.asarray(taus, dtype=_LD)
    wrapped = np.mod(_LD(rate) * t, _TWO_PI_LD)
    return np.asarray(wrapped, dtype=dtype)


@dataclass(frozen=True)
class TrigPoly:
    """a0 + sum_k a_k sin(k pi tau) + b_k cos(k pi tau); closed under d/dtau."""

    a0: float = 0.0
    sin_coeffs: tuple[float, ...] = ()
    cos_coeffs: tuple[float, ...] = ()

    def __call__(self, taus):
        taus = np.asarray(taus)
        out = np.full(taus.shape, self.a0, dtype=taus.dtype if taus.dtype.kind == "f" else float)
        for k, a in enumerate(self.sin_coeffs, start=1):
            if a:
                out = out + a * np.sin(k * np.pi * taus)
        for k, b in enumerate(self.cos_coeffs, start=1):
            if b:
                out = out + b * np.cos(k * np.pi * taus)
        return out

    def derivative(self) -> "TrigPoly":
        n = max(len(self.sin_coeffs), len(self.cos_coeffs))
        sin_c = [0.0] * n
        cos_c = [0.0] * n
        for k, a in enumerate(self.sin_coeffs, start=1):
            cos_c[k - 1] += k * np.pi * a
        for k, b in enumerate(self.cos_coeffs, start=1):
            sin_c[k - 1] -= k * np.pi * b
        return TrigPoly(0.0, tuple(sin_c), tuple(cos_c))

    def sup_bound(self) -> float:
        return abs(self.a0) + sum(map(abs, self.sin_coeffs)) + sum(map(abs, self.cos_coeffs))

    def at_zero(self) -> float:
        return self.a0 + sum(self.cos_coeffs)


@dataclass(frozen=True)
class ControlProfile:
    """Envelope/phase pair (v, phi) with the analytic derivative phi'.

    phi(0) must vanish.  ``v_sup`` and ``dphi_sup`` are analytic sup-norm
    bounds used to size integration steps; phi' is supplied explicitly
    because differentiation noise would pollute the gap condition and the
    slow reference dynamics.
    """

    name: str
    v: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    v_sup: float
    dphi_sup: float

    def __post_init__(self):
        phi0 = float(self.phi(np.asarray(0.0)))
        if abs(phi0) > 1e-12:
            raise ContractViolationError(f"profile {self.name!r}: phi(0) = {phi0!r}, must be 0")
        if not (math.isfinite(self.v_sup) and math.isfinite(self.dphi_sup)):
            raise ContractViolationError(f"profile {self.name!r}: non-finite sup bounds")

    @classmethod
    def from_trig(cls, name: str, v_poly: TrigPoly, phi_poly: TrigPoly) -> "ControlProfile":
        if abs(phi_poly.at_zero()) > 1e-12:
            raise ContractViolationError(f"profile {name!r}: phi(0) = {phi_poly.at_zero()!r}, must be 0")
        return cls(
            name=name,
            v=v_poly,
            phi=phi_poly,
            dphi=phi_poly.derivative(),
            v_sup=v_poly.sup_bound(),
            dphi_sup=phi_poly.derivative().sup_bound(),
        )

    def with_coupling_scale(self, delta: float) -> "ControlProfile":
        """Profile with v replaced by delta*v (phase untouched)."""
        base_v = self.v
        return ControlProfile(
            name=f"{self.name}*{delta:g}",
            v=lambda taus: delta * base_v(taus),
            phi=self.phi,
            dphi=self.dphi,
            v_sup=abs(delta) * self.v_sup,
            dphi_sup=self.dphi_sup,
        )


def gap_premise(profile: ControlProfile, samples: int = 4097) -> float:
    """min over a dense tau grid of v^2 + phi'^2 / 4 (> 0 is the gap premise)."""
    taus = np.linspace(0.0, 1.0, samples)
    return float(np.min(profile.v(taus) ** 2 + profile.dphi(taus) ** 2 / 4.0))


def is_transfer_profile(profile: ControlProfile, samples: int = 4097, tol: float = 1e-12) -> bool:
    """v(0) = v(1) = 0, phi'(0) phi'(1) < 0, v nonzero on the open interval."""
    v0 = float(profile.v(np.asarray(0.0)))
    v1 = float(profile.v(np.asarray(1.0)))
    if abs(v0) > tol or abs(v1) > tol:
        return False
    if float(profile.dphi(np.asarray(0.0))) * float(profile.dphi(np.asarray(1.0))) >= 0.0:
        return False
    interior = np.linspace(0.0, 1.0, samples)[1:-1]
    return bool(np.all(np.abs(profile.v(interior)) > 0.0))


_SINE = ControlProfile.from_trig(
    "sine",
    v_poly=TrigPoly(sin_coeffs=(1.0,)),
    phi_poly=TrigPoly(sin_coeffs=(-1.0 / np.pi,)),
)

_FLAT = ControlProfile.from_trig(
    "flat",
    v_poly=TrigPoly(a0=1.0),
    phi_poly=TrigPoly(),
)

# v == 0, phi' == -1: purely diagonal dynamics, useful as a null control.
_FLAT_PHASE_ONLY = ControlProfile(
    name="flat-phase-only",
    v=lambda taus: np.zeros_like(np.asarray(taus, dtype=float)),
    phi=lambda taus: -np.asarray(taus),
    dphi=lambda taus: np.full_like(np.asarray(taus, dtype=float), -1.0),
    v_sup=0.0,
    dphi_sup=1.0,
)

_CATALOG = {p.name: p for p in (_SINE, _FLAT, _FLAT_PHASE_ONLY)}


def profile_catalog() -> dict[str, ControlProfile]:
    return dict(_CATALOG)


def get_profile(name: str) -> ControlProfile:
    try:
        return _CATALOG[name]
    except KeyError:
        raise ContractViolationError(
            f"unknown profile {name!r}; available: {', '.join(sorted(_CATALOG))}"
        ) from None


@dataclass(frozen=True)
class PulseParams:
    """Scale parameters of a synthesized pulse.

    epsilon in (0, 1]; alpha > 1 is the validity regime (smaller values are
    accepted for exploration and raise a warning); E is the half energy
    splitting; delta scales only the control coupling.
    """

    epsilon: float
    alpha: float
    E: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ContractViolationError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not (self.E > 0.0 and math.isfinite(self.E)):
            raise ContractViolationError(f"E must be positive, got {self.E}")
        if self.delta < 0.0:
            raise ContractViolationError(f"delta must be >= 0, got {self.delta}")
        if self.alpha <= 1.0:
            warnings.warn(
                f"alpha = {self.alpha} is outside the validity regime alpha > 1; "
                "runs are exploratory",
                stacklevel=2,
            )

    @property
    def carrier_scale(self) -> float:
        """1 / eps^(alpha+1), the carrier rate per unit E."""
        return drift_rate(self, 1.0)

    @property
    def lab_time(self) -> float:
        """Total lab-frame duration T = eps^-(alpha+1) (metadata only)."""
        return self.carrier_scale

    def tag(self) -> str:
        return (f"eps={self.epsilon:g},alpha={self.alpha:g},E={self.E:g},delta={self.delta:g}")


def drift_rate(params: PulseParams, scale: float) -> float:
    """scale / eps^(alpha+1), rounded once to float64.

    Every consumer (drift diagonals, carrier phases, frame derivatives) must
    share this one rounded rate; mixing double and extended-precision powers
    of eps would desynchronize the frame identity at the 1e-11 level.
    """
    return float(_LD(scale) / _LD(params.epsilon) ** _LD(params.alpha + 1.0))


def carrier_phase(profile: ControlProfile, params: PulseParams, taus,
                  carrier_E: float | None = None, dtype=float) -> np.ndarray:
    """Half-angle Theta(tau) = cE*tau/eps^(alpha+1) + phi(tau)/(2 eps), wrapped."""
    taus_t = np.asarray(taus, dtype=dtype)
    c_e = params.E if carrier_E is None else carrier_E
    lin = wrap_linear_phase(_LD(drift_rate(params, c_e)), taus_t, dtype=dtype)
    return lin + profile.phi(taus_t) / (np.asarray(2.0, dtype=dtype) * np.asarray(params.epsilon, dtype=dtype))


def carrier_rate(profile: ControlProfile, params: PulseParams, taus,
                 carrier_E: float | None = None) -> np.ndarray:
    """dTheta/dtau = cE/eps^(alpha+1) + phi'(tau)/(2 eps)."""
    taus = np.asarray(taus, dtype=float)
    c_e = params.E if carrier_E is None else carrier_E
    return drift_rate(params, c_e) + profile.dphi(taus) / (2.0 * params.epsilon)


def real_pulse(profile: ControlProfile, params: PulseParams,
               carrier_E: float | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """The real control u(tau) = (2/eps) v(tau) cos(2 Theta(tau))."""

    def u(taus):
        taus = np.asarray(taus, dtype=float)
        return (2.0 / params.epsilon) * profile.v(taus) * np.cos(
            2.0 * carrier_phase(profile, params, taus, carrier_E)
        )

    return u


def lab_generator(profile: ControlProfile, params: PulseParams,
                  carrier_E: float | None = None) -> Generator:
    """Lab-frame generator -i [[E', delta*u], [delta*u, -E']], E' = E/eps^(alpha+1).

    ``carrier_E`` detunes the pulse carrier from the drift E (drift keeps E,
    the cosine runs at carrier_E); default is resonance, carrier_E = E.
    """
    u = real_pulse(profile, params, carrier_E)
    e_diag = drift_rate(params, params.E)
    delta = params.delta

    def sample(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        coupling = delta * u(taus)
        g = np.zeros(taus.shape + (2, 2), dtype=complex)
        g[..., 0, 0] = -1j * e_diag
        g[..., 1, 1] = 1j * e_diag
        g[..., 0, 1] = -1j * coupling
        g[..., 1, 0] = -1j * coupling
        return g

    c_e = params.E if carrier_E is None else carrier_E
    freq = (2.0 * max(params.E, c_e) * params.carrier_scale
            + profile.dphi_sup / params.epsilon
            + 2.0 * delta * profile.v_sup / params.epsilon)
    return Generator(dim=2, sample=sample, freq_bound=freq,
                     label=f"lab({profile.name};{params.tag()})")


def complex_generator(profile: ControlProfile, params: PulseParams) -> Generator:
    """Co-rotating complex-control generator -i [[E', w], [conj(w), -E']].

    w(tau) = (v/eps) e^{-2 i Theta(tau)}; the sign of the exponent is the one
    under which the rotating frame maps this system to the slow generator
    exactly (see module docstring).
    """
    e_diag = drift_rate(params, params.E)

    def sample(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        w = (profile.v(taus) / params.epsilon) * np.exp(
            -2j * carrier_phase(profile, params, taus)
        )
        g = np.zeros(taus.shape + (2, 2), dtype=complex)
        g[..., 0, 0] = -1j * e_diag
        g[..., 1, 1] = 1j * e_diag
        g[..., 0, 1] = -1j * w
        g[..., 1, 0] = -1j * np.conj(w)
        return g

    freq = (2.0 * params.E * params.carrier_scale
            + profile.dphi_sup / params.epsilon
            + 2.0 * params.delta * profile.v_sup / params.epsilon)
    return Generator(dim=2, sample=sample, freq_bound=freq,
                     label=f"complex({profile.name};{params.tag()})")


def rotating_frame(profile: ControlProfile, params: PulseParams
                   ) -> Callable[[np.ndarray], np.ndarray]:
    """Diagonal frame U(tau) = diag(e^{+i Theta}, e^{-i Theta}); U(0) = Id."""

    def frame(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        theta = carrier_phase(profile, params, taus)
        u = np.zeros(taus.shape + (2, 2), dtype=complex)
        u[..., 0, 0] = np.exp(1j * theta)
        u[..., 1, 1] = np.exp(-1j * theta)
        return u

    return frame


def rwa_generator(profile: ControlProfile) -> Generator:
    """Slow rotating-frame generator A(tau) = -i [[-phi'/2, v], [v, phi'/2]]."""

    def sample(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        vv = profile.v(taus)
        dd = profile.dphi(taus) / 2.0
        g = np.zeros(taus.shape + (2, 2), dtype=complex)
        g[..., 0, 0] = 1j * dd
        g[..., 1, 1] = -1j * dd
        g[..., 0, 1] = -1j * vv
        g[..., 1, 0] = -1j * vv
        return g

    return Generator(dim=2, sample=sample,
                     freq_bound=profile.dphi_sup / 2.0 + profile.v_sup,
                     label=f"rwa({profile.name})")


def rwa_residual(profile: ControlProfile, params: PulseParams) -> Generator:
    """Counter-rotating remainder B_eps: zero diagonal, carrier e^{4 i Theta}.

    Entry (1,2) is -(i/eps) v(tau) e^{i (4 E tau / eps^(alpha+1) + 2 phi/eps)}.
    """

    def sample(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        b12 = (-1j / params.epsilon) * profile.v(taus) * np.exp(
            4j * carrier_phase(profile, params, taus)
        )
        g = np.zeros(taus.shape + (2, 2), dtype=complex)
        g[..., 0, 1] = b12
        g[..., 1, 0] = -np.conj(b12)
        return g

    freq = (4.0 * params.E * params.carrier_scale
            + 2.0 * profile.dphi_sup / params.epsilon
            + 2.0 * profile.v_sup / params.epsilon)
    return Generator(dim=2, sample=sample, freq_bound=freq,
                     label=f"residual({profile.name};{params.tag()})")


def rotated_generator(profile: ControlProfile, params: PulseParams) -> Generator:
    """(1/eps) A + B_eps, the frame image of the lab dynamics at delta = 1."""
    g = rwa_generator(profile).scaled(1.0 / params.epsilon) + rwa_residual(profile, params)
    return Generator(dim=2, sample=g.sample, freq_bound=g.freq_bound,
                     label=f"rotated({profile.name};{params.tag()})")


@dataclass(frozen=True)
class PerturbationTerm:
    """One upper-triangle entry (j < k, 0-based) of a fast zero-diagonal field."""

    j: int
    k: int
    beta: float
    v: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    v_sup: float
    dh_sup: float

    def __post_init__(self):
        if self.beta == 0.0 or not math.isfinite(self.beta):
            raise ContractViolationError(f"beta must be nonzero and finite, got {self.beta!r}")
        if not 0 <= self.j < self.k:
            raise ContractViolationError(f"need 0 <= j < k, got ({self.j}, {self.k})")


@dataclass(frozen=True)
class PerturbationSpec:
    """Zero-diagonal skew-Hermitian family with entries
    (-i/eps) v_jk(tau) e^{i (beta_jk tau / eps^(alpha+1) + h_jk(tau)/eps)}.
    """

    dim: int
    alpha: float
    terms: tuple[PerturbationTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if t.k >= self.dim:
                raise ContractViolationError(f"term ({t.j},{t.k}) outside dimension {self.dim}")

    @classmethod
    def from_profile(cls, profile: ControlProfile, params: PulseParams) -> "PerturbationSpec":
        """The two-level counter-rotating remainder as a spec:
        beta = 4E, v_01 = v, h_01 = 2 phi."""
        return cls(
            dim=2,
            alpha=params.alpha,
            terms=(PerturbationTerm(
                j=0, k=1, beta=4.0 * params.E,
                v=profile.v,
                h=lambda taus: 2.0 * profile.phi(np.asarray(taus, dtype=float)),
                v_sup=profile.v_sup,
                dh_sup=2.0 * profile.dphi_sup,
            ),),
        )


def perturbation_from_spec(spec: PerturbationSpec, epsilon: float) -> Generator:
    """Instantiate the fast zero-diagonal generator at a given epsilon."""
    if not (0.0 < epsilon <= 1.0):
        raise ContractViolationError(f"epsilon must be in (0, 1], got {epsilon}")
    rates = [(_LD(t.beta) / _LD(epsilon) ** _LD(spec.alpha + 1.0)) for t in spec.terms]

    def sample(taus: np.ndarray) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        g = np.zeros(taus.shape + (spec.dim, spec.dim), dtype=complex)
        for t, rate in zip(spec.terms, rates):
            phase = wrap_linear_phase(rate, taus) + t.h(taus) / epsilon
            entry = (-1j / epsilon) * t.v(taus) * np.exp(1j * phase)
            g[..., t.j, t.k] = entry
            g[..., t.k, t.j] = -np.conj(entry)
        return g

    beta_max = max((abs(t.beta) for t in spec.terms), default=0.0)
    dh_max = max((t.dh_sup for t in spec.terms), default=0.0)
    v_max = max((t.v_sup for t in spec.terms), default=0.0)
    freq = (beta_max / epsilon ** (spec.alpha + 1.0) + dh_max / epsilon
            + 2.0 * v_max / epsilon)
    return Generator(dim=spec.dim, sample=sample, freq_bound=freq,
                     label=f"perturbation(n={spec.dim},alpha={spec.alpha:g},eps={epsilon:g})")
