"""Amplitude propagation for ``d psi / dt = -i H psi``.

Two propagators are provided: an exact spectral one (needs a well
conditioned eigenbasis) and an adaptive Runge-Kutta one that also works at
exceptional points.  :func:`evolve` picks between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConditioningError, PreconditionError, SingularityError, StiffnessError
from .lattice import CouplingParams, Hamiltonian, lossy_mask
from .spectral import SpectralData, eigensolve

CONDITION_LIMIT = 1e8
UNDERFLOW = 1e-300
DEFAULT_DT = 0.01


@dataclass(frozen=True)
class AmplitudeState:
    t: float
    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim != 1 or not np.all(np.isfinite(psi)):
            raise PreconditionError("amplitude vector must be 1-D and finite")
        object.__setattr__(self, "psi", psi)

    @property
    def p_total(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2))


def as_vector(state) -> np.ndarray:
    if isinstance(state, AmplitudeState):
        return state.psi
    return AmplitudeState(0.0, state).psi


@dataclass
class Trajectory:
    """Amplitudes on a time grid.

    ``p_norm`` rows are NaN wherever ``p_total`` underflows below 1e-300.
    """

    times: np.ndarray
    amplitudes: np.ndarray = field(repr=False)  # (len(times), N)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @property
    def p_total(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    @property
    def p_norm(self) -> np.ndarray:
        pop = np.abs(self.amplitudes) ** 2
        total = pop.sum(axis=1)
        out = np.full_like(pop, np.nan)
        ok = total > UNDERFLOW
        out[ok] = pop[ok] / total[ok, None]
        return out

    @property
    def states(self) -> list[AmplitudeState]:
        return [AmplitudeState(t, psi) for t, psi in zip(self.times, self.amplitudes)]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class ModeCoefficients:
    """Biorthogonal coefficients ``c_n = <left_n, psi(0)>``."""

    c: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.c)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.c))


def _check_times(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise PreconditionError("times must be a non-negative, strictly increasing grid")
    return times


def default_horizon(dim: int, gamma: float = 1.0) -> float:
    return max(50.0, 20.0 * dim) / gamma


def time_grid(t_max: float, dt: float = DEFAULT_DT) -> np.ndarray:
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def decompose(state0, spectral: SpectralData) -> ModeCoefficients:
    if spectral.eigbasis_condition >= CONDITION_LIMIT:
        raise ConditioningError(
            f"eigenbasis condition {spectral.eigbasis_condition:.3e} is too large for a "
            "spectral decomposition; use evolve_integrate",
            spectral.eigbasis_condition,
        )
    psi = as_vector(state0)
    if len(psi) != spectral.dim:
        raise PreconditionError(f"state has length {len(psi)}, expected {spectral.dim}")
    return ModeCoefficients(spectral.left_vectors.conj().T @ psi)


def spectral_amplitudes(
    spectral: SpectralData, coeffs: ModeCoefficients, times: np.ndarray, shift: complex = 0.0
) -> np.ndarray:
    """``sum_n c_n exp(-i (lambda_n - shift) t) phi_n`` for every time.

    A non-zero ``shift`` rescales all rows by ``exp(-i shift t)``; it leaves
    normalized distributions untouched and keeps them clear of underflow.
    """
    phase = np.exp(-1j * np.outer(times, spectral.eigenvalues - shift))
    return (phase * coeffs.c) @ spectral.right_vectors.T


def evolve_spectral(state0, spectral: SpectralData, times) -> Trajectory:
    times = _check_times(times)
    coeffs = decompose(state0, spectral)
    amps = spectral_amplitudes(spectral, coeffs, times)
    zero = times == 0
    if np.any(zero):
        amps[zero] = as_vector(state0)
    return Trajectory(times, amps)


def evolve_integrate(state0, h: Hamiltonian | np.ndarray, times, rtol: float = 1e-12) -> Trajectory:
    """Adaptive 8th-order Runge-Kutta (DOP853) evaluated at ``times``.

    The per-step relative tolerance defaults to 1e-12: at 1e-10 the global
    error over ``t ~ 50 / gamma`` reaches a few 1e-8 on slow DBS dynamics.
    """
    times = _check_times(times)
    m = np.asarray(h.matrix if isinstance(h, Hamiltonian) else h, dtype=complex)
    psi0 = as_vector(state0)
    if len(psi0) != len(m):
        raise PreconditionError(f"state has length {len(psi0)}, expected {len(m)}")
    amps = np.empty((len(times), len(psi0)), dtype=complex)
    if times[-1] == 0:
        amps[:] = psi0
        return Trajectory(times, amps)
    atol = 1e-13 * max(np.linalg.norm(psi0), 1e-300)
    a = -1j * m
    sol = solve_ivp(
        lambda t, y: a @ y,
        (0.0, times[-1]),
        psi0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if sol.status != 0:
        raise StiffnessError(f"integration failed: {sol.message}", {"t": float(sol.t[-1])})
    amps[:] = sol.y.T
    amps[times == 0] = psi0
    return Trajectory(times, amps)


def evolve(state0, h: Hamiltonian, times, spectral: SpectralData | None = None) -> Trajectory:
    """Spectral propagation when the eigenbasis allows it, integration otherwise."""
    spectral = eigensolve(h) if spectral is None else spectral
    if spectral.eigbasis_condition < CONDITION_LIMIT:
        return evolve_spectral(state0, spectral, times)
    return evolve_integrate(state0, h, times)


def lossy_population(traj: Trajectory) -> np.ndarray:
    mask = lossy_mask(traj.amplitudes.shape[1])
    return np.sum(np.abs(traj.amplitudes[:, mask]) ** 2, axis=1)


# ---------------------------------------------------------------------------
# dissipative beam splitter in closed form


def collective_coords(state, params: CouplingParams) -> tuple[complex, complex]:
    """Bright amplitude ``A`` and dark amplitude ``alpha`` of a DBS state."""
    psi = as_vector(state)
    if len(psi) != 3:
        raise PreconditionError("collective coordinates are defined for the 3-node DBS only")
    c, s = math.cos(params.phi), math.sin(params.phi)
    return psi[0] * c + psi[2] * s, psi[2] * c - psi[0] * s


def dbs_analytic(params: CouplingParams, state0) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form DBS evolution, returned as ``f(times) -> (len(times), 3)``.

    The dark amplitude is conserved; the bright amplitude and the lossy
    node form a two-level system with eigenvalues
    ``-(i/2)(gamma +- sqrt(gamma^2 - 4 v^2))``.
    """
    g, v = params.gamma, params.v
    root = np.sqrt(complex(g * g - 4 * v * v))
    lam_p = -0.5j * (g + root)
    lam_m = -0.5j * (g - root)
    if abs(lam_m - lam_p) < 1e-10 * g:
        raise SingularityError("closed form is singular at the exceptional point v/gamma = 1/2")
    psi0 = as_vector(state0)
    a0, dark = collective_coords(psi0, params)
    b0 = psi0[1]
    c_p = (-v * a0 + (1j * g + lam_m) * b0) / (lam_m - lam_p)
    c_m = (-v * a0 + (1j * g + lam_p) * b0) / (lam_m - lam_p)
    cos_phi, sin_phi = math.cos(params.phi), math.sin(params.phi)

    def evaluate(times) -> np.ndarray:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        e_p, e_m = np.exp(-1j * lam_p * t), np.exp(-1j * lam_m * t)
        beta = c_p * e_p - c_m * e_m
        dbeta = -1j * lam_p * c_p * e_p + 1j * lam_m * c_m * e_m
        bright = 1j / v * (dbeta + g * beta)
        out = np.empty((len(t), 3), dtype=complex)
        out[:, 0] = bright * cos_phi - dark * sin_phi
        out[:, 1] = beta
        out[:, 2] = bright * sin_phi + dark * cos_phi
        return out

    return evaluate
