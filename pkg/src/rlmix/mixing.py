"""Stationary distributions, mixing regimes and mixing times.

The distance used throughout is the plain L1 distance
``sum_j |p_j(t) - p_j_st|`` between the normalized occupation distribution and
its limit.  ``T_mix`` uses the last-crossing convention: the smallest time
after which the distance stays within ``epsilon`` on every later grid point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq

from .dynamics import (
    CONDITION_LIMIT,
    DEFAULT_DT,
    ModeCoefficients,
    Trajectory,
    as_vector,
    decompose,
    default_horizon,
    evolve_integrate,
    spectral_amplitudes,
    time_grid,
)
from .errors import DegenerateInputError, HorizonError, ParameterError, PreconditionError
from .initstate import state_for_rule
from .lattice import Hamiltonian, LatticeSpec, build
from .spectral import SpectralData, eigensolve, lrep_linear_analytic

logger = logging.getLogger(__name__)

CONVENTIONAL = "conventional"
UNCONVENTIONAL = "unconventional"
NON_MIXING = "non-mixing"

ETA = 1e-8
AMBIGUOUS_BAND = (1e-10, 1e-6)
CHUNK = 8192


@dataclass(frozen=True)
class Stationary:
    mix_class: str
    p: np.ndarray | None
    dark_overlap: float  # |c_dark| / ||psi(0)||
    slow_modes: tuple[int, ...]
    ambiguous: bool = False
    shift: complex = 0.0  # eigenvalue used to rescale slow dynamics


@dataclass
class MixReport:
    mix_class: str
    p_stationary: np.ndarray | None
    t_mix: float | None
    epsilon: float
    dark_overlap: float
    times: np.ndarray | None = field(default=None, repr=False)
    distance: np.ndarray | None = field(default=None, repr=False)
    first_crossing: float | None = None
    slow_modes: tuple[int, ...] = ()
    ambiguous: bool = False
    method: str = "spectral"
    t_max: float | None = None
    late_time_discrepancy: float | None = None


def _normalize(pop: np.ndarray) -> np.ndarray:
    return pop / pop.sum()


def stationary_distribution(spectral: SpectralData, coeffs: ModeCoefficients) -> Stationary:
    """Limit of the normalized distribution and the mixing class."""
    c = coeffs.c
    # reference scale is ||psi(0)||: ||c|| diverges next to exceptional points
    norm = np.linalg.norm(spectral.right_vectors @ c)
    if not norm > 0:
        raise DegenerateInputError("initial state is zero")
    if np.all(np.abs(c) <= ETA * norm):
        raise DegenerateInputError("all mode coefficients are below threshold")
    dark = spectral.dark_index
    overlap = abs(c[dark]) / norm if dark is not None else 0.0
    ambiguous = AMBIGUOUS_BAND[0] <= overlap <= AMBIGUOUS_BAND[1]
    if ambiguous:
        logger.warning("dark overlap %.3e lies in the ambiguous band", overlap)

    if dark is not None and overlap > ETA:
        p = _normalize(np.abs(spectral.right_vectors[:, dark]) ** 2)
        return Stationary(CONVENTIONAL, p, overlap, (dark,), ambiguous, 0.0)

    tol = 1e-9 * spectral.gamma
    lam = spectral.eigenvalues
    excited = [n for n in range(len(c)) if n != dark and abs(c[n]) > ETA * norm]
    top = max(lam[n].imag for n in excited)
    slow = tuple(n for n in excited if abs(lam[n].imag - top) <= tol)
    re = lam[list(slow)].real
    if re.max() - re.min() > tol:
        return Stationary(NON_MIXING, None, overlap, slow, ambiguous, complex(np.mean(lam[list(slow)])))
    combo = spectral.right_vectors[:, slow] @ c[list(slow)]
    p = _normalize(np.abs(combo) ** 2)
    return Stationary(UNCONVENTIONAL, p, overlap, slow, ambiguous, complex(np.mean(lam[list(slow)])))


def l1_distance(p_norm: np.ndarray, p_st: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(p_norm - p_st), axis=-1)


def _final_window_decreasing(distance: np.ndarray) -> bool:
    n = len(distance)
    tail = distance[int(0.9 * n):]
    if len(tail) < 4:
        return bool(distance[-1] < distance[0])
    half = len(tail) // 2
    return bool(np.max(tail[half:]) < np.max(tail[:half]))


def crossing_times(
    times: np.ndarray,
    distance: np.ndarray,
    epsilon: float,
    distance_fn: Callable[[float], float] | None = None,
) -> tuple[float | None, float | None]:
    """Last-crossing mixing time and the literal first crossing.

    Raises :class:`HorizonError` if the distance still exceeds ``epsilon`` at
    the end of the grid while decreasing over the final 10% of it.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    above = distance > epsilon
    if not np.any(above):
        return float(times[0]), float(times[0])
    if above[-1]:
        if _final_window_decreasing(distance):
            raise HorizonError(
                f"distance {distance[-1]:.3e} > epsilon at the horizon t={times[-1]:g}",
                float(times[-1]),
            )
        return None, None

    def refine(i):
        t0, t1 = times[i], times[i + 1]
        d0, d1 = distance[i], distance[i + 1]
        if distance_fn is not None:
            f = lambda t: distance_fn(t) - epsilon
            if f(t0) > 0 and f(t1) <= 0:
                return float(brentq(f, t0, t1, xtol=1e-12, rtol=1e-14))
        return float(t0 + (d0 - epsilon) / (d0 - d1) * (t1 - t0))

    last = int(np.flatnonzero(above)[-1])
    first_below = np.flatnonzero(~above)
    first = int(first_below[0]) - 1 if first_below[0] > 0 else None
    t_first = float(times[0]) if first is None else refine(first)
    return refine(last), t_first


def mixing_time(
    traj: Trajectory,
    p_st: np.ndarray | None,
    epsilon: float = 1e-3,
    distance_fn: Callable[[float], float] | None = None,
) -> float | None:
    """Smallest time after which the distance stays within ``epsilon``.

    Returns None for non-mixing input (``p_st`` is None) or when the
    distance does not settle on the grid.
    """
    if p_st is None:
        return None
    distance = l1_distance(traj.p_norm, p_st)
    return crossing_times(traj.times, distance, epsilon, distance_fn)[0]


# ---------------------------------------------------------------------------


class _SpectralDistance:
    """Normalized distribution and its distance evaluated from eigenmodes."""

    def __init__(self, spectral, coeffs, p_st, shift):
        self.spectral, self.coeffs, self.p_st, self.shift = spectral, coeffs, p_st, shift

    def p_norm(self, times):
        amps = spectral_amplitudes(self.spectral, self.coeffs, np.atleast_1d(times), self.shift)
        pop = np.abs(amps) ** 2
        return pop / pop.sum(axis=1, keepdims=True)

    def series(self, times):
        out = np.empty(len(times))
        for start in range(0, len(times), CHUNK):
            sl = slice(start, start + CHUNK)
            out[sl] = l1_distance(self.p_norm(times[sl]), self.p_st)
        return out

    def __call__(self, t):
        return float(l1_distance(self.p_norm([t]), self.p_st)[0])


def _dark_overlap_direct(h_matrix, psi0, spectral):
    """Dark-mode coefficient without inverting an ill-conditioned basis.

    For a complex-symmetric H the left partner of a simple eigenvector
    ``phi`` is ``conj(phi) / (phi^T phi)``.
    """
    dark = spectral.dark_index
    if dark is None:
        return None, 0.0
    phi = spectral.right_vectors[:, dark]
    c_dark = (phi @ psi0) / (phi @ phi)
    return dark, c_dark


TRUST_FLOOR = 1e-20


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _spreads(traj: Trajectory, floor: float) -> tuple[float, float, float]:
    p_total = traj.p_total
    keep = p_total >= floor * p_total[0]
    n = int(np.argmin(keep)) if not np.all(keep) else len(keep)
    if n < 16:
        raise PreconditionError("trajectory decays to rounding level too early to judge mixing")
    p = traj.p_norm[:n]
    w1 = l1_distance(p[n // 2: 3 * n // 4], p[n // 2: 3 * n // 4].mean(axis=0))
    w2 = l1_distance(p[3 * n // 4:], p[3 * n // 4:].mean(axis=0))
    return _rms(w1), _rms(w2), float(np.max(w2))


def detect_regime(
    traj: Trajectory, tol: float = 1e-6, persist: float = 0.9, floor: float = TRUST_FLOOR
) -> str:
    """Trajectory-only mixing detection: ``"mixing"`` or ``"non-mixing"``.

    Compares the RMS spread of the normalized distribution about its window
    mean over the third and fourth quarters of the observation window; an
    oscillation that keeps at least ``persist`` of its spread is non-mixing.
    The RMS is used rather than the maximum because quasi-periodic
    oscillations (several incommensurate frequencies) have a maximum that
    fluctuates from window to window.

    The window ends where ``P_total`` falls below ``floor * P_total(0)``.
    Past that point rounding-level admixtures of the dark mode (population
    ~1e-26 after integration) are no longer negligible against the decaying
    part and would fake convergence to the dark distribution.
    """
    v1, v2, top = _spreads(traj, floor)
    if top < tol:
        return "mixing"
    return "non-mixing" if v2 > persist * v1 else "mixing"


def _kernel_projector(matrix: np.ndarray):
    """Right and left kernel vectors ``(r, l)`` with ``l^H r = 1`` and unit ``r``,
    or ``None`` when the kernel is trivial or not one-dimensional."""
    scale = max(np.linalg.norm(matrix, 2), 1e-300)
    right = null_space(matrix, rcond=1e-10)
    left = null_space(matrix.conj().T, rcond=1e-10)
    if right.shape[1] != 1 or left.shape[1] != 1:
        return None
    r, l = right[:, 0], left[:, 0]
    if np.linalg.norm(matrix @ r) > 1e-10 * scale:
        return None
    return r, l / np.vdot(l, r).conjugate()


def _renormalized_run(h: Hamiltonian, psi, horizon, dt, chunk, strip) -> Trajectory:
    times = time_grid(horizon, dt)
    steps = max(1, int(round(chunk / dt)))
    rows = []
    for start in range(0, len(times) - 1, steps):
        if strip is not None:
            psi = psi - strip[0] * np.vdot(strip[1], psi)
        psi = psi / np.linalg.norm(psi)
        local = times[start: start + steps + 1] - times[start]
        amps = evolve_integrate(psi, h, local).amplitudes
        rows.append(amps[:-1] if start + steps < len(times) - 1 else amps)
        psi = amps[-1]
    return Trajectory(times, np.concatenate(rows))


def trajectory_regime(
    h,
    state0,
    horizon: float | None = None,
    dt: float = DEFAULT_DT,
    chunk: float | None = None,
    max_extension: int = 8,
) -> str:
    """Integrate ``state0`` without any eigendecomposition and classify the
    trajectory with :func:`detect_regime` (default horizon ``200 / gamma``).

    The horizon is covered in chunks of ``chunk`` (default ``10 / gamma``);
    the state is renormalized after each chunk, which leaves the normalized
    distribution unchanged and keeps the integrator's tolerance relative to
    the surviving amplitude.  If the kernel (dark) overlap of the initial
    state is at most ``ETA``, the same threshold the spectral classifier
    uses, the kernel component is treated as zero and removed at every
    renormalization, so integration noise cannot grow into a fake dark limit.

    A non-mixing verdict whose spread still shrank by more than 2% is
    marginal (slow convergence looks like persistence on a short window);
    the horizon is then doubled, up to ``max_extension`` times the start.
    """
    h = h if isinstance(h, Hamiltonian) else Hamiltonian(h)
    base = 200.0 / h.gamma if horizon is None else horizon
    chunk = 10.0 / h.gamma if chunk is None else chunk
    psi = as_vector(state0).astype(complex)
    kernel = _kernel_projector(h.matrix)
    strip = None
    if kernel is not None and abs(np.vdot(kernel[1], psi)) <= ETA * np.linalg.norm(psi):
        strip = kernel
    horizon = base
    while True:
        traj = _renormalized_run(h, psi, horizon, dt, chunk, strip)
        verdict = detect_regime(traj)
        v1, v2, _ = _spreads(traj, TRUST_FLOOR)
        if verdict == "mixing" or v2 >= 0.98 * v1 or horizon * 2 > base * max_extension:
            return verdict
        horizon *= 2


def mixing_report(
    spec: LatticeSpec,
    state0,
    epsilon: float = 1e-3,
    t_max: float | None = None,
    dt: float = DEFAULT_DT,
    max_extension: int = 64,
    spectral: SpectralData | None = None,
    keep_series: bool = True,
) -> MixReport:
    """Classify the regime and compute ``T_mix`` for one lattice and state.

    The horizon starts at ``max(50, 20 N) / gamma`` unless given and is
    doubled (up to ``max_extension`` times the start) while the distance is
    still shrinking at the end.
    """
    h = build(spec)
    spectral = eigensolve(h) if spectral is None else spectral
    psi0 = as_vector(state0)
    gamma = spec.params.gamma
    base = default_horizon(spec.dim, gamma) if t_max is None else float(t_max)

    if spectral.eigbasis_condition < CONDITION_LIMIT:
        coeffs = decompose(psi0, spectral)
        st = stationary_distribution(spectral, coeffs)
        if st.mix_class == NON_MIXING:
            return MixReport(NON_MIXING, None, None, epsilon, st.dark_overlap,
                             slow_modes=st.slow_modes, ambiguous=st.ambiguous, t_max=base)
        dist = _SpectralDistance(spectral, coeffs, st.p, st.shift)
        horizon = base
        while True:
            times = time_grid(horizon, dt)
            series = dist.series(times)
            try:
                t_mix, t_first = crossing_times(times, series, epsilon, dist)
                break
            except HorizonError:
                if horizon * 2 > base * max_extension:
                    raise
                horizon *= 2
        late = times[int(0.8 * len(times)):]
        late_avg = dist.p_norm(late[:: max(1, len(late) // 2000)]).mean(axis=0)
        return MixReport(
            st.mix_class, st.p, t_mix, epsilon, st.dark_overlap,
            times if keep_series else None, series if keep_series else None,
            t_first, st.slow_modes, st.ambiguous, "spectral", horizon,
            float(np.sum(np.abs(late_avg - st.p))),
        )

    # near an exceptional point: integrate instead of decomposing
    dark, c_dark = _dark_overlap_direct(h.matrix, psi0, spectral)
    overlap = abs(c_dark) / np.linalg.norm(psi0) if dark is not None else 0.0
    horizon = base
    while True:
        times = time_grid(horizon, dt)
        traj = evolve_integrate(psi0, h, times)
        p_norm = traj.p_norm
        if dark is not None and overlap > ETA:
            mix_class = CONVENTIONAL
            p_st = np.abs(spectral.right_vectors[:, dark]) ** 2
            p_st = p_st / p_st.sum()
        else:
            valid = ~np.isnan(p_norm[:, 0])
            late = p_norm[valid][int(0.8 * valid.sum()):]
            p_st = late.mean(axis=0)
            mix_class = UNCONVENTIONAL if detect_regime(Trajectory(times[valid], traj.amplitudes[valid])) == "mixing" else NON_MIXING
            if mix_class == NON_MIXING:
                return MixReport(NON_MIXING, None, None, epsilon, overlap, method="integrate", t_max=horizon)
        series = l1_distance(p_norm, p_st)
        series = np.where(np.isnan(series), np.inf, series)
        try:
            t_mix, t_first = crossing_times(times, series, epsilon)
            break
        except HorizonError:
            if horizon * 2 > base * max_extension:
                raise
            horizon *= 2
    return MixReport(
        mix_class, p_st, t_mix, epsilon, overlap,
        times if keep_series else None, series if keep_series else None,
        t_first, (dark,) if dark is not None else (), overlap is not None and AMBIGUOUS_BAND[0] <= overlap <= AMBIGUOUS_BAND[1],
        "integrate", horizon,
    )


# ---------------------------------------------------------------------------
# scaling with lattice size


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float  # RMS residual
    n_points: int


@dataclass
class ScalingResult:
    sizes: list[int]
    t_mix: list[float | None]
    segments: list[str]  # "pre" (v above the LREP) or "post" (v below it)
    lreps: list[float | None]
    post_fit: Fit | None  # log T vs log N
    pre_fit: Fit | None  # T vs log N

    def rows(self):
        for n, t, seg in zip(self.sizes, self.t_mix, self.segments):
            fit = self.post_fit if seg == "post" else self.pre_fit
            yield n, t, seg, (fit.slope if fit else None)


def _fit(x, y) -> Fit | None:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        return None
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(res[0] / len(x)) if len(res) else 0.0
    return Fit(float(coef[0]), float(coef[1]), rms, len(x))


def above_lrep(spec: LatticeSpec, upper: float | None = None, points: int = 120) -> bool:
    """Whether ``v / gamma`` lies beyond every exceptional point of ``spec``."""
    ratio = spec.params.ratio
    if spec.topology in ("dbs", "linear"):
        return ratio >= lrep_linear_analytic(spec.params, spec.n_lossy)
    from .spectral import CLUSTER_TOL, _cluster_count, _sorted_im

    upper = max(4.0 * ratio, float(spec.n_lossy), 2.0) if upper is None else upper
    tol = CLUSTER_TOL * spec.params.gamma
    ref = _cluster_count(_sorted_im(spec, ratio)[0], tol)
    for x in np.geomspace(ratio, upper, points)[1:]:
        if _cluster_count(_sorted_im(spec, x)[0], tol) != ref:
            return False
    return True


def scaling_point(
    spec: LatticeSpec,
    state_rule: str | Callable = "first",
    epsilon: float = 1e-3,
    dt: float = DEFAULT_DT,
    max_extension: int = 64,
) -> tuple[float | None, str, float | None]:
    """``(T_mix, segment, LREP)`` for one lattice size."""
    state = state_rule(spec) if callable(state_rule) else state_for_rule(spec, state_rule)
    report = mixing_report(spec, state, epsilon, dt=dt, max_extension=max_extension, keep_series=False)
    lrep = lrep_linear_analytic(spec.params, spec.n_lossy) if spec.topology != "ring" else None
    return report.t_mix, ("pre" if above_lrep(spec) else "post"), lrep


def assemble_scaling(sizes: Sequence[int], points) -> ScalingResult:
    """Fit the per-size results of :func:`scaling_point`."""
    sizes = [int(n) for n in sizes]
    t_values = [p[0] for p in points]
    segments = [p[1] for p in points]
    lreps = [p[2] for p in points]
    pre = [(n, t) for n, t, g in zip(sizes, t_values, segments) if g == "pre" and t]
    post = [(n, t) for n, t, g in zip(sizes, t_values, segments) if g == "post" and t]
    post_fit = _fit(np.log([n for n, _ in post]), np.log([t for _, t in post])) if post else None
    pre_fit = _fit(np.log([n for n, _ in pre]), [t for _, t in pre]) if pre else None
    return ScalingResult(sizes, t_values, segments, lreps, post_fit, pre_fit)


def scaling_study(
    spec: LatticeSpec,
    sizes: Sequence[int],
    state_rule: str | Callable = "first",
    epsilon: float = 1e-3,
    dt: float = DEFAULT_DT,
    max_extension: int = 64,
) -> ScalingResult:
    """``T_mix`` versus ``n_lossy`` with fits on both sides of the LREP crossing.

    The "post" segment (``v / gamma`` below the LREP) is fitted as
    ``log T`` against ``log N_L``; the "pre" segment as ``T`` against
    ``log N_L``.
    """
    points = [scaling_point(spec.with_size(int(n)), state_rule, epsilon, dt, max_extension) for n in sizes]
    return assemble_scaling(sizes, points)


def quadratic_onset(result: ScalingResult) -> int | None:
    """Smallest size from which every larger size lies in the post-LREP segment."""
    onset = None
    for n, seg in zip(reversed(result.sizes), reversed(result.segments)):
        if seg != "post":
            break
        onset = n
    return onset
