"""Spectra, exceptional points and degeneracy classification."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import ParameterError, PreconditionError, SolverError
from .lattice import CouplingParams, Hamiltonian, LatticeSpec, build

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-6  # times gamma
RANK_TOL = 1e-7  # times ||H||
EP_XTOL = 1e-12
EP_RADIUS = 1e-4  # times gamma; eigenvalue spread allowed at a refined EP


@dataclass(frozen=True)
class SpectralData:
    """Sorted eigendecomposition of a Hamiltonian.

    Eigenvalues are sorted by ascending ``|Im|`` with ties broken by
    ascending ``Re``.  Right vectors are unit-norm columns; left vectors are
    columns normalized so that ``left[:, k].conj() @ right[:, k] == 1``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray = field(repr=False)
    left_vectors: np.ndarray = field(repr=False)
    residual: float
    left_residual: float
    eigbasis_condition: float
    gamma: float
    norm: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def dark_index(self) -> int | None:
        """Index of the zero mode, or None if the spectrum has no kernel."""
        k = int(np.argmin(np.abs(self.eigenvalues)))
        if abs(self.eigenvalues[k]) < 1e-8 * max(self.gamma, self.norm):
            return k
        return None

    @property
    def well_conditioned(self) -> bool:
        return self.eigbasis_condition < 1e8


def sort_key_order(eigenvalues: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Permutation sorting by ascending |Im|, ties (to 1e-10*scale) by Re."""
    eigenvalues = np.asarray(eigenvalues)
    im_key = np.round(np.abs(eigenvalues.imag) / (1e-10 * scale))
    return np.lexsort((eigenvalues.real, im_key))


def _orthonormalize_degenerate(h, w, vr, tol):
    """Replace eigenvector blocks of exactly repeated eigenvalues by an
    orthonormal basis of the same eigenspace (keeps diabolic points well
    conditioned).  Blocks that are not a genuine eigenspace are left alone."""
    n = len(w)
    used = np.zeros(n, dtype=bool)
    for i in range(n):
        if used[i]:
            continue
        group = np.flatnonzero((np.abs(w - w[i]) < tol) & ~used)
        used[group] = True
        if len(group) < 2:
            continue
        q, r = np.linalg.qr(vr[:, group])
        if np.min(np.abs(np.diag(r))) < 1e-6:
            continue
        lam = w[group].mean()
        if np.linalg.norm(h @ q - lam * q) <= 1e-9 * max(1.0, np.linalg.norm(h, 2)):
            vr[:, group] = q
            w[group] = lam
    return w, vr


def eigensolve(h: Hamiltonian | np.ndarray, gamma: float | None = None) -> SpectralData:
    """Full non-Hermitian eigendecomposition with biorthogonal left vectors.

    Left vectors are the rows of the inverse of the right-vector matrix, i.e.
    the dual basis.  Their eigen-residual is measured and stored in
    ``left_residual``.
    """
    if not isinstance(h, Hamiltonian):
        h = Hamiltonian(h)
    m = np.asarray(h.matrix)
    if not np.all(np.isfinite(m)):
        raise PreconditionError("Hamiltonian has non-finite entries")
    gamma = h.gamma if gamma is None else gamma
    norm = h.norm
    try:
        w, vr = scipy.linalg.eig(m, right=True, left=False, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigendecomposition failed: {exc}", {"dim": h.dim}) from exc
    w = w.astype(complex)
    vr = vr.astype(complex)
    w, vr = _orthonormalize_degenerate(m, w, vr, 1e-9 * max(norm, gamma))
    vr = vr / np.linalg.norm(vr, axis=0)

    order = sort_key_order(w, max(norm, gamma))
    w = w[order]
    vr = vr[:, order]

    try:
        dual = np.linalg.solve(vr, np.eye(len(w), dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SolverError("right eigenvectors are linearly dependent", {"dim": h.dim}) from exc
    vl = dual.conj().T

    residual = float(np.max(np.linalg.norm(m @ vr - vr * w, axis=0)))
    left_rows = vl.conj().T
    left_res = np.linalg.norm(left_rows @ m - w[:, None] * left_rows, axis=1)
    left_res = left_res / np.maximum(np.linalg.norm(left_rows, axis=1), 1e-300)
    cond = float(np.linalg.cond(vr))
    if not np.isfinite(cond):
        cond = math.inf
    return SpectralData(
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=vl,
        residual=residual,
        left_residual=float(np.max(left_res)),
        eigbasis_condition=cond,
        gamma=float(gamma),
        norm=norm,
    )


def eigenvalues(spec: LatticeSpec) -> np.ndarray:
    """Sorted eigenvalues only (cheaper than :func:`eigensolve`)."""
    h = build(spec)
    w = scipy.linalg.eigvals(h.matrix, check_finite=False)
    return w[sort_key_order(w, max(h.norm, spec.params.gamma))]


def mu(phi: float, n_lossy: int) -> np.ndarray:
    """``mu_k = 1 + sin(2 phi) cos(k pi / (N + 1))`` for ``k = 1..N``."""
    k = np.arange(1, n_lossy + 1)
    return 1.0 + math.sin(2 * phi) * np.cos(k * np.pi / (n_lossy + 1))


def analytic_spectrum_linear(params: CouplingParams, n_lossy: int) -> np.ndarray:
    """Closed-form spectrum of the open chain, sorted like :func:`eigensolve`.

    Returns zero plus ``-(i/2)(gamma +- sqrt(gamma^2 - 4 v^2 mu_k))``.
    """
    if n_lossy < 1:
        raise ParameterError(f"n_lossy must be >= 1, got {n_lossy}")
    g = params.gamma
    root = np.sqrt((g**2 - 4 * params.v**2 * mu(params.phi, n_lossy)).astype(complex))
    lam = np.concatenate([[0.0], -0.5j * (g + root), -0.5j * (g - root)])
    return lam[sort_key_order(lam, g)]


def lrep_linear_analytic(params: CouplingParams, n_lossy: int) -> float:
    """``v / gamma`` of the largest-ratio exceptional point of the open chain."""
    if n_lossy < 1:
        raise ParameterError(f"n_lossy must be >= 1, got {n_lossy}")
    mu_min = 1.0 - math.sin(2 * params.phi) * math.cos(math.pi / (n_lossy + 1))
    return 1.0 / (2.0 * math.sqrt(mu_min))


def ep_abscissas_linear(params: CouplingParams, n_lossy: int) -> np.ndarray:
    """All exceptional points ``v / gamma`` of the open chain, ascending."""
    return np.sort(1.0 / (2.0 * np.sqrt(mu(params.phi, n_lossy))))


# ---------------------------------------------------------------------------
# degeneracies


@dataclass(frozen=True)
class DegeneracyReport:
    ratio: float | None
    indices: tuple
    eigenvalue: complex
    kind: str  # "exceptional" | "diabolic"
    geometric_multiplicity: int
    angle: float  # smallest angle (rad) between cluster eigenvectors

    @property
    def cluster_size(self) -> int:
        return len(self.indices)

    @property
    def description(self) -> str:
        if self.kind == "diabolic":
            return f"diabolic point ({self.cluster_size} independent eigenvectors)"
        if self.geometric_multiplicity > 1:
            return (
                f"pair of exceptional points with different eigenvectors"
                if self.geometric_multiplicity == 2
                else f"{self.geometric_multiplicity} exceptional points with different eigenvectors"
            )
        return "exceptional point"


def geometric_multiplicity(matrix: np.ndarray, lam: complex, tau: float = RANK_TOL) -> int:
    """Number of singular values of ``H - lam I`` below ``tau * ||H||``."""
    sv = np.linalg.svd(matrix - lam * np.eye(len(matrix)), compute_uv=False)
    return int(np.sum(sv < tau * np.linalg.norm(matrix, 2)))


def _min_angle(vectors: np.ndarray) -> float:
    n = vectors.shape[1]
    best = math.pi / 2
    for i in range(n):
        for j in range(i + 1, n):
            c = abs(np.vdot(vectors[:, i], vectors[:, j]))
            c /= np.linalg.norm(vectors[:, i]) * np.linalg.norm(vectors[:, j])
            best = min(best, math.acos(min(1.0, c)))
    return best


def _classify(matrix, lams, vectors, ratio, indices) -> DegeneracyReport:
    lam = complex(np.mean(lams))
    gm = geometric_multiplicity(matrix, lam)
    kind = "diabolic" if gm == len(indices) else "exceptional"
    return DegeneracyReport(
        ratio=ratio,
        indices=tuple(int(i) for i in indices),
        eigenvalue=lam,
        kind=kind,
        geometric_multiplicity=gm,
        angle=_min_angle(vectors),
    )


def classify_degeneracy(h: Hamiltonian, cluster: Sequence[int], spectral: SpectralData | None = None) -> DegeneracyReport:
    """Decide whether a cluster of eigenvalues is exceptional or diabolic.

    ``cluster`` holds indices into the sorted spectrum of ``h``.
    """
    spectral = eigensolve(h) if spectral is None else spectral
    cluster = list(cluster)
    if len(cluster) < 2:
        raise PreconditionError("a degeneracy needs at least two eigenvalues")
    lams = spectral.eigenvalues[cluster]
    spread = np.max(np.abs(lams[:, None] - lams[None, :]))
    if spread > CLUSTER_TOL * spectral.gamma:
        raise PreconditionError(
            f"cluster is not degenerate: eigenvalue spread {spread:.3e} exceeds "
            f"{CLUSTER_TOL:g} * gamma"
        )
    ratio = h.spec.params.ratio if h.spec is not None else None
    return _classify(h.matrix, lams, spectral.right_vectors[:, cluster], ratio, cluster)


def find_clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    """Groups of indices whose complex values chain together within ``tol``."""
    values = np.asarray(values)
    n = len(values)
    parent = list(range(n))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[root(i)] = root(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


# ---------------------------------------------------------------------------
# exceptional point scan


@dataclass(frozen=True)
class EpEvent:
    abscissa: float
    cluster_size: int
    kind: str
    geometric_multiplicity: int
    eigenvalue: complex


@dataclass
class EpScan:
    grid: np.ndarray
    im_parts: np.ndarray  # (len(grid), N) sorted ascending
    events: list[EpEvent]
    warnings: list[str] = field(default_factory=list)

    @property
    def abscissas(self) -> np.ndarray:
        return np.array([e.abscissa for e in self.events])

    @property
    def lrep(self) -> float | None:
        """Largest coalescence abscissa, None if nothing was detected."""
        if not self.events:
            return None
        return max(e.abscissa for e in self.events)


def _sorted_im(spec: LatticeSpec, ratio: float) -> tuple[np.ndarray, np.ndarray]:
    h = build(spec.with_ratio(ratio))
    w = scipy.linalg.eigvals(h.matrix, check_finite=False)
    order = np.argsort(w.imag, kind="stable")
    return w[order].imag, w[order]


def _cluster_count(im: np.ndarray, tol: float) -> int:
    return 1 + int(np.sum(np.diff(im) > tol))


def _refine(spec, lo, hi, count_lo, tol, xtol, max_iter=80):
    for _ in range(max_iter):
        if hi - lo <= xtol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if _cluster_count(_sorted_im(spec, mid)[0], tol) == count_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _event_at(spec, lo, hi, tol) -> EpEvent:
    im_lo, w_lo = _sorted_im(spec, lo)
    im_hi, w_hi = _sorted_im(spec, hi)
    gap_lo = np.diff(im_lo) > tol
    gap_hi = np.diff(im_hi) > tol
    closing = np.flatnonzero(gap_lo & ~gap_hi)
    if len(closing):
        merged_w, merged_x, ref_im = w_hi, hi, im_lo
    else:
        closing = np.flatnonzero(gap_hi & ~gap_lo)
        merged_w, merged_x, ref_im = w_lo, lo, im_hi
    gamma = spec.params.gamma
    targets = [0.5 * (ref_im[i] + ref_im[i + 1]) for i in closing]
    members: set[int] = set()
    for group in find_clusters(merged_w, EP_RADIUS * gamma):
        if len(group) < 2:
            continue
        im_mean = float(np.mean(merged_w[group].imag))
        if any(abs(im_mean - t) < 10 * tol for t in targets):
            members.update(group)
    abscissa = 0.5 * (lo + hi)
    if not members:
        return EpEvent(abscissa, 2 * max(1, len(closing)), "exceptional", 1, complex(np.nan))
    idx = sorted(members)
    matrix = build(spec.with_ratio(merged_x)).matrix
    lam = complex(np.mean(merged_w[idx]))
    gm = max(1, geometric_multiplicity(matrix, lam))
    kind = "diabolic" if gm == len(idx) else "exceptional"
    return EpEvent(abscissa, len(idx), kind, gm, lam)


def ep_scan(spec: LatticeSpec, grid: Iterable[float], refine: bool = True, xtol: float = EP_XTOL) -> EpScan:
    """Locate coalescences of the Im-parts of the spectrum along ``v / gamma``.

    At each grid point the sorted Im-parts are grouped with tolerance
    ``1e-6 * gamma``; wherever the number of groups changes between
    neighbouring points the change is bisected down to ``xtol``.
    """
    grid = np.asarray(list(grid), dtype=float)
    if grid.ndim != 1 or len(grid) < 3:
        raise ParameterError("ep_scan needs a grid of at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("ep_scan grid must be strictly increasing")
    tol = CLUSTER_TOL * spec.params.gamma
    im_parts = np.empty((len(grid), spec.dim))
    counts = []
    for i, x in enumerate(grid):
        im_parts[i] = _sorted_im(spec, x)[0]
        counts.append(_cluster_count(im_parts[i], tol))

    events: list[EpEvent] = []
    warnings: list[str] = []
    for i in range(len(grid) - 1):
        lo, count_lo = grid[i], counts[i]
        end, count_end = grid[i + 1], counts[i + 1]
        if count_lo == count_end:
            continue
        if not refine:
            events.append(EpEvent(0.5 * (lo + end), 0, "unrefined", 0, complex(np.nan)))
            continue
        for _ in range(4 * spec.dim):
            a, b = _refine(spec, lo, end, count_lo, tol, xtol)
            events.append(_event_at(spec, a, b, tol))
            count_b = _cluster_count(_sorted_im(spec, b)[0], tol)
            if count_b == count_end:
                break
            lo, count_lo = b, count_b
        else:
            warnings.append(f"too many coalescences between {grid[i]:g} and {grid[i + 1]:g}")
    if not events:
        warnings.append(
            "no coalescence bracketed on the grid; the grid may be too coarse or miss the EPs"
        )
    for w in warnings:
        logger.warning("ep_scan: %s", w)
    return EpScan(grid=grid, im_parts=im_parts, events=events, warnings=warnings)


def default_grid(spec: LatticeSpec, points: int = 200, upper: float | None = None) -> np.ndarray:
    if upper is None:
        upper = max(1.5, 0.5 * spec.n_lossy)
    return np.linspace(0.02, upper, points)


def lrep(spec: LatticeSpec, grid: Iterable[float] | None = None) -> float | None:
    """LREP of any lattice: analytic for open chains, scanned otherwise."""
    if spec.topology in ("dbs", "linear"):
        return lrep_linear_analytic(spec.params, spec.n_lossy)
    scan = ep_scan(spec, default_grid(spec) if grid is None else grid)
    return scan.lrep


def spectral_gap(spec: LatticeSpec) -> float:
    """Second-smallest ``|Im lambda|``, i.e. the decay rate just above the dark state."""
    w = eigenvalues(spec)
    return float(np.sort(np.abs(w.imag))[1])


def gap_vs_size(spec: LatticeSpec, sizes: Sequence[int]) -> list[tuple[int, float]]:
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ParameterError("sizes must be ascending")
    return [(n, spectral_gap(spec.with_size(n))) for n in sizes]
