"""Initial states: dark states, single-node excitations and sparse states
made orthogonal to chosen slow eigenmodes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleRecipeError, NoDarkStateError, ParameterError, PreconditionError
from .lattice import Hamiltonian, LatticeSpec, balanced_delta, build, lossless_node
from .dynamics import AmplitudeState, CONDITION_LIMIT
from .spectral import SpectralData, eigensolve

OVERLAP_TOL = 1e-8


class LossyExcitationWarning(UserWarning):
    pass


class DarkOrthogonalWarning(UserWarning):
    pass


def dark_state(spec: LatticeSpec) -> AmplitudeState:
    """Unit-norm kernel vector of the lattice Hamiltonian.

    Lossy amplitudes are exactly zero; neighbouring lossless amplitudes obey
    ``alpha_{n+1} = -(v1 / v2) alpha_n``.
    """
    h = build(spec)
    p = spec.params
    if spec.topology == "ring":
        target = balanced_delta(p, spec.n_lossy)
        if abs(spec.delta_value - target) > 1e-12 * max(1.0, abs(target)):
            raise NoDarkStateError(
                f"ring with delta={spec.delta_value:g} is not balanced (needs {target:g})"
            )
    n_alpha = spec.n_lossless
    # build from the larger end to avoid overflow of (v1/v2)**n
    ratio = -p.v1 / p.v2
    k = np.arange(n_alpha)
    if abs(ratio) > 1:
        alphas = (1.0 / ratio) ** (n_alpha - 1 - k)
    else:
        alphas = ratio**k
    psi = np.zeros(spec.dim, dtype=complex)
    psi[0::2] = alphas
    psi /= np.linalg.norm(psi)
    residual = np.linalg.norm(h.matrix @ psi)
    if residual > 1e-10 * h.norm:
        raise NoDarkStateError(f"no dark state: residual {residual:.3e}")
    return AmplitudeState(0.0, psi)


def basis_excitation(spec: LatticeSpec, node: int) -> AmplitudeState:
    """Unit amplitude on one node (1-based, interleaved numbering)."""
    if not 1 <= node <= spec.dim:
        raise ParameterError(f"node {node} out of range 1..{spec.dim}")
    if node % 2 == 0:
        warnings.warn(f"node {node} is a lossy node", LossyExcitationWarning, stacklevel=2)
    psi = np.zeros(spec.dim, dtype=complex)
    psi[node - 1] = 1.0
    return AmplitudeState(0.0, psi)


def middle_node(spec: LatticeSpec) -> int:
    """Central lossless node: ``N`` for odd ``N``, ``N + 1`` for even ``N``
    (open chains); the lossless node opposite ``alpha_1`` on a ring."""
    n = spec.n_lossy
    if spec.topology == "ring":
        return lossless_node(spec, n // 2 + 1)
    return n if n % 2 else n + 1


def opposite_node(spec: LatticeSpec) -> int:
    """Lossless node farthest from the last lossless node."""
    n = spec.n_lossless
    if spec.topology == "ring":
        return lossless_node(spec, (n - 1 + n // 2) % n + 1)
    return 1


def state_for_rule(spec: LatticeSpec, rule: str) -> AmplitudeState:
    rule = rule.replace("_", "-")
    if rule in ("first", "first-node"):
        return basis_excitation(spec, 1)
    if rule in ("middle", "middle-node"):
        return basis_excitation(spec, middle_node(spec))
    if rule in ("last", "last-node"):
        return basis_excitation(spec, lossless_node(spec, spec.n_lossless))
    if rule in ("opposite", "opposite-node"):
        return basis_excitation(spec, opposite_node(spec))
    if rule == "dark":
        return dark_state(spec)
    raise ParameterError(f"unknown state rule {rule!r}")


def central_support(spec: LatticeSpec, size: int) -> tuple[int, ...]:
    """``size`` contiguous lossless nodes centered on the middle of the lattice."""
    n_alpha = spec.n_lossless
    if not 1 <= size <= n_alpha:
        raise ParameterError(f"support size must be within 1..{n_alpha}")
    centre = (middle_node(spec) + 1) // 2  # lossless index
    first = min(max(1, centre - (size - 1) // 2), n_alpha - size + 1)
    return tuple(lossless_node(spec, k) for k in range(first, first + size))


def slowest_modes(spectral: SpectralData, count: int) -> tuple[int, ...]:
    """Indices of the ``count`` non-dark modes with the smallest ``|Im|``."""
    dark = spectral.dark_index
    order = [i for i in range(spectral.dim) if i != dark]
    return tuple(order[:count])


@dataclass(frozen=True)
class StateRecipe:
    support: tuple[int, ...]
    kill_modes: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)  # full length-N vector, unit norm
    killed_overlap: float  # max |<left_n, psi>| over killed modes
    dark_overlap: float  # |<left_dark, psi>|, NaN without a dark mode

    @property
    def state(self) -> AmplitudeState:
        return AmplitudeState(0.0, self.amplitudes)

    @property
    def dark_orthogonal(self) -> bool:
        return not self.dark_overlap > OVERLAP_TOL


def orthogonal_recipe(
    spec: LatticeSpec | Hamiltonian,
    support: Sequence[int],
    kill_modes: Sequence[int],
    spectral: SpectralData | None = None,
    dark_orthogonal: bool = False,
) -> StateRecipe:
    """State living on ``support`` with zero projection on ``kill_modes``.

    The amplitudes span the null space of the killed left eigenvectors
    restricted to the support.  When that null space has more than one
    dimension, the direction with the largest dark-mode overlap is chosen.

    ``len(support) >= len(kill_modes) + 1`` suffices generically; smaller
    supports are accepted because special geometries (a node in the zero set
    of a killed eigenvector) can still admit a solution, and an empty null
    space is reported as :class:`InfeasibleRecipeError`.
    """
    h = spec if isinstance(spec, Hamiltonian) else build(spec)
    spectral = eigensolve(h) if spectral is None else spectral
    support = tuple(int(s) for s in support)
    kill_modes = tuple(int(k) for k in kill_modes)
    if len(set(support)) != len(support) or not all(1 <= s <= h.dim for s in support):
        raise ParameterError(f"invalid support {support} for {h.dim} nodes")
    if not all(0 <= k < h.dim for k in kill_modes):
        raise ParameterError(f"invalid mode indices {kill_modes}")
    dark = spectral.dark_index
    if dark is not None and dark in kill_modes and not dark_orthogonal:
        raise ParameterError("killing the dark mode requires dark_orthogonal=True")
    if spectral.eigbasis_condition >= CONDITION_LIMIT:
        raise PreconditionError("left eigenvectors are ill-defined at an exceptional point")

    cols = np.array(support) - 1
    left = spectral.left_vectors
    a = left[np.ix_(cols, list(kill_modes))].conj().T  # (n_kill, n_support)
    scale = max([np.linalg.norm(left[:, k]) for k in kill_modes] or [1.0])
    if kill_modes:
        _, sv, vh = np.linalg.svd(a)
        rank = int(np.sum(sv > 1e-10 * scale))
        null = vh[rank:].conj().T
    else:
        null = np.eye(len(cols), dtype=complex)
    if null.shape[1] == 0:
        raise InfeasibleRecipeError(
            f"no state on nodes {support} is orthogonal to modes {kill_modes}"
        )
    if dark is not None and null.shape[1] > 1:
        target = null.conj().T @ left[cols, dark]
        x = null @ target
        if np.linalg.norm(x) < 1e-14:
            x = null[:, -1]
    else:
        x = null[:, -1]
    psi = np.zeros(h.dim, dtype=complex)
    psi[cols] = x / np.linalg.norm(x)
    # fix the global phase so the largest amplitude is real and positive
    j = int(np.argmax(np.abs(psi)))
    psi *= abs(psi[j]) / psi[j]

    coeffs = left.conj().T @ psi
    killed = float(max([abs(coeffs[k]) for k in kill_modes] or [0.0]))
    if killed >= OVERLAP_TOL:
        raise InfeasibleRecipeError(f"residual overlap {killed:.3e} with killed modes")
    dark_overlap = float(abs(coeffs[dark])) if dark is not None else float("nan")
    recipe = StateRecipe(support, kill_modes, psi, killed, dark_overlap)
    if recipe.dark_orthogonal and not dark_orthogonal:
        warnings.warn("recipe state is orthogonal to the dark state", DarkOrthogonalWarning, stacklevel=2)
    return recipe
