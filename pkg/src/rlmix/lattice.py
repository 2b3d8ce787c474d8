"""Effective non-Hermitian Hamiltonians of RL lattices (SSH-type lattices with a lossy sublattice).

Nodes are numbered 1-based and interleaved, ``(alpha_1, beta_1, alpha_2,
beta_2, ...)``: odd positions are lossless alpha nodes, even positions are
lossy beta nodes.  Arrays use the same order with 0-based indexing, so the
lossy nodes sit at array indices 1, 3, 5, ...

Three topologies are supported:

* ``dbs``: the three-node dissipative beam splitter (alpha_1, beta_1, alpha_2)
* ``linear``: an open chain with ``n_lossy`` lossy and ``n_lossy + 1``
  lossless nodes
* ``ring``: ``n_lossy`` lossy and ``n_lossy`` lossless nodes, closed by a
  bond ``beta_N -- alpha_1`` of strength ``delta * v2``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ParameterError

TOPOLOGIES = ("dbs", "linear", "ring")

Delta = Union[float, str, None]


@dataclass(frozen=True)
class CouplingParams:
    """Coupling amplitude ``v``, asymmetry angle ``phi`` and loss rate ``gamma``.

    The two bond strengths are ``v1 = v cos(phi)`` and ``v2 = v sin(phi)``.
    """

    v: float
    phi: float = math.pi / 4
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("v", "phi", "gamma"):
            value = getattr(self, name)
            if isinstance(value, complex) or not np.isreal(value):
                raise ParameterError(f"{name} must be real, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.v <= 0:
            raise ParameterError(f"coupling v must be positive, got {self.v}")
        if self.gamma <= 0:
            raise ParameterError(f"loss rate gamma must be positive, got {self.gamma}")
        if not 0 < self.phi < math.pi / 2:
            raise ParameterError(f"phi must lie in (0, pi/2), got {self.phi}")

    # pi/2 - phi is exact for phi >= pi/4, so evaluating the larger of the two
    # through the complementary angle makes v1 == v2 bit-for-bit at phi = pi/4
    @property
    def v1(self) -> float:
        if self.phi <= math.pi / 4:
            return self.v * math.cos(self.phi)
        return self.v * math.sin(math.pi / 2 - self.phi)

    @property
    def v2(self) -> float:
        if self.phi >= math.pi / 4:
            return self.v * math.cos(math.pi / 2 - self.phi)
        return self.v * math.sin(self.phi)

    @property
    def ratio(self) -> float:
        """``v / gamma``."""
        return self.v / self.gamma

    def with_ratio(self, ratio: float) -> "CouplingParams":
        return replace(self, v=ratio * self.gamma)


@dataclass(frozen=True)
class LatticeSpec:
    """Topology plus couplings.

    ``delta`` is only used for rings; it may be a number or the string
    ``"balanced"``, in which case the value that keeps a dark state is
    computed on demand.
    """

    topology: str
    params: CouplingParams
    n_lossy: int = 1
    delta: Delta = None

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ParameterError(f"unknown topology {self.topology!r}")
        if isinstance(self.n_lossy, bool) or int(self.n_lossy) != self.n_lossy:
            raise ParameterError(f"n_lossy must be an integer, got {self.n_lossy!r}")
        object.__setattr__(self, "n_lossy", int(self.n_lossy))
        if self.topology == "dbs" and self.n_lossy != 1:
            raise ParameterError("the DBS has exactly one lossy node")
        if self.topology == "linear" and self.n_lossy < 1:
            raise ParameterError(f"linear chain needs n_lossy >= 1, got {self.n_lossy}")
        if self.topology == "ring":
            if self.n_lossy < 2:
                raise ParameterError(f"ring needs n_lossy >= 2, got {self.n_lossy}")
            if self.delta is None:
                object.__setattr__(self, "delta", "balanced")
            if isinstance(self.delta, str) and self.delta != "balanced":
                raise ParameterError(f"delta must be a number or 'balanced', got {self.delta!r}")

    @property
    def dim(self) -> int:
        if self.topology == "ring":
            return 2 * self.n_lossy
        return 2 * self.n_lossy + 1

    @property
    def n_lossless(self) -> int:
        return self.dim - self.n_lossy

    @property
    def delta_value(self) -> float | None:
        if self.topology != "ring":
            return None
        if self.delta == "balanced":
            return balanced_delta(self.params, self.n_lossy)
        return float(self.delta)

    def with_ratio(self, ratio: float) -> "LatticeSpec":
        return replace(self, params=self.params.with_ratio(ratio))

    def with_size(self, n_lossy: int) -> "LatticeSpec":
        return replace(self, n_lossy=n_lossy)

    def to_dict(self) -> dict:
        out = {
            "topology": self.topology,
            "n_lossy": self.n_lossy,
            "v": self.params.v,
            "phi": self.params.phi,
            "gamma": self.params.gamma,
        }
        if self.topology == "ring":
            out["delta"] = self.delta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeSpec":
        data = dict(data)
        topology = data.pop("topology", None)
        if topology is None:
            raise ParameterError("lattice block needs a 'topology'")
        if "phi" in data and "phi_pi" in data:
            raise ParameterError("give either phi or phi_pi, not both")
        phi = data.pop("phi", None)
        phi_pi = data.pop("phi_pi", None)
        if phi is None:
            phi = math.pi * (0.25 if phi_pi is None else float(phi_pi))
        if "v" not in data:
            raise ParameterError("lattice block needs 'v'")
        params = CouplingParams(
            v=float(data.pop("v")), phi=float(phi), gamma=float(data.pop("gamma", 1.0))
        )
        n_lossy = data.pop("n_lossy", 1)
        delta = data.pop("delta", None)
        if data:
            raise ParameterError(f"unknown lattice keys: {sorted(data)}")
        if isinstance(delta, (int, float)) and not isinstance(delta, bool):
            delta = float(delta)
        return cls(topology=topology, params=params, n_lossy=n_lossy, delta=delta)


@dataclass(frozen=True)
class Hamiltonian:
    """Dense complex-symmetric matrix plus the LatticeSpec it was built from."""

    matrix: np.ndarray = field(repr=False)
    spec: LatticeSpec | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError(f"Hamiltonian must be square, got shape {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def gamma(self) -> float:
        if self.spec is not None:
            return self.spec.params.gamma
        loss = -np.imag(np.diag(self.matrix))
        return float(loss.max()) if loss.max() > 0 else 1.0

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def lossy_mask(self) -> np.ndarray:
        return lossy_mask(self.dim)


def lossy_mask(dim: int) -> np.ndarray:
    """Boolean mask of the beta (lossy) sublattice in array order."""
    mask = np.zeros(dim, dtype=bool)
    mask[1::2] = True
    return mask


def chain_matrix(v1: float, v2: float, gamma: float, n_lossy: int) -> np.ndarray:
    """Raw open-chain matrix without parameter validation.

    Used directly only where a degenerate configuration is wanted on purpose
    (e.g. ``gamma = 0`` to check that the evolution becomes unitary).
    """
    dim = 2 * n_lossy + 1
    h = np.zeros((dim, dim), dtype=complex)
    for n in range(n_lossy):
        b = 2 * n + 1
        h[b, b] = -1j * gamma
        h[b - 1, b] = h[b, b - 1] = v1
        h[b, b + 1] = h[b + 1, b] = v2
    return h


def build_dbs(params: CouplingParams) -> Hamiltonian:
    spec = LatticeSpec("dbs", params, 1)
    return Hamiltonian(chain_matrix(params.v1, params.v2, params.gamma, 1), spec)


def build_linear(params: CouplingParams, n_lossy: int) -> Hamiltonian:
    spec = LatticeSpec("linear", params, n_lossy)
    return Hamiltonian(chain_matrix(params.v1, params.v2, params.gamma, n_lossy), spec)


def build_ring(params: CouplingParams, n_lossy: int, delta: Delta = "balanced") -> Hamiltonian:
    spec = LatticeSpec("ring", params, n_lossy, delta)
    dim = 2 * n_lossy
    h = chain_matrix(params.v1, params.v2, params.gamma, n_lossy)[:dim, :dim].copy()
    h[0, dim - 1] = h[dim - 1, 0] = spec.delta_value * params.v2
    return Hamiltonian(h, spec)


def balanced_delta(params: CouplingParams, n_lossy: int) -> float:
    """Ring closing weight that keeps a zero eigenvalue.

    Solves ``v1**N + (-1)**(N+1) * delta * v2**N = 0`` for ``delta``.
    """
    if n_lossy < 2:
        raise ParameterError(f"ring needs n_lossy >= 2, got {n_lossy}")
    if params.v2 == 0:
        raise ParameterError("balanced delta is singular for v2 = 0")
    ratio = math.cos(params.phi) / math.sin(params.phi)
    return (-1) ** n_lossy * ratio**n_lossy


def build(spec: LatticeSpec) -> Hamiltonian:
    if spec.topology == "dbs":
        return build_dbs(spec.params)
    if spec.topology == "linear":
        return build_linear(spec.params, spec.n_lossy)
    return build_ring(spec.params, spec.n_lossy, spec.delta)


def lossless_node(spec: LatticeSpec, k: int) -> int:
    """1-based node index of the ``k``-th lossless (alpha) node."""
    if not 1 <= k <= spec.n_lossless:
        raise ParameterError(f"lossless node {k} out of range 1..{spec.n_lossless}")
    return 2 * k - 1
