import math
import warnings

import numpy as np
import pytest

from rlmix.dynamics import decompose, evolve_spectral, time_grid
from rlmix.errors import (
    InfeasibleRecipeError,
    NoDarkStateError,
    ParameterError,
    PreconditionError,
)
from rlmix.initstate import (
    DarkOrthogonalWarning,
    LossyExcitationWarning,
    basis_excitation,
    central_support,
    dark_state,
    middle_node,
    orthogonal_recipe,
    slowest_modes,
    state_for_rule,
)
from rlmix.lattice import CouplingParams, Hamiltonian, LatticeSpec, balanced_delta, build
from rlmix.mixing import mixing_report
from rlmix.spectral import eigensolve


def linear(v, n, phi=math.pi / 4):
    return LatticeSpec("linear", CouplingParams(v, phi), n)


# -- dark states -------------------------------------------------------------


def test_symmetric_dark_state():
    psi = dark_state(linear(1.0, 9)).psi
    alphas = psi[0::2]
    assert np.allclose(np.abs(alphas), 1 / math.sqrt(10), atol=1e-14)
    assert np.all(np.sign(alphas[1:].real) == -np.sign(alphas[:-1].real))
    assert np.all(psi[1::2] == 0)


@pytest.mark.parametrize("spec", [
    linear(1.0, 7, 0.1 * math.pi),
    linear(2.5, 12, 0.3 * math.pi),
    LatticeSpec("ring", CouplingParams(1.3, 0.23 * math.pi), 4),
    LatticeSpec("ring", CouplingParams(0.4, 0.3 * math.pi), 7),
])
def test_dark_state_residual_and_profile(spec):
    h = build(spec)
    psi = dark_state(spec).psi
    assert np.linalg.norm(h.matrix @ psi) <= 1e-10 * h.norm
    assert np.all(psi[1::2] == 0)
    assert np.linalg.norm(psi) == pytest.approx(1)
    mags = np.abs(psi[0::2])
    # geometric profile with ratio cot(phi)
    assert np.allclose(mags[1:] / mags[:-1], 1 / math.tan(spec.params.phi), rtol=1e-10)


def test_strongly_asymmetric_dark_state_is_edge_localized():
    mags = np.abs(dark_state(linear(1.0, 9, 0.1 * math.pi)).psi[0::2]) ** 2
    assert mags[-1] > 0.8
    assert mags[0] < 1e-8


def test_unbalanced_ring_has_no_dark_state():
    p = CouplingParams(1.0, 0.3 * math.pi)
    spec = LatticeSpec("ring", p, 4, delta=1.01 * balanced_delta(p, 4))
    with pytest.raises(NoDarkStateError):
        dark_state(spec)


# -- basis excitations -------------------------------------------------------


def test_basis_excitation():
    spec = linear(1.0, 3)
    assert np.array_equal(basis_excitation(spec, 1).psi, np.eye(7)[0])
    with pytest.raises(ParameterError):
        basis_excitation(spec, 8)
    with pytest.raises(ParameterError):
        basis_excitation(spec, 0)
    with pytest.warns(LossyExcitationWarning):
        basis_excitation(spec, 2)


@pytest.mark.parametrize("n, node", [(1, 1), (3, 3), (19, 19), (2, 3), (20, 21)])
def test_middle_node(n, node):
    spec = linear(1.0, n)
    assert middle_node(spec) == node
    assert node % 2 == 1
    assert state_for_rule(spec, "middle").psi[node - 1] == 1


def test_state_rules():
    spec = linear(1.0, 4)
    assert state_for_rule(spec, "last").psi[8] == 1
    assert np.allclose(state_for_rule(spec, "dark").psi, dark_state(spec).psi)
    with pytest.raises(ParameterError):
        state_for_rule(spec, "nowhere")


def test_central_support():
    spec = linear(3.0, 9)
    assert central_support(spec, 3) == (7, 9, 11)
    assert central_support(spec, 1) == (9,)
    with pytest.raises(ParameterError):
        central_support(spec, 11)


# -- orthogonal recipes ------------------------------------------------------


def test_even_chain_single_node_recipe_is_feasible():
    spec = linear(3.0, 20)
    sd = eigensolve(build(spec))
    kill = slowest_modes(sd, 1)
    recipe = orthogonal_recipe(spec, [middle_node(spec)], kill, sd)
    assert recipe.killed_overlap < 1e-8
    assert abs(sd.right_vectors[middle_node(spec) - 1, kill[0]]) < 1e-8


def test_odd_chain_single_node_recipe_is_infeasible():
    spec = linear(3.0, 19)
    sd = eigensolve(build(spec))
    with pytest.raises(InfeasibleRecipeError):
        orthogonal_recipe(spec, [middle_node(spec)], slowest_modes(sd, 1), sd)


def test_three_node_recipe_speeds_up_mixing():
    spec = linear(3.0, 9)
    sd = eigensolve(build(spec))
    kill = slowest_modes(sd, 2)
    recipe = orthogonal_recipe(spec, central_support(spec, 3), kill, sd)
    c = decompose(recipe.amplitudes, sd).c
    assert max(abs(c[k]) for k in kill) < 1e-8
    assert recipe.dark_overlap > 1e-8
    t_recipe = mixing_report(spec, recipe.state).t_mix
    t_edge = mixing_report(spec, basis_excitation(spec, 1)).t_mix
    assert t_recipe < t_edge


def test_recipe_decays_at_slowest_surviving_rate():
    spec = linear(3.0, 9)
    sd = eigensolve(build(spec))
    kill = slowest_modes(sd, 2)
    recipe = orthogonal_recipe(spec, central_support(spec, 3), kill, sd)
    c = decompose(recipe.amplitudes, sd).c
    dark = sd.dark_index
    times = time_grid(60.0, 0.1)
    traj = evolve_spectral(recipe.amplitudes, sd, times)
    rest = traj.amplitudes - c[dark] * sd.right_vectors[:, dark]
    decay = np.log(np.sum(np.abs(rest) ** 2, axis=1))
    late = times >= 40
    slope = np.polyfit(times[late], decay[late], 1)[0]
    surviving = [n for n in range(sd.dim) if n != dark and n not in kill and abs(c[n]) > 1e-8]
    expected = 2 * max(sd.eigenvalues[n].imag for n in surviving)
    assert slope == pytest.approx(expected, rel=0.05)


@pytest.mark.parametrize("scale", [0.01, 2.5, 40.0])
def test_recipe_invariant_under_scaling(scale):
    spec = linear(2.0, 6, 0.3 * math.pi)
    sd = eigensolve(build(spec))
    kill = slowest_modes(sd, 2)
    support = central_support(spec, 3)
    a = orthogonal_recipe(spec, support, kill, sd).amplitudes
    scaled = Hamiltonian(scale * build(spec).matrix)
    sds = eigensolve(scaled)
    b = orthogonal_recipe(scaled, support, slowest_modes(sds, 2), sds).amplitudes
    assert np.max(np.abs(a - b)) < 1e-10


def test_recipe_preconditions():
    spec = linear(1.0, 3)
    sd = eigensolve(build(spec))
    with pytest.raises(InfeasibleRecipeError):
        orthogonal_recipe(spec, [1, 3], slowest_modes(sd, 2), sd)
    with pytest.raises(ParameterError):
        orthogonal_recipe(spec, [1, 3], [sd.dark_index], sd)
    with pytest.raises(ParameterError):
        orthogonal_recipe(spec, [1, 1], [], sd)
    ep = LatticeSpec("dbs", CouplingParams(0.5))
    with pytest.raises(PreconditionError):
        orthogonal_recipe(ep, [1, 3], [1])


def test_dark_orthogonal_flag():
    spec = LatticeSpec("dbs", CouplingParams(0.3))
    with pytest.warns(DarkOrthogonalWarning):
        recipe = orthogonal_recipe(spec, [2], [])
    assert recipe.dark_orthogonal
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        quiet = orthogonal_recipe(spec, [2], [], dark_orthogonal=True)
    assert quiet.dark_orthogonal
