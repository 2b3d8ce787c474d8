import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import chain_spectrum, dbs_eigenvalues, match_sorted, ring_n3_symmetric_spectrum
from rlmix.errors import ParameterError, PreconditionError
from rlmix.lattice import CouplingParams, LatticeSpec, build
from rlmix.spectral import (
    analytic_spectrum_linear,
    classify_degeneracy,
    eigensolve,
    ep_abscissas_linear,
    ep_scan,
    find_clusters,
    gap_vs_size,
    lrep,
    lrep_linear_analytic,
    mu,
)

SQRT6 = math.sqrt(6)


def dbs(v, phi=math.pi / 4, gamma=1.0):
    return LatticeSpec("dbs", CouplingParams(v * gamma, phi, gamma))


def test_dbs_below_ep():
    sd = eigensolve(build(dbs(0.4)))
    assert np.allclose(sd.eigenvalues, [0, -0.2j, -0.8j], atol=1e-12)
    assert sd.dark_index == 0


def test_dbs_above_ep():
    sd = eigensolve(build(dbs(0.6)))
    assert match_sorted(sd.eigenvalues, dbs_eigenvalues(0.6)) < 1e-12
    assert abs(sd.eigenvalues[1].real) == pytest.approx(0.331662, abs=1e-6)
    assert sd.eigenvalues[1].imag == pytest.approx(-0.5)


def test_sort_order_ties_by_real_part():
    sd = eigensolve(build(dbs(0.6)))
    assert sd.eigenvalues[1].real < sd.eigenvalues[2].real


def test_ring_three_symmetric_spectrum():
    sd = eigensolve(build(LatticeSpec("ring", CouplingParams(0.3), 3)))
    assert match_sorted(sd.eigenvalues, ring_n3_symmetric_spectrum(0.3)) < 1e-7


def test_biorthogonality_and_residual():
    sd = eigensolve(build(LatticeSpec("linear", CouplingParams(1.3, 0.21 * math.pi), 6)))
    gram = sd.left_vectors.conj().T @ sd.right_vectors
    assert np.allclose(gram, np.eye(sd.dim), atol=1e-8)
    assert sd.residual <= 1e-9 * sd.norm
    assert sd.left_residual <= 1e-9 * sd.norm


def test_left_vectors_agree_with_transpose_route():
    # complex symmetry: the left partner of right_k is conj(right_k) / (right_k^T right_k)
    sd = eigensolve(build(LatticeSpec("linear", CouplingParams(0.7, 0.3 * math.pi), 4)))
    for k in range(sd.dim):
        r = sd.right_vectors[:, k]
        assert np.allclose(sd.left_vectors[:, k], r.conj() / (r @ r).conj(), atol=1e-9)


def test_mu_value():
    assert mu(math.pi / 4, 9)[-1] == pytest.approx(0.0489435, abs=1e-7)


def test_analytic_single_lossy_node_is_dbs():
    p = CouplingParams(0.35)
    assert match_sorted(analytic_spectrum_linear(p, 1), dbs_eigenvalues(0.35)) < 1e-14


def test_analytic_against_independent_formula():
    p = CouplingParams(2.2, 0.1 * math.pi, 1.4)
    assert match_sorted(analytic_spectrum_linear(p, 7), chain_spectrum(2.2, 0.1 * math.pi, 1.4, 7)) < 1e-13


@pytest.mark.parametrize("n", range(1, 13))
def test_analytic_matches_numeric_grid(n):
    for ratio in np.linspace(0.1, 4, 5):
        for phi in np.linspace(0.06, 0.44, 5) * math.pi:
            p = CouplingParams(ratio, phi)
            num = eigensolve(build(LatticeSpec("linear", p, n))).eigenvalues
            assert match_sorted(num, analytic_spectrum_linear(p, n)) < 1e-10


def test_lrep_closed_form():
    # 1 / (2 sqrt(1 - cos(pi/10))) evaluated independently
    assert lrep_linear_analytic(CouplingParams(1.0), 9) == pytest.approx(2.2600735106701, abs=1e-12)
    assert lrep_linear_analytic(CouplingParams(1.0), 100) / (100 / (math.sqrt(2) * math.pi)) == pytest.approx(1, abs=0.02)
    assert lrep_linear_analytic(CouplingParams(1.0, 1e-9), 50) == pytest.approx(0.5, abs=1e-8)


def test_ep_scan_dbs():
    scan = ep_scan(dbs(0.5), np.linspace(0.1, 1.0, 50))
    assert len(scan.events) == 1
    assert scan.lrep == pytest.approx(0.5, abs=1e-6)
    assert scan.events[0].kind == "exceptional"


def test_ep_scan_chain_finds_all_points():
    spec = LatticeSpec("linear", CouplingParams(1.0), 9)
    scan = ep_scan(spec, np.linspace(0.05, 3.0, 300))
    expected = np.sort(ep_abscissas_linear(spec.params, 9))
    assert len(scan.events) == 9
    assert np.allclose(np.sort(scan.abscissas), expected, atol=1e-8)
    assert scan.lrep == pytest.approx(2.2600735106701, abs=1e-8)


def test_ep_scan_ring_three():
    scan = ep_scan(LatticeSpec("ring", CouplingParams(0.5), 3), np.linspace(0.1, 1.0, 46))
    assert scan.lrep == pytest.approx(1 / SQRT6, abs=1e-8)
    event = scan.events[-1]
    assert event.cluster_size == 4
    assert event.geometric_multiplicity == 2
    assert event.kind == "exceptional"


def test_ep_scan_warns_without_events():
    scan = ep_scan(dbs(0.5), [0.1, 0.2, 0.3])
    assert scan.lrep is None and scan.warnings


@pytest.mark.parametrize("grid", [[0.1, 0.2], [0.1, 0.3, 0.2]])
def test_ep_scan_rejects_bad_grid(grid):
    with pytest.raises(ParameterError):
        ep_scan(dbs(0.5), grid)


def test_lrep_dispatch():
    assert lrep(dbs(0.3)) == pytest.approx(0.5)
    assert lrep(LatticeSpec("ring", CouplingParams(0.5), 3)) == pytest.approx(1 / SQRT6, abs=1e-6)


def test_defectiveness_localizes_at_eps():
    spec = LatticeSpec("linear", CouplingParams(1.0), 4)
    for x in ep_abscissas_linear(spec.params, 4):
        at = eigensolve(build(spec.with_ratio(x))).eigbasis_condition
        assert at > 1e6
        for dx in (-0.05, 0.05):
            assert eigensolve(build(spec.with_ratio(x + dx))).eigbasis_condition < 1e5


def test_ring_diabolic_pairs_below_ep():
    h = build(LatticeSpec("ring", CouplingParams(0.2), 3))
    sd = eigensolve(h)
    pairs = [c for c in find_clusters(sd.eigenvalues, 1e-6) if len(c) == 2]
    assert len(pairs) == 2
    for c in pairs:
        rep = classify_degeneracy(h, c, sd)
        assert rep.kind == "diabolic" and rep.geometric_multiplicity == 2
        assert rep.angle == pytest.approx(math.pi / 2, abs=1e-6)


def test_dbs_ep_is_exceptional():
    h = build(dbs(0.5))
    sd = eigensolve(h)
    rep = classify_degeneracy(h, [1, 2], sd)
    assert rep.kind == "exceptional" and rep.geometric_multiplicity == 1


def test_ring_ep_is_two_jordan_blocks():
    h = build(LatticeSpec("ring", CouplingParams(1 / SQRT6), 3))
    scan = ep_scan(LatticeSpec("ring", CouplingParams(0.5), 3), np.linspace(0.3, 0.5, 5))
    event = scan.events[0]
    assert event.geometric_multiplicity == 2 and event.cluster_size == 4
    assert "pair of exceptional points" in _describe(event)
    assert h.dim == 6


def _describe(event):
    from rlmix.spectral import DegeneracyReport

    return DegeneracyReport(event.abscissa, tuple(range(event.cluster_size)), event.eigenvalue, event.kind,
                            event.geometric_multiplicity, 0.0).description


def test_classify_rejects_split_cluster():
    h = build(dbs(0.3))
    with pytest.raises(PreconditionError):
        classify_degeneracy(h, [1, 2])


def test_asymmetric_ring_splits_degeneracy():
    sd = eigensolve(build(LatticeSpec("ring", CouplingParams(0.2, 0.2 * math.pi), 3)))
    assert all(len(c) == 1 for c in find_clusters(sd.eigenvalues, 1e-6))


def test_gap_vs_size_chain_matches_closed_form():
    spec = LatticeSpec("linear", CouplingParams(2.0), 2)
    out = gap_vs_size(spec, [4, 8, 16, 32])
    for n, g in out:
        w = analytic_spectrum_linear(spec.params, n)
        assert g == pytest.approx(np.sort(np.abs(w.imag))[1], rel=1e-9)
    gaps = [g for _, g in out]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_gap_symmetric_ring_shrinks():
    gaps = dict(gap_vs_size(LatticeSpec("ring", CouplingParams(2.0), 2), [20, 40, 60]))
    assert gaps[40] < 0.5 * gaps[20] and gaps[60] < gaps[40]


def test_gap_vs_size_requires_ascending():
    with pytest.raises(ParameterError):
        gap_vs_size(LatticeSpec("ring", CouplingParams(2.0), 2), [5, 3])


def test_ring_lrep_grows_with_asymmetry_at_ten():
    grid = np.linspace(0.05, 8, 400)
    sym = ep_scan(LatticeSpec("ring", CouplingParams(1.0), 10), grid).lrep
    asym = ep_scan(LatticeSpec("ring", CouplingParams(1.0, 0.22 * math.pi), 10), grid).lrep
    assert asym > sym


spec_strategy = st.builds(
    lambda topo, r, phi, g, n: LatticeSpec(topo, CouplingParams(r * g, phi, g), n if topo != "dbs" else 1),
    st.sampled_from(["dbs", "linear", "ring"]),
    st.floats(0.05, 5.0),
    st.floats(0.15 * math.pi, 0.35 * math.pi),
    st.floats(0.3, 3.0),
    st.integers(2, 12),
)


@given(spec_strategy)
def test_spectrum_invariants(spec):
    sd = eigensolve(build(spec))
    g = spec.params.gamma
    assert np.max(sd.eigenvalues.imag) <= 1e-10 * g
    assert np.min(sd.eigenvalues.imag) >= -g * (1 + 1e-10)
    assert np.sum(sd.eigenvalues) == pytest.approx(-1j * spec.n_lossy * g, rel=1e-10, abs=1e-10 * g)
    if sd.well_conditioned:
        assert sd.residual <= 1e-9 * sd.norm
        gram = sd.left_vectors.conj().T @ sd.right_vectors
        assert np.max(np.abs(gram - np.eye(sd.dim))) < 1e-8
    assert np.all(np.diff(np.round(np.abs(sd.eigenvalues.imag), 9)) >= 0)


@given(st.floats(0.05, 3.0))
def test_ring_three_has_loss_rate_eigenvalue(ratio):
    w = eigensolve(build(LatticeSpec("ring", CouplingParams(ratio), 3))).eigenvalues
    assert np.min(np.abs(w + 1j)) < 1e-9
