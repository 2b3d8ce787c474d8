"""Canned reproduction jobs, one per figure panel group.

Each job writes the CSV files needed to replot its panels into ``out`` and
returns a summary dict with the quantities the panels are meant to show.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import io
from .cli import cmd_mix, cmd_scaling, cmd_spectrum, parallel_map
from .config import ExperimentConfig
from .errors import ConfigError
from .lattice import CouplingParams, LatticeSpec, build
from .spectral import classify_degeneracy, ep_scan, eigensolve, find_clusters, gap_vs_size, lrep_linear_analytic
from .initstate import dark_state, middle_node

PI = math.pi
SQRT_HALF = math.sqrt(0.5)


def _cfg(lattice: dict, **blocks) -> ExperimentConfig:
    return ExperimentConfig.from_dict({"lattice": lattice, **blocks})


def _dbs(v: float) -> dict:
    return {"topology": "dbs", "n_lossy": 1, "v": v, "phi_pi": 0.25}


# ---------------------------------------------------------------------------


def fig1b(out: Path, workers=None, plot=False) -> dict:
    """Conventional mixing of the symmetric DBS from the first node."""
    return cmd_mix(_cfg(_dbs(0.4), initial_state={"node": 1}), out, workers, plot)


def fig1c(out: Path, workers=None, plot=False) -> dict:
    """Equal excitation of both lossless DBS nodes below and above the EP,
    plus first-node excitation at the same couplings for contrast."""
    summary = {}
    for v in (0.4, 0.6):
        for label, state in (("both", {"amplitudes": [SQRT_HALF, 0.0, SQRT_HALF]}), ("first", {"node": 1})):
            sub = out / f"{label}_v{v}"
            summary[f"{label}_v{v}"] = cmd_mix(_cfg(_dbs(v), initial_state=state, run={"t_max": 100.0}),
                                               sub, workers, plot)
    return summary


def fig1mix(out: Path, workers=None, plot=False) -> dict:
    """DBS mixing time versus v / Gamma with the eigenvalue branches."""
    sweep = {"parameter": "v", "start": 0.1, "stop": 1.0, "steps": 91}
    summary = cmd_mix(_cfg(_dbs(0.5), initial_state={"node": 1}, sweep=sweep), out, workers, plot)
    spec = cmd_spectrum(_cfg(_dbs(0.5), sweep=dict(sweep, steps=200)), out, workers, plot)
    return {"mix": summary, "spectrum": spec}


def fig2b(out: Path, workers=None, plot=False) -> dict:
    """Dark-state distributions of the 19-node chain for three asymmetries."""
    phis = (0.25, 0.21, 0.1)
    cols = {}
    for phi in phis:
        spec = LatticeSpec("linear", CouplingParams(1.0, phi * PI), 9)
        cols[phi] = np.abs(dark_state(spec).psi) ** 2
    header = ["node_index"] + [f"p_st_phi_{phi}pi" for phi in phis]
    rows = [[j + 1] + [cols[phi][j] for phi in phis] for j in range(19)]
    io.write_csv(out / "stationary.csv", header, rows)
    if plot:
        from .plotting import bar_chart

        bar_chart(out / "stationary.svg", list(range(1, 20)),
                  {f"phi={phi}pi": cols[phi] for phi in phis}, "node", "p_st")
    return {f"phi_{phi}pi": list(cols[phi]) for phi in phis}


def fig2c(out: Path, workers=None, plot=False) -> dict:
    """Chain mixing time versus v / Gamma for three asymmetries (N_L = 9)."""
    sweep = {"parameter": "v", "start": 0.2, "stop": 4.0, "steps": 39}
    cases = {
        "phi0.25pi_first": (0.25, {"rule": "first"}),
        "phi0.21pi_first": (0.21, {"rule": "first"}),
        "phi0.1pi_first": (0.1, {"rule": "first"}),
        "phi0.1pi_last": (0.1, {"rule": "last"}),
    }
    summary = {}
    for label, (phi, state) in cases.items():
        lattice = {"topology": "linear", "n_lossy": 9, "v": 1.0, "phi_pi": phi}
        summary[label] = cmd_mix(_cfg(lattice, initial_state=state, sweep=sweep), out / label, workers, plot)
    for phi in (0.25, 0.1):
        lattice = {"topology": "linear", "n_lossy": 9, "v": 1.0, "phi_pi": phi}
        grid = {"parameter": "v", "start": 0.1, "stop": 4.0, "steps": 200}
        summary[f"spectrum_phi{phi}pi"] = cmd_spectrum(_cfg(lattice, sweep=grid), out / f"spectrum_phi{phi}pi",
                                                       workers, plot)
    return summary


def fig3(out: Path, workers=None, plot=False) -> dict:
    """Mixing time versus chain size for v / Gamma = 3, 5, 7."""
    lattice = {"topology": "linear", "n_lossy": 2, "v": 3.0, "phi_pi": 0.25}
    scaling = {"sizes": list(range(2, 31)), "state_rule": "first",
               "series": [{"label": f"v{v}", "lattice": {"v": float(v)}} for v in (3, 5, 7)]}
    return cmd_scaling(_cfg(lattice, scaling=scaling), out, workers, plot)


def _second_slowest_vector(n_lossy: int, v: float) -> np.ndarray:
    sd = eigensolve(build(LatticeSpec("linear", CouplingParams(v), n_lossy)))
    vec = sd.right_vectors[:, 1]
    return np.abs(vec) / np.linalg.norm(vec)


def fig4(out: Path, workers=None, plot=False) -> dict:
    """Edge versus central excitation of the symmetric chain at v / Gamma = 3."""
    lattice = {"topology": "linear", "n_lossy": 2, "v": 3.0, "phi_pi": 0.25}
    scaling = {"sizes": list(range(2, 31)),
               "series": [{"label": "first", "state_rule": "first"},
                          {"label": "middle", "state_rule": "middle"}]}
    summary = cmd_scaling(_cfg(lattice, scaling=scaling), out, workers, plot)
    for n in (19, 20):
        vec = _second_slowest_vector(n, 3.0)
        io.write_csv(out / f"eigvec_n{n}.csv", ["node_index", "abs_element"],
                     ((j + 1, x) for j, x in enumerate(vec)))
        centre = middle_node(LatticeSpec("linear", CouplingParams(3.0), n))
        summary[f"central_element_n{n}"] = float(vec[centre - 1])
    return summary


def fig6(out: Path, workers=None, plot=False) -> dict:
    """Ring with N_L = 3: mixing time and eigenvalue branches versus v / Gamma."""
    summary = {}
    for phi in (0.25, 0.15):
        lattice = {"topology": "ring", "n_lossy": 3, "v": 0.5, "phi_pi": phi, "delta": "balanced"}
        sweep = {"parameter": "v", "start": 0.1, "stop": 1.0, "steps": 46}
        summary[f"mix_phi{phi}pi"] = cmd_mix(_cfg(lattice, initial_state={"node": 1}, sweep=sweep),
                                             out / f"phi{phi}pi", workers, plot)
        summary[f"spectrum_phi{phi}pi"] = cmd_spectrum(
            _cfg(lattice, sweep=dict(sweep, steps=200)), out / f"phi{phi}pi", workers, plot)
    # degeneracy character of the symmetric ring below and at its EP
    spec = LatticeSpec("ring", CouplingParams(0.2), 3)
    h = build(spec)
    sd = eigensolve(h)
    classes = []
    for cluster in find_clusters(sd.eigenvalues, 1e-6 * spec.params.gamma):
        if len(cluster) > 1:
            rep = classify_degeneracy(h, cluster, sd)
            classes.append((0.2, rep.cluster_size, rep.kind, rep.geometric_multiplicity))
    for event in ep_scan(spec, np.linspace(0.1, 1.0, 46)).events:
        classes.append((event.abscissa, event.cluster_size, event.kind, event.geometric_multiplicity))
    io.write_csv(out / "degeneracies.csv", ["v_over_gamma", "cluster_size", "kind", "geometric_multiplicity"],
                 classes)
    summary["degeneracies"] = classes
    return summary


def _ring_lrep(phi: float, n_lossy: int, upper: float) -> float | None:
    spec = LatticeSpec("ring", CouplingParams(0.5, phi * PI), n_lossy)
    return ep_scan(spec, np.linspace(0.05, upper, 400)).lrep


def fig7(out: Path, workers=None, plot=False) -> dict:
    """Ring with N_L = 10: spectra for three asymmetries and LREP versus phi."""
    summary = {}
    for phi in (0.25, 0.22, 0.1):
        lattice = {"topology": "ring", "n_lossy": 10, "v": 1.0, "phi_pi": phi}
        sweep = {"parameter": "v", "start": 0.05, "stop": 6.0, "steps": 300}
        summary[f"spectrum_phi{phi}pi"] = cmd_spectrum(_cfg(lattice, sweep=sweep), out / f"spectrum_phi{phi}pi",
                                                       workers, plot)
    phis = [round(x, 4) for x in np.linspace(0.1, 0.25, 16)]
    ring = parallel_map(_ring_lrep_task, phis, workers)
    linear = [lrep_linear_analytic(CouplingParams(1.0, p * PI), 9) for p in phis]
    io.write_csv(out / "lrep_vs_phi.csv", ["phi_over_pi", "lrep_linear_n9", "lrep_ring_n10"],
                 zip(phis, linear, ring))
    if plot:
        from .plotting import line_chart

        line_chart(out / "lrep_vs_phi.svg", phis,
                   {"linear N_L=9": linear, "ring N_L=10": [np.nan if r is None else r for r in ring]},
                   "phi / pi", "LREP v / Gamma")
    summary["lrep_vs_phi"] = {"phi_over_pi": phis, "linear": linear, "ring": ring}
    return summary


def _ring_lrep_task(phi):
    return _ring_lrep(phi, 10, 8.0)


def fig8(out: Path, workers=None, plot=False) -> dict:
    """Mixing time versus ring size from the first node."""
    lattice = {"topology": "ring", "n_lossy": 2, "v": 1.0, "phi_pi": 0.25}
    series = [{"label": f"v{v}", "lattice": {"v": float(v)}} for v in (1, 2, 3, 4)]
    series += [{"label": f"v2_phi{p}pi", "lattice": {"v": 2.0, "phi_pi": p}} for p in (0.22, 0.2)]
    scaling = {"sizes": list(range(2, 37)), "state_rule": "first", "series": series}
    return cmd_scaling(_cfg(lattice, scaling=scaling), out, workers, plot)


def fig9a(out: Path, workers=None, plot=False) -> dict:
    """Asymmetric rings at v / Gamma = 2 started from the last lossless node."""
    lattice = {"topology": "ring", "n_lossy": 2, "v": 2.0, "phi_pi": 0.25}
    series = [{"label": f"phi{p}pi_last", "lattice": {"phi_pi": p}, "state_rule": "last"}
              for p in (0.25, 0.24, 0.23)]
    series.append({"label": "phi0.23pi_opposite", "lattice": {"phi_pi": 0.23}, "state_rule": "opposite"})
    scaling = {"sizes": list(range(2, 31)), "series": series}
    return cmd_scaling(_cfg(lattice, scaling=scaling), out, workers, plot)


def fig9b(out: Path, workers=None, plot=False) -> dict:
    """Second-smallest decay rate of balanced rings versus size at v / Gamma = 2."""
    sizes = list(range(2, 41))
    curves = {}
    for phi in (0.25, 0.24, 0.23):
        spec = LatticeSpec("ring", CouplingParams(2.0, phi * PI), 2)
        curves[phi] = [g for _, g in gap_vs_size(spec, sizes)]
    header = ["n_lossy"] + [f"gap_phi_{phi}pi" for phi in curves]
    io.write_csv(out / "gap.csv", header, ([n] + [curves[p][i] for p in curves] for i, n in enumerate(sizes)))
    if plot:
        from .plotting import line_chart

        line_chart(out / "gap.svg", sizes, {f"phi={p}pi": c for p, c in curves.items()},
                   "N_L", "second smallest |Im lambda| / Gamma", logy=True)
    i20, i40 = sizes.index(20), sizes.index(40)
    return {
        "sizes": sizes,
        "gaps": {f"phi_{p}pi": c for p, c in curves.items()},
        "ratio_40_20": {f"phi_{p}pi": c[i40] / c[i20] for p, c in curves.items()},
    }


FIGURES = {
    "fig1b": fig1b,
    "fig1c": fig1c,
    "fig1mix": fig1mix,
    "fig2b": fig2b,
    "fig2c": fig2c,
    "fig3": fig3,
    "fig4": fig4,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
    "fig9a": fig9a,
    "fig9b": fig9b,
}


def reproduce(figure_id: str, out: Path, workers=None, plot=False) -> dict:
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return FIGURES[figure_id](out, workers=workers, plot=plot)
