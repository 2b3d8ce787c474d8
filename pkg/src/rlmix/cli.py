"""Command-line interface.

Subcommands ``spectrum``, ``mix``, ``scaling``, ``ep-scan`` and ``recipe``
read a JSON config (see :mod:`rlmix.config`); ``reproduce <figure_id>``
runs one of the canned figure jobs.  Every run writes CSV files into the
output directory (``--output-dir``, else ``output.dir``, else
``$RLMIX_OUTPUT_DIR``, else ``./rlmix_out``) plus a ``summary.json``; with
``--plot`` a matplotlib SVG is written next to each main CSV.

Exit codes: 0 success, 2 config or parameter error, 3 numerical error,
4 horizon too short or infeasible recipe.  Errors are reported on a single
stderr line ``<reason>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load
from .dynamics import decompose, evolve, time_grid
from .errors import ConfigError, RLMixError
from .initstate import (
    basis_excitation,
    central_support,
    dark_state,
    orthogonal_recipe,
    slowest_modes,
    state_for_rule,
)
from .lattice import LatticeSpec, build
from .mixing import assemble_scaling, trajectory_regime, mixing_report, quadratic_onset, scaling_point
from .spectral import default_grid, ep_scan, eigensolve

ENV_OUTPUT = "RLMIX_OUTPUT_DIR"
logger = logging.getLogger("rlmix")


# ---------------------------------------------------------------------------
# helpers


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Ordered map over a bounded process pool (serial for one worker)."""
    items = list(items)
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def write_summary(out: Path, data: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.json"
    text = json.dumps(_clean(json.loads(json.dumps(data, default=_json_default))), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def resolve_state(block: dict, spec: LatticeSpec, base: Path | None = None) -> np.ndarray:
    block = block or {"rule": "first"}
    if "node" in block:
        return basis_excitation(spec, int(block["node"])).psi
    if "rule" in block:
        return state_for_rule(spec, str(block["rule"])).psi
    if "dark" in block:
        if not block["dark"]:
            raise ConfigError("initial_state.dark must be true when given")
        return dark_state(spec).psi
    if "recipe_file" in block:
        path = Path(block["recipe_file"])
        if base is not None and not path.is_absolute() and not path.exists():
            path = base / path
        return io.read_recipe(path, spec.dim)
    amps = block["amplitudes"]
    try:
        psi = np.array([complex(*a) if isinstance(a, (list, tuple)) else complex(a) for a in amps])
    except (TypeError, ValueError):
        raise ConfigError("initial_state.amplitudes must be numbers or [re, im] pairs") from None
    if len(psi) != spec.dim:
        raise ConfigError(f"initial_state.amplitudes has {len(psi)} entries, lattice has {spec.dim} nodes")
    if not np.any(psi):
        raise ConfigError("initial_state.amplitudes is the zero vector")
    return psi / np.linalg.norm(psi)


def _lattice_at(cfg: ExperimentConfig, name: str, value) -> LatticeSpec:
    if name == "v":
        return cfg.lattice_spec().with_ratio(float(value))
    if name == "n_lossy":
        return cfg.lattice_spec(n_lossy=int(value))
    if name == "epsilon":
        return cfg.lattice_spec()
    return cfg.lattice_spec(**{name: float(value)})


def _spectrum_point(spec_dict: dict, ratio: float):
    spec = LatticeSpec.from_dict(spec_dict).with_ratio(ratio)
    h = build(spec)
    sd = eigensolve(h)
    res = np.linalg.norm(h.matrix @ sd.right_vectors - sd.right_vectors * sd.eigenvalues, axis=0)
    return sd.eigenvalues, res


# ---------------------------------------------------------------------------
# spectrum / ep-scan


def _ratio_grid(cfg: ExperimentConfig, spec: LatticeSpec) -> np.ndarray:
    if cfg.sweep is None:
        return default_grid(spec)
    if cfg.sweep.get("parameter") != "v":
        raise ConfigError("spectrum and ep-scan sweep the coupling: sweep.parameter must be 'v'")
    return cfg.sweep_values()


def spectrum_table(spec: LatticeSpec, grid, workers=None) -> list[tuple]:
    points = parallel_map(partial(_spectrum_point, spec.to_dict()), [float(x) for x in grid], workers)
    rows = []
    for x, (w, res) in zip(grid, points):
        rows.extend(io.spectrum_rows(float(x), w, res))
    return rows


def write_ep_scan(out: Path, scan, plot=False) -> dict:
    io.write_csv(out / "ep_scan.csv", io.EP_HEADER,
                 ((e.abscissa, e.cluster_size, e.kind) for e in scan.events))
    return {
        "lrep": scan.lrep,
        "abscissas": list(scan.abscissas),
        "n_events": len(scan.events),
        "warnings": list(scan.warnings),
    }


def cmd_spectrum(cfg: ExperimentConfig, out: Path, workers=None, plot=False, name="spectrum") -> dict:
    spec = cfg.lattice_spec()
    grid = _ratio_grid(cfg, spec)
    rows = spectrum_table(spec, grid, workers)
    io.write_csv(out / f"{name}.csv", io.SPECTRUM_HEADER, rows)
    scan = ep_scan(spec, grid)
    summary = write_ep_scan(out, scan)
    if plot:
        from .plotting import scatter_branches

        scatter_branches(out / f"{name}.svg", [r[0] for r in rows], [r[3] for r in rows],
                         "v / Gamma", "Im lambda / Gamma", vlines=list(scan.abscissas))
    return summary


def cmd_ep_scan(cfg: ExperimentConfig, out: Path, workers=None, plot=False) -> dict:
    spec = cfg.lattice_spec()
    scan = ep_scan(spec, _ratio_grid(cfg, spec))
    summary = write_ep_scan(out, scan)
    if plot:
        from .plotting import scatter_branches

        x = np.repeat(scan.grid, scan.im_parts.shape[1])
        scatter_branches(out / "ep_scan.svg", x, scan.im_parts.ravel(), "v / Gamma", "Im lambda / Gamma",
                         vlines=list(scan.abscissas))
    return summary


# ---------------------------------------------------------------------------
# mix


def _mix_point(task):
    spec_dict, state_block, run, base = task
    spec = LatticeSpec.from_dict(spec_dict)
    psi = resolve_state(state_block, spec, base)
    rep = mixing_report(spec, psi, run["epsilon"], run["t_max"], run["dt"], run["max_extension"],
                        keep_series=False)
    return rep


def _single_mix(cfg: ExperimentConfig, spec: LatticeSpec, out: Path, base, plot=False) -> dict:
    run = cfg.run
    psi = resolve_state(cfg.initial_state, spec, base)
    h = build(spec)
    sd = eigensolve(h)
    rep = mixing_report(spec, psi, run["epsilon"], run["t_max"], run["dt"], run["max_extension"], spectral=sd)
    io.write_csv(out / "mix_report.csv", io.mix_header(spec.dim), [io.mix_row(rep, spec.dim)])
    max_rows = cfg.output["max_rows"]
    t_max = rep.t_max
    grid = time_grid(t_max, run["dt"])
    grid = grid[:: io.stride_for(len(grid), max_rows)]
    traj = evolve(psi, h, grid, spectral=sd)
    io.write_trajectory(out / "trajectory.csv", traj)
    if cfg.output["raw_amplitudes"]:
        io.write_amplitudes(out / "amplitudes.csv", traj)
    if rep.distance is not None:
        step = io.stride_for(len(rep.times), max_rows)
        io.write_csv(out / "distance.csv", ["t", "distance"],
                     zip(rep.times[::step], rep.distance[::step]))
    c_max = None
    if sd.well_conditioned:
        c_max = decompose(psi, sd).max_abs
    summary = {
        "class": rep.mix_class,
        "t_mix": rep.t_mix,
        "first_crossing": rep.first_crossing,
        "epsilon": rep.epsilon,
        "dark_overlap": rep.dark_overlap,
        "ambiguous": rep.ambiguous,
        "p_stationary": None if rep.p_stationary is None else list(rep.p_stationary),
        "slow_modes": list(rep.slow_modes),
        "method": rep.method,
        "t_max": rep.t_max,
        "c_max": c_max,
        "trajectory_regime": trajectory_regime(h, psi),
    }
    if plot:
        from .plotting import line_chart

        pn = traj.p_norm
        line_chart(out / "trajectory.svg", traj.times,
                   {f"p_{j + 1}": pn[:, j] for j in range(min(spec.dim, 8))}, "t Gamma", "p_j(t)")
        if rep.distance is not None:
            d = np.maximum(rep.distance, 1e-16)
            line_chart(out / "distance.svg", rep.times, {"distance": d}, "t Gamma", "L1 distance", logy=True)
    return summary


def cmd_mix(cfg: ExperimentConfig, out: Path, workers=None, plot=False, base=None) -> dict:
    if cfg.sweep is None:
        return _single_mix(cfg, cfg.lattice_spec(), out, base, plot)
    name = cfg.sweep["parameter"]
    values = cfg.sweep_values()
    tasks = []
    for x in values:
        spec = _lattice_at(cfg, name, x)
        run = dict(cfg.run, epsilon=float(x)) if name == "epsilon" else cfg.run
        tasks.append((spec.to_dict(), cfg.initial_state, run, base))
    reports = parallel_map(_mix_point, tasks, workers)
    dims = [LatticeSpec.from_dict(t[0]).dim for t in tasks]
    width = max(dims)
    column = "v_over_gamma" if name == "v" else name
    rows = [[x] + io.mix_row(r, width) for x, r in zip(values, reports)]
    io.write_csv(out / "mix_sweep.csv", [column] + io.mix_header(width), rows)
    t = [r.t_mix for r in reports]
    if plot:
        from .plotting import line_chart

        line_chart(out / "mix_sweep.svg", values, {"T_mix": [np.nan if v is None else v for v in t]},
                   column, "T_mix Gamma", logy=True)
    finite = [(x, v) for x, v in zip(values, t) if v is not None]
    return {
        "parameter": column,
        "values": list(values),
        "t_mix": t,
        "classes": [r.mix_class for r in reports],
        "argmin": min(finite, key=lambda p: p[1])[0] if finite else None,
    }


# ---------------------------------------------------------------------------
# scaling


def _scaling_task(task):
    spec_dict, rule, run = task
    spec = LatticeSpec.from_dict(spec_dict)
    return scaling_point(spec, rule, run["epsilon"], run["dt"], run["max_extension"])


def _scaling_series(cfg: ExperimentConfig) -> list[dict]:
    block = cfg.scaling or {}
    series = block.get("series") or [{"label": "main"}]
    labels = [s.get("label") for s in series]
    if any(not lbl for lbl in labels) or len(set(labels)) != len(labels):
        raise ConfigError("scaling.series entries need distinct non-empty labels")
    return series


def _scaling_sizes(cfg: ExperimentConfig) -> list[int]:
    block = cfg.scaling or {}
    if "sizes" in block:
        sizes = [int(n) for n in block["sizes"]]
    elif cfg.sweep is not None and cfg.sweep.get("parameter") == "n_lossy":
        sizes = [int(n) for n in cfg.sweep_values()]
    else:
        raise ConfigError("scaling needs scaling.sizes or a sweep over n_lossy")
    if not sizes or sizes != sorted(set(sizes)):
        raise ConfigError("scaling sizes must be non-empty, distinct and ascending")
    return sizes


def cmd_scaling(cfg: ExperimentConfig, out: Path, workers=None, plot=False) -> dict:
    sizes = _scaling_sizes(cfg)
    default_rule = (cfg.scaling or {}).get("state_rule", "first")
    series = _scaling_series(cfg)
    tasks = []
    for s in series:
        spec = cfg.lattice_spec(**s.get("lattice", {}))
        rule = s.get("state_rule", default_rule)
        for n in sizes:
            tasks.append((spec.with_size(n).to_dict(), rule, cfg.run))
    points = parallel_map(_scaling_task, tasks, workers)
    summary, curves = {}, {}
    for i, s in enumerate(series):
        chunk = points[i * len(sizes):(i + 1) * len(sizes)]
        result = assemble_scaling(sizes, chunk)
        io.write_csv(out / f"scaling_{s['label']}.csv", io.SCALING_HEADER, result.rows())
        summary[s["label"]] = {
            "sizes": sizes,
            "t_mix": result.t_mix,
            "segments": result.segments,
            "post_exponent": result.post_fit.slope if result.post_fit else None,
            "pre_slope": result.pre_fit.slope if result.pre_fit else None,
            "onset": quadratic_onset(result),
        }
        curves[s["label"]] = [np.nan if t is None else t for t in result.t_mix]
    if plot:
        from .plotting import line_chart

        line_chart(out / "scaling.svg", sizes, curves, "N_L", "T_mix Gamma")
    return summary


# ---------------------------------------------------------------------------
# recipe


def cmd_recipe(cfg: ExperimentConfig, out: Path, workers=None, plot=False, base=None) -> dict:
    spec = cfg.lattice_spec()
    block = cfg.recipe or {}
    sd = eigensolve(build(spec))
    if "support" in block:
        support = [int(n) for n in block["support"]]
    else:
        support = list(central_support(spec, int(block.get("support_size", 1))))
    if "kill_modes" in block:
        kill = [int(k) for k in block["kill_modes"]]
    else:
        kill = list(slowest_modes(sd, int(block.get("kill_count", len(support) - 1))))
    recipe = orthogonal_recipe(spec, support, kill, spectral=sd,
                               dark_orthogonal=bool(block.get("dark_orthogonal", False)))
    io.write_recipe(out / "recipe.csv", recipe.amplitudes)
    run = cfg.run
    rep = mixing_report(spec, recipe.amplitudes, run["epsilon"], run["t_max"], run["dt"],
                        run["max_extension"], spectral=sd, keep_series=False)
    ref_psi = resolve_state(cfg.initial_state, spec, base)
    ref = mixing_report(spec, ref_psi, run["epsilon"], run["t_max"], run["dt"],
                        run["max_extension"], spectral=sd, keep_series=False)
    io.write_csv(out / "recipe_mix.csv", ["state"] + io.mix_header(spec.dim),
                 [["recipe"] + io.mix_row(rep, spec.dim), ["reference"] + io.mix_row(ref, spec.dim)])
    return {
        "support": support,
        "kill_modes": kill,
        "killed_overlap": recipe.killed_overlap,
        "dark_overlap": recipe.dark_overlap,
        "t_mix_recipe": rep.t_mix,
        "t_mix_reference": ref.t_mix,
    }


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"usage-error: {message}\n")
        sys.exit(2)


def _output_dir(arg: str | None, cfg: ExperimentConfig | None) -> Path:
    if arg:
        return Path(arg)
    if cfg is not None and cfg.output.get("dir"):
        return Path(cfg.output["dir"])
    return Path(os.environ.get(ENV_OUTPUT, "rlmix_out"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rlmix", description="Mixing dynamics of lossy SSH-type lattices.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("spectrum", "mix", "scaling", "ep-scan", "recipe"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. lattice.v=0.4")
        _common(p)
    p = sub.add_parser("reproduce")
    p.add_argument("figure_id")
    _common(p)
    sub.add_parser("list-figures")
    return parser


def _common(p):
    p.add_argument("-o", "--output-dir")
    p.add_argument("--plot", action="store_true", help="also write SVG charts")
    p.add_argument("-j", "--workers", type=int, help="worker processes (default: all cores)")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "mix": cmd_mix,
    "scaling": cmd_scaling,
    "ep-scan": cmd_ep_scan,
    "recipe": cmd_recipe,
}


def run(args) -> dict:
    if args.command == "list-figures":
        from .figures import FIGURES

        for fid in FIGURES:
            print(fid)
        return {}
    if args.command == "reproduce":
        from .figures import reproduce

        out = _output_dir(args.output_dir, None) / args.figure_id
        summary = reproduce(args.figure_id, out, workers=args.workers, plot=args.plot)
        write_summary(out, summary)
        print(out)
        return summary
    cfg = load(args.config, args.set)
    plot = args.plot or bool(cfg.output["plot"])
    workers = args.workers if args.workers is not None else cfg.run.get("workers")
    out = _output_dir(args.output_dir, cfg)
    out.mkdir(parents=True, exist_ok=True)
    fn = COMMANDS[args.command]
    kwargs = {"workers": workers, "plot": plot}
    if args.command in ("mix", "recipe"):
        kwargs["base"] = Path(args.config).resolve().parent
    summary = fn(cfg, out, **kwargs)
    (out / "config.json").write_text(cfg.dumps() + "\n")
    write_summary(out, summary)
    print(out)
    return summary


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except RLMixError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"{exc.reason}: {msg}\n")
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical-error: {' '.join(str(exc).split())}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"io-error: {' '.join(str(exc).split())}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
