"""Command-line runner: single runs, sweeps, CSV/JSON outputs.

Outputs per run: `timeseries.csv` (densities and currents), a downsampled
`coefficients.csv`, and `manifest.json` with the fully resolved
configuration, unit constants, solver settings, and the steady verdict.
Sweeps write one long-format `sweep.csv` row per parameter point.  Outputs
are deterministic byte for byte for identical configs.

Exit codes: 0 success, 2 configuration error, 3 solver divergence,
4 steady state requested but not reached.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import envkit, oracle, runs, singledot, spindeg, twodot, units
from .config import (
    ConfigError,
    RunConfig,
    build_model,
    initial_state_vector,
    steady_policy,
)
from .singledot import CoefficientError, PropagationError
from .steady import SteadyPolicy, SteadyVerdict, detect_steady  # noqa: F401  (CLI-facing API)
from .volterra import TwoTimeBlowUpError

SCHEMA_VERSION = 1
MAX_TIMESERIES_ROWS = 4000
MAX_COEFF_ROWS = 2000
MAX_ORACLE_POINTS = 160

SOLVER_ERRORS = (TwoTimeBlowUpError, PropagationError, CoefficientError)


class SteadyNotReached(RuntimeError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _stride(n_rows: int, cap: int) -> int:
    return max(1, int(np.ceil(n_rows / cap)))


def _rho_columns(cfg: RunConfig, result) -> dict[str, np.ndarray]:
    if cfg.model == "singledot":
        return {"rho00": result.rho[:, 0], "rho11": result.rho[:, 1]}
    if cfg.model == "spindeg":
        comp = spindeg.rho_spin_components(result.rho)
        return {
            "rho00": comp["rho00"],
            "rho_dd": comp["rho_dd"],
            "rho_uu": comp["rho_uu"],
            "rho22": comp["rho22"],
            "rho_du_re": comp["rho_du"].real,
            "rho_du_im": comp["rho_du"].imag,
        }
    v = result.rho
    return {
        "rho00": v[:, 0],
        "rho11": v[:, 1],
        "rho22": v[:, 2],
        "rho33": v[:, 3],
        "rho12_re": v[:, 4],
        "rho12_im": v[:, 5],
    }


def write_timeseries(path: Path, cfg: RunConfig, result, oracle_cols=None) -> None:
    cur = result.currents
    cols: dict[str, np.ndarray] = {"t_ns": result.times}
    cols.update(_rho_columns(cfg, result))
    cols["i_1d_na"] = cur.i_1d
    cols["i_d2_na"] = cur.i_d2
    cols["delta_i_na"] = cur.delta_i
    cols["i_avg_na"] = cur.i_avg
    n = result.times.size
    stride = _stride(n, MAX_TIMESERIES_ROWS)
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(cols)
        extra = sorted(oracle_cols) if oracle_cols else []
        writer.writerow(header + extra)
        omap = {}
        if oracle_cols:
            for name, (o_idx, vals) in oracle_cols.items():
                omap[name] = dict(zip(o_idx, vals))
        for i in idx:
            row = [_fmt(cols[c][i]) for c in header]
            for name in extra:
                row.append(_fmt(omap[name].get(i)))
            writer.writerow(row)


def _coefficient_series(cfg: RunConfig, result) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    co = result.coeffs
    if cfg.model == "singledot":
        series = {"u": co.u}
        for i in (1, 2):
            for j in (1, 2):
                series[f"f{i}{j}"] = co.f[i - 1, j - 1]
        return co.times, series
    return co.times, dict(co.series)


def write_coefficients(path: Path, cfg: RunConfig, result) -> None:
    times, series = _coefficient_series(cfg, result)
    n = times.size
    stride = _stride(n, MAX_COEFF_ROWS)
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        names = sorted(series)
        header = ["t_ns"]
        for name in names:
            header += [f"{name}_re", f"{name}_im"]
        writer.writerow(header)
        for i in idx:
            row = [_fmt(times[i])]
            for name in names:
                z = complex(series[name][i])
                row += [_fmt(z.real), _fmt(z.imag)]
            writer.writerow(row)


def _manifest(cfg: RunConfig, model, result, oracle_info=None) -> dict:
    verdict = asdict(result.verdict)
    env1, env2 = model.env1, model.env2
    man = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "constants": {
            "radns_per_mev": units.RADNS_PER_MEV,
            "mev_per_kelvin": units.MEV_PER_KELVIN,
            "elementary_charge_c": units.ELEMENTARY_CHARGE_C,
            "current_na_per_rate": units.NA_PER_INVERSE_NS,
        },
        "resolved": {
            "dot_frequency_radns": getattr(model, "dot_frequency", None)
            or list(getattr(model, "dot_frequencies", [])),
            "mu1_radns": env1.mu_radns,
            "mu2_radns": env2.mu_radns,
            "window_radns": [env1.window_lo, env1.window_hi],
            "grid_step_ns": model.grid.step,
            "grid_count": model.grid.count,
            "coefficient_window_end_ns": result.frozen_time,
        },
        "convergence": {
            "coefficients_converged": bool(result.coefficients_converged),
            "steady": verdict,
        },
    }
    if oracle_info:
        man["oracle_check"] = oracle_info
    return man


def _oracle_comparison(cfg: RunConfig, model, result):
    """Matched truncated-bath oracle run; returns manifest info and columns."""
    s1, s2 = model.spectra()
    s1 = s1.truncate_strongest(cfg.oracle_modes)
    s2 = s2.truncate_strongest(cfg.oracle_modes)
    omega_c = units.mev_to_radns(cfg.coulomb_mev)
    if cfg.model == "singledot":
        ocfg = oracle.OracleConfig("singledot", (model.dot_frequency,), 0.0, (s1, s2))
    elif cfg.model == "spindeg":
        ocfg = oracle.OracleConfig(
            "spindeg", (model.dot_frequency, model.dot_frequency), omega_c, (s1, s2)
        )
    else:
        ocfg = oracle.OracleConfig(
            "twodot", tuple(model.dot_frequencies), omega_c, (s1, s2)
        )
    ops = oracle.build_total_hamiltonian(ocfg)

    fine_mask = result.times <= (result.frozen_time or result.times[-1])
    fine_idx = np.flatnonzero(fine_mask)
    take = fine_idx[:: _stride(fine_idx.size, MAX_ORACLE_POINTS)]
    ts = result.times[take]

    init = initial_state_vector(cfg)
    if cfg.model == "singledot":
        weights = {0: float(init[0]), 1: float(init[1])}
        comps = [(w, {k: 1.0}) for k, w in weights.items() if w > 0]
        dim_dots = 2
    else:
        rho0 = (
            init
            if cfg.model == "spindeg"
            else twodot.vector6_to_rho_matrix(np.asarray(init, dtype=float))
        )
        evals, evecs = np.linalg.eigh(np.asarray(rho0, dtype=complex))
        comps = []
        for w, vec in zip(evals, evecs.T):
            if w > 1e-12:
                comps.append((float(w), {k: vec[k] for k in range(4) if vec[k] != 0}))
        dim_dots = 4

    rho_oracle = None
    for w, amps in comps:
        psi0 = oracle.dot_register_state(ops, amps)
        states = oracle.evolve_state(ops, psi0, ts)
        part = np.array([oracle.reduce_to_dots(ops, s) for s in states])
        rho_oracle = w * part if rho_oracle is None else rho_oracle + w * part

    # Trace distance against the ME density at the same times.
    if cfg.model == "singledot":
        me = np.zeros((ts.size, 2, 2), dtype=complex)
        me[:, 0, 0] = result.rho[take, 0]
        me[:, 1, 1] = result.rho[take, 1]
    elif cfg.model == "spindeg":
        me = result.rho[take]
    else:
        me = twodot.vector6_to_rho_matrix(result.rho[take])
    tdist = np.empty(ts.size)
    for i in range(ts.size):
        evs = np.linalg.eigvalsh(me[i] - rho_oracle[i])
        tdist[i] = 0.5 * np.abs(evs).sum()
    info = {
        "modes_per_environment": cfg.oracle_modes,
        "register_modes": ops.n_modes,
        "max_trace_distance": float(tdist.max()),
    }
    cols = {"oracle_trace_distance": (take, tdist)}
    for k in range(dim_dots):
        cols[f"oracle_pop{k}"] = (take, np.real(rho_oracle[:, k, k]))
    return info, cols


def run(cfg: RunConfig, *, steady_only: bool = False, oracle_check: bool = False):
    """Execute one configuration; writes outputs into cfg.out_dir."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spectra = None
    if oracle_check:
        # Hold the environment fixed between the ME and the oracle: both run
        # on the truncated bath.
        probe = build_model(cfg)
        s1, s2 = probe.spectra()
        spectra = (
            s1.truncate_strongest(cfg.oracle_modes),
            s2.truncate_strongest(cfg.oracle_modes),
        )
    model = build_model(cfg, spectra_override=spectra)
    policy = steady_policy(cfg)
    init = initial_state_vector(cfg)
    if cfg.model == "singledot":
        result = runs.simulate_singledot(model, init, policy)
    elif cfg.model == "spindeg":
        result = runs.simulate_spindeg(model, init, policy)
    else:
        result = runs.simulate_twodot(model, init, policy)

    oracle_info = oracle_cols = None
    if oracle_check:
        oracle_info, oracle_cols = _oracle_comparison(cfg, model, result)

    if not steady_only:
        write_timeseries(out / "timeseries.csv", cfg, result, oracle_cols)
        write_coefficients(out / "coefficients.csv", cfg, result)
    man = _manifest(cfg, model, result, oracle_info)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(man, fh, sort_keys=True, indent=1)
        fh.write("\n")
    if steady_only and not result.verdict.converged:
        raise SteadyNotReached(
            f"no steady state: {result.verdict.reason or 'not converged'}"
        )
    return result


def _sweep_points(cfg: RunConfig):
    axes = cfg.sweep
    if not axes:
        return [{}]
    if len(axes) == 1:
        return [{axes[0].name: v} for v in axes[0].values]
    return [
        {axes[0].name: v0, axes[1].name: v1}
        for v0 in axes[0].values
        for v1 in axes[1].values
    ]


def _sweep_one(args):
    index, cfg_dict, overrides = args
    base = RunConfig.from_dict(cfg_dict)
    row = {"point": index}
    row.update(overrides)
    try:
        cfg = base.with_values(**overrides)
        model = build_model(cfg)
        policy = steady_policy(cfg)
        init = initial_state_vector(cfg)
        if cfg.model == "singledot":
            res = runs.simulate_singledot(model, init, policy)
        elif cfg.model == "spindeg":
            res = runs.simulate_spindeg(model, init, policy)
        else:
            res = runs.simulate_twodot(model, init, policy)
        v = res.verdict
        row.update(
            i_st_na=v.steady_value,
            steady_time_ns=v.steady_time,
            t_p_ns=v.first_stationary_time,
            converged=v.converged,
            coefficients_converged=res.coefficients_converged,
            error="",
        )
    except (ConfigError, *SOLVER_ERRORS, RuntimeError) as exc:
        row.update(
            i_st_na=None,
            steady_time_ns=None,
            t_p_ns=None,
            converged=False,
            coefficients_converged=False,
            error=f"{type(exc).__name__}: {exc}",
        )
    return index, row


def sweep(cfg: RunConfig, *, workers: int = 1):
    """Run every sweep point; returns rows (also written to sweep.csv)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = _sweep_points(cfg)
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("sweep")
    jobs = [(i, cfg_dict, p) for i, p in enumerate(points)]
    rows: list[dict] = [None] * len(jobs)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(_sweep_one, jobs):
                rows[index] = row
    else:
        for job in jobs:
            index, row = _sweep_one(job)
            rows[index] = row
    axis_names = [ax.name for ax in cfg.sweep]
    header = (
        ["point"]
        + axis_names
        + [
            "i_st_na",
            "steady_time_ns",
            "t_p_ns",
            "converged",
            "coefficients_converged",
            "error",
        ]
    )
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row["point"]]
                + [_fmt(row[a]) if not isinstance(row[a], str) else row[a] for a in axis_names]
                + [
                    _fmt(row["i_st_na"]),
                    _fmt(row["steady_time_ns"]),
                    _fmt(row["t_p_ns"]),
                    _fmt(row["converged"]),
                    _fmt(row["coefficients_converged"]),
                    row["error"],
                ]
            )
    _write_combination(cfg, rows, out)
    man = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "n_points": len(rows),
        "n_converged": sum(1 for r in rows if r["converged"]),
        "n_errors": sum(1 for r in rows if r["error"]),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(man, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return rows


def _write_combination(cfg: RunConfig, rows, out: Path) -> None:
    """Steady-current combination columns 2*I_st,3 and I_st,1 + I_st,7.

    Written whenever a sweep pairs the reference initial states 1, 3, 7
    with one other axis; downstream plotting draws these columns verbatim.
    """
    names = [ax.name for ax in cfg.sweep]
    if "initial_state" not in names or len(names) != 2:
        return
    other = names[1 - names.index("initial_state")]
    table: dict[float, dict[int, float]] = {}
    for row in rows:
        if row["error"] or row["i_st_na"] is None:
            continue
        state = int(float(row["initial_state"]))
        key = float(row[other])
        table.setdefault(key, {})[state] = float(row["i_st_na"])
    lines = []
    for key in sorted(table):
        vals = table[key]
        if not {1, 3, 7} <= set(vals):
            continue
        lines.append(
            (key, 2.0 * vals[3], vals[1] + vals[7])
        )
    if not lines:
        return
    with open(out / "combination.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([other, "two_i_st_3_na", "i_st_1_plus_7_na"])
        for key, two3, one7 in lines:
            writer.writerow([_fmt(key), _fmt(two3), _fmt(one7)])


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    overrides = {}
    if args.model:
        overrides["model"] = args.model
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        d = cfg.to_dict()
        sweep_axes = cfg.sweep
        d.update(overrides)
        cfg = RunConfig.from_dict(d)
        cfg.sweep = sweep_axes
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dotflux",
        description="Non-Markovian quantum-dot transport simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--model", choices=("singledot", "spindeg", "twodot"))
        p.add_argument("--out", help="output directory override")
        p.add_argument("--steady-only", action="store_true")
        p.add_argument("--oracle-check", action="store_true")
        p.add_argument("--sweep", action="store_true", help="force sweep mode")
        p.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        cfg = _apply_overrides(cfg, args)
        if args.command == "sweep" or args.sweep or cfg.sweep:
            sweep(cfg, workers=args.workers)
        else:
            run(cfg, steady_only=args.steady_only, oracle_check=args.oracle_check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except SteadyNotReached as exc:
        print(f"steady state not reached: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
