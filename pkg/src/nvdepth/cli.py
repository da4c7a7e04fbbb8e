"""Command-line front end.

Subcommands: simulate, normalize, fit, oracle, linewidth, stats. Exit codes:
0 success, 2 config error, 3 parse error, 4 fit failure(s), 5 oracle failure.
Set ``NVNMR_LOG`` (DEBUG, INFO, WARNING, ...) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels, linewidth as lw, oracle
from .config import ConfigError, RunConfig, config_hash, load_config
from .core import NuclearSample, NvCenter, tesla_to_gauss
from .fileio import ParseError, CsvTable, read_csv, read_json, write_csv, write_json, atomic_write_text
from .model import geometric_factor_reduced
from .pipeline import (
    FitConfig,
    FitResult,
    NormalizedTrace,
    PipelineError,
    RawTrace,
    SignalTrace,
    TraceInfo,
    cohort_stats,
    combine_independent,
    fit_depth,
    normalize_background,
    simulate_trace,
    stretched_exponential,
    to_signal_contrast,
)

__all__ = ["main", "format_uncertainty", "build_parser"]

log = logging.getLogger("nvdepth")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_FIT = 4
EXIT_ORACLE = 5


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def format_uncertainty(value: float, sigma: float) -> str:
    """Value with its 1-sigma error in parentheses on the last digit, e.g. 10.4(7) or 11(2)."""
    if not (math.isfinite(sigma) and sigma > 0):
        return f"{value:.1f}"
    dec = -math.floor(math.log10(sigma))
    sr = round(sigma, dec)
    dec = -math.floor(math.log10(sr))
    sr = round(sr, dec)
    v = round(value, dec)
    if dec > 0:
        return f"{v:.{dec}f}({int(round(sr * 10**dec))})"
    return f"{int(v)}({int(sr)})"


def _setup_logging():
    level = os.environ.get("NVNMR_LOG", "WARNING").strip().upper() or "WARNING"
    lvl = int(level) if level.isdigit() else getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=lvl, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load(args) -> RunConfig:
    overrides = {}
    cfg = load_config(args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "t2n_mode", None):
        overrides["fit"] = cfg.fit.model_copy(update={"t2n_mode": args.t2n_mode})
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if overrides:
        data = cfg.model_dump()
        for k, v in overrides.items():
            data[k] = v.model_dump() if hasattr(v, "model_dump") else v
        cfg = RunConfig.model_validate(data)
    return cfg


def _provenance(cfg: RunConfig) -> dict:
    return {"tool": "nvdepth", "version": __version__, "config_hash": config_hash(cfg),
            "seed": cfg.seed, "backend": _kernels.backend()}


def _trace_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _t2n_tag(sample: NuclearSample) -> str:
    return "infinite" if sample.infinite_t2n else "finite"


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, args) -> int:
    if not cfg.traces:
        raise ConfigError("simulate needs at least one entry in 'traces'")
    sample = cfg.sample.build()
    out = Path(cfg.output_dir)
    prov = _provenance(cfg)
    written = []
    for i, tc in enumerate(cfg.traces):
        depth_nm = tc.depth_nm or cfg.nv.depth_nm
        if depth_nm is None:
            raise ConfigError(f"traces.{i}: no depth_nm (set it on the trace or under 'nv')")
        if tc.tau is None:
            raise ConfigError(f"traces.{i}.tau: a tau grid is required for simulation")
        tau = np.linspace(tc.tau.start_ns, tc.tau.stop_ns, tc.tau.num) * 1e-9
        info = TraceInfo(tc.n_pulses, tc.b0, tc.family, tc.label or f"trace{i}")
        ss = _trace_seed(cfg.seed, i)
        rng = np.random.default_rng(ss)
        tr = simulate_trace(tau, info, depth_nm * 1e-9, sample, cfg.nv.alpha, noise=tc.noise,
                            seed=int(rng.integers(2**63)))
        meta = {
            "kind": tc.output_kind,
            "label": info.label,
            "sample_id": tc.sample_id,
            "nv_id": tc.nv_id or info.label,
            "N": tc.n_pulses,
            "family": tc.family,
            "B0_G": tc.b0_gauss,
            "rho_per_nm3": sample.rho / 1e27,
            "alpha_deg": cfg.nv.alpha_deg,
            "depth_nm": depth_nm,
            "t2n_mode": _t2n_tag(sample),
            "t2n_star_us": sample.t2n_star * 1e6,
            "noise": tc.noise,
            "seed": cfg.seed,
            "trace_index": i,
            "config_hash": prov["config_hash"],
        }
        path = out / f"{info.label}.csv"
        if tc.output_kind == "raw":
            # S = background x C split into the two readout projections
            s = stretched_exponential(tau, tc.n_pulses, tc.background_amplitude, tc.background_t2_us * 1e-6,
                                      tc.background_p) * tr.c
            f0 = 0.5 * tc.counts * (1.0 + s)
            f1 = 0.5 * tc.counts * (1.0 - s)
            if tc.shot_noise:
                f0, f1 = rng.poisson(f0).astype(float), rng.poisson(f1).astype(float)
            meta.update({"counts": tc.counts, "background_amplitude": tc.background_amplitude,
                         "background_t2_us": tc.background_t2_us, "background_p": tc.background_p})
            write_csv(path, meta, ("tau_s", "f0", "f1"), np.column_stack([tau, f0, f1]))
        else:
            write_csv(path, meta, ("tau_s", "contrast", "sigma"), np.column_stack([tr.tau, tr.c, tr.sigma]))
        written.append(str(path))
        log.info("wrote %s", path)
    print("\n".join(written))
    return EXIT_OK


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _meta(table: CsvTable, key: str, conv=str, default=None):
    if key not in table.meta:
        if default is not None:
            return default
        raise ParseError(table.path, 1, f"missing metadata '# {key}=...'")
    try:
        return conv(table.meta[key])
    except ValueError:
        raise ParseError(table.path, 1, f"bad value for {key}: {table.meta[key]!r}") from None


def _info(table: CsvTable) -> TraceInfo:
    n = _meta(table, "N", lambda s: int(float(s)))
    b0 = _meta(table, "B0_G", float) * 1e-4
    fam = _meta(table, "family", str, "XY8")
    label = _meta(table, "label", str, Path(table.path).stem) or Path(table.path).stem
    try:
        return TraceInfo(n, b0, fam, label)
    except ValueError as exc:
        raise ParseError(table.path, 1, str(exc)) from None


def _as_trace(table: CsvTable):
    info = _info(table)
    tau = table.column("tau_s")
    try:
        if table.kind == "raw":
            reps = table.column("repetitions") if table.has("repetitions") else None
            return RawTrace(tau, table.column("f0"), table.column("f1"), info, reps)
        if table.kind == "signal":
            return SignalTrace(tau, table.column("s"), table.column("sigma"), info)
        if table.kind == "normalized":
            return NormalizedTrace(tau, table.column("contrast"), table.column("sigma"), info)
    except (ValueError, KeyError) as exc:
        raise ParseError(table.path, 1, str(exc)) from None
    raise ParseError(table.path, 1, f"cannot use a file of kind {table.kind!r} here")


def _normalize(trace, gamma_n: float, window_ns):
    """Raw or signal trace -> (NormalizedTrace, BackgroundFit | None)."""
    if isinstance(trace, NormalizedTrace):
        return trace, None
    if isinstance(trace, RawTrace):
        trace = to_signal_contrast(trace)
    guess = math.pi / (gamma_n * trace.info.b0)
    hw = None if window_ns is None else window_ns * 1e-9
    return normalize_background(trace, guess, hw)


def _background_dict(bg) -> dict:
    return {"amplitude": bg.amplitude, "t2_s": bg.t2, "p": bg.p, "window_s": list(bg.window),
            "chi2_reduced": bg.chi2_reduced, "n_points": bg.n_points, "model": "A*exp(-(N*tau/T2)^p)"}


def cmd_normalize(cfg: RunConfig, args) -> int:
    if not args.inputs:
        raise ConfigError("normalize needs input CSV files")
    out = Path(cfg.output_dir)
    prov = _provenance(cfg)
    gamma_n = cfg.sample.build().gamma_n
    code = EXIT_OK
    for p in args.inputs:
        table = read_csv(p)
        trace = _as_trace(table)
        try:
            norm, bg = _normalize(trace, gamma_n, cfg.fit.window_half_width_ns)
        except PipelineError as exc:
            print(f"{p}: {exc}", file=sys.stderr)
            code = EXIT_FIT
            continue
        meta = dict(table.meta)
        meta.update({"kind": "normalized", "config_hash": prov["config_hash"], "seed": cfg.seed})
        stem = Path(p).stem
        write_csv(out / f"{stem}_normalized.csv", meta, ("tau_s", "contrast", "sigma"),
                  np.column_stack([norm.tau, norm.c, norm.sigma]))
        if bg is not None:
            write_json(out / f"{stem}_background.json", {"background": _background_dict(bg), "provenance": prov})
    return code


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _fit_config(cfg: RunConfig) -> FitConfig:
    sample = cfg.sample.build()
    return FitConfig(
        sample=replace(sample, t2n_star=math.inf),
        alpha=cfg.nv.alpha,
        t2n_mode=cfg.fit.t2n_mode,
        omega_policy=cfg.fit.omega_policy,
        omega_window=cfg.fit.omega_window,
        rho_sigma=cfg.fit.rho_sigma_per_nm3 * 1e27,
        depth_bounds=(cfg.nv.depth_bounds_nm[0] * 1e-9, cfg.nv.depth_bounds_nm[1] * 1e-9),
    )


def _fit_dict(r: FitResult) -> dict:
    return {
        "depth_m": r.depth,
        "depth_sigma_m": r.depth_sigma,
        "depth_nm": r.depth_nm,
        "depth_sigma_nm": r.depth_sigma_nm,
        "omega_L_rad_s": r.omega_L,
        "omega_L_sigma_rad_s": r.omega_L_sigma,
        "t2n_star_s": r.t2n_star,
        "t2n_star_sigma_s": r.t2n_star_sigma,
        "chi2": r.chi2,
        "chi2_reduced": r.chi2_reduced,
        "dof": r.dof,
        "covariance": r.covariance,
        "param_names": list(r.param_names),
        "mode": r.mode,
        "mode_selection": r.mode_selection,
        "joint": r.joint,
        "n_traces": r.n_traces,
        "fixed": r.fixed,
        "ambiguous": r.ambiguous,
        "alternatives": [list(a) for a in r.alternatives],
        "residuals": [list(x) for x in r.residuals],
    }


def _fit_task(task):
    traces, fc = task
    try:
        return fit_depth(traces, fc), None
    except PipelineError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_tasks(tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_fit_task, tasks))
    return [_fit_task(t) for t in tasks]


def cmd_fit(cfg: RunConfig, args) -> int:
    if not args.inputs:
        raise ConfigError("fit needs input CSV files")
    out = Path(cfg.output_dir)
    prov = _provenance(cfg)
    fc = _fit_config(cfg)
    entries = []  # (table, normalized trace | None, error)
    for p in args.inputs:
        table = read_csv(p)
        trace = _as_trace(table)
        try:
            norm, _ = _normalize(trace, fc.sample.gamma_n, cfg.fit.window_half_width_ns)
            entries.append((table, norm, None))
        except PipelineError as exc:
            entries.append((table, None, f"normalization: {exc}"))

    ok = [(t, n) for t, n, e in entries if n is not None]
    results = _run_tasks([(n, fc) for _, n in ok], args.jobs)
    per_trace = {}
    failures = []
    for (table, norm), (res, err) in zip(ok, results):
        label = norm.info.label
        if res is None:
            failures.append({"trace": label, "error": err})
            continue
        per_trace[label] = res
        write_json(out / "fits" / f"{label}.json", {"fit": _fit_dict(res), "provenance": prov,
                                                    "source": Path(table.path).name})
    for table, norm, err in entries:
        if norm is None:
            failures.append({"trace": Path(table.path).stem, "error": err})

    # group traces by NV
    groups: dict[tuple[str, str], list] = {}
    for table, norm, _ in entries:
        if norm is None:
            continue
        key = (table.meta.get("sample_id", ""), table.meta.get("nv_id", "") or norm.info.label)
        groups.setdefault(key, []).append(norm)

    rows = []
    joint_tasks, joint_keys = [], []
    for key, traces in groups.items():
        if cfg.fit.joint and len(traces) > 1:
            joint_tasks.append((traces, fc))
            joint_keys.append(key)
    joint_results = dict(zip(joint_keys, _run_tasks(joint_tasks, args.jobs)))

    for key, traces in groups.items():
        fits = [per_trace[t.info.label] for t in traces if t.info.label in per_trace]
        row = {
            "sample_id": key[0],
            "nv_id": key[1],
            "b0_gauss": sorted({round(tesla_to_gauss(t.info.b0), 6) for t in traces}),
            "n_pulses": sorted({t.info.n_pulses for t in traces}),
            "traces": [t.info.label for t in traces],
        }
        if key in joint_results:
            res, err = joint_results[key]
            if res is None:
                failures.append({"trace": "+".join(row["traces"]), "error": err})
                continue
            d, s, method = res.depth, res.depth_sigma, "joint"
            write_json(out / "fits" / f"joint_{key[0]}_{key[1]}.json".replace("/", "_"),
                       {"fit": _fit_dict(res), "provenance": prov})
        elif len(fits) == 1:
            d, s, method = fits[0].depth, fits[0].depth_sigma, "single"
        elif fits:
            d, s = combine_independent(fits)
            method = "weighted-mean"
        else:
            continue
        row.update({"depth_nm": d * 1e9, "depth_sigma_nm": s * 1e9,
                    "depth": format_uncertainty(d * 1e9, s * 1e9), "method": method})
        rows.append(row)

    report = {"rows": rows, "failures": failures, "provenance": prov,
              "fit_options": cfg.fit.model_dump(mode="json")}
    if len(rows) >= 2:
        st = cohort_stats([r["depth_nm"] for r in rows])
        report["cohort"] = {"mean_nm": st.mean, "std_nm": st.std, "n": st.n,
                            "bin_edges_nm": st.bin_edges, "counts": st.counts}
    write_json(out / "report.json", report)
    text = _report_text(report)
    atomic_write_text(out / "report.txt", text)
    print(text, end="")
    return EXIT_FIT if failures else EXIT_OK


def _report_text(report: dict) -> str:
    lines = [f"{'Sample':<8} {'NV':<12} {'B0 (G)':<14} {'N':<14} {'depth (nm)':<12} method"]
    for r in report["rows"]:
        b0 = ",".join(f"{b:g}" for b in r["b0_gauss"])
        ns = ",".join(str(n) for n in r["n_pulses"])
        lines.append(f"{r['sample_id']:<8} {r['nv_id']:<12} {b0:<14} {ns:<14} {r['depth']:<12} {r['method']}")
    if "cohort" in report:
        c = report["cohort"]
        lines.append(f"cohort: n={c['n']} mean={c['mean_nm']:.1f} nm std={c['std_nm']:.1f} nm")
    for f in report["failures"]:
        lines.append(f"FAILED {f['trace']}: {f['error']}")
    p = report["provenance"]
    lines.append(f"config_hash={p['config_hash']} seed={p['seed']} version={p['version']}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def run_oracle(cfg: RunConfig) -> dict:
    """Analytic-vs-Monte-Carlo and pseudospin-vs-exponential checks; returns a report dict."""
    oc = cfg.oracle
    nv = NvCenter(oc.depth_nm * 1e-9, cfg.nv.alpha)
    sample = replace(cfg.sample.build(), rho=oc.rho_per_nm3 * 1e27)
    checks = []

    # Monte Carlo geometric factor
    try:
        gs = oracle.stream_geometric_sum(sample, nv, oc.r_max_nm * 1e-9, cfg.seed)
        ref = geometric_factor_reduced(nv.alpha, nv.depth, sample.geometry)
        dev = gs.relative_deviation(ref)
        checks.append({"name": "geometric_factor_mc", "passed": abs(dev) < oc.tolerance,
                       "relative_deviation": dev, "relative_stderr": gs.gamma_tilde_stderr / ref,
                       "n_spins": gs.n_spins, "tail_fraction": gs.tail / ref, "tolerance": oc.tolerance})
    except ValueError as exc:
        checks.append({"name": "geometric_factor_mc", "passed": False, "error": str(exc)})

    # pseudospin product against the exponential form, plus the kappa bridge
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    ps_sample = replace(sample, rho=oc.pseudospin_rho_per_nm3 * 1e27)
    wl = ps_sample.gamma_n * 0.0197
    for i in range(oc.pseudospin_configs):
        n = int(rng.choice([8, 16, 32, 64, 128]))
        tau = math.pi / wl * (1.0 + rng.uniform(-0.1, 0.1) / n)
        try:
            bath = oracle.sample_bath(ps_sample, nv, 10.0 * nv.depth, int(rng.integers(2**31)))
        except ValueError as exc:
            checks.append({"name": f"pseudospin_{i}", "passed": False, "error": str(exc)})
            continue
        cmp_ = oracle.compare_pseudospin(bath, nv, wl, n, tau)
        bridge = oracle.kappa_brms_bridge(bath, nv)
        passed = (cmp_.abs_difference < oc.pseudospin_tolerance
                  and cmp_.log_relative_difference < oc.pseudospin_tolerance
                  and bridge.relative_difference < 1e-10)
        checks.append({"name": f"pseudospin_{i}", "passed": passed, "n_pulses": n, "tau_s": tau,
                       "n_spins": cmp_.n_spins, "product": cmp_.product, "exponential": cmp_.exponential,
                       "abs_difference": cmp_.abs_difference,
                       "log_relative_difference": cmp_.log_relative_difference,
                       "max_spin_dip": cmp_.max_spin_dip,
                       "kappa_bridge_relative_difference": bridge.relative_difference})
    return {"checks": checks, "passed": all(c["passed"] for c in checks), "provenance": _provenance(cfg)}


def cmd_oracle(cfg: RunConfig, args) -> int:
    report = run_oracle(cfg)
    write_json(Path(cfg.output_dir) / "oracle_report.json", report)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        detail = c.get("error") or ", ".join(
            f"{k}={v:.3g}" for k, v in c.items() if isinstance(v, float))
        print(f"{status} {c['name']}: {detail}")
    return EXIT_OK if report["passed"] else EXIT_ORACLE


# ---------------------------------------------------------------------------
# linewidth and stats
# ---------------------------------------------------------------------------


def cmd_linewidth(cfg: RunConfig, args) -> int:
    lc = cfg.linewidth
    if lc.diffusion_m2_per_s is not None:
        ds = lw.DiffusionSample(diffusion_coefficient=lc.diffusion_m2_per_s)
    elif lc.dynamic_viscosity_pa_s is not None:
        ds = lw.DiffusionSample(hydrodynamic_radius=lc.hydrodynamic_radius_nm * 1e-9,
                                temperature=lc.temperature_k, dynamic_viscosity=lc.dynamic_viscosity_pa_s)
    else:
        if lc.kinematic_viscosity_cst is None or lc.mass_density_kg_m3 is None:
            raise ConfigError("linewidth: need diffusion_m2_per_s, dynamic_viscosity_pa_s, or both "
                              "kinematic_viscosity_cst and mass_density_kg_m3")
        ds = lw.DiffusionSample(hydrodynamic_radius=lc.hydrodynamic_radius_nm * 1e-9,
                                temperature=lc.temperature_k,
                                kinematic_viscosity=lc.kinematic_viscosity_cst * 1e-6,
                                mass_density=lc.mass_density_kg_m3)
    D = lw.diffusion_coefficient(ds)
    conv = args.linewidth_convention
    d_nm = np.geomspace(lc.d_min_nm, lc.d_max_nm, lc.num)
    width = lw.linewidth_vs_depth(d_nm * 1e-9, D, conv)
    prov = _provenance(cfg)
    path = Path(cfg.output_dir) / f"linewidth_{conv}.csv"
    write_csv(path, {"kind": "linewidth", "convention": conv, "diffusion_m2_per_s": D,
                     "config_hash": prov["config_hash"], "seed": cfg.seed},
              ("depth_nm", "linewidth_khz"), np.column_stack([d_nm, width / 1e3]))
    print(path)
    return EXIT_OK


def _depths_from(path) -> list[float]:
    p = Path(path)
    if p.suffix.lower() == ".json":
        data = read_json(p)
        try:
            return [float(r["depth_nm"]) for r in data["rows"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(p, 0, f"not a fit report: {exc}") from None
    table = read_csv(p)
    return [float(x) for x in table.column("depth_nm")]


def cmd_stats(cfg: RunConfig, args) -> int:
    if not args.inputs:
        raise ConfigError("stats needs input files (depth CSVs or report.json)")
    depths = [d for p in args.inputs for d in _depths_from(p)]
    if len(depths) < 2:
        raise ConfigError("stats needs at least two depths")
    st = cohort_stats(depths, bin_width=args.bin_width)
    res = {"mean_nm": st.mean, "std_nm": st.std, "n": st.n, "bin_edges_nm": st.bin_edges,
           "counts": st.counts, "provenance": _provenance(cfg)}
    write_json(Path(cfg.output_dir) / "stats.json", res)
    print(f"n={st.n} mean={st.mean:.1f} nm std={st.std:.1f} nm")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


COMMANDS = {
    "simulate": cmd_simulate,
    "normalize": cmd_normalize,
    "fit": cmd_fit,
    "oracle": cmd_oracle,
    "linewidth": cmd_linewidth,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON or YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("--t2n-mode", choices=("finite", "infinite", "auto"), default=None)
    common.add_argument("--linewidth-convention", choices=("paper", "angular"), default="paper")
    common.add_argument("--out", default=None, help="output directory (overrides config)")

    parser = argparse.ArgumentParser(prog="nvdepth", description="NV depth from nanoscale NMR contrast dips")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write synthetic contrast traces")
    for name, help_ in (("normalize", "divide out the stretched-exponential background"),
                        ("fit", "fit depths and write a report")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("inputs", nargs="*", help="trace CSV files")
    sub.add_parser("oracle", parents=[common], help="compare the analytic model with the oracles")
    sub.add_parser("linewidth", parents=[common], help="diffusion linewidth versus depth")
    sp = sub.add_parser("stats", parents=[common], help="cohort statistics of fitted depths")
    sp.add_argument("inputs", nargs="*", help="depth CSVs or report.json files")
    sp.add_argument("--bin-width", type=float, default=2.0, help="histogram bin width (nm)")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
