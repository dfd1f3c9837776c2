"""Command-line experiment runner.

Usage::

    python -m casimir_rabi run CONFIG.ini [--out DIR] [--workers N] [--seed N]
    python -m casimir_rabi reproduce FIGURE [--out DIR] [--workers N] [--seed N]

Configs are INI files. Every frequency and rate is a plain number in units
of the mechanical frequency. Each run writes its data files, the resolved
config and a ``manifest.json`` into the output directory and nowhere else.
"""

from __future__ import annotations

import argparse
import configparser
import json
import platform
import sys
import time
from importlib import resources
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import scipy

from . import emission, mcwf, qfi, spectra
from .dynamics import fidelity_trace, two_level_expectations, write_expectation_csv, write_fidelity_csv
from .fock import FockSpace, SpectralPropagator, leakage_report
from .model import ModelParams, build_exact, effective_rabi, resonant_omega_c

__all__ = ["ConfigError", "load_config", "resolve", "run", "reproduce", "main", "FIGURES"]

FIGURES = {"2": "fig2.ini", "3": "fig3.ini", "4": "fig4.ini", "5": "fig5.ini",
           "6": "fig6.ini", "7": "fig7.ini", "9": "fig9.ini"}
KINDS = ("spectrum", "fidelity", "trajectories", "emission", "rate_scan", "bundles", "qfi")
REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _float(s):
    return float(s)


def _floats(s):
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _state(s):
    n, k = (int(x) for x in s.split(","))
    return [n, k]


def _auto_float(s):
    return None if s.strip().lower() in ("auto", "resonant") else float(s)


def _auto_floats(s):
    return None if s.strip().lower() == "auto" else _floats(s)


# section -> key -> (parser, default); None defaults are filled in by resolve()
SCHEMA = {
    "experiment": {"kind": (str, REQUIRED)},
    "model": {"g": (_float, REQUIRED), "omega_c": (_auto_float, None),
              "gamma_a": (_float, 0.0), "gamma_b": (_float, 0.0)},
    "space": {"n_cav": (int, 6), "n_mech": (int, 8)},
    "spectrum": {"ratio_min": (_float, 1.4995), "ratio_max": (_float, 1.5005),
                 "n_samples": (int, 201), "refine": (_bool, True)},
    "fidelity": {"g_values": (_auto_floats, None), "t_final": (_float, 1.0077e8),
                 "n_samples": (int, 2001), "initial": (_state, [0, 3])},
    "trajectories": {"initial": (_state, [0, 3]), "n_traj": (int, 500), "master_seed": (int, 42),
                     "t_final": (_auto_float, None), "dt": (_auto_float, None),
                     "frame": (str, "rotating"), "record_every": (int, 20)},
    "rate_scan": {"ratios": (_floats, [5.0, 1.0, 0.2]), "gamma_a": (_float, 1e-9)},
    "bundles": {"baseline_n_traj": (int, 100000)},
    "qfi": {"t_f": (_auto_float, None), "width": (_float, 1e-4), "n_samples": (int, 201),
            "delta": (_float, qfi.DEFAULT_DELTA), "method": (str, "fd"), "initial": (_state, [0, 3])},
}
SECTIONS_FOR = {
    "spectrum": ("spectrum",),
    "fidelity": ("fidelity",),
    "trajectories": ("trajectories",),
    "emission": ("trajectories",),
    "rate_scan": ("trajectories", "rate_scan"),
    "bundles": ("trajectories", "bundles"),
    "qfi": ("qfi",),
}


def load_config(text: str) -> dict:
    """Parse INI text against the schema; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"[{sec}]", "unknown section")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"[{sec}] {key}", "unknown field")
    cfg = {}
    for sec, fields in SCHEMA.items():
        cfg[sec] = {}
        for key, (parse, default) in fields.items():
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    cfg[sec][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] {key}", f"cannot parse {raw!r}: {exc}") from exc
            elif default is REQUIRED:
                raise ConfigError(f"[{sec}] {key}", "missing required field")
            else:
                cfg[sec][key] = default
    if cfg["experiment"]["kind"] not in KINDS:
        raise ConfigError("[experiment] kind", f"unknown kind {cfg['experiment']['kind']!r}; expected one of {KINDS}")
    return cfg


def resolve(cfg: dict, seed: int | None = None) -> dict:
    """Fill derived defaults (resonant omega_c, t_final, dt, ...) in place and return ``cfg``."""
    m = cfg["model"]
    try:
        base = ModelParams(omega_c=1.5, g=m["g"], gamma_a=m["gamma_a"], gamma_b=m["gamma_b"])
        if m["omega_c"] is None:
            m["omega_c"] = resonant_omega_c(base)
        p = base.replace(omega_c=m["omega_c"])
    except ValueError as exc:
        raise ConfigError("[model]", str(exc)) from exc
    tr = cfg["trajectories"]
    if seed is not None:
        tr["master_seed"] = int(seed)
    kind = cfg["experiment"]["kind"]
    if kind in ("trajectories", "emission", "bundles"):
        rates = [r for r in (p.gamma_a, p.gamma_b) if r > 0]
        if tr["t_final"] is None:
            if not rates:
                raise ConfigError("[trajectories] t_final", "required when both loss rates are zero")
            tr["t_final"] = 5 / min(rates)
        if tr["dt"] is None:
            tr["dt"] = mcwf.default_dt(p)
    if kind == "fidelity" and cfg["fidelity"]["g_values"] is None:
        cfg["fidelity"]["g_values"] = [p.g]
    if kind == "qfi" and cfg["qfi"]["t_f"] is None:
        cfg["qfi"]["t_f"] = qfi.rabi_half_period(p)
    for sec in list(cfg):
        if sec not in ("experiment", "model", "space") and sec not in SECTIONS_FOR[kind]:
            del cfg[sec]
    return cfg


def _params(cfg) -> ModelParams:
    m = cfg["model"]
    return ModelParams(omega_c=m["omega_c"], g=m["g"], gamma_a=m["gamma_a"], gamma_b=m["gamma_b"])


def _space(cfg) -> FockSpace:
    return FockSpace(cfg["space"]["n_cav"], cfg["space"]["n_mech"])


def _merge(reports) -> dict:
    reports = list(reports)
    return {
        "top_photon_level": max(r["top_photon_level"] for r in reports),
        "top_phonon_level": max(r["top_phonon_level"] for r in reports),
        "threshold": reports[0]["threshold"],
    }


def _check(name, ok, detail):
    return {"check": name, "pass": bool(ok), "detail": detail}


# -- experiments ---------------------------------------------------------------
# each returns (summary, leakage report, checks) and writes files under ``out``


def _exp_spectrum(cfg, out: Path, workers: int):
    p, space = _params(cfg), _space(cfg)
    sc = cfg["spectrum"]
    window = (sc["ratio_min"], sc["ratio_max"])
    s = spectra.sweep(p, space, window, sc["n_samples"], workers=workers)
    spectra.write_sweep_csv(s, out / "spectrum.csv")
    if sc["refine"]:
        ratio, split, zooms = spectra.locate_crossing(p, space, window, sc["n_samples"], workers=workers)
        for i, z in enumerate(zooms[1:], 1):
            spectra.write_sweep_csv(z, out / f"spectrum_zoom{i}.csv")
    else:
        ratio, split = spectra.min_splitting(s)
    _, V, _ = spectra.pair_states(build_exact(p.replace(omega_c=ratio), space), space)
    i03, i20 = space.index(0, 3), space.index(2, 0)
    ov = {"overlap03": (np.abs(V[i03]) ** 2).tolist(), "overlap20": (np.abs(V[i20]) ** 2).tolist()}
    theory = 2 * effective_rabi(p)
    summary = {"ratio_at_min": ratio, "splitting": split, "splitting_formula": theory,
               "resonant_formula": resonant_omega_c(p), "pair_at_min": ov, "n_rows": s.n_samples}
    checks = [
        _check("crossing location", abs(ratio - resonant_omega_c(p)) <= 2e-6, f"ratio {ratio:.10f}"),
        _check("splitting", abs(split / theory - 1) <= 0.05, f"{split:.6e} vs {theory:.6e}"),
        _check("equal superpositions", all(0.49 <= x <= 0.51 for x in ov["overlap03"] + ov["overlap20"]),
               f"{ov}"),
    ]
    return summary, leakage_report(space, V, warn=True), checks


def _exp_fidelity(cfg, out: Path, workers: int):
    p, space = _params(cfg), _space(cfg)
    fc = cfg["fidelity"]
    psi0 = space.ket(*fc["initial"])
    mins, leaks = {}, []
    for g in fc["g_values"]:
        pg = p.replace(g=g)  # one cavity frequency for every coupling
        tr = fidelity_trace(pg, space, psi0, fc["t_final"], fc["n_samples"])
        write_fidelity_csv(tr, out / f"fidelity_g{g:g}.csv")
        mins[f"{g:g}"] = tr.min_fidelity
        leaks.append({**tr.leakage, "threshold": 1e-6})
    vals = [mins[f"{g:g}"] for g in sorted(fc["g_values"])]
    checks = [_check("min F >= 0.99 at smallest g", vals[0] >= 0.99, f"{vals[0]:.6f}")]
    if len(vals) > 1:
        checks.append(_check("min F decreases with g", all(a > b for a, b in zip(vals, vals[1:])), f"{mins}"))
    return {"min_fidelity": mins}, _merge(leaks), checks


def _trajectory_setup(cfg):
    p, space = _params(cfg), _space(cfg)
    tc = cfg["trajectories"]
    return p, space, space.ket(*tc["initial"]), tc


def _trajectory_leakage(p, space, psi0, tc):
    eng = mcwf.JumpEngine(p, space, tc["frame"])
    t = np.linspace(0, tc["t_final"], 512)
    return leakage_report(space, eng.evolve(psi0, eng.coefficients(psi0), t))


def _exp_trajectories(cfg, out: Path, workers: int):
    p, space, psi0, tc = _trajectory_setup(cfg)
    recs = mcwf.run_ensemble(p, space, psi0, tc["t_final"], tc["dt"], tc["master_seed"], tc["n_traj"],
                             frame=tc["frame"], record_every=tc["record_every"], workers=workers)
    mcwf.write_jsonl(recs, out / "trajectories.jsonl")
    for r in recs[: min(len(recs), 10)]:
        mcwf.write_trajectory_csv(r, out / f"trajectory_{r.index:04d}.csv")
    summary = {"n_traj": len(recs), "first_channel": {
        ch: sum(r.first_channel == ch for r in recs) for ch in mcwf.CHANNELS}}
    checks = []
    if tc["initial"] == [0, 3] and p.g > 0:
        T = 2 * np.pi / effective_rabi(p)
        t = np.linspace(0, 2 * T, 2001)
        na, nb, _ = mcwf.no_jump_trace(p, space, psi0, t, frame=tc["frame"])
        ea, eb = two_level_expectations(p, t)
        write_expectation_csv(t, na, nb, out / "no_jump_two_periods.csv")
        dev = float(max(np.abs(na - ea).max(), np.abs(nb - eb).max()))
        summary["no_jump_max_deviation"] = dev
        checks.append(_check("no-jump expectations follow the two-level formula", dev <= 2e-2, f"max dev {dev:.3e}"))
    return summary, _trajectory_leakage(p, space, psi0, tc), checks


def _exp_emission(cfg, out: Path, workers: int):
    p, space, psi0, tc = _trajectory_setup(cfg)
    recs = mcwf.run_ensemble(p, space, psi0, tc["t_final"], tc["dt"], tc["master_seed"], tc["n_traj"],
                             frame=tc["frame"], record_every=tc["record_every"], workers=workers)
    mcwf.write_jsonl(recs, out / "trajectories.jsonl")
    st = emission.classify(recs)
    emission.write_stats_json(st, out / "emission_stats.json")
    emission.write_histogram_csv(st, out / "first_emission_histogram.csv")
    n = st.counts["PtBE"]
    checks = [
        _check("photon-first count in [200, 255]", 200 <= n <= 255, f"{n}/{st.n_traj}"),
        _check("phonon bin [2.5,3] > [2,2.5]", st.bin_count("mechanical", 2.5) > st.bin_count("mechanical", 2.0),
               f"{st.bin_count('mechanical', 2.5)} vs {st.bin_count('mechanical', 2.0)}"),
        _check("photon bin [1.5,2] > [1,1.5]", st.bin_count("cavity", 1.5) > st.bin_count("cavity", 1.0),
               f"{st.bin_count('cavity', 1.5)} vs {st.bin_count('cavity', 1.0)}"),
    ]
    return st.to_dict(), _trajectory_leakage(p, space, psi0, tc), checks


def _exp_rate_scan(cfg, out: Path, workers: int):
    p, space, psi0, tc = _trajectory_setup(cfg)
    rc = cfg["rate_scan"]
    stats = emission.rate_scan(p, rc["ratios"], tc["n_traj"], tc["master_seed"], space, psi0,
                               gamma_a=rc["gamma_a"], workers=workers)
    emission.write_rate_scan_csv(stats, out / "rate_scan.csv")
    by_ratio = {s.meta["ratio"]: s for s in stats}
    pval = emission.bundle_homogeneity(stats)
    checks = [_check("2PtBE/PtBE homogeneous across rates", pval > 0.01, f"chi2 p = {pval:.3g}")]
    if 5.0 in by_ratio:
        s5 = by_ratio[5.0]
        checks.append(_check("photon < 0.5 x phonon at gamma_b = 5 gamma_a",
                             s5.fraction("PtBE") < 0.5 * s5.fraction("PnBE"),
                             f"{s5.fraction('PtBE'):.3f} vs {s5.fraction('PnBE'):.3f}"))
    order = sorted(by_ratio, reverse=True)
    fr = [by_ratio[r].fraction("PtBE") for r in order]
    checks.append(_check("photon fraction rises as gamma_b/gamma_a falls",
                         all(a < b for a, b in zip(fr, fr[1:])), f"{dict(zip(order, fr))}"))
    summary = {"ratios": order, "photon_fraction": fr, "chi2_p_2PtBE": pval,
               "stats": [s.to_dict() for s in stats]}
    leak = _trajectory_leakage(p.replace(gamma_a=rc["gamma_a"], gamma_b=rc["gamma_a"]), space, psi0,
                               {**tc, "t_final": 5 / rc["gamma_a"]})
    return summary, leak, checks


def _exp_bundles(cfg, out: Path, workers: int):
    p, space, psi0, tc = _trajectory_setup(cfg)
    nb = cfg["bundles"]["baseline_n_traj"]
    recs = mcwf.run_ensemble(p, space, psi0, tc["t_final"], tc["dt"], tc["master_seed"], tc["n_traj"],
                             frame=tc["frame"], record_every=tc["record_every"], workers=workers)
    dce = emission.classify(recs)
    base_ph = emission.free_dissipation_baseline((2, 0), p.gamma_a, p.gamma_b, nb, tc["master_seed"], workers)
    base_pn2 = emission.free_dissipation_baseline((0, 2), p.gamma_a, p.gamma_b, nb, tc["master_seed"] + 1, workers)
    base_pn3 = emission.free_dissipation_baseline((0, 3), p.gamma_a, p.gamma_b, nb, tc["master_seed"] + 2, workers)
    rows = [("with DCE", "2PtBE", dce), ("with DCE", "2PnBE", dce), ("with DCE", "3PnBE", dce),
            ("free |2,0>", "2PtBE", base_ph), ("free |0,2>", "2PnBE", base_pn2), ("free |0,3>", "3PnBE", base_pn3)]
    emission.write_bundle_csv(rows, out / "bundle_probabilities.csv")
    emission.write_stats_json(dce, out / "emission_stats.json")

    def exceeds(key, of, base):
        f, b = dce.fraction(key, of), base.fraction(key, of)
        sig = np.hypot(dce.sigma(key, of), base.sigma(key, of))
        return f - b > 2 * sig, f"{f:.4f} vs {b:.4f} (2 sigma = {2 * sig:.4f})"

    e = np.e
    checks = [
        _check("free |2,0> two-photon bundle = 1 - 1/e",
               abs(base_ph.fraction("2PtBE", "PtBE") - (1 - 1 / e)) <= 2 * base_ph.sigma("2PtBE", "PtBE"),
               f"{base_ph.fraction('2PtBE', 'PtBE'):.4f}"),
        _check("free |0,3> three-phonon bundle = (1 - e^-2)(1 - 1/e)",
               abs(base_pn3.fraction("3PnBE", "PnBE") - (1 - e**-2) * (1 - 1 / e))
               <= 2 * base_pn3.sigma("3PnBE", "PnBE"), f"{base_pn3.fraction('3PnBE', 'PnBE'):.4f}"),
        _check("2PtBE above free baseline", *exceeds("2PtBE", "PtBE", base_ph)),
        _check("2PnBE above free baseline", *exceeds("2PnBE", "PnBE", base_pn2)),
    ]
    summary = {"dce": dce.to_dict(), "free_20": base_ph.to_dict(), "free_02": base_pn2.to_dict(),
               "free_03": base_pn3.to_dict()}
    return summary, _trajectory_leakage(p, space, psi0, tc), checks


def _exp_qfi(cfg, out: Path, workers: int):
    p, space = _params(cfg), _space(cfg)
    qc = cfg["qfi"]
    psi0 = space.ket(*qc["initial"])
    w, F, scans = qfi.locate_peak(p, space, t_f=qc["t_f"], width=qc["width"], n_samples=qc["n_samples"],
                                  psi0=psi0, delta=qc["delta"], method=qc["method"], workers=workers)
    qfi.write_qfi_csv(scans[0], out / "qfi_scan.csv")
    for i, z in enumerate(scans[1:], 1):
        qfi.write_qfi_csv(z, out / f"qfi_zoom{i}.csv")
    qfi.write_peak_json(w, F, scans[0], out / "qfi_peak.json")
    p0 = p.replace(g=0.0, omega_c=w)
    controls = {f"|{n},{k}>": qfi.qfi_at(p0, space, space.ket(n, k), qc["t_f"], qc["delta"])
                for n, k in ((0, 3), (2, 0))}
    checks = [
        _check("peak location", abs(w - resonant_omega_c(p)) <= 2e-6, f"{w:.10f}"),
        _check("peak value in [1e16, 1e18]", 1e16 <= F <= 1e18, f"{F:.4e}"),
        _check("g = 0 controls vanish", all(abs(v) <= 1e-6 * F for v in controls.values()), f"{controls}"),
    ]
    phi = SpectralPropagator(build_exact(p.replace(omega_c=w), space), hermitian=True).apply(psi0, qc["t_f"])
    summary = {"omega_c_peak": w, "F_peak": F, "peak_to_edge": scans[0].peak_to_edge(F), "g0_controls": controls}
    return summary, leakage_report(space, phi), checks


EXPERIMENTS = {
    "spectrum": _exp_spectrum, "fidelity": _exp_fidelity, "trajectories": _exp_trajectories,
    "emission": _exp_emission, "rate_scan": _exp_rate_scan, "bundles": _exp_bundles, "qfi": _exp_qfi,
}


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _write_config(cfg: dict, path: Path) -> None:
    cp = configparser.ConfigParser()
    for sec, fields in cfg.items():
        cp[sec] = {k: (", ".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v) if isinstance(v, list) else
                       repr(float(v)) if isinstance(v, float) else str(v)) for k, v in fields.items()}
    with open(path, "w") as fh:
        fh.write("# resolved config; frequencies and rates in units of omega_m\n")
        cp.write(fh)


def run(config_text: str, out: Path, workers: int = 1, seed: int | None = None, command: str = "") -> dict:
    """Run one experiment; return the manifest that was written to ``out``."""
    cfg = resolve(load_config(config_text), seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_config(cfg, out / "resolved_config.ini")
    kind = cfg["experiment"]["kind"]
    t0 = time.perf_counter()
    summary, leakage, checks = EXPERIMENTS[kind](cfg, out, workers)
    wall = time.perf_counter() - t0
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    manifest = {
        "command": command,
        "experiment": kind,
        "config": cfg,
        "version": _version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "wall_time_s": wall,
        "workers": workers,
        "leakage": leakage,
        "rng": mcwf.RNG_ALGORITHM,
        "master_seed": cfg.get("trajectories", {}).get("master_seed"),
        "checks": checks,
        "outputs": sorted(f.name for f in out.iterdir() if f.name != "manifest.json") + ["manifest.json"],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
    return manifest


def figure_config(figure_id: str) -> str:
    fid = str(figure_id)
    if fid not in FIGURES:
        raise KeyError(f"unknown figure {figure_id!r}; expected one of {sorted(FIGURES)}")
    return resources.files("casimir_rabi").joinpath("configs", FIGURES[fid]).read_text()


def reproduce(figure_id: str, out: Path | None = None, workers: int = 1, seed: int | None = None) -> dict:
    text = figure_config(figure_id)
    return run(text, Path(out or f"fig{figure_id}"), workers, seed, command=f"reproduce {figure_id}")


def _report(manifest: dict) -> int:
    for c in manifest["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']}: {c['detail']}")
    print(f"wrote {len(manifest['outputs'])} files; wall time {manifest['wall_time_s']:.1f} s")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m casimir_rabi", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    f = sub.add_parser("reproduce", help="run the shipped config for a figure")
    f.add_argument("figure", choices=sorted(FIGURES))
    for sp in (r, f):
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            text = Path(args.config).read_text()
            out = Path(args.out or Path(args.config).stem)
            manifest = run(text, out, args.workers, args.seed, command=f"run {args.config}")
        else:
            manifest = reproduce(args.figure, args.out, args.workers, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - numerical guard failures surface verbatim
        print(f"error ({type(exc).__module__}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    return _report(manifest)
