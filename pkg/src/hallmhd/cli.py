"""Command-line driver: ``hallmhd {verify-kernels, simulate, ensemble, contraction} CONFIG``.

Configuration is an INI document; every key is checked against a schema
before any computation starts.  Exit codes: 0 success, 2 invalid
configuration, 3 feasibility/convergence/verification failure, 4 more than
1% of ensemble draws failed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import io as fio
from .dynamics import ELECTRON_MHD, HALL_MHD, NSE, SystemKind, energy_balance
from .ensemble_stats import (
    EnsembleConfig,
    InsufficientSamples,
    ensemble_run,
    moments_from_samples,
    tail_from_samples,
)
from .mild_solver import (
    BlowUpError,
    InfeasibleParameters,
    PicardConvergenceError,
    SolverConfig,
    auto_exponent,
    contraction_study,
    etd_integrate,
    picard_solve,
    random_perturbation,
)
from .randomization import GAUSSIAN, RADEMACHER, draw, power_law_field, randomize
from .semigroup import (
    KernelQuery,
    beta_closed_form,
    beta_time_integral,
    kernel_exponent,
    kernel_norm,
    kernel_norm_closed_form,
)
from .spectral_core import NormSpec, SpectralField, get_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3
EXIT_PARTIAL = 4


class ConfigError(ValueError):
    """Invalid configuration document."""


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _pos_float(v: str) -> float:
    x = _float(v)
    if x <= 0:
        raise ValueError("must be positive")
    return x


def _int(v: str) -> int:
    return int(v)


def _pos_int(v: str) -> int:
    x = int(v)
    if x < 1:
        raise ValueError("must be >= 1")
    return x


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be a boolean")


def _choice(*options):
    def parse(v: str) -> str:
        s = v.strip().lower()
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _exponent(v: str):
    if v.strip().lower() == "auto":
        return "auto"
    x = _float(v)
    if x < 2:
        raise ValueError("must be >= 2 or 'auto'")
    return x


def _float_list(v: str) -> list[float]:
    items = [s for s in v.replace(";", ",").split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return [_float(s) for s in items]


def _lambda_grid(v: str):
    if v.strip().lower() == "auto":
        return None
    g = _float_list(v)
    if any(x <= 0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("must be positive and strictly increasing")
    return g


def _pairs(v: str) -> list[tuple[float, float]]:
    out = []
    for item in v.split(","):
        if not item.strip():
            continue
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError("pairs are written r:s")
        out.append((_float(a), _float(b)))
    if not out:
        raise ValueError("empty list")
    return out


# section -> key -> (parser, default); default None with required=True below
SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "system": {"kind": (_choice(ELECTRON_MHD, NSE, HALL_MHD), ELECTRON_MHD), "alpha": (_float, 1.25)},
    "grid": {"n": (_pos_int, 32)},
    "data": {
        "s": (_float, None), "amplitude": (_float, 1e-2), "seed": (_int, 0),
        "distribution": (_choice(GAUSSIAN, RADEMACHER), GAUSSIAN), "shape_seed": (_int, 0),
        "kmax": (_pos_float, None), "u_s": (_float, None), "u_amplitude": (_float, None),
        "u_shape_seed": (_int, 1), "per_component": (_bool, False),
    },
    "exponents": {"p": (_exponent, "auto"), "q": (_exponent, "auto")},
    "time": {"t": (_pos_float, 0.05), "nodes": (_pos_int, 65),
             "refinement": (_choice("geometric", "uniform"), "geometric"),
             "first_node": (_pos_float, 1e-4), "etd_dt": (_pos_float, 2e-4)},
    "picard": {"tol": (_pos_float, 1e-10), "max_iter": (_pos_int, 60)},
    "ensemble": {"n_draws": (_pos_int, 1000), "lambda_grid": (_lambda_grid, None),
                 "r_list": (_float_list, [2.0, 4.0, 8.0, 16.0]), "tail_norm": (_int, 1),
                 "field": (_choice("b", "u"), "b"), "nodes": (_pos_int, 17),
                 "first_node": (_pos_float, 1e-3)},
    "kernels": {"alphas": (_float_list, [1.0, 1.25, 1.5]), "m": (_float_list, [0.0, 1.0, 2.0]),
                "p": (_float_list, [2.0, 4.0]), "t_min_exp": (_int, -4), "t_max_exp": (_int, 4),
                "slope_tol": (_pos_float, 0.01)},
    "beta": {"pairs": (_pairs, [(0.3, 0.7), (0.5, 0.5), (0.7, 0.3)]),
             "times": (_float_list, [1.0, 7.0])},
    "contraction": {"n_pairs": (_pos_int, 10), "amplitude": (_pos_float, 1e-2),
                    "include_identical": (_bool, False)},
    "output": {"directory": (str, "out")},
}

REQUIRED_SECTIONS = {
    "verify-kernels": (),
    "simulate": ("system", "grid", "data"),
    "ensemble": ("system", "grid", "data", "ensemble"),
    "contraction": ("system", "grid"),
}


@dataclass
class Config:
    values: dict[str, dict[str, Any]]
    present: set[str]
    raw: dict[str, dict[str, str]]

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]


def parse_config(text: str, command: str) -> Config:
    """Parse and validate an INI document; raises ConfigError on any problem."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable configuration: {exc}") from exc
    raw = {s: dict(cp[s]) for s in cp.sections()}
    for s in raw:
        if s not in SCHEMA:
            raise ConfigError(f"unknown section [{s}]")
        for k in raw[s]:
            if k not in SCHEMA[s]:
                raise ConfigError(f"unknown key '{k}' in [{s}]")
    for s in REQUIRED_SECTIONS[command]:
        if s not in raw:
            raise ConfigError(f"missing [{s}] section (required by {command})")
    values: dict[str, dict[str, Any]] = {}
    for s, keys in SCHEMA.items():
        values[s] = {}
        for k, (parse, default) in keys.items():
            if s in raw and k in raw[s]:
                try:
                    values[s][k] = parse(raw[s][k])
                except ValueError as exc:
                    raise ConfigError(f"[{s}] {k} = {raw[s][k]!r}: {exc}") from exc
            else:
                values[s][k] = default
    cfg = Config(values, set(raw), raw)
    _cross_validate(cfg, command)
    return cfg


def _cross_validate(cfg: Config, command: str) -> None:
    sysv = cfg["system"]
    if command != "verify-kernels":
        a = sysv["alpha"]
        if not (1.0 <= a < 1.75):
            raise ConfigError(f"[system] alpha = {a} outside [1, 7/4)")
        n = cfg["grid"]["n"]
        if n < 8 or n % 2:
            raise ConfigError(f"[grid] n = {n} must be an even integer >= 8")
        if cfg["time"]["first_node"] >= 1:
            raise ConfigError("[time] first_node must be < 1")
        if cfg["ensemble"]["first_node"] >= 1:
            raise ConfigError("[ensemble] first_node must be < 1")
        if cfg["ensemble"]["tail_norm"] not in (1, 2, 3):
            raise ConfigError("[ensemble] tail_norm must be 1, 2 or 3")
        if any(r < 1 for r in cfg["ensemble"]["r_list"]):
            raise ConfigError("[ensemble] r_list entries must be >= 1")
    if command == "verify-kernels":
        k = cfg["kernels"]
        if k["t_min_exp"] >= k["t_max_exp"]:
            raise ConfigError("[kernels] t_min_exp must be below t_max_exp")
        for a in k["alphas"]:
            if a <= 0:
                raise ConfigError("[kernels] alphas must be positive")
        for p in k["p"]:
            if p <= 0:
                raise ConfigError("[kernels] p must be positive")
        for a in k["alphas"]:
            for m in k["m"]:
                for p in k["p"]:
                    if p * m <= -3:
                        raise ConfigError(f"[kernels] divergent kernel integral at m={m}, p={p}")
        for r, s in cfg["beta"]["pairs"]:
            if not (0 < r < 1 and 0 < s < 1):
                raise ConfigError(f"[beta] pair {r}:{s} needs 0 < r, s < 1")
            if abs(r + s - 1) > 1e-12:
                raise ConfigError(f"[beta] pair {r}:{s} has r + s != 1, so the integral is not "
                                  f"independent of t")
        if any(t <= 0 for t in cfg["beta"]["times"]):
            raise ConfigError("[beta] times must be positive")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    path.write_text(buf.getvalue())


def _manifest(out: Path, command: str, cfg: Config, seeds: dict) -> None:
    doc = {
        "command": command,
        "version": _version(),
        "config": {s: dict(sorted(v.items())) for s, v in sorted(cfg.raw.items())},
        "seeds": seeds,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _resolve_exponents(cfg: Config, kind: SystemKind) -> tuple[float | None, float | None]:
    a = kind.alpha
    p = q = None
    if kind.tag in (ELECTRON_MHD, HALL_MHD):
        p = cfg["exponents"]["p"]
        p = auto_exponent(a, "p") if p == "auto" else p
    if kind.tag in (NSE, HALL_MHD):
        q = cfg["exponents"]["q"]
        q = auto_exponent(a, "q") if q == "auto" else q
    return p, q


def _build_data(cfg: Config, kind: SystemKind, seed: int):
    grid = get_grid(cfg["grid"]["n"])
    d = cfg["data"]
    rd = draw(seed, d["distribution"], grid, d["per_component"])
    B = u = None
    s_B = s_u = None
    if kind.has_magnetic:
        s_B = d["s"] if d["s"] is not None else max(5.5 - 4 * kind.alpha, 2.5 - 2 * kind.alpha)
        B = _randomized(power_law_field(grid, s_B, d["amplitude"], kmax=d["kmax"],
                                        shape_seed=d["shape_seed"]), rd)
    if kind.has_velocity:
        s_u = d["u_s"] if d["u_s"] is not None else (
            d["s"] if d["s"] is not None else max(3.5 - 3.5 * kind.alpha, 1.5 - 2 * kind.alpha))
        amp = d["u_amplitude"] if d["u_amplitude"] is not None else d["amplitude"]
        u = _randomized(power_law_field(grid, s_u, amp, kmax=d["kmax"],
                                        shape_seed=d["u_shape_seed"]), rd)
    return B, u, s_B, s_u


def _randomized(f: SpectralField, rd) -> SpectralField:
    if not rd.per_component:
        return randomize(f, rd)
    # independent variables per component break the transversality; project back
    from .spectral_core import leray_project
    return leray_project(f.multiply(rd.values))


def _solver_config(cfg: Config, seed: int) -> tuple[SolverConfig, SystemKind]:
    kind = SystemKind(cfg["system"]["kind"], cfg["system"]["alpha"])
    p, q = _resolve_exponents(cfg, kind)
    B, u, s_B, s_u = _build_data(cfg, kind, seed)
    t = cfg["time"]
    sc = SolverConfig(kind, cfg["grid"]["n"], t["t"], p=p, q=q, nodes=t["nodes"],
                      spacing=t["refinement"], first_node=t["first_node"],
                      picard_tol=cfg["picard"]["tol"], max_iterations=cfg["picard"]["max_iter"],
                      B_data=B, u_data=u, s_B=s_B, s_u=s_u, etd_dt=t["etd_dt"])
    return sc, kind


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify_kernels(cfg: Config, out: Path, seed: int) -> int:
    k = cfg["kernels"]
    ts = 2.0 ** np.arange(k["t_min_exp"], k["t_max_exp"] + 1)
    summary = []
    ok = True
    for a in k["alphas"]:
        for m in k["m"]:
            for p in k["p"]:
                vals = np.array([kernel_norm(KernelQuery(a, m, p, float(t))) for t in ts])
                pred = np.array([kernel_norm_closed_form(KernelQuery(a, m, p, float(t))) for t in ts])
                slope = float(np.polyfit(np.log(ts), np.log(vals), 1)[0])
                expected = kernel_exponent(a, m, p)
                rel = abs(slope - expected) / abs(expected)
                passed = rel <= k["slope_tol"]
                ok &= passed
                _write_csv(out / f"kernel_a{a:g}_m{m:g}_p{p:g}.csv", ["t", "kernel_norm", "predicted"],
                           zip(ts, vals, pred))
                summary.append((a, m, p, slope, expected, rel, "pass" if passed else "FAIL"))
    _write_csv(out / "kernel_slopes.csv",
               ["alpha", "m", "p", "slope", "predicted_slope", "rel_err", "status"], summary)
    rows = []
    for r, s in cfg["beta"]["pairs"]:
        oracle = beta_closed_form(r, s)
        vals = [beta_time_integral(r, s, t) for t in cfg["beta"]["times"]]
        spread = max(vals) - min(vals)
        err = max(abs(v - oracle) for v in vals)
        passed = spread <= 1e-8 and err <= 1e-6
        ok &= passed
        for t, v in zip(cfg["beta"]["times"], vals):
            rows.append((r, s, t, v, oracle, "pass" if passed else "FAIL"))
    _write_csv(out / "beta_integrals.csv", ["r", "s", "t", "value", "oracle", "status"], rows)
    lines = [f"kernel slopes: {sum(1 for r in summary if r[-1] == 'pass')}/{len(summary)} within "
             f"{k['slope_tol']:.0%}", f"beta integrals: {'pass' if all(r[-1] == 'pass' for r in rows) else 'FAIL'}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    _manifest(out, "verify-kernels", cfg, {})
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_simulate(cfg: Config, out: Path, seed: int) -> int:
    sc, kind = _solver_config(cfg, seed)
    _manifest(out, "simulate", cfg, {"data_seed": seed})
    try:
        res = picard_solve(sc)
    except PicardConvergenceError as exc:
        (out / "picard_residuals.csv").write_text(exc.report.to_csv())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    (out / "contraction.csv").write_text(res.report.to_csv())
    try:
        tu, tB = etd_integrate(sc)
    except BlowUpError as exc:
        print(f"error: reference integrator: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    lines = [f"picard: converged in {res.report.iterations} iterations, rho = {res.report.rho:.4g}, "
             f"C = {res.report.C:.4g}, lambda = {res.report.lam:.4g}"]
    rows = []
    times = sc.times
    if kind.has_magnetic:
        sig = 3.5 - 2 * kind.alpha
        fio.write_trajectory(out / "H.strj", res.H)
        fio.write_trajectory(out / "B_reference.strj", tB)
        pic = res.B.spatial_norms(NormSpec.sobolev(sig))
        ref = tB.spatial_norms(NormSpec.sobolev(sig))
        diff = (res.B - tB).spatial_norms(NormSpec.sobolev(sig))
        hn = res.H.spatial_norms(NormSpec.sobolev(sig))
        fn = res.free_B.spatial_norms(NormSpec.sobolev(sig))
        scale = float(np.max(ref))
        rel = float(np.max(diff)) / scale if scale > 0 else 0.0
        rows = list(zip(times, pic, ref, diff))
        _write_csv(out / "regularity.csv", ["t", "perturbation_norm", "free_norm"], zip(times, hn, fn))
        lines.append(f"magnetic: sup_t |B_picard - B_reference| / sup_t |B_reference| = {rel:.3e} "
                     f"in H^{sig:g}")
        lines.append(f"magnetic: sup_t |H| = {float(np.max(hn)):.4e}, |f| = {float(fn[0]):.4e} in H^{sig:g}")
    if kind.has_velocity:
        sig = 2.5 - 2 * kind.alpha
        fio.write_trajectory(out / "V.strj", res.V)
        fio.write_trajectory(out / "u_reference.strj", tu)
        diff = (res.u - tu).spatial_norms(NormSpec.sobolev(sig))
        scale = float(np.max(tu.spatial_norms(NormSpec.sobolev(sig))))
        rel = float(np.max(diff)) / scale if scale > 0 else 0.0
        lines.append(f"velocity: sup_t |u_picard - u_reference| / sup_t |u_reference| = {rel:.3e} "
                     f"in H^{sig:g}")
    if rows:
        _write_csv(out / "comparison.csv", ["t", "picard_norm", "reference_norm", "difference"], rows)
    eb = energy_balance(tu if kind.has_velocity else None, tB if kind.has_magnetic else None, kind.alpha)
    _write_csv(out / "energy.csv", ["t_start", "t_end", "residual"],
               zip(eb.times[:-1], eb.times[1:], eb.residual))
    lines.append(f"energy balance: max relative residual {eb.relative_residual:.3e}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_ensemble(cfg: Config, out: Path, seed: int) -> int:
    kind = SystemKind(cfg["system"]["kind"], cfg["system"]["alpha"])
    e = cfg["ensemble"]
    which = "B" if e["field"] == "b" else "u"
    if which == "B" and not kind.has_magnetic or which == "u" and not kind.has_velocity:
        raise ConfigError(f"[ensemble] field = {e['field']} not present in system {kind.tag}")
    p, q = _resolve_exponents(cfg, kind)
    grid = get_grid(cfg["grid"]["n"])
    d = cfg["data"]
    if which == "B":
        s = d["s"] if d["s"] is not None else max(5.5 - 4 * kind.alpha, 2.5 - 2 * kind.alpha)
        f = power_law_field(grid, s, d["amplitude"], kmax=d["kmax"], shape_seed=d["shape_seed"])
    else:
        s = d["u_s"] if d["u_s"] is not None else max(3.5 - 3.5 * kind.alpha, 1.5 - 2 * kind.alpha)
        amp = d["u_amplitude"] if d["u_amplitude"] is not None else d["amplitude"]
        f = power_law_field(grid, s, amp, kmax=d["kmax"], shape_seed=d["u_shape_seed"])
    ec = EnsembleConfig(f, kind.alpha, base_seed=seed, n_draws=e["n_draws"], distribution=d["distribution"],
                        which=which, p=p, q=q, s=s, T=cfg["time"]["t"], nodes=e["nodes"],
                        spacing=cfg["time"]["refinement"], first_node=e["first_node"],
                        lambda_grid=e["lambda_grid"], r_list=e["r_list"], tail_norm=e["tail_norm"] - 1)
    _manifest(out, "ensemble", cfg, {"base_seed": seed})
    res = ensemble_run(ec)
    (out / "draws.csv").write_text(res.to_csv(ec.labels))
    x = res.matrix()
    col = x[:, ec.tail_norm] if x.size else np.zeros(0)
    tail = tail_from_samples(col, ec.lambda_grid, ec.data_norm)
    (out / "tail.csv").write_text(tail.to_csv())
    lines = [f"draws: {res.n}, failed: {len(res.failures)}",
             f"tail fit on {ec.labels[ec.tail_norm]}: slope = {tail.slope:.6g}, R^2 = {tail.r2:.4f}, "
             f"c1 = {tail.c1:.4g}, c2 = {tail.c2:.4g}"]
    try:
        mom = moments_from_samples(col, ec.r_list, ec.data_norm)
        (out / "moments.csv").write_text(mom.to_csv())
        lines.append("moment ratios: " + ", ".join(f"r={r:g}: {q:.4g}" for r, q in zip(mom.r, mom.ratio)))
    except InsufficientSamples as exc:
        lines.append(f"moments skipped: {exc}")
    for i, msg in res.failures:
        lines.append(f"draw {i} failed: {msg}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_PARTIAL if res.failure_fraction > 0.01 else EXIT_OK


def cmd_contraction(cfg: Config, out: Path, seed: int) -> int:
    kind = SystemKind(cfg["system"]["kind"], cfg["system"]["alpha"])
    if kind.tag != ELECTRON_MHD:
        raise ConfigError("contraction probes are defined for the electron-MHD map")
    # probes are taken around zero free data so that lambda = 0
    p, _ = _resolve_exponents(cfg, kind)
    t = cfg["time"]
    sc = SolverConfig(kind, cfg["grid"]["n"], t["t"], p=p, nodes=t["nodes"], spacing=t["refinement"],
                      first_node=t["first_node"])
    c = cfg["contraction"]
    pairs = [(random_perturbation(sc, c["amplitude"], seed + 2 * i + 1),
              random_perturbation(sc, c["amplitude"], seed + 2 * i + 2)) for i in range(c["n_pairs"])]
    if c["include_identical"]:
        pairs.append((pairs[0][0], pairs[0][0]))
    _manifest(out, "contraction", cfg, {"probe_seed": seed})
    study = contraction_study(sc, pairs)
    (out / "contraction.csv").write_text(study.to_csv())
    lines = [f"probes: {len(study.probes)}, skipped identical pairs: {study.skipped}",
             f"C = {study.C:.6g} (dispersion {study.dispersion:.2%})",
             f"lambda_bar = 1/(3C) = {study.lambda_bar:.6g}, 3 C lambda_bar = {3 * study.C * study.lambda_bar:g}",
             f"ball radius = 2 C lambda_bar^2 = {study.ball_radius:.6g}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "verify-kernels": cmd_verify_kernels,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "contraction": cmd_contraction,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hallmhd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="INI configuration file (defaults used when omitted "
                                                  "for verify-kernels)")
        sp.add_argument("--seed", type=int, help="override the [data] seed")
        sp.add_argument("--out", help="override the [output] directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.command != "verify-kernels":
                raise ConfigError(f"{args.command} needs a configuration file")
            text = ""
        else:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        cfg = parse_config(text, args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg["data"]["seed"]
    out = Path(args.out if args.out is not None else cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[args.command](cfg, out, seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleParameters as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
