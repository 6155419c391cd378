"""Command-line front end: ``gcf-lab <subcommand> [options]``.

Options may also come from a ``key = value`` file passed with ``--config``;
flags given on the command line win. Exit codes: 0 success, 2 invalid input,
3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from .constants import FlowParams, derive_constants, jacobi_count_round
from .exceptions import GCFLabError, SolverFailure, ValidationError
from .records import (
    SCHEMA_VERSION,
    RunConfig,
    dumps,
    make_record,
    read_record,
    write_csv,
    write_record,
)

log = logging.getLogger("gcf_lab")

__all__ = ["main", "run", "parse_config_file", "build_parser", "parse_alpha_range"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

# option name -> (type, default, help); shared between the parser and config files
_COMMON = {
    "n": (int, 2, "ambient dimension n (level sets in R^n)"),
    "alpha": (float, 0.1, "flow exponent alpha in (0, 1/2)"),
}
_SPECS = {
    "constants": dict(_COMMON),
    "shrinker": {
        **_COMMON,
        "k": (int, 3, "symmetry order (0 = round)"),
        "N": (int, 128, "angular samples (power of two)"),
        "root": (int, 0, "which shooting root to keep when several exist"),
    },
    "spectrum": {
        **_COMMON,
        "k": (int, 0, "symmetry order when no profile file is given"),
        "N": (int, 128, "angular samples"),
        "num": (int, 12, "number of eigenpairs to report"),
        "profile": (str, None, "shrinker JSON produced by the shrinker subcommand"),
    },
    "radial": {
        **_COMMON,
        "M": (float, 1.0, "gradient weight M > 0"),
        "l_max": (float, 1e6, "largest height"),
        "fit": (int, 1, "also fit the asymptotic expansion (needs l_max >= 1e4)"),
        "csv": (str, None, "CSV path for (l, f, f_l)"),
    },
    "exterior": {
        **_COMMON,
        "k": (int, 0, "symmetry order of the shrinker (0 = round)"),
        "N": (int, 128, "angular samples"),
        "R": (float, 8.0, "inner log-radius"),
        "gamma": (float, None, "decay class gamma (default: middle of the first admissible window)"),
        "span": (float, 16.0, "S_max - R"),
        "ds": (float, 0.02, "s-grid spacing"),
        "mode": (int, -1, "Jacobi mode j to perturb (-1: none)"),
        "b": (float, 0.0, "Jacobi amplitude"),
        "slice_stride": (int, 10, "write every k-th slice of the field"),
    },
    "march": {
        **_COMMON,
        "k": (int, 0, "symmetry order of the shrinker (0 = round)"),
        "N": (int, 128, "angular samples"),
        "R": (float, 8.0, "inner log-radius of the exterior solve"),
        "gamma": (float, None, "decay class of the zero-seed solution (default: middle of the first admissible window)"),
        "span": (float, 16.0, "S_max - R"),
        "ds": (float, 0.02, "s-grid spacing"),
        "s_start": (float, 12.0, "log-height where the march starts"),
        "decades": (float, 2.0, "decades of l to march"),
        "direction": (str, "up", "up or down"),
        "mode": (int, -1, "Jacobi mode for a paired run (-1: none)"),
        "b": (float, 0.0, "Jacobi amplitude of the paired run"),
        "max_beta": (float, 1.5, "keep eigenmodes with beta+ <= max_beta in the march"),
        "csv": (str, None, "CSV path for the slices of S"),
    },
    "sweep": {
        "n": (int, 2, "ambient dimension"),
        "alphas": (str, "0.05:0.25:0.01", "alpha range start:stop:step (inclusive)"),
        "what": (str, "K", "quantity: K or constants"),
        "csv": (str, None, "CSV output path (stdout when omitted)"),
    },
    "report": {
        "records": (str, ".", "directory of result records"),
        "out_dir": (str, "report", "directory for the aggregated tables"),
    },
}


def parse_config_file(path) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcf-lab", description="Translators of the alpha-Gauss curvature flow.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in _SPECS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value configuration file")
        if name != "report":
            p.add_argument("--out", default=None, help="write the JSON record here instead of stdout")
        for key, (typ, _, helptext) in spec.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=helptext)
    return parser


def _resolve(args) -> RunConfig:
    spec = _SPECS[args.command]
    params = {k: d for k, (_, d, _) in spec.items()}
    if args.config:
        for key, value in parse_config_file(args.config).items():
            if key not in spec:
                raise ValidationError(f"unknown config key {key!r} for {args.command}")
            try:
                params[key] = spec[key][0](value)
            except ValueError as exc:
                raise ValidationError(f"bad value for {key}: {value!r}") from exc
    for key in spec:
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    _validate(args.command, params)
    return RunConfig(args.command, params)


def _validate(command, p):
    if "n" in p and command != "report":
        if p["n"] < 2:
            raise ValidationError("n must be >= 2")
    if "alpha" in p:
        FlowParams(p["n"], p["alpha"])
    if command in ("shrinker", "spectrum", "exterior", "march") and p.get("n", 2) != 2:
        raise ValidationError(f"{command} is implemented for n = 2")
    if "N" in p and (p["N"] < 32 or p["N"] & (p["N"] - 1)):
        raise ValidationError("N must be a power of two >= 32")
    if "M" in p and not p["M"] > 0:
        raise ValidationError("M must be positive")
    if command == "march" and p["direction"] not in ("up", "down"):
        raise ValidationError("direction must be up or down")
    if command == "sweep":
        if p["what"] not in ("K", "constants"):
            raise ValidationError("sweep --what must be K or constants")
        parse_alpha_range(p["alphas"])


def parse_alpha_range(text: str) -> list[float]:
    """'a:b:step' inclusive of b, computed in exact decimal arithmetic."""
    try:
        a, b, st = (Fraction(t) for t in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"alpha range must be start:stop:step, got {text!r}") from exc
    if st <= 0 or b < a:
        raise ValidationError("alpha range needs step > 0 and stop >= start")
    count = int((b - a) / st) + 1
    return [float(a + i * st) for i in range(count)]


# ------------------------------------------------------------------ commands

def _profile(alpha, k, N, root=0):
    from .shrinker import solve_shrinker_curve

    return solve_shrinker_curve(alpha, k, N, root=root)


def _cmd_constants(p):
    params = FlowParams(p["n"], p["alpha"])
    c = derive_constants(params)
    out = c.as_dict()
    out["K_round"] = jacobi_count_round(params)
    summary = f"n={params.n} alpha={params.alpha:g} sigma={c.sigma:.12g} A={c.bigA:.12g} K={out['K_round']}"
    return {"constants": out}, summary, {}


def _cmd_shrinker(p):
    prof = _profile(p["alpha"], p["k"], p["N"], p["root"])
    out = prof.to_json()
    return out, f"shrinker alpha={p['alpha']:g} k={p['k']} N={prof.N} residual={prof.residual:.3e}", {}


def _load_profile(p):
    from .shrinker import ShrinkerProfile

    if p.get("profile"):
        import json

        try:
            obj = json.loads(Path(p["profile"]).read_text())
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read profile {p['profile']}: {exc}") from exc
        try:
            return ShrinkerProfile.from_json(obj)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{p['profile']} is not a shrinker record: {exc}") from exc
    return _profile(p["alpha"], p["k"], p["N"])


def _cmd_spectrum(p):
    from .spectrum import eig_L

    prof = _load_profile(p)
    sd = eig_L(prof, num=min(p["num"], prof.N // 2))
    out = {"n": prof.n, "alpha": prof.alpha, "k": prof.symmetry_k, "N": prof.N}
    out.update(sd.to_json())
    return out, f"spectrum alpha={prof.alpha:g} k={prof.symmetry_k} K={sd.K} lambda_3={sd.lambdas[min(3, sd.num - 1)]:.10g}", {}


def _cmd_radial(p):
    from .radial import fit_asymptotics, solve_radial

    c = derive_constants(FlowParams(p["n"], p["alpha"]))
    prof = solve_radial(p["M"], p["alpha"], p["n"], p["l_max"])
    out = {
        "M": prof.M,
        "tip_coefficient": prof.tip_coefficient,
        "handover_l": prof.handover_l,
        "handover_slope": prof.handover_slope,
        "A": c.bigA,
        "f_l_max": float(prof.f[-1]),
    }
    summary = f"radial n={p['n']} alpha={p['alpha']:g} M={p['M']:g} f(l_max)={prof.f[-1]:.12g}"
    if p["fit"]:
        fit = fit_asymptotics(prof, c)
        out.update(fit.to_json())
        out["A_ratio"] = fit.A_fit / c.bigA
        out["corr_exp_theory"] = 3.0 * c.sigma - 2.0
        summary += f" A_fit/A={out['A_ratio']:.9f} corr_exp={fit.correction_exponent:.6f} c_sign={fit.c_sign}"
    artifacts = {}
    if p["csv"]:
        write_csv(p["csv"], ["l", "f", "f_l"], prof.to_rows())
        artifacts["csv"] = p["csv"]
    return out, summary, artifacts


def _exterior_setup(p):
    from .linearized import default_gamma, picard_zero_seed
    from .spectrum import eig_L

    params = FlowParams(2, p["alpha"])
    c = derive_constants(params)
    prof = _profile(p["alpha"], p["k"], p["N"])
    sd = eig_L(prof)
    if p["gamma"] is None:
        p["gamma"] = default_gamma(sd, c)
    zero = picard_zero_seed(prof, c, sd, p["R"], p["gamma"], span=p["span"], ds=p["ds"])
    return c, prof, sd, zero


def _cmd_exterior(p):
    from .linearized import jacobi_perturb

    c, prof, sd, res = _exterior_setup(p)
    extra = {}
    if p["mode"] >= 0 and p["b"] != 0.0:
        jr = jacobi_perturb(res.field, p["mode"], p["b"], sd, c, p["R"], prof)
        extra = {"jacobi": {"mode": p["mode"], "b": p["b"], "gamma": jr.gamma, "contraction_ratios": jr.ratios, "residual": jr.residual}}
        res = jr
    out = res.to_json(stride=p["slice_stride"])
    out.update(extra)
    ratios = res.ratios
    summary = f"exterior R={p['R']:g} gamma={res.gamma:.6g} iterations={res.iterations} max_ratio={max(ratios) if ratios else 0:.4f} residual={res.residual:.3e}"
    return out, summary, {}


def _cmd_march(p):
    from .linearized import jacobi_perturb
    from .march import convergence_diagnostics, march, seed_from_exterior

    c, prof, sd, zero = _exterior_setup(p)
    l0 = math.exp(p["s_start"])
    target = l0 * 10 ** p["decades"] if p["direction"] == "up" else l0 / 10 ** p["decades"]
    kw = dict(h=prof, spec=sd, max_beta=p["max_beta"])
    st = march(seed_from_exterior(zero.field, prof, c, l0), target, p["direction"], c, **kw)
    paired = None
    beta = None
    if p["mode"] >= 0 and p["b"] != 0.0:
        jr = jacobi_perturb(zero.field, p["mode"], p["b"], sd, c, p["R"], prof)
        beta = float(sd.beta_plus()[p["mode"]])
        paired = march(seed_from_exterior(jr.field, prof, c, l0), target, p["direction"], c, **kw)
    diag = convergence_diagnostics(st, prof, c, paired=paired, beta=beta)
    out = {"l_start": l0, "l_end": target, "exterior_residual": zero.residual, "diagnostics": diag.to_json()}
    summary = f"march {p['direction']} {p['decades']:g} decades d_rate={diag.d_rate:.6f} decreasing={diag.decreasing}"
    if paired is not None:
        summary += f" diff_rate={diag.diff_rate:.6f} beta={beta:.6f}"
    artifacts = {}
    if p["csv"]:
        rows = st.slices_rows()
        header = ["l"] + [f"S_{i}" for i in range(rows.shape[1] - 1)]
        write_csv(p["csv"], header, rows)
        artifacts["csv"] = p["csv"]
    return out, summary, artifacts


def _sweep_point(job):
    what, n, alpha = job
    params = FlowParams(n, alpha)
    if what == "K":
        return [alpha, jacobi_count_round(params)]
    c = derive_constants(params)
    return [alpha, c.sigma, c.bigA, c.kappa, c.c1, c.c2]


def _workers(count):
    cap = os.environ.get("GCF_LAB_WORKERS")
    try:
        cap = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError as exc:
        raise ValidationError("GCF_LAB_WORKERS must be an integer") from exc
    return max(1, min(cap, count))


def _cmd_sweep(p):
    alphas = parse_alpha_range(p["alphas"])
    jobs = [(p["what"], p["n"], a) for a in alphas]
    for _, n, a in jobs:
        FlowParams(n, a)
    workers = _workers(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    header = ["alpha", "K"] if p["what"] == "K" else ["alpha", "sigma", "A", "kappa", "c1", "c2"]
    out = {"header": header, "rows": rows}
    artifacts = {}
    if p["csv"]:
        write_csv(p["csv"], header, rows)
        artifacts["csv"] = p["csv"]
    return out, f"sweep {p['what']} over {len(rows)} alphas with {workers} worker(s)", artifacts


# report tables: command -> (header, row builder)
def _row_constants(r):
    c = r["constants"]
    return [c["sigma"], c["A"], c["kappa"], c["c1"], c["c2"], c["K_round"]]


def _row_spectrum(r):
    lam = r["lambdas"] + [float("nan")] * 4
    return [r.get("k", r["config"].get("k", 0)), r["K"]] + lam[:4]


def _row_radial(r):
    return [r["M"], r.get("A_fit", float("nan")), r.get("A_ratio", float("nan")), r.get("corr_exp", float("nan")), r.get("corr_exp_theory", float("nan")), r.get("c_sign", 0)]


def _row_exterior(r):
    ratios = r.get("contraction_ratios") or [float("nan")]
    return [r["config"].get("k", 0), r["R"], r["gamma"], max(ratios), r["residual"]]


def _row_march(r):
    d = r["diagnostics"]
    return [r["config"].get("k", 0), d["d_rate"], d["decreasing"], d.get("diff_rate", float("nan")), d.get("beta", float("nan"))]


_TABLES = {
    "constants": (["sigma", "A", "kappa", "c1", "c2", "K_round"], _row_constants),
    "spectrum": (["k", "K", "lambda_0", "lambda_1", "lambda_2", "lambda_3"], _row_spectrum),
    "radial": (["M", "A_fit", "A_fit_over_A", "corr_exp", "corr_exp_theory", "c_sign"], _row_radial),
    "exterior": (["k", "R", "gamma", "max_ratio", "residual"], _row_exterior),
    "march": (["k", "d_rate", "decreasing", "diff_rate", "beta"], _row_march),
}


def _cmd_report(p):
    src = Path(p["records"])
    if not src.is_dir():
        raise ValidationError(f"{src} is not a directory")
    records = []
    for path in sorted(src.glob("*.json")):
        if path.name.endswith(".meta.json"):
            continue
        try:
            rec = read_record(path)
        except (OSError, ValueError, GCFLabError) as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        records.append((path, rec))
    versions = {rec["schema_version"] for _, rec in records}
    if versions and versions != {SCHEMA_VERSION}:
        raise ValidationError(f"records carry schema versions {sorted(versions)}; expected only {SCHEMA_VERSION}")
    out_dir = Path(p["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {}
    written = {}
    for cmd, (cols, build) in _TABLES.items():
        rows = []
        for path, rec in records:
            if rec.get("command") != cmd:
                continue
            cfg = rec.get("config", {})
            n = rec.get("n", cfg.get("n", 2))
            alpha = rec.get("alpha", cfg.get("alpha", float("nan")))
            try:
                rows.append([n, alpha] + build(rec) + [rec["config_hash"], path.name])
            except (KeyError, TypeError, IndexError) as exc:
                log.warning("skipping %s in %s table: %s", path, cmd, exc)
        rows.sort(key=lambda r: (r[0], r[1], r[-1]))
        written[cmd] = write_csv(out_dir / f"{cmd}.csv", ["n", "alpha"] + cols + ["config_hash", "record"], rows)
        counts[cmd] = len(rows)
    # K staircase from K sweeps, one row per (n, alpha)
    stair = {}
    for path, rec in records:
        if rec.get("command") != "sweep" or rec.get("header") != ["alpha", "K"]:
            continue
        n = rec.get("config", {}).get("n", 2)
        for alpha, K in rec.get("rows", []):
            stair.setdefault((n, alpha), K)
    rows = [[n, a, K] for (n, a), K in sorted(stair.items())]
    written["staircase"] = write_csv(out_dir / "staircase.csv", ["n", "alpha", "K"], rows)
    counts["staircase"] = len(rows)
    summary = "report " + " ".join(f"{k}={v}" for k, v in counts.items())
    return {"counts": counts, "tables": {k: str(v) for k, v in written.items()}}, summary, {}


_COMMANDS = {
    "constants": _cmd_constants,
    "shrinker": _cmd_shrinker,
    "spectrum": _cmd_spectrum,
    "radial": _cmd_radial,
    "exterior": _cmd_exterior,
    "march": _cmd_march,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr)
    t0 = time.perf_counter()
    try:
        config = _resolve(args)
        result, summary, artifacts = _COMMANDS[args.command](dict(config.params))
    except ValidationError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except (SolverFailure, GCFLabError, ArithmeticError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_SOLVER
    wall = time.perf_counter() - t0
    record = make_record(config, result, artifacts)
    out = getattr(args, "out", None)
    if out:
        write_record(out, record, wall)
        print(summary, file=stdout)
    elif args.command == "report":
        print(summary, file=stdout)
    else:
        print(dumps(record), file=stdout)
        print(summary, file=stderr)
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
