"""Command-line front end: TOML problem configs in, CSV artifacts out.

Every run writes a ``manifest.json`` echoing the fully resolved configuration
(including defaults and flag overrides), so outputs are reproducible from the
manifest alone. All CSV output uses 17 significant digits, '.' decimals and
'\\n' line endings; identical config and seed give byte-identical files on
the same platform.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 violated well-posedness hypothesis.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - environment dependent
    import tomli as tomllib

from .errors import ConfigError, HypothesisError, NumericsError
from .expr import EvalDomainError, ExprError, Expression, TabulatedFunction
from .direct_solver import ProblemSpec, solve
from .frac_calc import TimeSeries
from .harness import synthesize, verify_invariants
from .inverse_solver import invert
from .mittag_leffler import MlDomainError, ml_array

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_HYPOTHESIS = 4


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(s if isinstance(s, str) else _fmt(s) for s in row) + "\n")


# ---------------------------------------------------------------------------
# configuration loading
# ---------------------------------------------------------------------------

_REQUIRED = ("alpha", "l", "T", "p", "q", "phi", "h")


def _load_table(ref: str, base: Path, label: str) -> TabulatedFunction:
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"{label}: table file {path} does not exist")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except Exception as exc:
        raise ConfigError(f"{label}: cannot read table {path}: {exc}") from exc
    if data.shape[1] < 2:
        raise ConfigError(f"{label}: table {path} needs two columns")
    try:
        return TabulatedFunction(data[:, 0], data[:, 1], label=f"{label}:{path.name}")
    except ExprError as exc:
        raise ConfigError(f"{label}: {exc}") from exc


def _load_function(raw, variable: str, base: Path, label: str):
    if isinstance(raw, str):
        try:
            return Expression(raw, variable)
        except ExprError as exc:
            raise ConfigError(f"{label}: {exc}") from exc
    if isinstance(raw, dict) and "table" in raw:
        return _load_table(raw["table"], base, label)
    raise ConfigError(f"{label}: expected an expression string or {{table = \"file.csv\"}}")


def load_config(path, overrides: Optional[dict] = None):
    """Parse a problem configuration into a ProblemSpec plus the resolved dict.

    Flags override file values; the returned dict records what the run used.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    if ("f" in raw) == ("g" in raw):
        raise ConfigError("exactly one of f, g must be present")

    alpha = float(raw["alpha"])
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0,1), got {alpha}")
    l = float(raw["l"])
    T = float(raw["T"])
    if l <= 0 or T <= 0:
        raise ConfigError(f"l and T must be positive, got l={l}, T={T}")

    grid = raw.get("grid", {})
    noise = raw.get("noise", {})
    overrides = overrides or {}

    def pick(name, section, default):
        if overrides.get(name) is not None:
            return overrides[name]
        return section.get(name, default)

    M = int(pick("M", grid, 200))
    K = int(pick("K", grid, 400))
    N = pick("N", grid, None)
    N = int(N) if N is not None else None
    eps = float(pick("eps", noise, 0.0))
    seed = int(pick("seed", noise, 0))

    base = path.parent
    fns = {}
    for name, var in (("p", "x"), ("q", "x"), ("phi", "x"), ("h", "x")):
        fns[name] = _load_function(raw[name], var, base, name)
    f_fun = _load_function(raw["f"], "t", base, "f") if "f" in raw else None
    g_fun = _load_function(raw["g"], "t", base, "g") if "g" in raw else None

    try:
        spec = ProblemSpec(alpha=alpha, l=l, T=T, p=fns["p"], q=fns["q"],
                           phi=fns["phi"], h=fns["h"], f=f_fun, g=g_fun,
                           M=M, K=K, N=N, eps=eps, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def describe(fun):
        return None if fun is None else fun.describe()

    resolved = {
        "alpha": alpha, "l": l, "T": T,
        "p": describe(fns["p"]), "q": describe(fns["q"]),
        "phi": describe(fns["phi"]), "h": describe(fns["h"]),
        "f": describe(f_fun), "g": describe(g_fun),
        "grid": {"M": M, "K": K, "N": N},
        "noise": {"eps": eps, "seed": seed},
        "config_path": str(path),
    }
    return spec, resolved


def _write_manifest(outdir: Path, subcommand: str, resolved: dict, outputs, extra=None):
    manifest = {
        "subcommand": subcommand,
        "configuration": resolved,
        "outputs": sorted(str(o) for o in outputs),
    }
    if extra:
        manifest.update(extra)
    with open(outdir / "manifest.json", "w", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_eig(spec: ProblemSpec, resolved, outdir: Path, args) -> int:
    from .direct_solver import build_workspace

    ws = build_workspace(spec, strict=not args.allow_violations)
    rows = [(n + 1, lam) for n, lam in enumerate(ws.basis.eigenvalues)]
    out = outdir / "eigenvalues.csv"
    write_csv(out, ["n", "lambda"], rows)
    outputs = [out]
    if args.eigenfunctions:
        nodes = ws.grid.nodes
        header = ["x"] + [f"X_{n + 1}" for n in range(ws.basis.N)]
        table = np.zeros((len(nodes), ws.basis.N + 1))
        table[:, 0] = nodes
        for n in range(ws.basis.N):
            table[:, n + 1] = ws.basis.sampled(n)
        out2 = outdir / "eigenfunctions.csv"
        write_csv(out2, header, table)
        outputs.append(out2)
    resolved["grid"]["N"] = ws.basis.N
    _write_manifest(outdir, "eig", resolved, outputs)
    return EXIT_OK


def _cmd_ml(args, outdir: Path) -> int:
    alpha, beta = args.alpha, args.beta
    if args.z is not None:
        zs = np.array([args.z], dtype=float)
    else:
        if args.z_min is None or args.z_max is None:
            raise ConfigError("ml needs either --z or both --z-min and --z-max")
        if args.z_min > args.z_max:
            raise ConfigError("--z-min must not exceed --z-max")
        zs = np.linspace(args.z_min, args.z_max, args.points)
    try:
        vals = ml_array(alpha, beta, zs)
    except MlDomainError as exc:
        raise ConfigError(str(exc)) from exc
    out = outdir / "ml.csv"
    write_csv(out, ["z", "value"], zip(zs, vals))
    resolved = {"alpha": alpha, "beta": beta,
                "z": args.z, "z_min": args.z_min, "z_max": args.z_max,
                "points": args.points}
    _write_manifest(outdir, "ml", resolved, [out])
    return EXIT_OK


def _field_rows(tgrid_nodes, field):
    for k, t in enumerate(tgrid_nodes):
        yield (t, *field[k])


def _cmd_direct(spec: ProblemSpec, resolved, outdir: Path, args) -> int:
    if spec.f is None:
        raise ConfigError("direct mode requires f in the configuration")
    ws, sol, g = solve(spec, strict=not args.allow_violations)
    field = sol.field()
    x = ws.grid.nodes
    t = spec.time_grid.nodes
    out_u = outdir / "u_field.csv"
    write_csv(out_u, ["t"] + [_fmt(xi) for xi in x], _field_rows(t, field))
    out_g = outdir / "g_observed.csv"
    write_csv(out_g, ["t", "g"], zip(t, g.values))
    resolved["grid"]["N"] = ws.basis.N
    _write_manifest(outdir, "direct", resolved, [out_u, out_g], extra={
        "initial_consistency": sol.initial_consistency(ws.phi_samples)})
    return EXIT_OK


def _cmd_synth(spec: ProblemSpec, resolved, outdir: Path, args) -> int:
    if spec.f is None:
        raise ConfigError("synth mode requires f in the configuration")
    ds = synthesize(spec)
    t = spec.time_grid.nodes
    outputs = []
    for name, series in (("g_exact", ds.g_exact), ("g_noisy", ds.g_noisy),
                         ("f_true", ds.f_true)):
        out = outdir / f"{name}.csv"
        col = "g" if name.startswith("g") else "f"
        write_csv(out, ["t", col], zip(t, series.values))
        outputs.append(out)
    _write_manifest(outdir, "synth", resolved, outputs,
                    extra={"noise_generator": "numpy-PCG64"})
    return EXIT_OK


def _cmd_invert(spec: ProblemSpec, resolved, outdir: Path, args) -> int:
    if spec.g is None:
        raise ConfigError("invert mode requires g in the configuration")
    result = invert(spec, strict=not args.allow_violations,
                    filter_window=args.filter_window)
    t = spec.time_grid.nodes
    out_f = outdir / "f_recovered.csv"
    write_csv(out_f, ["t", "f"], zip(t, result.f.values))
    diag_rows = [(k, v) for k, v in sorted(result.diagnostics().items())]
    if result.picard is not None:
        diag_rows += [(f"picard_diff_{i + 1:04d}", d)
                      for i, d in enumerate(result.picard.differences)]
    out_d = outdir / "diagnostics.csv"
    write_csv(out_d, ["metric", "value"], diag_rows)
    resolved["grid"]["N"] = result.workspace.basis.N
    resolved["filter_window"] = args.filter_window
    _write_manifest(outdir, "invert", resolved, [out_f, out_d])
    return EXIT_OK


def _cmd_verify(spec: ProblemSpec, resolved, outdir: Path, args) -> int:
    report = verify_invariants(spec)
    out = outdir / "invariants_report.csv"
    write_csv(out, ["check", "measured", "bound", "pass"],
              [(c.name, c.measured, c.bound, c.passed) for c in report.checks])
    _write_manifest(outdir, "verify", resolved, [out],
                    extra={"all_passed": report.all_passed})
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    config: Optional[str]
    outdir: Path
    overrides: dict


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracsource",
        description="Time-fractional diffusion: direct spectral solver and "
                    "recovery of a time-dependent source factor from an "
                    "integral observation.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="problem configuration (TOML)")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--M", type=int, default=None, help="override space resolution")
        p.add_argument("--K", type=int, default=None, help="override time steps")
        p.add_argument("--N", type=int, default=None, help="override mode count")
        p.add_argument("--eps", type=float, default=None, help="override noise level")
        p.add_argument("--seed", type=int, default=None, help="override noise seed")
        p.add_argument("--allow-violations", action="store_true",
                       help="downgrade hypothesis violations to warnings")

    common(sub.add_parser("eig", help="eigenvalues (and optionally eigenfunctions) as CSV"))
    sub.choices["eig"].add_argument("--eigenfunctions", action="store_true",
                                    help="also write sampled eigenfunctions")

    mlp = sub.add_parser("ml", help="evaluate the relaxation special function")
    mlp.add_argument("--alpha", type=float, required=True)
    mlp.add_argument("--beta", type=float, default=1.0)
    mlp.add_argument("--z", type=float, default=None, help="single argument (z <= 0)")
    mlp.add_argument("--z-min", type=float, default=None)
    mlp.add_argument("--z-max", type=float, default=None)
    mlp.add_argument("--points", type=int, default=101)
    mlp.add_argument("--out", default=".")

    common(sub.add_parser("direct", help="solve the direct problem, write field and observation"))
    common(sub.add_parser("synth", help="synthesize exact and noisy observations"))
    inv = sub.add_parser("invert", help="recover the source time factor from g")
    common(inv)
    inv.add_argument("--filter-window", type=int, default=0,
                     help="moving-average window applied to g before differentiation")
    common(sub.add_parser("verify", help="run the invariant checklist, report-only"))
    return ap


_DISPATCH = {
    "eig": _cmd_eig,
    "direct": _cmd_direct,
    "synth": _cmd_synth,
    "invert": _cmd_invert,
    "verify": _cmd_verify,
}


def run(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.subcommand == "ml":
        return _cmd_ml(args, outdir)
    overrides = {k: getattr(args, k) for k in ("M", "K", "N", "eps", "seed")}
    spec, resolved = load_config(args.config, overrides)
    return _DISPATCH[args.subcommand](spec, resolved, outdir, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericsError, EvalDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ExprError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MlDomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
