"""Command-line front end.

Settings resolve as flag > config file > default.  The config file holds one
``key = value`` pair per line with flat dotted keys (``solver.grid_ratio``);
``#`` starts a comment.  Every output embeds the effective config and the
package version.  Exit codes: 0 ok, 2 invalid input, 3 neutral mode,
4 numerical failure; errors are also written to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import HmflowError, InvalidInput


@dataclass(frozen=True)
class Option:
    key: str
    type: type
    default: Any
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.key.split(".")[-1].replace("_", "-")

    @property
    def dest(self) -> str:
        return self.key.replace(".", "__")


_OPTIONS = {
    o.key: o
    for o in [
        Option("d", int, 8, "dimension"),
        Option("l", int, 1, "unstable mode index"),
        Option("n_max", int, 10, "highest eigenfunction index"),
        Option("format", str, "csv", "stdout format: csv or json"),
        Option("out", str, "out", "output file or directory"),
        Option("stationary.alpha", float, 1.0, "origin slope of the stationary profile"),
        Option("stationary.xi_max", float, 1e3, "outer end of the stationary integration"),
        Option("stationary.n_grid", int, 2001, "samples of the stored stationary profile"),
        Option("initial.s0", float, 20.0, "initial similarity time"),
        Option("initial.k", float, 0.9, "outer exponent of the inner-region scale"),
        Option("initial.k_tilde", float, 0.45, "exponent of the inner-region edge"),
        Option("initial.sigma", float, None, "outer-region exponent (default derived from l)"),
        Option("initial.sigma_tilde", float, None, "clamp exponent (default derived from sigma)"),
        Option("initial.a_l0", float, -1.0, "initial coefficient of the unstable mode"),
        Option("initial.strict", bool, False, "enforce the strict parameter inequalities"),
        Option("initial.n_grid", int, 4000, "samples of the stored initial data"),
        Option("solver.n_inner", int, 32, "uniform cells in the core"),
        Option("solver.grid_ratio", float, 1.05, "geometric growth factor outside the core"),
        Option("solver.r_max", float, 50.0, "outer Dirichlet radius"),
        Option("solver.rtol", float, 1e-2, "relative change allowed per step"),
        Option("solver.floor", float, 1e-2, "change floor relative to max |Phi|"),
        Option("solver.react_cfl", float, 0.2, "explicit reaction stability factor"),
        Option("solver.stop", float, 1e6, "origin gradient that ends the run"),
        Option("solver.t_max", float, 10.0, "final time if no blow-up"),
        Option("solver.stencil", str, "matched", "matched or conservative"),
        Option("solver.checkpoints", bool, True, "write checkpoint profiles"),
        Option("fit.window_decades", float, 4.0, "gradient decades used by the fit"),
        Option("fit.min_decades", float, 3.0, "minimum decades required"),
        Option("fit.margin", float, 0.02, "Type I / Type II classification margin"),
        Option("diag.n_max", int, 6, "modes projected by the diagnostics"),
        Option("verify.level", str, "fast", "fast or full"),
    ]
}

_COMMANDS: Dict[str, List[str]] = {
    "spectrum": ["d", "n_max", "format"],
    "predict": ["d", "l", "format"],
    "stationary": ["d", "stationary.alpha", "stationary.xi_max", "stationary.n_grid", "out"],
    "make-initial": ["d", "l", "initial.s0", "initial.k", "initial.k_tilde", "initial.sigma",
                     "initial.sigma_tilde", "initial.a_l0", "initial.strict", "initial.n_grid", "out"],
    "simulate": ["d", "l", "initial.s0", "initial.k", "initial.k_tilde", "initial.sigma",
                 "initial.sigma_tilde", "initial.a_l0", "initial.strict", "solver.n_inner",
                 "solver.grid_ratio", "solver.r_max", "solver.rtol", "solver.floor", "solver.react_cfl",
                 "solver.stop", "solver.t_max", "solver.stencil", "solver.checkpoints", "out"],
    "diagnose": ["l", "fit.window_decades", "fit.min_decades", "fit.margin", "diag.n_max", "format"],
    "verify": ["verify.level", "format"],
}


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidInput(f"not a boolean: {text!r}")


def _convert(opt: Option, raw) -> Any:
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("none", "")):
        return None
    try:
        if opt.type is bool:
            return raw if isinstance(raw, bool) else _parse_bool(raw)
        return opt.type(raw)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{opt.key}: cannot parse {raw!r} as {opt.type.__name__}") from exc


def read_config_file(path) -> Dict[str, str]:
    """Flat ``key = value`` pairs; unknown keys are rejected."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"{path}:{n}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _OPTIONS:
            raise InvalidInput(f"{path}:{n}: unknown key {key!r}")
        values[key] = val.strip('"').strip("'")
    return values


def resolve_config(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Effective settings for ``command``: flag over file over default."""
    file_vals = read_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = {}
    for key in _COMMANDS[command]:
        opt = _OPTIONS[key]
        flag_val = getattr(args, opt.dest, None)
        if flag_val is not None:
            cfg[key] = _convert(opt, flag_val)
        elif key in file_vals:
            cfg[key] = _convert(opt, file_vals[key])
        else:
            cfg[key] = opt.default
    if "format" in cfg and cfg["format"] not in ("csv", "json"):
        raise InvalidInput("format must be csv or json")
    return cfg


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _meta(command: str, cfg: dict) -> dict:
    return {"command": command, "config": cfg, "version": __version__}


def _csv_text(header: Sequence[str], rows, meta: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, default=_jsonable) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_spectrum(cfg: dict, out) -> int:
    from .spectral import compute_constants, make_basis

    c = compute_constants(cfg["d"])
    if cfg["n_max"] < 0:
        raise InvalidInput("n_max must be >= 0")
    B = make_basis(c, cfg["n_max"])
    rows = [
        (n, float(B.eigenvalues()[n]), float(B.norms[n]), float(B.origin_coeffs[n]), float(B.infinity_coeffs[n]))
        for n in range(cfg["n_max"] + 1)
    ]
    meta = dict(_meta("spectrum", cfg), gamma=c.gamma, omega=c.omega)
    if cfg["format"] == "json":
        keys = ("n", "lambda", "norm", "alpha", "beta")
        out.write(_dumps(dict(meta, modes=[dict(zip(keys, r)) for r in rows])))
    else:
        out.write(_csv_text(["n", "lambda", "norm", "alpha", "beta"], rows, meta))
    return 0


def cmd_predict(cfg: dict, out) -> int:
    from .asymptotics import predict_exponent

    pred = predict_exponent(cfg["d"], cfg["l"])
    rec = dict(_meta("predict", cfg), exponent=pred.exponent, lambda_l=pred.lambda_l, gamma=pred.gamma,
               omega_l=pred.omega_l, type_ii=pred.type_ii)
    if cfg["format"] == "json":
        out.write(_dumps(rec))
    else:
        out.write(_csv_text(["d", "l", "exponent", "lambda_l", "gamma", "type_ii"],
                            [(pred.d, pred.l, pred.exponent, pred.lambda_l, pred.gamma, pred.type_ii)],
                            _meta("predict", cfg)))
    return 0


def cmd_stationary(cfg: dict, out) -> int:
    from .spectral import compute_constants
    from .stationary import solve_stationary

    c = compute_constants(cfg["d"])
    U = solve_stationary(c, cfg["stationary.alpha"], cfg["stationary.xi_max"], n_grid=cfg["stationary.n_grid"])
    base = Path(cfg["out"])
    meta = dict(_meta("stationary", cfg), h=U.h_estimate, h_window=U.h_fit_window, fit_residual=U.fit_residual)
    _write(base / "stationary.csv", _csv_text(["xi", "U", "dU"], zip(U.grid, U.values, U.slopes), meta))
    _write(base / "stationary.json", _dumps(meta))
    out.write(_dumps({"h": U.h_estimate, "files": [str(base / "stationary.csv"), str(base / "stationary.json")]}))
    return 0


def _initial_spec(cfg: dict):
    from .asymptotics import InitialDataSpec

    return InitialDataSpec(
        cfg["d"], cfg["l"], cfg["initial.s0"], k=cfg["initial.k"], k_tilde=cfg["initial.k_tilde"],
        sigma=cfg["initial.sigma"], sigma_tilde=cfg["initial.sigma_tilde"], a_l0=cfg["initial.a_l0"],
        strict=cfg["initial.strict"],
    )


def cmd_make_initial(cfg: dict, out) -> int:
    from .asymptotics import initial_grid, initial_psi
    from .spectral import compute_constants, make_basis
    from .stationary import solve_stationary

    spec = _initial_spec(cfg)
    c = compute_constants(cfg["d"])
    psi = initial_psi(spec, make_basis(c, spec.l), solve_stationary(c))
    y = initial_grid(psi.spec, n=cfg["initial.n_grid"])
    vals = psi(y)
    base = Path(cfg["out"])
    meta = dict(_meta("make-initial", cfg), spec=psi.spec.to_dict(), inner_edge=psi.spec.inner_edge,
                outer_edge=psi.spec.outer_edge)
    _write(base / "initial.csv", _csv_text(["y", "psi", "u"], zip(y, vals, vals + 0.5 * math.pi), meta))
    _write(base / "initial.json", _dumps(meta))
    out.write(_dumps({"alpha": psi.spec.alpha, "files": [str(base / "initial.csv"), str(base / "initial.json")]}))
    return 0


def _solver_params(cfg: dict):
    from .solver import SolverParams

    return SolverParams(
        n_inner=cfg["solver.n_inner"], grid_ratio=cfg["solver.grid_ratio"], r_max=cfg["solver.r_max"],
        rtol=cfg["solver.rtol"], floor=cfg["solver.floor"], react_cfl=cfg["solver.react_cfl"],
        stop=cfg["solver.stop"], t_max=cfg["solver.t_max"], stencil=cfg["solver.stencil"],
    )


def cmd_simulate(cfg: dict, out) -> int:
    from .solver import run_simulation, write_checkpoint, write_series

    spec = _initial_spec(cfg)
    res = run_simulation(spec, _solver_params(cfg), d=cfg["d"], config=cfg)
    base = Path(cfg["out"])
    base.mkdir(parents=True, exist_ok=True)
    write_series(base / "series.csv", res.series_t, res.series_g, config=cfg)
    names = []
    if cfg["solver.checkpoints"]:
        ck = base / "checkpoints"
        ck.mkdir(exist_ok=True)
        for old in ck.glob("ckpt_*.csv"):
            old.unlink()
        for i, state in enumerate(res.checkpoints):
            name = ck / f"ckpt_{i:04d}.csv"
            write_checkpoint(name, state, cfg["d"], config=cfg)
            names.append(name.name)
    summary = dict(
        _meta("simulate", cfg), status=res.status, steps=res.steps, remeshes=res.remeshes,
        cfl_limited=res.cfl_limited, rejected=res.rejected, t_final=res.final.t,
        grad_final=abs(float(res.final.phi_values[0])), checkpoints=names,
    )
    _write(base / "run.json", _dumps(summary))
    out.write(_dumps({k: summary[k] for k in ("status", "steps", "t_final", "grad_final")}))
    return 0


def cmd_diagnose(cfg: dict, out, run_dir: str) -> int:
    from .asymptotics import predict_exponent
    from .solver import detect_blowup_and_fit, read_checkpoint, read_series, similarity_diagnostics
    from .spectral import compute_constants, make_basis

    base = Path(run_dir)
    if not (base / "run.json").is_file():
        raise InvalidInput(f"{base} is not a simulation directory (run.json missing)")
    run = json.loads((base / "run.json").read_text())
    d = int(run["config"]["d"])
    _, t, g = read_series(base / "series.csv")
    try:
        p0 = predict_exponent(d, cfg["l"]).exponent
    except HmflowError:
        p0 = 0.6
    fit = detect_blowup_and_fit(t, g, p0=p0, window_decades=cfg["fit.window_decades"],
                                min_decades=cfg["fit.min_decades"], margin=cfg["fit.margin"])
    record = dict(_meta("diagnose", cfg), run=str(base), d=d, fit=fit.to_dict())
    states = [read_checkpoint(base / "checkpoints" / n)[1] for n in run.get("checkpoints", [])]
    if states:
        basis = make_basis(compute_constants(d), max(cfg["diag.n_max"], cfg["l"]))
        dg = similarity_diagnostics(states, fit.T, basis, cfg["l"])
        record["mode_slope"] = dg.slope
        record["s_window"] = list(dg.window)
        record["strip_ok"] = dg.strip_ok
        record["strip_excess"] = dg.strip_excess
        header = ["s"] + [f"a{n}" for n in range(basis.n_max + 1)]
        _write(base / "coefficients.csv",
               _csv_text(header, ([s, *a] for s, a in zip(dg.s, dg.coeffs)), _meta("diagnose", cfg)))
    _write(base / "fit.json", _dumps(record))
    out.write(_dumps(record))
    return 0


def cmd_verify(cfg: dict, out) -> int:
    from .verify import run_checks

    records = run_checks(cfg["verify.level"])
    failed = [r for r in records if not r["ok"]]
    if cfg["format"] == "json":
        out.write(_dumps(dict(_meta("verify", cfg), checks=records, ok=not failed)))
    else:
        for r in records:
            out.write(f"{'PASS' if r['ok'] else 'FAIL'} {r['check']}: {r['detail']}\n")
    return 4 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmflow", description="Blow-up of the equivariant harmonic map heat flow.")
    parser.add_argument("--version", action="version", version=f"hmflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        if name == "diagnose":
            p.add_argument("run_dir", help="directory written by simulate")
        for key in keys:
            opt = _OPTIONS[key]
            extra = {"choices": ["fast", "full"]} if key == "verify.level" else {}
            p.add_argument(opt.flag, dest=opt.dest, default=None, metavar=opt.type.__name__.upper(),
                           help=f"{opt.help} [{key}, default {opt.default}]", **extra)
    return parser


_HANDLERS = {
    "spectrum": cmd_spectrum,
    "predict": cmd_predict,
    "stationary": cmd_stationary,
    "make-initial": cmd_make_initial,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, out, args.run_dir)
        return _HANDLERS[args.command](cfg, out)
    except HmflowError as exc:
        err.write(json.dumps({"error": exc.code, "type": type(exc).__name__, "message": str(exc),
                              "exit_code": exc.exit_code}, sort_keys=True) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
