"""``capflow`` command-line driver.

Settings come from an optional JSON config file (``--config``) and from
flags; flags win. Exit codes: 0 ok, 1 invariant violation, 2 usage error,
3 numeric failure. ``CAPFLOW_WORKERS`` sets the thread count for traces.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import conformal as cf
from . import functionals as fn
from . import index_lab as il
from . import reports
from . import spectral as sp
from . import surfaces as sg
from . import verify as vf
from .config import DEFAULT, Tolerances
from .errors import CapflowError, DomainError, InvariantViolation

MODULE = "cli_reports"
COMMANDS = ("flow", "energy", "spectrum", "index", "dual", "limit", "verify")


@dataclass
class ExperimentConfig:
    command: str
    surface: str = "half_clifford_torus"
    surface_params: dict = field(default_factory=dict)
    a: Optional[list] = None
    t_max: float = 1.0
    steps: int = 50
    mode: str = "auto"
    C_H: Optional[float] = None
    substeps: int = 4
    y: Optional[list] = None
    h: float = 0.05
    flavor: str = "morse"
    kind: str = "index"
    count: int = 12
    zero_tol: Optional[float] = None
    trials: int = 20
    seed: int = 0
    R_values: list = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    suite: str = "all"
    fatal: bool = False
    tolerances: Tolerances = DEFAULT
    out: Optional[str] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}", MODULE)
        for name in ("t_max", "h"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite", MODULE)
        if self.h <= 0:
            raise DomainError("h must be positive", MODULE)
        if self.command == "flow":
            if self.steps < 2:
                raise DomainError("steps must be at least 2", MODULE)
            if self.t_max <= 0:
                raise DomainError("t_max must be positive", MODULE)
            if self.a is None:
                raise DomainError("flow needs a direction a", MODULE)
        for vec in (self.a, self.y):
            if vec is not None and not all(math.isfinite(v) for v in vec):
                raise DomainError("vector entries must be finite", MODULE)
        if self.out is not None:
            parent = Path(self.out).resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise DomainError(f"output path {self.out!r} is not writable", MODULE)


def _vector(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _key_value(text: str) -> tuple:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        return key.strip(), json.loads(raw)
    except json.JSONDecodeError:
        return key.strip(), raw


def _tolerance_help() -> str:
    return "tolerance override name=value; defaults: " + ", ".join(f"{f.name}={getattr(DEFAULT, f.name)}" for f in fields(Tolerances))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capflow", description="Conformal cap flows, energies and index forms.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--surface", help="builtin surface name (default half_clifford_torus)")
    common.add_argument("--param", action="append", type=_key_value, default=[], help="surface parameter name=value, repeatable")
    common.add_argument("--h", type=float, help="mesh size (default 0.05)")
    common.add_argument("--tol", action="append", type=_key_value, default=[], help=_tolerance_help())
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--fatal", action="store_true", default=None, help="exit 1 when a reported check fails")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", parents=[common], help="monotonicity trace along a conformal flow (CSV)")
    p.add_argument("--a", type=_vector, help="flow direction in R^4, comma separated")
    p.add_argument("--tmax", dest="t_max", type=float, help="final time (default 1)")
    p.add_argument("--steps", type=int, help="number of time steps (default 50)")
    p.add_argument("--mode", choices=["auto", "free_boundary", "capillary", "hemisphere"], help="monotone quantity")
    p.add_argument("--C-H", dest="C_H", type=float, help="mean curvature bound for the free-boundary weight")
    p.add_argument("--substeps", type=int, help="wetting integral substeps per interval (default 4)")

    p = sub.add_parser("energy", parents=[common], help="energies of a surface or of its conformal image (JSON)")
    p.add_argument("--y", type=_vector, help="push the surface by the cap element with this y (y_0 = 0)")

    p = sub.add_parser("spectrum", parents=[common], help="Robin, Dirichlet or Steklov spectrum (JSON)")
    p.add_argument("--flavor", choices=list(il.FLAVORS))
    p.add_argument("--kind", choices=["robin", "dirichlet", "steklov", "index"])
    p.add_argument("--count", type=int)
    p.add_argument("--zero-tol", dest="zero_tol", type=float)

    p = sub.add_parser("index", parents=[common], help="index report (JSON)")
    p.add_argument("--flavor", choices=list(il.FLAVORS))
    p.add_argument("--zero-tol", dest="zero_tol", type=float)

    p = sub.add_parser("dual", parents=[common], help="dual annulus and form identities (JSON)")
    p.add_argument("--trials", type=int)

    p = sub.add_parser("limit", parents=[common], help="Euclidean limit of the flat disc (JSON)")
    p.add_argument("--R", dest="R_values", type=_vector, help="radii, comma separated")

    p = sub.add_parser("verify", parents=[common], help="run a self-check suite (JSON)")
    p.add_argument("--suite", choices=sorted(vf.SUITES) + ["all"])
    return parser


def load_config(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    values: dict = {}
    tol_values: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {args.config}: {exc}", MODULE) from exc
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object", MODULE)
        data = dict(data)
        surface = data.pop("surface", None)
        if isinstance(surface, dict):
            values["surface"] = surface.get("name", ExperimentConfig.surface)
            values["surface_params"] = dict(surface.get("params", {}))
        elif surface is not None:
            values["surface"] = surface
        flow = data.pop("flow", None) or {}
        values.update({k: flow[k] for k in ("a", "t_max", "steps", "mode", "C_H", "substeps") if k in flow})
        tol_values.update(data.pop("tolerances", None) or {})
        output = data.pop("output", None)
        if isinstance(output, dict):
            values["out"] = output.get("path")
        elif output is not None:
            values["out"] = output
        known = {f.name for f in fields(ExperimentConfig)} - {"command", "tolerances"}
        data.pop("command", None)
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys {sorted(unknown)}", MODULE)
        values.update(data)
    for key, val in vars(args).items():
        if key in ("config", "param", "tol", "command") or val is None:
            continue
        values[key] = val
    params = dict(values.pop("surface_params", {}))
    params.update(dict(args.param))
    tol_values.update(dict(args.tol))
    try:
        tolerances = DEFAULT.override(**tol_values)
    except (KeyError, TypeError) as exc:
        raise DomainError(str(exc), MODULE) from exc
    cfg = ExperimentConfig(command=args.command, surface_params=params, tolerances=tolerances, **values)
    cfg.validate()
    return cfg


def _surface(cfg: ExperimentConfig) -> sg.ParametricSurface:
    try:
        return sg.builtin_surface(cfg.surface, **cfg.surface_params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {cfg.surface}: {exc}", MODULE) from exc


def _run_flow(cfg: ExperimentConfig):
    surface = _surface(cfg)
    spec = cf.FlowSpec(cf.SpherePoint.normalized(cfg.a))
    t_grid = np.linspace(0.0, cfg.t_max, cfg.steps + 1)
    trace = fn.monotonicity_trace(surface, spec, t_grid, C_H=cfg.C_H, mode=cfg.mode, substeps=cfg.substeps, tol=cfg.tolerances)
    return trace, trace.ok


def _run_energy(cfg: ExperimentConfig):
    surface = _surface(cfg)
    out = {"surface": surface.name}
    if cfg.y is not None:
        m = cf.conf_cap_element(surface.radius, np.eye(len(cfg.y)), cfg.y, cfg.tolerances)
        out["map"] = m
        base = fn.energy(surface, tol=cfg.tolerances)
        surface = sg.pushforward_surface(m, surface)
        out["base"] = base
    value = fn.energy(surface, tol=cfg.tolerances)
    out["energy"] = value
    ok = True
    if "base" in out:
        out["excess_over_base"] = value.E - out["base"].E
        ok = out["excess_over_base"] <= 1e-6
    if surface.contact_angle is not None and surface.ambient_cap is not None and abs(surface.radius - np.pi / 2) < 1e-12:
        out["blowup"] = fn.blowup_bound_check(surface, tol=cfg.tolerances)
    return out, ok


def _run_spectrum(cfg: ExperimentConfig):
    problem = il.build_index_problem(_surface(cfg), cfg.flavor, h=cfg.h)
    solvers = {"robin": sp.robin_spectrum, "dirichlet": sp.dirichlet_spectrum}
    if cfg.kind in solvers:
        rep = solvers[cfg.kind](problem.form, count=cfg.count, zero_tol=cfg.zero_tol, tol=cfg.tolerances)
        return {"surface": problem.surface.name, "flavor": cfg.flavor, "h": cfg.h, "spectrum": rep}, True
    if cfg.kind == "steklov":
        rep = sp.steklov_spectrum(problem.form, count=cfg.count, zero_tol=cfg.zero_tol, tol=cfg.tolerances)
        return {"surface": problem.surface.name, "flavor": cfg.flavor, "h": cfg.h, "spectrum": rep, "kernel_dim": rep.extra.get("kernel_dim")}, True
    rep = sp.index_count(problem.form, zero_tol=cfg.zero_tol, tol=cfg.tolerances)
    return {"surface": problem.surface.name, "flavor": cfg.flavor, "h": cfg.h, **rep.summary()}, rep.agreement


def _run_index(cfg: ExperimentConfig):
    surface = _surface(cfg)
    if cfg.flavor == "morse":
        rep = il.urbano_report(surface, h=cfg.h, zero_tol=cfg.zero_tol, tol=cfg.tolerances)
        return rep, all(rep["consistent_with_theorems"])
    problem = il.build_index_problem(surface, cfg.flavor, h=cfg.h)
    rep = sp.index_count(problem.form, zero_tol=cfg.zero_tol, tol=cfg.tolerances)
    return {"surface": surface.name, "flavor": cfg.flavor, "eigen_summary": rep.summary(), "a": rep.a, "b": rep.b, "ind": rep.ind, "ind_robin": rep.ind_robin, "nullity": rep.nullity}, rep.agreement


def _run_dual(cfg: ExperimentConfig):
    surface = _surface(cfg)
    dual = il.dual_annulus(surface, tol=cfg.tolerances)
    ident = il.dual_form_identity_check(surface, trials=cfg.trials, seed=cfg.seed, dual=dual)
    out = {
        "surface": surface.name,
        "epsilon": dual.epsilon,
        "R_tilde": dual.R_tilde,
        "gamma_tilde": dual.gamma_tilde,
        "checks": dual.checks,
        "max_index_dual": ident["max_index_dual"],
        "max_index_energy": ident.get("max_index_energy"),
        "constant": ident.get("constant"),
    }
    worst = max(v for v in (ident["max_index_dual"], ident.get("max_index_energy")) if v is not None)
    return out, worst <= 1e-4


def _run_limit(cfg: ExperimentConfig):
    base = sg.flat_disc(3)
    rep = fn.euclidean_limit_trace(base, cfg.R_values, tol=cfg.tolerances)
    return rep, min(rep["area_order"], rep["length_order"]) >= 1.9


def _run_verify(cfg: ExperimentConfig):
    checks = vf.run_suite(cfg.suite, tol=cfg.tolerances)
    ok = all(c.ok for c in checks)
    return {"suite": cfg.suite, "passed": ok, "checks": checks}, ok


RUNNERS = {
    "flow": _run_flow,
    "energy": _run_energy,
    "spectrum": _run_spectrum,
    "index": _run_index,
    "dual": _run_dual,
    "limit": _run_limit,
    "verify": _run_verify,
}


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute one command, write its artifact and return the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    data, ok = RUNNERS[cfg.command](cfg)
    text = reports.trace_csv(data) if cfg.command == "flow" else reports.dumps_report(data)
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        stdout.write(text)
    # verify is a pass/fail command by nature, so failures are always fatal there
    if not ok and (cfg.fatal or cfg.command == "verify"):
        raise InvariantViolation(f"{cfg.command}: reported checks failed", MODULE)
    return 0


def main(argv=None) -> int:
    try:
        cfg = load_config(argv)
        return run(cfg)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    except CapflowError as exc:
        print(f"capflow: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
