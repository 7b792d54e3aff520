"""Command line driver: build a hierarchy, solve, verify and write reports.

Configuration is a flat ``key = value`` text file; command line flags override
it.  Every output depends only on the configuration and the seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .fem import Coefficients, FEMHierarchy, l2_error
from .mesh import MeshError, build_initial_mesh
from .precond import KINDS, ConfigError, PreconditionerConfig, make_preconditioner
from .refine import SCENARIOS, refine_scenario
from .solver import SolverError, pcg, preconditioned_eigs
from .transfer import MultilevelTransfer, SolverStall
from .verify import run_all
from .vtkio import write_vtk

log = logging.getLogger("redgreen")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY, EXIT_IO, EXIT_MESH = 0, 2, 3, 4, 5, 6
EXIT_HELP = """exit codes:
  0  success (solver converged, requested checks passed)
  2  configuration could not be parsed or is invalid
  3  solver did not converge or broke down
  4  a verification check failed
  5  input/output failure
  6  mesh or refinement error
"""


class ConfigParse(ValueError):
    pass


class IOFailure(OSError):
    pass


class MismatchedScenario(ValueError):
    pass


def _exact(p):
    return np.prod(p * (1 - p), axis=1)


def _rhs(p):
    a = p * (1 - p)
    return 2 * (a[:, 1] * a[:, 2] + a[:, 0] * a[:, 2] + a[:, 0] * a[:, 1])


def _jump(c):
    return np.where(c[:, 0] < 0.5, 1.0, 100.0)[:, None, None] * np.eye(3)


# name -> (Coefficients, exact solution or None)
COEFFICIENT_PRESETS = {
    "laplace": (Coefficients(1.0, 0.0, _rhs), _exact),
    "reaction": (Coefficients(1.0, 1.0, lambda p: _rhs(p) + _exact(p)), _exact),
    "anisotropic": (Coefficients(np.diag([1.0, 1.0, 10.0]), 0.0, _rhs), None),
    "jump": (Coefficients(_jump, 0.0, lambda p: np.ones(len(p))), None),
}
CHECKS = ("none", "mesh", "all")


@dataclass
class ExperimentConfig:
    domain: str = "cube"
    mesh_file: str = ""
    scenario: str = "uniform"
    J: int = 2
    coefficients: str = "laplace"
    precond: str = "bpx"
    gamma: float = 0.0
    smoother: str = "scaled"
    tol: float = 1e-8
    maxit: int = 500
    seed: int = 0
    checks: str = "mesh"
    samples: int = 60
    out: str = "out"

    def validate(self):
        if self.J < 0:
            raise ConfigParse("J must be nonnegative")
        if not 0 <= self.gamma < 1:
            raise ConfigParse("gamma must lie in [0, 1)")
        if self.scenario not in SCENARIOS:
            raise ConfigParse(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if self.coefficients not in COEFFICIENT_PRESETS:
            raise ConfigParse(f"unknown coefficients {self.coefficients!r}")
        if self.checks not in CHECKS:
            raise ConfigParse(f"checks must be one of {CHECKS}")
        if self.domain not in ("cube", "simplex", "file"):
            raise ConfigParse(f"unknown domain {self.domain!r}")
        if self.domain == "file" and not self.mesh_file:
            raise ConfigParse("domain=file needs mesh_file")
        if self.tol <= 0 or self.maxit <= 0 or self.samples <= 0:
            raise ConfigParse("tol, maxit and samples must be positive")
        try:
            PreconditionerConfig(self.precond, self.gamma, smoother=self.smoother)
        except ConfigError as exc:
            raise ConfigParse(str(exc)) from exc
        return self


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_CAST = {"int": int, "float": float, "str": str}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParse(f"line {n}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigParse(f"line {n}: unknown key {key!r}")
        out[key] = val
    return out


def make_config(values: dict) -> ExperimentConfig:
    kw = {}
    for key, val in values.items():
        if val is None:
            continue
        try:
            kw[key] = _CAST[_TYPES[key]](val)
        except (KeyError, ValueError) as exc:
            raise ConfigParse(f"bad value for {key}: {val!r}") from exc
    return ExperimentConfig(**kw).validate()


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return make_config(values)


# ----------------------------------------------------------------------
def build_hierarchy(cfg: ExperimentConfig):
    h = build_initial_mesh(cfg.domain, path=cfg.mesh_file or None)
    refine_scenario(h, cfg.scenario, cfg.J)
    return h


def solve(cfg: ExperimentConfig, h=None):
    """Assemble and solve on the finest level; returns (hierarchy, solution, report dict)."""
    h = h or build_hierarchy(cfg)
    coeff, exact = COEFFICIENT_PRESETS[cfg.coefficients]
    fem = FEMHierarchy(h, coeff)
    t = MultilevelTransfer(fem)
    B = make_preconditioner(t, cfg.precond, cfg.gamma, smoother=cfg.smoother)
    A, b = fem.stiffness(h.J), fem.load(h.J)
    x, rep = pcg(A, b, B if A.shape[0] else None, tol=cfg.tol, maxit=cfg.maxit)
    out = {"config": asdict(cfg), "N_J": int(A.shape[0]), "levels": h.J, "solve": rep.to_dict()}
    if exact is not None:
        out["l2_error"] = l2_error(h, h.J, x, exact)
    return h, x, out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _outdir(cfg) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {out}: {exc}") from exc
    return out


def cmd_run(cfg: ExperimentConfig) -> int:
    h, x, report = solve(cfg)
    out = _outdir(cfg)
    for j in range(h.J + 1):
        try:
            write_vtk(h, j, out / f"mesh_level{j}.vtk")
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    _write(out / "solve.json", _dump(report))
    code = EXIT_OK
    if cfg.checks != "none":
        rep = run_all(h, seed=cfg.seed, n_samples=cfg.samples, spectral=cfg.checks == "all")
        _write(out / "verify.json", rep.to_json() + "\n")
        print(rep.table())
        if not rep.passed:
            code = EXIT_VERIFY
    s = report["solve"]
    print(f"N_J={report['N_J']} iterations={s['iterations']} kappa={s['kappa']:.4g} converged={s['converged']}")
    if not s["converged"]:
        return EXIT_SOLVER
    return code


def cmd_verify(cfg: ExperimentConfig) -> int:
    h = build_hierarchy(cfg)
    rep = run_all(h, seed=cfg.seed, n_samples=cfg.samples, spectral=cfg.checks != "mesh")
    out = _outdir(cfg)
    _write(out / "verify.json", rep.to_json() + "\n")
    print(rep.table())
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_export_mesh(cfg: ExperimentConfig) -> int:
    h = build_hierarchy(cfg)
    out = _outdir(cfg)
    for j in range(h.J + 1):
        try:
            write_vtk(h, j, out / f"mesh_level{j}.vtk")
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    print(f"wrote {h.J + 1} meshes to {out}")
    return EXIT_OK


def parse_levels(text) -> list[int]:
    """``"3"``, ``"1..4"`` or ``"1,2,4"``."""
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",")]


COMPARE_COLUMNS = ["J", "N_J", "precond", "gamma", "iterations", "lambda_min", "lambda_max", "kappa"]


def compare_rows(configs: list[ExperimentConfig], levels: list[int], lanczos_iters: int = 200) -> list[dict]:
    """One row per (level, config); every config must use the same scenario."""
    if len(configs) < 2:
        raise MismatchedScenario("compare needs at least two configurations")
    scen = {(c.scenario, c.domain, c.mesh_file) for c in configs}
    if len(scen) != 1:
        raise MismatchedScenario(f"configurations use different scenarios: {sorted(scen)}")
    base = configs[0]
    h = build_initial_mesh(base.domain, path=base.mesh_file or None)
    rows = []
    from .verify import truncate

    refine_scenario(h, base.scenario, max(levels))
    for J in levels:
        hh = truncate(h, J)
        for cfg in configs:
            coeff, _ = COEFFICIENT_PRESETS[cfg.coefficients]
            fem = FEMHierarchy(hh, coeff)
            t = MultilevelTransfer(fem)
            B = make_preconditioner(t, cfg.precond, cfg.gamma, smoother=cfg.smoother)
            A, b = fem.stiffness(J), fem.load(J)
            n = A.shape[0]
            if n == 0:
                continue
            _, rep = pcg(A, b, B, tol=cfg.tol, maxit=cfg.maxit)
            lo, hi = preconditioned_eigs(A, B, n, iters=min(n, lanczos_iters), seed=cfg.seed)
            rows.append({"J": J, "N_J": n, "precond": cfg.precond, "gamma": cfg.gamma,
                         "iterations": rep.iterations, "lambda_min": lo, "lambda_max": hi, "kappa": hi / lo})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_compare(configs, levels, out: str) -> int:
    rows = compare_rows(configs, levels)
    text = rows_to_csv(rows)
    path = Path(out)
    if path.suffix != ".csv":
        path = _outdir(ExperimentConfig(out=out)) / "compare.csv"
    else:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    _write(path, text)
    sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="redgreen", description=__doc__.splitlines()[0],
                                epilog=EXIT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--scenario", choices=sorted(SCENARIOS))
        sp.add_argument("--J", type=int)
        sp.add_argument("--precond", choices=KINDS)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--checks", choices=CHECKS)

    for name, help_ in (("run", "refine, solve, verify and write VTK/JSON"),
                        ("verify", "run the verification suite"),
                        ("export-mesh", "write one VTK file per level")):
        common(sub.add_parser(name, help=help_, epilog=EXIT_HELP,
                              formatter_class=argparse.RawDescriptionHelpFormatter))
    cp = sub.add_parser("compare", help="condition number table for several configurations",
                        epilog=EXIT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    cp.add_argument("configs", nargs="*", help="configuration files")
    cp.add_argument("--with", dest="inline", action="append", default=[],
                    help="inline configuration, e.g. 'precond=hb;gamma=0'")
    cp.add_argument("--levels", default="1..3", help="levels, e.g. 1..4 or 2,3")
    cp.add_argument("--out", default="out/compare.csv")
    return p


def _overrides(args) -> dict:
    keys = ("scenario", "J", "precond", "gamma", "tol", "seed", "out", "checks")
    return {k: getattr(args, k, None) for k in keys}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.verb == "compare":
            cfgs = [load_config(path) for path in args.configs]
            for item in args.inline:
                cfgs.append(make_config(parse_config_text(item.replace(";", "\n"))))
            return cmd_compare(cfgs, parse_levels(args.levels), args.out)
        cfg = load_config(args.config, _overrides(args))
        return {"run": cmd_run, "verify": cmd_verify, "export-mesh": cmd_export_mesh}[args.verb](cfg)
    except (ConfigParse, MismatchedScenario) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SolverStall) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IOFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH


if __name__ == "__main__":
    sys.exit(main())
