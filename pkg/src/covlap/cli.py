"""Scenario-driven command line: ``covlap {solve,verify,bench} <config>``.

A scenario is an INI-style file. Keys before the first ``[section]`` sit at
the root; keys inside a section are addressed as ``section.key`` (keys may
themselves contain dots, e.g. ``family.samples`` under ``[checks]``)::

    seed = 7
    algebra = su2            # u1, u1^3, su2, su3 or a structure-constant file
    sigma = 0.5
    output_dir = out

    [grid]
    L = 3.0
    n = 33

    [potential]
    kind = bumps             # zero | bumps | constant | file

    [source]
    kind = manufactured      # zero | bump | manufactured | file

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-convergence or a failed check). Artifacts are JSON with sorted keys
and embed the resolved configuration, so reruns with the same seed produce
identical files apart from ``wall_time_s`` entries.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import grid_fields as gf
from . import inequality_lab as lab
from . import lie_algebra as la
from . import solver
from .errors import ConfigError, CovlapError, MaxIterationsExceeded
from .norms import h1_inner_product, source_condition_norm

log = logging.getLogger("covlap")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

DEFAULT_CHECKS = ("poincare", "coercivity", "boundedness", "apriori", "interpolation",
                  "embedding", "ginibre_velo", "gurka_opic", "mollified_curvature")

DEFAULTS = {
    "seed": "0",
    "algebra": "su2",
    "sigma": "1.0",
    "output_dir": "covlap_out",
    "grid.L": "3.0",
    "grid.n": "33",
    "potential.kind": "zero",
    "potential.count": "2",
    "potential.amplitude": "0.5",
    "source.kind": "zero",
    "source.variant": "discrete",
    "source.radius": "1.5",
    "source.center": "0, 0, 0",
    "solver.tol": "1e-10",
    "solver.max_iter": "20000",
    "solver.preconditioner": "none",
    "output.csv": "false",
    "checks.names": ", ".join(DEFAULT_CHECKS),
    "checks.family.samples": "12",
    "checks.apriori.n": "2",
    "checks.embedding.n": "2",
    "checks.interpolation.n": "2",
    "checks.interpolation.which": "2",
    "checks.interpolation.q": "4",
    "checks.ginibre_velo.deltas": "1, 0.1, 0.01",
    "checks.gurka_opic.p": "2",
    "checks.mollified_curvature.p": "0",
    "checks.mollified_curvature.deltas": "0.4, 0.2, 0.1",
    "bench.grids": "17, 33",
    "bench.repeats": "3",
}


# configuration

def read_config(path) -> dict:
    """Flatten an INI-style scenario into ``{"section.key": "value"}``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[__root__]\n" + path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        prefix = "" if section == "__root__" else section + "."
        for key, value in parser.items(section):
            flat[prefix + key] = value
    flat["_base_dir"] = str(path.parent.resolve())
    return flat


class Config:
    """Typed accessors over the flat key table; every lookup is recorded."""

    def __init__(self, raw: dict, seed_override: int | None = None, out_override: str | None = None):
        self.raw = dict(raw)
        self.base_dir = Path(self.raw.pop("_base_dir", "."))
        if seed_override is not None:
            self.raw["seed"] = str(seed_override)
        if out_override is not None:
            self.raw["output_dir"] = out_override
        self.resolved = {}

    def has(self, key):
        return key in self.raw

    def _get(self, key, default=None):
        if key in self.raw:
            return self.raw[key].strip()
        if default is not None:
            return str(default)
        if key in DEFAULTS:
            return DEFAULTS[key]
        raise ConfigError(f"{key}: required key is missing")

    def str(self, key, default=None):
        v = self._get(key, default)
        self.resolved[key] = v
        return v

    def float(self, key, default=None):
        v = self._get(key, default)
        try:
            out = float(v)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {v!r}") from None
        if not math.isfinite(out):
            raise ConfigError(f"{key}: expected a finite number, got {v!r}")
        self.resolved[key] = out
        return out

    def int(self, key, default=None):
        v = self._get(key, default)
        try:
            out = int(v)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {v!r}") from None
        self.resolved[key] = out
        return out

    def bool(self, key, default=None):
        v = self._get(key, default).lower()
        if v not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{key}: expected true or false, got {v!r}")
        out = v in ("true", "yes", "1")
        self.resolved[key] = out
        return out

    def floats(self, key, default=None):
        v = self._get(key, default)
        try:
            out = [float(x) for x in v.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {v!r}") from None
        self.resolved[key] = out
        return out

    def ints(self, key, default=None):
        v = self._get(key, default)
        try:
            out = [int(x) for x in v.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{key}: expected a list of integers, got {v!r}") from None
        self.resolved[key] = out
        return out

    def names(self, key, default=None):
        v = self._get(key, default)
        out = [x for x in v.replace(",", " ").split() if x]
        self.resolved[key] = out
        return out

    def path(self, key):
        p = Path(self.str(key))
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.is_file():
            raise ConfigError(f"{key}: file not found: {p}")
        return p


class Scenario:
    """Objects built from a :class:`Config`."""

    def __init__(self, cfg: Config, min_n: int = 3):
        self.cfg = cfg
        self.seed = cfg.int("seed")
        if self.seed < 0:
            raise ConfigError(f"seed: must be non-negative, got {self.seed}")
        self.sigma = cfg.float("sigma")
        if not 0.0 < self.sigma <= 1.0:
            raise ConfigError(f"sigma: must lie in (0, 1], got {self.sigma}")
        self.alg = self._algebra()
        L, n = cfg.float("grid.L"), cfg.int("grid.n")
        if L <= 0:
            raise ConfigError(f"grid.L: must be positive, got {L}")
        if n < min_n:
            raise ConfigError(f"grid.n: must be at least {min_n}, got {n}")
        self.grid = gf.Grid3(L, n)
        self.potential = self._potential()
        self.out_dir = Path(cfg.str("output_dir"))

    def _algebra(self):
        name = self.cfg.str("algebra")
        try:
            return la.by_name(name)
        except (KeyError, ValueError):
            pass
        p = Path(name)
        if not p.is_absolute():
            p = self.cfg.base_dir / p
        if not p.is_file():
            raise ConfigError(f"algebra: unknown algebra name or missing file: {name}")
        try:
            return la.load_algebra(p)
        except CovlapError as exc:
            raise ConfigError(f"algebra: {p}: {exc}") from exc

    def _potential(self):
        cfg = self.cfg
        kind = cfg.str("potential.kind")
        if kind == "zero":
            return None
        if kind == "bumps":
            count = cfg.int("potential.count")
            if not 1 <= count <= 8:
                raise ConfigError(f"potential.count: must lie in 1..8, got {count}")
            width = cfg.float("potential.width", 0.4 * self.grid.L)
            return gf.GaussianPotential.random(self.alg, self.grid.L, cfg.int("potential.seed", self.seed),
                                               count=count, amplitude=cfg.float("potential.amplitude"), width=width)
        if kind == "constant":
            vals = cfg.floats("potential.values")
            if len(vals) != 3 * self.alg.dim:
                raise ConfigError(f"potential.values: need {3 * self.alg.dim} numbers (3 x d), got {len(vals)}")
            d = self.alg.dim
            return gf.ConstantPotential(self.alg, tuple(tuple(vals[k * d:(k + 1) * d]) for k in range(3)))
        if kind == "file":
            path = cfg.path("potential.path")
            if not cfg.has("potential.smoothness"):
                raise ConfigError("potential.smoothness: file-loaded potentials must declare their smoothness class")
            self.smoothness = cfg.int("potential.smoothness")
            A = self._read(path, "potential.path")
            if not isinstance(A, gf.VectorField):
                raise ConfigError("potential.path: file holds a scalar field, expected three components")
            return A
        raise ConfigError(f"potential.kind: unknown kind {kind!r}")

    def _read(self, path, key):
        try:
            F = gf.read_field(path, self.grid.L, self.alg)
        except CovlapError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        if F.grid != self.grid:
            raise ConfigError(f"{key}: file has n={F.grid.n}, grid.n is {self.grid.n}")
        return F

    def A(self, grid=None):
        return gf.resolve_potential(self.potential, self.grid if grid is None else grid)

    def source(self):
        """``(F, Z_exact or None)``."""
        cfg = self.cfg
        kind = cfg.str("source.kind")
        if kind == "zero":
            return gf.ScalarField.zeros(self.grid, self.alg), None
        if kind == "manufactured":
            variant = cfg.str("source.variant")
            if variant not in ("discrete", "analytic"):
                raise ConfigError(f"source.variant: expected discrete or analytic, got {variant!r}")
            prob = solver.manufactured_problem(self.grid, self.alg, cfg.int("source.seed", self.seed), variant)
            # the manufactured problem carries its own potential
            self.potential = prob.A
            return prob.F, prob.Z_exact
        if kind == "bump":
            center = cfg.floats("source.center")
            direction = cfg.floats("source.direction", ", ".join(["1"] + ["0"] * (self.alg.dim - 1)))
            if len(center) != 3:
                raise ConfigError("source.center: need three coordinates")
            try:
                F = gf.sample_bump(self.grid, self.alg, center, cfg.float("source.radius"), direction)
            except CovlapError as exc:
                raise ConfigError(f"source: {exc}") from exc
            return F * cfg.float("source.amplitude", 1.0), None
        if kind == "file":
            F = self._read(cfg.path("source.path"), "source.path")
            if not isinstance(F, gf.ScalarField):
                raise ConfigError("source.path: expected a scalar field file")
            return F, None
        raise ConfigError(f"source.kind: unknown kind {kind!r}")

    def z0(self):
        if not self.cfg.has("z0.path"):
            return None
        Z0 = self._read(self.cfg.path("z0.path"), "z0.path")
        if not isinstance(Z0, gf.ScalarField):
            raise ConfigError("z0.path: expected a scalar field file")
        return Z0


# artifacts

def _dump(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(lab._json_num(payload), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _provenance(cfg: Config, command: str) -> dict:
    return {"command": command, "config": dict(sorted(cfg.resolved.items()))}


def _rel_error(Z, Z_exact):
    w = Z.grid.trapezoid_weights
    num = np.sum(w * (Z - Z_exact).magnitude() ** 2)
    den = np.sum(w * Z_exact.magnitude() ** 2)
    return float(np.sqrt(num / den)) if den else float(np.sqrt(num))


# subcommands

def run_solve(cfg: Config) -> int:
    sc = Scenario(cfg, min_n=5)
    F, Z_exact = sc.source()
    Z0 = sc.z0()
    tol, max_iter = cfg.float("solver.tol"), cfg.int("solver.max_iter")
    if tol <= 0:
        raise ConfigError(f"solver.tol: must be positive, got {tol}")
    if max_iter < 1:
        raise ConfigError(f"solver.max_iter: must be positive, got {max_iter}")
    pre = cfg.str("solver.preconditioner")
    if pre not in ("none", "jacobi"):
        raise ConfigError(f"solver.preconditioner: expected none or jacobi, got {pre!r}")
    write_csv = cfg.bool("output.csv")
    A = sc.A()
    kwargs = dict(preconditioner=None if pre == "none" else pre, raise_on_failure=False)
    if Z0 is None:
        Z, report = solver.solve_poisson(A, F, tol, max_iter, **kwargs)
    else:
        Z, report = solver.asymptotic_split_solve(A, F, Z0, tol, max_iter, sigma=sc.sigma, **kwargs)

    out = sc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    gf.write_field(out / "Z.gfld", Z)
    if write_csv:
        gf.write_csv(out / "Z.csv", Z)
    norms = {"source_condition_norm": source_condition_norm(F, sc.sigma),
             "Z_h1_norm": math.sqrt(max(h1_inner_product(A, Z, Z, sc.sigma), 0.0))}
    if Z_exact is not None:
        norms["relative_error"] = _rel_error(Z, Z_exact)
    payload = _provenance(cfg, "solve")
    payload.update(report=report.to_dict(), converged=report.converged, norms=norms)
    _dump(out / "solve_report.json", payload)
    log.info("solve: %d iterations, residual %.3e (tol %.1e)", report.iterations, report.final_residual, tol)
    if not report.converged:
        log.error("solver did not converge within %d iterations", max_iter)
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_check(name: str, sc: Scenario, cfg: Config, family) -> lab.CheckReport:
    sigma = sc.sigma
    if name == "poincare":
        return lab.check_poincare(sc.potential, sigma, family)
    if name == "coercivity":
        return lab.check_coercivity(sc.potential, sigma, family)
    if name == "boundedness":
        return lab.check_boundedness(sc.potential, sigma, family)
    if name == "apriori":
        n = cfg.int("checks.apriori.n")
        if getattr(sc, "smoothness", None) is not None and sc.smoothness < n - 1:
            raise ConfigError(f"potential.smoothness: order {n} estimate needs at least {n - 1}, got {sc.smoothness}")
        return lab.check_apriori(sc.potential, sigma, n, family)
    if name == "interpolation":
        return lab.check_interpolation(sc.potential, sigma, cfg.int("checks.interpolation.n"),
                                       cfg.int("checks.interpolation.which"), family,
                                       q=cfg.float("checks.interpolation.q"))
    if name == "embedding":
        return lab.check_embedding(sc.potential, sigma, cfg.int("checks.embedding.n"), family)
    if name == "ginibre_velo":
        deltas = cfg.floats("checks.ginibre_velo.deltas")
        reports = [lab.ginibre_velo_check(family, d, sc.potential) for d in deltas]
        worst = max(reports, key=lambda r: r.details["max_excess"])
        worst.details = {"per_delta": [r.to_dict() for r in reports], "deltas": deltas,
                         "max_excess": worst.details["max_excess"]}
        worst.passed = all(r.passed for r in reports)
        return worst
    if name == "gurka_opic":
        gs = cfg.float("checks.gurka_opic.sigma", sigma)
        if not 0.0 <= gs <= 1.0:
            raise ConfigError(f"checks.gurka_opic.sigma: must lie in [0, 1], got {gs}")
        return lab.gurka_opic_check(gs, cfg.float("checks.gurka_opic.p"))
    if name == "mollified_curvature":
        A = sc.A()
        if A is None:
            A = gf.VectorField.zeros(sc.grid, sc.alg)
        return lab.mollified_curvature_convergence(A, cfg.int("checks.mollified_curvature.p"), sigma,
                                                   cfg.floats("checks.mollified_curvature.deltas"))
    raise ConfigError(f"checks.names: unknown check {name!r}")


def run_verify(cfg: Config) -> int:
    sc = Scenario(cfg)
    names = cfg.names("checks.names")
    if not names:
        raise ConfigError("checks.names: the check list is empty")
    unknown = [n for n in names if n not in DEFAULT_CHECKS]
    if unknown:
        raise ConfigError(f"checks.names: unknown check(s) {', '.join(unknown)}")
    family = lab.TestFamily(sc.grid, sc.alg, samples=cfg.int("checks.family.samples"),
                            seed=cfg.int("checks.family.seed", sc.seed))
    reports = []
    for name in names:
        t0 = time.perf_counter()
        rep = _run_check(name, sc, cfg, family)
        log.info("%-20s %s  constant=%.6g  (%.1fs)", name, "pass" if rep.passed else "FAIL",
                 rep.empirical_constant, time.perf_counter() - t0)
        reports.append((name, rep))
    out = sc.out_dir
    for name, rep in reports:
        payload = _provenance(cfg, "verify")
        payload["report"] = rep.to_dict()
        _dump(out / f"check_{name}.json", payload)
    payload = _provenance(cfg, "verify")
    payload["checks"] = {name: {"passed": bool(rep.passed), "empirical_constant": lab._json_num(rep.empirical_constant)}
                         for name, rep in reports}
    payload["all_passed"] = all(rep.passed for _, rep in reports)
    _dump(out / "verify_summary.json", payload)
    return EXIT_OK if payload["all_passed"] else EXIT_NUMERICAL


def run_bench(cfg: Config) -> int:
    sc = Scenario(cfg)
    grids = cfg.ints("bench.grids")
    if not grids or any(n < 5 for n in grids):
        raise ConfigError(f"bench.grids: need one or more grid sizes >= 5, got {grids}")
    repeats = cfg.int("bench.repeats")
    if repeats < 1:
        raise ConfigError(f"bench.repeats: must be positive, got {repeats}")
    tol, max_iter = cfg.float("solver.tol"), cfg.int("solver.max_iter")
    rows = []
    for n in grids:
        grid = gf.Grid3(sc.grid.L, n)
        prob = solver.manufactured_problem(grid, sc.alg, sc.seed, "discrete")
        op = solver.DiscreteOperator(prob.A)
        u = np.random.default_rng(sc.seed).standard_normal(op.shape)
        op.apply(u)
        t0 = time.perf_counter()
        for _ in range(repeats):
            op.apply(u)
        apply_time = (time.perf_counter() - t0) / repeats
        _, report = solver.solve_poisson(prob.A, prob.F, tol, max_iter, raise_on_failure=False)
        rows.append({"n": n, "unknowns": op.size, "iterations": report.iterations,
                     "final_residual": report.final_residual, "converged": report.converged,
                     "apply_wall_time_s": apply_time,
                     "node_updates_per_s": (n - 2) ** 3 / apply_time if apply_time > 0 else None,
                     "cg_wall_time_s": report.wall_time})
    payload = _provenance(cfg, "bench")
    payload["rows"] = rows
    _dump(sc.out_dir / "bench.json", payload)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NUMERICAL


COMMANDS = {"solve": run_solve, "verify": run_verify, "bench": run_bench}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covlap", description="Covariant Poisson solver and inequality checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "solve one scenario"), ("verify", "run inequality checks"),
                        ("bench", "time operator application and CG")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="scenario file")
        s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        s.add_argument("--out", default=None, help="override output_dir")
    return p


def _thread_limit():
    raw = os.environ.get("COVLAP_THREADS")
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"COVLAP_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"COVLAP_THREADS: expected a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        threads = _thread_limit()
        cfg = Config(read_config(args.config), args.seed, args.out)
        if threads is None:
            return COMMANDS[args.command](cfg)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=threads):
            return COMMANDS[args.command](cfg)
    except MaxIterationsExceeded as exc:
        print(f"covlap: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CovlapError as exc:
        print(f"covlap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
