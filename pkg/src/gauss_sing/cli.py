"""Command-line driver: ``gauss-sing <command> [options]``.

Commands
--------
verify       weight bounds, cross-section estimate, local kernel claim, spectral identities
norms        L^p norm ratios over random expansions
weak11       weak-type statistic for shrinking bumps and the global-part domination
kernel-dump  kernel values on a grid, written to ``kernel.csv``
calibrate    least-squares constant of the integral representation

Every option can also be given in a flat JSON file passed with
``--config`` (keys are the option names with ``-`` replaced by ``_``);
options on the command line win.  Exit status: 0 when every check
passes, 1 when a check fails, 2 for an invalid configuration, 3 when a
numerical routine fails (reports produced so far are still written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis
from .hermite import HermiteExpansion, MultiIndex
from .kernels import KernelSpec, kernel_dump, orthogonality_check
from .operators import calibrate_cbeta, cbeta_closed_form
from .quadrature import QuadratureConfig, QuadratureError

COMMANDS = ("verify", "norms", "weak11", "kernel-dump", "calibrate")
QUAD_KEYS = ("abs_tol", "rel_tol", "max_refinements", "gh_nodes_per_axis", "angular_nodes")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid config: field '{field_name}': {message}")
        self.field = field_name


@dataclass
class RunConfig:
    """Validated run options (see ``gauss-sing --help``)."""

    command: str
    d: int = 1
    m: int | None = None
    F: str | None = None
    p: list = field(default_factory=lambda: [1.5, 2.0, 4.0])
    degree: int = 8
    trials: int = 50
    seed: int = 0
    threads: int = 1
    tol: float | None = None
    out: str = "."
    cd: float = 1.0
    beta: list | None = None
    samples: int | None = None
    bump_scales: list = field(default_factory=lambda: [0.5, 0.25, 0.125])
    c: float = 0.5
    kind: str = "alt"
    grid_points: int | None = None
    quadrature: dict = field(default_factory=dict)

    def quad(self, **defaults) -> QuadratureConfig | None:
        """Quadrature settings from ``--tol`` and file overrides, or ``None`` for experiment defaults."""
        opts = dict(defaults)
        if self.tol is not None:
            opts["rel_tol"] = self.tol
        opts.update(self.quadrature)
        return QuadratureConfig(**opts) if opts else None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_kernel(text: str | None, d: int, m: int | None) -> KernelSpec:
    """``hermite:b1,..,bd`` (``F = H_beta``), ``riesz:b1,..,bd`` (``F = C_beta H_beta``),
    or ``custom:n1,..,nd=c;...`` (Hermite coefficients; requires ``m``)."""
    if not text:
        raise ConfigError("F", "a kernel preset is required (hermite:beta, riesz:beta or custom:...)")
    name, _, body = text.partition(":")
    try:
        if name in ("hermite", "riesz"):
            beta = MultiIndex(int(v) for v in body.split(","))
            if beta.dim != d:
                raise ConfigError("F", f"multi-index {tuple(beta)} has {beta.dim} entries but d = {d}")
            if beta.order == 0:
                raise ConfigError("F", "the multi-index must be nonzero")
            scale = cbeta_closed_form(beta, d) if name == "riesz" else 1.0
            spec = KernelSpec.from_hermite(beta, m, scale=scale, label=text)
        elif name == "custom":
            if m is None:
                raise ConfigError("m", "custom kernels need an explicit m")
            terms = {}
            for item in filter(None, body.split(";")):
                idx, _, coef = item.partition("=")
                nu = MultiIndex(int(v) for v in idx.split(","))
                if nu.dim != d:
                    raise ConfigError("F", f"index {tuple(nu)} does not have {d} entries")
                terms[nu] = terms.get(nu, 0.0) + float(coef)
            if not terms:
                raise ConfigError("F", "custom kernel has no coefficients")
            spec = KernelSpec.from_hermite(HermiteExpansion(d, terms), m, label=text)
        else:
            raise ConfigError("F", f"unknown preset {name!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("F", str(exc)) from None
    if abs(orthogonality_check(spec)) > 1e-8:
        raise ConfigError("F", "the kernel function must have zero Gaussian mean")
    return spec


def _validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}")
    if not 1 <= cfg.d <= 3:
        raise ConfigError("d", "dimension must be 1, 2 or 3")
    if cfg.m is not None and cfg.m < 1:
        raise ConfigError("m", "m must be a positive integer")
    if any(q <= 1 for q in cfg.p):
        raise ConfigError("p", "every p must exceed 1")
    if cfg.degree < 1:
        raise ConfigError("degree", "degree must be >= 1")
    if cfg.trials < 1:
        raise ConfigError("trials", "trials must be >= 1")
    if cfg.threads < 1:
        raise ConfigError("threads", "threads must be >= 1")
    if cfg.tol is not None and not cfg.tol > 0:
        raise ConfigError("tol", "tolerance must be positive")
    if not cfg.cd > 0:
        raise ConfigError("cd", "C_d must be positive")
    if not cfg.c > 0:
        raise ConfigError("c", "c must be positive")
    if cfg.kind not in ("alt", "general", "k1"):
        raise ConfigError("kind", "kind must be alt, general or k1")
    if any(not 0 < s <= 1 for s in cfg.bump_scales):
        raise ConfigError("bump_scales", "scales must lie in (0, 1]")
    if cfg.command == "weak11" and cfg.d > 2:
        raise ConfigError("d", "weak11 supports d <= 2")
    bad = set(cfg.quadrature) - set(QUAD_KEYS)
    if bad:
        raise ConfigError(sorted(bad)[0], "unknown quadrature setting")
    try:
        cfg.quad()
    except ValueError as exc:
        raise ConfigError("quadrature", str(exc)) from None


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gauss-sing", description="Gaussian singular integral experiments.")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON file with default option values")
    ap.add_argument("--d", type=int, help="dimension")
    ap.add_argument("--m", type=int, help="order m of the operator")
    ap.add_argument("--F", help="kernel preset: hermite:beta | riesz:beta | custom:nu=c;...")
    ap.add_argument("--p", help="comma-separated exponents for norms")
    ap.add_argument("--degree", type=int, help="largest expansion degree for norms")
    ap.add_argument("--trials", type=int, help="random expansions per degree")
    ap.add_argument("--seed", type=int, help="random seed")
    ap.add_argument("--threads", type=int, help="worker threads (fallback: GAUSS_SING_THREADS)")
    ap.add_argument("--tol", type=float, help="relative quadrature tolerance")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--cd", type=float, help="local-region constant C_d")
    ap.add_argument("--beta", help="multi-index for calibrate, e.g. 1,0")
    ap.add_argument("--samples", type=int, help="sample count for sampled experiments")
    ap.add_argument("--bump-scales", dest="bump_scales", help="comma-separated bump widths for weak11")
    ap.add_argument("--c", type=float, help="decay constant of Phi for the maximal function")
    ap.add_argument("--kind", help="kernel for kernel-dump: alt, general or k1")
    ap.add_argument("--grid-points", dest="grid_points", type=int, help="grid points per axis for kernel-dump")
    return ap


def load_config(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(values, dict):
            raise ConfigError("config", "the file must hold one JSON object")
        values = {k.replace("-", "_"): v for k, v in values.items()}
    for k, v in vars(ns).items():
        if k != "config" and v is not None:
            values[k] = v
    if "threads" not in values and os.environ.get("GAUSS_SING_THREADS"):
        values["threads"] = os.environ["GAUSS_SING_THREADS"]
    quad = {k: values.pop(k) for k in QUAD_KEYS if k in values}
    quad.update(values.pop("quadrature", {}) or {})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown option")
    if not values.get("command"):
        raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}")
    conv = {"d": int, "m": int, "degree": int, "trials": int, "seed": int, "threads": int, "tol": float,
            "cd": float, "samples": int, "c": float, "grid_points": int, "p": _floats, "bump_scales": _floats,
            "beta": _ints, "out": str, "F": str, "kind": str}
    for k, fn in conv.items():
        if values.get(k) is not None:
            try:
                values[k] = fn(values[k])
            except (TypeError, ValueError):
                raise ConfigError(k, f"cannot parse {values[k]!r}") from None
    cfg = RunConfig(quadrature=quad, **values)
    _validate(cfg)
    return cfg


# -- commands -------------------------------------------------------------


def _run_verify(cfg: RunConfig, spec: KernelSpec, emit) -> None:
    emit(analysis.verify_spectral_identities())
    emit(analysis.verify_lemma21())
    emit(analysis.verify_lemma22(samples=cfg.samples or 1000, d=max(cfg.d, 2), C_d=cfg.cd, seed=cfg.seed,
                                 cfg=cfg.quad(abs_tol=1e-14), threads=cfg.threads))
    emit(analysis.verify_local_claim(spec, samples=cfg.samples or 200, C_d=cfg.cd, seed=cfg.seed,
                                     cfg=cfg.quad(abs_tol=1e-14)))


def _run_norms(cfg: RunConfig, spec: KernelSpec, emit) -> None:
    emit(analysis.estimate_operator_norm(spec, cfg.p, cfg.degree, cfg.trials, cfg.seed,
                                         cfg=cfg.quad(abs_tol=1e-14), threads=cfg.threads))


def _run_weak11(cfg: RunConfig, spec: KernelSpec, emit) -> None:
    emit(analysis.estimate_weak11(spec, cfg.bump_scales, cfg=cfg.quad(abs_tol=1e-13), threads=cfg.threads))
    emit(analysis.verify_global_domination(spec, samples=cfg.samples or 16, c=cfg.c, C_d=cfg.cd,
                                           cfg=cfg.quad(abs_tol=1e-13), threads=cfg.threads))


def _run_kernel_dump(cfg: RunConfig, spec: KernelSpec, emit, out: Path) -> None:
    n = cfg.grid_points or (9 if spec.dim == 1 else 5)
    axis = np.linspace(-2.0, 2.0, n)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([axis] * spec.dim), indexing="ij")], axis=-1)
    rows = kernel_dump(spec, grid, grid, out / "kernel.csv", cfg.quad(), cfg.kind)
    emit(analysis.ExperimentReport("kernel_dump", {"kernel": spec.label, "kind": cfg.kind, "grid_points": n},
                                   rows, 0.0, None))


def _run_calibrate(cfg: RunConfig, emit) -> None:
    if cfg.beta is None:
        if cfg.F and cfg.F.split(":")[0] in ("hermite", "riesz"):
            cfg.beta = _ints(cfg.F.partition(":")[2])
        else:
            raise ConfigError("beta", "calibrate needs --beta (or a hermite preset)")
    beta = MultiIndex(cfg.beta)
    if beta.dim != cfg.d:
        raise ConfigError("beta", f"multi-index has {beta.dim} entries but d = {cfg.d}")
    res = calibrate_cbeta(beta, cfg.d, cfg.quad(rel_tol=1e-12, abs_tol=1e-14), threads=cfg.threads,
                          residual_tol=np.inf)
    print(f"C_beta = {res.c_beta:.15g}  residual = {res.residual:.3e}  closed form = {res.closed_form:.15g}")
    details = [{"probe": x, "integral": v, "spectral": s} for x, v, s in
               zip(res.probes, res.integral_values, res.spectral_values)]
    emit(analysis._report("calibrate", {"beta": list(beta), "d": cfg.d}, len(res.probes),
                          [analysis._check("residual", res.residual, 1e-6)], None, details,
                          {"c_beta": res.c_beta, "closed_form": res.closed_form,
                           "relative_difference": abs(res.c_beta - res.closed_form) / res.closed_form,
                           "diagonal": res.details["diagonal"]}))


def _write(out: Path, cfg: RunConfig, reports: list, status: int, error: str | None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    for r in reports:
        r.timestamp = stamp
    bundle = {"command": cfg.command, "config": analysis._jsonable(cfg.to_dict()), "status": status,
              "passed": all(r.passed for r in reports) and status == EXIT_OK, "error": error,
              "reports": [r.to_dict() for r in reports], "timestamp": stamp}
    with open(out / "report.json", "w") as fh:
        fh.write(json.dumps(bundle, sort_keys=True, indent=2) + "\n")
    analysis.write_details_csv(reports, out / "details.csv")


def run(cfg: RunConfig) -> int:
    """Execute one configured run; returns the exit status."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports: list = []

    def emit(rep):
        reports.append(rep)
        mark = "PASS" if rep.passed else "FAIL"
        print(f"[{mark}] {rep.name}: statistic {rep.statistic:.4g}"
              + ("" if rep.threshold is None else f" (threshold {rep.threshold:g})"))

    try:
        if cfg.command == "calibrate":
            _run_calibrate(cfg, emit)
        else:
            spec = parse_kernel(cfg.F, cfg.d, cfg.m)
            if cfg.command == "verify":
                _run_verify(cfg, spec, emit)
            elif cfg.command == "norms":
                _run_norms(cfg, spec, emit)
            elif cfg.command == "weak11":
                _run_weak11(cfg, spec, emit)
            else:
                _run_kernel_dump(cfg, spec, emit, out)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write(out, cfg, reports, EXIT_NUMERIC, str(exc))
        return EXIT_NUMERIC
    status = EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED
    _write(out, cfg, reports, status, None)
    return status


def main(argv=None) -> int:
    try:
        cfg = load_config(argv)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
