"""``dpeig`` command line: ``solve``, ``scan`` and ``validate``.

Exit codes: 0 success, 1 configuration / validation / I/O error,
2 a minimization did not converge (or, for ``validate``, a check failed).

Every report carries the hash of the resolved configuration; wall-clock
data goes to ``metadata.json`` only, so the other files are byte-identical
across runs with the same configuration and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__, kernels
from .config import RunConfig, load_config
from .diagnostics import run_diagnostics
from .errors import DpeigError
from .exponents import validate_triple
from .solver import minimize_rayleigh, scan_lambda

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
SCAN_COLUMNS = ("lambda", "min_T", "norm", "residual", "classification")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json_text(payload: dict) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


class _Writer:
    """Collects outputs in memory; everything hits the disk in one place."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.files: dict[str, str] = {}
        self.started = time.time()

    def json(self, name, payload):
        self.files[name] = _json_text({"config_hash": self.cfg.hash(), **payload})

    def csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# config_hash: {self.cfg.hash()}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else c for c in r])
        self.files[name] = buf.getvalue()

    def text(self, name, body):
        self.files[name] = f"config_hash: {self.cfg.hash()}\n{body}"

    def flush(self):
        out = self.cfg.output_dir
        if not os.path.isdir(out):
            raise OSError(f"output directory {out!r} does not exist")
        meta = {
            "command": self.command,
            "config_hash": self.cfg.hash(),
            "config_source": self.cfg.source_path,
            "started_unix": self.started,
            "finished_unix": time.time(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kernel_backend": kernels.ACTIVE,
            "threads": self.cfg.threads,
            "package_version": __version__,
        }
        self.files["metadata.json"] = _json_text(meta)
        for name, body in self.files.items():
            with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(body)


def _setup(cfg: RunConfig):
    mesh = cfg.build_mesh()
    p1, p2, q = cfg.exponents(mesh)
    report = validate_triple(p1, p2, q, cfg.ambient_dimension or mesh.dimension)
    if not report.ok and not cfg.degenerate:
        raise DpeigError("invalid exponents: " + "; ".join(report.messages))
    return mesh, p1, p2, q, report


def _check_out(cfg: RunConfig):
    if not os.path.isdir(cfg.output_dir):
        raise OSError(f"output directory {cfg.output_dir!r} does not exist")
    if not os.access(cfg.output_dir, os.W_OK):
        raise OSError(f"output directory {cfg.output_dir!r} is not writable")


def _estimates(cfg, mesh, p1, p2, q):
    opts = cfg.solver_options()
    kw = dict(mesh=mesh, opts=opts, allow_degenerate=cfg.degenerate,
              ambient_dimension=cfg.ambient_dimension)
    est1 = minimize_rayleigh("J_over_I", p1, p2, q, **kw)
    est0 = minimize_rayleigh("J1_over_I1", p1, p2, q, **kw)
    return est1, est0


def cmd_solve(cfg: RunConfig) -> int:
    _check_out(cfg)
    mesh, p1, p2, q, report = _setup(cfg)
    est1, est0 = _estimates(cfg, mesh, p1, p2, q)
    ordered = est0.lambda_hat <= est1.lambda_hat + 1e-6 * est0.lambda_hat
    w = _Writer(cfg, "solve")
    w.json("estimates.json", {
        "lambda1": est1.to_dict(),
        "lambda0": est0.to_dict(),
        "ordering_ok": bool(ordered),
        "validation": report.to_dict(),
    })
    coords = mesh.node_coordinates()
    names = ["x", "y"][: mesh.dimension]
    w.csv("minimizer.csv", names + ["u_lambda1", "u_lambda0"],
          zip(*coords, est1.minimizer.values, est0.minimizer.values))
    lines = [
        f"lambda1_hat (inf J/I)   = {est1.lambda_hat:.10g}  converged={est1.converged}"
        f"  residual={est1.residual:.3e}",
        f"lambda0_hat (inf J1/I1) = {est0.lambda_hat:.10g}  converged={est0.converged}"
        f"  residual={est0.residual:.3e}",
        f"lambda0_hat <= lambda1_hat: {'yes' if ordered else 'NO'}",
    ]
    lines += [f"warning: {m}" for m in report.dimension_warnings]
    body = "\n".join(lines) + "\n"
    w.text("summary.txt", body)
    w.flush()
    sys.stdout.write(body)
    return EXIT_OK if est1.converged and est0.converged else EXIT_NOT_CONVERGED


def cmd_scan(cfg: RunConfig) -> int:
    if not cfg.lambda_grid:
        raise DpeigError("scan needs a non-empty lambda_grid")
    grid = list(cfg.lambda_grid)
    if any(v <= 0 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DpeigError("lambda_grid must be positive and strictly ascending")
    _check_out(cfg)
    mesh, p1, p2, q, _ = _setup(cfg)
    est1, est0 = _estimates(cfg, mesh, p1, p2, q)
    rep = scan_lambda(grid, p1, p2, q, mesh, cfg.solver_options(),
                      allow_degenerate=cfg.degenerate,
                      ambient_dimension=cfg.ambient_dimension, estimates=(est1, est0))
    w = _Writer(cfg, "scan")
    w.csv("scan.csv", SCAN_COLUMNS,
          ([r.lam, r.min_T_value, r.minimizer_sobolev_norm, r.residual, r.classification]
           for r in rep))
    w.json("scan.json", {**rep.to_dict(),
                         "estimates_converged": bool(est1.converged and est0.converged)})
    w.flush()
    s = rep.summary()
    for r in rep:
        print(f"lambda={r.lam:<12.6g} min_T={r.min_T_value:<14.6g} {r.classification}")
    print(f"largest trivial_only: {s['largest_trivial_only']}")
    print(f"smallest eigenvalue_certified: {s['smallest_eigenvalue_certified']}")
    print(f"bracket [lambda0_hat, lambda1_hat]: [{s['lambda0_hat']:.8g}, {s['lambda1_hat']:.8g}]")
    for m in rep.warnings:
        print(f"warning: {m}", file=sys.stderr)
    return EXIT_OK if est1.converged and est0.converged else EXIT_NOT_CONVERGED


def cmd_validate(cfg: RunConfig) -> int:
    _check_out(cfg)
    mesh = cfg.build_mesh()
    p1, p2, q = cfg.exponents(mesh)
    reports = run_diagnostics(
        p1, p2, q, rng_seed=cfg.seed, n_modular=cfg.modular_trials,
        n_chain=cfg.chain_trials, n_gradient=cfg.gradient_trials,
        opts=cfg.solver_options(), ambient_dimension=cfg.ambient_dimension,
        allow_degenerate=cfg.degenerate,
    )
    ok = all(r.passed for r in reports)
    w = _Writer(cfg, "validate")
    w.json("diagnostics.json", {"all_passed": ok, "checks": [r.to_dict() for r in reports]})
    w.flush()
    for r in reports:
        print(r.line())
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


COMMANDS = {"solve": cmd_solve, "scan": cmd_scan, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpeig", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__ or name)
        sp.add_argument("--config", required=True, help="flat key = value run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--threads", type=int, help="worker threads for restarts and scan rows")
        sp.add_argument("--out", help="output directory (must exist)")
    return ap


cmd_solve.__doc__ = "estimate lambda1 = inf J/I and lambda0 = inf J1/I1"
cmd_scan.__doc__ = "classify a lambda grid by minimizing T_lambda"
cmd_validate.__doc__ = "run the diagnostic checks"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.threads, args.out)
        # re-run validation of overridden fields
        cfg = RunConfig(**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__})
        return COMMANDS[args.command](cfg)
    except (DpeigError, ValueError, OSError) as exc:
        print(f"dpeig {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
