"""Run configuration: a flat ``key = value`` text file.

One assignment per line, ``#`` starts a comment.  Values are read as JSON
(numbers, ``true``/``false``, lists); anything that is not valid JSON is
taken as a bare string, so ``p1 = 3 + 0.2*sin(x)`` needs no quotes.

Schema (defaults in brackets):

    domain          interval | rectangle                  [interval]
    bounds          [a, b] or [x0, x1, y0, y1]            [[0, 1]] / unit square
    resolution      n or [nx, ny], each >= 2              [100] / [16, 16]
    p1, p2, q       number, expression in x/y, or @values.txt (required)
    ambient_dimension  N used by the subcritical check    [mesh dimension]
    degenerate      skip the exponent structure checks    [false]
    epsilon         gradient regularization, > 0          [1e-10]
    seed            base RNG seed                         [0]
    threads         worker threads                        [1]
    output_dir      where reports are written             [.]
    lambda_grid     ascending positive list (scan only)   [none]
    max_iterations, gradient_tolerance, initial_step, shrink, armijo,
    max_backtracks, memory, noise_tolerance, restarts,
    triviality_threshold                                  [solver defaults]
    modular_trials, chain_trials, gradient_trials         [2000, 200, 10]

Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError
from .exponents import ExponentField, exponent_from_spec
from .mesh import Mesh, build_interval_mesh, build_rectangle_mesh
from .solver import SolverOptions

SOLVER_KEYS = (
    "max_iterations", "gradient_tolerance", "initial_step", "shrink", "armijo",
    "max_backtracks", "memory", "noise_tolerance", "restarts", "triviality_threshold",
)
# keys that do not influence any numerical result
_UNHASHED = ("output_dir", "threads", "source_path")


@dataclass(frozen=True)
class RunConfig:
    p1: object
    p2: object
    q: object
    domain: str = "interval"
    bounds: tuple = ()
    resolution: tuple = ()
    ambient_dimension: int | None = None
    degenerate: bool = False
    epsilon: float = 1e-10
    seed: int = 0
    threads: int = 1
    output_dir: str = "."
    lambda_grid: tuple | None = None
    solver: dict = field(default_factory=dict)
    modular_trials: int = 2000
    chain_trials: int = 200
    gradient_trials: int = 10
    source_path: str | None = None

    def __post_init__(self):
        if self.domain not in ("interval", "rectangle"):
            raise ConfigError(f"domain must be 'interval' or 'rectangle', got {self.domain!r}")
        dim = 1 if self.domain == "interval" else 2
        bounds = tuple(float(b) for b in (self.bounds or (0.0, 1.0) * dim))
        if len(bounds) != 2 * dim:
            raise ConfigError(f"bounds needs {2 * dim} numbers for a {self.domain}")
        if any(bounds[2 * i + 1] <= bounds[2 * i] for i in range(dim)):
            raise ConfigError("bounds must be increasing pairs")
        res = self.resolution
        if isinstance(res, (int, float)):
            res = (res,) * dim
        res = tuple(res or ((100,) if dim == 1 else (16, 16)))
        if len(res) != dim or any(int(r) != r for r in res):
            raise ConfigError(f"resolution needs {dim} integer(s)")
        if any(r < 2 for r in res):
            raise ConfigError("resolution must be >= 2")
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        grid = self.lambda_grid
        if grid is not None:
            if isinstance(grid, (int, float)):
                grid = (grid,)
            grid = tuple(float(v) for v in grid)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", tuple(int(r) for r in res))
        object.__setattr__(self, "lambda_grid", grid)
        self.solver_options()  # validates solver keys early

    @property
    def dimension(self) -> int:
        return 1 if self.domain == "interval" else 2

    def solver_options(self) -> SolverOptions:
        try:
            return SolverOptions(rng_seed=self.seed, threads=self.threads,
                                 eps=float(self.epsilon), **self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver option: {exc}") from None

    def build_mesh(self) -> Mesh:
        b, r = self.bounds, self.resolution
        if self.dimension == 1:
            return build_interval_mesh(b[0], b[1], r[0])
        return build_rectangle_mesh((b[0], b[1]), (b[2], b[3]), r[0], r[1])

    def exponents(self, mesh: Mesh) -> tuple[ExponentField, ExponentField, ExponentField]:
        base = os.path.dirname(self.source_path) if self.source_path else "."
        out = []
        for name in ("p1", "p2", "q"):
            spec = getattr(self, name)
            if isinstance(spec, str) and spec.startswith("@") and not os.path.isabs(spec[1:]):
                spec = "@" + os.path.join(base, spec[1:])
            try:
                out.append(exponent_from_spec(spec, mesh))
            except (ValueError, OSError) as exc:
                raise ConfigError(f"{name}: {exc}") from None
        return tuple(out)

    def canonical(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in _UNHASHED}
        d["bounds"] = list(self.bounds)
        d["resolution"] = list(self.resolution)
        d["lambda_grid"] = None if self.lambda_grid is None else list(self.lambda_grid)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, seed=None, threads=None, output_dir=None) -> "RunConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = seed
        if threads is not None:
            kw["threads"] = threads
        if output_dir is not None:
            kw["output_dir"] = output_dir
        return replace(self, **kw)


_TOP_KEYS = {f.name for f in fields(RunConfig)} - {"solver", "source_path"}
KNOWN_KEYS = _TOP_KEYS | set(SOLVER_KEYS)


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse the flat format; errors name the file, line and key."""
    top, solver, seen = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} already set on line {seen[key]}")
        if not val:
            raise ConfigError(f"{source}:{lineno}: key {key!r} has no value")
        seen[key] = lineno
        (solver if key in SOLVER_KEYS else top)[key] = _value(val)
    for req in ("p1", "p2", "q"):
        if req not in top:
            raise ConfigError(f"{source}: missing required key {req!r}")
    try:
        return RunConfig(**top, solver=solver,
                         source_path=None if source == "<string>" else source)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
