"""Descent solvers for the Rayleigh quotients and for T_lambda = J - lambda I.

All estimates are minima over the P1 subspace and therefore upper bounds of
the continuum infima.

Descent is limited-memory quasi-Newton (L-BFGS two-loop direction) with
Armijo backtracking on the objective.  The unknowns are the interior nodal
values; Dirichlet nodes stay at zero.  When all three exponents are the
same constant the quotients are invariant under scaling and each iterate
is rescaled to unit Sobolev norm.  Otherwise no rescaling is done: the
quotient blows up along rays towards 0 and towards infinity, so descent
stays at interior scales by itself, and rescaling would change the value.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DpeigError, ValidationError
from .exponents import ExponentField, validate_triple
from .functionals import DEFAULT_EPS, Problem
from .mesh import DiscreteFunction, Mesh, random_smooth_function
from .modular import sobolev_norm

KINDS = ("J_over_I", "J1_over_I1")

CERTIFIED = "eigenvalue_certified"
TRIVIAL = "trivial_only"
INCONCLUSIVE = "inconclusive"

TRIVIAL_T_FLOOR = -1e-8
POLISH_STEPS = 50
POLISH_MAX_NODES = 3000


@dataclass
class SolverOptions:
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    memory: int = 12
    noise_tolerance: float = 1e-13
    restarts: int = 8
    rng_seed: int = 0
    threads: int = 1
    triviality_threshold: float = 1e-6
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")
        if self.initial_step <= 0 or self.max_iterations < 1 or self.memory < 1:
            raise ValueError("initial_step, max_iterations and memory must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not self.eps > 0:
            raise ValueError("regularization eps must be positive")
        if self.noise_tolerance < 0:
            raise ValueError("noise_tolerance must be >= 0")


@dataclass
class DescentResult:
    x: np.ndarray
    f: float
    residual: float
    iterations: int
    converged: bool
    status: str
    history: list


@dataclass
class EigenEstimate:
    kind: str
    lambda_hat: float
    minimizer: DiscreteFunction
    residual: float
    eigen_residual: float
    iterations_used: int
    converged: bool
    descent_history: list
    restart_index: int = 0
    restart_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda_hat": self.lambda_hat,
            "residual": self.residual,
            "eigen_residual": self.eigen_residual,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "restart_index": self.restart_index,
            "restart_values": list(self.restart_values),
            "descent_history": [[int(i), float(v)] for i, v in self.descent_history],
            "upper_bound_note": "minimum over the discrete subspace; upper bound of the continuum infimum",
        }


@dataclass
class ScanRow:
    lam: float
    min_T_value: float
    minimizer_sobolev_norm: float
    residual: float
    classification: str
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "min_T": self.min_T_value,
            "norm": self.minimizer_sobolev_norm,
            "residual": self.residual,
            "classification": self.classification,
            "note": self.note,
        }


# -- descent core -----------------------------------------------------------

def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        a = (s @ q) / (y @ s)
        q -= a * y
        alphas.append(a)
    r = q * ((S[-1] @ Y[-1]) / (Y[-1] @ Y[-1]))
    for (s, y), a in zip(zip(S, Y), reversed(alphas)):
        b = (y @ r) / (y @ s)
        r += s * (a - b)
    return -r


def lbfgs_descent(fg, x0, opts: SolverOptions, renormalize=None,
                  max_norm: float = math.inf) -> DescentResult:
    """Minimize ``f`` from ``x0``; ``fg(x)`` returns ``(f, grad, residual)``.

    Stops when ``residual <= opts.gradient_tolerance``, when the line search
    cannot decrease ``f`` even along steepest descent, when ``|x|`` exceeds
    ``max_norm`` (objective unbounded below along the path), or at the
    iteration cap.  ``history`` holds ``(iteration, f)``.

    A step is accepted on Armijo sufficient decrease.  Close to a minimizer
    the decrease drops below the rounding error of ``f``; a step is then
    also accepted when ``f`` grows by at most ``noise_tolerance * |f|`` and
    the residual strictly decreases.  ``history`` is therefore
    non-increasing up to that rounding allowance.
    """
    x = np.array(x0, dtype=float)
    if renormalize is not None:
        x = renormalize(x)
    f, g, res = fg(x)
    history = [(0, f)]
    S, Y = [], []
    status = "max_iterations"
    it = 0
    while it < opts.max_iterations:
        if res <= opts.gradient_tolerance:
            status = "converged"
            break
        it += 1
        gn = np.linalg.norm(g)
        if S:
            d = _two_loop(g, S, Y)
            gd = g @ d
            if not gd < 0:
                S.clear()
                Y.clear()
        if not S:
            d = -g * (0.1 * max(np.linalg.norm(x), 1e-8) / gn)
            gd = g @ d

        alpha = opts.initial_step
        accepted = False
        slack = opts.noise_tolerance * abs(f)
        for _ in range(opts.max_backtracks):
            xn = x + alpha * d
            if np.array_equal(xn, x):
                break
            fn, gnew, resn = fg(xn)
            if math.isfinite(fn):
                if fn - f <= opts.armijo * alpha * gd:
                    accepted = True
                    break
                # inside the rounding band of f: judge progress by the residual
                if fn <= f + slack and resn < res:
                    accepted = True
                    break
            alpha *= opts.shrink
        if not accepted:
            if S:
                S.clear()
                Y.clear()
                continue
            status = "line_search_stalled"
            break

        if renormalize is not None:
            xn = renormalize(xn)
            fr, gnew, resn = fg(xn)
            fn = fr
        s = xn - x
        y = gnew - g
        sy = s @ y
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > opts.memory:
                S.pop(0)
                Y.pop(0)
        x, f, g, res = xn, fn, gnew, resn
        history.append((it, f))
        if np.linalg.norm(x) > max_norm:
            status = "unbounded"
            break
    converged = res <= opts.gradient_tolerance
    if converged:
        status = "converged"
    return DescentResult(x, f, res, it, converged, status, history)


def _newton_direction(H, g):
    """Solve ``(H + mu I) d = -g`` with the smallest ``mu`` that makes it positive definite."""
    H = 0.5 * (H + H.T)
    scale = max(float(np.max(np.abs(np.diag(H)))), 1e-300)
    eye = np.eye(H.shape[0])
    mu = 0.0
    for _ in range(60):
        try:
            L = np.linalg.cholesky(H + mu * eye)
        except np.linalg.LinAlgError:
            mu = max(10.0 * mu, 1e-12 * scale)
            continue
        return -np.linalg.solve(L.T, np.linalg.solve(L, g))
    return -g / scale


def newton_polish(fg, hess, result: DescentResult, opts: SolverOptions,
                  max_steps: int = POLISH_STEPS) -> DescentResult:
    """Damped Newton steps from the end point of a stalled descent.

    Near a minimizer with an element where ``grad u`` vanishes, the
    regularized ``|a|^(p-2)`` term has curvature of order ``eps^(p-2)``
    and quasi-Newton updates stall; the exact Hessian resolves it.  Steps
    use the same acceptance rule as :func:`lbfgs_descent`.
    """
    x, f, res = result.x, result.f, result.residual
    if x.size > POLISH_MAX_NODES or not math.isfinite(f):
        return result
    _, g, _ = fg(x)
    history = list(result.history)
    it = result.iterations
    for _ in range(max_steps):
        if res <= opts.gradient_tolerance:
            break
        d = _newton_direction(hess(x), g)
        gd = g @ d
        if not gd < 0:
            break
        slack = opts.noise_tolerance * abs(f)
        alpha, accepted = 1.0, False
        for _ in range(opts.max_backtracks):
            xn = x + alpha * d
            if np.array_equal(xn, x):
                break
            fn, gnew, resn = fg(xn)
            if math.isfinite(fn) and (fn - f <= opts.armijo * alpha * gd
                                      or (fn <= f + slack and resn < res)):
                accepted = True
                break
            alpha *= opts.shrink
        if not accepted:
            break
        it += 1
        x, f, g, res = xn, fn, gnew, resn
        history.append((it, f))
    converged = res <= opts.gradient_tolerance
    status = "converged" if converged else result.status
    return DescentResult(x, f, res, it, converged, status, history)


# -- objectives -------------------------------------------------------------

def _quotient_objective(prob: Problem, kind: str):
    weighted = kind == "J1_over_I1"
    interior = prob.mesh.interior_nodes
    n = prob.mesh.n_nodes

    def fg(x):
        v = np.zeros(n)
        v[interior] = x
        J, J1, I, I1, gJ, gI = prob.energies_and_gradients(v, weighted=weighted)
        num, den = (J1, I1) if weighted else (J, I)
        if not den > 0:
            return math.inf, np.zeros_like(x), math.inf
        R = num / den
        r = (gJ - R * gI)[interior]
        return R, r / den, float(np.linalg.norm(r))

    return fg


def _quotient_hessian(prob: Problem, kind: str):
    weighted = kind == "J1_over_I1"
    interior = prob.mesh.interior_nodes
    n = prob.mesh.n_nodes

    def hess(x):
        v = np.zeros(n)
        v[interior] = x
        J, J1, I, I1, gJ, gI = prob.energies_and_gradients(v, weighted=weighted)
        num, den = (J1, I1) if weighted else (J, I)
        R = num / den
        gB = gI[interior]
        gR = (gJ[interior] - R * gB) / den
        HA, HB = prob.hessians(v, weighted=weighted)
        return (HA - R * HB - np.outer(gB, gR) - np.outer(gR, gB)) / den

    return hess


def _T_hessian(prob: Problem, lam: float):
    interior = prob.mesh.interior_nodes
    n = prob.mesh.n_nodes

    def hess(x):
        v = np.zeros(n)
        v[interior] = x
        HJ, HI = prob.hessians(v)
        return HJ - lam * HI

    return hess


def _T_objective(prob: Problem, lam: float):
    interior = prob.mesh.interior_nodes
    n = prob.mesh.n_nodes

    def fg(x):
        v = np.zeros(n)
        v[interior] = x
        J, _, I, _, gJ, gI = prob.energies_and_gradients(v)
        r = (gJ - lam * gI)[interior]
        return J - lam * I, r, float(np.linalg.norm(r))

    return fg


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _start_rngs(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _prepare(p1, p2, q, mesh, opts, allow_degenerate, ambient_dimension):
    if mesh is not None and not mesh.same_as(p1.mesh):
        raise DpeigError("mesh argument differs from the exponents' mesh")
    mesh = p1.mesh
    report = validate_triple(p1, p2, q, ambient_dimension or mesh.dimension)
    if not report.ok and not allow_degenerate:
        raise ValidationError("; ".join(report.messages))
    return Problem(p1, p2, q, opts.eps), report


# -- public solvers ---------------------------------------------------------

def minimize_rayleigh(kind: str, p1: ExponentField, p2: ExponentField, q: ExponentField,
                      mesh: Mesh | None = None, opts: SolverOptions | None = None,
                      allow_degenerate: bool = False,
                      ambient_dimension: int | None = None) -> EigenEstimate:
    """Multi-start descent on J/I (``kind="J_over_I"``) or J1/I1.

    ``allow_degenerate`` skips the structural checks on the exponents, e.g.
    for p1 = p2 = q = 2 where both quotients reduce to twice the classical
    Dirichlet Rayleigh quotient.  Non-convergence is reported through
    ``converged=False``; only invalid exponents raise.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    opts = opts or SolverOptions()
    prob, _ = _prepare(p1, p2, q, mesh, opts, allow_degenerate, ambient_dimension)
    return _minimize_quotient(prob, kind, opts)


def _minimize_quotient(prob: Problem, kind: str, opts: SolverOptions,
                       extra_starts=()) -> EigenEstimate:
    mesh = prob.mesh
    fg = _quotient_objective(prob, kind)
    renormalize = None
    if prob.scale_invariant:
        r = prob.p1.minus
        w = mesh.weights.reshape(-1)

        def renormalize(x):
            # constant exponent: the Luxemburg norm is modular ** (1/r)
            g = DiscreteFunction.from_interior(mesh, x).gradient_norms()
            nrm = float(np.sum(w * g ** r)) ** (1.0 / r)
            return x / nrm if nrm > 0 else x

    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    starts += [random_smooth_function(mesh, rng).interior
               for rng in _start_rngs(opts.rng_seed, opts.restarts)]
    runs = _map(lambda x0: lbfgs_descent(fg, x0, opts, renormalize), starts, opts.threads)
    best_i = min(range(len(runs)), key=lambda i: (runs[i].f, i))
    best = runs[best_i]
    if not best.converged:
        best = newton_polish(fg, _quotient_hessian(prob, kind), best, opts)
        if renormalize is not None:
            x = renormalize(best.x)
            f, _, res = fg(x)
            best = DescentResult(x, f, res, best.iterations, res <= opts.gradient_tolerance,
                                 best.status, best.history)
    x = best.x
    # both quotients are even; report the sign with positive mass
    if np.sum(x) < 0:
        x = -x
    u = DiscreteFunction.from_interior(mesh, x)
    b = prob.breakdown(u)
    lam = b.rayleigh_JI if kind == "J_over_I" else b.rayleigh_J1I1
    eig_res = prob.weak_residual(u, lam) if math.isfinite(lam) and lam > 0 else math.inf
    return EigenEstimate(
        kind=kind,
        lambda_hat=lam,
        minimizer=u,
        residual=best.residual,
        eigen_residual=eig_res,
        iterations_used=best.iterations,
        converged=best.converged,
        descent_history=best.history,
        restart_index=best_i,
        restart_values=[r.f for r in runs],
    )


def _ray_warm_start(prob: Problem, w: DiscreteFunction, lam: float):
    """Scale of ``w`` minimizing T_lambda along its ray, if that minimum is negative."""
    ts = np.logspace(-4, 4, 161)
    vals = []
    for t in ts:
        J, _, I, _ = prob.energies(t * w.values)
        vals.append(J - lam * I)
    k = int(np.argmin(vals))
    if vals[k] < 0:
        return ts[k] * w.interior
    return None


def minimize_T(lam: float, p1: ExponentField, p2: ExponentField, q: ExponentField,
               mesh: Mesh | None = None, opts: SolverOptions | None = None,
               rayleigh: EigenEstimate | None = None, lambda0_hat: float | None = None,
               allow_degenerate: bool = False, ambient_dimension: int | None = None):
    """Global-minimum search for T_lambda; returns ``(ScanRow, minimizer)``.

    Starts: the J/I minimizer rescaled along its ray to the most negative
    T_lambda value (when some scale gives T < 0), plus ``opts.restarts``
    random smooth functions.  The trivial function (T = 0) is always a
    candidate.

    Classification:
      * ``eigenvalue_certified`` - best T < 0, residual <= tolerance and the
        minimizer is nontrivial;
      * ``trivial_only`` - best T >= -1e-8 at a trivial function and
        ``lam`` lies below ``lambda0_hat`` (when given);
      * ``inconclusive`` - anything else, including the interval between
        the two quotient infima and T unbounded below along a descent path.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    opts = opts or SolverOptions()
    prob, _ = _prepare(p1, p2, q, mesh, opts, allow_degenerate, ambient_dimension)
    if rayleigh is None:
        rayleigh = _minimize_quotient(prob, "J_over_I", opts)
    return _minimize_T(prob, lam, opts, rayleigh, lambda0_hat)


def _minimize_T(prob: Problem, lam: float, opts: SolverOptions,
                rayleigh: EigenEstimate, lambda0_hat: float | None):
    mesh = prob.mesh
    fg = _T_objective(prob, lam)
    starts = []
    warm = _ray_warm_start(prob, rayleigh.minimizer, lam)
    if warm is not None:
        starts.append(warm)
    starts += [random_smooth_function(mesh, rng).interior
               for rng in _start_rngs(opts.rng_seed + 1, opts.restarts)]
    max_norm = 1e8 * max(1.0, max(np.linalg.norm(s) for s in starts))
    runs = _map(lambda x0: lbfgs_descent(fg, x0, opts, max_norm=max_norm), starts, opts.threads)

    unbounded = any(r.status == "unbounded" for r in runs)
    best = min(runs, key=lambda r: r.f)
    if not best.converged and best.status != "unbounded" and best.f < 0:
        best = newton_polish(fg, _T_hessian(prob, lam), best, opts)
    thr = opts.triviality_threshold
    if best.f >= 0:
        u = DiscreteFunction.zeros(mesh)
        min_T, residual = 0.0, 0.0
    else:
        u = DiscreteFunction.from_interior(mesh, best.x)
        min_T, residual = best.f, best.residual
    norm = sobolev_norm(u, prob.p1)

    note = ""
    if unbounded:
        cls = INCONCLUSIVE
        note = "T_lambda decreased without bound along a descent path (not coercive)"
    elif min_T < 0 and residual <= opts.gradient_tolerance and norm > thr:
        cls = CERTIFIED
    elif min_T >= TRIVIAL_T_FLOOR and norm <= thr:
        if lambda0_hat is not None and lam >= lambda0_hat:
            cls = INCONCLUSIVE
            note = "descent found only the trivial solution inside [lambda0_hat, lambda1_hat)"
        else:
            cls = TRIVIAL
    else:
        cls = INCONCLUSIVE
        note = f"descent stopped with status {best.status}"
    row = ScanRow(float(lam), float(min_T), float(norm), float(residual), cls, note)
    return row, u


@dataclass
class ScanReport:
    rows: list
    lambda0_hat: float
    lambda1_hat: float
    warnings: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def summary(self) -> dict:
        trivial = [r.lam for r in self.rows if r.classification == TRIVIAL]
        certified = [r.lam for r in self.rows if r.classification == CERTIFIED]
        negative = [r.lam for r in self.rows if r.min_T_value < 0]
        return {
            "largest_trivial_only": max(trivial) if trivial else None,
            "smallest_eigenvalue_certified": min(certified) if certified else None,
            "smallest_negative_T": min(negative) if negative else None,
            "lambda0_hat": self.lambda0_hat,
            "lambda1_hat": self.lambda1_hat,
            "bracket": [self.lambda0_hat, self.lambda1_hat],
            "warnings": list(self.warnings),
        }

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "summary": self.summary()}


def scan_lambda(grid, p1: ExponentField, p2: ExponentField, q: ExponentField,
                mesh: Mesh | None = None, opts: SolverOptions | None = None,
                allow_degenerate: bool = False, ambient_dimension: int | None = None,
                estimates: tuple[EigenEstimate, EigenEstimate] | None = None) -> ScanReport:
    """One :func:`minimize_T` classification per grid value.

    ``estimates`` may supply precomputed ``(J/I, J1/I1)`` estimates.
    Failures in a single row are recorded as ``inconclusive`` rows.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(v <= 0 for v in grid):
        raise ValueError("lambda grid must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly ascending")
    opts = opts or SolverOptions()
    prob, _ = _prepare(p1, p2, q, mesh, opts, allow_degenerate, ambient_dimension)
    if estimates is None:
        est1 = _minimize_quotient(prob, "J_over_I", opts)
        est0 = _minimize_quotient(prob, "J1_over_I1", opts)
    else:
        est1, est0 = estimates

    def row(lam):
        try:
            return _minimize_T(prob, lam, opts, est1, est0.lambda_hat)[0]
        except (DpeigError, FloatingPointError, ValueError) as exc:
            return ScanRow(lam, math.nan, math.nan, math.nan, INCONCLUSIVE, f"error: {exc}")

    rows = _map(row, grid, opts.threads)
    warnings = []
    seen = False
    for r in rows:
        if r.classification == CERTIFIED:
            seen = True
        elif seen:
            warnings.append(
                f"lambda={r.lam:g} is {r.classification} above a certified value; "
                "certified set is not upward-closed on this grid"
            )
    return ScanReport(rows, est0.lambda_hat, est1.lambda_hat, warnings)


def estimate_embedding_eigenvalue(r: float, mesh: Mesh, opts: SolverOptions | None = None,
                                  return_estimate: bool = False):
    """Best constant in ``int |grad u|^r >= c int |u|^r`` on the discrete space."""
    if not r > 1:
        raise ValueError(f"embedding exponent must exceed 1, got {r}")
    field_r = ExponentField.constant(r, mesh)
    opts = opts or SolverOptions()
    prob = Problem(field_r, field_r, field_r, opts.eps)
    # with p1 = p2 = q = r, J1/I1 is twice the target quotient
    est = _minimize_quotient(prob, "J1_over_I1", opts)
    value = 0.5 * est.lambda_hat
    return (value, est) if return_estimate else value
