"""Batch checks of the modular/norm relations, the energy inequalities,
ray blow-up of the quotient and the analytic gradients.

Every check counts assertions of the form ``lhs <= rhs`` and records the
violation ``lhs - rhs - slack``; a trial fails when that is positive.
Inequalities of the form ``a >= b`` are stored as ``b <= a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentField, validate_triple
from .functionals import Problem
from .mesh import DiscreteFunction, Mesh, random_smooth_function
from .modular import holder_bound, luxemburg_norm, modular
from .solver import SolverOptions, estimate_embedding_eigenvalue

MODULAR_SLACK = 1e-9
GRADIENT_TOL = 1e-5
GRADIENT_FLOOR = 1e-8
FD_STEP = 1e-6
# components whose patch has |grad u| or |u| within this factor of the
# difference step sit too close to the |a|^(p-2) kink to difference reliably
KINK_MARGIN = 1e3
MAX_DETAILS = 25


@dataclass
class CheckReport:
    check_name: str
    trials: int = 0
    failures: int = 0
    worst_violation: float = -math.inf
    details: list = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, lhs: float, rhs: float, slack: float = 0.0, witness=None) -> bool:
        """Count one ``lhs <= rhs`` assertion; returns True when it holds."""
        v = float(lhs - rhs - slack)
        if math.isnan(v):
            v = math.inf
        self.trials += 1
        self.worst_violation = max(self.worst_violation, v)
        if v > 0:
            self.failures += 1
            if len(self.details) < MAX_DETAILS:
                self.details.append({"input": witness, "lhs": float(lhs), "rhs": float(rhs)})
            return False
        return True

    def record_strict(self, lhs: float, rhs: float, witness=None) -> bool:
        """Count one ``lhs < rhs`` assertion (equality fails)."""
        v = float(lhs - rhs)
        self.trials += 1
        self.worst_violation = max(self.worst_violation, v)
        if not lhs < rhs:
            self.failures += 1
            if len(self.details) < MAX_DETAILS:
                self.details.append({"input": witness, "lhs": float(lhs), "rhs": float(rhs)})
            return False
        return True

    def merge(self, other: "CheckReport") -> "CheckReport":
        self.trials += other.trials
        self.failures += other.failures
        self.worst_violation = max(self.worst_violation, other.worst_violation)
        self.skipped += other.skipped
        room = MAX_DETAILS - len(self.details)
        self.details.extend(other.details[:max(room, 0)])
        return self

    def to_dict(self) -> dict:
        wv = self.worst_violation
        return {
            "check_name": self.check_name,
            "trials": self.trials,
            "failures": self.failures,
            "worst_violation": None if math.isinf(wv) and wv < 0 else wv,
            "details": self.details,
            "skipped": self.skipped,
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tail = f" skipped={self.skipped}" if self.skipped else ""
        return (f"{status}  {self.check_name:<28} trials={self.trials:<7} "
                f"failures={self.failures:<5} worst={self.worst_violation:.3e}{tail}")


def _rel(a, b, rel):
    return rel * max(abs(a), abs(b))


def _random_samples(mesh: Mesh, rng) -> np.ndarray:
    """Smooth random field at the quadrature points, random overall scale."""
    u = random_smooth_function(mesh, rng)
    scale = 10.0 ** rng.uniform(-1.5, 1.5)
    return scale * u.at_quadrature()


# -- modular / norm --------------------------------------------------------

def check_modular_norm_relations(n_trials: int, mesh: Mesh, p: ExponentField,
                                 rng_seed: int = 0) -> CheckReport:
    """Norm/modular sandwiches on both sides of norm 1, plus a null-sequence test.

    For ``norm > 1``: ``norm^p- <= modular <= norm^p+``; for ``norm < 1`` the
    exponents swap.  The sequence part checks that ``f/n`` drives modular and
    norm to zero together and monotonically.
    """
    rep = CheckReport("modular_norm_relations")
    rng = np.random.default_rng(rng_seed)
    lo, hi = p.minus, p.plus
    for t in range(n_trials):
        f = _random_samples(mesh, rng)
        nrm = luxemburg_norm(f, p)
        rho = modular(f, p)
        a, b = (lo, hi) if nrm > 1 else (hi, lo)
        w = {"trial": t, "norm": nrm, "modular": rho}
        rep.record(nrm ** a, rho, _rel(nrm ** a, rho, MODULAR_SLACK), w)
        rep.record(rho, nrm ** b, _rel(rho, nrm ** b, MODULAR_SLACK), w)

    # null sequence f_n = g / n
    g = random_smooth_function(mesh, rng).at_quadrature()
    prev_rho, prev_nrm = math.inf, math.inf
    for n in (1, 2, 4, 8, 16, 64, 256, 1024, 4096):
        fn = g / n
        rho, nrm = modular(fn, p), luxemburg_norm(fn, p)
        w = {"sequence_n": n, "norm": nrm, "modular": rho}
        rep.record(rho, prev_rho, 0.0, w)
        rep.record(nrm, prev_nrm, 0.0, w)
        prev_rho, prev_nrm = rho, nrm
    # both limits vanish: modular <= norm^p- once norm < 1
    rep.record(prev_rho, prev_nrm ** lo, _rel(prev_rho, prev_nrm ** lo, MODULAR_SLACK),
               {"sequence_n": 4096})
    rep.record(prev_nrm, 1e-3, 0.0, {"sequence_n": 4096})
    return rep


def check_normalization(n_trials: int, mesh: Mesh, p: ExponentField,
                        rng_seed: int = 0) -> CheckReport:
    """``modular(f / norm(f)) = 1`` within the modular slack."""
    rep = CheckReport("normalization")
    rng = np.random.default_rng(rng_seed)
    for t in range(n_trials):
        f = _random_samples(mesh, rng)
        rho = modular(f / luxemburg_norm(f, p), p)
        rep.record(abs(rho - 1.0), 0.0, MODULAR_SLACK, {"trial": t, "modular": rho})
    return rep


def check_holder(n_trials: int, mesh: Mesh, p: ExponentField, rng_seed: int = 0) -> CheckReport:
    """``|int u v| <= (1/p- + 1/p'-) |u|_p |v|_p'`` on random pairs."""
    rep = CheckReport("holder")
    rng = np.random.default_rng(rng_seed)
    for t in range(n_trials):
        u = _random_samples(mesh, rng)
        v = _random_samples(mesh, rng)
        lhs, rhs = holder_bound(u, v, p)
        rep.record(lhs, rhs, _rel(lhs, rhs, MODULAR_SLACK), {"trial": t})
    return rep


# -- energy inequalities ---------------------------------------------------

def embedding_constant(q: ExponentField, opts: SolverOptions | None = None) -> float:
    """``min(lambda_q+, lambda_q-)``: a valid constant in J1 >= (c/2) I1."""
    mesh = q.mesh
    opts = opts or SolverOptions(restarts=2)
    vals = [estimate_embedding_eigenvalue(r, mesh, opts) for r in sorted({q.minus, q.plus})]
    return min(vals)


def check_inequality_chain(u: DiscreteFunction, p1: ExponentField, p2: ExponentField,
                           q: ExponentField, mu_hat: float | None = None,
                           estimator_slack: float = 1e-6) -> CheckReport:
    """Pointwise and integrated inequalities used to show the quotients are positive.

    (i)   2(a^p1 + a^p2) >= a^q+ + a^q-  at every quadrature point, a = |grad u|
    (ii)  int (|u|^q+ + |u|^q-) >= I1(u)
    (iii) p1+ J(u) >= J1(u)
    (iv)  J1(u) >= (mu_hat / 2) I1(u), skipped when ``mu_hat`` is None
    """
    rep = CheckReport("inequality_chain")
    prob = Problem(p1, p2, q)
    b = prob.breakdown(u)
    qp, qm = q.plus, q.minus
    a = u.gradient_norms()
    lhs = a ** qp + a ** qm
    rhs = 2.0 * (a ** p1.values + a ** p2.values)
    viol = lhs - rhs - 1e-12 * np.maximum(lhs, rhs)
    k = int(np.argmax(viol))
    # one trial per quadrature point; only the worst one carries a witness
    rep.trials += a.size - 1
    bad = int(np.sum(viol > 0))
    rep.failures += max(bad - 1, 0) if viol[k] > 0 else bad
    rep.record(lhs[k], rhs[k], 1e-12 * max(lhs[k], rhs[k]),
               {"relation": "pointwise", "sample": k, "grad_norm": float(a[k])})

    w = u.mesh.weights.reshape(-1)
    uq = np.abs(u.at_quadrature())
    two_sided = float(np.sum(w * (uq ** qp + uq ** qm)))
    rep.record(b.I1, two_sided, _rel(b.I1, two_sided, 1e-12), {"relation": "integrated_q"})
    rep.record(b.J1, p1.plus * b.J, _rel(b.J1, p1.plus * b.J, 1e-12), {"relation": "p1plus_J"})
    if mu_hat is not None:
        bound = 0.5 * mu_hat * b.I1
        rep.record(bound, b.J1, estimator_slack * max(bound, b.J1), {"relation": "embedding"})
    return rep


def check_inequality_chain_random(n_trials: int, p1: ExponentField, p2: ExponentField,
                                  q: ExponentField, rng_seed: int = 0,
                                  mu_hat: float | None = None) -> CheckReport:
    rep = CheckReport("inequality_chain")
    rng = np.random.default_rng(rng_seed)
    for _ in range(n_trials):
        u = random_smooth_function(p1.mesh, rng, amplitude=10.0 ** rng.uniform(-2, 2))
        rep.merge(check_inequality_chain(u, p1, p2, q, mu_hat))
    return rep


# -- ray profile -----------------------------------------------------------

def ray_limit_profile(u: DiscreteFunction, t_grid, p1: ExponentField, p2: ExponentField,
                      q: ExponentField) -> list:
    """``[(t, J(t u) / I(t u)) for t in t_grid]``."""
    if u.is_zero():
        raise ValueError("ray profile needs a nonzero function")
    ts = [float(t) for t in t_grid]
    if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_grid must be positive and strictly ascending")
    prob = Problem(p1, p2, q)
    out = []
    for t in ts:
        J, _, I, _ = prob.energies(t * u.values)
        out.append((t, J / I if I > 0 else math.inf))
    return out


def check_ray_blowup(u: DiscreteFunction, p1: ExponentField, p2: ExponentField,
                     q: ExponentField, ts=(1e-3, 1e3), factor: float = 1.0) -> CheckReport:
    """``J/I(t u) > factor * J/I(u)`` at each ``t`` in ``ts``."""
    rep = CheckReport("ray_blowup")
    prof = dict(ray_limit_profile(u, sorted(set(ts) | {1.0}), p1, p2, q))
    base = prof[1.0]
    for t in ts:
        rep.record_strict(factor * base, prof[t], {"t": t})
    return rep


# -- gradients -------------------------------------------------------------

def _patch_energies(mesh: Mesh, p1, p2, q, values, elems):
    """J, I, J1, I1 restricted to ``elems``; plain numpy, independent of the kernels."""
    el = mesh.elements[elems]
    ue = values[el]
    g = np.einsum("ek,ekd->ed", ue, mesh.dphi[elems])
    gn = np.linalg.norm(g, axis=1)[:, None]
    w = mesh.weights[elems]
    P1, P2, Q = p1.grid[elems], p2.grid[elems], q.grid[elems]
    uq = np.abs(ue @ mesh.phi.T)
    J = np.sum(w * (gn ** P1 / P1 + gn ** P2 / P2))
    J1 = np.sum(w * (gn ** P1 + gn ** P2))
    I = np.sum(w * uq ** Q / Q)
    I1 = np.sum(w * uq ** Q)
    return np.array([J, I, J1, I1])


def _node_patches(mesh: Mesh):
    n2e = [[] for _ in range(mesh.n_nodes)]
    for e, verts in enumerate(mesh.elements):
        for v in verts:
            n2e[v].append(e)
    return [np.array(ix) for ix in n2e]


def finite_difference_gradients(u: DiscreteFunction, p1, p2, q, h: float = FD_STEP):
    """Central differences of (J, I, J1, I1) along each interior hat function.

    Returns an array of shape ``(n_interior, 4)``.
    """
    mesh = u.mesh
    patches = _node_patches(mesh)
    out = np.empty((mesh.interior_nodes.size, 4))
    base = u.values.copy()
    for k, i in enumerate(mesh.interior_nodes):
        elems = patches[i]
        plus = base.copy()
        plus[i] += h
        minus = base.copy()
        minus[i] -= h
        out[k] = (_patch_energies(mesh, p1, p2, q, plus, elems)
                  - _patch_energies(mesh, p1, p2, q, minus, elems)) / (2 * h)
    return out


def smooth_components(u: DiscreteFunction, h: float = FD_STEP) -> np.ndarray:
    """Mask over interior nodes where the patch stays clear of the kinks at 0."""
    mesh = u.mesh
    gn = np.linalg.norm(np.einsum("ek,ekd->ed", u.values[mesh.elements], mesh.dphi), axis=1)
    dmax = np.linalg.norm(mesh.dphi, axis=2).max(axis=1)
    uq = np.abs(u.at_quadrature()).reshape(mesh.n_elements, mesh.n_qp).min(axis=1)
    ok_e = (gn >= KINK_MARGIN * h * dmax) & (uq >= KINK_MARGIN * h)
    patches = _node_patches(mesh)
    return np.array([ok_e[patches[i]].all() for i in mesh.interior_nodes])


def check_gradients(n_trials: int, mesh: Mesh, p1: ExponentField, p2: ExponentField,
                    q: ExponentField, rng_seed: int = 0, u_list=None) -> CheckReport:
    """Analytic J', I', J1', I1' against central differences at h = 1e-6.

    Per component: ``|fd - g| <= 1e-5 * max(|g|, 1e-8)``.  Components next
    to a zero of ``grad u`` or ``u`` are counted in ``skipped``.
    """
    rep = CheckReport("gradients")
    rng = np.random.default_rng(rng_seed)
    prob = Problem(p1, p2, q)
    inner = mesh.interior_nodes
    if u_list is None:
        u_list = [random_smooth_function(mesh, rng) for _ in range(n_trials)]
    names = ("J", "I", "J1", "I1")
    for t, u in enumerate(u_list):
        mask = smooth_components(u)
        rep.skipped += 4 * int(np.sum(~mask))
        if not mask.any():
            continue
        fd = finite_difference_gradients(u, p1, p2, q)[mask]
        nodes = inner[mask]
        *_, gJ, gI = prob.energies_and_gradients(u.values)
        *_, gJ1, gI1 = prob.energies_and_gradients(u.values, weighted=True)
        for c, g in enumerate((gJ, gI, gJ1, gI1)):
            g = g[nodes]
            err = np.abs(fd[:, c] - g)
            bound = GRADIENT_TOL * np.maximum(np.abs(g), GRADIENT_FLOOR)
            viol = err - bound
            k = int(np.argmax(viol))
            bad = int(np.sum(viol > 0))
            rep.trials += g.size - 1
            rep.failures += max(bad - 1, 0) if viol[k] > 0 else bad
            rep.record(err[k], bound[k], 0.0,
                       {"trial": t, "functional": names[c], "node": int(nodes[k])})
    return rep


# -- batch harness ---------------------------------------------------------

def run_diagnostics(p1: ExponentField, p2: ExponentField, q: ExponentField,
                    rng_seed: int = 0, n_modular: int = 2000, n_chain: int = 200,
                    n_gradient: int = 10, opts: SolverOptions | None = None,
                    ambient_dimension: int | None = None, allow_degenerate: bool = False):
    """All checks on one exponent configuration; returns a list of CheckReports."""
    from .solver import minimize_rayleigh

    mesh = p1.mesh
    opts = opts or SolverOptions(restarts=3, rng_seed=rng_seed)
    val = validate_triple(p1, p2, q, ambient_dimension or mesh.dimension)
    reports = [
        check_modular_norm_relations(n_modular, mesh, p1, rng_seed),
        check_normalization(n_modular, mesh, p1, rng_seed + 1),
        check_holder(n_modular, mesh, p1, rng_seed + 2),
        check_gradients(n_gradient, mesh, p1, p2, q, rng_seed + 3),
    ]
    if not val.ok:
        if allow_degenerate:
            return reports
        bad = CheckReport("validation")
        bad.record(1.0, 0.0, 0.0, val.to_dict())
        return reports + [bad]

    mu = embedding_constant(q, opts)
    reports.append(check_inequality_chain_random(n_chain, p1, p2, q, rng_seed + 4, mu))

    est1 = minimize_rayleigh("J_over_I", p1, p2, q, mesh, opts,
                             ambient_dimension=ambient_dimension)
    est0 = minimize_rayleigh("J1_over_I1", p1, p2, q, mesh, opts,
                             ambient_dimension=ambient_dimension)
    spectral = CheckReport("spectral_ordering")
    spectral.record_strict(0.0, est0.lambda_hat, {"relation": "lambda0_hat > 0"})
    spectral.record(est0.lambda_hat, est1.lambda_hat, 1e-6 * est0.lambda_hat,
                    {"relation": "lambda0_hat <= lambda1_hat"})
    b = Problem(p1, p2, q).breakdown(est1.minimizer)
    stat = abs(b.J1 - est1.lambda_hat * b.I1)
    spectral.record(stat, 0.0, 1e-6 * b.J1, {"relation": "J1 = lambda1_hat I1 at minimizer"})
    reports.append(spectral)
    if est1.converged:
        reports.append(check_ray_blowup(est1.minimizer, p1, p2, q))
    return reports
