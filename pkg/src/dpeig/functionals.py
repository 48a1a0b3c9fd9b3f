"""Double-phase energies, their first variations and the residual.

For a P1 function ``u`` and exponents ``p1, p2, q``:

    J(u)  = int |grad u|^p1 / p1 + int |grad u|^p2 / p2
    I(u)  = int |u|^q / q
    J1(u) = int |grad u|^p1 + int |grad u|^p2
    I1(u) = int |u|^q

Energies use exact powers.  Gradients evaluate ``|a|^(p-2) a`` as
``(|a|^2 + eps^2)^((p-2)/2) a`` so the flux stays finite for p < 2; both
are assembled with the same quadrature, which makes ``<J'(u), u> = J1(u)``
and ``<I'(u), u> = I1(u)`` hold up to the (tiny) regularization.

Gradient vectors have one entry per mesh node; entries at Dirichlet nodes
are zero.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import MeshMismatchError
from .exponents import ExponentField
from .mesh import DiscreteFunction

DEFAULT_EPS = 1e-10


@dataclass(frozen=True)
class EnergyBreakdown:
    J: float
    I: float
    J1: float
    I1: float
    rayleigh_JI: float
    rayleigh_J1I1: float

    def to_dict(self) -> dict:
        return {k: _json_float(v) for k, v in asdict(self).items()}


def _json_float(v: float):
    return "inf" if math.isinf(v) else float(v)


def _quotient(num: float, den: float) -> float:
    return num / den if den > 0 else math.inf


class Problem:
    """Exponent triple bound to a mesh, ready for repeated evaluation."""

    def __init__(self, p1: ExponentField, p2: ExponentField, q: ExponentField,
                 eps: float = DEFAULT_EPS):
        mesh = p1.mesh
        if not (mesh.same_as(p2.mesh) and mesh.same_as(q.mesh)):
            raise MeshMismatchError("p1, p2 and q are sampled on different meshes")
        if not eps > 0:
            raise ValueError(f"regularization eps must be positive, got {eps}")
        self.mesh = mesh
        self.p1, self.p2, self.q = p1, p2, q
        self.eps = float(eps)
        self._args = (
            np.ascontiguousarray(mesh.elements),
            np.ascontiguousarray(mesh.dphi),
            np.ascontiguousarray(mesh.phi),
            np.ascontiguousarray(mesh.weights),
            np.ascontiguousarray(p1.grid),
            np.ascontiguousarray(p2.grid),
            np.ascontiguousarray(q.grid),
        )
        self._boundary = mesh.boundary_nodes

    @property
    def scale_invariant(self) -> bool:
        """True when all three exponents are the same constant (homogeneous quotients)."""
        vals = (self.p1.minus, self.p1.plus, self.p2.minus, self.p2.plus,
                self.q.minus, self.q.plus)
        return max(vals) == min(vals)

    def _check(self, u: DiscreteFunction):
        if not u.mesh.same_as(self.mesh):
            raise MeshMismatchError("function and exponents live on different meshes")
        return u.values

    def energies(self, values: np.ndarray):
        """``(J, J1, I, I1)`` for raw nodal values."""
        return kernels.energies(values, *self._args)

    def energies_and_gradients(self, values: np.ndarray, weighted: bool = False):
        """``(J, J1, I, I1, gJ, gI)``; gradient entries at boundary nodes are zeroed.

        With ``weighted=True`` the gradients are those of J1 and I1 instead.
        """
        J, J1, I, I1, gJ, gI = kernels.energies_and_gradients(
            values, *self._args, self.eps, weighted)
        gJ[self._boundary] = 0.0
        gI[self._boundary] = 0.0
        return J, J1, I, I1, gJ, gI

    def hessians(self, values: np.ndarray, weighted: bool = False):
        """Dense second variations ``(HJ, HI)`` of the regularized energies,
        restricted to interior nodes.

        Only used to polish a descent that stalls; plain numpy, O(n^2) memory.
        """
        m = self.mesh
        elements, dphi, phi, w, p1, p2, q = self._args
        e2 = self.eps * self.eps
        ue = values[elements]
        g = np.einsum("ek,ekd->ed", ue, dphi)
        s = np.einsum("ed,ed->e", g, g)[:, None] + e2
        iso = np.zeros(m.n_elements)
        rank1 = np.zeros(m.n_elements)
        for p in (p1, p2):
            c = w * (p if weighted else 1.0)
            iso += np.sum(c * s ** (0.5 * (p - 2.0)), axis=1)
            rank1 += np.sum(c * (p - 2.0) * s ** (0.5 * (p - 4.0)), axis=1)
        dg = np.einsum("ekd,ed->ek", dphi, g)
        local_j = (iso[:, None, None] * np.einsum("ekd,eld->ekl", dphi, dphi)
                   + rank1[:, None, None] * dg[:, :, None] * dg[:, None, :])

        uq = ue @ phi.T
        su = uq * uq + e2
        t = w * (su ** (0.5 * (q - 2.0)) + (q - 2.0) * su ** (0.5 * (q - 4.0)) * uq * uq)
        if weighted:
            t = q * t
        local_i = np.einsum("eq,qk,ql->ekl", t, phi, phi)

        n = m.n_nodes
        rows = np.repeat(elements, elements.shape[1], axis=1).ravel()
        cols = np.tile(elements, (1, elements.shape[1])).ravel()
        inner = m.interior_nodes
        out = []
        for local in (local_j, local_i):
            H = np.zeros((n, n))
            np.add.at(H, (rows, cols), local.ravel())
            out.append(H[np.ix_(inner, inner)])
        return tuple(out)

    def breakdown(self, u: DiscreteFunction) -> EnergyBreakdown:
        J, J1, I, I1 = self.energies(self._check(u))
        return EnergyBreakdown(J, I, J1, I1, _quotient(J, I), _quotient(J1, I1))

    def grad_J(self, u: DiscreteFunction) -> np.ndarray:
        return self.energies_and_gradients(self._check(u))[4]

    def grad_I(self, u: DiscreteFunction) -> np.ndarray:
        return self.energies_and_gradients(self._check(u))[5]

    def grad_J1(self, u: DiscreteFunction) -> np.ndarray:
        return self.energies_and_gradients(self._check(u), weighted=True)[4]

    def grad_I1(self, u: DiscreteFunction) -> np.ndarray:
        return self.energies_and_gradients(self._check(u), weighted=True)[5]

    def T(self, u: DiscreteFunction, lam: float):
        _check_lambda(lam)
        J, _, I, _, gJ, gI = self.energies_and_gradients(self._check(u))
        return J - lam * I, gJ - lam * gI

    def weak_residual(self, u: DiscreteFunction, lam: float) -> float:
        _check_lambda(lam)
        _, _, _, _, gJ, gI = self.energies_and_gradients(self._check(u))
        r = (gJ - lam * gI)[self.mesh.interior_nodes]
        return float(np.linalg.norm(r))

    def rayleigh(self, u: DiscreteFunction, kind: str = "J_over_I") -> float:
        b = self.breakdown(u)
        return b.rayleigh_JI if kind == "J_over_I" else b.rayleigh_J1I1


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")


def eval_energies(u: DiscreteFunction, p1: ExponentField, p2: ExponentField,
                  q: ExponentField) -> EnergyBreakdown:
    return Problem(p1, p2, q).breakdown(u)


def grad_J(u: DiscreteFunction, p1: ExponentField, p2: ExponentField,
           eps: float = DEFAULT_EPS) -> np.ndarray:
    """Nodal pairings of J'(u) with the hat functions."""
    return Problem(p1, p2, p2, eps).grad_J(u)


def grad_I(u: DiscreteFunction, q: ExponentField, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Nodal pairings of I'(u) with the hat functions."""
    return Problem(q, q, q, eps).grad_I(u)


def eval_T(u: DiscreteFunction, lam: float, p1: ExponentField, p2: ExponentField,
           q: ExponentField, eps: float = DEFAULT_EPS):
    """``(J(u) - lam I(u), J'(u) - lam I'(u))``."""
    return Problem(p1, p2, q, eps).T(u, lam)


def weak_residual(u: DiscreteFunction, lam: float, p1: ExponentField, p2: ExponentField,
                  q: ExponentField, eps: float = DEFAULT_EPS) -> float:
    """Euclidean norm over interior nodes of ``J'(u) - lam I'(u)``."""
    return Problem(p1, p2, q, eps).weak_residual(u, lam)
