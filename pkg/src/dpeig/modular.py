"""Modular, Luxemburg norm and the variable-exponent Hölder bound.

All quantities are computed from samples at the mesh quadrature points.
The Luxemburg norm of a nonzero ``f`` is characterized as the unique root
``mu`` of ``modular(f / mu) = 1``; the map ``mu -> modular(f / mu)`` is
continuous and strictly decreasing, so bracketed bisection always works.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, MeshMismatchError
from .exponents import ExponentField
from .mesh import DiscreteFunction, Mesh

LUXEMBURG_TOL = 1e-12
MAX_BRACKET_STEPS = 200
MAX_BISECTIONS = 200


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values at the quadrature samples of ``mesh``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.mesh.n_quad:
            raise MeshMismatchError(
                f"field has {v.shape[0]} samples, mesh has {self.mesh.n_quad} quadrature points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, mesh: Mesh) -> "ScalarField":
        """Sample a callable ``fn(x)`` / ``fn(x, y)`` at the quadrature points."""
        coords = mesh.quadrature_coordinates()
        vals = np.broadcast_to(np.asarray(fn(*coords), dtype=float), (mesh.n_quad,))
        return cls(mesh, vals)

    @classmethod
    def of(cls, u: DiscreteFunction) -> "ScalarField":
        return cls(u.mesh, u.at_quadrature())

    @classmethod
    def gradient_norm(cls, u: DiscreteFunction) -> "ScalarField":
        return cls(u.mesh, u.gradient_norms())


def _samples(f, p: ExponentField) -> np.ndarray:
    if isinstance(f, ScalarField):
        if not f.mesh.same_as(p.mesh):
            raise MeshMismatchError("field and exponent live on different meshes")
        return f.values
    v = np.asarray(f, dtype=float).reshape(-1)
    if v.shape[0] != p.mesh.n_quad:
        raise MeshMismatchError(
            f"field has {v.shape[0]} samples, exponent has {p.mesh.n_quad}"
        )
    return v


def modular(f, p: ExponentField) -> float:
    """Integral of ``|f|^p`` by mesh quadrature."""
    v = _samples(f, p)
    return float(kernels.modular(np.abs(v), p.values, p.mesh.weights.reshape(-1)))


def luxemburg_norm(f, p: ExponentField, tol: float = LUXEMBURG_TOL) -> float:
    """``inf{mu > 0 : modular(f / mu) <= 1}`` by bracketed bisection.

    ``tol`` is relative: bisection stops once ``hi - lo <= tol * hi``.
    """
    v = np.abs(_samples(f, p))
    w = p.mesh.weights.reshape(-1)
    nz = v > 0
    if not nz.any():
        return 0.0
    a, e, wz = v[nz], p.values[nz], w[nz]

    def rho(mu):
        return kernels.modular(a / mu, e, wz)

    hi = float(a.max())
    steps = 0
    while rho(hi) > 1.0:
        hi *= 2.0
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise ConvergenceError("could not bracket the Luxemburg norm from above")
    lo = hi
    while rho(lo) <= 1.0:
        lo *= 0.5
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise ConvergenceError("could not bracket the Luxemburg norm from below")

    # invariant: rho(lo) > 1 >= rho(hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * hi or not (lo < mid < hi):
            return mid
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("Luxemburg bisection did not reach tolerance")


def sobolev_norm(u: DiscreteFunction, p: ExponentField) -> float:
    """Luxemburg norm of |grad u|."""
    if not u.mesh.same_as(p.mesh):
        raise MeshMismatchError("function and exponent live on different meshes")
    return luxemburg_norm(u.gradient_norms(), p)


def holder_bound(u, v, p: ExponentField) -> tuple[float, float]:
    """Both sides of ``|int u v| <= (1/p- + 1/p'-) |u|_p |v|_p'``."""
    a = _samples(u, p)
    b = _samples(v, p)
    pc = p.conjugate()
    lhs = abs(float(np.sum(p.mesh.weights.reshape(-1) * a * b)))
    rhs = (1.0 / p.minus + 1.0 / pc.minus) * luxemburg_norm(a, p) * luxemburg_norm(b, pc)
    return lhs, rhs
