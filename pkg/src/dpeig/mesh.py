"""Uniform P1 meshes on intervals and rectangles.

A :class:`Mesh` carries everything the element loops need: vertex indices,
constant basis gradients, reference basis values at the quadrature points
and physical quadrature weights.  Quadrature samples are enumerated
element-major: sample ``e * n_qp + j`` is quadrature point ``j`` of element
``e``.  Exponent fields and scalar fields use that same ordering.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import MeshError, MeshMismatchError

# Two-point Gauss rule on [0, 1] in barycentric form.
_G = 0.5 / np.sqrt(3.0)
_GAUSS2_BARY = np.array([[0.5 + _G, 0.5 - _G], [0.5 - _G, 0.5 + _G]])
_GAUSS2_W = np.array([0.5, 0.5])

# Interior three-point rule on the reference triangle, degree 2.
_TRI3_BARY = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)
_TRI3_W = np.full(3, 1 / 3)

QUADRATURE_DEGREE = {1: 3, 2: 2}


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Mesh:
    """Simplicial mesh of an interval (``dimension == 1``) or a rectangle."""

    def __init__(self, nodes, elements, boundary_nodes, ref_bary, ref_weights):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        self.nodes = _frozen(nodes)
        self.dimension = nodes.shape[1]
        self.elements = _frozen(np.asarray(elements, dtype=np.int64))
        self.boundary_nodes = _frozen(np.unique(np.asarray(boundary_nodes, dtype=np.int64)))
        mask = np.ones(len(nodes), dtype=bool)
        mask[self.boundary_nodes] = False
        self.interior_nodes = _frozen(np.flatnonzero(mask))
        self.phi = _frozen(np.asarray(ref_bary, dtype=float))
        self.ref_weights = _frozen(np.asarray(ref_weights, dtype=float))

        verts = self.nodes[self.elements]  # (E, k, d)
        if self.dimension == 1:
            h = verts[:, 1, 0] - verts[:, 0, 0]
            measures = h
            dphi = np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
        elif self.dimension == 2:
            B = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=2)
            det = np.linalg.det(B)
            measures = 0.5 * det
            Binv = np.linalg.inv(B)  # rows are gradients of barycentrics 1, 2
            dphi = np.concatenate([-Binv.sum(axis=1, keepdims=True), Binv], axis=1)
        else:
            raise MeshError("only dimensions 1 and 2 are supported")
        if np.any(measures <= 0):
            raise MeshError("mesh has an element of non-positive measure")
        self.element_measures = _frozen(measures)
        self.dphi = _frozen(dphi)
        self.weights = _frozen(measures[:, None] * self.ref_weights[None, :])
        self.quadrature_points = _frozen(np.einsum("qk,ekd->eqd", self.phi, verts))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_qp(self) -> int:
        """Quadrature points per element."""
        return self.ref_weights.shape[0]

    @property
    def n_quad(self) -> int:
        return self.n_elements * self.n_qp

    @property
    def volume(self) -> float:
        return float(np.sum(self.element_measures))

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.elements.tobytes())
        h.update(self.ref_weights.tobytes())
        return h.hexdigest()[:16]

    def same_as(self, other: "Mesh") -> bool:
        return self is other or self.fingerprint == other.fingerprint

    def quadrature_coordinates(self):
        """Flat coordinate arrays ``(x,)`` or ``(x, y)`` of all quadrature samples."""
        pts = self.quadrature_points.reshape(-1, self.dimension)
        return tuple(pts[:, c] for c in range(self.dimension))

    def node_coordinates(self):
        return tuple(self.nodes[:, c] for c in range(self.dimension))

    def __repr__(self):
        return (f"Mesh(dimension={self.dimension}, n_nodes={self.n_nodes}, "
                f"n_elements={self.n_elements})")


def build_interval_mesh(a: float, b: float, n_elements: int) -> Mesh:
    """Uniform partition of ``(a, b)`` with 2-point Gauss quadrature."""
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise MeshError(f"need a < b, got a={a}, b={b}")
    if int(n_elements) != n_elements or n_elements < 2:
        raise MeshError(f"need n_elements >= 2, got {n_elements}")
    n = int(n_elements)
    x = np.linspace(a, b, n + 1)
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return Mesh(x, elements, [0, n], _GAUSS2_BARY, _GAUSS2_W)


def build_rectangle_mesh(x_range, y_range, nx: int, ny: int) -> Mesh:
    """Structured triangulation of a rectangle, two triangles per cell."""
    (x0, x1), (y0, y1) = x_range, y_range
    if not (x0 < x1 and y0 < y1):
        raise MeshError(f"degenerate rectangle {x_range} x {y_range}")
    for name, v in (("nx", nx), ("ny", ny)):
        if int(v) != v or v < 2:
            raise MeshError(f"need {name} >= 2, got {v}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row j is y = ys[j]
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def idx(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    lower = np.stack([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)], axis=1)
    upper = np.stack([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)], axis=1)
    elements = np.empty((2 * len(i), 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    I, Jn = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    on_edge = (I == 0) | (I == nx) | (Jn == 0) | (Jn == ny)
    boundary = idx(I[on_edge], Jn[on_edge])
    return Mesh(nodes, elements, boundary, _TRI3_BARY, _TRI3_W)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Nodal P1 function with zero boundary values.

    Boundary entries of ``values`` are overwritten with 0 on construction.
    """

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.mesh.n_nodes:
            raise MeshMismatchError(
                f"got {v.shape[0]} nodal values for a mesh with {self.mesh.n_nodes} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("nodal values must be finite")
        v[self.mesh.boundary_nodes] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_interior(cls, mesh: Mesh, x) -> "DiscreteFunction":
        v = np.zeros(mesh.n_nodes)
        v[mesh.interior_nodes] = x
        return cls(mesh, v)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior_nodes]

    def at_quadrature(self) -> np.ndarray:
        """Values at the quadrature samples (flat, element-major)."""
        return (self.values[self.mesh.elements] @ self.mesh.phi.T).reshape(-1)

    def gradient_norms(self) -> np.ndarray:
        """|grad u| at the quadrature samples (flat, element-major)."""
        g = element_gradients(self)
        return np.repeat(np.sqrt(np.sum(g * g, axis=1)), self.mesh.n_qp)

    def scaled(self, t: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, t * self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __add__(self, other):
        if not isinstance(other, DiscreteFunction):
            return NotImplemented
        if not self.mesh.same_as(other.mesh):
            raise MeshMismatchError("functions live on different meshes")
        return DiscreteFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __mul__(self, t):
        return self.scaled(float(t))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)


def interpolate(f, mesh: Mesh) -> DiscreteFunction:
    """Nodal interpolant of ``f`` (called as ``f(x)`` or ``f(x, y)`` on arrays).

    Boundary nodes are set to 0 whatever ``f`` returns there.
    """
    coords = mesh.node_coordinates()
    vals = np.broadcast_to(np.asarray(f(*coords), dtype=float), (mesh.n_nodes,))
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated function has non-finite nodal values")
    return DiscreteFunction(mesh, vals)


def element_gradients(u: DiscreteFunction) -> np.ndarray:
    """Constant gradient of ``u`` on each element, shape ``(E, dimension)``."""
    m = u.mesh
    return kernels.element_gradients(u.values, m.elements, m.dphi)


def integrate(density, mesh: Mesh) -> float:
    """Quadrature sum of a density sampled at the quadrature points."""
    d = np.asarray(density, dtype=float)
    if d.size != mesh.n_quad:
        raise MeshMismatchError(
            f"density has {d.size} samples, mesh has {mesh.n_quad} quadrature points"
        )
    return float(np.sum(mesh.weights * d.reshape(mesh.n_elements, mesh.n_qp)))


def write_csv(path, u: DiscreteFunction | Mesh, extra: dict | None = None) -> None:
    """Write node coordinates (and nodal values when given a function) as CSV."""
    mesh = u if isinstance(u, Mesh) else u.mesh
    names = ["x", "y"][: mesh.dimension]
    cols = list(mesh.node_coordinates())
    if isinstance(u, DiscreteFunction):
        names.append("u")
        cols.append(u.values)
    for k, v in (extra or {}).items():
        names.append(k)
        cols.append(np.asarray(v))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names)
        for row in zip(*cols):
            wr.writerow([repr(float(c)) for c in row])


def random_smooth_function(mesh: Mesh, rng: np.random.Generator, n_modes: int = 6,
                           amplitude: float = 1.0) -> DiscreteFunction:
    """Random sine series vanishing on the boundary, scaled to max |u| = amplitude.

    Coefficients are standard normal divided by the mode number, so the
    result is smooth and typically changes sign.
    """
    lo = mesh.nodes.min(axis=0)
    span = mesh.nodes.max(axis=0) - lo
    t = (mesh.nodes - lo) / span  # in [0, 1]^d
    k = np.arange(1, n_modes + 1)
    if mesh.dimension == 1:
        c = rng.standard_normal(n_modes) / k
        vals = np.sin(np.pi * np.outer(t[:, 0], k)) @ c
    else:
        c = rng.standard_normal((n_modes, n_modes)) / np.outer(k, k)
        sx = np.sin(np.pi * np.outer(t[:, 0], k))
        sy = np.sin(np.pi * np.outer(t[:, 1], k))
        vals = np.einsum("nk,kl,nl->n", sx, c, sy)
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = vals * (amplitude / peak)
    return DiscreteFunction(mesh, vals)
