"""Variable exponents sampled at quadrature points, and checks on the triple.

Exponents live at the quadrature samples of a mesh (see :mod:`dpeig.mesh`
for the ordering).  Extrema are taken over that sample, so ``minus`` and
``plus`` are inner approximations of the true inf and sup.

The triple ``(p1, p2, q)`` must satisfy the chain condition

    1 < p2(x) < min q <= max q < p1(x)          for every sample x

and the subcritical condition

    max q < N p2(x) / (N - p2(x))                whenever p2(x) < N.

When ``p2(x) >= N`` the subcritical bound is treated as satisfied and the
report carries a warning.  Ambient dimension below 3, or ``p1`` reaching
``N``, only produce warnings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentDomainError, MeshMismatchError, ValidationError
from .expr import Expression
from .mesh import Mesh


@dataclass(frozen=True, eq=False)
class ExponentField:
    mesh: Mesh
    values: np.ndarray = field(repr=False)
    source: str = "array"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.mesh.n_quad:
            raise MeshMismatchError(
                f"exponent has {v.shape[0]} samples, mesh has {self.mesh.n_quad} quadrature points"
            )
        if not np.all(np.isfinite(v)):
            raise ExponentDomainError(f"exponent {self.source!r} has non-finite values")
        if np.any(v <= 1.0):
            i = int(np.argmin(v))
            raise ExponentDomainError(
                f"exponent {self.source!r} must exceed 1 everywhere; "
                f"min {v[i]:.6g} at quadrature sample {i}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_extrema", (float(v.min()), float(v.max())))

    @classmethod
    def constant(cls, value: float, mesh: Mesh) -> "ExponentField":
        return cls(mesh, np.full(mesh.n_quad, float(value)), source=repr(float(value)))

    @property
    def minus(self) -> float:
        return self._extrema[0]

    @property
    def plus(self) -> float:
        return self._extrema[1]

    @property
    def grid(self) -> np.ndarray:
        """Values reshaped to ``(n_elements, n_qp)``."""
        return self.values.reshape(self.mesh.n_elements, self.mesh.n_qp)

    @property
    def is_constant(self) -> bool:
        return self.minus == self.plus

    def conjugate(self) -> "ExponentField":
        """Pointwise conjugate exponent p/(p-1)."""
        p = self.values
        return ExponentField(self.mesh, p / (p - 1.0), source=f"conj({self.source})")


def extrema(field: ExponentField) -> tuple[float, float]:
    """``(h_minus, h_plus)`` over the quadrature sample."""
    return field.minus, field.plus


def parse_exponent_expression(expr: str, mesh: Mesh) -> ExponentField:
    """Evaluate an expression (see :mod:`dpeig.expr`) at every quadrature point."""
    fn = Expression(expr)
    vals = fn(*mesh.quadrature_coordinates())
    return ExponentField(mesh, vals, source=expr)


def load_exponent_array(path, mesh: Mesh) -> ExponentField:
    """Read one value per quadrature point from a plain-text file."""
    vals = np.loadtxt(path, dtype=float, ndmin=1)
    return ExponentField(mesh, vals, source=f"file:{path}")


def exponent_from_spec(spec, mesh: Mesh) -> ExponentField:
    """Build a field from a number, an expression string or ``@path`` for an array file."""
    if isinstance(spec, ExponentField):
        return spec
    if isinstance(spec, (int, float)):
        return ExponentField.constant(spec, mesh)
    spec = str(spec)
    if spec.startswith("@"):
        return load_exponent_array(spec[1:], mesh)
    return parse_exponent_expression(spec, mesh)


@dataclass
class ValidationReport:
    chain_ok: bool
    subcritical_ok: bool
    dimension_warnings: list = field(default_factory=list)
    witness_points: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.chain_ok and self.subcritical_ok

    def raise_if_invalid(self):
        if not self.ok:
            raise ValidationError("; ".join(self.messages) or "invalid exponent triple")

    def to_dict(self, max_witnesses: int = 20) -> dict:
        return {
            "chain_ok": self.chain_ok,
            "subcritical_ok": self.subcritical_ok,
            "dimension_warnings": list(self.dimension_warnings),
            "messages": list(self.messages),
            "n_witnesses": len(self.witness_points),
            "witness_points": [list(w) for w in self.witness_points[:max_witnesses]],
        }


def validate_triple(p1: ExponentField, p2: ExponentField, q: ExponentField,
                    ambient_dimension: int) -> ValidationReport:
    """Pointwise check of the chain and subcritical conditions."""
    mesh = p1.mesh
    if not (mesh.same_as(p2.mesh) and mesh.same_as(q.mesh)):
        raise MeshMismatchError("p1, p2 and q are sampled on different meshes")
    N = int(ambient_dimension)
    a1, a2 = p1.values, p2.values
    qm, qp = q.minus, q.plus

    chain_bad = ~((a2 > 1.0) & (a2 < qm) & (qp < a1))
    with np.errstate(divide="ignore"):
        crit = np.where(a2 < N, N * a2 / (N - a2), np.inf)
    sub_bad = ~(qp < crit)

    messages = []
    if chain_bad.any():
        messages.append(
            "chain condition 1 < p2(x) < q- <= q+ < p1(x) fails at "
            f"{int(chain_bad.sum())} of {a1.size} quadrature points "
            f"(p2+={p2.plus:.6g}, q-={qm:.6g}, q+={qp:.6g}, p1-={p1.minus:.6g})"
        )
    if sub_bad.any():
        messages.append(
            "subcritical condition q+ < N p2(x)/(N - p2(x)) fails at "
            f"{int(sub_bad.sum())} of {a1.size} quadrature points"
        )

    warnings = []
    if N < 3:
        warnings.append(f"ambient dimension N={N} < 3; running in relaxed low-dimension mode")
    if p1.plus >= N:
        warnings.append(f"p1+ = {p1.plus:.6g} >= N = {N}")
    if np.any(a2 >= N):
        warnings.append(
            f"p2(x) >= N at {int(np.sum(a2 >= N))} points; subcritical condition treated as satisfied there"
        )

    pts = np.stack(mesh.quadrature_coordinates(), axis=1)
    bad = chain_bad | sub_bad
    witnesses = [tuple(float(c) for c in pt) for pt in pts[bad]]
    return ValidationReport(
        chain_ok=not chain_bad.any(),
        subcritical_ok=not sub_bad.any(),
        dimension_warnings=warnings,
        witness_points=witnesses,
        messages=messages,
    )
