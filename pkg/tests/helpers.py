"""Shared oracles and configuration samplers for the test suite."""
import math

import numpy as np

from dpeig import build_interval_mesh, build_rectangle_mesh, exponent_from_spec, validate_triple


def p1_dirichlet_eigenvalue(length: float, n: int) -> float:
    """Smallest generalized eigenvalue of the P1 stiffness/consistent-mass pair on a
    uniform 1D mesh with ``n`` elements (exact for the 2-point Gauss rule)."""
    h = length / n
    kh = math.pi / n
    return 6.0 * (1.0 - math.cos(kh)) / (h * h * (2.0 + math.cos(kh)))


def sample_configuration(index: int, gap: float = 0.6):
    """Deterministic random exponent triple with the chain separated by ``gap``.

    Even indices live on (0,1) with 60 elements, odd ones on the unit square 10x10.
    Returns ``(mesh, p1, p2, q, expressions)``.
    """
    rng = np.random.default_rng(1000 + index)
    two_d = index % 2 == 1
    mesh = (build_rectangle_mesh((0, 1), (0, 1), 10, 10) if two_d
            else build_interval_mesh(0, 1, 60))
    var = "(x + y)" if two_d else "x"
    while True:
        a2, b2 = rng.uniform(1.2, 1.6), rng.uniform(0.0, 0.1)
        bq = rng.uniform(0.0, 0.15)
        aq = a2 + b2 + gap + bq + rng.uniform(0.0, 0.3)
        b1 = rng.uniform(0.0, 0.3)
        a1 = aq + bq + gap + b1 + rng.uniform(0.0, 0.5)
        k2, kq, k1 = rng.integers(1, 5, size=3)
        exprs = (f"{a1:.4f} + {b1:.4f}*sin({k1}*{var})",
                 f"{a2:.4f} + {b2:.4f}*cos({k2}*{var})",
                 f"{aq:.4f} + {bq:.4f}*sin({kq}*{var} + 1)")
        p1, p2, q = (exponent_from_spec(e, mesh) for e in exprs)
        if validate_triple(p1, p2, q, mesh.dimension).ok:
            return mesh, p1, p2, q, exprs
