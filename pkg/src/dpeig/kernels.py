"""Element loops for the double-phase energies and their first variations.

Every kernel exists twice: a vectorized numpy version and a numba loop
version.  ``DPEIG_NUMBA=0`` selects the numpy path; both are kept in
``BACKENDS`` so tests and the benchmark can compare them directly.

Array conventions (``E`` elements, ``k`` vertices per element, ``Q``
quadrature points per element, ``d`` space dimension):

    u        (n_nodes,)   nodal values
    elements (E, k)       vertex indices
    dphi     (E, k, d)    constant basis gradients per element
    phi      (Q, k)       basis values at the reference quadrature points
    w        (E, Q)       physical quadrature weights
    p1,p2,q  (E, Q)       exponents sampled at quadrature points

``energies_and_gradients`` returns the variations of J and I, or of J1 and
I1 when ``weighted`` is set (each flux term multiplied by its exponent).
"""
import math

import numpy as np

from ._backend import USE_NUMBA, njit


# -- numpy -----------------------------------------------------------------

def _element_gradients_np(u, elements, dphi):
    return np.einsum("ek,ekd->ed", u[elements], dphi)


def _energies_np(u, elements, dphi, phi, w, p1, p2, q):
    ue = u[elements]
    g = np.einsum("ek,ekd->ed", ue, dphi)
    gn = np.sqrt(np.einsum("ed,ed->e", g, g))[:, None]
    a1 = gn ** p1
    a2 = gn ** p2
    b = np.abs(ue @ phi.T) ** q
    J = float(np.sum(w * (a1 / p1 + a2 / p2)))
    J1 = float(np.sum(w * (a1 + a2)))
    I = float(np.sum(w * b / q))
    I1 = float(np.sum(w * b))
    return J, J1, I, I1


def _energies_and_gradients_np(u, elements, dphi, phi, w, p1, p2, q, eps, weighted=False):
    n = u.shape[0]
    ue = u[elements]
    g = np.einsum("ek,ekd->ed", ue, dphi)
    gn2 = np.einsum("ed,ed->e", g, g)[:, None]
    gn = np.sqrt(gn2)
    a1 = gn ** p1
    a2 = gn ** p2
    uq = ue @ phi.T
    b = np.abs(uq) ** q
    J = float(np.sum(w * (a1 / p1 + a2 / p2)))
    J1 = float(np.sum(w * (a1 + a2)))
    I = float(np.sum(w * b / q))
    I1 = float(np.sum(w * b))

    e2 = eps * eps
    reg = gn2 + e2
    r1 = reg ** (0.5 * (p1 - 2.0))
    r2 = reg ** (0.5 * (p2 - 2.0))
    if weighted:
        r1 = p1 * r1
        r2 = p2 * r2
    coef = np.sum(w * (r1 + r2), axis=1)
    local_j = np.einsum("ed,ekd->ek", coef[:, None] * g, dphi)
    gJ = np.bincount(elements.ravel(), weights=local_j.ravel(), minlength=n)

    s = w * (uq * uq + e2) ** (0.5 * (q - 2.0)) * uq
    if weighted:
        s = q * s
    local_i = s @ phi
    gI = np.bincount(elements.ravel(), weights=local_i.ravel(), minlength=n)
    return J, J1, I, I1, gJ, gI


def _modular_np(f, p, w):
    return float(np.sum(w * np.abs(f) ** p))


# -- numba -----------------------------------------------------------------

@njit
def _element_gradients_nb(u, elements, dphi):
    E, k, d = dphi.shape
    out = np.zeros((E, d))
    for e in range(E):
        for a in range(k):
            ua = u[elements[e, a]]
            for c in range(d):
                out[e, c] += ua * dphi[e, a, c]
    return out


@njit
def _energies_nb(u, elements, dphi, phi, w, p1, p2, q):
    E, k, d = dphi.shape
    Q = phi.shape[0]
    J = 0.0
    J1 = 0.0
    I = 0.0
    I1 = 0.0
    g = np.empty(d)
    for e in range(E):
        for c in range(d):
            g[c] = 0.0
        for a in range(k):
            ua = u[elements[e, a]]
            for c in range(d):
                g[c] += ua * dphi[e, a, c]
        gn2 = 0.0
        for c in range(d):
            gn2 += g[c] * g[c]
        gn = math.sqrt(gn2)
        for j in range(Q):
            a1 = gn ** p1[e, j]
            a2 = gn ** p2[e, j]
            uq = 0.0
            for a in range(k):
                uq += phi[j, a] * u[elements[e, a]]
            b = abs(uq) ** q[e, j]
            wj = w[e, j]
            J += wj * (a1 / p1[e, j] + a2 / p2[e, j])
            J1 += wj * (a1 + a2)
            I += wj * b / q[e, j]
            I1 += wj * b
    return J, J1, I, I1


@njit
def _energies_and_gradients_nb(u, elements, dphi, phi, w, p1, p2, q, eps, weighted=False):
    n = u.shape[0]
    E, k, d = dphi.shape
    Q = phi.shape[0]
    e2 = eps * eps
    gJ = np.zeros(n)
    gI = np.zeros(n)
    J = 0.0
    J1 = 0.0
    I = 0.0
    I1 = 0.0
    g = np.empty(d)
    for e in range(E):
        for c in range(d):
            g[c] = 0.0
        for a in range(k):
            ua = u[elements[e, a]]
            for c in range(d):
                g[c] += ua * dphi[e, a, c]
        gn2 = 0.0
        for c in range(d):
            gn2 += g[c] * g[c]
        gn = math.sqrt(gn2)
        reg = gn2 + e2
        coef = 0.0
        for j in range(Q):
            wj = w[e, j]
            a1 = gn ** p1[e, j]
            a2 = gn ** p2[e, j]
            J += wj * (a1 / p1[e, j] + a2 / p2[e, j])
            J1 += wj * (a1 + a2)
            r1 = reg ** (0.5 * (p1[e, j] - 2.0))
            r2 = reg ** (0.5 * (p2[e, j] - 2.0))
            if weighted:
                r1 *= p1[e, j]
                r2 *= p2[e, j]
            coef += wj * (r1 + r2)

            uq = 0.0
            for a in range(k):
                uq += phi[j, a] * u[elements[e, a]]
            b = abs(uq) ** q[e, j]
            I += wj * b / q[e, j]
            I1 += wj * b
            s = wj * (uq * uq + e2) ** (0.5 * (q[e, j] - 2.0)) * uq
            if weighted:
                s *= q[e, j]
            for a in range(k):
                gI[elements[e, a]] += s * phi[j, a]
        for a in range(k):
            dot = 0.0
            for c in range(d):
                dot += g[c] * dphi[e, a, c]
            gJ[elements[e, a]] += coef * dot
    return J, J1, I, I1, gJ, gI


@njit
def _modular_nb(f, p, w):
    total = 0.0
    for i in range(f.shape[0]):
        total += w[i] * abs(f[i]) ** p[i]
    return total


BACKENDS = {
    "numpy": {
        "element_gradients": _element_gradients_np,
        "energies": _energies_np,
        "energies_and_gradients": _energies_and_gradients_np,
        "modular": _modular_np,
    },
    "numba": {
        "element_gradients": _element_gradients_nb,
        "energies": _energies_nb,
        "energies_and_gradients": _energies_and_gradients_nb,
        "modular": _modular_nb,
    },
}

ACTIVE = "numba" if USE_NUMBA else "numpy"

element_gradients = BACKENDS[ACTIVE]["element_gradients"]
energies = BACKENDS[ACTIVE]["energies"]
energies_and_gradients = BACKENDS[ACTIVE]["energies_and_gradients"]
modular = BACKENDS[ACTIVE]["modular"]
