"""Exact and numerical averages of logarithmic kernels over probe rings.

A probe is a mixture of rings. A ring is the uniform probability measure on a
full circle (bulk) or on the upper half of a circle centred on the real line
(boundary). The log-singular part of every covariance is averaged exactly here;
what remains is smooth and handled by node quadrature.

Kernel families used for the singular part ``S(u, v)``:

``"N"``  ``-log|u - v|``
``"G"``  ``-log|u - v| - log|u - conj(v)|``
``"D"``  ``-log|u - v| + log|u - conj(v)|``
"""

import math

import numpy as np
from numba import njit
from scipy import integrate, special

_ODD_TERMS = 200


def chi2(q):
    """Legendre chi function ``sum_{k odd} q**k / k**2`` for ``|q| <= 1``."""
    q = np.asarray(q, dtype=complex)
    return 0.5 * (special.spence(1.0 - q) - special.spence(1.0 + q))


def odd_cubic_sum(rho):
    """``sum_{k odd} rho**k / k**3`` for ``0 <= rho <= 1``."""
    rho = np.asarray(rho, dtype=float)
    k = np.arange(1, 2 * _ODD_TERMS, 2, dtype=float)
    return np.sum(rho[..., None] ** k / k ** 3, axis=-1)


def semicircle_potential(x, r, v):
    """Average of ``-log|u - v|`` over the upper semicircle of radius ``r`` at real ``x``."""
    u = np.asarray(v, dtype=complex) - x
    out = np.empty(u.shape)
    big = np.abs(u) >= r
    if np.any(big):
        ub = u[big]
        out[big] = -np.log(np.abs(ub)) + (2j / np.pi * chi2(r / ub)).real
    small = ~big
    if np.any(small):
        us = u[small]
        out[small] = -math.log(r) - (2j / np.pi * chi2(us / r)).real
    return out


def circle_potential(c, r, v):
    """Average of ``-log|u - v|`` over the full circle of radius ``r`` at ``c``."""
    return -np.log(np.maximum(np.abs(np.asarray(v) - c), r))


def ring_potential(c, r, half, v):
    return semicircle_potential(c.real, r, v) if half else circle_potential(c, r, v)


def circle_pair_neglog(cA, rA, cB, rB):
    """Double average of ``-log|u - v|`` over two full circles (vectorised).

    Intersecting circles fall back to adaptive quadrature.
    """
    cA, rA, cB, rB = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, t)) for x, t in
                                           ((cA, complex), (rA, float), (cB, complex), (rB, float))))
    d = np.abs(cA - cB)
    out = np.empty(d.shape)
    disjoint = d >= rA + rB
    nested = d <= np.abs(rA - rB)
    out[disjoint] = -np.log(d[disjoint])
    out[nested & ~disjoint] = -np.log(np.maximum(rA, rB)[nested & ~disjoint])
    for idx in zip(*np.nonzero(~(disjoint | nested))):
        out[idx] = _numeric_pair((complex(cA[idx]), float(rA[idx]), False),
                                 (complex(cB[idx]), float(rB[idx]), False), "N")
    return out


def _crossing_angles(cA, rA, cB, rB):
    # angles on ring B where |v - cA| = rA
    d = abs(cA - cB)
    if d == 0 or d >= rA + rB or d <= abs(rA - rB):
        return []
    base = math.atan2((cA - cB).imag, (cA - cB).real)
    cosang = (rB ** 2 + d ** 2 - rA ** 2) / (2 * rB * d)
    delta = math.acos(max(-1.0, min(1.0, cosang)))
    return [base - delta, base + delta]


def _numeric_pair(A, B, family):
    """Adaptive quadrature over ring B of the exact ring-A potential."""
    cA, rA, hA = A
    cB, rB, hB = B
    hi = math.pi if hB else 2.0 * math.pi

    def f(th):
        v = cB + rB * complex(math.cos(th), math.sin(th))
        val = float(ring_potential(cA, rA, hA, np.array([v]))[0])
        if family != "N":
            refl = float(ring_potential(cA, rA, hA, np.array([v.conjugate()]))[0])
            val = val + refl if family == "G" else val - refl
        return val

    pts = set()
    for ang in _crossing_angles(cA, rA, cB, rB):
        pts.add(ang % (2 * math.pi))
    if hA:
        for ang in _crossing_angles(complex(cA.real, 0.0), rA, cB, rB):
            pts.add(ang % (2 * math.pi))
        # endpoints of arc A seen from ring B
        for e in (cA.real - rA, cA.real + rA):
            if abs(abs(e - cB) - rB) < 1e-12 * max(1.0, rB):
                pts.add(math.atan2((e - cB).imag, (e - cB).real) % (2 * math.pi))
    pts = sorted(p for p in pts if 0.0 < p < hi)
    val, _ = integrate.quad(f, 0.0, hi, points=pts or None, limit=400,
                            epsabs=1e-11, epsrel=1e-10)
    return val / hi


def ring_pair_average(A, B, family):
    """Exact double average of the ``family`` kernel over rings ``A`` and ``B``.

    Rings are tuples ``(centre, radius, half)``. Closed forms cover disjoint and
    concentric configurations; other cases use one-dimensional quadrature of
    the exact inner potential.
    """
    cA, rA, hA = A
    cB, rB, hB = B
    if family == "G":
        if hA or hB:
            # average over a half ring of the reflected pair is a full-circle mean
            xa = complex(cA.real, 0.0) if hA else cA
            xb = complex(cB.real, 0.0) if hB else cB
            if hA and not hB:
                xa, xb, ra, rb = xb, xa, rB, rA
            else:
                ra, rb = rA, rB
            return 2.0 * float(circle_pair_neglog(xa, ra, xb, rb)[0])
        return float(circle_pair_neglog(cA, rA, cB, rB)[0]) - math.log(abs(cA - cB.conjugate()))
    if not hA and not hB:
        base = float(circle_pair_neglog(cA, rA, cB, rB)[0])
        if family == "N":
            return base
        return base + math.log(abs(cA - cB.conjugate()))
    if hA and hB and cA == cB:
        rho = min(rA, rB) / max(rA, rB)
        s = float(odd_cubic_sum(rho))
        if family == "N":
            return -math.log(max(rA, rB)) + 4.0 / math.pi ** 2 * s
        return 8.0 / math.pi ** 2 * s
    if hA != hB:
        # circle against half ring: mean value of the half-ring potential
        (cc, rc), (ch, rh) = ((cA, rA), (cB, rB)) if hB else ((cB, rB), (cA, rA))
        if abs(cc - ch.real) >= rc + rh:
            val = float(semicircle_potential(ch.real, rh, np.array([cc]))[0])
            if family == "N":
                return val
            refl = float(semicircle_potential(ch.real, rh, np.array([cc.conjugate()]))[0])
            return val - refl
    return _numeric_pair(A, B, family)


def pair_matrix(rings_a, rings_b, family, symmetric=False):
    """Ring-pair averages for two ring lists (vectorised fast paths).

    ``rings_*`` are tuples of arrays ``(centres, radii, half)``.
    """
    ca, ra, ha = rings_a
    cb, rb, hb = rings_b
    na, nb = ca.size, cb.size
    out = np.full((na, nb), np.nan)
    CA, CB = np.meshgrid(ca, cb, indexing="ij")
    RA, RB = np.meshgrid(ra, rb, indexing="ij")
    HA, HB = np.meshgrid(ha, hb, indexing="ij")
    d = np.abs(CA - CB)
    full = ~HA & ~HB
    # full circles, disjoint or nested: closed form
    ok = full & ((d >= RA + RB) | (d <= np.abs(RA - RB)))
    if np.any(ok):
        base = circle_pair_neglog(CA[ok], RA[ok], CB[ok], RB[ok])
        if family == "G":
            base = base - np.log(np.abs(CA[ok] - np.conj(CB[ok])))
        elif family == "D":
            base = base + np.log(np.abs(CA[ok] - np.conj(CB[ok])))
        out[ok] = base
    if family == "G":
        both = HA & HB
        xa, xb = CA.real, CB.real
        dd = np.abs(xa - xb)
        ok2 = both & ((dd >= RA + RB) | (dd <= np.abs(RA - RB)))
        out[ok2] = -2.0 * np.log(np.where(dd[ok2] >= (RA + RB)[ok2], dd[ok2],
                                          np.maximum(RA, RB)[ok2]))
        mixed = HA ^ HB
        if np.any(mixed):
            cc = np.where(HB, CA, CB)
            rc = np.where(HB, RA, RB)
            xh = np.where(HB, CB.real, CA.real)
            rh = np.where(HB, RB, RA)
            dm = np.abs(cc - xh)
            ok3 = mixed & ((dm >= rc + rh) | (dm <= np.abs(rc - rh)))
            out[ok3] = -2.0 * np.log(np.where(dm[ok3] >= (rc + rh)[ok3], dm[ok3],
                                              np.maximum(rc, rh)[ok3]))
    todo = np.argwhere(np.isnan(out))
    for i, j in todo:
        if symmetric and j < i and not np.isnan(out[j, i]):
            out[i, j] = out[j, i]
            continue
        out[i, j] = ring_pair_average((complex(ca[i]), float(ra[i]), bool(ha[i])),
                                      (complex(cb[j]), float(rb[j]), bool(hb[j])), family)
    return out


@njit(cache=True)
def mapped_pair_sums(u, a, da, wts, start, stop, boundary, ksign):
    """Node sums of ``K(phi u, phi v) - S(u, v)`` for every probe pair.

    ``u``: nodes, ``a``/``da``: mapped nodes and derivatives, ``wts``: node
    weights, ``start``/``stop``: node range of each probe, ``boundary``: probe
    regime flags. ``ksign`` is +1 for the Dirichlet kernel and -1 for the free
    kernel; the singular part ``S`` is the free kernel for boundary-boundary
    pairs and ``-log|u - v|`` otherwise.
    """
    n = start.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            s_refl = 1.0 if (boundary[i] and boundary[j]) else 0.0
            acc = 0.0
            for p in range(start[i], stop[i]):
                up = u[p]
                ap = a[p]
                for q in range(start[j], stop[j]):
                    wq = wts[p] * wts[q]
                    if p == q:
                        val = -np.log(abs(da[p]))
                        val += ksign * np.log(2.0 * ap.imag)
                        val += s_refl * np.log(2.0 * up.imag)
                    else:
                        du = up - u[q]
                        dphi = ap - a[q]
                        val = -np.log(abs(dphi) / abs(du))
                        val += ksign * np.log(abs(ap - a[q].conjugate()))
                        val += s_refl * np.log(abs(up - u[q].conjugate()))
                    acc += wq * val
            out[i, j] = acc
            out[j, i] = acc
    return out



@njit(cache=True)
def cross_pair_sums(a, wa, sa, ea, b, wb, sb, eb, ksign):
    """Node sums of ``-log|a - b| + ksign log|a - conj(b)|`` between two probe families.

    Used only for probes living in different coordinate pictures, whose node
    sets do not coincide.
    """
    na = sa.shape[0]
    nb = sb.shape[0]
    out = np.zeros((na, nb))
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for p in range(sa[i], ea[i]):
                ap = a[p]
                for q in range(sb[j], eb[j]):
                    dist = max(abs(ap - b[q]), 1e-300)
                    acc += wa[p] * wb[q] * (-np.log(dist) + ksign * np.log(abs(ap - b[q].conjugate())))
            out[i, j] = acc
    return out
