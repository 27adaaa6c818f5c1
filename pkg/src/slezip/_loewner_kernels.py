"""Compiled inner loops for the vertical-slit Loewner chain.

Map ``k`` (0-based) advances capacity time from ``k*dt`` to ``(k+1)*dt`` with
constant driving value ``W[k+1]``::

    f_k(z) = W + sqrt((z - W)**2 + 4 dt)          (forward, slit removal)
    f_k^{-1}(w) = W + sqrt(w - W - 2 sqrt(dt)) * sqrt(w - W + 2 sqrt(dt))

Long inverse compositions ``f_j^{-1} o ... o f_k^{-1}`` are accelerated by a
dyadic block tree. Each block stores the Laurent expansion of its composed
inverse map about the centre of the real interval where that map is singular;
a block is used only when the evaluation point is at least ``R_USE`` radii away
from that centre, otherwise its children are tried.
"""

import numpy as np
from numba import njit

N_COEF = 24
N_SAMPLE = 48
SAMPLE_RADIUS = 2.0
R_USE = 2.5
LEVEL_MIN = 3


@njit(cache=True)
def fwd_step(z, w_drive, sdt2):
    u = z - w_drive
    s = np.sqrt(u * u + sdt2 * sdt2)
    if s.imag < 0.0 or (s.imag == 0.0 and s.real * u.real < 0.0):
        s = -s
    return w_drive + s, u / s


@njit(cache=True)
def inv_step(w, w_drive, sdt2):
    if w.imag <= 0.0:
        w = complex(w.real, 0.0)
    u = w - w_drive
    s = np.sqrt(u - sdt2) * np.sqrt(u + sdt2)
    if s.imag < 0.0:
        s = complex(s.real, 0.0)
    if s == 0:
        return w_drive + s, complex(np.inf, 0.0)
    return w_drive + s, u / s


@njit(cache=True)
def fwd_real(x, w_drive, sdt2):
    u = x - w_drive
    r = np.sqrt(u * u + sdt2 * sdt2)
    if u < 0.0:
        return w_drive - r
    return w_drive + r


@njit(cache=True)
def forward_points(z, W, sdt2, k_lo, k_hi, near_tol):
    """Apply f_{k_hi} o ... o f_{k_lo} (k_lo first) to every point.

    Returns values, derivatives, a swallowed flag and a near-hull flag.
    """
    n = z.shape[0]
    out = np.empty(n, dtype=np.complex128)
    der = np.empty(n, dtype=np.complex128)
    swallowed = np.zeros(n, dtype=np.bool_)
    near = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        w = z[i]
        d = 1.0 + 0.0j
        started_real = w.imag == 0.0
        for k in range(k_lo, k_hi + 1):
            wd = W[k + 1]
            if not started_real:
                u = w - wd
                if abs(u.real) <= near_tol and u.imag <= sdt2 + near_tol:
                    near[i] = True
                if u.real == 0.0 and u.imag <= sdt2:
                    swallowed[i] = True
                    break
            w, dd = fwd_step(w, wd, sdt2)
            d *= dd
            if not started_real and w.imag <= 0.0:
                swallowed[i] = True
                break
        out[i] = w
        der[i] = d
    return out, der, swallowed, near


@njit(cache=True)
def forward_real_points(x, W, sdt2, k_lo, k_hi):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        v = x[i]
        for k in range(k_lo, k_hi + 1):
            v = fwd_real(v, W[k + 1], sdt2)
        out[i] = v
    return out


@njit(cache=True)
def foot_track(W, sdt2, k_lo, k_hi, side):
    """Image of one side of the base at ``W[k_lo]`` after maps ``k_lo..k_hi-1``.

    A slit growing at or beyond the tracked point takes over as the outermost
    piece of the curve on that side (the polyline bridges the gap).
    """
    v = W[k_lo]
    for k in range(k_lo, k_hi):
        w = W[k + 1]
        u = (v - w) * side
        if u <= 0.0:
            v = w + side * sdt2
        else:
            v = w + side * np.sqrt(u * u + sdt2 * sdt2)
    return v


@njit(cache=True)
def _series_eval(w, c, r, coefs):
    u = w - c
    q = r / u
    s = 0.0 + 0.0j
    ds = 0.0 + 0.0j
    for m in range(coefs.shape[0], 0, -1):
        b = coefs[m - 1]
        ds = ds * q + m * b
        s = s * q + b
    s = s * q
    return w + r * s, 1.0 - q * q * ds


@njit(cache=True)
def apply_inverse(w, k_hi, k_lo, W, sdt2, lvl_max, offsets, centers, radii, coefs):
    """Apply f_{k_lo}^{-1} o ... o f_{k_hi}^{-1} (k_hi first) to one point.

    Returns (value, derivative, hit, hit_height) where ``hit`` is the index of
    the first slit a real starting point was lifted onto (-1 if none) and
    ``hit_height`` its height above the slit base.
    """
    k = k_hi
    d = 1.0 + 0.0j
    hit = -1
    hit_h = 0.0
    if w.imag < 0.0:
        w = complex(w.real, 0.0)
    while k >= k_lo:
        applied = False
        lvl = lvl_max
        while lvl >= LEVEL_MIN:
            size = 1 << lvl
            if (k + 1) % size == 0 and k + 1 - size >= k_lo:
                node = offsets[lvl] + (k + 1) // size - 1
                c = centers[node]
                r = radii[node]
                if abs(w - c) >= R_USE * r:
                    w, dd = _series_eval(w, c, r, coefs[node])
                    if w.imag < 0.0:
                        w = complex(w.real, 0.0)
                    d *= dd
                    k -= size
                    applied = True
                    break
            lvl -= 1
        if not applied:
            was_real = w.imag <= 0.0
            w, dd = inv_step(w, W[k + 1], sdt2)
            d *= dd
            if was_real and hit < 0 and w.imag > 0.0:
                hit = k
                hit_h = w.imag
            k -= 1
    return w, d, hit, hit_h


@njit(cache=True)
def inverse_points(w, k_hi, k_lo, W, sdt2, lvl_max, offsets, centers, radii, coefs):
    n = w.shape[0]
    out = np.empty(n, dtype=np.complex128)
    der = np.empty(n, dtype=np.complex128)
    hits = np.empty(n, dtype=np.int64)
    heights = np.empty(n)
    for i in range(n):
        v, d, h, hh = apply_inverse(w[i], k_hi, k_lo, W, sdt2, lvl_max,
                                    offsets, centers, radii, coefs)
        out[i] = v
        der[i] = d
        hits[i] = h
        heights[i] = hh
    return out, der, hits, heights


@njit(cache=True)
def tips(W, sdt2, eps_lift, k_stop, lvl_max, offsets, centers, radii, coefs, shift,
         stop_radius):
    """Tip positions f_{k_stop}^{-1} o ... o f_{n-1}^{-1}(W[n] + i eps) for n > k_stop.

    ``shift`` is subtracted from the result (W[k_stop] for unzipped curves).
    Stops after the first tip with modulus >= ``stop_radius``; returns the
    tips and the number computed.
    """
    n_maps = W.shape[0] - 1
    out = np.full(n_maps - k_stop, np.nan + 0j, dtype=np.complex128)
    count = 0
    for n in range(k_stop + 1, n_maps + 1):
        w0 = complex(W[n], eps_lift)
        v, d, h, hh = apply_inverse(w0, n - 1, k_stop, W, sdt2, lvl_max,
                                    offsets, centers, radii, coefs)
        out[n - k_stop - 1] = v - shift
        count += 1
        if abs(v - shift) >= stop_radius:
            break
    return out, count


@njit(cache=True)
def build_tree(W, sdt2, lvl_top, offsets, centers, radii, coefs):
    """Fill block centres, radii and Laurent coefficients bottom-up."""
    n_maps = W.shape[0] - 1
    lo_arr = np.empty(n_maps)
    hi_arr = np.empty(n_maps)
    for k in range(n_maps):
        lo_arr[k] = W[k + 1] - sdt2
        hi_arr[k] = W[k + 1] + sdt2
    # singular intervals of blocks of size 2**lvl, built by doubling
    size = 1
    cur_lo = lo_arr.copy()
    cur_hi = hi_arr.copy()
    two_pi = 2.0 * np.pi
    for lvl in range(1, lvl_top + 1):
        half = size
        size = size * 2
        nb = n_maps // size
        new_lo = np.empty(nb)
        new_hi = np.empty(nb)
        for b in range(nb):
            left = 2 * b
            right = 2 * b + 1
            a = cur_lo[left]
            bb = cur_hi[left]
            # push the left interval forward through the right block
            for k in range(right * half, right * half + half):
                a = fwd_real(a, W[k + 1], sdt2)
                bb = fwd_real(bb, W[k + 1], sdt2)
            new_lo[b] = min(a, cur_lo[right])
            new_hi[b] = max(bb, cur_hi[right])
        cur_lo = new_lo
        cur_hi = new_hi
        if lvl < LEVEL_MIN:
            continue
        off = offsets[lvl]
        for b in range(nb):
            c = 0.5 * (cur_lo[b] + cur_hi[b])
            r = 0.5 * (cur_hi[b] - cur_lo[b]) * (1.0 + 1e-9) + 1e-300
            centers[off + b] = c
            radii[off + b] = r
        for b in range(nb):
            node = off + b
            c = centers[node]
            r = radii[node]
            k_lo = b * size
            k_hi = k_lo + size - 1
            acc = np.zeros(coefs.shape[1], dtype=np.complex128)
            for j in range(N_SAMPLE):
                th = two_pi * (j + 0.5) / N_SAMPLE
                e = complex(np.cos(th), np.sin(th))
                w0 = c + SAMPLE_RADIUS * r * e
                # lower half: Schwarz reflection of the map on H
                v, d, h, hh = apply_inverse(complex(w0.real, abs(w0.imag)), k_hi, k_lo,
                                            W, sdt2, lvl - 1, offsets, centers, radii, coefs)
                if w0.imag < 0.0:
                    v = v.conjugate()
                g = (v - w0) / r
                em = complex(1.0, 0.0)
                for m in range(coefs.shape[1]):
                    em = em * SAMPLE_RADIUS * e
                    acc[m] += g * em
            for m in range(coefs.shape[1]):
                coefs[node, m] = acc[m].real / N_SAMPLE


@njit(cache=True)
def exact_inverse_points(w, W, sdt2, k_hi, k_lo):
    n = w.shape[0]
    out = np.empty(n, dtype=np.complex128)
    der = np.empty(n, dtype=np.complex128)
    for i in range(n):
        v = w[i]
        d = 1.0 + 0.0j
        for k in range(k_hi, k_lo - 1, -1):
            v, dd = inv_step(v, W[k + 1], sdt2)
            d *= dd
        out[i] = v
        der[i] = d
    return out, der
