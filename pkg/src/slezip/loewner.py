"""Chordal Loewner evolution by vertical-slit composition.

The driving function is held constant on each capacity step ``[k dt, (k+1) dt]``
(value ``W[k+1]``), so every step is the exact slit map
``f(z) = W + sqrt((z - W)**2 + 4 dt)``. Hydrodynamic normalisation
``g_t(z) = z + 2t/z + O(z**-2)`` holds exactly for the composition.

Notation used throughout the package::

    g_t            forward uniformising map of H minus the hull at time t
    phi_0^t(z)     = g_t(z) - W_t            (unzip: sends the tip to 0)
    phi_t^0(w)     = g_t^{-1}(w + W_t)       (zip back)
    phi_s^t        = phi_0^t o phi_s^0       (for any s, t on the grid)
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _loewner_kernels as _k
from .errors import InvalidGridError, PointInHullError, RangeError
from .validation import as_complex_array, as_rng, check_kappa, check_positive


@dataclass(frozen=True)
class DrivingPath:
    """Driving function sampled on the uniform grid ``0, dt, ..., N dt``."""

    dt: float
    values: np.ndarray
    kappa: float = 0.0

    def __post_init__(self):
        check_positive(self.dt, "dt")
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise InvalidGridError("a driving path needs at least two grid values")
        if not np.all(np.isfinite(values)):
            raise InvalidGridError("driving values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self):
        return self.values.size - 1

    @property
    def times(self):
        return self.dt * np.arange(self.values.size)

    @property
    def T(self):
        return self.dt * self.n_steps

    def rescaled(self, lam):
        """Path ``t -> W(lam**2 t) / lam`` on the grid with step ``dt / lam**2``."""
        lam = check_positive(lam, "lam")
        return DrivingPath(self.dt / lam ** 2, self.values / lam, self.kappa)

    def truncated(self, n_steps):
        return DrivingPath(self.dt, self.values[: n_steps + 1], self.kappa)


def sample_sle_driving(kappa, dt, T, seed):
    """Brownian driving function ``sqrt(kappa) B_t`` on ``{0, dt, ..., ceil(T/dt) dt}``.

    Examples
    --------
    >>> p = sample_sle_driving(0.0, 0.01, 1.0, seed=7)
    >>> float(abs(p.values).max())
    0.0
    """
    kappa = check_kappa(kappa)
    dt = check_positive(dt, "dt")
    T = float(T)
    if not T >= dt:
        raise InvalidGridError(f"T must be >= dt, got T={T}, dt={dt}")
    n = int(math.ceil(T / dt - 1e-9))
    rng = as_rng(seed)
    incr = rng.standard_normal(n) * math.sqrt(kappa * dt)
    values = np.concatenate(([0.0], np.cumsum(incr)))
    return DrivingPath(dt, values, kappa)


@dataclass(frozen=True)
class TraceSample:
    """Curve points ``eta(t_k)`` at capacity times ``t_k``."""

    times: np.ndarray
    points: np.ndarray
    unresolved: np.ndarray = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=complex)
        if times.shape != points.shape:
            raise InvalidGridError("times and points must have the same shape")
        unresolved = self.unresolved
        if unresolved is None:
            unresolved = ~np.isfinite(points)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "unresolved", np.asarray(unresolved, dtype=bool))

    def __len__(self):
        return self.times.size

    def scaled(self, factor):
        return TraceSample(self.times * factor ** 2, self.points * factor, self.unresolved)

    def upto(self, t):
        keep = self.times <= t + 1e-12
        return TraceSample(self.times[keep], self.points[keep], self.unresolved[keep])

    def first_exit(self, radius=1.0):
        """Truncate at the first grid point with ``|eta| >= radius`` (kept)."""
        outside = np.nonzero(np.abs(self.points) >= radius)[0]
        if outside.size == 0:
            return self
        stop = outside[0] + 1
        return TraceSample(self.times[:stop], self.points[:stop], self.unresolved[:stop])


@dataclass(frozen=True, eq=False)
class MapChain:
    """Composable discrete Loewner maps for a driving path.

    Build with :meth:`from_path`. The chain is immutable; the Laurent block
    tree used to speed up long inverse compositions is built eagerly.
    """

    path: DrivingPath
    near_hull_factor: float = 10.0
    eps_lift: float = 1e-4
    _tree: tuple = field(default=None, repr=False)

    @classmethod
    def from_path(cls, path, eps_lift=1e-4):
        chain = cls(path, eps_lift=eps_lift)
        object.__setattr__(chain, "_tree", _build_tree(path))
        return chain

    @property
    def dt(self):
        return self.path.dt

    @property
    def n_maps(self):
        return self.path.n_steps

    @property
    def capacity(self):
        """Total half-plane capacity (sum of step capacities)."""
        return self.dt * self.n_maps

    @property
    def W(self):
        return self.path.values

    @property
    def _sdt2(self):
        return 2.0 * math.sqrt(self.dt)

    def index(self, t):
        """Grid index of capacity time ``t`` (must lie on the grid)."""
        t = float(t)
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)) + 1e-12:
            raise InvalidGridError(f"time {t} is not on the grid of step {self.dt}")
        if k < 0 or k > self.n_maps:
            raise RangeError(f"time {t} outside [0, {self.capacity}]")
        return k

    # -- forward direction -------------------------------------------------
    def forward(self, z, k_lo, k_hi, *, check=True):
        """Apply maps ``k_lo..k_hi-1`` (earliest first); returns value, derivative."""
        zz, scalar = as_complex_array(z)
        if k_hi <= k_lo:
            val, der = zz.copy(), np.ones_like(zz)
            near = np.zeros(zz.shape, bool)
        else:
            val, der, swallowed, near = _k.forward_points(
                zz, self.W, self._sdt2, k_lo, k_hi - 1,
                self.near_hull_factor * self.eps_lift)
            if check and swallowed.any():
                raise PointInHullError(
                    f"{int(swallowed.sum())} point(s) swallowed by the hull")
        if scalar:
            return val[0], der[0]
        return val, der

    def near_hull(self, z, k_lo, k_hi):
        zz, _ = as_complex_array(z)
        if k_hi <= k_lo:
            return np.zeros(zz.shape, bool)
        _, _, swallowed, near = _k.forward_points(
            zz, self.W, self._sdt2, k_lo, k_hi - 1,
            self.near_hull_factor * self.eps_lift)
        return near | swallowed

    def forward_real(self, x, k_lo, k_hi):
        xx = np.atleast_1d(np.asarray(x, dtype=float))
        if k_hi <= k_lo:
            return xx.copy()
        return _k.forward_real_points(xx, self.W, self._sdt2, k_lo, k_hi - 1)

    # -- inverse direction -------------------------------------------------
    def inverse(self, w, k_lo, k_hi, *, with_hits=False):
        """Apply inverse maps ``k_hi-1`` down to ``k_lo``; returns value, derivative."""
        ww, scalar = as_complex_array(w)
        if k_hi <= k_lo:
            out = (ww.copy(), np.ones_like(ww), np.full(ww.shape, -1), np.zeros(ww.shape))
        else:
            offsets, centers, radii, coefs, lvl_max = self._tree
            out = _k.inverse_points(ww, k_hi - 1, k_lo, self.W, self._sdt2,
                                    lvl_max, offsets, centers, radii, coefs)
        if scalar:
            out = tuple(o[0] for o in out)
        return out if with_hits else out[:2]

    def inverse_exact(self, w, k_lo, k_hi):
        ww, scalar = as_complex_array(w)
        val, der = _k.exact_inverse_points(ww, self.W, self._sdt2, k_hi - 1, k_lo)
        if scalar:
            return val[0], der[0]
        return val, der

    # -- zip / unzip -------------------------------------------------------
    def phi(self, s, t, z):
        """``phi_s^t(z)`` and its derivative, for any grid times ``s``, ``t``."""
        m, n = self.index(s), self.index(t)
        if m == n:
            zz, scalar = as_complex_array(z)
            return (zz[0], 1.0 + 0j) if scalar else (zz.copy(), np.ones_like(zz))
        if m < n:
            val, der = self.forward(np.asarray(z) + self.W[m], m, n)
            return val - self.W[n], der
        val, der = self.inverse(np.asarray(z) + self.W[m], n, m)
        return val - self.W[n], der

    def right_foot(self, s, t):
        """``phi_s^t(0+)``: right end of the image of ``eta[s, t]`` in the time-``t`` picture.

        Tracks the right side of the base; a later slit that grows beyond
        it takes over, since the discrete curve bridges to that slit.
        """
        m, n = self.index(s), self.index(t)
        if m >= n:
            return 0.0
        return _k.foot_track(self.W, self._sdt2, m, n, 1.0) - self.W[n]

    def left_foot(self, s, t):
        """``phi_s^t(0-)``: left end of the image of ``eta[s, t]``."""
        m, n = self.index(s), self.index(t)
        if m >= n:
            return 0.0
        return _k.foot_track(self.W, self._sdt2, m, n, -1.0) - self.W[n]

    def sub_chain(self, s):
        """Chain of the maps after time ``s``, re-centred so that W_s = 0."""
        m = self.index(s)
        path = DrivingPath(self.dt, self.W[m:] - self.W[m], self.path.kappa)
        return MapChain.from_path(path, eps_lift=self.eps_lift)


def _build_tree(path):
    n_maps = path.n_steps
    lvl_top = int(math.floor(math.log2(n_maps))) if n_maps >= 1 else 0
    offsets = np.zeros(max(lvl_top, _k.LEVEL_MIN) + 1, dtype=np.int64)
    total = 0
    for lvl in range(_k.LEVEL_MIN, lvl_top + 1):
        offsets[lvl] = total
        total += n_maps >> lvl
    centers = np.zeros(max(total, 1))
    radii = np.zeros(max(total, 1))
    coefs = np.zeros((max(total, 1), _k.N_COEF))
    W = np.ascontiguousarray(path.values, dtype=float)
    if lvl_top >= _k.LEVEL_MIN:
        _k.build_tree(W, 2.0 * math.sqrt(path.dt), lvl_top, offsets, centers, radii, coefs)
    return offsets, centers, radii, coefs, lvl_top


def solve_forward(chain, z):
    """``g_T(z)`` for the full chain. Raises :class:`PointInHullError` if swallowed."""
    val, _ = chain.forward(z, 0, chain.n_maps)
    return val


def compute_trace(path_or_chain, times=None, eps_lift=1e-4, stop_radius=None):
    """Trace ``eta(t) ~ g_t^{-1}(W_t + i eps_lift)`` at grid times.

    ``times=None`` returns every grid point. With ``stop_radius`` the trace is
    cut after its first grid point outside that radius. Points whose inverse
    composition blows up are reported in ``TraceSample.unresolved`` rather
    than raised.
    """
    eps_lift = check_positive(eps_lift, "eps_lift")
    chain = _as_chain(path_or_chain, eps_lift)
    offsets, centers, radii, coefs, lvl_max = chain._tree
    W = chain.W
    stop = math.inf if stop_radius is None else float(stop_radius)
    all_tips = np.empty(chain.n_maps + 1, dtype=complex)
    all_tips[0] = W[0]
    all_tips[1:], count = _k.tips(W, chain._sdt2, eps_lift, 0, lvl_max, offsets,
                                  centers, radii, coefs, 0.0, stop)
    grid = chain.path.times
    if times is None:
        idx = np.arange(count + 1)
    else:
        idx = np.array([chain.index(t) for t in np.atleast_1d(times)], dtype=int)
        if np.any(idx > count):
            raise RangeError("requested times lie beyond the stop radius")
    pts = all_tips[idx]
    return TraceSample(grid[idx], pts, ~np.isfinite(pts))


def refine_trace(chain, trace, max_gap, max_points=4096):
    """Fill gaps wider than ``max_gap`` with points of the discrete curve itself.

    Between grid times ``t_k`` and ``t_{k+1}`` the discrete curve is the image
    under the first ``k`` inverse maps of the polyline ``W_k -> W_{k+1} ->
    W_{k+1} + 2i sqrt(dt)``; inserted points sample that polyline, with
    capacity times ``t_k + y**2 / 4`` on the slit. Sampling is doubled until
    the gap closes or ``max_points`` is reached.
    """
    max_gap = check_positive(max_gap, "max_gap")
    times = np.asarray(trace.times)
    pts = np.asarray(trace.points)
    if pts.size < 2:
        return trace
    gaps = np.abs(np.diff(pts))
    bad = np.nonzero(gaps > max_gap)[0]
    if bad.size == 0:
        return trace
    new_t, new_p = [times[: bad[0] + 1]], [pts[: bad[0] + 1]]
    sdt = math.sqrt(chain.dt)
    lift = chain.eps_lift
    for j, i in enumerate(bad):
        k = chain.index(times[i])
        if chain.index(times[i + 1]) != k + 1:
            raise InvalidGridError("refine_trace needs a trace on consecutive grid times")
        npts = int(min(max_points, math.ceil(gaps[i] / max_gap) * 4))
        while True:
            s = np.arange(1, npts) / npts
            horiz = chain.W[k] + s * (chain.W[k + 1] - chain.W[k]) + 1j * lift
            y = 2.0 * sdt * s
            vert = chain.W[k + 1] + 1j * np.maximum(y, lift)
            z, _ = chain.inverse(np.concatenate([horiz, vert]), 0, k)
            seg = np.concatenate([[pts[i]], z, [pts[i + 1]]])
            if npts >= max_points or np.max(np.abs(np.diff(seg))) <= max_gap:
                break
            npts = min(2 * npts, max_points)
        new_t.append(np.concatenate([np.full(horiz.size, times[i]), times[i] + y ** 2 / 4.0]))
        new_p.append(z)
        nxt = bad[j + 1] + 1 if j + 1 < bad.size else pts.size
        new_t.append(times[i + 1: nxt])
        new_p.append(pts[i + 1: nxt])
    t_all = np.concatenate(new_t)
    p_all = np.concatenate(new_p)
    return TraceSample(t_all, p_all, ~np.isfinite(p_all))


def unzipped_trace(chain, s, eps_lift=1e-4, stop_radius=None):
    """The unzipped curve ``eta^s(u) = phi_0^s(eta(s + u))`` on the grid."""
    m = chain.index(s)
    offsets, centers, radii, coefs, lvl_max = chain._tree
    stop = math.inf if stop_radius is None else float(stop_radius)
    pts = np.empty(chain.n_maps - m + 1, dtype=complex)
    pts[0] = 0.0
    pts[1:], count = _k.tips(chain.W, chain._sdt2, eps_lift, m, lvl_max, offsets,
                             centers, radii, coefs, chain.W[m], stop)
    pts = pts[: count + 1]
    times = chain.dt * np.arange(pts.size)
    return TraceSample(times, pts, ~np.isfinite(pts))


def unzip_map(chain, s, t, z):
    """``phi_s^t(z)`` and ``(phi_s^t)'(z)`` for ``0 <= s <= t``."""
    if float(s) > float(t):
        raise InvalidGridError("unzip_map needs s <= t; use zip_map for the inverse")
    return chain.phi(s, t, z)


def zip_map(chain, t, s, w):
    """``phi_t^s(w)`` (zipping back from time ``t`` to ``s <= t``) and derivative."""
    if float(s) > float(t):
        raise InvalidGridError("zip_map needs s <= t")
    return chain.phi(t, s, w)


def hull_capacity_check(chain, R=None):
    """Estimate the half-plane capacity ``a_T`` from ``g_T(iR)``.

    Uses ``Re[(g(iR) - iR) iR / 2]`` at radii ``R`` and ``2R`` with one
    Richardson step (the real error term is ``O(R**-2)``).
    """
    if chain.n_maps == 0:
        return 0.0
    if R is None:
        R = 1e3 * hull_diameter_bound(chain)
    R = float(R)
    z = np.array([1j * R, 2j * R])
    g, _ = chain.forward(z, 0, chain.n_maps)
    a = ((g - z) * z / 2.0).real
    return float((4.0 * a[1] - a[0]) / 3.0)


def hull_diameter_bound(chain):
    """Crude bound ``4 max(sqrt(T), osc W) + |W_0|`` on the hull radius."""
    W = chain.W
    osc = float(np.max(np.abs(W - W[0])))
    return 4.0 * max(math.sqrt(chain.capacity), osc) + abs(W[0]) + 1e-12


def _as_chain(path_or_chain, eps_lift=1e-4):
    if isinstance(path_or_chain, MapChain):
        return path_or_chain
    return MapChain.from_path(path_or_chain, eps_lift=eps_lift)
