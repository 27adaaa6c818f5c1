"""Minkowski content, d-dimensional pushforwards and the measure mu^0.

The curve measure ``mu^0`` is built from boundary chaos in unzipped
coordinates: Lebesgue atoms on ``[0, phi_0^t(0+)]`` are weighted by the
``gamma/2`` chaos of the pulled-back Dirichlet field, multiplied by
``F = exp(-gamma**2/8 * Khat)`` at their pre-image and carried back to the
curve by ``phi_t^0``.
"""

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from numba import njit

from .chaos import AtomicMeasure
from .errors import (DomainError, InvalidGridError, ModelError, PointInHullError,
                     RangeError, ResolutionError, UnsupportedParameterError)
from .fields import (ChainPullback, CovarianceModel, ProbeSet, gaussian_factor,
                     probe_covariance, probe_means)
from .validation import as_rng, check_positive, check_schedule, q_charge

DEFAULT_SCHEDULE = (2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7)
STABLE_TOL = 0.10


# ---------------------------------------------------------------------------
# windows and Minkowski content

@dataclass(frozen=True)
class Window:
    """Upper half-disk of ``radius`` (``None`` for all of H) minus a ball at 0."""

    radius: float = 1.0
    exclude: float = 0.0

    def contains(self, z):
        z = np.asarray(z, complex)
        ok = (z.imag >= 0) & (np.abs(z) >= self.exclude)
        if self.radius is not None:
            ok &= np.abs(z) <= self.radius
        return ok

    def to_dict(self):
        return {"radius": self.radius, "exclude": self.exclude}


@dataclass(frozen=True, eq=False)
class ContentEstimate:
    """Per-segment Minkowski content of a trace.

    Attributes
    ----------
    edges : ndarray
        Capacity-time partition of the curve.
    contents : ndarray
        Finest-scale ``eps**(d-2) * area`` per segment.
    eps_schedule : ndarray
    per_scale : ndarray
        Contents per scale and segment, shape ``(scales, segments)``.
    areas : ndarray
        Total neighbourhood area per scale.
    ratios : ndarray
        Successive ratios of total content between consecutive scales.
    stabilized : bool
        Last two scales agree within 10%.
    """

    edges: np.ndarray
    contents: np.ndarray
    eps_schedule: np.ndarray
    per_scale: np.ndarray
    areas: np.ndarray
    ratios: np.ndarray
    stabilized: bool
    d: float
    window: Window = None

    @property
    def total(self):
        return float(self.contents.sum())

    def dimension_slope(self):
        """Least-squares slope of ``log area`` against ``log eps`` (``2 - d`` in theory)."""
        ok = self.areas > 0
        if np.count_nonzero(ok) < 2:
            return float("nan")
        return float(np.polyfit(np.log(self.eps_schedule[ok]), np.log(self.areas[ok]), 1)[0])

    def as_measure(self):
        """Atoms at segment capacity midpoints (tags) carrying the contents."""
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        return AtomicMeasure(mids.astype(complex), self.contents, d=self.d, support="curve",
                             tags=mids)


@njit(cache=True)
def _raster(px, py, lab, x0, h, nx, ny, eps, nlab, cx, cy, rmax, rmin, use_rmax):
    """Pixel counts per label of the eps-neighbourhood of the points (nearest label wins)."""
    best = np.full((ny, nx), np.inf)
    owner = np.full((ny, nx), -1, dtype=np.int64)
    e2 = eps * eps
    reach = int(eps / h) + 1
    for k in range(px.shape[0]):
        ix0 = int((px[k] - x0) / h)
        iy0 = int(py[k] / h)
        for iy in range(max(0, iy0 - reach), min(ny, iy0 + reach + 1)):
            yc = (iy + 0.5) * h
            dy = yc - py[k]
            for ix in range(max(0, ix0 - reach), min(nx, ix0 + reach + 1)):
                xc = x0 + (ix + 0.5) * h
                dx = xc - px[k]
                d2 = dx * dx + dy * dy
                if d2 <= e2 and d2 < best[iy, ix]:
                    best[iy, ix] = d2
                    owner[iy, ix] = lab[k]
    counts = np.zeros(nlab)
    for iy in range(ny):
        yc = (iy + 0.5) * h
        for ix in range(nx):
            o = owner[iy, ix]
            if o < 0:
                continue
            xc = x0 + (ix + 0.5) * h
            r = math.sqrt((xc - cx) ** 2 + (yc - cy) ** 2)
            if r < rmin or (use_rmax and r > rmax):
                continue
            counts[o] += 1.0
    return counts


def _densify(points, labels, step):
    """Insert points along each polyline edge so that spacing is at most ``step``."""
    if points.size < 2:
        return points, labels
    seg = np.abs(np.diff(points))
    reps = np.maximum(1, np.ceil(seg / step).astype(int))
    starts = np.repeat(points[:-1], reps)
    diffs = np.repeat(np.diff(points), reps)
    frac = np.concatenate([np.arange(r) / r for r in reps])
    dense = np.concatenate([starts + frac * diffs, points[-1:]])
    lab = np.concatenate([np.repeat(labels[:-1], reps), labels[-1:]])
    return dense, lab


def minkowski_content(trace, d, eps_schedule=DEFAULT_SCHEDULE, window=None, edges=None,
                      pixel_factor=8, check_d=True, max_gap=None):
    """Minkowski content of a trace, per capacity segment.

    Parameters
    ----------
    trace : TraceSample
        Resolved curve points (see ``max_gap``).
    d : float
        Dimension in ``(1, 1.5)``; ``check_d=False`` admits other values
        (``d = 1`` for smooth test curves).
    eps_schedule : sequence of float
        Decreasing neighbourhood radii.
    window : Window, optional
        Region intersected with the neighbourhood; default is all of H.
    edges : sequence of float, optional
        Capacity-time partition; default is one segment covering the trace.
    pixel_factor : int
        Pixel size is ``eps / pixel_factor``.
    max_gap : float, optional
        Largest admissible distance between consecutive trace points
        (default: the finest scale). Gaps are filled by straight chords.

    Returns
    -------
    ContentEstimate
    """
    d = float(d)
    if check_d and not 1.0 < d < 1.5:
        raise UnsupportedParameterError(f"d must lie in (1, 1.5), got {d}")
    eps = check_schedule(eps_schedule, 1)
    window = Window(radius=None) if window is None else window
    times = np.asarray(trace.times, float)
    pts = np.asarray(trace.points, complex)
    if edges is None:
        edges = np.array([times[0], times[-1]]) if times.size else np.array([0.0, 0.0])
    edges = np.asarray(edges, float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) < 0):
        raise InvalidGridError("edges must be a non-decreasing sequence of length >= 2")
    nseg = edges.size - 1
    per_scale = np.zeros((eps.size, nseg))
    if pts.size >= 1:
        if np.any(trace.unresolved):
            raise ResolutionError(f"{int(trace.unresolved.sum())} unresolved trace point(s)")
        gap = float(np.max(np.abs(np.diff(pts)))) if pts.size > 1 else 0.0
        limit = eps[-1] if max_gap is None else float(max_gap)
        if gap > limit:
            raise ResolutionError(
                f"trace spacing {gap:.3g} exceeds the admissible gap {limit:.3g}")
        labels = np.clip(np.searchsorted(edges, times, side="right") - 1, 0, nseg - 1)
        # points outside the partition keep their area out of every segment
        inside = (times >= edges[0]) & (times <= edges[-1])
        labels = np.where(inside, labels, nseg)
        for j, e in enumerate(eps):
            h = e / pixel_factor
            dense, lab = _densify(pts, labels, h)
            x0 = dense.real.min() - e - h
            x1 = dense.real.max() + e + h
            y1 = dense.imag.max() + e + h
            if window.radius is not None:
                x0, x1, y1 = max(x0, -window.radius), min(x1, window.radius), min(y1, window.radius)
            nx = max(1, int(math.ceil((x1 - x0) / h)))
            ny = max(1, int(math.ceil(y1 / h)))
            counts = _raster(dense.real.copy(), dense.imag.copy(), lab.astype(np.int64),
                             x0, h, nx, ny, e, nseg + 1, 0.0, 0.0,
                             np.inf if window.radius is None else window.radius,
                             window.exclude, window.radius is not None)
            per_scale[j] = counts[:nseg] * h * h * e ** (d - 2.0)
    areas = per_scale.sum(axis=1) * eps ** (2.0 - d)
    tot = per_scale.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = tot[1:] / tot[:-1]
    stabilized = bool(eps.size >= 2 and tot[-2] > 0
                      and abs(tot[-1] - tot[-2]) <= STABLE_TOL * tot[-2])
    return ContentEstimate(edges, per_scale[-1].copy(), eps, per_scale, areas, ratios,
                           stabilized, d, window)


# ---------------------------------------------------------------------------
# pushforward

def _apply_map(phi, z):
    if isinstance(phi, ChainPullback):
        return phi.chain.phi(phi.a, phi.b, z)
    val, der = phi(z)
    return np.asarray(val, complex), np.asarray(der, complex)


def pushforward_measure(measure, phi, d=None):
    """Push atoms through ``phi`` with weights multiplied by ``|phi'|**d``.

    ``phi`` is any map returning ``(value, derivative)``, such as
    :class:`~slezip.fields.ChainPullback` or :class:`~slezip.fields.ScalingMap`.
    Pushing by the inverse map uses ``|(phi^{-1})'|**d = |phi'|**-d``, so the
    two directions compose to the identity. Accepts :class:`AtomicMeasure` or
    :class:`QuantumTimeMeasure`.

    Examples
    --------
    >>> from slezip.fields import ScalingMap
    >>> m = AtomicMeasure(np.array([1j]), np.array([1.0]), d=1.25, support="curve")
    >>> out = pushforward_measure(m, ScalingMap(2.0))
    >>> round(float(out.weights[0]), 5), complex(out.positions[0])
    (2.37841, 2j)
    """
    if isinstance(measure, QuantumTimeMeasure):
        d = measure.measure.d if d is None else float(d)
        new, factor = _push_atoms(measure.measure, phi, d)
        samples = None if measure.samples is None else measure.samples * factor.astype(
            measure.samples.dtype)
        return replace(measure, measure=new, se=measure.se * factor, samples=samples)
    d = measure.d if d is None else float(d)
    return _push_atoms(measure, phi, d)[0]


def _push_atoms(measure, phi, d):
    if len(measure) == 0:
        return replace(measure, d=d), np.ones(0)
    pos = np.asarray(measure.positions, complex)
    val, der = _apply_map(phi, pos)
    val = np.atleast_1d(val)
    factor = np.abs(np.atleast_1d(der)) ** d
    if measure.support == "boundary":
        new_pos = val.real
        order = np.argsort(new_pos, kind="stable")
        if np.any(order != np.arange(order.size)):
            raise DomainError("map does not preserve the order of boundary atoms")
    else:
        new_pos = val
    return replace(measure, positions=new_pos, weights=measure.weights * factor, d=d), factor


# ---------------------------------------------------------------------------
# mu^0 as an expectation of pushed-forward boundary chaos

@dataclass(frozen=True, eq=False)
class QuantumTimeMeasure:
    """Monte Carlo estimate of ``mu^0`` restricted to ``eta[0, t]``.

    Attributes
    ----------
    measure : AtomicMeasure
        Curve atoms with mean weights; tags are capacity times on the curve.
    replicates : int
    se : ndarray
        Per-atom standard errors of the mean weights.
    khat : ndarray
        ``Khat`` at each curve atom (the F-factor is ``exp(-gamma**2/8 Khat)``).
    boundary_points : ndarray
        Unzipped-coordinate atoms ``x`` with ``phi_t^0(x)`` the curve atoms.
    excluded : int
        Boundary atoms dropped (near the hull or not mapped onto the curve).
    segment_samples : ndarray or None
        Per-replicate segment masses for ``edges``.
    samples : ndarray or None
        Per-replicate atom weights (float32) when requested.
    """

    measure: AtomicMeasure
    replicates: int
    se: np.ndarray
    khat: np.ndarray
    boundary_points: np.ndarray
    excluded: int
    eps: float
    spacing: float
    gamma: float
    t: float
    method: str = "mc"
    edges: np.ndarray = None
    segment_samples: np.ndarray = None
    samples: np.ndarray = None
    info: dict = field(default_factory=dict)

    @property
    def total_mass(self):
        return float(self.measure.weights.sum())

    def restrict(self, mask):
        """Keep the atoms selected by ``mask`` (stored segment samples are dropped)."""
        mask = np.asarray(mask, bool)
        samples = None if self.samples is None else self.samples[:, mask]
        return replace(self, measure=self.measure.restrict(mask), se=self.se[mask],
                       khat=self.khat[mask], boundary_points=self.boundary_points[mask],
                       edges=None, segment_samples=None, samples=samples)

    def shifted_tags(self, offset):
        """Same measure with capacity tags shifted by ``-offset``."""
        return replace(self, measure=replace(self.measure, tags=self.measure.tags - offset))

    def segment_counts(self, edges):
        """Number of atoms per segment (a resolution diagnostic)."""
        return replace(self.measure, weights=np.ones(len(self.measure))).segment_masses(
            np.asarray(edges, float)).astype(int)

    def segment_masses(self, edges=None):
        """Mean segment masses and their standard errors.

        Uses the stored per-replicate segment masses (or per-atom samples);
        falls back to independent per-atom errors otherwise.
        """
        if edges is None:
            if self.edges is None:
                raise InvalidGridError("no partition stored; pass edges")
            edges = self.edges
        edges = np.asarray(edges, float)
        mean = self.measure.segment_masses(edges)
        R = max(self.replicates, 1)
        if self.edges is not None and self.segment_samples is not None and np.array_equal(
                edges, self.edges):
            per = self.segment_samples
        elif self.samples is not None:
            per = replace(self.measure, weights=self.samples.astype(float)).segment_masses(edges)
        else:
            var = replace(self.measure, weights=self.se ** 2).segment_masses(edges)
            return mean, np.sqrt(var)
        if self.method == "exact" or R < 2:
            return mean, np.zeros_like(mean)
        return per.mean(axis=0), per.std(axis=0, ddof=1) / math.sqrt(R)


def _grid(x_right, spacing, margin):
    """Cell midpoints and lengths of a fixed-spacing grid on ``[margin, x_right]``."""
    if x_right <= margin:
        return np.zeros(0), np.zeros(0)
    k = np.arange(int(math.ceil((x_right - margin) / spacing - 1e-12)))
    lo = margin + k * spacing
    hi = np.minimum(lo + spacing, x_right)
    keep = hi - lo > 1e-12 * spacing
    return 0.5 * (lo + hi)[keep], (hi - lo)[keep]


def _curve_points(chain, t, x):
    """``phi_t^0(x)`` for real ``x`` with capacity-time tags on the curve."""
    n = chain.index(t)
    val, der, hits, heights = chain.inverse(np.asarray(x, complex) + chain.W[n], 0, n,
                                            with_hits=True)
    tags = hits * chain.dt + heights ** 2 / 4.0
    return val - chain.W[0], der, hits, tags


def expected_quantum_time(trace, chain, t, gamma, replicates=10_000, seed=0, *, eps=2e-3,
                          spacing=None, margin=None, method="mc", edges=None,
                          keep_samples=False, chunk=2000, model=None, n_nodes=None,
                          window=None, x_right=None):
    """Estimate ``mu^0`` on ``eta[0, t]`` by field Monte Carlo.

    Parameters
    ----------
    trace : TraceSample or None
        Curve of the same driving path; only used to check consistency.
    chain : MapChain
    t : float
        Grid time, at most the chain capacity.
    gamma : float
        ``gamma**2`` must equal the chain's kappa (when known) and be < 4.
    replicates : int
        Independent Dirichlet field samples.
    seed : int or Generator
    eps : float
        Semicircle probe radius in unzipped coordinates.
    spacing : float, optional
        Lebesgue cell length, at least ``2 eps`` (the default).
    margin : float, optional
        Atoms start at this distance from the image of the tip; default ``eps``.
    method : {"mc", "exact"}
        ``"exact"`` replaces the Monte Carlo mean by the Gaussian expectation.
    edges : sequence of float, optional
        Capacity partition for per-replicate segment masses.
    keep_samples : bool
        Store per-replicate atom weights (float32).
    chunk : int
        Replicates drawn per batch; results do not depend on it.
    window : Window, optional
        Curve atoms outside the window are dropped (counted in ``info``).
    x_right : float, optional
        Right end of the atom grid, at most ``phi_0^t(0+)`` (the default);
        ``phi_s^t(0+)`` keeps only atoms on ``eta[s, t]``.

    Returns
    -------
    QuantumTimeMeasure
    """
    gamma = check_positive(gamma, "gamma", UnsupportedParameterError)
    if not gamma ** 2 < 4.0:
        raise UnsupportedParameterError(f"gamma**2 must be < 4, got {gamma ** 2}")
    kappa = getattr(chain.path, "kappa", None)
    if kappa is not None and not math.isclose(gamma ** 2, kappa, rel_tol=1e-9, abs_tol=1e-12):
        raise UnsupportedParameterError(f"gamma**2 = {gamma ** 2} differs from kappa = {kappa}")
    if method not in ("mc", "exact"):
        raise UnsupportedParameterError(f"unknown method {method!r}")
    t = float(t)
    if t < 0 or t > chain.capacity * (1 + 1e-12):
        raise RangeError(f"t = {t} outside [0, {chain.capacity}]")
    if trace is not None and len(trace) and trace.times[-1] + 1e-12 < t:
        warnings.warn("trace is shorter than t", RuntimeWarning, stacklevel=2)
    eps = check_positive(eps, "eps")
    spacing = 2.0 * eps if spacing is None else float(spacing)
    if spacing < 2.0 * eps * (1 - 1e-12):
        raise InvalidGridError("spacing must be at least 2 eps")
    margin = eps if margin is None else float(margin)
    replicates = int(replicates)
    if replicates < 1:
        raise InvalidGridError("replicates must be >= 1")
    model = CovarianceModel.dirichlet() if model is None else model
    if n_nodes is not None:
        model = replace(model, n_nodes=int(n_nodes))
    edges = None if edges is None else np.asarray(edges, float)
    nseg = 0 if edges is None else edges.size - 1

    def empty(excluded=0):
        meas = AtomicMeasure(np.zeros(0, complex), np.zeros(0), d=1.0 + gamma ** 2 / 8.0,
                             support="curve", tags=np.zeros(0))
        seg = None if edges is None else np.zeros((replicates, nseg))
        return QuantumTimeMeasure(meas, replicates, np.zeros(0), np.zeros(0), np.zeros(0),
                                  excluded, eps, spacing, gamma, t, method, edges, seg,
                                  np.zeros((replicates, 0), np.float32) if keep_samples else None)

    if chain.index(t) == 0:
        return empty()
    foot = chain.right_foot(0.0, t)
    x_right = foot if x_right is None else min(float(x_right), foot)
    x, length = _grid(x_right, spacing, margin)
    if x.size == 0:
        return empty()
    p, _, hits, tags = _curve_points(chain, t, x)
    pull = ChainPullback(chain, t, 0.0)
    # atoms whose probes approach the hull, or which are not lifted onto the curve
    nodes = x[:, None] + eps * np.exp(1j * np.linspace(0.05, np.pi - 0.05, 5))[None, :]
    near = pull.near_hull(nodes.ravel()).reshape(nodes.shape).any(axis=1)
    bad = near | (hits < 0) | ~np.isfinite(p) | (p.imag <= 0)
    excluded = int(np.count_nonzero(bad))
    keep = ~bad
    outside = 0
    if window is not None:
        inside = window.contains(np.where(np.isfinite(p), p, 0.0))
        outside = int(np.count_nonzero(keep & ~inside))
        keep &= inside
    x, length, p, tags = x[keep], length[keep], p[keep], tags[keep]
    if x.size == 0:
        return empty(excluded)
    Q = q_charge(gamma)
    probes = ProbeSet.boundary(x, eps).with_pullback(pull, q_offset=Q)
    cov = probe_covariance(model, probes)
    mean = probe_means(model, probes)
    kh = np.asarray(model.khat_limit(p, "bulk"), float)
    F = np.exp(-gamma ** 2 / 8.0 * kh)
    base = length * eps ** (gamma ** 2 / 4.0) * F
    g = gamma / 2.0
    d = 1.0 + gamma ** 2 / 8.0
    order = np.argsort(tags, kind="stable")
    x, length, p, tags, base, kh = (a[order] for a in (x, length, p, tags, base, kh))
    cov = cov[np.ix_(order, order)]
    mean = mean[order]
    info = {"x_right": float(x_right), "n_atoms": int(x.size), "outside_window": outside}
    if method == "exact":
        w = base * np.exp(g * mean + 0.5 * g * g * np.diag(cov))
        meas = AtomicMeasure(p, w, d=d, support="curve", scale=eps, tags=tags)
        seg = None if edges is None else np.tile(meas.segment_masses(edges), (1, 1))
        return QuantumTimeMeasure(meas, replicates, np.zeros_like(w), kh, x, excluded, eps,
                                  spacing, gamma, t, method, edges, seg, None, info)
    L = gaussian_factor(cov, model.psd_tol)
    rng = as_rng(seed)
    s1 = np.zeros(x.size)
    s2 = np.zeros(x.size)
    seg = np.zeros((replicates, nseg)) if edges is not None else None
    samples = np.empty((replicates, x.size), np.float32) if keep_samples else None
    if edges is not None:
        lab = np.searchsorted(edges, tags, side="right") - 1
        lab_ok = (lab >= 0) & (lab < nseg)
    done = 0
    while done < replicates:
        k = min(chunk, replicates - done)
        xi = rng.standard_normal((k, x.size))
        w = base[None, :] * np.exp(g * (mean[None, :] + xi @ L.T))
        s1 += w.sum(axis=0)
        s2 += (w * w).sum(axis=0)
        if seg is not None:
            for r in range(k):
                seg[done + r] = np.bincount(lab[lab_ok], w[r, lab_ok], minlength=nseg)
        if samples is not None:
            samples[done:done + k] = w
        done += k
    m1 = s1 / replicates
    var = np.maximum(s2 / replicates - m1 ** 2, 0.0) * replicates / max(replicates - 1, 1)
    se = np.sqrt(var / replicates)
    meas = AtomicMeasure(p, m1, d=d, support="curve", scale=eps, tags=tags)
    return QuantumTimeMeasure(meas, replicates, se, kh, x, excluded, eps, spacing, gamma, t,
                              method, edges, seg, samples, info)


# ---------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class ComparisonReport:
    ratios: np.ndarray
    mean: float
    cv: float
    cv_se: float
    excluded: int
    unresolved: int
    proportional: bool
    threshold: float


def _segments(m, edges):
    if isinstance(m, ContentEstimate):
        if edges is not None and not np.allclose(np.asarray(edges, float), m.edges):
            raise InvalidGridError("content estimate uses a different partition")
        return np.asarray(m.contents, float)
    if isinstance(m, QuantumTimeMeasure):
        return m.segment_masses(edges)[0]
    if isinstance(m, AtomicMeasure):
        return np.asarray(m.segment_masses(edges), float)
    return np.asarray(m, float)


def _resolved(m, edges, min_atoms, n):
    if min_atoms and isinstance(m, (QuantumTimeMeasure, AtomicMeasure)) and edges is not None:
        meas = m if isinstance(m, QuantumTimeMeasure) else QuantumTimeMeasure(
            m, 1, np.zeros(len(m)), None, None, 0, None, None, None, None)
        return meas.segment_counts(edges) >= min_atoms
    return np.ones(n, bool)


def compare_measures(a, b, partition=None, threshold=0.25, min_atoms=0, n_boot=1000, seed=0):
    """Segment ratios ``a / b``, their mean and coefficient of variation.

    ``a`` and ``b`` are segment-mass arrays, :class:`AtomicMeasure` (tags are
    segmented by ``partition``), :class:`QuantumTimeMeasure` or
    :class:`ContentEstimate`. Segments where ``b`` has no mass are dropped
    and counted in ``excluded``; segments where an atomic input has fewer
    than ``min_atoms`` atoms are dropped and counted in ``unresolved``. The
    CV standard error is a bootstrap over segments.

    Examples
    --------
    >>> r = compare_measures(np.array([3.0, 6.0]), np.array([1.0, 2.0]))
    >>> r.ratios.tolist(), r.cv
    ([3.0, 3.0], 0.0)
    """
    sa = _segments(a, partition)
    sb = _segments(b, partition)
    if sa.shape != sb.shape:
        raise InvalidGridError("measures are segmented differently")
    pos = sb > 0
    res = _resolved(a, partition, min_atoms, sa.size) & _resolved(b, partition, min_atoms, sa.size)
    excluded = int(np.count_nonzero(~pos))
    unresolved = int(np.count_nonzero(pos & ~res))
    ok = pos & res
    r = sa[ok] / sb[ok]
    if r.size == 0:
        raise InvalidGridError("no comparable segment left")
    mean = float(r.mean())
    cv = float(r.std() / mean) if mean > 0 else float("inf")
    cv_se = 0.0
    if r.size > 1 and np.isfinite(cv):
        rng = as_rng(seed)
        boot = r[rng.integers(0, r.size, (n_boot, r.size))]
        bm = boot.mean(axis=1)
        good = bm > 0
        cv_se = float((boot[good].std(axis=1) / bm[good]).std())
    return ComparisonReport(r, mean, cv, cv_se, excluded, unresolved, bool(cv < threshold),
                            threshold)
