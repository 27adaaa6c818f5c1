"""Quantum zipper experiments.

A replicate draws an SLE trace and an independent wedge field inside the unit
half-disk. Quantum time is the ``gamma/2`` chaos of the curve's Minkowski
content; quantum boundary length ``m`` is the ``gamma/2`` boundary chaos of
Lebesgue measure on the right side of the curve, read in the picture where
the whole curve has been unzipped. Every boundary atom carries the capacity
time of the curve point it glues to, so ``m(t)`` for all ``t`` comes from one
field sample and one picture.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import stats

from ._pool import map_ordered
from ._seeding import seed_for
from .errors import (DomainError, InvalidGridError, ModelError, PointInHullError,
                     RangeError, ResolutionError, SlezipError, UnsupportedParameterError)
from .fields import ChainPullback, CovarianceModel, ProbeSet, joint_covariance, sample_probes
from .loewner import MapChain, compute_trace, refine_trace, sample_sle_driving
from .natural import (Window, _curve_points, _grid, expected_quantum_time, minkowski_content,
                      pushforward_measure)
from .validation import check_kappa, check_positive, q_charge

MAX_NEAR_HULL = 0.20


def chaos_weights(base, values, gamma_tilde, eps, n):
    """``base * eps**(gamma_tilde**2 n / 2) * exp(gamma_tilde * values)``."""
    return np.asarray(base) * eps ** (gamma_tilde ** 2 * n / 2.0) * np.exp(
        gamma_tilde * np.asarray(values))


def _cumulative(tags, weights):
    """Knots of the piecewise-linear cumulative mass, starting at ``(0, 0)``."""
    order = np.argsort(tags, kind="stable")
    t = np.concatenate([[0.0], np.asarray(tags, float)[order]])
    c = np.concatenate([[0.0], np.cumsum(np.asarray(weights, float)[order])])
    return t, c


@dataclass(frozen=True, eq=False)
class ZipperRun:
    """One zipper replicate.

    Attributes
    ----------
    kappa, gamma, alpha : float
        ``gamma**2 = kappa`` and ``alpha = gamma - 2/gamma``.
    path : DrivingPath
    chain : MapChain or None
        Kept only on request (it is large).
    T : float
        Capacity actually used (the curve is cut before leaving the window).
    curve_tags, curve_base, curve_values : ndarray
        Curve atoms: capacity tag, Minkowski content and field pairing.
    boundary_tags, boundary_base, boundary_values : ndarray
        Boundary atoms in the unzipped picture.
    eps_curve, eps_boundary : float
        Probe radii.
    tau, t, m : ndarray
        Checkpoints in quantum time, the matching capacity times and ``m``.
    flagged : str or None
        Reason the replicate was dropped.
    """

    kappa: float
    gamma: float
    alpha: float
    seed: int
    path: object
    chain: object
    T: float
    window: Window
    curve_tags: np.ndarray
    curve_base: np.ndarray
    curve_values: np.ndarray
    boundary_tags: np.ndarray
    boundary_base: np.ndarray
    boundary_values: np.ndarray
    eps_curve: float
    eps_boundary: float
    tau: np.ndarray
    t: np.ndarray
    m: np.ndarray
    near_hull_fraction: float = 0.0
    flagged: str = None
    info: dict = field(default_factory=dict)

    # -- clocks --------------------------------------------------------
    @property
    def curve_weights(self):
        return chaos_weights(self.curve_base, self.curve_values, self.gamma / 2.0,
                             self.eps_curve, 1)

    @property
    def boundary_weights(self):
        return chaos_weights(self.boundary_base, self.boundary_values, self.gamma / 2.0,
                             self.eps_boundary, 2)

    @property
    def quantum_time_total(self):
        return float(self.curve_weights.sum())

    def quantum_time(self, t):
        """Quantum time of ``eta[0, t]`` (piecewise linear between atoms)."""
        kt, kc = _cumulative(self.curve_tags, self.curve_weights)
        return np.interp(t, kt, kc)

    def capacity_at(self, tau):
        """Capacity time at which quantum time reaches ``tau``."""
        kt, kc = _cumulative(self.curve_tags, self.curve_weights)
        return np.interp(tau, kc, kt)

    def boundary_length(self, t):
        """``m(t)``: boundary mass glued to ``eta[0, t]``."""
        kt, kc = _cumulative(self.boundary_tags, self.boundary_weights)
        return np.interp(t, kt, kc)

    def m_at_quantum(self, tau):
        return self.boundary_length(self.capacity_at(tau))

    def with_field_constant(self, c):
        """Same replicate with the constant ``c`` added to the field."""
        return _with_values(self, self.curve_values + c, self.boundary_values + c)

    # -- fits ----------------------------------------------------------
    @property
    def r2(self):
        return _r_squared(self.tau, self.m)

    @property
    def slope(self):
        """Least-squares slope through the origin of ``m`` against quantum time."""
        den = float(np.dot(self.tau, self.tau))
        return float(np.dot(self.tau, self.m) / den) if den > 0 else math.nan

    def clock_rows(self, replicate):
        return [(replicate, float(a), float(b)) for a, b in zip(self.tau, self.m)]


def _r_squared(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 3 or np.ptp(x) == 0:
        return math.nan
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def _checkpoints(run, n_checkpoints):
    total = run.quantum_time_total
    tau = total * np.arange(n_checkpoints + 1) / n_checkpoints
    t = run.capacity_at(tau)
    t[0] = 0.0
    m = run.boundary_length(t)
    m[0] = 0.0
    return tau, t, m


def _with_values(run, curve_values, boundary_values):
    tmp = ZipperRun(**{**run.__dict__, "curve_values": np.asarray(curve_values),
                       "boundary_values": np.asarray(boundary_values)})
    n = run.tau.size - 1
    if n < 1:
        return tmp
    tau, t, m = _checkpoints(tmp, n)
    return ZipperRun(**{**tmp.__dict__, "tau": tau, "t": t, "m": m})


def _flagged(kappa, gamma, alpha, seed, path, window, reason, info=None):
    e = np.zeros(0)
    return ZipperRun(kappa, gamma, alpha, seed, path, None, 0.0, window, e, e, e, e, e, e,
                     math.nan, math.nan, e, e, e, flagged=reason, info=info or {})


def _arclength_edges(trace, step):
    """Capacity times splitting the trace polyline into pieces of length ~ ``step``."""
    seg = np.abs(np.diff(trace.points))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(1, int(round(s[-1] / step)))
    levels = s[-1] * np.arange(n + 1) / n
    edges = np.interp(levels, s, trace.times)
    edges[0], edges[-1] = trace.times[0], trace.times[-1]
    # repeated times (refinement points share a time) leave empty segments
    edges = np.maximum.accumulate(edges)
    mid_s = 0.5 * (levels[:-1] + levels[1:])
    return edges, s, mid_s


def zipper_replicate(kappa, T, seed, window=None, *, dt=1e-5, eps_curve=0.02,
                     eps_boundary=0.01, eps_content=2.0 ** -7, n_checkpoints=8,
                     field_scale=None, keep_chain=False, n_nodes=32):
    """Run one zipper replicate (see :func:`run_zipper`)."""
    kappa = check_kappa(kappa)
    gamma = math.sqrt(kappa)
    alpha = gamma - 2.0 / gamma
    window = Window(1.0, 0.0) if window is None else window
    if window.radius is None or window.radius > 1.0 or window.exclude != 0.0:
        raise DomainError("zipper window must be a half-disk of radius <= 1")
    path = sample_sle_driving(kappa, dt, T, seed_for(seed, 0))
    try:
        return _replicate(path, kappa, gamma, alpha, seed, window, eps_curve, eps_boundary,
                          eps_content, n_checkpoints, field_scale, keep_chain, n_nodes)
    except (ResolutionError, DomainError, ModelError, PointInHullError, RangeError) as exc:
        return _flagged(kappa, gamma, alpha, seed, path, window,
                        f"{type(exc).__name__}: {exc}")


def _replicate(path, kappa, gamma, alpha, seed, window, eps_c, eps_b, eps_m, n_checkpoints,
               field_scale, keep_chain, n_nodes):
    chain = MapChain.from_path(path)
    d = 1.0 + kappa / 8.0
    # keep every curve probe (radius eps_c) inside the window
    stop = window.radius - 2.0 * eps_c
    trace = compute_trace(chain, stop_radius=stop)
    if np.abs(trace.points[-1]) >= stop:
        trace = trace.upto(trace.times[-2])
    T_eff = float(trace.times[-1])
    if chain.index(T_eff) < 2:
        raise ResolutionError("curve leaves the window before the second grid step")
    trace = refine_trace(chain, trace, eps_m)
    edges, s, mid_s = _arclength_edges(trace, 2.0 * eps_c)
    content = minkowski_content(trace, d, eps_schedule=(eps_m,), window=window, edges=edges,
                                max_gap=eps_m)
    c_pts = np.interp(mid_s, s, trace.points.real) + 1j * np.interp(mid_s, s, trace.points.imag)
    c_tags = 0.5 * (edges[:-1] + edges[1:])
    c_base = content.contents
    c_ok = c_pts.imag >= eps_c
    # boundary atoms of the unzipped picture, glued back onto the curve
    x, length = _grid(chain.right_foot(0.0, T_eff), 2.0 * eps_b, eps_b)
    p, _, hits, b_tags = _curve_points(chain, T_eff, x)
    b_ok = (hits >= 0) & np.isfinite(p) & (p.imag > 0)
    n_all = c_ok.size + b_ok.size
    near = (np.count_nonzero(~c_ok) + np.count_nonzero(~b_ok)) / max(n_all, 1)
    info = {"T_eff": T_eff, "n_curve": int(c_ok.sum()), "n_boundary": int(b_ok.sum())}
    if near > MAX_NEAR_HULL:
        raise DomainError(f"{near:.0%} of atoms near the hull")
    c_pts, c_tags, c_base = c_pts[c_ok], c_tags[c_ok], c_base[c_ok]
    x, length, b_tags = x[b_ok], length[b_ok], b_tags[b_ok]
    model = CovarianceModel.wedge(alpha, gamma, window_radius=1.0, n_nodes=n_nodes)
    curve_probes = ProbeSet.bulk(c_pts, eps_c)
    pull = ChainPullback(chain, T_eff, 0.0)
    bnd_probes = ProbeSet.boundary(x, eps_b).with_pullback(pull, q_offset=q_charge(gamma))
    cov, mean = joint_covariance(model, [curve_probes, bnd_probes])
    vals = sample_probes(cov, mean, seed_for(seed, 1)).values
    if field_scale is not None:
        vals = _scale_after(vals, c_tags, b_tags, c_base, gamma, eps_c, field_scale)
    nc = c_pts.size
    run = ZipperRun(kappa, gamma, alpha, seed, path, chain if keep_chain else None, T_eff,
                    window, c_tags, c_base, vals[:nc], b_tags, length, vals[nc:], eps_c, eps_b,
                    np.zeros(0), np.zeros(0), np.zeros(0), near, None, info)
    tau, t, m = _checkpoints(run, n_checkpoints)
    return ZipperRun(**{**run.__dict__, "tau": tau, "t": t, "m": m})


def _scale_after(vals, c_tags, b_tags, c_base, gamma, eps_c, field_scale):
    """Multiply the field by ``factor`` on atoms after quantum time ``tau``."""
    tau, factor = field_scale
    nc = c_tags.size
    w = chaos_weights(c_base, vals[:nc], gamma / 2.0, eps_c, 1)
    kt, kc = _cumulative(c_tags, w)
    t_cut = float(np.interp(tau, kc, kt))
    after = np.concatenate([c_tags > t_cut, b_tags > t_cut])
    out = vals.copy()
    out[after] = factor * vals[after]
    return out


@dataclass(frozen=True)
class SlopeReport:
    """Cross-replicate summary of the boundary-length law."""

    median_R2: float
    slope_cv: float
    dropped: int
    used: int
    slopes: tuple
    r2: tuple
    reasons: tuple

    def to_dict(self):
        return {"median_R2": self.median_R2, "slope_cv": self.slope_cv, "dropped": self.dropped,
                "used": self.used, "drop_rate": self.dropped / max(self.dropped + self.used, 1)}


def slope_report(runs):
    good = [r for r in runs if r.flagged is None]
    slopes = np.array([r.slope for r in good])
    r2 = np.array([r.r2 for r in good])
    ok = np.isfinite(r2)
    cv = float(np.std(slopes, ddof=1) / np.mean(slopes)) if slopes.size > 1 else math.nan
    return SlopeReport(float(np.median(r2[ok])) if ok.any() else math.nan, cv,
                       len(runs) - len(good), len(good), tuple(slopes.tolist()),
                       tuple(r2.tolist()), tuple(r.flagged for r in runs if r.flagged))


def run_zipper(kappa, T, replicates, seed, window=None, *, workers=None, **kw):
    """Zipper replicates and their slope report.

    Parameters
    ----------
    kappa : float
        In ``[0, 4)``; ``gamma = sqrt(kappa)`` and ``alpha = gamma - 2/gamma``.
    T : float
        Capacity horizon; each curve is cut earlier if it nears the window edge.
    replicates : int
    seed : int
        Replicate ``k`` uses ``seed_for(seed, k)``.
    window : Window, optional
        Half-disk of radius at most 1 (default: the unit half-disk).
    workers : int, optional
        Process count (default ``$SLEZIP_MAX_WORKERS`` or 1).
    **kw
        Passed to :func:`zipper_replicate` (``dt``, ``eps_curve``,
        ``eps_boundary``, ``eps_content``, ``n_checkpoints``, ``field_scale``).

    Returns
    -------
    runs : list of ZipperRun
    report : SlopeReport
    """
    kappa = check_kappa(kappa)
    if kappa == 0:
        raise UnsupportedParameterError("the zipper needs kappa > 0")
    check_positive(T, "T")
    replicates = int(replicates)
    if replicates < 1:
        raise InvalidGridError("replicates must be >= 1")
    from functools import partial
    fn = partial(zipper_replicate, **kw)
    args = [(kappa, T, seed_for(seed, k), window) for k in range(replicates)]
    runs = map_ordered(fn, args, workers)
    return runs, slope_report(runs)


# ---------------------------------------------------------------------------
# stationarity

@dataclass(frozen=True)
class StationarityReport:
    checkpoints: tuple
    delta: float
    ks: np.ndarray
    pvalues: np.ndarray
    adjusted: np.ndarray
    rejected: bool
    used: int
    excluded: int
    level: float = 0.01

    def to_dict(self):
        return {"checkpoints": list(self.checkpoints), "delta": self.delta,
                "ks": self.ks.tolist(), "p_adjusted": self.adjusted.tolist(),
                "rejected": self.rejected, "used": self.used, "excluded": self.excluded}


def increment_rate(run, tau, delta):
    """Boundary length unzipped per unit quantum time over ``[tau, tau + delta]``."""
    return float((run.m_at_quantum(tau + delta) - run.m_at_quantum(tau)) / delta)


def holm(pvalues):
    """Holm step-down adjusted p-values."""
    p = np.asarray(pvalues, float)
    n = p.size
    order = np.argsort(p)
    adj = np.empty(n)
    run = 0.0
    for rank, i in enumerate(order):
        run = max(run, min(1.0, (n - rank) * p[i]))
        adj[i] = run
    return adj


def stationarity_diagnostic(runs, t_checkpoints=None, delta=None, level=0.01, min_runs=100):
    """Pairwise KS comparison of the increment rate across quantum-time checkpoints.

    ``t_checkpoints`` are absolute quantum times; the default is ``(0.1, 0.3,
    0.5)`` times the 20% quantile of total quantum time, with ``delta`` one
    tenth of that quantile. Runs whose quantum time ends before the last
    window are excluded and counted.
    """
    good = [r for r in runs if r.flagged is None]
    if len(good) < min_runs:
        warnings.warn(f"only {len(good)} runs; KS tests have little power",
                      RuntimeWarning, stacklevel=2)
    totals = np.array([r.quantum_time_total for r in good])
    if t_checkpoints is None or delta is None:
        if totals.size == 0:
            raise InvalidGridError("no usable runs")
        q20 = float(np.quantile(totals, 0.2))
        t_checkpoints = (0.1 * q20, 0.3 * q20, 0.5 * q20) if t_checkpoints is None else t_checkpoints
        delta = 0.1 * q20 if delta is None else delta
    t_checkpoints = tuple(float(v) for v in t_checkpoints)
    delta = check_positive(delta, "delta")
    horizon = max(t_checkpoints) + delta
    use = [r for r in good if r.quantum_time_total >= horizon]
    rates = np.array([[increment_rate(r, tk, delta) for tk in t_checkpoints] for r in use])
    rates = rates.reshape(len(use), len(t_checkpoints))
    k = len(t_checkpoints)
    ks = np.zeros((k, k))
    pv = np.ones((k, k))
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    for i, j in pairs:
        if rates.shape[0] == 0:
            continue
        res = stats.ks_2samp(rates[:, i], rates[:, j])
        ks[i, j] = ks[j, i] = res.statistic
        pv[i, j] = pv[j, i] = res.pvalue
    flat = np.array([pv[i, j] for i, j in pairs])
    adj_flat = holm(flat) if flat.size else flat
    adj = np.ones((k, k))
    for (i, j), a in zip(pairs, adj_flat):
        adj[i, j] = adj[j, i] = a
    rejected = bool(np.any(adj_flat < level))
    return StationarityReport(t_checkpoints, delta, ks, pv, adj, rejected, len(use),
                              len(runs) - len(use), level)


# ---------------------------------------------------------------------------
# Markov covariance

@dataclass(frozen=True)
class MarkovReport:
    edges: np.ndarray
    left: np.ndarray
    left_se: np.ndarray
    right: np.ndarray
    right_se: np.ndarray
    z: np.ndarray
    passed: bool
    info: dict

    def to_dict(self):
        return {"edges": self.edges.tolist(), "left": self.left.tolist(),
                "left_se": self.left_se.tolist(), "right": self.right.tolist(),
                "right_se": self.right_se.tolist(), "z": self.z.tolist(),
                "passed": self.passed, **self.info}


def _resolved_cells(chain, s, t, x, p, eps, rho):
    """Cells whose probe, mapped to the time-``s`` picture, is small next to its height.

    The diameter of ``phi_t^s`` applied to the radius-``eps`` semicircle at
    ``x`` must stay below ``rho * Im p``, ``p`` being the curve point of the
    cell in that picture. Both sides share ``x``, ``p`` and hence the mask.
    """
    if x.size == 0:
        return np.zeros(0, bool)
    ang = np.exp(1j * np.linspace(0.0, np.pi, 9))
    nodes = x[:, None] + eps * ang[None, :]
    nodes.imag = np.maximum(nodes.imag, 1e-12)
    b, _ = chain.phi(t, s, nodes.ravel())
    b = b.reshape(nodes.shape)
    diam = np.abs(b[:, :, None] - b[:, None, :]).max(axis=(1, 2))
    return diam < rho * np.asarray(p).imag


def markov_sides(chain, s, t, replicates, seed, segments=4, eps=4e-3, method="mc",
                 n_nodes=None, rho=0.5):
    """Both sides of the Markov covariance identity on ``eta^s[0, t - s]``.

    Left: ``mu^0`` restricted to ``eta[s, t]`` and pushed to the time-``s``
    picture by ``phi_0^s`` with weights ``|phi_0^s'|**d``. Right: ``mu^0`` of
    the unzipped chain with an independent field. Both use the same atom grid
    of the time-``t`` picture, and cells failing :func:`_resolved_cells` are
    dropped from both.
    """
    gamma = math.sqrt(chain.path.kappa)
    d = 1.0 + gamma ** 2 / 8.0
    edges = np.linspace(0.0, t - s, segments + 1)
    keep = method == "mc"
    left = expected_quantum_time(None, chain, t, gamma, replicates, seed_for(seed, 1), eps=eps,
                                 keep_samples=keep, method=method,
                                 x_right=chain.right_foot(s, t), n_nodes=n_nodes)
    # cells under a bridge of the discrete curve glue to eta[0, s]
    left = left.restrict(left.measure.tags >= s)
    left = pushforward_measure(left, ChainPullback(chain, 0.0, s), d).shifted_tags(s)
    sub = chain.sub_chain(s)
    right = expected_quantum_time(None, sub, t - s, gamma, replicates, seed_for(seed, 2),
                                  eps=eps, keep_samples=keep, method=method, n_nodes=n_nodes)
    n_before = (len(left.measure), len(right.measure))
    if rho is not None:
        left = left.restrict(_resolved_cells(chain, s, t, left.boundary_points,
                                             left.measure.positions, eps, rho))
        right = right.restrict(_resolved_cells(chain, s, t, right.boundary_points,
                                               right.measure.positions, eps, rho))
    dropped = (n_before[0] - len(left.measure), n_before[1] - len(right.measure))
    return edges, left, right, dropped


def markov_covariance_check(kappa, s, t, replicates, seed, *, segments=4, eps=4e-3, dt=1e-5,
                            chain=None, method="mc", threshold=3.0, rho=0.5):
    """Per-segment z-scores between the two sides of the Markov covariance identity.

    Parameters
    ----------
    kappa : float
    s, t : float
        ``0 <= s <= t``; both sides are empty when ``s == t``.
    replicates : int
        Field replicates per side.
    seed : int
        Driving path ``seed_for(seed, 0)``; fields ``seed_for(seed, 1)`` and ``(seed, 2)``.
    chain : MapChain, optional
        Reuse a chain instead of sampling a driving path.
    rho : float or None
        Resolution mask parameter (see :func:`markov_sides`); ``None`` keeps all cells.

    Returns
    -------
    MarkovReport
        ``passed`` when every ``|z| < threshold``.
    """
    kappa = check_kappa(kappa)
    s, t = float(s), float(t)
    if not 0.0 <= s <= t:
        raise RangeError("need 0 <= s <= t")
    if chain is None:
        path = sample_sle_driving(kappa, dt, t, seed_for(seed, 0))
        chain = MapChain.from_path(path)
    if t > chain.capacity * (1 + 1e-12):
        raise RangeError(f"t = {t} exceeds the chain capacity {chain.capacity}")
    if chain.index(s) == chain.index(t):
        e = np.zeros(0)
        return MarkovReport(np.array([0.0, t - s]), e, e, e, e, e, True, {"empty": True})
    edges, left, right, dropped = markov_sides(chain, s, t, replicates, seed, segments, eps,
                                               method, rho=rho)
    lm, ls = left.segment_masses(edges)
    rm, rs = right.segment_masses(edges)
    den = np.sqrt(ls ** 2 + rs ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(den > 0, (lm - rm) / den, 0.0)
    info = {"kappa": kappa, "s": s, "t": t, "replicates": int(replicates), "eps": eps,
            "left_atoms": len(left.measure), "right_atoms": len(right.measure),
            "unresolved_cells": list(dropped)}
    return MarkovReport(edges, lm, ls, rm, rs, z, bool(np.all(np.abs(z) < threshold)), info)
