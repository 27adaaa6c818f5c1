"""Log-correlated Gaussian fields on the upper half-plane, seen through probes.

A field is never put on a grid. Each probe is a mass-one average (circle,
semicircle or a radial bump made of such rings) and the probe pairings form a
finite Gaussian vector whose covariance is computed from the kernel:

* Dirichlet   ``K(z, w) = -log|z - w| + log|z - conj(w)|``
* free        ``G(z, w) = -log|z - w| - log|z - conj(w)|``
* Neumann     ``G(z, w) - P(z) - P(w) + E`` with ``P = int rho G``, ``E = int int rho rho G``
* wedge       Neumann normalised on the unit semicircle plus the mean ``-alpha log|z|``

Inside the closed unit half-disk the wedge covariance is exactly ``G``.
"""

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np

from . import _quadrature as quad
from .errors import (DiagonalSingularityError, DomainError, InvalidGridError, ModelError,
                     PointInHullError, ResolutionError, ScheduleTooCoarseError,
                     UnsupportedParameterError)
from .validation import as_rng, check_positive, check_schedule, q_charge

VARIANTS = ("dirichlet", "free", "neumann", "wedge")
_BUMP_RINGS = 8
_P_NODES = 128


@dataclass(frozen=True)
class CovarianceModel:
    """Law of a log-correlated field, as a kernel plus a mean.

    Parameters
    ----------
    variant : {"dirichlet", "free", "neumann", "wedge"}
    rho : tuple
        Normalising density for the Neumann variant: ``("disk", t)`` is the
        unit-area disk centred at ``(sqrt(t) + 1) i``; ``("semicircle", R)`` is
        the uniform measure on the upper half circle of radius ``R``.
    alpha, gamma : float
        Wedge parameters; ``alpha < Q(gamma)`` is required.
    n_nodes : int
        Quadrature nodes per ring for smooth kernel parts.
    mollifier : {"circle", "bump"}
    """

    variant: str = "dirichlet"
    rho: tuple = ("disk", 0.0)
    alpha: float = 0.0
    gamma: float = math.sqrt(2.0)
    n_nodes: int = 32
    mollifier: str = "circle"
    window_radius: float = 1.0
    psd_tol: float = 1e-6

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UnsupportedParameterError(f"unknown field variant {self.variant!r}")
        if self.mollifier not in ("circle", "bump"):
            raise UnsupportedParameterError(f"unknown mollifier {self.mollifier!r}")
        if self.variant == "wedge":
            if not self.alpha < q_charge(self.gamma):
                raise UnsupportedParameterError(
                    f"wedge needs alpha < Q = {q_charge(self.gamma):.6g}, got {self.alpha}")
            object.__setattr__(self, "rho", ("semicircle", float(self.window_radius)))
        kind, param = self.rho
        if kind not in ("disk", "semicircle"):
            raise UnsupportedParameterError(f"unknown normalising density {kind!r}")
        if kind == "disk" and param < 0:
            raise UnsupportedParameterError("disk density needs t >= 0")
        if kind == "semicircle":
            check_positive(param, "semicircle radius", UnsupportedParameterError)
        if int(self.n_nodes) < 4:
            raise ResolutionError("n_nodes must be at least 4")

    # -- constructors --------------------------------------------------
    @classmethod
    def dirichlet(cls, **kw):
        return cls("dirichlet", **kw)

    @classmethod
    def free(cls, **kw):
        return cls("free", **kw)

    @classmethod
    def neumann(cls, t=0.0, **kw):
        return cls("neumann", rho=("disk", float(t)), **kw)

    @classmethod
    def neumann_semicircle(cls, radius=1.0, **kw):
        return cls("neumann", rho=("semicircle", float(radius)), **kw)

    @classmethod
    def wedge(cls, alpha, gamma, **kw):
        return cls("wedge", alpha=float(alpha), gamma=float(gamma), **kw)

    # -- kernel pieces -------------------------------------------------
    @property
    def reflect_sign(self):
        """+1 for the Dirichlet kernel, -1 for the free-boundary family."""
        return 1.0 if self.variant == "dirichlet" else -1.0

    @property
    def normalised(self):
        return self.variant in ("neumann", "wedge")

    @property
    def _disk(self):
        t = float(self.rho[1])
        return complex(0.0, math.sqrt(t) + 1.0), 1.0 / math.sqrt(math.pi)

    def rho_potential(self, w):
        """``P(w) = int rho(x) G(x, w) dx`` (zero for unnormalised variants)."""
        w = np.asarray(w, dtype=complex)
        if not self.normalised:
            return np.zeros(w.shape)
        kind, param = self.rho
        if kind == "semicircle":
            return -2.0 * np.log(np.maximum(np.abs(w), param))
        c, r = self._disk
        wu = np.where(w.imag < 0, np.conj(w), w)
        dist = np.abs(wu - c)
        inside = -math.log(r) + 0.5 * (1.0 - (dist / r) ** 2)
        U = np.where(dist >= r, -np.log(np.maximum(dist, 1e-300)), inside)
        return U - np.log(np.abs(wu - np.conj(c)))

    @property
    def rho_energy(self):
        """``E = int int rho rho G``."""
        if not self.normalised:
            return 0.0
        kind, param = self.rho
        if kind == "semicircle":
            return -2.0 * math.log(param)
        c, r = self._disk
        return -math.log(r) + 0.25 - math.log(2.0 * c.imag)

    def mean(self, z):
        """Pointwise mean of the field (only the wedge has one)."""
        z = np.asarray(z, dtype=complex)
        if self.variant != "wedge" or self.alpha == 0.0:
            return np.zeros(z.shape)
        return -self.alpha * np.log(np.abs(z))

    def khat_limit(self, z, regime="bulk"):
        """Closed-form finite part of the circle-average variance.

        Bulk uses ``Var + log eps``, boundary uses ``Var + 2 log eps``.
        """
        if self.mollifier != "circle":
            raise UnsupportedParameterError("closed-form K-hat needs circle averages")
        z = np.asarray(z, dtype=complex)
        if regime == "bulk":
            base = np.log(2.0 * z.imag)
            val = base if self.variant == "dirichlet" else -base
        elif regime == "boundary":
            if self.variant == "dirichlet":
                raise DomainError("Dirichlet boundary pairings have no log divergence")
            val = np.zeros(z.shape)
        else:
            raise ValueError(f"unknown regime {regime!r}")
        if self.normalised:
            val = val - 2.0 * self.rho_potential(z) + self.rho_energy
        return val

    def to_dict(self):
        return {"variant": self.variant, "rho": list(self.rho), "alpha": self.alpha,
                "gamma": self.gamma, "n_nodes": self.n_nodes, "mollifier": self.mollifier}


def kernel(model, z, w):
    """Exact covariance kernel ``K(z, w)``.

    Examples
    --------
    >>> round(kernel(CovarianceModel.dirichlet(), 1j, 2j), 5)
    1.09861
    """
    z = complex(z)
    w = complex(w)
    if z == w:
        raise DiagonalSingularityError(f"kernel evaluated on the diagonal at {z}")
    if z.imag < 0 or w.imag < 0:
        raise DomainError("kernel points must lie in the closed upper half-plane")
    if model.variant == "wedge":
        for p in (z, w):
            if abs(p) > model.window_radius * (1 + 1e-12):
                raise DomainError("wedge kernel is only available inside the window")
    d = abs(z - w)
    dbar = abs(z - w.conjugate())
    if model.variant == "dirichlet":
        return -math.log(d) + math.log(dbar)
    val = -math.log(d) - math.log(dbar)
    if model.normalised:
        val += -float(model.rho_potential(z)) - float(model.rho_potential(w)) + model.rho_energy
    return val


# ---------------------------------------------------------------------------
# probes

class ChainPullback:
    """Conformal map ``phi_a^b`` of a :class:`~slezip.loewner.MapChain` used as a pullback."""

    def __init__(self, chain, a, b):
        self.chain = chain
        self.a = float(a)
        self.b = float(b)

    def __call__(self, w):
        try:
            return self.chain.phi(self.a, self.b, w)
        except PointInHullError as exc:
            raise DomainError(f"probe outside the map domain: {exc}") from exc

    def near_hull(self, w):
        if self.a >= self.b:
            return np.zeros(np.shape(w), bool)
        m, n = self.chain.index(self.a), self.chain.index(self.b)
        return self.chain.near_hull(np.asarray(w) + self.chain.W[m], m, n)

    def describe(self):
        return {"map": "chain", "from": self.a, "to": self.b}


class ScalingMap:
    """The map ``w -> lam * w``."""

    def __init__(self, lam):
        self.lam = check_positive(lam, "lam")

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        return self.lam * w, np.full(w.shape, complex(self.lam))

    def describe(self):
        return {"map": "scaling", "lam": self.lam}


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Probe centres, scales and regimes, optionally pulled back by a map.

    With ``pullback = phi`` the pairings are those of ``h o phi`` (plus
    ``q_offset * log|phi'|`` in the mean) against probes drawn at ``centers``.
    """

    centers: np.ndarray
    scales: np.ndarray
    regimes: np.ndarray
    pullback: object = None
    q_offset: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=complex))
        s = np.broadcast_to(np.asarray(self.scales, dtype=float), c.shape).copy()
        r = np.broadcast_to(np.asarray(self.regimes), c.shape).copy()
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise InvalidGridError("probe scales must be positive")
        bnd = r == "boundary"
        if not np.all(bnd | (r == "bulk")):
            raise InvalidGridError("regimes must be 'bulk' or 'boundary'")
        if np.any(c[bnd].imag != 0):
            raise DomainError("boundary probes must sit on the real line")
        if np.any(c[~bnd].imag - s[~bnd] < -1e-12 * s[~bnd]):
            raise DomainError("bulk probes need Im z >= eps")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "regimes", r)

    @classmethod
    def bulk(cls, centers, scales, **kw):
        c = np.atleast_1d(np.asarray(centers, complex))
        return cls(c, scales, np.full(c.shape, "bulk"), **kw)

    @classmethod
    def boundary(cls, points, scales, **kw):
        c = np.atleast_1d(np.asarray(points, float)).astype(complex)
        return cls(c, scales, np.full(c.shape, "boundary"), **kw)

    def __len__(self):
        return self.centers.size

    @property
    def is_boundary(self):
        return self.regimes == "boundary"

    def with_pullback(self, pullback, q_offset=0.0):
        return replace(self, pullback=pullback, q_offset=float(q_offset))

    def subset(self, idx):
        return ProbeSet(self.centers[idx], self.scales[idx], self.regimes[idx],
                        self.pullback, self.q_offset)

    def matches(self, other, rtol=1e-12):
        return (len(self) == len(other)
                and np.allclose(self.centers, other.centers, rtol=rtol, atol=0)
                and np.allclose(self.scales, other.scales, rtol=rtol, atol=0)
                and np.array_equal(self.regimes, other.regimes))


def _rings(model, probes):
    """Ring decomposition: centres, radii, half flags, weights, owner index."""
    if model.mollifier == "circle":
        rad = probes.scales.copy()
        wts = np.ones(len(probes))
        owner = np.arange(len(probes))
        cen = probes.centers.copy()
        half = probes.is_boundary.copy()
    else:
        # radial bump (1 - (r/eps)^2)^2 as a mixture of rings
        x, gw = np.polynomial.legendre.leggauss(_BUMP_RINGS)
        frac = 0.5 * (x + 1.0)
        dens = gw * frac * (1.0 - frac ** 2) ** 2
        dens /= dens.sum()
        n = len(probes)
        owner = np.repeat(np.arange(n), _BUMP_RINGS)
        rad = (probes.scales[:, None] * frac[None, :]).ravel()
        wts = np.tile(dens, n)
        cen = probes.centers[owner]
        half = probes.is_boundary[owner]
    return cen, rad, half, wts, owner


def _ring_nodes(cen, rad, half, wts, m):
    k = (np.arange(m) + 0.5) / m
    span = np.where(half, math.pi, 2.0 * math.pi)
    th = span[:, None] * k[None, :]
    u = cen[:, None] + rad[:, None] * np.exp(1j * th)
    return u, np.repeat(wts[:, None] / m, m, axis=1)


def _aggregate(pair, wts, owner, n):
    A = np.zeros((owner.size, n))
    A[np.arange(owner.size), owner] = wts
    return A.T @ pair @ A


def repair_psd(M, tol):
    """Clip small negative eigenvalues; returns (matrix, number clipped)."""
    if M.size == 0:
        return M, 0
    M = 0.5 * (M + M.T)
    lam, V = np.linalg.eigh(M)
    floor = -tol * max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < floor:
        raise ModelError(f"covariance not PSD: min eigenvalue {lam[0]:.3g}")
    neg = lam < 0
    n_clip = int(np.count_nonzero(neg))
    if n_clip:
        warnings.warn(f"clipped {n_clip} negative eigenvalue(s) >= {lam[0]:.2e}",
                      RuntimeWarning, stacklevel=3)
        lam = np.where(neg, 0.0, lam)
        M = (V * lam) @ V.T
    return M, n_clip


def _check_window(model, u):
    if model.variant == "wedge" and np.any(np.abs(u) > model.window_radius * (1 + 1e-12)):
        raise DomainError("wedge probes must stay inside the unit half-disk")


def _covariance_parts(model, probes, m):
    n = len(probes)
    cen, rad, half, wts, owner = _rings(model, probes)
    bnd = probes.is_boundary
    if probes.pullback is None:
        fam = "D" if model.variant == "dirichlet" else "G"
        pair = quad.pair_matrix((cen, rad, half), (cen, rad, half), fam, symmetric=True)
        M = _aggregate(pair, wts, owner, n)
        if model.normalised or model.variant == "wedge":
            u, w = _ring_nodes(cen, rad, half, wts, _P_NODES)
            _check_window(model, u)
            Pbar = np.bincount(owner, (w * model.rho_potential(u)).sum(axis=1), minlength=n)
            M = M - Pbar[:, None] - Pbar[None, :] + model.rho_energy
        return M
    u, w = _ring_nodes(cen, rad, half, wts, m)
    a, da = probes.pullback(u.ravel())
    a = np.asarray(a, complex)
    da = np.asarray(da, complex)
    if np.any(~np.isfinite(a)) or np.any(a.imag <= 0):
        raise DomainError("mapped probe nodes left the upper half-plane")
    _check_window(model, a)
    # exact averages of the singular part: free family for boundary pairs
    bring = bnd[owner]
    pair = np.empty((cen.size, cen.size))
    idx = np.nonzero(bring)[0]
    jdx = np.nonzero(~bring)[0]
    if idx.size:
        pair[np.ix_(idx, idx)] = quad.pair_matrix((cen[idx], rad[idx], half[idx]),
                                                  (cen[idx], rad[idx], half[idx]), "G",
                                                  symmetric=True)
    if jdx.size:
        rows = quad.pair_matrix((cen[jdx], rad[jdx], half[jdx]), (cen, rad, half), "N")
        pair[jdx, :] = rows
        pair[:, jdx] = rows.T
    M = _aggregate(pair, wts, owner, n)
    # node ranges per probe (rings of one probe are contiguous)
    counts = np.bincount(owner, minlength=n) * m
    stop = np.cumsum(counts)
    start = stop - counts
    M = M + quad.mapped_pair_sums(u.ravel(), a, da, w.ravel(), start.astype(np.int64),
                                  stop.astype(np.int64), bnd, model.reflect_sign)
    if model.normalised:
        P = model.rho_potential(a)
        Pbar = np.bincount(np.repeat(owner, m), w.ravel() * P, minlength=n)
        M = M - Pbar[:, None] - Pbar[None, :] + model.rho_energy
    return M


def probe_covariance(model, probes, tol=None, return_info=False):
    """Covariance matrix of the probe pairings.

    Parameters
    ----------
    model : CovarianceModel
    probes : ProbeSet
    tol : float, optional
        If given, the diagonal is recomputed with half the nodes and a
        :class:`ResolutionError` is raised when it moves by more than ``tol``.
    return_info : bool
        Also return a dict with the number of clipped eigenvalues.
    """
    n = len(probes)
    if n == 0:
        M = np.zeros((0, 0))
        return (M, {"clipped": 0}) if return_info else M
    m = int(model.n_nodes)
    M = _covariance_parts(model, probes, m)
    if tol is not None and probes.pullback is not None:
        coarse = np.array([_covariance_parts(model, probes.subset([i]), m // 2)[0, 0]
                           for i in range(n)])
        drift = np.max(np.abs(coarse - np.diag(M)))
        if drift > tol:
            raise ResolutionError(f"probe variance moved by {drift:.3g} under node refinement")
    M, n_clip = repair_psd(M, model.psd_tol)
    return (M, {"clipped": n_clip}) if return_info else M


def probe_means(model, probes):
    """Mean of each probe pairing, including ``q_offset * log|phi'|`` for pullbacks."""
    n = len(probes)
    if n == 0:
        return np.zeros(0)
    cen, rad, half, wts, owner = _rings(model, probes)
    if probes.pullback is None:
        if model.variant != "wedge" or model.alpha == 0.0:
            return np.zeros(n)
        # log|.| is harmonic off 0 and even under reflection: exact ring mean
        ring_mean = -model.alpha * np.log(np.maximum(np.abs(cen), rad))
        return np.bincount(owner, wts * ring_mean, minlength=n)
    m = int(model.n_nodes)
    u, w = _ring_nodes(cen, rad, half, wts, m)
    a, da = probes.pullback(u.ravel())
    vals = model.mean(a) + probes.q_offset * np.log(np.abs(da))
    return np.bincount(np.repeat(owner, m), w.ravel() * vals, minlength=n)


def _mapped_nodes(model, probes, m):
    cen, rad, half, wts, owner = _rings(model, probes)
    u, w = _ring_nodes(cen, rad, half, wts, m)
    u = u.ravel()
    if probes.pullback is None:
        a = u
    else:
        a = np.asarray(probes.pullback(u)[0], complex)
    counts = np.bincount(owner, minlength=len(probes)) * m
    stop = np.cumsum(counts).astype(np.int64)
    return a, w.ravel(), (stop - counts).astype(np.int64), stop


def joint_covariance(model, probe_sets, tol=None):
    """Joint covariance and means of several probe sets paired with one field.

    Each set may carry its own pullback. Diagonal blocks are computed as in
    :func:`probe_covariance`; cross blocks by node quadrature in the field's
    own coordinates, which assumes the node sets of different blocks do not
    coincide.
    """
    sizes = [len(p) for p in probe_sets]
    n = sum(sizes)
    M = np.zeros((n, n))
    means = np.zeros(n)
    m = int(model.n_nodes)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    nodes = []
    for k, ps in enumerate(probe_sets):
        sl = slice(offs[k], offs[k + 1])
        if sizes[k]:
            M[sl, sl] = _covariance_parts(model, ps, m)
            means[sl] = probe_means(model, ps)
        nodes.append(_mapped_nodes(model, ps, m) if sizes[k] else None)
    for i in range(len(probe_sets)):
        for j in range(i + 1, len(probe_sets)):
            if not sizes[i] or not sizes[j]:
                continue
            a, wa, sa, ea = nodes[i]
            b, wb, sb, eb = nodes[j]
            C = quad.cross_pair_sums(a, wa, sa, ea, b, wb, sb, eb, model.reflect_sign)
            if model.normalised:
                Pa = np.add.reduceat(wa * model.rho_potential(a), sa)
                Pb = np.add.reduceat(wb * model.rho_potential(b), sb)
                C = C - Pa[:, None] - Pb[None, :] + model.rho_energy
            M[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = C
            M[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = C.T
    M, _ = repair_psd(M, model.psd_tol if tol is None else tol)
    return M, means


# ---------------------------------------------------------------------------
# sampling

@dataclass(frozen=True, eq=False)
class FieldSample:
    """Pairings ``(theta_i, h)``; ``values`` has shape ``(n,)`` or ``(replicates, n)``."""

    probes: ProbeSet
    values: np.ndarray
    seed: object = None
    means: np.ndarray = None

    @property
    def n_replicates(self):
        return 1 if self.values.ndim == 1 else self.values.shape[0]


def gaussian_factor(cov, tol=1e-6):
    """Symmetric square-root factor ``L`` with ``L @ L.T == cov`` (eigh based)."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.size == 0:
        return cov
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise ModelError("covariance matrix is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (cov + cov.T))
    floor = -tol * max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < floor:
        raise ModelError(f"covariance not PSD: min eigenvalue {lam[0]:.3g}")
    return V * np.sqrt(np.clip(lam, 0.0, None))


def sample_probes(cov, means, seed, size=None, probes=None, factor=None):
    """Draw the probe pairings as a Gaussian vector.

    ``size=None`` gives one realisation; an integer gives that many rows.
    """
    means = np.atleast_1d(np.asarray(means, dtype=float))
    L = gaussian_factor(cov) if factor is None else factor
    if L.shape[0] != means.size:
        raise ModelError("mean and covariance sizes differ")
    rng = as_rng(seed)
    k = 1 if size is None else int(size)
    xi = rng.standard_normal((k, means.size))
    vals = means[None, :] + xi @ L.T
    if size is None:
        vals = vals[0]
    return FieldSample(probes, vals, seed, means)


def khat(model, z, regime="bulk", eps_schedule=(1e-2, 5e-3), tol=5e-3,
         return_diagnostics=False):
    """Finite part ``Var(theta_z^eps, h) + n log eps`` over a scale schedule.

    ``n = 1`` in the bulk and ``n = 2`` on the boundary. Raises
    :class:`ScheduleTooCoarseError` when the last two estimates differ by
    ``tol`` or more.
    """
    eps = check_schedule(eps_schedule)
    n = 1 if regime == "bulk" else 2
    z = complex(z)
    est = []
    for e in eps:
        probes = (ProbeSet.bulk([z], [e]) if regime == "bulk"
                  else ProbeSet.boundary([z.real], [e]))
        var = _covariance_parts(model, probes, int(model.n_nodes))[0, 0]
        est.append(var + n * math.log(e))
    est = np.asarray(est)
    converged = bool(abs(est[-1] - est[-2]) < tol)
    if not converged:
        raise ScheduleTooCoarseError(
            f"K-hat estimates {est[-2]:.6g}, {est[-1]:.6g} differ by more than {tol}")
    if return_diagnostics:
        return float(est[-1]), {"estimates": est, "converged": converged}
    return float(est[-1])


# ---------------------------------------------------------------------------
# radial part of the wedge

@dataclass(frozen=True)
class RadialPath:
    """Radial process ``A_t`` sampled on a grid of log-radius times."""

    t: np.ndarray
    values: np.ndarray
    alpha: float = 0.0
    gamma: float = math.sqrt(2.0)

    def at(self, t):
        return np.interp(t, self.t, self.values)


def wedge_radial_path(alpha, gamma, t_grid, seed, delta=1e-3, max_tries=1_000_000,
                      size=None):
    """Sample ``A_t = B_{2t} + alpha t`` (t > 0) and the conditioned branch (t < 0).

    The negative branch starts a drifted Brownian motion at ``delta`` and keeps
    only paths with ``A_t - Q t > 0`` on the grid.
    """
    Q = q_charge(gamma)
    alpha = float(alpha)
    if not alpha < Q:
        raise UnsupportedParameterError(f"alpha must be < Q = {Q:.6g}, got {alpha}")
    t = np.unique(np.concatenate([np.asarray(t_grid, float).ravel(), [0.0]]))
    rng = as_rng(seed)
    k = 1 if size is None else int(size)
    out = np.zeros((k, t.size))
    i0 = int(np.searchsorted(t, 0.0))
    tp = t[i0:]
    if tp.size > 1:
        dt = np.diff(tp)
        incr = rng.standard_normal((k, dt.size)) * np.sqrt(2.0 * dt) + alpha * dt
        out[:, i0 + 1:] = np.cumsum(incr, axis=1)
    if i0 > 0:
        u = -t[:i0][::-1]
        du = np.diff(np.concatenate([[0.0], u]))
        drift = Q - alpha
        accepted = []
        tries = 0
        while len(accepted) < k:
            batch = max(64, 4 * (k - len(accepted)))
            tries += batch
            if tries > max_tries:
                raise UnsupportedParameterError(
                    "conditioned radial branch: rejection budget exhausted")
            y = delta + np.cumsum(rng.standard_normal((batch, u.size)) * np.sqrt(2.0 * du)
                                  + drift * du, axis=1)
            ok = np.all(y > 0, axis=1)
            accepted.extend(y[ok][: k - len(accepted)])
        y = np.asarray(accepted)
        # A_t - Q t = y  with t = -u
        out[:, :i0] = (y - Q * u[None, :])[:, ::-1]
    vals = out[0] if size is None else out
    return RadialPath(t, vals, alpha, float(gamma))


def markov_split_covariance(model, chain, s, probes):
    """Covariance of the harmonic part ``C`` in ``h = h' + C`` after removing the hull at ``s``.

    ``Cov(C) = Cov(h) - Cov(h' )``, where ``h'`` is the Dirichlet field of the
    slit domain, i.e. ``h o phi_0^s`` in law.
    """
    if model.variant != "dirichlet":
        raise UnsupportedParameterError("the domain Markov split is defined for the Dirichlet field")
    if probes.pullback is not None:
        raise DomainError("probes must be given in the original domain")
    n = len(probes)
    m0 = chain.index(s)
    if n == 0 or m0 == 0:
        return np.zeros((n, n))
    pull = ChainPullback(chain, 0.0, s)
    cen, rad, half, wts, _ = _rings(model, probes)
    u, _ = _ring_nodes(cen, rad, half, wts, int(model.n_nodes))
    if np.any(pull.near_hull(u.ravel())):
        raise DomainError("probe touches the hull")
    M_full = _covariance_parts(model, probes, int(model.n_nodes))
    M_sub = _covariance_parts(model, probes.with_pullback(pull), int(model.n_nodes))
    M, _ = repair_psd(M_full - M_sub, model.psd_tol)
    return M
