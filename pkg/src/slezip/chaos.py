"""Gaussian multiplicative chaos on atomic reference measures."""

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np

from .errors import AlignmentError, InvalidGridError, SubcriticalViolationError, UnsupportedParameterError
from .fields import ProbeSet, khat, probe_covariance, probe_means, sample_probes
from .validation import check_schedule, q_charge


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Weighted atoms on a curve (complex positions) or on the real line.

    ``weights`` may be two-dimensional, ``(replicates, atoms)``, for a batch of
    independent realisations sharing positions.
    """

    positions: np.ndarray
    weights: np.ndarray
    d: float = 1.0
    support: str = "boundary"
    scale: float = None
    tags: np.ndarray = None

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions))
        pos = pos.astype(float) if self.support == "boundary" and not np.iscomplexobj(pos) else pos
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 0:
            w = np.full(pos.shape, float(w))
        if w.shape[-1] != pos.size:
            raise InvalidGridError("one weight per atom required")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidGridError("atom weights must be finite and non-negative")
        if self.support not in ("boundary", "curve"):
            raise InvalidGridError(f"unknown support {self.support!r}")
        if self.support == "boundary" and np.any(np.diff(np.real(pos)) < 0):
            raise InvalidGridError("boundary atoms must be sorted")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.positions.size

    @classmethod
    def lebesgue(cls, a, b, spacing):
        """Midpoint atoms of Lebesgue measure on ``[a, b]``."""
        n = max(1, int(math.floor((b - a) / spacing + 1e-9)))
        h = (b - a) / n
        x = a + h * (np.arange(n) + 0.5)
        return cls(x, np.full(n, h), d=1.0, support="boundary", tags=x)

    def total_mass(self):
        return self.weights.sum(axis=-1)

    def restrict(self, mask):
        tags = None if self.tags is None else self.tags[mask]
        return replace(self, positions=self.positions[mask], weights=self.weights[..., mask],
                       tags=tags)

    def segment_masses(self, edges, key=None):
        """Masses of the segments ``[edges[k], edges[k+1])`` of the tag (or position) axis."""
        key = np.real(self.tags if key is None and self.tags is not None
                      else (self.positions if key is None else key))
        idx = np.searchsorted(np.asarray(edges, float), key, side="right") - 1
        nseg = len(edges) - 1
        ok = (idx >= 0) & (idx < nseg)
        w = np.atleast_2d(self.weights)
        out = np.zeros((w.shape[0], nseg))
        for r in range(w.shape[0]):
            out[r] = np.bincount(idx[ok], w[r, ok], minlength=nseg)
        return out if self.weights.ndim == 2 else out[0]

    def scaled(self, factor):
        return replace(self, weights=self.weights * factor)


@dataclass(frozen=True)
class GmcSpec:
    """Chaos parameter, regime and scale schedule.

    ``d`` is the dimension of the reference measure. The subcritical range is
    ``gamma_tilde < sqrt(2 d / n)`` with ``n = 1`` (bulk) or ``n = 2`` (boundary).
    """

    gamma_tilde: float
    regime: str = "boundary"
    eps_schedule: tuple = (1e-1, 1e-2, 1e-3)
    d: float = 1.0

    def __post_init__(self):
        if self.regime not in ("bulk", "boundary"):
            raise UnsupportedParameterError(f"unknown regime {self.regime!r}")
        g = float(self.gamma_tilde)
        if not math.isfinite(g) or g < 0:
            raise SubcriticalViolationError(f"gamma_tilde must be >= 0, got {g}")
        if not g < self.critical:
            raise SubcriticalViolationError(
                f"gamma_tilde={g} is not below the critical value {self.critical:.6g}")
        object.__setattr__(self, "eps_schedule", tuple(check_schedule(self.eps_schedule, 1)))

    @property
    def n(self):
        return 1 if self.regime == "bulk" else 2

    @property
    def critical(self):
        return math.sqrt(2.0 * self.d / self.n)

    @property
    def eps(self):
        return self.eps_schedule[-1]

    def renorm(self, eps):
        """``eps ** (gamma_tilde**2 n / 2)``."""
        return eps ** (0.5 * self.gamma_tilde ** 2 * self.n)


def atom_probes(reference, eps, regime):
    pos = np.asarray(reference.positions)
    if regime == "boundary":
        return ProbeSet.boundary(np.real(pos), eps)
    return ProbeSet.bulk(pos, eps)


def _check_alignment(reference, pairings, eps):
    probes = pairings.probes
    if probes is None:
        if np.shape(pairings.values)[-1] != len(reference):
            raise AlignmentError("one pairing per atom required")
        return
    if len(probes) != len(reference) or not np.allclose(
            probes.centers, np.asarray(reference.positions, complex), rtol=0, atol=1e-12):
        raise AlignmentError("probe centres do not coincide with the atoms")
    if eps is not None and not np.allclose(probes.scales, eps, rtol=1e-12):
        raise AlignmentError("probe scales differ from the chaos scale")


def gmc_measure(reference, pairings, spec, eps=None):
    """Multiply atom weights by ``exp(gamma_tilde X) eps**(gamma_tilde**2 n / 2)``.

    Examples
    --------
    >>> ref = AtomicMeasure.lebesgue(0.0, 1.0, 0.25)
    >>> from slezip.fields import FieldSample
    >>> out = gmc_measure(ref, FieldSample(None, np.zeros(4)), GmcSpec(0.0), eps=0.1)
    >>> bool(np.allclose(out.weights, ref.weights))
    True
    """
    eps = spec.eps if eps is None else float(eps)
    _check_alignment(reference, pairings, eps)
    g = spec.gamma_tilde
    factor = np.exp(g * np.asarray(pairings.values)) * spec.renorm(eps)
    return replace(reference, weights=reference.weights * factor, scale=eps)


def recover_reference(chaos, pairings, spec, eps=None):
    """Exact inverse of :func:`gmc_measure` at a fixed scale."""
    eps = spec.eps if eps is None else float(eps)
    _check_alignment(chaos, pairings, eps)
    g = spec.gamma_tilde
    factor = np.exp(-g * np.asarray(pairings.values)) / spec.renorm(eps)
    return replace(chaos, weights=chaos.weights * factor, scale=eps)


def multiscale_pairings(reference, model, spec, seed, replicates=None):
    """Joint pairings of every atom at every scale of the schedule (nested probes)."""
    eps = spec.eps_schedule
    pos = np.asarray(reference.positions)
    if spec.regime == "boundary":
        probes = ProbeSet.boundary(np.tile(np.real(pos), len(eps)), np.repeat(eps, pos.size))
    else:
        probes = ProbeSet.bulk(np.tile(pos, len(eps)), np.repeat(eps, pos.size))
    cov = probe_covariance(model, probes)
    mean = probe_means(model, probes)
    sample = sample_probes(cov, mean, seed, size=replicates, probes=probes)
    vals = sample.values.reshape(sample.values.shape[:-1] + (len(eps), pos.size))
    return vals


@dataclass(frozen=True)
class ConvergenceReport:
    scales: tuple
    total_mass: np.ndarray
    atom_change: np.ndarray
    mass_change: np.ndarray
    converged: bool


def gmc_converged(reference, model, spec, seed, replicates=None, tol=0.05):
    """Chaos at the finest scale plus Cauchy diagnostics across the schedule.

    The flag compares the total mass at the last two scales (median relative
    change over replicates below ``tol``). Per-atom relative changes are
    reported as well; single atoms keep fluctuating at every scale.
    """
    if len(spec.eps_schedule) < 3:
        raise InvalidGridError("gmc_converged needs at least three scales")
    vals = multiscale_pairings(reference, model, spec, seed, replicates)
    w = [reference.weights * np.exp(spec.gamma_tilde * vals[..., k, :]) * spec.renorm(e)
         for k, e in enumerate(spec.eps_schedule)]
    masses = np.stack([x.sum(axis=-1) for x in w], axis=-1)
    atom_change = np.abs(w[-1] - w[-2]) / np.maximum(w[-2], 1e-300)
    mass_change = np.abs(masses[..., -1] - masses[..., -2]) / masses[..., -2]
    converged = bool(np.median(mass_change) < tol)
    if not converged:
        warnings.warn(f"chaos not Cauchy: median mass change {np.median(mass_change):.3g}",
                      RuntimeWarning, stacklevel=2)
    measure = replace(reference, weights=w[-1], scale=spec.eps)
    return measure, ConvergenceReport(spec.eps_schedule, masses, atom_change, mass_change,
                                      converged)


def expected_mass(model, reference, spec, region=None, eps=None):
    """Deterministic ``sum_atoms weight * exp(gamma_tilde**2 / 2 * Khat(atom))``.

    ``region`` is an optional boolean mask or a callable on positions. With
    ``eps`` given the exact finite-scale variance is used instead of the limit.
    """
    ref = reference
    if region is not None:
        mask = region(ref.positions) if callable(region) else np.asarray(region, bool)
        ref = ref.restrict(mask)
    if len(ref) == 0:
        return 0.0
    g = spec.gamma_tilde
    if g == 0.0:
        return float(ref.weights.sum())
    if eps is not None:
        probes = atom_probes(ref, eps, spec.regime)
        var = np.diag(probe_covariance(model, probes))
        kh = var + spec.n * math.log(eps)
        mean = probe_means(model, probes)
        return float(np.sum(ref.weights * np.exp(0.5 * g * g * kh + g * mean)))
    try:
        kh = model.khat_limit(np.asarray(ref.positions, complex), spec.regime)
    except UnsupportedParameterError:
        kh = np.array([khat(model, z, spec.regime, spec.eps_schedule[-2:])
                       for z in np.asarray(ref.positions, complex)])
    probes = atom_probes(ref, spec.eps, spec.regime)
    mean = probe_means(model, probes)
    return float(np.sum(ref.weights * np.exp(0.5 * g * g * kh + g * mean)))


@dataclass(frozen=True)
class MomentReport:
    estimate: float
    tail_index: float
    heavy_tail: bool
    k: int


def hill_tail_index(x, k=None):
    """Hill estimator of the tail index from the ``k`` largest values."""
    x = np.sort(np.asarray(x, float))[::-1]
    n = x.size
    k = int(math.floor(math.sqrt(n))) if k is None else int(k)
    k = max(1, min(k, n - 1))
    if x[k] <= 0:
        return float("nan")
    h = np.mean(np.log(x[:k] / x[k]))
    return math.inf if h == 0 else 1.0 / h


def moment_estimate(masses, m, k=None):
    """Empirical ``m``-th moment and a Hill tail-index diagnostic.

    The heavy-tail flag is raised when the estimated tail index is below ``m``
    (the ``m``-th moment is then not trustworthy).
    """
    x = np.asarray(masses, float).ravel()
    if x.size < 2:
        raise InvalidGridError("need at least two replicate masses")
    if x.size < 1000:
        warnings.warn("moment diagnostics need >= 1000 replicates", RuntimeWarning, stacklevel=2)
    est = float(np.mean(x ** m))
    alpha = hill_tail_index(x, k)
    kk = int(math.floor(math.sqrt(x.size))) if k is None else int(k)
    return MomentReport(est, alpha, bool(alpha < m), kk)


def exponent_lebesgue(gamma):
    """Exponent of ``|phi'|`` for boundary length: ``gamma**2/4 - gamma Q/2 + 1``."""
    return gamma ** 2 / 4.0 - gamma / 2.0 * q_charge(gamma) + 1.0


def exponent_curve(gamma):
    """Exponent for the curve measure: ``gamma**2/8 - gamma Q/2 + 1 + gamma**2/8``."""
    return gamma ** 2 / 8.0 - gamma / 2.0 * q_charge(gamma) + 1.0 + gamma ** 2 / 8.0


@dataclass(frozen=True)
class InvarianceReport:
    eps: float
    statistic: float
    log_ratios: np.ndarray
    exponent: float


def invariance_check(lam, model, gamma, spec, interval=(1.0, 2.0), bins=4, replicates=16,
                     seed=0, eps=None, mode="matched"):
    """Boundary-length invariance under ``phi(z) = lam z``.

    Side B is the chaos of ``h`` on Lebesgue atoms of ``interval`` at scale
    ``eps``. Side A is the chaos of ``h' = h o phi^{-1} + Q log|(phi^{-1})'|``
    on the image atoms, pulled back by ``phi``.

    Parameters
    ----------
    mode : {"matched", "own"}
        ``"matched"`` pairs ``h'`` at the image scale ``eps |phi'|`` and
        reports the median per-atom ``|log(A / B)|``; for a scaling map this
        is zero up to rounding, by the exponent identity. ``"own"`` pairs
        ``h'`` at scale ``eps`` in its own coordinates, bins both sides on
        ``bins`` equal sub-intervals and reports the median over bins and
        replicates; it tends to 0 with ``eps``.
    """
    if not math.isclose(spec.gamma_tilde, gamma / 2.0, rel_tol=1e-12):
        raise SubcriticalViolationError("invariance check needs gamma_tilde = gamma / 2")
    if spec.regime != "boundary":
        raise UnsupportedParameterError("invariance check is implemented for boundary length")
    if mode not in ("matched", "own"):
        raise UnsupportedParameterError(f"unknown mode {mode!r}")
    lam = float(lam)
    eps = spec.eps if eps is None else float(eps)
    Q = q_charge(gamma)
    g = spec.gamma_tilde
    a, b = interval
    if mode == "matched":
        ref = AtomicMeasure.lebesgue(a, b, 2.0 * eps)
        x = np.asarray(ref.positions)
        probes = ProbeSet.boundary(x, eps)
        cov = probe_covariance(model, probes)
        mean = probe_means(model, probes)
        vals = sample_probes(cov, mean, seed, size=replicates, probes=probes).values
        # h' paired at (lam x, lam eps) is h paired at (x, eps) minus Q log lam
        w_b = ref.weights * np.exp(g * vals) * spec.renorm(eps)
        w_a = (lam * ref.weights) * np.exp(g * (vals - Q * math.log(lam))) * spec.renorm(lam * eps)
        lr = np.log(w_a / w_b)
        return InvarianceReport(eps, float(np.median(np.abs(lr))), lr, exponent_lebesgue(gamma))
    ref = AtomicMeasure.lebesgue(a, b, 2.0 * max(eps, eps / lam))
    x = np.asarray(ref.positions)
    # h' paired at (lam x, eps) equals h paired at (x, eps/lam) minus Q log lam
    probes = ProbeSet.boundary(np.concatenate([x, x]),
                               np.concatenate([np.full(x.size, eps), np.full(x.size, eps / lam)]))
    cov = probe_covariance(model, probes)
    mean = probe_means(model, probes)
    vals = sample_probes(cov, mean, seed, size=replicates, probes=probes).values
    w_b = ref.weights * np.exp(g * vals[:, : x.size]) * spec.renorm(eps)
    w_a = lam * ref.weights * np.exp(g * (vals[:, x.size:] - Q * math.log(lam))) * spec.renorm(eps)
    edges = np.linspace(a, b, bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    A = np.stack([np.bincount(idx, r, minlength=bins) for r in w_a])
    B = np.stack([np.bincount(idx, r, minlength=bins) for r in w_b])
    lr = np.log(A / B)
    return InvarianceReport(eps, float(np.median(np.abs(lr))), lr, exponent_lebesgue(gamma))
