"""Small input-validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np

from .errors import InvalidGridError, UnsupportedParameterError


def check_kappa(kappa):
    kappa = float(kappa)
    if not np.isfinite(kappa) or kappa < 0:
        raise UnsupportedParameterError(f"kappa must be finite and >= 0, got {kappa}")
    if kappa >= 4:
        raise UnsupportedParameterError(
            f"kappa must be < 4 (simple curves only), got {kappa}")
    return kappa


def check_positive(value, name, error=InvalidGridError):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise error(f"{name} must be a finite positive number, got {value}")
    return value


def check_seed(seed):
    if isinstance(seed, (np.random.SeedSequence, np.random.Generator)):
        return seed
    if not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def as_rng(seed):
    """Return a numpy Generator from an int seed, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(check_seed(seed))


def check_schedule(eps_schedule, min_len=2, name="eps_schedule"):
    """Validate a strictly decreasing sequence of positive scales."""
    eps = np.asarray(eps_schedule, dtype=float).ravel()
    if eps.size < min_len:
        raise InvalidGridError(f"{name} needs at least {min_len} entries, got {eps.size}")
    if np.any(~np.isfinite(eps)) or np.any(eps <= 0):
        raise InvalidGridError(f"{name} entries must be finite and positive")
    if np.any(np.diff(eps) >= 0):
        raise InvalidGridError(f"{name} must be strictly decreasing")
    return eps


def as_complex_array(z):
    arr = np.asarray(z)
    return np.atleast_1d(arr.astype(complex)), arr.ndim == 0


def q_charge(gamma):
    """Liouville coordinate-change charge Q = gamma/2 + 2/gamma."""
    gamma = float(gamma)
    if gamma <= 0:
        raise UnsupportedParameterError(f"gamma must be positive, got {gamma}")
    return gamma / 2.0 + 2.0 / gamma
