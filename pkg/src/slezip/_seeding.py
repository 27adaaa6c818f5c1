"""Counter-mode seed derivation (splitmix64)."""

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z):
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def seed_for(base_seed, replicate):
    """64-bit seed of replicate ``replicate`` under ``base_seed``.

    ``k -> mix(base) + k * GOLDEN`` is injective modulo 2**64 (GOLDEN is odd)
    and the splitmix64 finaliser is a bijection, so seeds never collide
    within one base seed.

    Examples
    --------
    >>> seed_for(1, 0) == seed_for(1, 0), seed_for(1, 0) != seed_for(1, 1)
    (True, True)
    """
    if int(base_seed) < 0 or int(replicate) < 0:
        raise ValueError("seeds and replicate indices must be non-negative")
    start = _mix(int(base_seed) & MASK)
    return _mix((start + int(replicate) * GOLDEN) & MASK)
