"""Deterministic master-seed fan-out for campaign runs."""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given state (64-bit wraparound)."""
    z = (state + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def fanout(master_seed: int, index: int) -> int:
    """Seed for run `index` of a campaign keyed by `master_seed`.

    Runs are mutually independent and reproducible regardless of how many
    workers execute them or in which order.
    """
    if index < 0:
        raise ValueError("run index must be non-negative")
    return splitmix64((master_seed & _MASK) + index * _GAMMA)
