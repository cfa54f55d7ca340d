"""Counter-based pseudo-noise streams.

Each draw is a pure function of (seed, stream tag, index): the index is
hashed through the splitmix64 finalizer into a uniform, then mapped to a
normal via the inverse CDF. No generator state exists, so draws are
reproducible per SNP regardless of execution order or parallel scheduling.
"""

import numpy as np
from scipy.special import ndtri

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix_int(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def stream_key(seed, tag):
    """64-bit key for one (seed, stream) pair."""
    return _mix_int((int(seed) & _MASK) + _GOLDEN * (int(tag) + 1))


def counter_uniforms(seed, tag, n, start=0):
    """n uniforms in (0, 1) for indices start..start+n-1 of the stream."""
    key = stream_key(seed, tag)
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = np.uint64(key) + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    # 52 high bits, centered in the bucket: strictly inside (0, 1)
    return ((z >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0 ** -52


def counter_normals(seed, tag, n, sd=1.0, start=0):
    """n N(0, sd^2) draws for indices start..start+n-1 of the stream."""
    return sd * ndtri(counter_uniforms(seed, tag, n, start=start))


def derive_seed(entropy):
    """Collapse a tuple of integers into one 64-bit seed, deterministically."""
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
