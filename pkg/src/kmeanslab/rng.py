"""Counter-based random streams with an explicit Gaussian transform.

Every random quantity in the package is drawn from a :class:`Stream`, which
wraps numpy's Philox4x64 counter-based bit generator.  Raw 64-bit words are
turned into uniforms by taking the top 53 bits and centring them in their
bucket, so uniforms lie in the open interval (0, 1).  Gaussians use the
Box-Muller transform on consecutive uniform pairs (first uniform feeds the
radius, second the angle); the cosine branch comes first, then the sine
branch.  Nothing depends on numpy's ziggurat or on its Generator API, so a
stream is fully determined by its 64-bit seed.

Seeds for sub-experiments come from :func:`derive_seed`, which hashes an
arbitrary tuple of keys with BLAKE2b and folds the digest into the master
seed through splitmix64.  Seeds therefore depend on *what* is being run,
never on the order in which work is scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / float(1 << 53)


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_bytes(key) -> bytes:
    if isinstance(key, float):
        # repr round-trips every double exactly
        return b"f" + repr(key).encode()
    if isinstance(key, (bool, np.bool_)):
        return b"b" + str(bool(key)).encode()
    if isinstance(key, (int, np.integer)):
        return b"i" + str(int(key)).encode()
    if isinstance(key, (np.floating,)):
        return b"f" + repr(float(key)).encode()
    if isinstance(key, str):
        return b"s" + key.encode()
    if isinstance(key, (tuple, list)):
        return b"(" + b",".join(_key_bytes(k) for k in key) + b")"
    raise TypeError(f"unsupported seed key type: {type(key).__name__}")


def derive_seed(master_seed: int, *keys) -> int:
    """Mix ``master_seed`` with a tuple of keys into a new 64-bit seed."""
    digest = hashlib.blake2b(_key_bytes(tuple(keys)), digest_size=8).digest()
    h = int.from_bytes(digest, "little")
    return splitmix64(splitmix64(int(master_seed) & MASK64) ^ h)


class Stream:
    """Sequential random stream keyed by a 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._bitgen = np.random.Philox(key=self.seed)

    def raw(self, size: int) -> np.ndarray:
        return self._bitgen.random_raw(int(size))

    def uniform(self, size: int) -> np.ndarray:
        """Uniforms in the open interval (0, 1)."""
        words = self.raw(size)
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53

    def normal(self, shape) -> np.ndarray:
        """Standard normals via Box-Muller, returned with the given shape."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log(u[:, 0]))
        angle = _TWO_PI * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.reshape(-1)[:count].reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` (stable sort of raw keys)."""
        return np.argsort(self.raw(n), kind="stable")

    def choice(self, weights: np.ndarray) -> int:
        """Draw an index with probability proportional to ``weights``."""
        cdf = np.cumsum(np.asarray(weights, dtype=float))
        total = cdf[-1]
        if not total > 0:
            raise ValueError("weights must have positive total mass")
        u = self.uniform(1)[0] * total
        idx = int(np.searchsorted(cdf, u, side="right"))
        return min(idx, len(cdf) - 1)

    def integer(self, high: int) -> int:
        """Uniform integer in ``[0, high)``."""
        return self.choice(np.ones(int(high)))
